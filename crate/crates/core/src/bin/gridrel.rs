fn main() {
    env_logger::init();
    std::process::exit(gridrel::cli::run_cli(std::env::args_os()));
}
