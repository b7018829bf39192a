use std::path::Path;
use std::process::Command;

fn gridrel(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gridrel")).args(args).output().unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

const FILES: [&str; 4] = ["iterations.csv", "summary.csv", "load_points.csv", "metadata.json"];

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (out, workers) in [(&a, "1"), (&b, "8")] {
        let o = gridrel(&[
            "simulate", "--scenario", "case4", "--iterations", "6", "--seed", "7", "--workers", workers, "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in FILES {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let rows = String::from_utf8(read(&a, "iterations.csv")).unwrap();
    assert_eq!(rows.lines().count(), 7);
}

#[test]
fn all_scenarios_get_their_own_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gridrel(&["simulate", "--scenario", "all", "--iterations", "1", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for case in ["case1", "case2", "case3", "case4"] {
        for f in FILES {
            assert!(tmp.path().join(case).join(f).is_file(), "{case}/{f}");
        }
    }
}

#[test]
fn exported_case_reads_back() {
    let tmp = tempfile::tempdir().unwrap();
    let net = tmp.path().join("ieee33.net");
    let o = gridrel(&["export-case", "ieee33", "--out", net.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&net).unwrap();
    gridrel::io::netfile::parse_network(&text).unwrap();
    let out = tmp.path().join("run");
    let o = gridrel(&[
        "analytical",
        "--network",
        "builtin:feeder6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_input_is_reported() {
    let o = gridrel(&["simulate", "--network", "/no/such/file.net", "--iterations", "1"]);
    assert!(!o.status.success());
    assert!(!o.stderr.is_empty());
    let o = gridrel(&["simulate", "--iterations", "zero"]);
    assert!(!o.status.success());
}
