pub mod analytical;
pub mod cli;
pub mod indices;
pub mod io;
pub mod loadflow;
pub mod lp;
pub mod model;
pub mod reliability;
pub mod shedding;
pub mod sim;
pub mod time;
