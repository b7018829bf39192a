//! File formats and bundled cases.

pub mod netfile;
pub mod timeseries;
pub mod scenario;
pub mod results;
