//! File formats, reports, parallel drivers and the decision pipeline for
//! probabilistic mutation testing. The numerical work lives in `pmt_core`.

pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
pub use pmt_core;
