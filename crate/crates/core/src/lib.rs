//! Daily load-profile segmentation: overpopulated clustering, DTW barycentre
//! centroids and complexity-invariant merging down to a compact library.

pub mod cvi;
pub mod dataset;
pub mod dba;
pub mod distance;
pub mod engines;
pub mod error;
pub mod evaluation;
pub mod merging;
pub mod pipeline;

pub use error::{Error, Result};
