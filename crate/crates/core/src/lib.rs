pub mod dataset;
pub mod digest;
pub mod embed;
pub mod error;
pub mod eval;
pub mod knn;
pub mod report;
pub mod select;

pub use error::{Error, Result};
