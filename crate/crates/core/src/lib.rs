pub mod aggregation;
pub mod cli;
pub mod distribution;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod geometry;
pub mod label_space;
pub mod labels;
pub mod pano;
pub mod sfm;
pub mod synthetic;

pub use error::{Error, Result};
