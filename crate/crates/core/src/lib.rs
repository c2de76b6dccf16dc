//! Topological complexity of labeled data and the topological capacity of
//! fully-connected ReLU classifiers.
pub mod config;
pub mod data;
pub mod error;
pub mod lle;
pub mod mlp;
pub mod openml;
pub mod ph;
pub mod region;
pub mod report;
pub mod select;
pub mod sweep;
pub mod synth;

pub use data::LabeledPointCloud;
pub use error::{Error, Result};
