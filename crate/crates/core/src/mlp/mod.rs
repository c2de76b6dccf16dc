//! Fully-connected ReLU binary classifiers and their training loop.

mod model;
mod train;

pub use model::{init_model, Architecture, MlpModel, Workspace, MAX_H0, MAX_REPLICATION_DEPTH};
pub use train::{stratified_split, train, BatchSchedule, TrainConfig, TrainResult};
