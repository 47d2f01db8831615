//! The neural solution operator (factorized Green's-function model), the
//! direct-regression baseline, and their shared training loop.

pub mod baseline;
pub mod model;
pub mod train;

pub use baseline::DirectRegressor;
pub use model::{coordinate_features, materialize_neural_green, Features, NgfConfig, NgfModel, PredictionBundle};
pub use train::{mean_split_error, train, EpochStats, TrainConfig, TrainableModel};
