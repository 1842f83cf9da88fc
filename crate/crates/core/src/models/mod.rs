//! Neural next-song recommenders.

pub mod hyper;
pub mod neural;

pub use hyper::{Architecture, DropoutSemantics, Hyperparams};
pub use neural::{NeuralGrads, NeuralParams, NeuralRecommender};
