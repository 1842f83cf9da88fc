//! Next-song recommendation from listening logs: data preparation, the
//! CNN-rec and NN-rec networks, three comparison baselines and top-N
//! evaluation.

pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod rank;
pub mod recommender;
pub mod rng;
pub mod zoo;

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use recommender::Recommender;
pub use rng::SeededRng;
pub use zoo::{AnyModel, ModelFamily, ModelSettings};
