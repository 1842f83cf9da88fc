//! Top-N evaluation: rank of the true next song, recall and precision over
//! a grid of cutoffs, order sweeps and curve export.

pub mod curves;
pub mod metrics;
pub mod sweep;

pub use curves::{curve_rows, emit_curves, read_curves, CurveRow};
pub use metrics::{evaluate, rank_of_target, EvalConfig, EvalReport, Protocol, UserHistory, DEFAULT_KS};
pub use sweep::{sweep_order, train_and_evaluate, training_rng, OrderReport, SweepData};
