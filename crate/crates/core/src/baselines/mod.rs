//! Comparison recommenders: skip-gram item embeddings, implicit-feedback
//! matrix factorization and FPMC.

pub mod fpmc;
pub mod w2v;
pub mod wmf;

pub use fpmc::{fpmc_train, FpmcFactors, FpmcParams};
pub use w2v::{w2v_train, ItemEmbeddings, W2vParams, Word2Vec};
pub use wmf::{wmf_train, CountMatrix, WmfFactors, WmfParams};
