//! Dense kernels with hand-written backward passes.

pub mod adagrad;
pub mod gradcheck;
pub mod init;
pub mod matrix;
pub mod ops;

pub use adagrad::{AdagradConfig, AdagradState};
pub use gradcheck::grad_check;
pub use init::glorot_init;
pub use matrix::Matrix;
pub use ops::{
    affine, affine_backward, concat, conv1d, conv1d_backward, dropout, embed_lookup, relu,
    relu_backward, softmax, softmax_xent, softmax_xent_backward, split_grad, ConvFilters, Mode,
    SparseRows,
};
