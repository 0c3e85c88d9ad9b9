//! Dense numeric kernel shared by the recurrent layers and the network head.
//!
//! Everything is `f64` and row-major. The kernels are deliberately plain
//! loops with a fixed summation order so that results are bitwise
//! reproducible run to run.

mod adam;
mod gradcheck;
mod matrix;
mod ops;
mod rng;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error, DEFAULT_STEP};
pub use matrix::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Matrix};
pub(crate) use matrix::{gemm_into, Lhs, Rhs};
pub use ops::{
    affine, cross_entropy, init_params, relu, relu_backward, sigmoid, softmax, softmax_row, Init,
};
pub use rng::Rng;
