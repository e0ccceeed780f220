//! Numeric building blocks: dense matrices, the seeded random stream and the
//! special functions behind Student-t p-values.

mod matrix;
mod rng;
mod special;

pub use matrix::{matmul, Matrix};
pub use rng::{derive_seed, RngState};
pub use special::{ln_beta, regularized_incomplete_beta, student_t_two_sided_p};

/// Logistic sigmoid in the branch form that never overflows `exp`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
