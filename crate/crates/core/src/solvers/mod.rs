//! Sparse recovery of `x` from `y = Φ x + ε`, and least-squares baselines.

mod gamp;
mod least_squares;
mod omp;

pub use gamp::{gamp_em_bg, GampConfig, GampOutput, GampState};
pub use least_squares::{conventional_ls, oracle_ls, oracle_support_from_truth, ConventionalLs};
pub use omp::{omp, OmpConfig};

use crate::linalg::CVector;

/// Result of one sparse recovery run.
#[derive(Debug, Clone)]
pub struct SparseEstimate {
    pub x_hat: CVector,
    /// Selected (OMP, oracle) or active (GAMP) indices, ascending.
    pub support: Vec<usize>,
    pub iterations: usize,
    /// `‖y − Φ x̂‖₂`.
    pub residual_norm: f64,
    pub converged: bool,
    /// Residual norm after each iteration, starting with `‖y‖`.
    pub residual_history: Vec<f64>,
}

impl SparseEstimate {
    pub(crate) fn zero(n: usize, y_norm: f64) -> Self {
        Self {
            x_hat: CVector::zeros(n),
            support: Vec::new(),
            iterations: 0,
            residual_norm: y_norm,
            converged: true,
            residual_history: vec![y_norm],
        }
    }
}
