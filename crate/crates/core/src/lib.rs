//! Compressed estimation of the cascade (BS → IRS → user) channel in
//! IRS-assisted mmWave links.
//!
//! The crate is organized bottom-up:
//!
//! - [`array_dictionary`]: steering vectors and overcomplete DFT-grid dictionaries
//!   for the BS uniform linear array and the IRS uniform planar array.
//! - [`channel_model`]: geometric Rician channel draws for `G` (BS → IRS) and
//!   `h_r` (IRS → user), and the cascade `H = diag(h_rᴴ) G`.
//! - [`cascade_sparse`]: the reduced sparse representation `H = D_u Λ F_Lᴴ`, the
//!   sensing operator `Φ`, and the multi-antenna receiver extension.
//! - [`solvers`]: OMP, EM-BG-GAMP and least-squares baselines.
//! - [`beamforming`]: phase optimization on a cascade channel, NMSE and ARSPR.
//! - [`experiments`]: Monte Carlo sweeps, presets, CSV/JSON reporting and the
//!   built-in verification checklist.

pub mod array_dictionary;
pub mod beamforming;
pub mod cascade_sparse;
pub mod channel_model;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
