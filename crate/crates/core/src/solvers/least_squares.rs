use super::{omp, OmpConfig, SparseEstimate};
use crate::array_dictionary::DictionarySet;
use crate::cascade_sparse::{CascadeRepresentation, CascadeSynthesis, MergeMap};
use crate::channel_model::ChannelRealization;
use crate::linalg::{norm_sq, vec_of, CMatrix, CVector, LinearOperator};
use crate::{Error, Result};

/// Least squares restricted to a known support.
///
/// A rank-deficient restriction falls back to the minimum-norm solution and
/// is reported with `converged = false`.
pub fn oracle_ls<A: LinearOperator + ?Sized>(
    op: &A,
    y: &CVector,
    support: &[usize],
) -> Result<SparseEstimate> {
    if y.len() != op.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "y has {} entries, operator has {} rows",
            y.len(),
            op.nrows()
        )));
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= op.ncols()) {
        return Err(Error::ShapeMismatch(format!(
            "support index {bad} out of range for {} columns",
            op.ncols()
        )));
    }
    let y_norm = norm_sq(y).sqrt();
    if support.is_empty() {
        return Ok(SparseEstimate::zero(op.ncols(), y_norm));
    }
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();

    let a = op.gather_columns(&support);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = smax * 1e-12 * a.nrows().max(a.ncols()) as f64;
    let rank = svd.rank(eps);
    let coef = svd
        .solve(y, eps)
        .map_err(|e| Error::InvalidDimension(e.to_string()))?;

    let mut x_hat = CVector::zeros(op.ncols());
    for (k, &j) in support.iter().enumerate() {
        x_hat[j] = coef[k];
    }
    let residual_norm = norm_sq(&(y - &a * &coef)).sqrt();
    Ok(SparseEstimate {
        x_hat,
        support,
        iterations: 1,
        residual_norm,
        converged: rank == a.ncols(),
        residual_history: vec![y_norm, residual_norm],
    })
}

/// Full least-squares estimate of `vec(H)` from `y = W_v vec(H) + ε`.
#[derive(Debug, Clone)]
pub struct ConventionalLs {
    /// Column-major `vec(Ĥ)`.
    pub h_vec: CVector,
    /// Upper-triangular factor of `W_v = Q R`.
    pub r_factor: CMatrix,
}

impl ConventionalLs {
    pub fn h_hat(&self, m: usize, n: usize) -> CMatrix {
        crate::linalg::unvec(&self.h_vec, m, n)
    }

    /// `trace((W_vᴴ W_v)⁻¹) = ‖R⁻¹‖_F²`, so `σ² · trace` is the expected
    /// squared estimation error.
    pub fn error_trace(&self) -> f64 {
        let n = self.r_factor.ncols();
        let inv = self
            .r_factor
            .solve_upper_triangular(&CMatrix::identity(n, n))
            .expect("R factor is nonsingular");
        crate::linalg::frobenius_sq(&inv)
    }
}

/// Solve the overdetermined system by Householder QR.
pub fn conventional_ls(w_v: &CMatrix, y: &CVector) -> Result<ConventionalLs> {
    let (pilots, unknowns) = w_v.shape();
    if pilots < unknowns {
        return Err(Error::Underdetermined { pilots, unknowns });
    }
    if y.len() != pilots {
        return Err(Error::ShapeMismatch(format!(
            "y has {} entries, W_v has {pilots} rows",
            y.len()
        )));
    }
    let qr = w_v.clone().qr();
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let r_factor = qr.r();
    let rhs = qty.rows(0, unknowns).into_owned();
    let h_vec = r_factor
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::InvalidDimension("training matrix is rank deficient".into()))?;
    Ok(ConventionalLs { h_vec, r_factor })
}

/// Surrogate "true support" of a cascade channel, at most `k` atoms.
///
/// An on-grid draw has an exact sparse `Λ`; its `k` largest entries are
/// returned. Off-grid there is no exact support, so the atoms are those OMP
/// selects when it observes `vec(H)` itself, noise-free, through
/// `F̃ = F_L* ⊗ D_u`: a greedy best `k`-term fit of the true channel.
pub fn oracle_support_from_truth(
    channel: &ChannelRealization,
    d_u: &CMatrix,
    dicts: &DictionarySet,
    k: usize,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if channel.h_cascade.shape() != (dicts.m(), dicts.n()) {
        return Err(Error::ShapeMismatch(format!(
            "cascade channel is {:?}, expected {}x{}",
            channel.h_cascade.shape(),
            dicts.m(),
            dicts.n()
        )));
    }
    if let Some(coeffs) = &channel.coefficients {
        let rep = CascadeRepresentation::from_coefficients(coeffs, &MergeMap::new(&dicts.grid))?;
        let x = rep.x();
        let mut ranked = rep.support();
        ranked.sort_by(|&a, &b| x[b].norm().total_cmp(&x[a].norm()).then(a.cmp(&b)));
        ranked.truncate(k);
        ranked.sort_unstable();
        return Ok(ranked);
    }
    let synth = CascadeSynthesis::new(d_u, dicts);
    let target = vec_of(&channel.h_cascade);
    let cfg = OmpConfig {
        max_support: k,
        residual_threshold: Some(1e-12 * norm_sq(&target).sqrt()),
    };
    Ok(omp(&synth, &target, &cfg)?.support)
}
