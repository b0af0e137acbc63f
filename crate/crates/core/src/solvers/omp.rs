use serde::{Deserialize, Serialize};

use super::SparseEstimate;
use crate::linalg::{norm_sq, CMatrix, CVector, LinearOperator, C64, ZERO};
use crate::{Error, Result};

fn default_max_support() -> usize {
    32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmpConfig {
    /// Upper bound on the number of selected atoms. Clamped to the number of
    /// measurements.
    #[serde(default = "default_max_support")]
    pub max_support: usize,
    /// Stop once `‖r‖₂` falls to this value. `None` means `1e-6 · ‖y‖`.
    #[serde(default)]
    pub residual_threshold: Option<f64>,
}

impl Default for OmpConfig {
    fn default() -> Self {
        Self {
            max_support: default_max_support(),
            residual_threshold: None,
        }
    }
}

impl OmpConfig {
    /// Threshold `1.1 · √T · σ` for a known noise level.
    pub fn with_noise(mut self, pilots: usize, noise_std: f64) -> Self {
        if noise_std > 0.0 {
            self.residual_threshold = Some(1.1 * (pilots as f64).sqrt() * noise_std);
        }
        self
    }
}

/// Orthogonal matching pursuit.
///
/// Each iteration picks the column with the largest normalized correlation
/// `|φ_jᴴ r| / ‖φ_j‖` and re-fits all selected coefficients by least squares.
/// The least-squares fit is kept as an incrementally grown QR factorization
/// (modified Gram-Schmidt with one re-orthogonalization pass).
pub fn omp<A: LinearOperator + ?Sized>(op: &A, y: &CVector, cfg: &OmpConfig) -> Result<SparseEstimate> {
    if y.len() != op.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "y has {} entries, operator has {} rows",
            y.len(),
            op.nrows()
        )));
    }
    let n = op.ncols();
    let y_norm = norm_sq(y).sqrt();
    if y_norm == 0.0 {
        return Ok(SparseEstimate::zero(n, 0.0));
    }
    let threshold = cfg.residual_threshold.unwrap_or(1e-6 * y_norm);
    let max_support = cfg.max_support.min(op.nrows());

    let inv_norm: Vec<f64> = op
        .column_norms_sq()
        .into_iter()
        .map(|s| if s > 1e-300 { 1.0 / s.sqrt() } else { 0.0 })
        .collect();
    let mut blocked: Vec<bool> = inv_norm.iter().map(|&w| w == 0.0).collect();

    let mut support: Vec<usize> = Vec::new();
    let mut q_cols: Vec<CVector> = Vec::new();
    let mut r_cols: Vec<Vec<C64>> = Vec::new();
    let mut residual = y.clone();
    let mut history = vec![y_norm];
    let mut iterations = 0;

    while support.len() < max_support && *history.last().unwrap() > threshold {
        iterations += 1;
        let corr = op.adjoint_apply(&residual);
        let best = corr
            .iter()
            .enumerate()
            .filter(|(j, _)| !blocked[*j])
            .map(|(j, c)| (j, c.norm() * inv_norm[j]))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((j, score)) = best else { break };
        if score == 0.0 {
            break;
        }
        blocked[j] = true;

        let atom = op.column(j);
        let atom_norm = norm_sq(&atom).sqrt();
        let mut perp = atom.clone();
        let mut coeffs = vec![ZERO; q_cols.len()];
        for _ in 0..2 {
            for (k, q) in q_cols.iter().enumerate() {
                let c = q.dotc(&perp);
                perp.axpy(-c, q, C64::new(1.0, 0.0));
                coeffs[k] += c;
            }
        }
        let perp_norm = norm_sq(&perp).sqrt();
        if perp_norm <= 1e-10 * atom_norm {
            // Linearly dependent on the current support.
            continue;
        }
        let q = perp / C64::new(perp_norm, 0.0);
        let proj = q.dotc(&residual);
        residual.axpy(-proj, &q, C64::new(1.0, 0.0));
        coeffs.push(C64::new(perp_norm, 0.0));
        r_cols.push(coeffs);
        q_cols.push(q);
        support.push(j);
        history.push(norm_sq(&residual).sqrt());
    }

    let k = support.len();
    let mut x_hat = CVector::zeros(n);
    if k > 0 {
        let mut r = CMatrix::zeros(k, k);
        for (c, col) in r_cols.iter().enumerate() {
            for (row, v) in col.iter().enumerate() {
                r[(row, c)] = *v;
            }
        }
        let qty = CVector::from_iterator(k, q_cols.iter().map(|q| q.dotc(y)));
        let coef = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::InvalidDimension("singular OMP factor".into()))?;
        for (idx, &j) in support.iter().enumerate() {
            x_hat[j] = coef[idx];
        }
    }
    let residual_norm = norm_sq(&(y - op.apply(&x_hat))).sqrt();
    let converged = residual_norm <= threshold * (1.0 + 1e-9);
    let mut sorted = support;
    sorted.sort_unstable();
    Ok(SparseEstimate {
        x_hat,
        support: sorted,
        iterations,
        residual_norm,
        converged,
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_gaussian;
    use proptest::prelude::*;
    use rand::seq::index::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMatrix {
        CMatrix::from_fn(m, n, |_, _| complex_gaussian(rng, 1.0 / m as f64))
    }

    #[test]
    fn zero_measurements_give_zero_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let phi = gaussian(&mut rng, 8, 20);
        let est = omp(&phi, &CVector::zeros(8), &OmpConfig::default()).unwrap();
        assert!(est.support.is_empty());
        assert!(est.x_hat.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn single_atom() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = gaussian(&mut rng, 16, 40);
        let c = C64::new(-0.7, 2.1);
        let y = phi.column(13) * c;
        let est = omp(&phi, &y, &OmpConfig::default()).unwrap();
        assert_eq!(est.support, vec![13]);
        assert!((est.x_hat[13] - c).norm() < 1e-8);
        assert!(est.converged);
    }

    #[test]
    fn recovers_two_spikes_on_gaussian_matrices() {
        let mut ok = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi = gaussian(&mut rng, 32, 256);
            let planted: Vec<usize> = {
                let mut s = sample(&mut rng, 256, 2).into_vec();
                s.sort_unstable();
                s
            };
            let mut x = CVector::zeros(256);
            for &j in &planted {
                x[j] = complex_gaussian(&mut rng, 1.0);
            }
            let y = &phi * &x;
            let est = omp(&phi, &y, &OmpConfig::default()).unwrap();
            if est.support == planted {
                ok += 1;
            }
        }
        assert!(ok >= 95, "recovered {ok}/100");
    }

    #[test]
    fn zero_columns_are_never_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut phi = gaussian(&mut rng, 10, 30);
        phi.column_mut(4).fill(ZERO);
        let y = CVector::from_fn(10, |_, _| complex_gaussian(&mut rng, 1.0));
        let est = omp(&phi, &y, &OmpConfig { max_support: 10, residual_threshold: None }).unwrap();
        assert!(!est.support.contains(&4));
    }

    #[test]
    fn non_convergence_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = gaussian(&mut rng, 20, 60);
        let y = CVector::from_fn(20, |_, _| complex_gaussian(&mut rng, 1.0));
        let est = omp(&phi, &y, &OmpConfig { max_support: 3, residual_threshold: None }).unwrap();
        assert_eq!(est.support.len(), 3);
        assert!(!est.converged);
        assert!(omp(&phi, &CVector::zeros(5), &OmpConfig::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn residuals_decrease_and_atoms_are_unique(seed in 0u64..10_000, k in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi = gaussian(&mut rng, 24, 48);
            let y = CVector::from_fn(24, |_, _| complex_gaussian(&mut rng, 1.0));
            let est = omp(&phi, &y, &OmpConfig { max_support: k, residual_threshold: Some(0.0) }).unwrap();
            for w in est.residual_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
            let mut s = est.support.clone();
            s.dedup();
            prop_assert_eq!(s.len(), est.support.len());
            prop_assert!((est.residual_norm - est.residual_history.last().unwrap()).abs() < 1e-9);
            for j in 0..48 {
                if !est.support.contains(&j) {
                    prop_assert_eq!(est.x_hat[j], ZERO);
                }
            }
        }
    }
}
