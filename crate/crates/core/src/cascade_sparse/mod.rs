//! Sparse representation of the cascade channel.
//!
//! With `h_r = F_P α` and `G = F_P Σ F_Lᴴ`, the cascade channel factors as
//! `H = D (α* ⊗ Σ) F_Lᴴ` where `D = F_P* • F_P` is the transposed (row-wise)
//! Khatri-Rao product. Column `n = p·M_G + q` of `D` is `conj(F_P(:,p)) ⊙ F_P(:,q)`,
//! which on a periodic grid anchored at zero equals `F_P(:, q ⊖ p)/√M` where
//! `⊖` is per-axis modular subtraction. So `D` has only `M_G` distinct columns,
//! its first `M_G`, and `H = D_u Λ F_Lᴴ` with `Λ` the class-wise row sum of
//! `J = α* ⊗ Σ`.
//!
//! Vectorization is column-major throughout: `x = vec(Λ)` has entry
//! `j·M_G + i` equal to `Λ(i, j)`.

mod mimo;
mod operator;
mod problem;

pub use mimo::{
    assemble_mimo_problem, build_d_bar_u, build_mimo_operator, draw_on_grid_gamma,
    merge_mimo_coefficients, mimo_channel, MimoProblem, MimoRepresentation,
};
pub use operator::{CascadeSynthesis, StructuredSensing};
pub use problem::{
    assemble_problem, observe, sensing_row, training_matrix, NoiseSpec, Observation, OperatorMode,
    SensingOperator, SensingProblem, TrainingSequence,
};

use crate::array_dictionary::{DictionarySet, GridSpec};
use crate::channel_model::GridCoefficients;
use crate::linalg::{vec_of, CMatrix, CVector, C64, ZERO};
use crate::{Error, Result};

/// Partition of the `M_G²` columns of `D` into `M_G` classes of identical
/// columns, computed by index arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeMap {
    pub grid_x: usize,
    pub grid_y: usize,
}

impl MergeMap {
    pub fn new(grid: &GridSpec) -> Self {
        Self {
            grid_x: grid.m_grid_x,
            grid_y: grid.m_grid_y,
        }
    }

    pub fn m_grid(&self) -> usize {
        self.grid_x * self.grid_y
    }

    /// Class of the pair `(p, q)`: the grid index of `q ⊖ p`.
    #[inline]
    pub fn class_of_pair(&self, p: usize, q: usize) -> usize {
        let (px, py) = (p / self.grid_y, p % self.grid_y);
        let (qx, qy) = (q / self.grid_y, q % self.grid_y);
        let dx = (qx + self.grid_x - px) % self.grid_x;
        let dy = (qy + self.grid_y - py) % self.grid_y;
        dx * self.grid_y + dy
    }

    /// Class of column `n = p·M_G + q` of `D`.
    #[inline]
    pub fn class_of_column(&self, n: usize) -> usize {
        let mg = self.m_grid();
        self.class_of_pair(n / mg, n % mg)
    }

    /// Class of row `n = q·M_G + p` of `D̄ = F_Pᵀ ⊙ F_Pᴴ` (the grid index of `p ⊖ q`).
    #[inline]
    pub fn class_of_mimo_row(&self, n: usize) -> usize {
        let mg = self.m_grid();
        self.class_of_pair(n / mg, n % mg)
    }

    /// `representative_of[n]` for every column `n` of `D`.
    pub fn class_table(&self) -> Vec<usize> {
        let mg = self.m_grid();
        (0..mg * mg).map(|n| self.class_of_column(n)).collect()
    }

    /// Members `(p, q)` of class `i`, ordered by `p`.
    pub fn class_members(&self, i: usize) -> Vec<(usize, usize)> {
        let (ix, iy) = (i / self.grid_y, i % self.grid_y);
        (0..self.m_grid())
            .map(|p| {
                let (px, py) = (p / self.grid_y, p % self.grid_y);
                let q = ((px + ix) % self.grid_x) * self.grid_y + (py + iy) % self.grid_y;
                (p, q)
            })
            .collect()
    }
}

/// `D_u`: the first `M_G` columns of `D`, column `q` being
/// `conj(F_P(:,0)) ⊙ F_P(:,q)`.
pub fn build_d_u(dicts: &DictionarySet) -> CMatrix {
    let f_p = &dicts.f_p;
    let anchor = f_p.column(0).map(|z| z.conj());
    let mut d_u = f_p.clone();
    for mut col in d_u.column_iter_mut() {
        col.component_mul_assign(&anchor);
    }
    debug_assert!(
        (&d_u - d_u_closed_form(dicts)).iter().all(|z| z.norm() < 1e-12),
        "grid is not anchored at zero frequency"
    );
    d_u
}

/// `F_P/√M`, equal to [`build_d_u`] when the grid starts at frequency zero.
pub fn d_u_closed_form(dicts: &DictionarySet) -> CMatrix {
    &dicts.f_p * C64::new(1.0 / (dicts.m() as f64).sqrt(), 0.0)
}

/// Channel-independent part of the representation.
#[derive(Debug, Clone)]
pub struct CascadeBasis {
    pub d_u: CMatrix,
    pub merge: MergeMap,
}

impl CascadeBasis {
    pub fn new(dicts: &DictionarySet) -> Self {
        Self {
            d_u: build_d_u(dicts),
            merge: MergeMap::new(&dicts.grid),
        }
    }
}

/// `Λ` for one channel, with `x = vec(Λ)`.
#[derive(Debug, Clone)]
pub struct CascadeRepresentation {
    pub lambda: CMatrix,
}

impl CascadeRepresentation {
    pub fn from_coefficients(coeffs: &GridCoefficients, merge: &MergeMap) -> Result<Self> {
        Ok(Self {
            lambda: merge_coefficients(&coeffs.alpha, &coeffs.sigma, merge)?,
        })
    }

    pub fn x(&self) -> CVector {
        vec_of(&self.lambda)
    }

    /// Indices of the nonzero entries of `x`, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.lambda
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|(n, _)| n)
            .collect()
    }
}

/// `Λ(i,:) = Σ_{(p,q) ∈ S_i} conj(α_p) Σ(q,:)`.
pub fn merge_coefficients(alpha: &CVector, sigma: &CMatrix, merge: &MergeMap) -> Result<CMatrix> {
    let mg = merge.m_grid();
    if alpha.len() != mg || sigma.nrows() != mg {
        return Err(Error::ShapeMismatch(format!(
            "merge map has M_G = {mg}, alpha has {} entries and Sigma {} rows",
            alpha.len(),
            sigma.nrows()
        )));
    }
    let live_rows: Vec<usize> = (0..mg)
        .filter(|&q| sigma.row(q).iter().any(|z| *z != ZERO))
        .collect();
    let mut lambda = CMatrix::zeros(mg, sigma.ncols());
    for (p, a) in alpha.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        let a = a.conj();
        for &q in &live_rows {
            let i = merge.class_of_pair(p, q);
            for j in 0..sigma.ncols() {
                lambda[(i, j)] += a * sigma[(q, j)];
            }
        }
    }
    Ok(lambda)
}

/// `Ĥ = D_u Λ̂ F_Lᴴ`.
pub fn reconstruct_h(lambda: &CMatrix, d_u: &CMatrix, dicts: &DictionarySet) -> Result<CMatrix> {
    if lambda.shape() != (d_u.ncols(), dicts.f_l.ncols()) {
        return Err(Error::ShapeMismatch(format!(
            "Lambda is {:?}, expected {}x{}",
            lambda.shape(),
            d_u.ncols(),
            dicts.f_l.ncols()
        )));
    }
    Ok(d_u * (lambda * dicts.f_l.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_dictionary::{build_dictionaries, UlaSpec, UpaSpec};
    use crate::channel_model::{draw_channel, ChannelStatistics};
    use crate::linalg::{complex_gaussian, numerical_rank, relative_error, C64, ONE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dicts(n: usize, mx: usize, my: usize, grid: GridSpec) -> DictionarySet {
        build_dictionaries(
            UlaSpec::new(n).unwrap(),
            UpaSpec::new(mx, my).unwrap(),
            grid,
        )
        .unwrap()
    }

    /// D materialized by definition: row m is `F_P*(m,:) ⊗ F_P(m,:)`.
    fn brute_d(f_p: &CMatrix) -> CMatrix {
        let (m, mg) = f_p.shape();
        CMatrix::from_fn(m, mg * mg, |r, n| f_p[(r, n / mg)].conj() * f_p[(r, n % mg)])
    }

    #[test]
    fn scalar_d_u() {
        let d = dicts(1, 1, 1, GridSpec::new(1, 1, 1));
        let d_u = build_d_u(&d);
        assert_eq!(d_u.shape(), (1, 1));
        assert!((d_u[(0, 0)] - ONE).norm() < 1e-15);
    }

    #[test]
    fn d_u_matches_brute_force_columns() {
        let d = dicts(2, 2, 2, GridSpec::new(2, 2, 2));
        let full = brute_d(&d.f_p);
        assert_eq!(full.ncols(), 16);
        let d_u = build_d_u(&d);
        assert!((full.columns(0, 4) - &d_u).norm() < 1e-12);
        assert!((d_u_closed_form(&d) - &d_u).norm() < 1e-12);
    }

    #[test]
    fn d_u_paper_scale_magnitudes() {
        let d = dicts(16, 8, 8, GridSpec::new(64, 32, 32));
        let d_u = build_d_u(&d);
        assert_eq!(d_u.shape(), (64, 1024));
        for z in d_u.iter() {
            assert!((z.norm() - 1.0 / 64.0).abs() < 1e-14);
        }
    }

    #[test]
    fn merge_map_trivial_and_cardinality() {
        let m = MergeMap::new(&GridSpec::new(1, 1, 1));
        assert_eq!(m.class_table(), vec![0]);
        let m = MergeMap::new(&GridSpec::new(1, 3, 4));
        let mut counts = [0usize; 12];
        for c in m.class_table() {
            counts[c] += 1;
        }
        assert!(counts.iter().all(|&c| c == 12));
        for i in 0..12 {
            // Representatives: pair (0, i) is in class i.
            assert_eq!(m.class_of_pair(0, i), i);
            let members = m.class_members(i);
            assert_eq!(members.len(), 12);
            assert!(members.iter().all(|&(p, q)| m.class_of_pair(p, q) == i));
        }
    }

    #[test]
    fn merge_map_matches_column_dedup() {
        let d = dicts(2, 2, 2, GridSpec::new(2, 2, 2));
        let full = brute_d(&d.f_p);
        let merge = MergeMap::new(&d.grid);
        for n in 0..16 {
            let c = merge.class_of_column(n);
            assert!((full.column(n) - full.column(c)).norm() < 1e-10);
            for other in 0..4 {
                if other != c {
                    assert!((full.column(n) - full.column(other)).norm() > 1e-6);
                }
            }
        }
    }

    #[test]
    fn merge_coefficients_single_origin_path() {
        let merge = MergeMap::new(&GridSpec::new(3, 2, 2));
        let mut alpha = CVector::zeros(4);
        alpha[0] = ONE;
        let mut sigma = CMatrix::zeros(4, 3);
        sigma[(0, 0)] = ONE;
        let lambda = merge_coefficients(&alpha, &sigma, &merge).unwrap();
        let mut want = CMatrix::zeros(4, 3);
        want[(0, 0)] = ONE;
        assert_eq!(lambda, want);
        assert!(merge_coefficients(&CVector::zeros(3), &sigma, &merge).is_err());
    }

    #[test]
    fn merge_coefficients_sparsity_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let merge = MergeMap::new(&GridSpec::new(8, 4, 4));
        let mut alpha = CVector::zeros(16);
        alpha[5] = complex_gaussian(&mut rng, 1.0);
        let mut sigma = CMatrix::zeros(16, 8);
        for _ in 0..3 {
            sigma[(rng.random_range(0..16), rng.random_range(0..8))] = complex_gaussian(&mut rng, 1.0);
        }
        let lambda = merge_coefficients(&alpha, &sigma, &merge).unwrap();
        assert!(lambda.iter().filter(|z| z.norm() > 0.0).count() <= 3);
    }

    #[test]
    fn representation_identity_random_sparse() {
        let d = dicts(4, 3, 2, GridSpec::new(8, 6, 4));
        let basis = CascadeBasis::new(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let mut alpha = CVector::zeros(d.m_grid());
            let mut sigma = CMatrix::zeros(d.m_grid(), d.n_grid());
            for _ in 0..3 {
                alpha[rng.random_range(0..d.m_grid())] = complex_gaussian(&mut rng, 1.0);
                sigma[(rng.random_range(0..d.m_grid()), rng.random_range(0..d.n_grid()))] =
                    complex_gaussian(&mut rng, 1.0);
            }
            let lambda = merge_coefficients(&alpha, &sigma, &basis.merge).unwrap();
            let h_r = &d.f_p * &alpha;
            let g = &d.f_p * &sigma * d.f_l.adjoint();
            let lhs = CMatrix::from_diagonal(&h_r.map(|z| z.conj())) * g;
            let rhs = reconstruct_h(&lambda, &basis.d_u, &d).unwrap();
            assert!(relative_error(&rhs, &lhs) < 1e-10);
        }
    }

    #[test]
    fn reconstruct_cases() {
        let d = dicts(4, 2, 2, GridSpec::new(8, 4, 4));
        let basis = CascadeBasis::new(&d);
        let zero = CMatrix::zeros(16, 8);
        assert_eq!(reconstruct_h(&zero, &basis.d_u, &d).unwrap(), CMatrix::zeros(4, 4));
        let mut one = zero.clone();
        let c = C64::new(0.3, -1.2);
        one[(5, 3)] = c;
        let h = reconstruct_h(&one, &basis.d_u, &d).unwrap();
        let want = basis.d_u.column(5) * d.f_l.column(3).adjoint() * c;
        assert!((&h - want).norm() < 1e-12);
        assert_eq!(numerical_rank(&h, 1e-10), 1);
        assert!(reconstruct_h(&CMatrix::zeros(3, 8), &basis.d_u, &d).is_err());

        let stats = ChannelStatistics::default().on_grid();
        let ch = draw_channel(&mut ChaCha8Rng::seed_from_u64(3), &stats, &d).unwrap();
        let rep =
            CascadeRepresentation::from_coefficients(ch.coefficients.as_ref().unwrap(), &basis.merge)
                .unwrap();
        let h = reconstruct_h(&rep.lambda, &basis.d_u, &d).unwrap();
        assert!(relative_error(&h, &ch.h_cascade) < 1e-10);
        assert!(rep.support().len() <= 9);
    }

}
