//! Matrix-free forms of `F̃ = F_L* ⊗ D_u` and `Φ = W_v F̃`.
//!
//! Neither operator ever materializes `F̃`. A product `F̃ vec(Λ)` is evaluated
//! as `vec(D_u Λ F_Lᴴ)` and `F̃ᴴ vec(B)` as `vec(D_uᴴ B F_L)`; pilot `t` of
//! `Φ x` is then `v_tᴴ (D_u Λ F_Lᴴ) w_t`.

use crate::array_dictionary::DictionarySet;
use crate::linalg::{kron_vec, unvec, vec_of, CMatrix, CVector, LinearOperator, ZERO};

/// `F̃ = F_L* ⊗ D_u` as an operator `ℂ^{M_G N_G} → ℂ^{M N}`.
#[derive(Debug, Clone)]
pub struct CascadeSynthesis {
    d_u: CMatrix,
    f_l: CMatrix,
}

impl CascadeSynthesis {
    pub fn new(d_u: &CMatrix, dicts: &DictionarySet) -> Self {
        Self {
            d_u: d_u.clone(),
            f_l: dicts.f_l.clone(),
        }
    }
}

impl LinearOperator for CascadeSynthesis {
    fn nrows(&self) -> usize {
        self.d_u.nrows() * self.f_l.nrows()
    }

    fn ncols(&self) -> usize {
        self.d_u.ncols() * self.f_l.ncols()
    }

    fn apply(&self, x: &CVector) -> CVector {
        let lambda = unvec(x, self.d_u.ncols(), self.f_l.ncols());
        vec_of(&(&self.d_u * (lambda * self.f_l.adjoint())))
    }

    fn adjoint_apply(&self, r: &CVector) -> CVector {
        let b = unvec(r, self.d_u.nrows(), self.f_l.nrows());
        vec_of(&(self.d_u.ad_mul(&b) * &self.f_l))
    }

    fn column(&self, j: usize) -> CVector {
        let mg = self.d_u.ncols();
        let left = self.f_l.column(j / mg).map(|z| z.conj());
        kron_vec(&left, &self.d_u.column(j % mg).into_owned())
    }

    fn column_norms_sq(&self) -> Vec<f64> {
        let d: Vec<f64> = self.d_u.column_iter().map(|c| c.norm_squared()).collect();
        let f: Vec<f64> = self.f_l.column_iter().map(|c| c.norm_squared()).collect();
        f.iter().flat_map(|a| d.iter().map(move |b| a * b)).collect()
    }
}

/// `Φ = W_v F̃` for one training sequence.
///
/// Stores the per-pilot projections `P = Wᵀ F_L*` (`T × N_G`) and
/// `Q = Vᴴ D_u` (`T × M_G`), so row `t` of `Φ` is `P(t,:) ⊗ Q(t,:)` and any
/// single column costs `O(T)`.
#[derive(Debug, Clone)]
pub struct StructuredSensing {
    d_u: CMatrix,
    f_l: CMatrix,
    /// `N × T`, column `t` is `w(t)`.
    precoders: CMatrix,
    /// `M × T`, column `t` is `v(t)`.
    phases: CMatrix,
    p: CMatrix,
    q: CMatrix,
}

impl StructuredSensing {
    pub fn new(d_u: &CMatrix, dicts: &DictionarySet, precoders: &CMatrix, phases: &CMatrix) -> Self {
        let p = precoders.transpose() * dicts.f_l.map(|z| z.conj());
        let q = phases.ad_mul(d_u);
        Self {
            d_u: d_u.clone(),
            f_l: dicts.f_l.clone(),
            precoders: precoders.clone(),
            phases: phases.clone(),
            p,
            q,
        }
    }

    /// Row `t` of `Φ`, materialized.
    pub fn row(&self, t: usize) -> CVector {
        kron_vec(
            &self.p.row(t).transpose(),
            &self.q.row(t).transpose(),
        )
    }

    /// Dense `Φ`. Only sensible at small scale.
    pub fn to_dense(&self) -> CMatrix {
        let t = self.precoders.ncols();
        let mut out = CMatrix::zeros(t, self.ncols());
        for i in 0..t {
            out.set_row(i, &self.row(i).transpose());
        }
        out
    }
}

impl LinearOperator for StructuredSensing {
    fn nrows(&self) -> usize {
        self.precoders.ncols()
    }

    fn ncols(&self) -> usize {
        self.d_u.ncols() * self.f_l.ncols()
    }

    fn apply(&self, x: &CVector) -> CVector {
        let lambda = unvec(x, self.d_u.ncols(), self.f_l.ncols());
        let h = &self.d_u * (lambda * self.f_l.adjoint());
        let hw = h * &self.precoders;
        CVector::from_iterator(
            hw.ncols(),
            hw.column_iter().zip(self.phases.column_iter()).map(|(a, v)| {
                a.iter()
                    .zip(v.iter())
                    .fold(ZERO, |acc, (a, v)| acc + v.conj() * a)
            }),
        )
    }

    fn adjoint_apply(&self, r: &CVector) -> CVector {
        let mut scaled = self.phases.clone();
        for (t, mut col) in scaled.column_iter_mut().enumerate() {
            col *= r[t];
        }
        let b = scaled * self.precoders.adjoint();
        vec_of(&(self.d_u.ad_mul(&b) * &self.f_l))
    }

    fn column(&self, j: usize) -> CVector {
        let mg = self.d_u.ncols();
        let (i, jj) = (j % mg, j / mg);
        CVector::from_iterator(
            self.nrows(),
            (0..self.nrows()).map(|t| self.p[(t, jj)] * self.q[(t, i)]),
        )
    }

    fn column_norms_sq(&self) -> Vec<f64> {
        let p2 = self.p.map(|z| z.norm_sqr());
        let q2 = self.q.map(|z| z.norm_sqr());
        // norms(i, jj) = Σ_t |Q(t,i)|² |P(t,jj)|², laid out column-major.
        let table = q2.transpose() * p2;
        table.as_slice().to_vec()
    }
}
