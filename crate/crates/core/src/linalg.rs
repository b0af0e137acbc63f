//! Complex matrix aliases and a few small helpers shared by every module.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `e^{jθ}`.
#[inline]
pub fn expj(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

/// Circularly symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Uniform phase on the unit circle.
pub fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    expj(rng.random_range(0.0..std::f64::consts::TAU))
}

/// Kronecker product of two column vectors, `a ⊗ b`.
pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Column-major `vec(·)`.
pub fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec(x: &CVector, rows: usize, cols: usize) -> CMatrix {
    assert_eq!(x.len(), rows * cols, "unvec: length {} != {rows}x{cols}", x.len());
    CMatrix::from_column_slice(rows, cols, x.as_slice())
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm_sq(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_error(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = frobenius_sq(&(a - b)).sqrt();
    let scale = frobenius_sq(b).sqrt();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Numerical rank from singular values above `tol · σ_max`.
pub fn numerical_rank(m: &CMatrix, tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// A linear map `ℂⁿ → ℂᵐ` that sparse solvers can probe without owning a
/// dense matrix.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A x`.
    fn apply(&self, x: &CVector) -> CVector;
    /// `Aᴴ r`.
    fn adjoint_apply(&self, r: &CVector) -> CVector;
    /// Column `j` of `A`.
    fn column(&self, j: usize) -> CVector;
    /// Squared 2-norm of every column.
    fn column_norms_sq(&self) -> Vec<f64>;

    /// `‖A‖_F²`.
    fn frobenius_sq(&self) -> f64 {
        self.column_norms_sq().iter().sum()
    }

    /// Dense copy of the columns listed in `cols`.
    fn gather_columns(&self, cols: &[usize]) -> CMatrix {
        let mut out = CMatrix::zeros(self.nrows(), cols.len());
        for (k, &j) in cols.iter().enumerate() {
            out.set_column(k, &self.column(j));
        }
        out
    }
}

impl LinearOperator for CMatrix {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &CVector) -> CVector {
        self * x
    }

    fn adjoint_apply(&self, r: &CVector) -> CVector {
        self.ad_mul(r)
    }

    fn column(&self, j: usize) -> CVector {
        self.column(j).into_owned()
    }

    fn column_norms_sq(&self) -> Vec<f64> {
        self.column_iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}
