//! Multi-antenna receiver extension.
//!
//! With `R = F_r Γ F_Pᴴ` the IRS → user channel, the end-to-end channel is
//! `H̄ = R Θ G = F_r Γ Ξ Σ F_Lᴴ` with `Ξ = F_Pᴴ Θ F_P` and `Θ = diag(v*)`. Since
//! `vec(Ξ) = D̄ v*` with `D̄ = F_Pᵀ ⊙ F_Pᴴ`, and `D̄` has `M_G` distinct rows
//! (its first `M_G`), `vec(H̄) = K x̄` with
//! `K = (D̄_u v*)ᵀ ⊗ (F_L* ⊗ F_r)` and `x̄ = vec(Λ̄)`.
//!
//! `K` depends on `v`, so the IRS phases are held fixed across training.
//! Everything here is dense and meant for small arrays.

use rand::Rng;

use super::MergeMap;
use crate::array_dictionary::{grid_dictionary, DictionarySet, UlaSpec};
use crate::channel_model::{
    check_unit_modulus, random_precoder, sample_paths, ChannelStatistics,
};
use crate::linalg::{complex_gaussian, kron_vec, CMatrix, CVector, ZERO};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct MimoRepresentation {
    pub rx: UlaSpec,
    /// `F_r`, `N_r × N_{G_r}`.
    pub f_r: CMatrix,
    /// `D̄_u`, `M_G × M`.
    pub d_bar_u: CMatrix,
    /// Fixed IRS phase vector used during training.
    pub v_phase: CVector,
    /// `K`, `N_r N × N_{G_r} N_G M_G`.
    pub k_op: CMatrix,
}

/// First `M_G` rows of `D̄`: row `p` is `F_P(:,0)ᵀ ⊙ conj(F_P(:,p))ᵀ`.
pub fn build_d_bar_u(dicts: &DictionarySet) -> CMatrix {
    let f_p = &dicts.f_p;
    CMatrix::from_fn(dicts.m_grid(), dicts.m(), |p, m| f_p[(m, 0)] * f_p[(m, p)].conj())
}

pub fn build_mimo_operator(
    dicts: &DictionarySet,
    rx: &UlaSpec,
    rx_grid: usize,
    v_phase: &CVector,
) -> Result<MimoRepresentation> {
    rx.validate()?;
    if rx_grid < rx.n_antennas {
        return Err(Error::GridTooCoarse {
            axis: "rx",
            grid: rx_grid,
            array: rx.n_antennas,
        });
    }
    if v_phase.len() != dicts.m() {
        return Err(Error::ShapeMismatch(format!(
            "phase vector has {} entries, IRS has {}",
            v_phase.len(),
            dicts.m()
        )));
    }
    check_unit_modulus(v_phase)?;
    let f_r = grid_dictionary(rx.n_antennas, rx_grid);
    let d_bar_u = build_d_bar_u(dicts);
    let b = &d_bar_u * v_phase.map(|z| z.conj());
    let k_op = b
        .transpose()
        .kronecker(&dicts.f_l.map(|z| z.conj()).kronecker(&f_r));
    Ok(MimoRepresentation {
        rx: *rx,
        f_r,
        d_bar_u,
        v_phase: v_phase.clone(),
        k_op,
    })
}

/// `Λ̄(:,i) = Σ_{n ∈ Q_i} J̄(:,n)` with `J̄ = Σᵀ ⊗ Γ`; column `q·M_G + p` of `J̄`
/// is `Σ(q,:)ᵀ ⊗ Γ(:,p)`.
pub fn merge_mimo_coefficients(sigma: &CMatrix, gamma: &CMatrix, merge: &MergeMap) -> Result<CMatrix> {
    let mg = merge.m_grid();
    if sigma.nrows() != mg || gamma.ncols() != mg {
        return Err(Error::ShapeMismatch(format!(
            "Sigma has {} rows and Gamma {} columns, expected M_G = {mg}",
            sigma.nrows(),
            gamma.ncols()
        )));
    }
    let mut out = CMatrix::zeros(sigma.ncols() * gamma.nrows(), mg);
    let live_q: Vec<usize> = (0..mg)
        .filter(|&q| sigma.row(q).iter().any(|z| *z != ZERO))
        .collect();
    let live_p: Vec<usize> = (0..mg)
        .filter(|&p| gamma.column(p).iter().any(|z| *z != ZERO))
        .collect();
    for &q in &live_q {
        let s_row = sigma.row(q).transpose();
        for &p in &live_p {
            let i = merge.class_of_pair(q, p);
            let col = kron_vec(&s_row, &gamma.column(p).into_owned());
            let mut dst = out.column_mut(i);
            dst += col;
        }
    }
    Ok(out)
}

/// `H̄ = F_r Γ F_Pᴴ diag(v*) F_P Σ F_Lᴴ`, evaluated directly.
pub fn mimo_channel(
    f_r: &CMatrix,
    gamma: &CMatrix,
    dicts: &DictionarySet,
    sigma: &CMatrix,
    v_phase: &CVector,
) -> CMatrix {
    let theta = CMatrix::from_diagonal(&v_phase.map(|z| z.conj()));
    f_r * gamma * dicts.f_p.adjoint() * theta * &dicts.f_p * sigma * dicts.f_l.adjoint()
}

/// On-grid `Γ` (`N_{G_r} × M_G`) for an IRS → user link with `L'` paths. The
/// path's `departure` angle is read as its arrival angle at the receive ULA.
pub fn draw_on_grid_gamma<R: Rng + ?Sized>(
    rng: &mut R,
    stats: &ChannelStatistics,
    dicts: &DictionarySet,
    rx: &UlaSpec,
    rx_grid: usize,
) -> Result<CMatrix> {
    let paths = sample_paths(rng, stats.lprime_paths, stats.rician_k_db)?;
    let scale = ((rx.n_antennas * dicts.m()) as f64 / stats.pathloss_hr).sqrt();
    let mut gamma = CMatrix::zeros(rx_grid, dicts.m_grid());
    for p in &paths {
        let (u, v) = p.irs_frequencies(dicts.ula.spacing);
        let q = dicts.nearest_irs_index(u, v);
        let r = crate::array_dictionary::nearest_grid_index(p.bs_frequency(rx.spacing), rx_grid);
        gamma[(r, q)] += p.gain * scale;
    }
    Ok(gamma)
}

#[derive(Debug, Clone)]
pub struct MimoProblem {
    /// `N × T`.
    pub precoders: CMatrix,
    /// `N_r × T`.
    pub combiners: CMatrix,
    /// `W_f`, `T × N N_r`, row `t` equal to `w(t)ᵀ ⊗ f(t)ᴴ`.
    pub w_f: CMatrix,
    pub y: CVector,
}

/// Training measurements `y = W_f K x̄ + ε`.
pub fn assemble_mimo_problem<R: Rng + ?Sized>(
    mimo: &MimoRepresentation,
    x_bar: &CVector,
    pilots: usize,
    rng: &mut R,
    noise_std: f64,
) -> Result<MimoProblem> {
    if pilots == 0 {
        return Err(Error::InvalidDimension("at least one pilot is required".into()));
    }
    if x_bar.len() != mimo.k_op.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "x_bar has {} entries, K has {} columns",
            x_bar.len(),
            mimo.k_op.ncols()
        )));
    }
    let n = mimo.k_op.nrows() / mimo.rx.n_antennas;
    let nr = mimo.rx.n_antennas;
    let mut precoders = CMatrix::zeros(n, pilots);
    let mut combiners = CMatrix::zeros(nr, pilots);
    for t in 0..pilots {
        precoders.set_column(t, &random_precoder(rng, n));
        combiners.set_column(t, &random_precoder(rng, nr));
    }
    let w_f = CMatrix::from_fn(pilots, n * nr, |t, k| {
        precoders[(k / nr, t)] * combiners[(k % nr, t)].conj()
    });
    let mut y = &w_f * (&mimo.k_op * x_bar);
    for z in y.iter_mut() {
        *z += complex_gaussian(rng, 1.0) * noise_std;
    }
    Ok(MimoProblem {
        precoders,
        combiners,
        w_f,
        y,
    })
}
