//! Geometric Rician channels for the BS → IRS link `G` and the IRS → user
//! link `h_r`, and the cascade `H = diag(h_rᴴ) G`.
//!
//! Each link has one LOS path with deterministic magnitude and uniform phase
//! plus `L − 1` NLOS paths with i.i.d. `CN(0, σ²)` gains. The Rician factor
//! fixes the LOS/NLOS power ratio and the total mean power is one. All angles
//! are drawn uniformly from `[−π/2, π/2]`.
//!
//! In [`AngleMode::OnGrid`] every path frequency is snapped to its nearest
//! dictionary grid point, so the channel has an exact sparse representation
//! `G = F_P Σ F_Lᴴ`, `h_r = F_P α` (used for the identity checks).

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array_dictionary::{
    angles_to_spatial_freq, steering, ula_spatial_freq, DictionarySet, UlaSpec, UpaSpec,
};
use crate::linalg::{complex_gaussian, expj, random_phase, CMatrix, CVector, C64, ZERO};
use crate::{Error, Result};

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub gain: C64,
    /// Azimuth at the IRS (arrival for `G`, departure for `h_r`).
    pub azimuth: f64,
    /// Elevation at the IRS.
    pub elevation: f64,
    /// Departure angle at the BS ULA. Only meaningful for `G` paths.
    pub departure: f64,
    pub is_los: bool,
}

impl PathComponent {
    /// IRS-side spatial frequencies `(u, v)`.
    pub fn irs_frequencies(&self, spacing: f64) -> (f64, f64) {
        angles_to_spatial_freq(self.azimuth, self.elevation, spacing)
    }

    pub fn bs_frequency(&self, spacing: f64) -> f64 {
        ula_spatial_freq(self.departure, spacing)
    }
}

fn default_rician_k_db() -> f64 {
    13.2
}
fn default_paths() -> usize {
    3
}
fn default_pathloss() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelStatistics {
    #[serde(default = "default_rician_k_db")]
    pub rician_k_db: f64,
    /// `L`, paths of `G`.
    #[serde(default = "default_paths")]
    pub l_paths: usize,
    /// `L'`, paths of `h_r`.
    #[serde(default = "default_paths")]
    pub lprime_paths: usize,
    /// `ρ`.
    #[serde(default = "default_pathloss")]
    pub pathloss_g: f64,
    /// `ε`.
    #[serde(default = "default_pathloss")]
    pub pathloss_hr: f64,
    #[serde(default)]
    pub angle_mode: AngleMode,
}

impl Default for ChannelStatistics {
    fn default() -> Self {
        Self {
            rician_k_db: default_rician_k_db(),
            l_paths: default_paths(),
            lprime_paths: default_paths(),
            pathloss_g: default_pathloss(),
            pathloss_hr: default_pathloss(),
            angle_mode: AngleMode::OffGrid,
        }
    }
}

impl ChannelStatistics {
    pub fn validate(&self) -> Result<()> {
        if self.l_paths == 0 || self.lprime_paths == 0 {
            return Err(Error::InvalidConfig("path counts must be at least 1".into()));
        }
        if !(self.pathloss_g > 0.0 && self.pathloss_hr > 0.0) {
            return Err(Error::InvalidConfig("path losses must be positive".into()));
        }
        if self.rician_k_db.is_nan() {
            return Err(Error::InvalidConfig("Rician factor is NaN".into()));
        }
        Ok(())
    }

    pub fn on_grid(mut self) -> Self {
        self.angle_mode = AngleMode::OnGrid;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMode {
    #[default]
    OffGrid,
    OnGrid,
}

/// Exact sparse coefficients of an on-grid draw.
#[derive(Debug, Clone)]
pub struct GridCoefficients {
    /// `α`, length `M_G`, with `h_r = F_P α`.
    pub alpha: CVector,
    /// `Σ`, `M_G × N_G`, with `G = F_P Σ F_Lᴴ`.
    pub sigma: CMatrix,
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub g: CMatrix,
    pub h_r: CVector,
    pub h_cascade: CMatrix,
    pub paths_g: Vec<PathComponent>,
    pub paths_hr: Vec<PathComponent>,
    /// Present only for on-grid draws.
    pub coefficients: Option<GridCoefficients>,
}

/// LOS power and per-path NLOS variance for a Rician factor in dB.
pub fn rician_powers(count: usize, rician_k_db: f64) -> (f64, f64) {
    if count == 1 {
        return (1.0, 0.0);
    }
    let nlos_paths = (count - 1) as f64;
    if rician_k_db == f64::INFINITY {
        return (1.0, 0.0);
    }
    let k = 10f64.powf(rician_k_db / 10.0);
    (k / (k + 1.0), 1.0 / ((k + 1.0) * nlos_paths))
}

/// Draw `count` paths: the first is LOS, the rest NLOS.
pub fn sample_paths<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    rician_k_db: f64,
) -> Result<Vec<PathComponent>> {
    if count == 0 {
        return Err(Error::InvalidDimension("a channel needs at least one path".into()));
    }
    let (los_power, nlos_var) = rician_powers(count, rician_k_db);
    let mut paths = Vec::with_capacity(count);
    for l in 0..count {
        let is_los = l == 0;
        let gain = if is_los {
            random_phase(rng) * los_power.sqrt()
        } else {
            complex_gaussian(rng, nlos_var)
        };
        let azimuth = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
        let elevation = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
        let departure = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
        paths.push(PathComponent {
            gain,
            azimuth,
            elevation,
            departure,
            is_los,
        });
    }
    Ok(paths)
}

/// `G = √(NM/ρ) Σ_l ϱ_l a_r(ϑ_l, γ_l) a_tᴴ(φ_l)`.
pub fn assemble_g(
    paths: &[PathComponent],
    ula: &UlaSpec,
    upa: &UpaSpec,
    pathloss: f64,
) -> CMatrix {
    let (n, m) = (ula.n_antennas, upa.elements());
    let scale = ((n * m) as f64 / pathloss).sqrt();
    let mut g = CMatrix::zeros(m, n);
    for p in paths {
        let (u, v) = p.irs_frequencies(ula.spacing);
        let a_r = crate::array_dictionary::upa_steering(upa, u, v);
        let a_t = steering(n, p.bs_frequency(ula.spacing));
        g += (a_r * a_t.adjoint()) * (p.gain * scale);
    }
    g
}

/// `h_r = √(M/ε) Σ_l α_l a_r(ϑ_l, γ_l)`. The IRS uses the same element
/// spacing as the BS array.
pub fn assemble_hr(paths: &[PathComponent], upa: &UpaSpec, spacing: f64, pathloss: f64) -> CVector {
    let m = upa.elements();
    let scale = (m as f64 / pathloss).sqrt();
    let mut h = CVector::zeros(m);
    for p in paths {
        let (u, v) = p.irs_frequencies(spacing);
        h += crate::array_dictionary::upa_steering(upa, u, v) * (p.gain * scale);
    }
    h
}

/// `H = diag(h_rᴴ) G`: row `m` of `G` scaled by `conj(h_r[m])`.
pub fn cascade(g: &CMatrix, h_r: &CVector) -> Result<CMatrix> {
    if g.nrows() != h_r.len() {
        return Err(Error::ShapeMismatch(format!(
            "G has {} rows but h_r has {} entries",
            g.nrows(),
            h_r.len()
        )));
    }
    let mut h = g.clone();
    for (m, mut row) in h.row_iter_mut().enumerate() {
        row *= h_r[m].conj();
    }
    Ok(h)
}

pub fn check_unit_modulus(v: &CVector) -> Result<()> {
    for (index, z) in v.iter().enumerate() {
        let modulus = z.norm();
        if (modulus - 1.0).abs() > 1e-9 {
            return Err(Error::NonUnitModulus { index, modulus });
        }
    }
    Ok(())
}

/// Noise-free pilot response `v_phaseᴴ H w` (pilot symbol 1).
pub fn noiseless_sample(h: &CMatrix, w: &CVector, v_phase: &CVector) -> C64 {
    let hw = h * w;
    v_phase
        .iter()
        .zip(hw.iter())
        .fold(ZERO, |acc, (v, x)| acc + v.conj() * x)
}

/// One received pilot `y = v_phaseᴴ H w + ε`, `ε ~ CN(0, noise_std²)`.
///
/// A noise sample is always drawn so the RNG stream does not depend on the
/// noise level.
pub fn received_sample<R: Rng + ?Sized>(
    h: &CMatrix,
    w: &CVector,
    v_phase: &CVector,
    noise_std: f64,
    rng: &mut R,
) -> Result<C64> {
    if h.shape() != (v_phase.len(), w.len()) {
        return Err(Error::ShapeMismatch(format!(
            "H is {:?}, w has {} and v has {} entries",
            h.shape(),
            w.len(),
            v_phase.len()
        )));
    }
    check_unit_modulus(v_phase)?;
    let noise = complex_gaussian(rng, 1.0) * noise_std;
    Ok(noiseless_sample(h, w, v_phase) + noise)
}

/// Draw one channel realization according to `stats`.
pub fn draw_channel<R: Rng + ?Sized>(
    rng: &mut R,
    stats: &ChannelStatistics,
    dicts: &DictionarySet,
) -> Result<ChannelRealization> {
    stats.validate()?;
    let paths_g = sample_paths(rng, stats.l_paths, stats.rician_k_db)?;
    let paths_hr = sample_paths(rng, stats.lprime_paths, stats.rician_k_db)?;
    let spacing = dicts.ula.spacing;
    let (g, h_r, coefficients) = match stats.angle_mode {
        AngleMode::OffGrid => (
            assemble_g(&paths_g, &dicts.ula, &dicts.upa, stats.pathloss_g),
            assemble_hr(&paths_hr, &dicts.upa, spacing, stats.pathloss_hr),
            None,
        ),
        AngleMode::OnGrid => {
            let coeffs = snap_to_grid(&paths_g, &paths_hr, dicts, stats);
            let g = &dicts.f_p * &coeffs.sigma * dicts.f_l.adjoint();
            let h_r = &dicts.f_p * &coeffs.alpha;
            (g, h_r, Some(coeffs))
        }
    };
    let h_cascade = cascade(&g, &h_r)?;
    Ok(ChannelRealization {
        g,
        h_r,
        h_cascade,
        paths_g,
        paths_hr,
        coefficients,
    })
}

/// Sparse grid coefficients obtained by snapping each path to its nearest
/// grid point. Paths landing on the same point add up.
pub fn snap_to_grid(
    paths_g: &[PathComponent],
    paths_hr: &[PathComponent],
    dicts: &DictionarySet,
    stats: &ChannelStatistics,
) -> GridCoefficients {
    let spacing = dicts.ula.spacing;
    let (n, m) = (dicts.n(), dicts.m());
    let mut sigma = CMatrix::zeros(dicts.m_grid(), dicts.n_grid());
    let g_scale = ((n * m) as f64 / stats.pathloss_g).sqrt();
    for p in paths_g {
        let (u, v) = p.irs_frequencies(spacing);
        let q = dicts.nearest_irs_index(u, v);
        let j = dicts.nearest_tx_index(p.bs_frequency(spacing));
        sigma[(q, j)] += p.gain * g_scale;
    }
    let mut alpha = CVector::zeros(dicts.m_grid());
    let hr_scale = (m as f64 / stats.pathloss_hr).sqrt();
    for p in paths_hr {
        let (u, v) = p.irs_frequencies(spacing);
        alpha[dicts.nearest_irs_index(u, v)] += p.gain * hr_scale;
    }
    GridCoefficients { alpha, sigma }
}

/// Unit-modulus vector of i.i.d. uniform phases.
pub fn random_phase_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    CVector::from_iterator(len, (0..len).map(|_| random_phase(rng)))
}

/// Unit-power precoder with i.i.d. random-phase entries of modulus `1/√N`.
pub fn random_precoder<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    let s = 1.0 / (len as f64).sqrt();
    CVector::from_iterator(len, (0..len).map(|_| expj(rng.random_range(0.0..std::f64::consts::TAU)) * s))
}
