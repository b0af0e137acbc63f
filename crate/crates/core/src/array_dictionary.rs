//! Steering vectors and overcomplete grid dictionaries.
//!
//! Grids live in the spatial-frequency domain: a grid of size `G` holds the
//! points `2πi/G` for `i = 0..G`, starting at zero. Because the grid is closed
//! under subtraction modulo `2π`, the Hadamard product of a conjugated grid
//! atom with another grid atom is again a grid atom (scaled), which is what
//! makes the cascade dictionary collapse onto `M_G` distinct columns.
//!
//! `F_P` columns are ordered x-major, matching `F_x ⊗ F_y`: column
//! `q_x · M_{G,y} + q_y` is `a_x(u_{q_x}) ⊗ a_y(v_{q_y})`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::linalg::{expj, CMatrix, CVector};
use crate::{Error, Result};

fn half_wavelength() -> f64 {
    0.5
}

/// BS uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UlaSpec {
    pub n_antennas: usize,
    /// Element spacing in wavelengths (`d/λ`).
    #[serde(default = "half_wavelength")]
    pub spacing: f64,
}

impl UlaSpec {
    pub fn new(n_antennas: usize) -> Result<Self> {
        let spec = Self {
            n_antennas,
            spacing: half_wavelength(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 {
            return Err(Error::InvalidDimension("ULA needs at least one antenna".into()));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::InvalidDimension(format!(
                "ULA spacing must be positive, got {}",
                self.spacing
            )));
        }
        Ok(())
    }
}

/// IRS uniform planar array of `m_x × m_y` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpaSpec {
    pub m_x: usize,
    pub m_y: usize,
}

impl UpaSpec {
    pub fn new(m_x: usize, m_y: usize) -> Result<Self> {
        let spec = Self { m_x, m_y };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_x == 0 || self.m_y == 0 {
            return Err(Error::InvalidDimension(format!(
                "UPA must be at least 1x1, got {}x{}",
                self.m_x, self.m_y
            )));
        }
        Ok(())
    }

    /// Number of reflecting elements `M`.
    pub fn elements(&self) -> usize {
        self.m_x * self.m_y
    }
}

/// Sizes of the three spatial-frequency grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// `N_G`, grid for the BS departure frequency.
    pub n_grid_tx: usize,
    /// `M_{G,x}`.
    pub m_grid_x: usize,
    /// `M_{G,y}`.
    pub m_grid_y: usize,
}

impl GridSpec {
    pub fn new(n_grid_tx: usize, m_grid_x: usize, m_grid_y: usize) -> Self {
        Self {
            n_grid_tx,
            m_grid_x,
            m_grid_y,
        }
    }

    /// Critically sampled grids for the given arrays.
    pub fn critical(ula: &UlaSpec, upa: &UpaSpec) -> Self {
        Self::new(ula.n_antennas, upa.m_x, upa.m_y)
    }

    /// `M_G = M_{G,x} · M_{G,y}`.
    pub fn m_grid(&self) -> usize {
        self.m_grid_x * self.m_grid_y
    }

    pub fn validate(&self, ula: &UlaSpec, upa: &UpaSpec) -> Result<()> {
        let checks = [
            ("tx", self.n_grid_tx, ula.n_antennas),
            ("x", self.m_grid_x, upa.m_x),
            ("y", self.m_grid_y, upa.m_y),
        ];
        for (axis, grid, array) in checks {
            if grid < array {
                return Err(Error::GridTooCoarse { axis, grid, array });
            }
        }
        Ok(())
    }

    /// Split an IRS grid index into its `(q_x, q_y)` pair.
    #[inline]
    pub fn irs_index_2d(&self, q: usize) -> (usize, usize) {
        (q / self.m_grid_y, q % self.m_grid_y)
    }

    #[inline]
    pub fn irs_index(&self, qx: usize, qy: usize) -> usize {
        qx * self.m_grid_y + qy
    }
}

/// The `i`-th point of a uniform spatial-frequency grid of size `size`.
#[inline]
pub fn grid_frequency(index: usize, size: usize) -> f64 {
    TAU * index as f64 / size as f64
}

/// Index of the grid point nearest to `freq` (frequencies taken modulo 2π).
pub fn nearest_grid_index(freq: f64, size: usize) -> usize {
    let scaled = freq.rem_euclid(TAU) * size as f64 / TAU;
    (scaled.round() as usize) % size
}

/// Unit-norm uniform steering vector `[1, e^{jf}, …, e^{j(n−1)f}]ᵀ/√n`.
pub fn steering(n: usize, freq: f64) -> CVector {
    let scale = 1.0 / (n as f64).sqrt();
    CVector::from_iterator(n, (0..n).map(|k| expj(k as f64 * freq) * scale))
}

/// ULA response for a spatial frequency (radians per element).
pub fn ula_steering(spec: &UlaSpec, spatial_freq: f64) -> CVector {
    steering(spec.n_antennas, spatial_freq)
}

/// UPA response `a_x(u) ⊗ a_y(v)`.
pub fn upa_steering(spec: &UpaSpec, u: f64, v: f64) -> CVector {
    crate::linalg::kron_vec(&steering(spec.m_x, u), &steering(spec.m_y, v))
}

/// Map UPA azimuth/elevation to the per-axis spatial frequencies
/// `u = 2π(d/λ)cos(el)` and `v = 2π(d/λ)sin(el)cos(az)`.
pub fn angles_to_spatial_freq(azimuth: f64, elevation: f64, spacing: f64) -> (f64, f64) {
    let k = 2.0 * PI * spacing;
    (k * elevation.cos(), k * elevation.sin() * azimuth.cos())
}

/// Map a ULA departure angle (from broadside) to `2π(d/λ)sin(φ)`.
pub fn ula_spatial_freq(angle: f64, spacing: f64) -> f64 {
    2.0 * PI * spacing * angle.sin()
}

/// Dictionary whose `i`-th column is `steering(n, 2πi/size)`.
pub fn grid_dictionary(n: usize, size: usize) -> CMatrix {
    let mut out = CMatrix::zeros(n, size);
    for i in 0..size {
        out.set_column(i, &steering(n, grid_frequency(i, size)));
    }
    out
}

/// Grid steering dictionaries for one array configuration.
#[derive(Debug, Clone)]
pub struct DictionarySet {
    pub ula: UlaSpec,
    pub upa: UpaSpec,
    pub grid: GridSpec,
    /// `F_L`, `N × N_G`.
    pub f_l: CMatrix,
    /// `F_x`, `M_x × M_{G,x}`.
    pub f_x: CMatrix,
    /// `F_y`, `M_y × M_{G,y}`.
    pub f_y: CMatrix,
    /// `F_P = F_x ⊗ F_y`, `M × M_G`.
    pub f_p: CMatrix,
}

impl DictionarySet {
    pub fn n(&self) -> usize {
        self.ula.n_antennas
    }

    pub fn m(&self) -> usize {
        self.upa.elements()
    }

    pub fn n_grid(&self) -> usize {
        self.grid.n_grid_tx
    }

    pub fn m_grid(&self) -> usize {
        self.grid.m_grid()
    }

    /// Spatial frequencies `(u, v)` of IRS grid column `q`.
    pub fn irs_frequencies(&self, q: usize) -> (f64, f64) {
        let (qx, qy) = self.grid.irs_index_2d(q);
        (
            grid_frequency(qx, self.grid.m_grid_x),
            grid_frequency(qy, self.grid.m_grid_y),
        )
    }

    /// Spatial frequency of `F_L` column `j`.
    pub fn tx_frequency(&self, j: usize) -> f64 {
        grid_frequency(j, self.grid.n_grid_tx)
    }

    /// Nearest IRS grid column to `(u, v)`.
    pub fn nearest_irs_index(&self, u: f64, v: f64) -> usize {
        self.grid.irs_index(
            nearest_grid_index(u, self.grid.m_grid_x),
            nearest_grid_index(v, self.grid.m_grid_y),
        )
    }

    pub fn nearest_tx_index(&self, freq: f64) -> usize {
        nearest_grid_index(freq, self.grid.n_grid_tx)
    }
}

pub fn build_dictionaries(ula: UlaSpec, upa: UpaSpec, grid: GridSpec) -> Result<DictionarySet> {
    ula.validate()?;
    upa.validate()?;
    grid.validate(&ula, &upa)?;
    let f_l = grid_dictionary(ula.n_antennas, grid.n_grid_tx);
    let f_x = grid_dictionary(upa.m_x, grid.m_grid_x);
    let f_y = grid_dictionary(upa.m_y, grid.m_grid_y);
    let f_p = f_x.kronecker(&f_y);
    Ok(DictionarySet {
        ula,
        upa,
        grid,
        f_l,
        f_x,
        f_y,
        f_p,
    })
}
