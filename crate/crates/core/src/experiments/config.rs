//! Experiment configuration and the built-in presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array_dictionary::{GridSpec, UlaSpec, UpaSpec};
use crate::beamforming::BeamformingConfig;
use crate::cascade_sparse::OperatorMode;
use crate::channel_model::ChannelStatistics;
use crate::solvers::GampConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Omp,
    Gamp,
    OracleLs,
    ConventionalLs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Omp,
        Algorithm::Gamp,
        Algorithm::OracleLs,
        Algorithm::ConventionalLs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Omp => "omp",
            Algorithm::Gamp => "gamp",
            Algorithm::OracleLs => "oracle_ls",
            Algorithm::ConventionalLs => "conventional_ls",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Number of pilots `T`.
    Pilots,
    SnrDb,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Pilots => "pilots",
            SweepAxis::SnrDb => "snr_db",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_pilots() -> usize {
    110
}
fn default_ls_pilots() -> usize {
    1524
}
fn default_snr() -> f64 {
    10.0
}

/// Values of whichever quantity is not being swept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPoint {
    /// Pilots for the compressed estimators.
    #[serde(default = "default_pilots")]
    pub pilots: usize,
    /// Pilots for the full least-squares baseline.
    #[serde(default = "default_ls_pilots")]
    pub ls_pilots: usize,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
}

impl Default for FixedPoint {
    fn default() -> Self {
        Self {
            pilots: default_pilots(),
            ls_pilots: default_ls_pilots(),
            snr_db: default_snr(),
        }
    }
}

fn default_max_support() -> usize {
    32
}
fn default_threshold_factor() -> f64 {
    1.1
}

/// OMP stopping rule used by the harness: at most `max_support` atoms, or
/// once `‖r‖ ≤ threshold_factor · √T · σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmpSettings {
    #[serde(default = "default_max_support")]
    pub max_support: usize,
    #[serde(default = "default_threshold_factor")]
    pub threshold_factor: f64,
}

impl Default for OmpSettings {
    fn default() -> Self {
        Self {
            max_support: default_max_support(),
            threshold_factor: default_threshold_factor(),
        }
    }
}

fn default_trials() -> usize {
    100
}
fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Omp, Algorithm::Gamp, Algorithm::OracleLs]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ula: UlaSpec,
    pub upa: UpaSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub channel: ChannelStatistics,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub fixed: FixedPoint,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub operator: OperatorMode,
    #[serde(default)]
    pub omp: OmpSettings,
    #[serde(default)]
    pub gamp: GampConfig,
    #[serde(default)]
    pub beamforming: BeamformingConfig,
    /// Atoms in the oracle support; defaults to `min(L·L', omp.max_support)`.
    #[serde(default)]
    pub oracle_support: Option<usize>,
    /// Per-iteration residual traces are written here when set.
    #[serde(default)]
    pub diagnostics: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.ula.validate()?;
        self.upa.validate()?;
        self.grid.validate(&self.ula, &self.upa)?;
        self.channel.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        if self.sweep.values.is_empty() {
            return bad("sweep has no values".into());
        }
        for &v in &self.sweep.values {
            if !v.is_finite() {
                return bad(format!("sweep value {v} is not finite"));
            }
            if self.sweep.axis == SweepAxis::Pilots && (v < 1.0 || v.fract() != 0.0) {
                return bad(format!("pilot count {v} is not a positive integer"));
            }
        }
        if self.fixed.pilots == 0 || self.fixed.ls_pilots == 0 {
            return bad("fixed pilot counts must be positive".into());
        }
        if !self.fixed.snr_db.is_finite() {
            return bad("fixed SNR must be finite".into());
        }
        if self.omp.max_support == 0 || self.omp.threshold_factor.is_nan() || self.omp.threshold_factor < 0.0 {
            return bad("OMP settings out of range".into());
        }
        let nm = self.ula.n_antennas * self.upa.elements();
        if self.algorithms.contains(&Algorithm::ConventionalLs) {
            let usable = match self.sweep.axis {
                SweepAxis::Pilots => self.sweep.values.iter().any(|&t| t as usize >= nm),
                SweepAxis::SnrDb => self.fixed.ls_pilots >= nm,
            };
            if !usable {
                return bad(format!(
                    "conventional_ls needs at least N·M = {nm} pilots somewhere in the sweep"
                ));
            }
        }
        Ok(())
    }

    pub fn oracle_support_size(&self) -> usize {
        self.oracle_support
            .unwrap_or((self.channel.l_paths * self.channel.lprime_paths).min(self.omp.max_support))
    }

    /// `T` used by `algorithm` at one sweep point.
    pub fn pilots_for(&self, algorithm: Algorithm, axis_value: f64) -> usize {
        match self.sweep.axis {
            SweepAxis::Pilots => axis_value as usize,
            SweepAxis::SnrDb if algorithm == Algorithm::ConventionalLs => self.fixed.ls_pilots,
            SweepAxis::SnrDb => self.fixed.pilots,
        }
    }

    pub fn snr_for(&self, axis_value: f64) -> f64 {
        match self.sweep.axis {
            SweepAxis::Pilots => self.fixed.snr_db,
            SweepAxis::SnrDb => axis_value,
        }
    }

    /// Whether `algorithm` runs at this sweep point. The full least-squares
    /// baseline only exists for `T ≥ N·M`.
    pub fn runs_at(&self, algorithm: Algorithm, axis_value: f64) -> bool {
        algorithm != Algorithm::ConventionalLs
            || self.pilots_for(algorithm, axis_value) >= self.ula.n_antennas * self.upa.elements()
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 3] = ["paper", "sweep-t", "sweep-snr"];

fn paper_base(sweep: SweepSpec, algorithms: Vec<Algorithm>) -> ExperimentConfig {
    ExperimentConfig {
        ula: UlaSpec { n_antennas: 16, spacing: 0.5 },
        upa: UpaSpec { m_x: 8, m_y: 8 },
        grid: GridSpec::new(64, 32, 32),
        channel: ChannelStatistics::default(),
        sweep,
        fixed: FixedPoint::default(),
        algorithms,
        trials: default_trials(),
        master_seed: 0,
        operator: OperatorMode::default(),
        omp: OmpSettings::default(),
        gamp: GampConfig::default(),
        beamforming: BeamformingConfig::default(),
        oracle_support: None,
        diagnostics: None,
    }
}

/// `paper`: the single operating point `T = 110`, 10 dB.
/// `sweep-t`: `T ∈ {20, 40, …, 160}` at 10 dB.
/// `sweep-snr`: SNR from −10 to 20 dB, `T = 110` for the compressed
/// estimators and `T = 1524` for full least squares.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cs = default_algorithms();
    match name {
        "paper" => Ok(paper_base(
            SweepSpec { axis: SweepAxis::Pilots, values: vec![110.0] },
            cs,
        )),
        "sweep-t" => Ok(paper_base(
            SweepSpec {
                axis: SweepAxis::Pilots,
                values: (1..=8).map(|k| 20.0 * k as f64).collect(),
            },
            cs,
        )),
        "sweep-snr" => Ok(paper_base(
            SweepSpec {
                axis: SweepAxis::SnrDb,
                values: (0..=6).map(|k| -10.0 + 5.0 * k as f64).collect(),
            },
            Algorithm::ALL.to_vec(),
        )),
        other => Err(Error::InvalidConfig(format!(
            "unknown preset {other:?}, expected one of {PRESETS:?}"
        ))),
    }
}
