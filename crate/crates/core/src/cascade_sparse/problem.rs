use rand::Rng;
use serde::{Deserialize, Serialize};

use super::operator::StructuredSensing;
use crate::array_dictionary::DictionarySet;
use crate::channel_model::{
    check_unit_modulus, noiseless_sample, random_phase_vector, random_precoder, received_sample,
};
use crate::linalg::{kron_vec, CMatrix, CVector, LinearOperator};
use crate::{Error, Result};

/// Pilot precoders `w(t)` and IRS phase vectors `v(t)`, one column per pilot.
#[derive(Debug, Clone)]
pub struct TrainingSequence {
    /// `N × T`.
    pub precoders: CMatrix,
    /// `M × T`, unit-modulus entries.
    pub phases: CMatrix,
}

impl TrainingSequence {
    /// I.i.d. random phases for both `w(t)` (scaled to unit power) and `v(t)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, pilots: usize, n: usize, m: usize) -> Self {
        let mut precoders = CMatrix::zeros(n, pilots);
        let mut phases = CMatrix::zeros(m, pilots);
        for t in 0..pilots {
            precoders.set_column(t, &random_precoder(rng, n));
            phases.set_column(t, &random_phase_vector(rng, m));
        }
        Self { precoders, phases }
    }

    pub fn len(&self) -> usize {
        self.precoders.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn w(&self, t: usize) -> CVector {
        self.precoders.column(t).into_owned()
    }

    pub fn v(&self, t: usize) -> CVector {
        self.phases.column(t).into_owned()
    }
}

/// `(wᵀ F_L*) ⊗ (v_phaseᴴ D_u)`, one row of `Φ`.
pub fn sensing_row(
    w: &CVector,
    v_phase: &CVector,
    dicts: &DictionarySet,
    d_u: &CMatrix,
) -> Result<CVector> {
    if w.len() != dicts.n() || v_phase.len() != dicts.m() || d_u.nrows() != dicts.m() {
        return Err(Error::ShapeMismatch(format!(
            "w has {} entries (N = {}), v has {} (M = {})",
            w.len(),
            dicts.n(),
            v_phase.len(),
            dicts.m()
        )));
    }
    check_unit_modulus(v_phase)?;
    let left = (w.transpose() * dicts.f_l.map(|z| z.conj())).transpose();
    let right = d_u.ad_mul(v_phase).map(|z| z.conj());
    Ok(kron_vec(&left, &right))
}

/// `W_v`, `T × NM`, row `t` equal to `w(t)ᵀ ⊗ v(t)ᴴ`.
pub fn training_matrix(training: &TrainingSequence) -> CMatrix {
    let (n, m, pilots) = (
        training.precoders.nrows(),
        training.phases.nrows(),
        training.len(),
    );
    CMatrix::from_fn(pilots, n * m, |t, k| {
        training.precoders[(k / m, t)] * training.phases[(k % m, t)].conj()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorMode {
    /// `Φ` stored densely, `T × M_G N_G`.
    Dense,
    /// `Φ` applied through the dictionary factors.
    #[default]
    Structured,
}

#[derive(Debug, Clone)]
pub enum SensingOperator {
    Dense(CMatrix),
    Structured(StructuredSensing),
}

impl LinearOperator for SensingOperator {
    fn nrows(&self) -> usize {
        match self {
            Self::Dense(m) => m.nrows(),
            Self::Structured(s) => s.nrows(),
        }
    }

    fn ncols(&self) -> usize {
        match self {
            Self::Dense(m) => m.ncols(),
            Self::Structured(s) => s.ncols(),
        }
    }

    fn apply(&self, x: &CVector) -> CVector {
        match self {
            Self::Dense(m) => m * x,
            Self::Structured(s) => s.apply(x),
        }
    }

    fn adjoint_apply(&self, r: &CVector) -> CVector {
        match self {
            Self::Dense(m) => m.ad_mul(r),
            Self::Structured(s) => s.adjoint_apply(r),
        }
    }

    fn column(&self, j: usize) -> CVector {
        match self {
            Self::Dense(m) => m.column(j).into_owned(),
            Self::Structured(s) => s.column(j),
        }
    }

    fn column_norms_sq(&self) -> Vec<f64> {
        match self {
            Self::Dense(m) => LinearOperator::column_norms_sq(m),
            Self::Structured(s) => s.column_norms_sq(),
        }
    }
}

/// How the measurement noise level is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// Fixed noise standard deviation.
    Std(f64),
    /// Ratio of the mean noise-free pilot power `mean_t |v(t)ᴴ H w(t)|²` of
    /// this training set to the noise variance, in dB.
    SnrDb(f64),
}

impl NoiseSpec {
    fn noise_std(&self, signal_power: f64) -> f64 {
        match *self {
            NoiseSpec::Std(s) => s,
            NoiseSpec::SnrDb(db) => (signal_power / 10f64.powf(db / 10.0)).sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SensingProblem {
    pub training: TrainingSequence,
    pub y: CVector,
    pub noise_std: f64,
    /// Mean noise-free pilot power.
    pub signal_power: f64,
    pub operator: SensingOperator,
}

impl SensingProblem {
    pub fn pilots(&self) -> usize {
        self.y.len()
    }
}

/// Received pilots for one training sequence.
#[derive(Debug, Clone)]
pub struct Observation {
    pub y: CVector,
    pub noise_std: f64,
    /// Mean noise-free pilot power `mean_t |v(t)ᴴ H w(t)|²`.
    pub signal_power: f64,
}

/// Collect `y(t) = v(t)ᴴ H w(t) + ε(t)` over a training sequence. Under
/// [`NoiseSpec::SnrDb`] the noise level is set from this sequence's own
/// noise-free pilot power.
pub fn observe<R: Rng + ?Sized>(
    h_cascade: &CMatrix,
    training: &TrainingSequence,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<Observation> {
    let pilots = training.len();
    if pilots == 0 {
        return Err(Error::InvalidDimension("at least one pilot is required".into()));
    }
    let signal_power = (0..pilots)
        .map(|t| noiseless_sample(h_cascade, &training.w(t), &training.v(t)).norm_sqr())
        .sum::<f64>()
        / pilots as f64;
    let noise_std = noise.noise_std(signal_power);
    let mut y = CVector::zeros(pilots);
    for t in 0..pilots {
        y[t] = received_sample(h_cascade, &training.w(t), &training.v(t), noise_std, rng)?;
    }
    Ok(Observation { y, noise_std, signal_power })
}

/// Draw a training sequence for `pilots` time slots and collect the received
/// pilots `y(t) = v(t)ᴴ H w(t) + ε(t)`.
pub fn assemble_problem<R: Rng + ?Sized>(
    h_cascade: &CMatrix,
    d_u: &CMatrix,
    dicts: &DictionarySet,
    pilots: usize,
    rng: &mut R,
    noise: NoiseSpec,
    mode: OperatorMode,
) -> Result<SensingProblem> {
    if pilots == 0 {
        return Err(Error::InvalidDimension("at least one pilot is required".into()));
    }
    if h_cascade.shape() != (dicts.m(), dicts.n()) {
        return Err(Error::ShapeMismatch(format!(
            "cascade channel is {:?}, expected {}x{}",
            h_cascade.shape(),
            dicts.m(),
            dicts.n()
        )));
    }
    let training = TrainingSequence::random(rng, pilots, dicts.n(), dicts.m());
    let Observation { y, noise_std, signal_power } = observe(h_cascade, &training, noise, rng)?;
    let operator = match mode {
        OperatorMode::Structured => SensingOperator::Structured(StructuredSensing::new(
            d_u,
            dicts,
            &training.precoders,
            &training.phases,
        )),
        OperatorMode::Dense => {
            let mut phi = CMatrix::zeros(pilots, d_u.ncols() * dicts.n_grid());
            for t in 0..pilots {
                let row = sensing_row(&training.w(t), &training.v(t), dicts, d_u)?;
                phi.set_row(t, &row.transpose());
            }
            SensingOperator::Dense(phi)
        }
    };
    Ok(SensingProblem {
        training,
        y,
        noise_std,
        signal_power,
        operator,
    })
}
