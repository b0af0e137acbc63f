//! Passive phase design on a cascade channel, the matching MRT precoder, and
//! the two figures of merit: channel NMSE and the receive-power ratio (ARSPR).
//!
//! The phase problem `max ‖vᴴH‖² s.t. |v_m| = 1` is handled by projected power
//! iteration `v ← exp(j arg(H Hᴴ v))`, which never decreases the objective
//! because `H Hᴴ` is positive semidefinite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel_model::random_phase_vector;
use crate::linalg::{frobenius_sq, norm_sq, CMatrix, CVector, C64, ONE};
use crate::{Error, Result};

fn default_restarts() -> usize {
    8
}
fn default_iters() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-10
}
fn default_seed() -> u64 {
    0x5eed
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformingConfig {
    /// Random starts in addition to the all-ones start.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    /// Stop a run when the relative objective gain drops below this.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Seed of the restart generator. Fixed so that the optimizer is a
    /// deterministic function of its input channel.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for BeamformingConfig {
    fn default() -> Self {
        Self {
            restarts: default_restarts(),
            max_iters: default_iters(),
            tol: default_tol(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeamformingResult {
    pub v_opt: CVector,
    pub w_opt: CVector,
    /// `‖v_optᴴ H‖²`.
    pub objective: f64,
    /// Number of starts that were run, including the all-ones start.
    pub restarts_used: usize,
    /// Set when `v_optᴴ H = 0` and `w_opt` fell back to `e_1`.
    pub degenerate: bool,
}

/// `‖vᴴ H‖²`.
pub fn received_power(h: &CMatrix, v: &CVector) -> f64 {
    norm_sq(&h.ad_mul(v))
}

fn quad(a: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(a * v)).re
}

fn project(u: &CVector, prev: &CVector) -> CVector {
    CVector::from_iterator(
        u.len(),
        u.iter().zip(prev.iter()).map(|(z, p)| {
            let r = z.norm();
            if r > 0.0 {
                z / r
            } else {
                *p
            }
        }),
    )
}

/// One projected power iteration run from `start`. Returns the final phases
/// and the objective after every step.
pub fn power_iteration(a: &CMatrix, start: &CVector, max_iters: usize, tol: f64) -> (CVector, Vec<f64>) {
    let mut v = start.clone();
    let mut trace = vec![quad(a, &v)];
    for _ in 0..max_iters {
        let next = project(&(a * &v), &v);
        let obj = quad(a, &next);
        let prev = *trace.last().unwrap();
        v = next;
        trace.push(obj);
        if (obj - prev).abs() <= tol * obj.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (v, trace)
}

fn search(h: &CMatrix, cfg: &BeamformingConfig, extra: Option<&CVector>) -> (CVector, f64, usize) {
    let m = h.nrows();
    if frobenius_sq(h) == 0.0 {
        return (CVector::from_element(m, ONE), 0.0, 0);
    }
    let a = h * h.adjoint();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = vec![CVector::from_element(m, ONE)];
    starts.extend((0..cfg.restarts).map(|_| random_phase_vector(&mut rng, m)));
    if let Some(v) = extra {
        starts.push(v.clone());
    }
    let mut best = (starts[0].clone(), f64::NEG_INFINITY);
    let used = starts.len();
    for s in &starts {
        let (v, trace) = power_iteration(&a, s, cfg.max_iters, cfg.tol);
        let obj = *trace.last().unwrap();
        if obj > best.1 {
            best = (v, obj);
        }
    }
    // Report the objective on H directly rather than through H Hᴴ.
    let obj = received_power(h, &best.0);
    (best.0, obj, used)
}

/// Unit-modulus `v` approximately maximizing `‖vᴴ H‖²`.
///
/// `H = 0` gives the all-ones vector with objective 0.
pub fn optimize_phases(h: &CMatrix, cfg: &BeamformingConfig) -> BeamformingResult {
    let (v, objective, restarts_used) = search(h, cfg, None);
    let (w, degenerate) = mrt_precoder(h, &v);
    BeamformingResult {
        v_opt: v,
        w_opt: w,
        objective,
        restarts_used,
        degenerate,
    }
}

/// Maximum-ratio precoder `w = (vᴴH)ᴴ / ‖vᴴH‖`. A zero effective channel
/// returns `(e_1, true)`.
pub fn mrt_precoder(h: &CMatrix, v: &CVector) -> (CVector, bool) {
    let eff = h.ad_mul(v);
    let norm = eff.norm();
    if norm == 0.0 || !norm.is_finite() {
        let mut e1 = CVector::zeros(h.ncols());
        if !e1.is_empty() {
            e1[0] = ONE;
        }
        return (e1, true);
    }
    (eff / C64::new(norm, 0.0), false)
}

/// `‖Ĥ − H‖_F² / ‖H‖_F²` for one realization.
pub fn nmse(h_hat: &CMatrix, h_true: &CMatrix) -> Result<f64> {
    if h_hat.shape() != h_true.shape() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {:?}, channel is {:?}",
            h_hat.shape(),
            h_true.shape()
        )));
    }
    let energy = frobenius_sq(h_true);
    if energy == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(frobenius_sq(&(h_hat - h_true)) / energy)
}

/// Receive-power ratio `‖v̂ᴴ H‖² / ‖v*ᴴ H‖²`, with `v̂` optimized on the
/// estimate and `v*` on the true channel.
///
/// The true-channel search also starts from `v̂`, so `v*` is never worse than
/// the estimate-driven phases and the ratio stays in `[0, 1]`.
pub fn arspr(h_hat: &CMatrix, h_true: &CMatrix, cfg: &BeamformingConfig) -> Result<f64> {
    if h_hat.shape() != h_true.shape() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {:?}, channel is {:?}",
            h_hat.shape(),
            h_true.shape()
        )));
    }
    if frobenius_sq(h_true) == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let (v_hat, _, _) = search(h_hat, cfg, None);
    let (_, ideal, _) = search(h_true, cfg, Some(&v_hat));
    let actual = received_power(h_true, &v_hat);
    Ok(actual / ideal)
}

/// Analytic optimum of `‖vᴴ a bᴴ‖²` over unit-modulus `v`.
pub fn rank_one_optimum(a: &CVector, b: &CVector) -> f64 {
    let s: f64 = a.iter().map(|z| z.norm()).sum();
    s * s * norm_sq(b)
}

/// One output row of the Monte Carlo harness, before CSV formatting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub nmse: f64,
    pub arspr: f64,
    pub snr_db: f64,
    pub t_pilots: usize,
    pub algorithm: String,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, expj};
    use proptest::prelude::*;

    fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMatrix {
        CMatrix::from_fn(m, n, |_, _| complex_gaussian(rng, 1.0))
    }

    #[test]
    fn zero_channel() {
        let r = optimize_phases(&CMatrix::zeros(4, 3), &BeamformingConfig::default());
        assert!(r.v_opt.iter().all(|z| *z == ONE));
        assert_eq!(r.objective, 0.0);
        assert!(r.degenerate);
        assert!(matches!(
            arspr(&CMatrix::zeros(4, 3), &CMatrix::zeros(4, 3), &BeamformingConfig::default()),
            Err(Error::ZeroChannel)
        ));
    }

    #[test]
    fn single_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = gaussian(&mut rng, 1, 5);
        let r = optimize_phases(&h, &BeamformingConfig::default());
        assert!((r.objective - frobenius_sq(&h)).abs() < 1e-12);
        let h_hat = gaussian(&mut rng, 1, 5);
        assert!((arspr(&h_hat, &h, &BeamformingConfig::default()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_reaches_optimum() {
        let cfg = BeamformingConfig::default();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = CVector::from_fn(64, |_, _| complex_gaussian(&mut rng, 1.0));
            let b = CVector::from_fn(16, |_, _| complex_gaussian(&mut rng, 1.0));
            let h = &a * b.adjoint();
            let r = optimize_phases(&h, &cfg);
            assert!(r.objective >= 0.999 * rank_one_optimum(&a, &b));
            assert!(r.v_opt.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            assert!((r.w_opt.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_matches_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = gaussian(&mut rng, 6, 4);
        let r = optimize_phases(&h, &BeamformingConfig::default());
        let direct = r.v_opt.dotc(&(&h * h.adjoint() * &r.v_opt)).re;
        assert!((r.objective - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn mrt_cases() {
        let h = CMatrix::identity(3, 3);
        let mut e1 = CVector::zeros(3);
        e1[0] = ONE;
        let (w, flag) = mrt_precoder(&h, &e1);
        assert!(!flag && (w - &e1).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = gaussian(&mut rng, 8, 4);
        let v = random_phase_vector(&mut rng, 8);
        let (w, _) = mrt_precoder(&h, &v);
        let gain = v.dotc(&(&h * &w)).norm_sqr();
        assert!((gain - received_power(&h, &v)).abs() < 1e-12 * gain);
        for _ in 0..10_000 {
            let w2 = CVector::from_fn(4, |_, _| complex_gaussian(&mut rng, 1.0));
            let w2 = &w2 / C64::new(w2.norm(), 0.0);
            assert!(v.dotc(&(&h * &w2)).norm_sqr() <= gain * (1.0 + 1e-12));
        }

        let (w, flag) = mrt_precoder(&CMatrix::zeros(2, 3), &CVector::from_element(2, ONE));
        assert!(flag && w[0] == ONE);
    }

    #[test]
    fn nmse_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = gaussian(&mut rng, 5, 3);
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        assert!((nmse(&CMatrix::zeros(5, 3), &h).unwrap() - 1.0).abs() < 1e-15);
        assert!((nmse(&(&h * C64::new(2.0, 0.0)), &h).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(nmse(&h, &CMatrix::zeros(5, 3)), Err(Error::ZeroChannel)));
        assert!(nmse(&CMatrix::zeros(3, 5), &h).is_err());
    }

    #[test]
    fn arspr_of_truth_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = gaussian(&mut rng, 16, 4);
        let cfg = BeamformingConfig::default();
        assert!((arspr(&h, &h, &cfg).unwrap() - 1.0).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn power_iteration_is_monotone(seed in any::<u64>(), m in 1usize..12, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = gaussian(&mut rng, m, n);
            let a = &h * h.adjoint();
            let start = random_phase_vector(&mut rng, m);
            let (_, trace) = power_iteration(&a, &start, 100, 0.0);
            for pair in trace.windows(2) {
                prop_assert!(pair[1] >= pair[0] * (1.0 - 1e-12));
            }
        }

        #[test]
        fn arspr_bounded_and_scale_invariant(seed in any::<u64>(), re in -3.0f64..3.0, phase in 0.0f64..std::f64::consts::TAU) {
            prop_assume!(re.abs() > 1e-3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = gaussian(&mut rng, 10, 4);
            let h_hat = &h + gaussian(&mut rng, 10, 4) * C64::new(0.5, 0.0);
            let cfg = BeamformingConfig { restarts: 2, ..Default::default() };
            let base = arspr(&h_hat, &h, &cfg).unwrap();
            prop_assert!((0.0..=1.0 + 1e-9).contains(&base));
            let scaled = &h_hat * (expj(phase) * re);
            let other = arspr(&scaled, &h, &cfg).unwrap();
            prop_assert!((base - other).abs() < 1e-6, "{} vs {}", base, other);
        }
    }
}
