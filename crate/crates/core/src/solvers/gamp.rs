//! Sum-product GAMP with a Bernoulli-Gaussian prior whose parameters, and the
//! noise variance, are learned by expectation-maximization between sweeps.
//!
//! Everything is circularly-symmetric complex. Variances are kept scalar
//! (the average of `|Φ_ij|²` stands in for each entry), which needs only
//! `Φ x` and `Φᴴ r` per iteration.
//!
//! Prior: `x_j ~ (1 − λ) δ₀ + λ CN(θ, φ)`. Likelihood: `y ~ CN(Φ x, σ²_w I)`.

use serde::{Deserialize, Serialize};

use super::SparseEstimate;
use crate::linalg::{norm_sq, CVector, LinearOperator, C64};
use crate::{Error, Result};

fn default_max_iters() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-6
}
fn default_damping() -> f64 {
    0.5
}
fn default_restarts() -> usize {
    3
}
fn default_sparsity() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GampConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop when `‖x̂_k − x̂_{k−1}‖ / ‖x̂_k‖` drops below this.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Weight of the new iterate in each damped update; 1 disables damping.
    #[serde(default = "default_damping")]
    pub damping: f64,
    /// Restarts after a divergence, which halves the damping, or after a
    /// degenerate fit, which triples the initial activity rate.
    #[serde(default = "default_restarts")]
    pub max_restarts: usize,
    /// Initial activity rate `λ`.
    #[serde(default = "default_sparsity")]
    pub init_sparsity: f64,
    /// Learn the active mean `θ`; otherwise it stays at zero, which suits
    /// circularly-symmetric coefficients.
    #[serde(default)]
    pub learn_mean: bool,
}

impl Default for GampConfig {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            tol: default_tol(),
            damping: default_damping(),
            max_restarts: default_restarts(),
            init_sparsity: default_sparsity(),
            learn_mean: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GampState {
    pub sparsity_rate: f64,
    pub active_mean: C64,
    pub active_var: f64,
    pub noise_var: f64,
    pub posterior_means: CVector,
    pub posterior_vars: Vec<f64>,
    /// Posterior probability that each coefficient is active.
    pub activity: Vec<f64>,
    pub damping: f64,
}

#[derive(Debug, Clone)]
pub struct GampOutput {
    pub estimate: SparseEstimate,
    pub state: GampState,
    pub restarts: usize,
}

const RATE_FLOOR: f64 = 1e-9;
const VAR_FLOOR: f64 = 1e-300;

pub fn gamp_em_bg<A: LinearOperator + ?Sized>(op: &A, y: &CVector, cfg: &GampConfig) -> Result<GampOutput> {
    if y.len() != op.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "y has {} entries, operator has {} rows",
            y.len(),
            op.nrows()
        )));
    }
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::InvalidConfig(format!("damping {} not in (0, 1]", cfg.damping)));
    }
    if !(cfg.init_sparsity > 0.0 && cfg.init_sparsity < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "initial sparsity {} not in (0, 1)",
            cfg.init_sparsity
        )));
    }
    if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidConfig("measurements are not finite".into()));
    }
    let n = op.ncols();
    let y_energy = norm_sq(y);
    let frob = op.frobenius_sq();
    if y_energy == 0.0 || frob == 0.0 {
        let mut estimate = SparseEstimate::zero(n, y_energy.sqrt());
        estimate.converged = true;
        let state = GampState {
            sparsity_rate: cfg.init_sparsity,
            active_mean: C64::new(0.0, 0.0),
            active_var: 0.0,
            noise_var: 0.0,
            posterior_means: CVector::zeros(n),
            posterior_vars: vec![0.0; n],
            activity: vec![0.0; n],
            damping: cfg.damping,
        };
        return Ok(GampOutput { estimate, state, restarts: 0 });
    }

    // A run that diverges is repeated with half the step size; one that
    // settles on a degenerate fit is repeated from a denser prior.
    let mut damping = cfg.damping;
    let mut sparsity = cfg.init_sparsity;
    let mut fallback: Option<Run> = None;
    for attempt in 0..=cfg.max_restarts {
        let run = Sweep::new(op, y, sparsity, damping, frob).run(op, y, cfg);
        if !run.diverged && !run.degenerate(y_energy.sqrt()) {
            return Ok(run.finish(attempt, damping));
        }
        let diverged = run.diverged;
        let better = fallback.as_ref().is_none_or(|b| {
            (b.diverged && !run.diverged)
                || (b.diverged == run.diverged && run.misfit() < b.misfit())
        });
        if better {
            fallback = Some(run);
        }
        if diverged {
            damping *= 0.5;
        } else {
            sparsity = (3.0 * sparsity).min(0.5);
        }
    }
    let mut run = fallback.unwrap();
    run.converged = false;
    Ok(run.finish(cfg.max_restarts, damping))
}

struct Sweep {
    a2: f64,
    lambda: f64,
    theta: C64,
    phi: f64,
    noise_var: f64,
    x: CVector,
    vx: Vec<f64>,
    s: CVector,
    vs: f64,
    damping: f64,
}

struct Run {
    rows: usize,
    x: CVector,
    vx: Vec<f64>,
    activity: Vec<f64>,
    lambda: f64,
    theta: C64,
    phi: f64,
    noise_var: f64,
    iterations: usize,
    converged: bool,
    diverged: bool,
    history: Vec<f64>,
    best_residual: f64,
    best_x: CVector,
}

impl Run {
    /// Non-sparse prior, no confidently active coefficient, a fit worse than
    /// `x = 0`, or a residual inconsistent with the learned noise level.
    fn degenerate(&self, y_norm: f64) -> bool {
        self.lambda > 0.5
            || self.activity.iter().all(|&p| p <= 0.5)
            || *self.history.last().unwrap() > y_norm
            || self.misfit() > 10f64.ln()
    }

    /// `|ln|` of the residual energy per row over the learned noise variance.
    fn misfit(&self) -> f64 {
        let residual = *self.history.last().unwrap();
        let ratio = residual * residual / (self.rows as f64 * self.noise_var);
        if ratio.is_finite() && ratio > 0.0 {
            ratio.ln().abs()
        } else {
            f64::INFINITY
        }
    }

    fn finish(self, restarts: usize, damping: f64) -> GampOutput {
        let x_hat = if self.diverged { self.best_x } else { self.x };
        let support: Vec<usize> = self
            .activity
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.5)
            .map(|(j, _)| j)
            .collect();
        let residual_norm = if self.diverged {
            self.best_residual
        } else {
            *self.history.last().unwrap()
        };
        let estimate = SparseEstimate {
            x_hat: x_hat.clone(),
            support,
            iterations: self.iterations,
            residual_norm,
            converged: self.converged,
            residual_history: self.history,
        };
        let state = GampState {
            sparsity_rate: self.lambda,
            active_mean: self.theta,
            active_var: self.phi,
            noise_var: self.noise_var,
            posterior_means: x_hat,
            posterior_vars: self.vx,
            activity: self.activity,
            damping,
        };
        GampOutput { estimate, state, restarts }
    }
}

impl Sweep {
    fn new<A: LinearOperator + ?Sized>(op: &A, y: &CVector, lambda: f64, damping: f64, frob: f64) -> Self {
        let (m, n) = (op.nrows(), op.ncols());
        let y_energy = norm_sq(y);
        let noise_var = 0.1 * y_energy / m as f64;
        let phi = ((y_energy - m as f64 * noise_var) / (frob * lambda)).max(VAR_FLOOR);
        let theta = C64::new(0.0, 0.0);
        Self {
            a2: frob / (m as f64 * n as f64),
            lambda,
            theta,
            phi,
            noise_var,
            x: CVector::from_element(n, theta * lambda),
            vx: vec![lambda * phi; n],
            s: CVector::zeros(m),
            vs: 0.0,
            damping,
        }
    }

    fn run<A: LinearOperator + ?Sized>(mut self, op: &A, y: &CVector, cfg: &GampConfig) -> Run {
        let (m, n) = (op.nrows(), op.ncols());
        let y_norm = norm_sq(y).sqrt();
        let mut activity = vec![self.lambda; n];
        let mut history = vec![y_norm];
        let mut best_residual = f64::INFINITY;
        let mut best_x = self.x.clone();
        let mut converged = false;
        let mut diverged = false;
        let mut iterations = 0;

        for it in 0..cfg.max_iters {
            iterations = it + 1;
            let beta = if it == 0 { 1.0 } else { self.damping };

            // Output linear step.
            let vx_mean = self.vx.iter().sum::<f64>() / n as f64;
            let vp = (self.a2 * n as f64 * vx_mean).max(VAR_FLOOR);
            let ax = op.apply(&self.x);
            let residual = (y - &ax).norm();
            history.push(residual);
            if !residual.is_finite() || residual > 1e4 * y_norm {
                diverged = true;
                break;
            }
            if residual < best_residual {
                best_residual = residual;
                best_x.copy_from(&self.x);
            }
            let p = &ax - &self.s * C64::new(vp, 0.0);

            // Output nonlinear step (AWGN).
            let denom = vp + self.noise_var;
            let s_new = (y - &p) / C64::new(denom, 0.0);
            let vs_new = 1.0 / denom;
            let gain = vp / denom;
            let z_hat = &p + (y - &p) * C64::new(gain, 0.0);
            let vz = vp * self.noise_var / denom;
            self.s = &s_new * C64::new(beta, 0.0) + &self.s * C64::new(1.0 - beta, 0.0);
            self.vs = beta * vs_new + (1.0 - beta) * self.vs;

            // Input linear step.
            let vr = 1.0 / (self.a2 * m as f64 * self.vs).max(VAR_FLOOR);
            let corr = op.adjoint_apply(&self.s);
            let r = &self.x + corr * C64::new(vr, 0.0);

            // Input nonlinear step (Bernoulli-Gaussian denoiser) plus EM sums.
            let log_prior = ((1.0 - self.lambda) / self.lambda).ln();
            let sum_var = self.phi + vr;
            let log_var_ratio = (sum_var / vr).ln();
            let nu = self.phi * vr / sum_var;
            let (mut pi_sum, mut pi_gamma, mut pi_spread) = (0.0, C64::new(0.0, 0.0), 0.0);
            let mut x_new = CVector::zeros(n);
            let mut vx_new = vec![0.0; n];
            let mut gammas = Vec::with_capacity(n);
            for j in 0..n {
                let rj = r[j];
                let llr = log_prior + log_var_ratio - rj.norm_sqr() / vr
                    + (rj - self.theta).norm_sqr() / sum_var;
                let pi = if llr > 0.0 {
                    let e = (-llr).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + llr.exp())
                };
                let gamma = (rj * self.phi + self.theta * vr) / sum_var;
                x_new[j] = gamma * pi;
                vx_new[j] = pi * nu + pi * (1.0 - pi) * gamma.norm_sqr();
                activity[j] = pi;
                pi_sum += pi;
                pi_gamma += gamma * pi;
                gammas.push(gamma);
            }
            let x_prev = self.x.clone();
            self.x = &x_new * C64::new(beta, 0.0) + &self.x * C64::new(1.0 - beta, 0.0);
            for (v, vn) in self.vx.iter_mut().zip(vx_new.iter()) {
                *v = beta * vn + (1.0 - beta) * *v;
            }

            // EM updates.
            if pi_sum > 0.0 {
                self.lambda = (pi_sum / n as f64).clamp(RATE_FLOOR, 1.0 - RATE_FLOOR);
                if cfg.learn_mean {
                    self.theta = pi_gamma / pi_sum;
                }
                for (j, gamma) in gammas.iter().enumerate() {
                    pi_spread += activity[j] * ((self.theta - gamma).norm_sqr() + nu);
                }
                self.phi = (pi_spread / pi_sum).max(VAR_FLOOR);
            }
            let noise_update = (y - &z_hat).iter().map(|e| e.norm_sqr()).sum::<f64>() / m as f64 + vz;
            self.noise_var = noise_update.max(VAR_FLOOR);

            if self.x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                diverged = true;
                break;
            }
            let change = (&self.x - &x_prev).norm();
            let scale = self.x.norm();
            if scale > 0.0 && change / scale < cfg.tol {
                converged = true;
                break;
            }
        }
        if !diverged {
            let residual = (y - op.apply(&self.x)).norm();
            if residual.is_finite() {
                history.push(residual);
                if residual < best_residual {
                    best_residual = residual;
                    best_x.copy_from(&self.x);
                }
            } else {
                diverged = true;
            }
        }
        Run {
            rows: m,
            x: self.x,
            vx: self.vx,
            activity,
            lambda: self.lambda,
            theta: self.theta,
            phi: self.phi,
            noise_var: self.noise_var,
            iterations,
            converged,
            diverged,
            history,
            best_residual,
            best_x,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, CMatrix};
    use crate::solvers::oracle_ls;
    use rand::seq::index::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Bench {
        phi: CMatrix,
        x: CVector,
        y: CVector,
        support: Vec<usize>,
        noise_var: f64,
    }

    fn benchmark(seed: u64, m: usize, n: usize, k: usize, snr_db: f64) -> Bench {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = CMatrix::from_fn(m, n, |_, _| complex_gaussian(&mut rng, 1.0 / m as f64));
        let mut support = sample(&mut rng, n, k).into_vec();
        support.sort_unstable();
        let mut x = CVector::zeros(n);
        for &j in &support {
            x[j] = complex_gaussian(&mut rng, 1.0);
        }
        let clean = &phi * &x;
        let noise_var = norm_sq(&clean) / m as f64 / 10f64.powf(snr_db / 10.0);
        let y = clean + CVector::from_fn(m, |_, _| complex_gaussian(&mut rng, noise_var));
        Bench { phi, x, y, support, noise_var }
    }

    fn nmse(a: &CVector, b: &CVector) -> f64 {
        norm_sq(&(a - b)) / norm_sq(b)
    }

    #[test]
    fn zero_measurements() {
        let phi = CMatrix::from_element(4, 10, C64::new(1.0, 0.0));
        let out = gamp_em_bg(&phi, &CVector::zeros(4), &GampConfig::default()).unwrap();
        assert!(out.estimate.x_hat.norm() < 1e-6);
    }

    #[test]
    fn rejects_bad_config() {
        let phi = CMatrix::from_element(4, 10, C64::new(1.0, 0.0));
        let y = CVector::from_element(4, C64::new(1.0, 0.0));
        let cfg = GampConfig { damping: 0.0, ..Default::default() };
        assert!(gamp_em_bg(&phi, &y, &cfg).is_err());
        let cfg = GampConfig { init_sparsity: 1.0, ..Default::default() };
        assert!(gamp_em_bg(&phi, &y, &cfg).is_err());
    }

    #[test]
    fn gaussian_benchmark_recovers_sparse_signal() {
        let b = benchmark(11, 200, 1000, 20, 30.0);
        let out = gamp_em_bg(&b.phi, &b.y, &GampConfig::default()).unwrap();
        let err = nmse(&out.estimate.x_hat, &b.x);
        assert!(err < 1e-2, "GAMP NMSE {err}");
        // Oracle LS on the support GAMP flags as active lands in the same regime.
        let oracle = oracle_ls(&b.phi, &b.y, &out.estimate.support).unwrap();
        assert!(nmse(&oracle.x_hat, &b.x) < 1e-2);
        assert!(out.estimate.support.iter().filter(|j| b.support.contains(j)).count() >= 18);
    }

    #[test]
    fn noise_variance_estimate_within_factor_two() {
        let mut ok = 0;
        for seed in 0..100 {
            let b = benchmark(1000 + seed, 200, 1000, 20, 30.0);
            let out = gamp_em_bg(&b.phi, &b.y, &GampConfig::default()).unwrap();
            let ratio = out.state.noise_var / b.noise_var;
            if (0.5..=2.0).contains(&ratio) {
                ok += 1;
            }
        }
        assert!(ok >= 90, "{ok}/100 noise estimates within 2x");
    }
}
