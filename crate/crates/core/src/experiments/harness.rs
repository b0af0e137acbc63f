//! Trials, sweeps and their CSV / JSON output.
//!
//! A trial draws a channel, trains with `T` pilots at a given SNR, runs one
//! estimator and scores `Ĥ` by NMSE and ARSPR. Channels depend only on
//! `(master_seed, trial)` and training sequences on
//! `(master_seed, axis value, trial)`, so all algorithms in a cell see the same
//! channel and the same pilots.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, SweepAxis};
use super::seed::{derive_seed, SeedPart};
use crate::array_dictionary::{build_dictionaries, DictionarySet};
use crate::beamforming::{arspr, nmse};
use crate::cascade_sparse::{
    assemble_problem, observe, reconstruct_h, training_matrix, CascadeBasis, NoiseSpec,
    TrainingSequence,
};
use crate::channel_model::{draw_channel, ChannelRealization};
use crate::linalg::{unvec, CMatrix};
use crate::solvers::{
    conventional_ls, gamp_em_bg, omp, oracle_ls, oracle_support_from_truth, OmpConfig, SparseEstimate,
};
use crate::{Error, Result};

/// Shared, read-only state for every trial of one configuration.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub config: ExperimentConfig,
    pub dicts: DictionarySet,
    pub basis: CascadeBasis,
}

impl TrialContext {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let dicts = build_dictionaries(config.ula, config.upa, config.grid)?;
        let basis = CascadeBasis::new(&dicts);
        Ok(Self { config, dicts, basis })
    }

    pub fn channel_seed(&self, trial: usize) -> u64 {
        derive_seed(
            self.config.master_seed,
            &[SeedPart::Label("channel"), SeedPart::Int(trial as u64)],
        )
    }

    pub fn pilot_seed(&self, axis_value: f64, trial: usize) -> u64 {
        derive_seed(
            self.config.master_seed,
            &[
                SeedPart::Label("pilots"),
                SeedPart::Real(axis_value),
                SeedPart::Int(trial as u64),
            ],
        )
    }

    /// The per-row seed reported in the CSV.
    pub fn trial_seed(&self, axis_value: f64, algorithm: Algorithm, trial: usize) -> u64 {
        derive_seed(
            self.config.master_seed,
            &[
                SeedPart::Real(axis_value),
                SeedPart::Label(algorithm.name()),
                SeedPart::Int(trial as u64),
            ],
        )
    }

    pub fn draw_channel(&self, trial: usize) -> Result<ChannelRealization> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.channel_seed(trial));
        draw_channel(&mut rng, &self.config.channel, &self.dicts)
    }

    fn to_h(&self, est: &SparseEstimate) -> Result<CMatrix> {
        let lambda = unvec(&est.x_hat, self.dicts.m_grid(), self.dicts.n_grid());
        reconstruct_h(&lambda, &self.basis.d_u, &self.dicts)
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub axis_name: String,
    pub axis_value: String,
    pub algorithm: String,
    pub trial: usize,
    pub seed: u64,
    pub nmse: f64,
    pub arspr: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_ms: Option<f64>,
}

pub const CSV_HEADER: [&str; 10] = [
    "axis_name",
    "axis_value",
    "algorithm",
    "trial",
    "seed",
    "nmse",
    "arspr",
    "iterations",
    "converged",
    "runtime_ms",
];

impl TrialRow {
    fn record(&self) -> [String; 10] {
        [
            self.axis_name.clone(),
            self.axis_value.clone(),
            self.algorithm.clone(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.nmse.to_string(),
            self.arspr.to_string(),
            self.iterations.to_string(),
            self.converged.to_string(),
            self.runtime_ms.map(|t| format!("{t:.3}")).unwrap_or_default(),
        ]
    }
}

/// A finished trial: the CSV row plus what the row leaves out.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub row: TrialRow,
    pub pilots: usize,
    pub snr_db: f64,
    pub residual_history: Vec<f64>,
}

pub fn format_axis_value(axis: SweepAxis, value: f64) -> String {
    match axis {
        SweepAxis::Pilots => format!("{}", value as usize),
        SweepAxis::SnrDb => format!("{value}"),
    }
}

/// Run one `(axis value, algorithm, trial)` cell entry.
///
/// `timing` only controls whether the solver wall time is reported; it never
/// changes the numbers.
pub fn run_trial(
    ctx: &TrialContext,
    axis_value: f64,
    algorithm: Algorithm,
    trial: usize,
    timing: bool,
) -> Result<TrialOutcome> {
    let cfg = &ctx.config;
    let pilots = cfg.pilots_for(algorithm, axis_value);
    let snr_db = cfg.snr_for(axis_value);
    let nm = ctx.dicts.n() * ctx.dicts.m();
    if algorithm == Algorithm::ConventionalLs && pilots < nm {
        return Err(Error::Underdetermined { pilots, unknowns: nm });
    }
    let channel = ctx.draw_channel(trial)?;
    let h = &channel.h_cascade;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.pilot_seed(axis_value, trial));
    let noise = NoiseSpec::SnrDb(snr_db);

    let started = Instant::now();
    let (h_hat, iterations, converged, history) = match algorithm {
        Algorithm::ConventionalLs => {
            let training = TrainingSequence::random(&mut rng, pilots, ctx.dicts.n(), ctx.dicts.m());
            let obs = observe(h, &training, noise, &mut rng)?;
            let est = conventional_ls(&training_matrix(&training), &obs.y)?;
            (est.h_hat(ctx.dicts.m(), ctx.dicts.n()), 1, true, Vec::new())
        }
        _ => {
            let problem = assemble_problem(
                h,
                &ctx.basis.d_u,
                &ctx.dicts,
                pilots,
                &mut rng,
                noise,
                cfg.operator,
            )?;
            let est = match algorithm {
                Algorithm::Omp => {
                    let mut ocfg = OmpConfig {
                        max_support: cfg.omp.max_support.min(pilots),
                        residual_threshold: None,
                    };
                    if problem.noise_std > 0.0 {
                        ocfg.residual_threshold =
                            Some(cfg.omp.threshold_factor * (pilots as f64).sqrt() * problem.noise_std);
                    }
                    omp(&problem.operator, &problem.y, &ocfg)?
                }
                Algorithm::Gamp => gamp_em_bg(&problem.operator, &problem.y, &cfg.gamp)?.estimate,
                Algorithm::OracleLs => {
                    let k = cfg.oracle_support_size().min(pilots);
                    let support = oracle_support_from_truth(&channel, &ctx.basis.d_u, &ctx.dicts, k)?;
                    oracle_ls(&problem.operator, &problem.y, &support)?
                }
                Algorithm::ConventionalLs => unreachable!(),
            };
            let h_hat = ctx.to_h(&est)?;
            (h_hat, est.iterations, est.converged, est.residual_history)
        }
    };
    let elapsed = started.elapsed().as_secs_f64() * 1e3;

    let row = TrialRow {
        axis_name: cfg.sweep.axis.name().to_string(),
        axis_value: format_axis_value(cfg.sweep.axis, axis_value),
        algorithm: algorithm.name().to_string(),
        trial,
        seed: ctx.trial_seed(axis_value, algorithm, trial),
        nmse: nmse(&h_hat, h)?,
        arspr: arspr(&h_hat, h, &cfg.beamforming)?,
        iterations,
        converged,
        runtime_ms: timing.then_some(elapsed),
    };
    Ok(TrialOutcome {
        row,
        pilots,
        snr_db,
        residual_history: history,
    })
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads for the trials of one cell; 0 or 1 runs serially.
    pub parallel: usize,
    /// Report solver wall time in `runtime_ms`.
    pub timing: bool,
    /// CSV destination. The summary goes to `<stem>.summary.json` next to it.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub axis_name: String,
    pub axis_value: String,
    pub algorithm: String,
    pub pilots: usize,
    pub snr_db: f64,
    pub trials: usize,
    pub mean_nmse: f64,
    pub se_nmse: f64,
    pub mean_arspr: f64,
    pub se_arspr: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis_name: String,
    pub master_seed: u64,
    pub trials: usize,
    /// Pilots of full least squares over pilots of the compressed estimators.
    pub pilot_overhead_ratio: f64,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<TrialRow>,
    pub summary: SweepSummary,
}

impl SweepResult {
    pub fn cell(&self, axis_value: &str, algorithm: Algorithm) -> Option<&CellSummary> {
        self.summary
            .cells
            .iter()
            .find(|c| c.axis_value == axis_value && c.algorithm == algorithm.name())
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn summarize_cell(outcomes: &[TrialOutcome]) -> Option<CellSummary> {
    let first = outcomes.first()?;
    let nm: Vec<f64> = outcomes.iter().map(|o| o.row.nmse).collect();
    let ar: Vec<f64> = outcomes.iter().map(|o| o.row.arspr).collect();
    let (mean_nmse, se_nmse) = mean_se(&nm);
    let (mean_arspr, se_arspr) = mean_se(&ar);
    let conv = outcomes.iter().filter(|o| o.row.converged).count();
    Some(CellSummary {
        axis_name: first.row.axis_name.clone(),
        axis_value: first.row.axis_value.clone(),
        algorithm: first.row.algorithm.clone(),
        pilots: first.pilots,
        snr_db: first.snr_db,
        trials: outcomes.len(),
        mean_nmse,
        se_nmse,
        mean_arspr,
        se_arspr,
        converged_fraction: conv as f64 / outcomes.len() as f64,
    })
}

pub fn summary_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    csv.with_file_name(format!("{stem}.summary.json"))
}

fn run_cell(
    ctx: &TrialContext,
    axis_value: f64,
    algorithm: Algorithm,
    pool: Option<&rayon::ThreadPool>,
    timing: bool,
) -> Result<Vec<TrialOutcome>> {
    let trials = ctx.config.trials;
    let job = |t: usize| run_trial(ctx, axis_value, algorithm, t, timing);
    match pool {
        Some(pool) => pool.install(|| (0..trials).into_par_iter().map(job).collect()),
        None => (0..trials).map(job).collect(),
    }
}

/// Run every `(axis value, algorithm)` cell in order. Rows are appended to the
/// CSV and flushed after each cell, so an interrupted sweep keeps the cells it
/// finished.
pub fn run_sweep(config: &ExperimentConfig, opts: &SweepOptions) -> Result<SweepResult> {
    let ctx = TrialContext::new(config.clone())?;
    let pool = if opts.parallel > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.parallel)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut csv = match &opts.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
            w.write_record(CSV_HEADER)?;
            w.flush().map_err(|e| Error::io(path, e))?;
            Some((w, path.clone()))
        }
        None => None,
    };
    let mut diag = match &config.diagnostics {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = csv::Writer::from_writer(file);
            w.write_record(["axis_value", "algorithm", "trial", "iteration", "residual_norm"])?;
            Some((w, path.clone()))
        }
        None => None,
    };

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &value in &config.sweep.values {
        for &algorithm in &config.algorithms {
            if !config.runs_at(algorithm, value) {
                continue;
            }
            let outcomes = run_cell(&ctx, value, algorithm, pool.as_ref(), opts.timing)?;
            if let Some((w, path)) = csv.as_mut() {
                for o in &outcomes {
                    w.write_record(o.row.record())?;
                }
                w.flush().map_err(|e| Error::io(path.as_path(), e))?;
            }
            if let Some((w, path)) = diag.as_mut() {
                for o in &outcomes {
                    for (k, r) in o.residual_history.iter().enumerate() {
                        w.write_record([
                            o.row.axis_value.clone(),
                            o.row.algorithm.clone(),
                            o.row.trial.to_string(),
                            k.to_string(),
                            r.to_string(),
                        ])?;
                    }
                }
                w.flush().map_err(|e| Error::io(path.as_path(), e))?;
            }
            cells.extend(summarize_cell(&outcomes));
            rows.extend(outcomes.into_iter().map(|o| o.row));
        }
    }

    let summary = SweepSummary {
        axis_name: config.sweep.axis.name().to_string(),
        master_seed: config.master_seed,
        trials: config.trials,
        pilot_overhead_ratio: config.fixed.ls_pilots as f64 / config.fixed.pilots as f64,
        cells,
    };
    if let Some(path) = &opts.out {
        let spath = summary_path(path);
        let mut f = File::create(&spath).map_err(|e| Error::io(&spath, e))?;
        let text = serde_json::to_string_pretty(&summary)?;
        f.write_all(text.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| Error::io(&spath, e))?;
    }
    Ok(SweepResult { rows, summary })
}

/// Parse a CSV written by [`run_sweep`].
pub fn read_rows(path: &Path) -> Result<Vec<TrialRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
