//! `irs-cascade`: Monte Carlo sweeps, self-checks and channel dumps for
//! compressed cascade-channel estimation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irs_cascade::experiments::{
    dump_channel, preset, render_checklist, run_sweep, verify_suite, ExperimentConfig, SweepOptions,
    SweepResult, TrialContext, VerifyOptions, PRESETS,
};

#[derive(Parser)]
#[command(name = "irs-cascade", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Named configuration: paper, sweep-t or sweep-snr.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per cell; overrides the configuration.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads per cell.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
    /// Fill the runtime_ms column.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a JSON config, or by --preset (default paper).
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// NMSE and ARSPR against the number of pilots.
    SweepT {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// NMSE and ARSPR against SNR, including full least squares.
    SweepSnr {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force structural checks; exits nonzero if any fails.
    Verify {
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Write one channel draw as JSON.
    DumpChannel {
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Draw angles on the dictionary grid.
        #[arg(long)]
        on_grid: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration as JSON.
    Config,
}

fn load(global: &Global, fallback: &str, file: Option<&PathBuf>) -> Result<ExperimentConfig, String> {
    let mut cfg = match (file, &global.preset) {
        (Some(path), _) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        (None, Some(name)) => preset(name).map_err(|e| format!("{e} (known: {})", PRESETS.join(", ")))?,
        (None, None) => preset(fallback).map_err(|e| e.to_string())?,
    };
    if let Some(seed) = global.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = global.trials {
        cfg.trials = trials;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn sweep(global: &Global, cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<(), String> {
    let opts = SweepOptions {
        parallel: global.parallel,
        timing: global.timing,
        out,
    };
    let res = run_sweep(cfg, &opts).map_err(|e| e.to_string())?;
    print_summary(&res);
    Ok(())
}

fn print_summary(res: &SweepResult) {
    let s = &res.summary;
    println!(
        "{:>10} {:>16} {:>6} {:>8} {:>11} {:>10} {:>9} {:>9}",
        s.axis_name, "algorithm", "T", "snr_db", "mean_nmse", "se_nmse", "arspr", "se_arspr"
    );
    for c in &s.cells {
        println!(
            "{:>10} {:>16} {:>6} {:>8} {:>11.4e} {:>10.2e} {:>9.4} {:>9.4}",
            c.axis_value, c.algorithm, c.pilots, c.snr_db, c.mean_nmse, c.se_nmse, c.mean_arspr, c.se_arspr
        );
    }
    println!(
        "rows: {}, trials per cell: {}, master seed: {}, pilot overhead ratio (full LS / compressed): {:.2}",
        res.rows.len(),
        s.trials,
        s.master_seed,
        s.pilot_overhead_ratio
    );
}

fn execute(cli: Cli) -> Result<bool, String> {
    let g = &cli.global;
    match cli.command {
        Command::Run { config, out } => sweep(g, &load(g, "paper", config.as_ref())?, out)?,
        Command::SweepT { out } => sweep(g, &load(g, "sweep-t", None)?, out)?,
        Command::SweepSnr { out } => sweep(g, &load(g, "sweep-snr", None)?, out)?,
        Command::Verify { inject_fault } => {
            let checks = verify_suite(VerifyOptions { inject_fault }).map_err(|e| e.to_string())?;
            print!("{}", render_checklist(&checks));
            return Ok(checks.iter().all(|c| c.passed));
        }
        Command::DumpChannel { trial, on_grid, out } => {
            let mut cfg = load(g, "paper", None)?;
            if on_grid {
                cfg.channel = cfg.channel.on_grid();
            }
            let ctx = TrialContext::new(cfg).map_err(|e| e.to_string())?;
            let dump = dump_channel(&ctx, trial).map_err(|e| e.to_string())?;
            let text = serde_json::to_string_pretty(&dump).map_err(|e| e.to_string())?;
            match out {
                Some(path) => std::fs::write(&path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))?,
                None => println!("{text}"),
            }
        }
        Command::Config => println!("{}", load(g, "paper", None)?.to_json()),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
