//! Monte Carlo harness: configuration and presets, deterministic seeding,
//! sweeps with CSV/JSON output, the verification checklist, and channel dumps.

mod config;
mod dump;
mod harness;
pub mod seed;
mod verify;

pub use config::{
    preset, Algorithm, ExperimentConfig, FixedPoint, OmpSettings, SweepAxis, SweepSpec, PRESETS,
};
pub use dump::{dump_channel, ChannelDump, MatrixJson};
pub use harness::{
    format_axis_value, mean_se, read_rows, run_sweep, run_trial, summarize_cell, summary_path,
    CellSummary, SweepOptions, SweepResult, SweepSummary, TrialContext, TrialOutcome, TrialRow,
    CSV_HEADER,
};
pub use verify::{
    brute_force_d, dedup_check, distinct_columns, mimo_chain_errors, rank_one_ratio,
    render_checklist, representation_error, small_grid_cases, verify_suite, Check, DedupReport,
    VerifyOptions,
};
