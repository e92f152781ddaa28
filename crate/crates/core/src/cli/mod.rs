//! Configuration-driven experiment runner.
//!
//! Each experiment writes into its output directory:
//!
//! - `report.csv` (or `report.json`): columns `n, statistic, estimate, se,
//!   oracle, z`;
//! - `summary.json`: every row with its `|z| < 3` verdict, plus the named
//!   criteria and an overall `all_pass`;
//! - `traces.jsonl`: one line per replica, where applicable;
//! - `config.txt` and `manifest.json`: the configuration echo, seed, crate
//!   version and wall time. Only the manifest carries timing, so reports of
//!   identical configurations are byte-identical.

mod config;
mod report;
mod run;

pub use config::{Experiment, ExperimentConfig, Format, WORKERS_ENV};
pub use report::{csv_text, emit_report, summary_json, Criterion, ReportRow, Results, Z_PASS};
pub use run::{compute, run_experiment, Bundle};
