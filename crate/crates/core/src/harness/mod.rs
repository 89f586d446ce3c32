//! Config-driven experiment runner: seeded runs, periodic greedy
//! evaluation, CSV logs, aggregation and learning curves.

mod aggregate;
mod config;
mod curves;
mod records;
mod run;

pub use aggregate::{
    aggregate, aggregate_dir, median, run_csvs, sweep_csv, sweep_table, Aggregated, RunMetrics, Stats, Summary,
    SummaryRow, SweepRow,
};
pub use config::{AgentKind, DelaySettings, DelayShape, ExperimentConfig, Precision};
pub use curves::{curves_dir, emit_curves, points_csv, render_svg, series_from_summary, CurvePoint, CurveSeries};
pub use records::{read_run_csv, RecordKind, RunRecord, RunWriter, RUN_COLUMNS, RUN_SCHEMA};
pub use run::{
    build_agent, derive_seed, evaluate, run_csv_path, run_experiment, run_experiment_with_threads, thread_cap,
    train_run, wrap_env, ExperimentSummary, RunOutcome, RunReport, VERSION,
};
