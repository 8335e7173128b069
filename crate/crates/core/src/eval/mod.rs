//! Metrics over episode records, load sweeps across agents, slowdown by job
//! duration, and training-curve summaries.

mod curves;
mod metrics;
mod stats;
mod sweep;

pub use curves::{read_curve, summarize_curve, training_curves, CurveMeans, CurveSummary};
pub use metrics::{
    average_slowdown, completion_time, finished_slowdowns, mean, quartiles, slowdown_by_duration, std_dev,
    write_buckets_csv, DurationBucket, Quartiles, MIN_BUCKET,
};
pub use stats::{paired_less, PairedTest};
pub use sweep::{
    check_policy_fits, eval_seeds, evaluate_agent, parse_agents, resolve_agents, run_sweep, summarize, write_sweep,
    AgentFactory, AgentSpec, CellRecords, CellSummary, SweepReport, SweepRow, SweepSpec,
};
