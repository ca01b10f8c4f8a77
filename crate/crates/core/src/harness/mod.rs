//! Experiment runner: datasets × methods × repetitions with derived seeds,
//! summary tables and persistence curves.

mod config;
mod report;
mod run;

pub use config::{ExperimentConfig, MetricFlags, Profile};
pub use report::{
    emit_persistence, emit_tables, max_dist_metric, mean_dist_metric, metric_names, parse_table_csv, CellResult,
    PersistenceEntry, Report, ReportRow, METRIC_IAT, METRIC_IAT_LOGLIK, METRIC_LOG_LIKELIHOOD, METRIC_LOG_POSTERIOR,
    TABLE_CSV_HEADER,
};
pub use run::{run_experiment, run_experiment_with_progress};
