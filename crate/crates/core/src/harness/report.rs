use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coverage::CurveSummary;
use crate::error::{Error, Result};
use crate::samplers::Method;
use crate::similarity::Measure;
use crate::stats;

use super::config::ExperimentConfig;

pub const TABLE_CSV_HEADER: &str = "dataset,method,central,p25,p50,p75";

/// One (dataset, method, repetition) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub method: Method,
    pub repetition: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub metrics: BTreeMap<String, f64>,
    /// Sampler bookkeeping copied from the chain (acceptance rate, kept count…).
    pub extra: BTreeMap<String, f64>,
    pub errors: Vec<String>,
}

impl CellResult {
    pub fn new(dataset: &str, method: Method, repetition: usize, seed: u64) -> Self {
        Self {
            dataset: dataset.to_string(),
            method,
            repetition,
            seed,
            n_samples: 0,
            metrics: BTreeMap::new(),
            extra: BTreeMap::new(),
            errors: Vec::new(),
        }
    }

    pub fn record<T>(&mut self, what: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{what}: {e}"));
                None
            }
        }
    }
}

/// Summary of one metric over repetitions. `central` is the mean; quartiles
/// use linear interpolation between order statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: Method,
    pub metric: String,
    pub central: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub n: usize,
}

impl ReportRow {
    pub fn from_values(dataset: &str, method: Method, metric: &str, values: &[f64]) -> Self {
        let (p25, p50, p75) = stats::quartiles(values);
        Self {
            dataset: dataset.to_string(),
            method,
            metric: metric.to_string(),
            central: stats::mean(values),
            p25,
            p50,
            p75,
            n: values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceEntry {
    pub dataset: String,
    pub method: Method,
    pub measure: Measure,
    pub summary: CurveSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub rows: Vec<ReportRow>,
    pub persistence: Vec<PersistenceEntry>,
    /// Failures not tied to a single cell (for example a curve summary).
    pub errors: Vec<String>,
}

impl Report {
    /// The stored config drops `output_dir`, so runs written to different
    /// places produce identical reports.
    pub fn empty(mut config: ExperimentConfig) -> Self {
        config.output_dir = None;
        Self {
            config,
            cells: Vec::new(),
            rows: Vec::new(),
            persistence: Vec::new(),
            errors: Vec::new(),
        }
    }

    pub fn is_partial(&self) -> bool {
        !self.errors.is_empty() || self.cells.iter().any(|c| !c.errors.is_empty())
    }

    /// Rebuilds `rows` from the cells: one row per dataset × method × metric,
    /// ordered as in the config.
    pub fn summarize(&mut self) {
        let mut rows = Vec::new();
        for dataset in &self.config.datasets {
            for &method in &self.config.methods {
                let mut by_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
                for c in self.cells.iter().filter(|c| &c.dataset == dataset && c.method == method) {
                    for (k, &v) in &c.metrics {
                        by_metric.entry(k.as_str()).or_default().push(v);
                    }
                }
                for (metric, values) in by_metric {
                    rows.push(ReportRow::from_values(dataset, method, metric, &values));
                }
            }
        }
        self.rows = rows;
    }

    pub fn row(&self, dataset: &str, method: Method, metric: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.method == method && r.metric == metric)
    }

    pub fn cells_for(&self, dataset: &str, method: Method) -> impl Iterator<Item = &CellResult> {
        let dataset = dataset.to_string();
        self.cells
            .iter()
            .filter(move |c| c.dataset == dataset && c.method == method)
    }

    pub fn curve(&self, dataset: &str, method: Method, measure: Measure) -> Option<&CurveSummary> {
        self.persistence
            .iter()
            .find(|p| p.dataset == dataset && p.method == method && p.measure == measure)
            .map(|p| &p.summary)
    }

    /// Metric names present in the rows, plus every metric the config asks
    /// for (so that empty reports still get header-only tables).
    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = metric_names(&self.config);
        for r in &self.rows {
            if !names.contains(&r.metric) {
                names.push(r.metric.clone());
            }
        }
        names
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn table_csv(&self, metric: &str) -> String {
        let mut out = String::from(TABLE_CSV_HEADER);
        out.push('\n');
        for r in self.rows.iter().filter(|r| r.metric == metric) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.dataset, r.method, r.central, r.p25, r.p50, r.p75
            );
        }
        out
    }
}

pub const METRIC_LOG_LIKELIHOOD: &str = "mean_log_likelihood";
pub const METRIC_LOG_POSTERIOR: &str = "mean_log_posterior";
pub const METRIC_IAT: &str = "iat";
pub const METRIC_IAT_LOGLIK: &str = "iat_loglik";

pub fn max_dist_metric(measure: Measure) -> String {
    format!("max_dist_{}", measure.name())
}

pub fn mean_dist_metric(measure: Measure) -> String {
    format!("mean_dist_{}", measure.name())
}

pub fn metric_names(cfg: &ExperimentConfig) -> Vec<String> {
    let mut names = Vec::new();
    let m = &cfg.metrics;
    if m.likelihood {
        names.push(METRIC_LOG_LIKELIHOOD.to_string());
    }
    if m.posterior {
        names.push(METRIC_LOG_POSTERIOR.to_string());
    }
    if m.iat {
        names.push(METRIC_IAT.to_string());
        names.push(METRIC_IAT_LOGLIK.to_string());
    }
    if m.distances {
        for measure in Measure::ALL {
            names.push(max_dist_metric(measure));
            names.push(mean_dist_metric(measure));
        }
    }
    names
}

/// `report.json` plus `table_<metric>.csv` for every metric.
pub fn emit_tables(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    for metric in report.metric_names() {
        fs::write(dir.join(format!("table_{metric}.csv")), report.table_csv(&metric))?;
    }
    Ok(())
}

/// `persistence/<dataset>_<method>_<measure>.csv` (mean and quartile curves)
/// and `..._reps.csv` (one curve per repetition).
pub fn emit_persistence(report: &Report, dir: &Path) -> Result<()> {
    let dir = dir.join("persistence");
    fs::create_dir_all(&dir)?;
    for p in &report.persistence {
        let stem = format!("{}_{}_{}", p.dataset, p.method, p.measure.name());
        fs::write(dir.join(format!("{stem}.csv")), p.summary.to_csv())?;
        fs::write(dir.join(format!("{stem}_reps.csv")), p.summary.repetitions_csv())?;
    }
    Ok(())
}

/// Parses a table written by [`Report::table_csv`].
pub fn parse_table_csv(text: &str, metric: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(TABLE_CSV_HEADER) {
        return Err(Error::Parse("missing table header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Parse(format!("expected 6 fields: {line}")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
            Ok(ReportRow {
                dataset: f[0].to_string(),
                method: Method::parse(f[1])?,
                metric: metric.to_string(),
                central: num(f[2])?,
                p25: num(f[3])?,
                p50: num(f[4])?,
                p75: num(f[5])?,
                n: 0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Profile;

    fn report_with_cell() -> Report {
        let mut cfg = ExperimentConfig::profile(Profile::Desk, 1);
        cfg.datasets = vec!["unique".into()];
        cfg.methods = vec![Method::Gibbs];
        let mut report = Report::empty(cfg);
        let mut cell = CellResult::new("unique", Method::Gibbs, 0, 42);
        cell.metrics.insert(METRIC_IAT.into(), 12.5);
        cell.metrics.insert(METRIC_LOG_LIKELIHOOD.into(), -0.1 / 3.0);
        report.cells.push(cell);
        report.summarize();
        report
    }

    #[test]
    fn quartiles_of_one_to_ten() {
        let values: Vec<f64> = (1..=10).map(f64::from).collect();
        let row = ReportRow::from_values("unique", Method::Hmc, "iat", &values);
        assert_eq!((row.p25, row.p50, row.p75), (3.25, 5.5, 7.75));
        assert_eq!(row.central, 5.5);
        assert!(row.p25 <= row.p50 && row.p50 <= row.p75);
    }

    #[test]
    fn empty_report_gives_header_only_tables() {
        let report = Report::empty(ExperimentConfig::default());
        let dir = tempfile::tempdir().unwrap();
        emit_tables(&report, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("table_iat.csv")).unwrap();
        assert_eq!(text, format!("{TABLE_CSV_HEADER}\n"));
        assert!(dir.path().join("table_max_dist_angle.csv").exists());
        assert!(!report.is_partial());
    }

    #[test]
    fn one_cell_round_trips_through_csv() {
        let report = report_with_cell();
        for metric in [METRIC_IAT, METRIC_LOG_LIKELIHOOD] {
            let rows = parse_table_csv(&report.table_csv(metric), metric).unwrap();
            assert_eq!(rows.len(), 1);
            let want = report.row("unique", Method::Gibbs, metric).unwrap();
            assert_eq!(rows[0].central, want.central);
            assert_eq!((rows[0].p25, rows[0].p50, rows[0].p75), (want.p25, want.p50, want.p75));
            assert_eq!(rows[0].method, Method::Gibbs);
        }
        assert!(parse_table_csv("a,b\n", "iat").is_err());
    }

    #[test]
    fn json_round_trip() {
        let report = report_with_cell();
        let back = Report::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn errors_mark_partial() {
        let mut report = report_with_cell();
        let r: Result<()> = Err(Error::EmptyFilter { threshold: 1.0 });
        assert!(report.cells[0].record("filter", r).is_none());
        assert!(report.is_partial());
        assert!(report.cells[0].errors[0].starts_with("filter: "));
    }
}
