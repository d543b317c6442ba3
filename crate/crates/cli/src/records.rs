//! Flat result records and their serialization: one metric per CSV row,
//! floats at 17 significant digits, plus an optional JSON run summary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

/// One measured value. Columns that do not apply stay empty in the CSV.
#[derive(Debug, Clone)]
pub struct Row {
    pub experiment: &'static str,
    pub metric: &'static str,
    pub value: f64,
    pub m: Option<i64>,
    pub eps: Option<f64>,
    pub t: Option<f64>,
    pub detail: String,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

impl Row {
    pub fn new(experiment: &'static str, metric: &'static str, value: f64) -> Row {
        Row {
            experiment,
            metric,
            value,
            m: None,
            eps: None,
            t: None,
            detail: String::new(),
            tolerance: None,
            pass: None,
        }
    }

    pub fn m(mut self, m: i64) -> Row {
        self.m = Some(m);
        self
    }

    pub fn eps(mut self, eps: f64) -> Row {
        self.eps = Some(eps);
        self
    }

    pub fn t(mut self, t: f64) -> Row {
        self.t = Some(t);
        self
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Row {
        self.detail = detail.into();
        self
    }

    /// Attach a pass/fail verdict with the tolerance it was judged against.
    pub fn check(mut self, tolerance: f64, pass: bool) -> Row {
        self.tolerance = Some(tolerance);
        self.pass = Some(pass);
        self
    }
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
struct MetricAgg {
    count: usize,
    min: f64,
    max: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Summary {
    experiment: String,
    rows: usize,
    checks: usize,
    failures: usize,
    metrics: BTreeMap<String, MetricAgg>,
}

pub struct RunStats {
    pub rows: usize,
    pub checks: usize,
    pub failures: usize,
}

/// Serialized record writer: rows arrive in batches, each batch is flushed
/// immediately so an aborted run keeps everything already finished.
pub struct Sink {
    writer: csv::Writer<Box<dyn Write>>,
    experiment: &'static str,
    rows: usize,
    checks: usize,
    failures: usize,
    metrics: BTreeMap<String, MetricAgg>,
}

impl Sink {
    pub fn new(path: Option<&Path>, experiment: &'static str) -> std::io::Result<Sink> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(std::io::stdout()),
        };
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record([
            "experiment",
            "m",
            "eps",
            "t",
            "detail",
            "metric",
            "value",
            "tolerance",
            "pass",
        ])?;
        Ok(Sink { writer, experiment, rows: 0, checks: 0, failures: 0, metrics: BTreeMap::new() })
    }

    pub fn write_batch(&mut self, rows: &[Row]) -> std::io::Result<()> {
        for row in rows {
            self.writer.write_record([
                row.experiment.to_string(),
                row.m.map(|m| m.to_string()).unwrap_or_default(),
                fmt_opt(row.eps),
                fmt_opt(row.t),
                row.detail.clone(),
                row.metric.to_string(),
                fmt_float(row.value),
                fmt_opt(row.tolerance),
                row.pass.map(|p| p.to_string()).unwrap_or_default(),
            ])?;
            self.rows += 1;
            if let Some(pass) = row.pass {
                self.checks += 1;
                if !pass {
                    self.failures += 1;
                }
            }
            let agg = self.metrics.entry(row.metric.to_string()).or_insert(MetricAgg {
                count: 0,
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            });
            agg.count += 1;
            agg.min = agg.min.min(row.value);
            agg.max = agg.max.max(row.value);
        }
        self.writer.flush()
    }

    /// Flush the records and write the JSON summary if one was requested.
    pub fn finish(mut self, json_path: Option<&Path>) -> std::io::Result<RunStats> {
        self.writer.flush()?;
        if let Some(path) = json_path {
            let summary = Summary {
                experiment: self.experiment.to_string(),
                rows: self.rows,
                checks: self.checks,
                failures: self.failures,
                metrics: self.metrics.clone(),
            };
            let mut text = serde_json::to_string_pretty(&summary)?;
            text.push('\n');
            std::fs::write(path, text)?;
        }
        Ok(RunStats { rows: self.rows, checks: self.checks, failures: self.failures })
    }
}
