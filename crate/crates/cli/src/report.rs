use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Where a reference value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Paper,
    DerivedOracle,
    Trivial,
}

/// One line of the JSON-lines report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub experiment: String,
    pub operation: String,
    pub parameters: Value,
    pub value_re: f64,
    pub value_im: f64,
    pub oracle_value: Option<f64>,
    pub paper_value: Option<f64>,
    pub abs_error: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub provenance: Provenance,
    /// Seconds spent computing the value.
    pub wall_time: f64,
}

/// Collects records for one experiment.
pub struct Report {
    experiment: String,
    tolerance: f64,
    pub records: Vec<ReportRecord>,
}

/// A computed value and what to compare it to.
pub struct Check {
    pub operation: String,
    pub parameters: Value,
    pub value: (f64, f64),
    pub oracle: Option<f64>,
    pub paper: Option<f64>,
}

impl Check {
    pub fn new(operation: impl Into<String>, parameters: Value, value: f64) -> Self {
        Check { operation: operation.into(), parameters, value: (value, 0.0), oracle: None, paper: None }
    }

    pub fn complex(mut self, im: f64) -> Self {
        self.value.1 = im;
        self
    }

    pub fn oracle(mut self, v: f64) -> Self {
        self.oracle = Some(v);
        self
    }

    pub fn paper(mut self, v: f64) -> Self {
        self.paper = Some(v);
        self
    }
}

impl Report {
    pub fn new(experiment: &str, tolerance: f64) -> Self {
        Report { experiment: experiment.to_string(), tolerance, records: Vec::new() }
    }

    /// Times `f` and files its check. Without any reference the record is
    /// informational and passes.
    pub fn run(&mut self, f: impl FnOnce() -> anyonsim::Result<Check>) -> anyonsim::Result<()> {
        let start = Instant::now();
        let check = f()?;
        let wall_time = start.elapsed().as_secs_f64();
        self.push(check, wall_time);
        Ok(())
    }

    pub fn push(&mut self, check: Check, wall_time: f64) {
        let (re, im) = check.value;
        let dist = |r: f64| ((re - r).powi(2) + im * im).sqrt();
        let errors: Vec<f64> = check.oracle.iter().chain(check.paper.iter()).map(|&r| dist(r)).collect();
        let abs_error = errors.iter().copied().reduce(f64::max);
        let (provenance, tolerance) = match (check.paper, check.oracle) {
            (Some(_), _) => (Provenance::Paper, Some(self.tolerance)),
            (None, Some(_)) => (Provenance::DerivedOracle, Some(self.tolerance)),
            (None, None) => (Provenance::Trivial, None),
        };
        let pass = abs_error.is_none_or(|e| e <= self.tolerance);
        self.records.push(ReportRecord {
            experiment: self.experiment.clone(),
            operation: check.operation,
            parameters: check.parameters,
            value_re: re,
            value_im: im,
            oracle_value: check.oracle,
            paper_value: check.paper,
            abs_error,
            tolerance,
            pass,
            provenance,
            wall_time,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }
}

pub fn write_jsonl(records: &[ReportRecord], out: &mut impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.10}"))
}

fn fmt_params(v: &Value) -> String {
    match v {
        Value::Object(m) => m
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}={s}"),
                other => format!("{k}={other}"),
            })
            .collect::<Vec<_>>()
            .join(" "),
        other => other.to_string(),
    }
}

pub fn write_table(records: &[ReportRecord], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{:<6} {:<30} {:<50} {:>16} {:>16} {:>16} {:>10}", "status", "operation", "parameters", "value", "oracle", "paper", "error")?;
    for r in records {
        let value = if r.value_im == 0.0 { format!("{:.10}", r.value_re) } else { format!("{:.6}{:+.6}i", r.value_re, r.value_im) };
        let status = match (r.pass, r.provenance) {
            (true, Provenance::Trivial) => "info",
            (true, _) => "pass",
            (false, _) => "FAIL",
        };
        writeln!(
            out,
            "{:<6} {:<30} {:<50} {:>16} {:>16} {:>16} {:>10}",
            status,
            r.operation,
            fmt_params(&r.parameters),
            value,
            fmt_opt(r.oracle_value),
            fmt_opt(r.paper_value),
            r.abs_error.map_or_else(|| "-".into(), |e| format!("{e:.2e}")),
        )?;
    }
    let failed = records.iter().filter(|r| !r.pass).count();
    writeln!(out, "{} records, {} failed", records.len(), failed)
}
