//! JSON reports and CSV tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::config::{JobKind, Tolerances};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    /// `|value − target| ≤ limit`.
    #[serde(rename = "within")]
    Within,
}

/// One acceptance rule evaluated against a recorded metric.
#[derive(Debug, Clone, Serialize)]
pub struct Rule {
    pub metric: String,
    pub value: f64,
    pub comparison: Comparison,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub job: JobKind,
    pub seed: u64,
    pub inputs: serde_json::Value,
    pub tolerances: Tolerances,
    pub tolerance_scale: f64,
    pub metrics: BTreeMap<String, f64>,
    pub rules: Vec<Rule>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
    pub artifacts: Vec<String>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Report {
    pub fn new(job: JobKind, seed: u64, tolerances: Tolerances, tolerance_scale: f64) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            job,
            seed,
            inputs: serde_json::Value::Null,
            tolerances,
            tolerance_scale,
            metrics: BTreeMap::new(),
            rules: Vec::new(),
            details: serde_json::Value::Null,
            artifacts: Vec::new(),
            pass: false,
            reason: None,
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) -> f64 {
        self.metrics.insert(name.into(), value);
        value
    }

    fn rule(&mut self, metric: &str, comparison: Comparison, target: Option<f64>, limit: f64) {
        let value = self.metrics.get(metric).copied().unwrap_or(f64::NAN);
        // NaN fails every comparison.
        let pass = match comparison {
            Comparison::AtMost => value <= limit,
            Comparison::AtLeast => value >= limit,
            Comparison::Within => (value - target.unwrap_or(f64::NAN)).abs() <= limit,
        };
        self.rules.push(Rule {
            metric: metric.to_string(),
            value,
            comparison,
            target,
            limit,
            pass,
        });
    }

    pub fn at_most(&mut self, metric: &str, limit: f64) {
        self.rule(metric, Comparison::AtMost, None, limit);
    }

    pub fn at_least(&mut self, metric: &str, limit: f64) {
        self.rule(metric, Comparison::AtLeast, None, limit);
    }

    pub fn within(&mut self, metric: &str, target: f64, limit: f64) {
        self.rule(metric, Comparison::Within, Some(target), limit);
    }

    /// Settle `pass` and `reason` from the metrics and rules.
    pub fn finish(&mut self) {
        if self.metrics.is_empty() {
            self.pass = false;
            self.reason = Some("no data".into());
            return;
        }
        let failed: Vec<String> = self
            .rules
            .iter()
            .filter(|r| !r.pass)
            .map(|r| match r.target {
                Some(t) => format!("{} = {} not within {} of {}", r.metric, r.value, r.limit, t),
                None => {
                    let op = if matches!(r.comparison, Comparison::AtLeast) {
                        ">="
                    } else {
                        "<="
                    };
                    format!("{} = {} violates {op} {}", r.metric, r.value, r.limit)
                }
            })
            .collect();
        self.pass = !self.rules.is_empty() && failed.is_empty();
        self.reason = if self.rules.is_empty() {
            Some("no acceptance rules".into())
        } else if failed.is_empty() {
            None
        } else {
            Some(failed.join("; "))
        };
    }

    /// Record a numerical failure that stopped the job.
    pub fn abort(&mut self, reason: String) {
        self.pass = false;
        self.reason = Some(reason);
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        std::fs::write(dir.join("report.json"), text)
    }
}

/// CSV table written with a fixed header; floats use the shortest
/// round-trip representation.
pub struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> csv::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Text of one CSV cell. Floats round-trip exactly and switch to
/// exponent notation outside `[1e-4, 1e6)`.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        let a = self.abs();
        if a == 0.0 || !a.is_finite() || (1e-4..1e6).contains(&a) {
            self.to_string()
        } else {
            format!("{self:e}")
        }
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => { $(impl Cell for $t { fn cell(&self) -> String { self.to_string() } })* };
}
display_cell!(usize, i64, str, String);

impl<T: Cell + ?Sized> Cell for &T {
    fn cell(&self) -> String {
        (**self).cell()
    }
}

/// `vec![..]` of formatted cells.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::report::Cell::cell(&$x)),*] };
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank() -> Report {
        Report::new(JobKind::Fig2, 1, Tolerances::default(), 1.0)
    }

    #[test]
    fn cells_round_trip() {
        for x in [0.0, 1.5, -2.25e-12, 6.02e23, 1e-4, 999999.5] {
            assert_eq!(x.cell().parse::<f64>().unwrap(), x);
        }
        assert_eq!(6.5e-10f64.cell(), "6.5e-10");
        assert_eq!(0.25f64.cell(), "0.25");
    }

    #[test]
    fn empty_metrics_fail_with_no_data() {
        let mut r = blank();
        r.finish();
        assert!(!r.pass);
        assert_eq!(r.reason.as_deref(), Some("no data"));
    }

    #[test]
    fn rules_follow_metrics() {
        let mut r = blank();
        r.metric("slope", -1.05);
        r.metric("ratio", f64::NAN);
        r.within("slope", -1.0, 0.15);
        r.finish();
        assert!(r.pass);
        r.at_most("ratio", 1.0);
        r.finish();
        assert!(!r.pass);
        assert!(r.reason.unwrap().contains("ratio"));
    }

    #[test]
    fn json_has_schema_seed_and_tolerances() {
        let mut r = blank();
        r.metric("x", 1.0);
        r.at_most("x", 2.0);
        r.finish();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["seed"], 1);
        assert_eq!(v["tolerances"]["ls_residual"], 1e-8);
        assert_eq!(v["job"], "fig2");
        assert_eq!(v["rules"][0]["comparison"], "<=");
    }
}
