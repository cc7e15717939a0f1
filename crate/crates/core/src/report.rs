//! Tabular experiment output: CSV rows plus a JSON summary of pass/fail checks.

use serde::{Deserialize, Serialize};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, pass: measured <= tolerance }
    }

    /// Passes when `measured >= tolerance`.
    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, pass: measured >= tolerance }
    }

    /// Boolean outcome; stored as measured 1/0 against tolerance 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), measured: if ok { 1.0 } else { 0.0 }, tolerance: 1.0, pass: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub checks: Vec<Check>,
    /// Free-form extra summary fields.
    pub details: serde_json::Value,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>, header: &[&str]) -> Self {
        Self {
            experiment: experiment.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
            details: serde_json::Value::Object(Default::default()),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn detail(&mut self, key: &str, value: serde_json::Value) {
        if let serde_json::Value::Object(m) = &mut self.details {
            m.insert(key.to_string(), value);
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment,
            "pass": self.passed(),
            "checks": self.checks,
            "details": self.details,
        })
    }
}
