use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

use super::svg::Plot;

/// One CSV table: a header and rows of scalar JSON values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(&self.columns).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::String(s) => s.clone(),
                Value::Null => String::new(),
                other => other.to_string(),
            }))
            .map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    /// Not enough data to decide; does not fail the run.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub outcome: Outcome,
    pub detail: String,
}

/// A quantity computed from truncated walks and the bound on what the
/// discarded tails could change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationEntry {
    pub quantity: String,
    pub escape_radius: u32,
    pub bound: Option<f64>,
    pub note: String,
}

/// Everything a run produces. `report.json` is a pure function of the
/// configuration and seed; wall-clock time goes to `timing.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    /// False when a resource cap cut the run short.
    pub complete: bool,
    pub replicas: u64,
    pub tables: Vec<Table>,
    pub truncation: Vec<TruncationEntry>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
    /// Files written besides the report (soups), relative to the output
    /// directory.
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub plots: Vec<Plot>,
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn new(subcommand: &str, config: BTreeMap<String, String>, replicas: u64) -> Self {
        ExperimentReport {
            subcommand: subcommand.to_string(),
            config,
            complete: true,
            replicas,
            tables: Vec::new(),
            truncation: Vec::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
            artifacts: Vec::new(),
            plots: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn verdict(&mut self, check: &str, pass: bool, detail: impl Into<String>) {
        let outcome = if pass { Outcome::Pass } else { Outcome::Fail };
        self.verdicts.push(Verdict { check: check.to_string(), outcome, detail: detail.into() });
    }

    pub fn inconclusive(&mut self, check: &str, detail: impl Into<String>) {
        self.verdicts.push(Verdict { check: check.to_string(), outcome: Outcome::Inconclusive, detail: detail.into() });
    }

    pub fn failed(&self) -> bool {
        self.verdicts.iter().any(|v| v.outcome == Outcome::Fail)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `report.json`, `timing.json`, one CSV per table and one SVG per
    /// plot into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        let timing = serde_json::json!({ "wallClockSeconds": self.wall_clock_seconds, "replicas": self.replicas });
        fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
        for t in &self.tables {
            fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv()?)?;
        }
        for p in &self.plots {
            fs::write(dir.join(format!("{}.svg", p.name)), p.render())?;
        }
        Ok(())
    }
}
