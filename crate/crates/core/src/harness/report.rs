use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::time::Duration;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

/// One check: passes iff `statistic` is on the right side of `threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub se: Option<f64>,
}

impl CheckRow {
    /// `statistic ≤ threshold`.
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64, se: Option<f64>) -> Self {
        CheckRow {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
            se,
        }
    }

    /// `statistic ≥ threshold`.
    pub fn at_least(name: impl Into<String>, statistic: f64, threshold: f64, se: Option<f64>) -> Self {
        CheckRow {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic >= threshold,
            se,
        }
    }
}

/// A random stream family consumed by one stage of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamUse {
    pub purpose: &'static str,
    pub seed: u64,
    pub label: &'static str,
    pub replicates: Range<u64>,
}

/// Raw per-check samples, written as `samples/<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTable {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl SampleTable {
    pub fn new(name: impl Into<String>, header: Vec<&'static str>) -> Self {
        SampleTable {
            name: name.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub kind: &'static str,
    pub config_digest: String,
    pub seed: u64,
    pub version: &'static str,
    pub rows: Vec<CheckRow>,
    pub streams: Vec<StreamUse>,
    pub warnings: Vec<String>,
    pub assumptions: Vec<&'static str>,
    pub samples: Vec<SampleTable>,
    /// Wall-clock time per stage; never written to disk.
    pub timing: Vec<(String, Duration)>,
}

impl ExperimentReport {
    pub(crate) fn new(cfg: &ExperimentConfig) -> Self {
        ExperimentReport {
            name: cfg.name.clone(),
            kind: cfg.kind.name(),
            config_digest: cfg.digest.clone(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION"),
            rows: Vec::new(),
            streams: Vec::new(),
            warnings: Vec::new(),
            assumptions: Vec::new(),
            samples: Vec::new(),
            timing: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Pairs of stream uses sharing a key and overlapping in replicate ids.
    pub fn stream_conflicts(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, a) in self.streams.iter().enumerate() {
            for (j, b) in self.streams.iter().enumerate().skip(i + 1) {
                let same_key = a.seed == b.seed && a.label == b.label;
                let overlap = a.replicates.start < b.replicates.end && b.replicates.start < a.replicates.end;
                if same_key && overlap {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn report_csv(&self) -> String {
        let mut s = String::from("name,statistic,threshold,pass,se\n");
        for r in &self.rows {
            let se = r.se.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{}", r.name, r.statistic, r.threshold, r.pass, se);
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.name);
        let _ = writeln!(s, "kind = {}", self.kind);
        let _ = writeln!(s, "version = {}", self.version);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "config_sha256 = {}", self.config_digest);
        let _ = writeln!(s, "checks = {}", self.rows.len());
        let _ = writeln!(s, "passed = {}", self.rows.iter().filter(|r| r.pass).count());
        let _ = writeln!(s, "status = {}", if self.all_pass() { "pass" } else { "fail" });
        for r in self.rows.iter().filter(|r| !r.pass) {
            let _ = writeln!(s, "failed = {}", r.name);
        }
        for (i, st) in self.streams.iter().enumerate() {
            let _ = writeln!(
                s,
                "stream.{i} = {} seed={} label={} replicates={}..{}",
                st.purpose, st.seed, st.label, st.replicates.start, st.replicates.end
            );
        }
        let conflicts = self.stream_conflicts();
        let _ = writeln!(
            s,
            "stream_audit = {}",
            if conflicts.is_empty() { "disjoint" } else { "overlap" }
        );
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        for a in &self.assumptions {
            let _ = writeln!(s, "assumption = {a}");
        }
        for t in &self.samples {
            let _ = writeln!(s, "samples = samples/{}.csv", t.name);
        }
        s
    }

    /// `report.csv`, `summary.txt` and `samples/*.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let samples = dir.join("samples");
        fs::create_dir_all(&samples).map_err(|e| Error::io(&samples, e))?;
        let put = |p: &Path, text: &str| fs::write(p, text).map_err(|e| Error::io(p, e));
        put(&dir.join("report.csv"), &self.report_csv())?;
        put(&dir.join("summary.txt"), &self.summary_text())?;
        for t in &self.samples {
            let mut text = t.header.join(",");
            text.push('\n');
            for row in &t.rows {
                text.push_str(&row.join(","));
                text.push('\n');
            }
            put(&samples.join(format!("{}.csv", t.name)), &text)?;
        }
        Ok(())
    }
}
