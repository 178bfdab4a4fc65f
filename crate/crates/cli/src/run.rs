//! Experiment outcomes, the replica scheduler and the artifact directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{validate, Experiment, ExperimentConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    /// Acceptance criterion number, where the check is one.
    pub criterion: Option<u8>,
    pub name: String,
    pub value: f64,
    pub accept: String,
    /// Hard checks fail the run; soft ones are only reported.
    pub hard: bool,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(criterion: Option<u8>, name: impl Into<String>, value: f64, accept: impl Into<String>, pass: bool) -> Self {
        CheckResult { criterion, name: name.into(), value, accept: accept.into(), hard: true, pass, detail: String::new() }
    }

    pub fn at_most(criterion: Option<u8>, name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(criterion, name, value, format!("<= {limit}"), value <= limit)
    }

    pub fn within(criterion: Option<u8>, name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(criterion, name, value, format!("[{lo}, {hi}]"), value >= lo && value <= hi)
    }

    pub fn soft(mut self) -> Self {
        self.hard = false;
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub experiment: Experiment,
    pub mode: String,
    /// The statement the experiment probes.
    pub anchor: String,
    pub seeds: Vec<u64>,
    pub summary: Table,
    pub summary_json: serde_json::Value,
    pub plotdata: Vec<(String, Table)>,
    pub files: Vec<(String, Vec<u8>)>,
    pub checks: Vec<CheckResult>,
}

impl Outcome {
    pub fn new(cfg: &ExperimentConfig, anchor: &str) -> Self {
        Outcome {
            experiment: cfg.experiment,
            mode: cfg.mode.clone(),
            anchor: anchor.into(),
            seeds: Vec::new(),
            summary: Table::default(),
            summary_json: serde_json::Value::Null,
            plotdata: Vec::new(),
            files: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.hard)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn manifest(&self, cfg: &ExperimentConfig) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment.name(),
            "mode": self.mode,
            "anchor": self.anchor,
            "seed": cfg.seed,
            "n": cfg.n,
            "replicas": cfg.replicas,
            "pass": self.passed(),
            "checks": self.checks,
        })
    }

    /// Writes `config.echo`, `seeds.csv`, `summary.csv`, `summary.json`,
    /// `manifest.json`, `plotdata/*.csv` and any extra files under `dir`.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("plotdata")).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("config.echo"), cfg.to_text())?;
        let mut seeds = String::from("replica,seed\n");
        for (i, s) in self.seeds.iter().enumerate() {
            let _ = writeln!(seeds, "{i},{s}");
        }
        fs::write(dir.join("seeds.csv"), seeds)?;
        fs::write(dir.join("summary.csv"), self.summary.to_csv())?;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary_json)? + "\n")?;
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest(cfg))? + "\n")?;
        for (name, t) in &self.plotdata {
            fs::write(dir.join("plotdata").join(format!("{name}.csv")), t.to_csv())?;
        }
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    /// One line per check.
    pub fn report_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let tag = match (c.pass, c.hard) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL",
                    (false, false) => "WARN",
                };
                let crit = c.criterion.map(|n| format!("[{n}] ")).unwrap_or_default();
                format!("{tag} {crit}{}: {} (accept {})", c.name, num(c.value), c.accept)
            })
            .collect()
    }
}

/// `f(i)` for `i < n` on the current pool, in index order.
pub fn par_replicas<T, F>(label: &str, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let done = AtomicUsize::new(0);
    let step = (n / 10).max(1);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let v = f(i);
            let d = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n >= 50 && d % step == 0 {
                eprintln!("  {label}: {d}/{n}");
            }
            v
        })
        .collect()
}

/// Validates `cfg` and runs it on a pool of `threads` workers (0 = all cores).
pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<Outcome> {
    let diags = validate(cfg);
    if !diags.is_empty() {
        let list: Vec<String> = diags.iter().map(|d| format!("{}: {}", d.key, d.message)).collect();
        bail!("invalid configuration:\n  {}", list.join("\n  "));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| crate::experiments::dispatch(cfg))
}

/// Runs `cfg` and writes its artifacts to `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, threads: usize, dir: &Path) -> Result<Outcome> {
    let outcome = run(cfg, threads)?;
    outcome.write(cfg, dir)?;
    Ok(outcome)
}

pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    let mut name = cfg.experiment.name().to_string();
    if cfg.experiment.modes().len() > 1 {
        name = format!("{name}-{}", cfg.mode);
    }
    PathBuf::from("runs").join(name)
}
