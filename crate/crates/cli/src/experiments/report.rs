use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::run::{CheckResult, Outcome, Table};

/// `manifest.json` of each run directory, in input order.
pub fn collect_manifests<P: AsRef<Path>>(dirs: &[P]) -> Result<Vec<(PathBuf, Value)>> {
    dirs.iter()
        .map(|d| {
            let path = d.as_ref().join("manifest.json");
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            Ok((d.as_ref().to_path_buf(), v))
        })
        .collect()
}

fn text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn report(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "collected pass/fail status of earlier runs");
    let runs = collect_manifests(&cfg.inputs)?;
    let mut table = Table::new(&["run", "experiment", "mode", "criterion", "check", "value", "accept", "hard", "pass"]);
    let mut md = String::from("# Run report\n\n| run | experiment | criterion | check | value | accept | status |\n|---|---|---|---|---|---|---|\n");
    let mut runs_json = Vec::new();
    for (dir, m) in &runs {
        let run = dir.display().to_string();
        let checks = m["checks"].as_array().cloned().unwrap_or_default();
        for c in &checks {
            let pass = c["pass"].as_bool().unwrap_or(false);
            let hard = c["hard"].as_bool().unwrap_or(true);
            table.push(
                [&run, &text(&m["experiment"]), &text(&m["mode"]), &text(&c["criterion"]), &text(&c["name"]), &text(&c["value"]), &text(&c["accept"]), &hard.to_string(), &pass.to_string()]
                    .iter()
                    .map(|s| csv_field(s))
                    .collect(),
            );
            let status = match (pass, hard) {
                (true, _) => "pass",
                (false, true) => "FAIL",
                (false, false) => "warn",
            };
            let _ = writeln!(
                md,
                "| {run} | {} | {} | {} | {} | {} | {status} |",
                text(&m["experiment"]),
                text(&c["criterion"]),
                text(&c["name"]),
                text(&c["value"]),
                text(&c["accept"]).replace('|', "\\|"),
            );
        }
        let passed = m["pass"].as_bool().unwrap_or(false);
        out.checks.push(CheckResult::new(None, format!("{run} passed"), f64::from(u8::from(passed)), "true", passed).soft());
        runs_json.push(json!({ "run": run, "experiment": m["experiment"], "pass": passed, "checks": checks.len() }));
    }
    out.files.push(("report.csv".into(), table.to_csv().into_bytes()));
    out.files.push(("report.md".into(), md.into_bytes()));
    out.summary = table;
    out.summary_json = json!({ "runs": runs_json });
    Ok(out)
}
