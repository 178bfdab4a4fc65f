use anyhow::{bail, Result};
use kpzlab::dimension::{box_count, cantor_indicators, synthetic_coverage};
use kpzlab::rng::derive_seed;
use serde_json::json;
use std::path::Path;

use super::exceptional::{box_check, box_table, load_records, tie_box_count};
use crate::config::ExperimentConfig;
use crate::run::{num, CheckResult, Outcome, Table};

pub const CANTOR_DIMENSION: f64 = 0.630_929_753_571_457_4;
pub const CANTOR_TOLERANCE: f64 = 0.03;
pub const SYNTHETIC_EXPONENT: f64 = 0.7;
pub const SYNTHETIC_NOISE: f64 = 0.05;
pub const COVERAGE_FLOOR: f64 = 0.9;

pub fn cantor(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "box counting recovers the dimension log 2 / log 3 of the middle-thirds Cantor set");
    let flags = cantor_indicators(cfg.depth);
    let top = cfg.depth - 1;
    let blocks: Vec<usize> = (top.saturating_sub(5).max(1)..=top).map(|j| 3usize.pow(j)).collect();
    let d = box_count(&flags, 1.0 / flags.len() as f64, &blocks)?;
    let slope = d.slope.unwrap_or(f64::NAN);
    out.checks.push(
        CheckResult::within(Some(14), "Cantor box-count exponent", slope, CANTOR_DIMENSION - CANTOR_TOLERANCE, CANTOR_DIMENSION + CANTOR_TOLERANCE)
            .detail(format!("depth {}, counts {:?}", cfg.depth, d.counts)),
    );
    out.summary = box_table(&d);
    out.plotdata.push(("cantor".into(), box_table(&d)));
    out.summary_json = json!(d);
    Ok(out)
}

pub fn synthetic(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "bootstrap intervals of log-log slopes cover the true exponent of a noisy power law");
    let rep = synthetic_coverage(SYNTHETIC_EXPONENT, SYNTHETIC_NOISE, cfg.trials, derive_seed(cfg.seed, &[0]));
    out.checks.push(
        CheckResult::new(Some(14), "synthetic slope coverage", rep.rate, format!(">= {COVERAGE_FLOOR}"), rep.rate >= COVERAGE_FLOOR)
            .detail(format!("{} of {} intervals contain {}", rep.covered, rep.trials, rep.exponent)),
    );
    let mut t = Table::new(&["exponent", "noise", "trials", "covered", "rate"]);
    t.push(vec![num(rep.exponent), num(rep.noise), rep.trials.to_string(), rep.covered.to_string(), num(rep.rate)]);
    out.summary = t;
    out.summary_json = json!(rep);
    Ok(out)
}

pub fn records(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "box-counting dimension of the near-tie sets in stored exceptional records");
    let recs = load_records(Path::new(&cfg.records))?;
    let Some(first) = recs.first() else { bail!("{} holds no records", cfg.records) };
    let k = first.k;
    let mut all = Vec::new();
    let mut summary = Table::new(&["k", "delta", "mean_count"]);
    for kk in 2..=k {
        let view = if kk == k {
            recs.clone()
        } else {
            recs.iter().map(|r| r.restrict(kk, &r.epsilons)).collect::<Result<Vec<_>, _>>()?
        };
        let d = tie_box_count(&view, cfg, cfg.tie_cells, derive_seed(cfg.seed, &[kk as u64]))?;
        out.checks.push(box_check(kk, &d, cfg.tie_cells));
        for (delta, c) in d.deltas.iter().zip(&d.counts) {
            summary.push(vec![kk.to_string(), num(*delta), num(*c)]);
        }
        out.plotdata.push((format!("box_count_k{kk}"), box_table(&d)));
        all.push(json!({ "k": kk, "estimate": d }));
    }
    out.summary = summary;
    out.summary_json = json!({ "records": recs.len(), "box_counts": all });
    Ok(out)
}
