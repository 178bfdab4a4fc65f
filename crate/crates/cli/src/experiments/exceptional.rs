use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use kpzlab::dimension::{box_count_replicas, quantile, DimensionEstimate, DEFAULT_RESAMPLES};
use kpzlab::exceptional::{
    anticoncentration_floor, calibrate_alpha, compare_couplings, default_epsilons, energy_integral, first_moment_scaling,
    increment_scaling, lattice_epsilon, nearest_lattice_ladder, record_times, run_replica, two_point_scaling, Coupling,
    ExceptionalConfig, ExceptionalRecord, MomentEstimate, RECORD_CELLS,
};
use kpzlab::rng::derive_seed;
use serde_json::json;

use crate::config::{coupling_name, AlphaRule, ExperimentConfig};
use crate::run::{num, par_replicas, CheckResult, Outcome, Table};

/// Box-count exponent windows for `k = 2` and `k = 3`.
pub const BOX_COUNT_ACCEPT: [(f64, f64); 2] = [(0.50, 0.85), (0.15, 0.55)];
pub const ALPHA_GRID_TOLERANCE: f64 = 0.1;

const RECORDS_MAGIC: &[u8; 8] = b"KPZXSET1";

/// Concatenated records: magic, count, then length-prefixed [`ExceptionalRecord::to_bytes`].
pub fn write_records(records: &[ExceptionalRecord]) -> Vec<u8> {
    let mut out = RECORDS_MAGIC.to_vec();
    out.extend((records.len() as u64).to_le_bytes());
    for r in records {
        let b = r.to_bytes();
        out.extend((b.len() as u64).to_le_bytes());
        out.extend(b);
    }
    out
}

pub fn read_records(bytes: &[u8]) -> Result<Vec<ExceptionalRecord>> {
    let word = |at: usize| -> Result<u64> {
        let b = bytes.get(at..at + 8).context("truncated records file")?;
        Ok(u64::from_le_bytes(b.try_into()?))
    };
    if bytes.get(..8) != Some(RECORDS_MAGIC.as_slice()) {
        bail!("not a records file");
    }
    let count = word(8)? as usize;
    let mut at = 16;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let len = word(at)? as usize;
        at += 8;
        let chunk = bytes.get(at..at + len).with_context(|| format!("record {i} truncated"))?;
        out.push(ExceptionalRecord::from_bytes(chunk).with_context(|| format!("record {i}"))?);
        at += len;
    }
    if at != bytes.len() {
        bail!("{} trailing bytes after {count} records", bytes.len() - at);
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<Vec<ExceptionalRecord>> {
    read_records(&fs::read(path).with_context(|| format!("reading {}", path.display()))?)
}

fn blocks(cfg: &ExperimentConfig) -> Vec<usize> {
    cfg.deltas.iter().map(|d| (d / cfg.dt).round() as usize).collect()
}

/// Box count of `{t : spread_k(t) <= tie_cells / chi}` over replicas.
pub(crate) fn tie_box_count(records: &[ExceptionalRecord], cfg: &ExperimentConfig, cells: u32, seed: u64) -> Result<DimensionEstimate> {
    let sets: Vec<Vec<bool>> = records.iter().map(|r| r.tie_indicators(cells as f64 / r.chi)).collect();
    Ok(box_count_replicas(&sets, cfg.dt, &blocks(cfg), DEFAULT_RESAMPLES, seed)?)
}

pub(crate) fn box_table(d: &DimensionEstimate) -> Table {
    let mut t = Table::new(&["delta", "mean_count", "log_inv_delta", "log_count"]);
    for (delta, c) in d.deltas.iter().zip(&d.counts) {
        t.push(vec![num(*delta), num(*c), num(-delta.ln()), num(c.ln())]);
    }
    t
}

pub(crate) fn box_check(k: usize, d: &DimensionEstimate, cells: u32) -> CheckResult {
    let (lo, hi) = BOX_COUNT_ACCEPT[k - 2];
    let slope = d.slope.unwrap_or(f64::NAN);
    CheckResult::within(Some(11), format!("box-count exponent k={k}"), slope, lo, hi)
        .detail(format!("spread <= {cells} lattice units; bootstrap interval {:?}; counts {:?}", d.ci, d.counts))
}

fn moment_table(m: &MomentEstimate, param: &str) -> Table {
    let mut t = Table::new(&[param, "estimate", "stderr"]);
    for j in 0..m.parameters.len() {
        t.push(vec![num(m.parameters[j]), num(m.estimates[j]), num(m.stderrs[j])]);
    }
    t
}

fn slope_of(m: &MomentEstimate) -> f64 {
    m.fit.as_ref().map_or(f64::NAN, |f| f.slope)
}

fn slope_detail(m: &MomentEstimate) -> String {
    let ci = m.fit.as_ref().map(|f| f.ci);
    format!("estimates {:?}; interval {ci:?}; {}", m.estimates, m.note)
}

fn replicas(cfg: &ExperimentConfig, ec: &ExceptionalConfig, label: &str, tag: u64, n: usize) -> Result<Vec<ExceptionalRecord>> {
    par_replicas(label, n, |i| Ok(run_replica(ec, derive_seed(cfg.seed, &[tag, i as u64]))?))
}

/// Energy ladder: each target `eps` moved to the nearest lattice-matched value.
fn energy_ladder(k: usize, targets: &[f64], chi: f64) -> Vec<f64> {
    let l = nearest_lattice_ladder(k, targets, chi);
    if l.len() >= 2 {
        l
    } else {
        (0..3).map(|j| lattice_epsilon(k, j, chi)).collect()
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(
        cfg,
        "k-wise near ties of wedge maxima: first and second moments, energy, Hölder regularity and box-counting dimension",
    );
    let mut ec = ExceptionalConfig::new(cfg.k, cfg.n)?;
    ec.window = cfg.window;
    ec.epsilons = cfg.epsilons.clone();
    ec.coupling = cfg.coupling;
    let chi = kpzlab::poisson_lpp::LppParams::landscape(cfg.n)?.scale;

    let (alpha, pilot_alpha_coarse) = match cfg.alpha_rule {
        AlphaRule::Fixed(a) => (a, None),
        AlphaRule::Quantile(q) => {
            let pilot = replicas(cfg, &ec, "pilot", 1, cfg.pilot_replicas)?;
            let a = calibrate_alpha(&pilot, q)?;
            let coarse: Vec<f64> = pilot.iter().map(|r| r.coarse_thinning_levels(2)).collect::<Result<Vec<_>, _>>()?.concat();
            (a, Some(quantile(&coarse, q)))
        }
    };
    ec.alpha = alpha;
    let records = replicas(cfg, &ec, "replicas", 0, cfg.replicas)?;
    out.seeds = (0..cfg.replicas).map(|i| derive_seed(cfg.seed, &[0, i as u64])).collect();
    let p_b = records.iter().map(|r| r.thinned.iter().filter(|&&b| b).count()).sum::<usize>() as f64
        / (records.len() * RECORD_CELLS) as f64;

    let mut json_moments = Vec::new();
    let mut json_boxes = Vec::new();
    let mut json_floors = Vec::new();
    let mut by_k = Vec::new();
    for kk in 2..=cfg.k {
        let eps = if kk == cfg.k { cfg.epsilons.clone() } else { default_epsilons(kk, chi) };
        let recs: Vec<ExceptionalRecord> = if kk == cfg.k {
            records.clone()
        } else {
            records.iter().map(|r| r.restrict(kk, &eps)).collect::<Result<_, _>>()?
        };
        let fm = first_moment_scaling(&recs, kk, &eps, derive_seed(cfg.seed, &[2, kk as u64]))?;
        out.checks.push(
            CheckResult::within(Some(8), format!("first-moment slope k={kk}"), slope_of(&fm), fm.accept.0, fm.accept.1)
                .detail(slope_detail(&fm)),
        );
        out.plotdata.push((format!("first_moment_k{kk}"), moment_table(&fm, "eps")));

        let d = tie_box_count(&recs, cfg, cfg.tie_cells, derive_seed(cfg.seed, &[3, kk as u64]))?;
        out.checks.push(box_check(kk, &d, cfg.tie_cells));
        out.plotdata.push((format!("box_count_k{kk}"), box_table(&d)));
        let exact = tie_box_count(&recs, cfg, 0, derive_seed(cfg.seed, &[4, kk as u64]))?;
        let (lo, hi) = BOX_COUNT_ACCEPT[kk - 2];
        out.checks.push(
            CheckResult::within(None, format!("box-count exponent k={kk}, exact ties"), exact.slope.unwrap_or(f64::NAN), lo, hi)
                .soft()
                .detail(format!("interval {:?}; counts {:?}", exact.ci, exact.counts)),
        );
        out.plotdata.push((format!("box_count_exact_k{kk}"), box_table(&exact)));

        for e in [eps[1], eps[eps.len() / 2]] {
            let f = anticoncentration_floor(&recs, e)?;
            out.checks.push(
                CheckResult::new(None, format!("near-tie floor k={kk}, eps={e}"), f.probability, format!(">= {}", f.floor), f.pass)
                    .detail(format!("scale b = {}", f.scale)),
            );
            json_floors.push(f);
        }
        json_moments.push(json!(fm));
        json_boxes.push(json!({ "k": kk, "cells": cfg.tie_cells, "estimate": d, "exact_ties": exact }));
        by_k.push((kk, eps, recs));
    }

    let (_, eps2, recs2) = &by_k[0];
    let tp = two_point_scaling(recs2, 2, cfg.two_point_epsilon, &cfg.lags, derive_seed(cfg.seed, &[5]))?;
    out.checks.push(
        CheckResult::new(Some(9), "two-point slope k=2", slope_of(&tp), format!("[{}, {}] and under the bound", tp.accept.0, tp.accept.1), tp.pass)
            .detail(slope_detail(&tp)),
    );
    out.plotdata.push(("two_point".into(), moment_table(&tp, "lag")));
    json_moments.push(json!(tp));

    let ladder = energy_ladder(2, &cfg.energy_epsilons, chi);
    let wide: Vec<f64> = [0u32, 1, 3].iter().map(|&j| lattice_epsilon(2, j, chi)).collect();
    for &g in &cfg.gammas {
        let en = energy_integral(recs2, 2, g, &ladder)?;
        let rule = if g < 2.0 / 3.0 { "variation < 0.5" } else { "increasing as eps shrinks" };
        out.checks.push(
            CheckResult::new(Some(12), format!("energy gamma={g}"), en.estimates.last().copied().unwrap_or(f64::NAN), rule, en.pass)
                .detail(format!("eps {:?}; energies {:?}; {}", en.parameters, en.estimates, en.note)),
        );
        let wd = energy_integral(recs2, 2, g, &wide)?;
        out.checks.push(
            CheckResult::new(None, format!("energy gamma={g}, wide ladder"), wd.estimates.last().copied().unwrap_or(f64::NAN), rule, wd.pass)
                .soft()
                .detail(format!("eps {:?}; energies {:?}; {}", wd.parameters, wd.estimates, wd.note)),
        );
        out.plotdata.push((format!("energy_gamma_{g}"), moment_table(&en, "eps")));
        json_moments.push(json!(en));
        json_moments.push(json!(wd));
    }

    let hol = increment_scaling(&records, &cfg.holder_lags, derive_seed(cfg.seed, &[6]))?;
    out.checks.push(
        CheckResult::within(Some(10), "increment slope", slope_of(&hol), hol.accept.0, hol.accept.1).detail(slope_detail(&hol)),
    );
    out.plotdata.push(("increments".into(), moment_table(&hol, "lag")));
    json_moments.push(json!(hol));

    if let Some(coarse) = pilot_alpha_coarse {
        let rel = (coarse / alpha - 1.0).abs();
        out.checks.push(
            CheckResult::at_most(None, "alpha change under grid halving", rel, ALPHA_GRID_TOLERANCE)
                .soft()
                .detail(format!("alpha {alpha}, coarse {coarse}")),
        );
    }

    let mut coupling_json = serde_json::Value::Null;
    if cfg.coupling_replicas > 0 && cfg.coupling == Coupling::Independent {
        let mut sc = ec.clone();
        sc.coupling = Coupling::SharedStrip;
        let n = cfg.coupling_replicas.min(records.len());
        let shared = replicas(cfg, &sc, "shared-strip", 7, n)?;
        let cmp = compare_couplings(&records[..n], &shared, eps2[1])?;
        out.checks.push(
            CheckResult::new(None, "independent vs shared-strip near-tie frequency", cmp.shared.0 - cmp.independent.0, "within 2 stderr", cmp.equivalent)
                .soft()
                .detail(format!("independent {:?}, shared {:?}", cmp.independent, cmp.shared)),
        );
        coupling_json = json!(cmp);
    }

    let mut summary = Table::new(&["k", "t", "eps", "fraction_a", "fraction_ab"]);
    for (kk, eps, recs) in &by_k {
        for &e in eps {
            let mut a = vec![0usize; RECORD_CELLS];
            let mut ab = vec![0usize; RECORD_CELLS];
            for r in recs {
                for (j, (x, y)) in r.tie_indicators(e).into_iter().zip(r.tie_and_thinned(e)).enumerate() {
                    a[j] += x as usize;
                    ab[j] += y as usize;
                }
            }
            let n = recs.len() as f64;
            for (j, t) in record_times().into_iter().enumerate() {
                summary.push(vec![kk.to_string(), num(t), num(e), num(a[j] as f64 / n), num(ab[j] as f64 / n)]);
            }
        }
    }
    out.summary = summary;
    out.summary_json = json!({
        "k": cfg.k,
        "n": cfg.n,
        "chi": chi,
        "coupling": coupling_name(cfg.coupling),
        "alpha": alpha,
        "alpha_grid_halving": pilot_alpha_coarse,
        "p_thinned": p_b,
        "energy_ladder": ladder,
        "moments": json_moments,
        "box_counts": json_boxes,
        "floors": json_floors,
        "coupling_comparison": coupling_json,
    });
    let bytes = write_records(&records);
    if cfg.records.is_empty() {
        out.files.push(("records.bin".into(), bytes));
    } else {
        fs::write(&cfg.records, bytes).with_context(|| format!("writing {}", cfg.records))?;
    }
    Ok(out)
}
