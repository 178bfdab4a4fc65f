use anyhow::{anyhow, Result};
use kpzlab::bessel::{bessel_marginal_cdf, sample_bessel};
use kpzlab::dimension::{ks_distance, mean, std_err, CdfTable};
use kpzlab::fredholm::{max_cdf, tracy_widom_gue_cdf, Wedge};
use kpzlab::landscape::{
    evaluate_fixed_point, parabola_grid, symmetry_draw, symmetry_report, FixedPointProfile, InitialCondition,
    LandscapeSample, GRID_STEP,
};
use kpzlab::poisson_lpp::{chain_index, sample_domain, Domain, LppParams, SpaceTime};
use kpzlab::rng::{derive_seed, replica_seed};
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::run::{num, par_replicas, CheckResult, Outcome, Table};

pub const ONE_POINT_KS: f64 = 0.05;
pub const PARABOLA_DRIFT: f64 = 0.15;
pub const MAX_CDF_GAP: f64 = 0.03;
pub const MAX_CDF_LEVELS: [f64; 3] = [-1.0, 0.0, 1.0];
pub const BESSEL_IC_KS: f64 = 0.05;
/// Profiles and fields written for at most this many replicas.
const KEEP: usize = 16;

fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.replicas).map(|i| replica_seed(cfg.seed, i as u64)).collect()
}

/// `F2` on `[-8, 6]` in steps of 0.02.
pub fn tracy_widom_table() -> Result<CdfTable> {
    let x: Vec<f64> = (0..=700).map(|j| -8.0 + 0.02 * j as f64).collect();
    let mut p = x.par_iter().map(|&s| tracy_widom_gue_cdf(s)).collect::<Result<Vec<f64>, _>>()?;
    // Quadrature noise near 0 and 1 can break monotonicity by ~1e-15.
    let mut top = 0.0f64;
    for v in p.iter_mut() {
        top = top.max(v.clamp(0.0, 1.0));
        *v = top;
    }
    Ok(CdfTable::new(x, p)?)
}

fn empirical_cdf(sorted: &[f64], v: f64) -> f64 {
    sorted.partition_point(|&x| x <= v) as f64 / sorted.len() as f64
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn bessel_grid(window: f64) -> Vec<f64> {
    let nb = (window / GRID_STEP).round() as i64;
    (-nb..=nb).map(|j| j as f64 * GRID_STEP).collect()
}

struct ProfileDraw {
    profile: FixedPointProfile,
    field: Vec<u8>,
}

fn profile_draw(cfg: &ExperimentConfig, p: LppParams, seed: u64, bessel: bool, ys: &[f64]) -> Result<ProfileDraw> {
    let (h0, sources) = if bessel {
        let grid = bessel_grid(cfg.window);
        let path = sample_bessel(&grid, 0.0, derive_seed(seed, &[0]))?;
        (InitialCondition::bessel(&grid, &path.values, cfg.window)?, (-cfg.window, cfg.window))
    } else {
        (InitialCondition::narrow_wedge(0.0), (0.0, 0.0))
    };
    let sample = LandscapeSample::sample(p, sources, (cfg.y_min, cfg.y_max), cfg.t, derive_seed(seed, &[1]))?;
    let profile = evaluate_fixed_point(&sample, &h0, cfg.t, ys)?;
    Ok(ProfileDraw { profile, field: sample.field().to_bytes() })
}

pub fn profile(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "fixed point as a variational formula over the landscape");
    let p = LppParams::landscape(cfg.n)?;
    let ys = cfg.ys();
    out.seeds = seeds(cfg);
    let bessel = cfg.initial == "bessel";
    let draws = par_replicas("profile", cfg.replicas, |i| profile_draw(cfg, p, out.seeds[i], bessel, &ys))?;
    let mut summary = Table::new(&["replica", "seed", "max", "argmax", "inf_argmax", "sup_argmax", "maximisers"]);
    for (i, d) in draws.iter().enumerate() {
        let pr = &d.profile;
        summary.push(vec![
            i.to_string(),
            out.seeds[i].to_string(),
            num(pr.max()),
            num(pr.ys[pr.argmax()]),
            num(pr.inf_argmax()),
            num(pr.sup_argmax()),
            pr.argmax_indices().len().to_string(),
        ]);
        if i < KEEP {
            let t = Table {
                header: vec!["t".into(), "y".into(), "value".into(), "is_argmax".into(), "source_x".into()],
                rows: pr.to_csv().lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect(),
            };
            out.plotdata.push((format!("profile_{i}"), t));
            out.files.push((format!("field_{i}.bin"), d.field.clone()));
        }
        out.checks.push(CheckResult::new(None, format!("replica {i} has a maximiser"), pr.argmax_indices().len() as f64, ">= 1", !pr.argmax_indices().is_empty()));
    }
    out.summary_json = json!({ "initial": cfg.initial, "t": cfg.t, "points": ys.len() });
    out.summary = summary;
    Ok(out)
}

pub fn tw_onepoint(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "one-point law of the landscape is Tracy-Widom GUE; parabolic shape; law of the maximum");
    let p = LppParams::landscape(cfg.n)?;
    let t = cfg.t;
    let ys = cfg.ys();
    let zero = ys.iter().position(|y| y.abs() < 1e-9).ok_or_else(|| anyhow!("the y grid must contain 0"))?;
    let targets: Vec<SpaceTime> = ys.iter().map(|&y| SpaceTime::new(y, t)).collect();
    out.seeds = seeds(cfg);
    let origin = SpaceTime::new(0.0, 0.0);
    let draws = par_replicas("tw-onepoint", cfg.replicas, |i| {
        let domain = Domain::from_point(origin, (cfg.y_min, cfg.y_max), t, p.slope)?;
        let field = sample_domain(domain, p.intensity, out.seeds[i])?;
        let idx = chain_index(&field, origin, p.slope)?;
        let vals = idx
            .max_counts_to(&targets)
            .iter()
            .zip(&ys)
            .map(|(c, y)| c.map(|c| p.length(c as f64, t)).ok_or_else(|| anyhow!("({y}, {t}) is unreachable")))
            .collect::<Result<Vec<f64>>>()?;
        let (top, _) = idx.max_count_to_segment(cfg.y_min, cfg.y_max, t);
        Ok((vals, p.length(top as f64, t)))
    })?;

    let mut header = vec!["replica".to_string(), "seed".into(), "segment_max".into()];
    header.extend(ys.iter().map(|y| format!("y={y}")));
    let mut summary = Table { header, rows: Vec::new() };
    for (i, (vals, m)) in draws.iter().enumerate() {
        let mut row = vec![i.to_string(), out.seeds[i].to_string(), num(*m)];
        row.extend(vals.iter().map(|v| num(*v)));
        summary.push(row);
    }
    out.summary = summary;

    // One-point law, rescaled to unit time.
    let scale = t.cbrt();
    let one: Vec<f64> = draws.iter().map(|d| d.0[zero] / scale).collect();
    let table = tracy_widom_table()?;
    let ks = ks_distance(&one, &table)?;
    out.checks.push(CheckResult::at_most(Some(2), "one-point KS vs F2", ks, ONE_POINT_KS));
    let one_sorted = sorted(one.clone());
    let mut cdf = Table::new(&["s", "empirical", "f2"]);
    for j in (0..table.x.len()).step_by(5) {
        let s = table.x[j];
        cdf.push(vec![num(s), num(empirical_cdf(&one_sorted, s)), num(table.p[j])]);
    }
    out.plotdata.push(("onepoint_cdf".into(), cdf));

    // Parabola.
    let mut par = Table::new(&["y", "mean", "stderr", "mean_plus_parabola"]);
    let mut shifted = Vec::new();
    for (j, &y) in ys.iter().enumerate() {
        let col: Vec<f64> = draws.iter().map(|d| d.0[j]).collect();
        let m = mean(&col);
        shifted.push(m + y * y / t);
        par.push(vec![num(y), num(m), num(std_err(&col)), num(m + y * y / t)]);
    }
    let drift = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max) - shifted.iter().copied().fold(f64::INFINITY, f64::min);
    out.checks.push(CheckResult::at_most(Some(3), "parabola-corrected mean drift", drift, PARABOLA_DRIFT));
    out.plotdata.push(("parabola".into(), par));

    // Maximum over [-1, 1] at unit time against the determinant.
    let maxima = sorted(draws.iter().map(|d| d.1).collect());
    let mut mc = Table::new(&["a", "empirical", "determinant"]);
    let unit = (t - 1.0).abs() < 1e-12 && (cfg.y_min + 1.0).abs() < 1e-12 && (cfg.y_max - 1.0).abs() < 1e-12;
    if unit {
        let levels: Vec<f64> = (0..=12).map(|j| -1.0 + 0.25 * j as f64).collect();
        let det = levels.par_iter().map(|&a| max_cdf(&[Wedge::new(0.0, 0.0)], a).map(|d| d.value)).collect::<Result<Vec<f64>, _>>()?;
        for (a, d) in levels.iter().zip(&det) {
            let e = empirical_cdf(&maxima, *a);
            mc.push(vec![num(*a), num(e), num(*d)]);
            if MAX_CDF_LEVELS.contains(a) {
                let gap = (e - d).abs();
                out.checks.push(
                    CheckResult::at_most(Some(5), format!("max-cdf gap at a={a}"), gap, MAX_CDF_GAP)
                        .detail(format!("empirical {e}, determinant {d}")),
                );
            }
        }
        out.plotdata.push(("max_cdf".into(), mc));
    }

    out.summary_json = json!({
        "n": cfg.n,
        "replicas": cfg.replicas,
        "one_point": { "ks": ks, "mean": mean(&one), "stderr": std_err(&one) },
        "parabola": { "ys": ys, "mean_plus_parabola": shifted, "drift": drift },
    });
    Ok(out)
}

pub fn bessel_ic(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "two-sided Bessel initial data is stationary for the recentred fixed point");
    let p = LppParams::landscape(cfg.n)?;
    let ys = cfg.ys();
    let mut lags: Vec<f64> = cfg.profile_lags.iter().map(|x| -x).collect();
    lags.reverse();
    lags.extend(cfg.profile_lags.iter().copied());
    out.seeds = seeds(cfg);
    let draws = par_replicas("bessel-ic", cfg.replicas, |i| {
        let d = profile_draw(cfg, p, out.seeds[i], true, &ys)?;
        let pr = d.profile;
        Ok((pr.ys[pr.argmax()], pr.max(), pr.drops_from_argmax(&lags)))
    })?;
    let mut header = vec!["replica".to_string(), "seed".into(), "argmax".into(), "max".into()];
    header.extend(lags.iter().map(|l| format!("drop_{l}")));
    let mut summary = Table { header, rows: Vec::new() };
    for (i, (y, m, drops)) in draws.iter().enumerate() {
        let mut row = vec![i.to_string(), out.seeds[i].to_string(), num(*y), num(*m)];
        row.extend(drops.iter().map(|d| d.map_or_else(String::new, num)));
        summary.push(row);
    }
    out.summary = summary;
    let mut per_lag = Vec::new();
    for &x in &cfg.profile_lags {
        let cols: Vec<usize> = lags.iter().enumerate().filter(|(_, l)| (l.abs() - x).abs() < 1e-12).map(|(j, _)| j).collect();
        let drops: Vec<f64> = draws.iter().flat_map(|d| cols.iter().filter_map(|&j| d.2[j])).collect();
        let ks = kpzlab::dimension::ks_distance_fn(&drops, |v| bessel_marginal_cdf(x, v));
        out.checks.push(
            CheckResult::at_most(Some(13), format!("recentred drop KS at lag {x}"), ks, BESSEL_IC_KS)
                .detail(format!("{} drops pooled over both sides", drops.len())),
        );
        let s = sorted(drops.clone());
        let mut t = Table::new(&["r", "empirical", "bessel"]);
        let top = 4.0 * (2.0 * x).sqrt();
        for j in 0..=80 {
            let r = top * j as f64 / 80.0;
            t.push(vec![num(r), num(empirical_cdf(&s, r)), num(bessel_marginal_cdf(x, r))]);
        }
        out.plotdata.push((format!("bessel_ic_lag_{x}"), t));
        per_lag.push(json!({ "lag": x, "ks": ks, "drops": drops.len(), "mean": mean(&drops) }));
    }
    out.summary_json = json!({ "n": cfg.n, "window": cfg.window, "lags": per_lag });
    Ok(out)
}

pub fn symmetry(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "landscape symmetries: spatial stationarity, 1:2:3 scale invariance, parabolic shape");
    let p = LppParams::landscape(cfg.n)?;
    out.seeds = seeds(cfg);
    let draws = par_replicas("symmetry", cfg.replicas, |i| Ok(symmetry_draw(p, out.seeds[i])?))?;
    let report = symmetry_report(cfg.n, cfg.seed, &draws)?;
    let mut summary = Table::new(&["check", "statistic", "tolerance", "pass"]);
    for c in &report.checks {
        summary.push(vec![c.name.clone(), num(c.statistic), num(c.tolerance), c.pass.to_string()]);
        out.checks.push(CheckResult::at_most(None, c.name.clone(), c.statistic, c.tolerance));
    }
    let mut par = Table::new(&["y", "mean_plus_y2"]);
    for (y, m) in parabola_grid().iter().zip(&report.parabola_means) {
        par.push(vec![num(*y), num(*m)]);
    }
    out.plotdata.push(("parabola".into(), par));
    out.summary = summary;
    out.summary_json = serde_json::to_value(&report)?;
    Ok(out)
}
