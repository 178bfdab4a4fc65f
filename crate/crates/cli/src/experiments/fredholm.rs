use anyhow::Result;
use kpzlab::fredholm::{max_cdf as max_cdf_det, point_cdf, tail_bound, tracy_widom_gue, Determinant, Wedge, LADDER_TOLERANCE};
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::run::{num, CheckResult, Outcome, Table};

pub const ROUTE_TOLERANCE: f64 = 1e-4;
pub const ROUTE_POINTS: [f64; 3] = [-2.0, 0.0, 2.0];

fn ladder_check(name: &str, dets: &[Determinant]) -> CheckResult {
    let worst = dets.iter().filter(|d| d.nodes > 0).map(|d| d.change).fold(0.0, f64::max);
    CheckResult::new(Some(4), name, worst, format!("< {LADDER_TOLERANCE}"), worst < LADDER_TOLERANCE)
}

pub fn tw_table(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "Tracy-Widom GUE as the Airy-kernel determinant and as the hypo/epi composition");
    let s = cfg.levels.points();
    let dets = s.par_iter().map(|&v| tracy_widom_gue(v)).collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&["s", "f2", "nodes", "change"]);
    for (v, d) in s.iter().zip(&dets) {
        table.push(vec![num(*v), num(d.value), d.nodes.to_string(), num(d.change)]);
    }
    let mut routes = Table::new(&["s", "airy_kernel", "hypo_epi", "difference"]);
    let mut all = dets.clone();
    let mut diffs = Vec::new();
    for &v in &ROUTE_POINTS {
        let a = tracy_widom_gue(v)?;
        let b = point_cdf(&[Wedge::new(0.0, 0.0)], 0.0, v)?;
        let diff = (a.value - b.value).abs();
        routes.push(vec![num(v), num(a.value), num(b.value), num(diff)]);
        out.checks.push(
            CheckResult::at_most(Some(4), format!("route agreement at s={v}"), diff, ROUTE_TOLERANCE)
                .detail(format!("airy {}, hypo/epi {}", a.value, b.value)),
        );
        all.extend([a, b]);
        diffs.push(diff);
    }
    out.checks.insert(0, ladder_check("max node-doubling change", &all));
    out.plotdata.push(("tracy_widom".into(), table.clone()));
    out.plotdata.push(("routes".into(), routes));
    out.summary = table;
    out.summary_json = json!({ "points": s.len(), "route_differences": diffs });
    Ok(out)
}

pub fn max_cdf(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "law of the maximum over [-1, 1] of the fixed point from wedge data; its regularity");
    let h0: Vec<Wedge> = cfg.wedges.iter().map(|&x| Wedge::new(x, 0.0)).collect();
    let h = cfg.levels.step;
    let inner = cfg.levels.points();
    let mut a = vec![inner[0] - h];
    a.extend(inner.iter().copied());
    a.push(inner[inner.len() - 1] + h);
    let dets = a.par_iter().map(|&v| max_cdf_det(&h0, v)).collect::<Result<Vec<_>, _>>()?;
    let bounds = a.par_iter().map(|&v| tail_bound(&h0, v)).collect::<Result<Vec<_>, _>>()?;
    let f: Vec<f64> = dets.iter().map(|d| d.value).collect();
    let mut table = Table::new(&["a", "f_max", "nodes", "change", "density", "upper_bound"]);
    let mut min_density = f64::INFINITY;
    let mut finite = true;
    for j in 1..a.len() - 1 {
        let dens = (f[j + 1] - f[j - 1]) / (2.0 * h);
        min_density = min_density.min(dens);
        finite &= dens.is_finite();
        table.push(vec![num(a[j]), num(f[j]), dets[j].nodes.to_string(), num(dets[j].change), num(dens), num(bounds[j])]);
    }
    let worst_step = f.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    out.checks.push(
        CheckResult::new(Some(6), "smallest increment of F_M", worst_step, format!(">= -{LADDER_TOLERANCE}"), worst_step >= -LADDER_TOLERANCE)
            .detail("monotone up to determinant accuracy"),
    );
    out.checks.push(CheckResult::new(Some(6), "smallest finite-difference density", min_density, "> 0 and finite", min_density > 0.0 && finite));
    out.checks.push(ladder_check("max node-doubling change", &dets));
    let above = f.iter().zip(&bounds).map(|(v, b)| v - b).fold(f64::NEG_INFINITY, f64::max);
    out.checks.push(CheckResult::at_most(None, "excess over min_i F2(a - h_i)", above, LADDER_TOLERANCE));
    out.plotdata.push(("max_cdf".into(), table.clone()));
    out.summary = table;
    out.summary_json = json!({ "wedges": cfg.wedges, "levels": inner.len(), "min_density": min_density });
    Ok(out)
}
