use anyhow::Result;
use kpzlab::bessel::{
    min_after_time_law_test, near_min_event_probability, shifted_near_min_event_probability, tail_growth_test,
    IntervalTuple, NearMinEstimate, KS_TOLERANCE, MIN_LAW_HORIZON, TAIL_HORIZON,
};
use kpzlab::rng::derive_seed;
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::run::{num, CheckResult, Outcome, Table};

pub const NEAR_MIN_EPSILONS: [f64; 2] = [0.1, 0.3];
pub const NEAR_MIN_KS: [usize; 3] = [2, 3, 4];
pub const SHIFT: f64 = 0.5;
const TAIL_SAMPLES: usize = 20_000;

/// Interval families: unit intervals around the origin, and short ones hugging it.
fn families() -> [Vec<(f64, f64)>; 2] {
    [
        vec![(-2.0, -1.0), (1.0, 2.0), (3.0, 4.0), (5.0, 6.0)],
        vec![(-0.5, -0.1), (0.1, 0.5), (0.9, 1.3), (1.7, 2.1)],
    ]
}

pub fn suite(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(cfg, "Bessel-3 minimum after time t; near-minimum bounds and their shifted variant; growth of the minimum");
    let law = min_after_time_law_test(1.0, 0.0, MIN_LAW_HORIZON, cfg.samples, derive_seed(cfg.seed, &[0]))?;
    out.checks.push(
        CheckResult::at_most(Some(7), "min-after-time law KS", law.ks, KS_TOLERANCE)
            .detail(format!("{} samples, {} rejected, {} at horizon", law.samples, law.rejected, law.at_horizon)),
    );

    let mut jobs = Vec::new();
    for (f, fam) in families().iter().enumerate() {
        for &k in &NEAR_MIN_KS {
            for &eps in &NEAR_MIN_EPSILONS {
                for shifted in [false, true] {
                    jobs.push((f, IntervalTuple::new(&fam[..k])?, eps, shifted));
                }
            }
        }
    }
    let estimates: Vec<NearMinEstimate> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, (_, tuple, eps, shifted))| {
            let seed = derive_seed(cfg.seed, &[1, j as u64]);
            if *shifted {
                shifted_near_min_event_probability(tuple, *eps, SHIFT, cfg.replicas, seed)
            } else {
                near_min_event_probability(tuple, *eps, cfg.replicas, seed)
            }
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(&["family", "k", "eps", "shift", "estimate", "stderr", "grid_estimate", "bound", "pass"]);
    for ((f, tuple, eps, shifted), e) in jobs.iter().zip(&estimates) {
        let shift = if *shifted { SHIFT } else { 0.0 };
        table.push(vec![
            f.to_string(),
            tuple.k().to_string(),
            num(*eps),
            num(shift),
            num(e.estimate),
            num(e.stderr),
            num(e.grid_estimate),
            num(e.bound),
            e.pass.to_string(),
        ]);
        let what = if *shifted { "shifted near-min bound" } else { "near-min bound" };
        out.checks.push(
            CheckResult::new(
                Some(7),
                format!("{what}: family {f}, k={}, eps={eps}", tuple.k()),
                e.estimate - e.bound,
                format!("<= 3 stderr = {}", 3.0 * e.stderr),
                e.pass,
            )
            .detail(format!("estimate {} vs bound {}", e.estimate, e.bound)),
        );
    }

    let tail = tail_growth_test(TAIL_SAMPLES, TAIL_HORIZON, derive_seed(cfg.seed, &[2]))?;
    let slope = tail.fit.as_ref().map_or(f64::NAN, |f| f.slope);
    out.checks.push(
        CheckResult::new(None, "tail slope of P(inf R - x^{1/4} < -m)", slope, format!("<= {}", tail.slope_limit), tail.pass)
            .soft()
            .detail(format!("probabilities {:?}", tail.probabilities)),
    );
    let mut tt = Table::new(&["m", "probability", "stderr"]);
    for j in 0..tail.levels.len() {
        tt.push(vec![num(tail.levels[j]), num(tail.probabilities[j]), num(tail.stderrs[j])]);
    }
    out.plotdata.push(("near_min".into(), table.clone()));
    out.plotdata.push(("tail".into(), tt));
    out.summary = table;
    out.summary_json = json!({ "min_law": law, "near_min": estimates, "tail": tail });
    Ok(out)
}
