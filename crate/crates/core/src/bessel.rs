//! Bessel-3 paths with quadratic variation 2 per unit length, and Monte
//! Carlo checks of their extrema laws.
//!
//! Paths are norms of 3-dimensional Brownian motions whose coordinates have
//! variance `2x`. Values on a grid are exact; minima between grid points are
//! either ignored (which undercounts small values) or replaced by a Brownian
//! bridge crossing of the tangent half-space at level `eps` (which overcounts,
//! since the ball lies inside the half-space). Reported event probabilities
//! use the overcounting version so one-sided bounds are tested conservatively.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dimension::{ks_distance_fn, loglog_slope, standard_normal, SlopeFit, StatsError};
use crate::fredholm::normal_cdf;
use crate::rng::{derive_seed, replica_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BesselError {
    #[error("start value must be finite and nonnegative, got {0}")]
    NegativeStart(f64),
    #[error("grid must be finite and increasing")]
    BadGrid,
    #[error("intervals must be closed, ordered and disjoint")]
    BadIntervals,
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("time must be nonnegative, got {0}")]
    BadTime(f64),
    #[error("horizon too short: minimum attained at the horizon in {fraction} of samples")]
    HorizonTooShort { fraction: f64 },
    #[error("need at least one sample")]
    NoSamples,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = core::result::Result<T, BesselError>;

/// Quadratic variation of each coordinate per unit length.
pub const QUADRATIC_VARIATION: f64 = 2.0;
pub const KS_TOLERANCE: f64 = 0.02;
pub const MIN_LAW_HORIZON: f64 = 400.0;
/// Adaptive step as a fraction of `R^2`.
const MIN_LAW_STEP: f64 = 1e-3;
const TAIL_STEP: f64 = 1e-2;
pub const TAIL_LEVELS: [f64; 4] = [2.0, 4.0, 8.0, 16.0];
pub const TAIL_HORIZON: f64 = 1e8;
/// Largest slope of `log P(X0 < -m)` against `log m` consistent with the `m^{-1/4}` bound.
pub const TAIL_SLOPE_LIMIT: f64 = -0.25 + 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub start: f64,
    pub seed: u64,
    pub quadratic_variation: f64,
}

impl BesselPath {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,R\n");
        for (x, r) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(s, "{x},{r}");
        }
        s
    }
}

type Vec3 = [f64; 3];

fn norm(p: &Vec3) -> f64 {
    Float::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
}

fn step(p: &mut Vec3, dx: f64, rng: &mut ChaCha8Rng) {
    let sd = Float::sqrt(QUADRATIC_VARIATION * dx);
    for c in p.iter_mut() {
        *c += sd * standard_normal(rng);
    }
}

/// `R` at each grid point. Nonnegative and nonpositive grid points come from
/// independent one-sided paths, both started at `(a, 0, 0)`.
pub fn sample_bessel(grid: &[f64], a: f64, seed: u64) -> Result<BesselPath> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(BesselError::NegativeStart(a));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(BesselError::BadGrid);
    }
    let mut values = alloc::vec![0.0; grid.len()];
    let split = grid.partition_point(|&x| x < 0.0);
    for (side, idx) in [(0u64, (split..grid.len()).collect::<Vec<_>>()), (1, (0..split).rev().collect())] {
        let mut rng = rng_from_seed(derive_seed(seed, &[side]));
        let mut p = [a, 0.0, 0.0];
        let mut at = 0.0;
        for j in idx {
            let d = grid[j].abs();
            if d > at {
                step(&mut p, d - at, &mut rng);
                at = d;
            }
            values[j] = norm(&p);
        }
    }
    Ok(BesselPath { grid: grid.to_vec(), values, start: a, seed, quadratic_variation: QUADRATIC_VARIATION })
}

/// `P(R(x) <= r)` for `R` started at 0: `R(x) / sqrt(2x)` has the chi law with 3 degrees of freedom.
pub fn bessel_marginal_cdf(x: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return 1.0;
    }
    let z = r / Float::sqrt(QUADRATIC_VARIATION * x.abs());
    let phi = Float::exp(-0.5 * z * z) / Float::sqrt(2.0 * core::f64::consts::PI);
    (2.0 * normal_cdf(z) - 1.0 - 2.0 * z * phi).clamp(0.0, 1.0)
}

/// Minimum of a Brownian bridge with quadratic variation 2 per unit length
/// from `r1` to `r2` over `dx`.
fn bridge_min(r1: f64, r2: f64, dx: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    0.5 * (r1 + r2 - Float::sqrt((r1 - r2) * (r1 - r2) - 2.0 * QUADRATIC_VARIATION * dx * Float::ln(u)))
}

/// Whether the bridge from `p1` to `p2` over `dx` crosses the half-space
/// tangent to the `eps`-ball, which it must do to enter the ball.
fn crosses_ball(p1: &Vec3, p2: &Vec3, eps: f64, dx: f64, rng: &mut ChaCha8Rng) -> bool {
    let mid = [p1[0] + p2[0], p1[1] + p2[1], p1[2] + p2[2]];
    let m = norm(&mid);
    if m == 0.0 {
        return true;
    }
    let d1 = (p1[0] * mid[0] + p1[1] * mid[1] + p1[2] * mid[2]) / m - eps;
    let d2 = (p2[0] * mid[0] + p2[1] * mid[1] + p2[2] * mid[2]) / m - eps;
    if d1 <= 0.0 || d2 <= 0.0 {
        return true;
    }
    rng.random::<f64>() < Float::exp(-2.0 * d1 * d2 / (QUADRATIC_VARIATION * dx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinLawReport {
    pub t: f64,
    pub start: f64,
    pub horizon: f64,
    pub samples: usize,
    /// Samples with `R(t) = 0`, for which the ratio is undefined.
    pub rejected: usize,
    /// Samples whose running minimum was set in the final step.
    pub at_horizon: usize,
    pub ks: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
}

/// `min_{[t, H]} R / R(t)` for one path, and whether the minimum was set in the last step.
fn min_ratio(t: f64, a: f64, horizon: f64, rng: &mut ChaCha8Rng) -> (Option<f64>, bool) {
    let mut p = [a, 0.0, 0.0];
    if t > 0.0 {
        step(&mut p, t, rng);
    }
    let r0 = norm(&p);
    if r0 == 0.0 {
        return (None, false);
    }
    let mut x = t;
    let mut r = r0;
    let mut low = r0;
    let mut last = false;
    while x < horizon {
        let dx = (MIN_LAW_STEP * r * r).clamp(1e-12, horizon - x);
        step(&mut p, dx, rng);
        let r2 = norm(&p);
        let m = bridge_min(r, r2, dx, rng);
        last = m < low && x + dx >= horizon;
        low = low.min(m);
        x += dx;
        r = r2;
    }
    (Some(low.max(0.0) / r0), last)
}

/// KS distance of `min_{x >= t} R(x) / R(t)` from the uniform law on `[0, 1]`.
pub fn min_after_time_law_test(t: f64, start: f64, horizon: f64, samples: usize, seed: u64) -> Result<MinLawReport> {
    if !(t >= 0.0) {
        return Err(BesselError::BadTime(t));
    }
    if !(start >= 0.0) {
        return Err(BesselError::NegativeStart(start));
    }
    if samples == 0 {
        return Err(BesselError::NoSamples);
    }
    let mut ratios = Vec::with_capacity(samples);
    let (mut rejected, mut at_horizon) = (0, 0);
    for i in 0..samples {
        let mut rng = rng_from_seed(replica_seed(seed, i as u64));
        match min_ratio(t, start, horizon.max(t), &mut rng) {
            (None, _) => rejected += 1,
            (Some(v), last) => {
                ratios.push(v);
                at_horizon += last as usize;
            }
        }
    }
    if at_horizon as f64 > 0.01 * samples as f64 {
        return Err(BesselError::HorizonTooShort { fraction: at_horizon as f64 / samples as f64 });
    }
    let ks = if ratios.is_empty() { 1.0 } else { ks_distance_fn(&ratios, |u| u.clamp(0.0, 1.0)) };
    Ok(MinLawReport {
        t,
        start,
        horizon,
        samples,
        rejected,
        at_horizon,
        ks,
        tolerance: KS_TOLERANCE,
        pass: !ratios.is_empty() && ks <= KS_TOLERANCE,
        seed,
    })
}

/// Ordered disjoint closed intervals `I_1, ..., I_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTuple {
    intervals: Vec<(f64, f64)>,
}

impl IntervalTuple {
    pub fn new(intervals: &[(f64, f64)]) -> Result<Self> {
        let ok = !intervals.is_empty()
            && intervals.iter().all(|&(a, b)| a.is_finite() && b.is_finite() && a <= b)
            && intervals.windows(2).all(|w| w[0].1 < w[1].0);
        if !ok {
            return Err(BesselError::BadIntervals);
        }
        Ok(Self { intervals: intervals.to_vec() })
    }

    pub fn k(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// `m_I = min_i a_i - b_{i-1}`; infinite for a single interval.
    pub fn gap(&self) -> f64 {
        self.intervals.windows(2).map(|w| w[1].0 - w[0].1).fold(f64::INFINITY, f64::min)
    }
}

/// `(eps / sqrt(m_I))^{k-1}`.
pub fn near_min_bound(eps: f64, tuple: &IntervalTuple) -> f64 {
    if tuple.k() == 1 {
        return 1.0;
    }
    Float::powi(eps / Float::sqrt(tuple.gap()), tuple.k() as i32 - 1)
}

/// `(8b/m_I + 2) (eps sqrt(2/m_I))^{k-1}`.
pub fn shifted_near_min_bound(eps: f64, b: f64, tuple: &IntervalTuple) -> f64 {
    if tuple.k() == 1 {
        return 1.0;
    }
    let m = tuple.gap();
    (8.0 * b / m + 2.0) * Float::powi(eps * Float::sqrt(2.0 / m), tuple.k() as i32 - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearMinEstimate {
    pub intervals: Vec<(f64, f64)>,
    pub epsilon: f64,
    /// Half-width of the shift range for the shifted variant.
    pub shift: Option<f64>,
    pub samples: usize,
    /// Overcounting estimate (grid plus bridge crossings).
    pub estimate: f64,
    pub stderr: f64,
    /// Undercounting estimate from grid values alone.
    pub grid_estimate: f64,
    pub step: f64,
    pub bound: f64,
    pub pass: bool,
    pub seed: u64,
}

fn default_step(eps: f64) -> f64 {
    (eps * eps / 20.0).min(1e-3)
}

/// Path on the grid `j * h` for `j` in `[lo, hi]` (in steps), two-sided from 0.
fn grid_path(lo: i64, hi: i64, h: f64, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut pts = alloc::vec![[0.0; 3]; (hi - lo + 1) as usize];
    for (dir, range) in [(1i64, hi.max(0)), (-1, (-lo).max(0))] {
        let mut p = [0.0; 3];
        for s in 1..=range {
            step(&mut p, h, rng);
            let j = dir * s;
            if j >= lo && j <= hi {
                pts[(j - lo) as usize] = p;
            }
        }
    }
    pts
}

/// Cells `[j, j+1]` (by left index) in which the path may enter the `eps`-ball,
/// and grid points at which it is inside.
fn hits(path: &[Vec3], eps: f64, h: f64, rng: &mut ChaCha8Rng) -> (Vec<bool>, Vec<bool>) {
    let inside: Vec<bool> = path.iter().map(|p| norm(p) <= eps).collect();
    let cells = (0..path.len().saturating_sub(1))
        .map(|j| inside[j] || inside[j + 1] || crosses_ball(&path[j], &path[j + 1], eps, h, rng))
        .collect();
    (cells, inside)
}

/// Monte Carlo estimate of `P(min_{I_i} R <= eps for all i)` for `R` two-sided from 0.
pub fn near_min_event_probability(tuple: &IntervalTuple, eps: f64, samples: usize, seed: u64) -> Result<NearMinEstimate> {
    near_min_impl(tuple, eps, None, samples, seed)
}

/// As [`near_min_event_probability`] for the union over shifts `x` in `[-b, b]`
/// of the event for `I + x`.
pub fn shifted_near_min_event_probability(
    tuple: &IntervalTuple,
    eps: f64,
    b: f64,
    samples: usize,
    seed: u64,
) -> Result<NearMinEstimate> {
    if !(b >= 0.0) {
        return Err(BesselError::BadIntervals);
    }
    near_min_impl(tuple, eps, Some(b), samples, seed)
}

fn near_min_impl(tuple: &IntervalTuple, eps: f64, shift: Option<f64>, samples: usize, seed: u64) -> Result<NearMinEstimate> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(BesselError::BadEpsilon(eps));
    }
    if samples == 0 {
        return Err(BesselError::NoSamples);
    }
    let h = default_step(eps);
    let b = shift.unwrap_or(0.0);
    let ivs = tuple.intervals();
    let lo = Float::floor((ivs[0].0 - b) / h) as i64;
    let hi = Float::ceil((ivs[ivs.len() - 1].1 + b) / h) as i64;
    let (mut upper, mut lower) = (0usize, 0usize);
    for i in 0..samples {
        let mut rng = rng_from_seed(replica_seed(seed, i as u64));
        let path = grid_path(lo, hi, h, &mut rng);
        let (cells, inside) = hits(&path, eps, h, &mut rng);
        let x = |j: usize| (lo + j as i64) as f64 * h;
        let (u, l) = match shift {
            None => {
                let within = |flags: &[bool], a: f64, bb: f64, widen: usize| {
                    flags.iter().enumerate().any(|(j, &f)| f && x(j + widen) >= a && x(j) <= bb)
                };
                (
                    ivs.iter().all(|&(a, bb)| within(&cells, a, bb, 1)),
                    ivs.iter().all(|&(a, bb)| within(&inside, a, bb, 0)),
                )
            }
            Some(b) => {
                let zc: Vec<(f64, f64)> = (0..cells.len()).filter(|&j| cells[j]).map(|j| (x(j), x(j + 1))).collect();
                let zp: Vec<(f64, f64)> = (0..inside.len()).filter(|&j| inside[j]).map(|j| (x(j), x(j))).collect();
                (shift_hit(&zc, ivs, b), shift_hit(&zp, ivs, b))
            }
        };
        upper += u as usize;
        lower += l as usize;
    }
    let n = samples as f64;
    let p = upper as f64 / n;
    let stderr = Float::sqrt(p * (1.0 - p) / n);
    let bound = match shift {
        None => near_min_bound(eps, tuple),
        Some(b) => shifted_near_min_bound(eps, b, tuple),
    };
    Ok(NearMinEstimate {
        intervals: ivs.to_vec(),
        epsilon: eps,
        shift,
        samples,
        estimate: p,
        stderr,
        grid_estimate: lower as f64 / n,
        step: h,
        bound,
        pass: p <= bound + 3.0 * stderr,
        seed,
    })
}

/// Whether some shift `x` in `[-b, b]` puts a piece of `z` inside every `I_i + x`.
fn shift_hit(z: &[(f64, f64)], ivs: &[(f64, f64)], b: f64) -> bool {
    let mut acc: Vec<(f64, f64)> = alloc::vec![(-b, b)];
    for &(a, bb) in ivs {
        // Shifts x with [z0, z1] meeting [a + x, bb + x].
        let mut s: Vec<(f64, f64)> = z.iter().map(|&(z0, z1)| (z0 - bb, z1 - a)).collect();
        s.sort_unstable_by(|p, q| p.0.total_cmp(&q.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(s.len());
        for iv in s {
            match merged.last_mut() {
                Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
                _ => merged.push(iv),
            }
        }
        acc = intersect(&acc, &merged);
        if acc.is_empty() {
            return false;
        }
    }
    true
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo <= hi {
            out.push((lo, hi));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub levels: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub fit: Option<SlopeFit>,
    pub horizon: f64,
    pub samples: usize,
    pub slope_limit: f64,
    pub pass: bool,
    pub seed: u64,
}

/// `inf_{0 <= x <= H} R(x) - x^{1/4}` for `R` from 0, stopped once below `-stop`.
fn tail_infimum(horizon: f64, stop: f64, rng: &mut ChaCha8Rng) -> f64 {
    // The event needs x^{1/4} > m >= 2, so nothing happens before x = 16.
    let x0 = Float::powi(TAIL_LEVELS[0], 4).min(horizon);
    let mut p = [0.0; 3];
    step(&mut p, x0, rng);
    let mut x = x0;
    let mut r = norm(&p);
    let mut low = r - Float::sqrt(Float::sqrt(x));
    while x < horizon && low >= -stop {
        let dx = (TAIL_STEP * r.max(1.0) * r.max(1.0)).min(horizon - x);
        step(&mut p, dx, rng);
        let r2 = norm(&p);
        x += dx;
        low = low.min(bridge_min(r, r2, dx, rng).max(0.0) - Float::sqrt(Float::sqrt(x)));
        r = r2;
    }
    low
}

/// Estimates `P(inf_{x >= 0} R(x) - x^{1/4} < -m)` for `m` in [`TAIL_LEVELS`]
/// and fits the decay exponent in `m`.
pub fn tail_growth_test(samples: usize, horizon: f64, seed: u64) -> Result<TailReport> {
    if samples == 0 {
        return Err(BesselError::NoSamples);
    }
    let stop = TAIL_LEVELS[TAIL_LEVELS.len() - 1];
    let mut counts = [0usize; 4];
    for i in 0..samples {
        let mut rng = rng_from_seed(replica_seed(seed, i as u64));
        let low = tail_infimum(horizon, stop, &mut rng);
        for (c, &m) in counts.iter_mut().zip(TAIL_LEVELS.iter()) {
            *c += (low < -m) as usize;
        }
    }
    let n = samples as f64;
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let stderrs: Vec<f64> = probabilities.iter().map(|p| Float::sqrt(p * (1.0 - p) / n)).collect();
    let fit = loglog_slope(&TAIL_LEVELS, &probabilities, &stderrs, 1000, derive_seed(seed, &[1])).ok();
    let pass = fit.as_ref().is_some_and(|f| f.slope <= TAIL_SLOPE_LIMIT);
    Ok(TailReport {
        levels: TAIL_LEVELS.to_vec(),
        probabilities,
        stderrs,
        fit,
        horizon,
        samples,
        slope_limit: TAIL_SLOPE_LIMIT,
        pass,
        seed,
    })
}
