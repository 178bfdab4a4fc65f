//! Box-counting dimension of time sets, log-log regression with bootstrap
//! confidence intervals, and Kolmogorov-Smirnov distances.

use alloc::vec::Vec;
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("no samples")]
    Empty,
    #[error("{got} samples, at least {need} required")]
    TooFewSamples { got: usize, need: usize },
    #[error("reference table must be nonempty, increasing in x and nondecreasing in p")]
    BadTable,
    #[error("{0} usable points after the stderr filter, at least 4 required")]
    TooFewPoints(usize),
    #[error("inputs have mismatched lengths")]
    LengthMismatch,
    #[error("block size {block} does not divide the {cells} grid cells")]
    Indivisible { block: usize, cells: usize },
}

pub type Result<T> = core::result::Result<T, StatsError>;

/// Minimum sample size for [`ks_distance`].
pub const KS_MIN_SAMPLES: usize = 100;
/// Points with relative stderr at or above this are dropped from slope fits.
pub const MAX_RELATIVE_STDERR: f64 = 0.25;
pub const DEFAULT_RESAMPLES: usize = 1000;

/// A distribution function tabulated on increasing abscissae and linearly
/// interpolated, 0 to the left and 1 to the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfTable {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl CdfTable {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let ok = !x.is_empty()
            && x.len() == p.len()
            && x.windows(2).all(|w| w[0] < w[1])
            && p.windows(2).all(|w| w[0] <= w[1])
            && p.iter().all(|v| (0.0..=1.0).contains(v));
        if !ok {
            return Err(StatsError::BadTable);
        }
        Ok(Self { x, p })
    }

    pub fn eval(&self, v: f64) -> f64 {
        let i = self.x.partition_point(|&x| x <= v);
        if i == 0 {
            return 0.0;
        }
        if i == self.x.len() {
            return 1.0;
        }
        let (x0, x1) = (self.x[i - 1], self.x[i]);
        let (p0, p1) = (self.p[i - 1], self.p[i]);
        p0 + (p1 - p0) * (v - x0) / (x1 - x0)
    }
}

/// Sup distance between the empirical CDF of `samples` and `reference`.
pub fn ks_distance(samples: &[f64], reference: &CdfTable) -> Result<f64> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(if samples.is_empty() {
            StatsError::Empty
        } else {
            StatsError::TooFewSamples { got: samples.len(), need: KS_MIN_SAMPLES }
        });
    }
    Ok(ks_distance_fn(samples, |v| reference.eval(v)))
}

/// Sup distance between the empirical CDF of `samples` and a continuous or
/// right-continuous `cdf`. Returns 0 for no samples.
pub fn ks_distance_fn(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < s.len() {
        let v = s[i];
        let mut j = i;
        while j < s.len() && s[j] == v {
            j += 1;
        }
        let f = cdf(v);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    Float::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64)
}

pub fn std_err(v: &[f64]) -> f64 {
    std_dev(v) / Float::sqrt(v.len() as f64)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    sorted_quantile(&s, q)
}

fn sorted_quantile(s: &[f64], q: f64) -> f64 {
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = Float::floor(pos) as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Weighted least-squares line `y = a + b x`; returns `(a, b)`.
pub fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for i in 0..x.len() {
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Fitted log-log slope with a 95% percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci: (f64, f64),
    /// Indices of the points that passed the stderr filter.
    pub used: Vec<usize>,
    pub resamples: usize,
}

impl SlopeFit {
    pub fn covers(&self, v: f64) -> bool {
        self.ci.0 <= v && v <= self.ci.1
    }
}

fn usable(est: &[f64], se: &[f64]) -> Vec<usize> {
    (0..est.len())
        .filter(|&i| est[i] > 0.0 && est[i].is_finite() && se[i] >= 0.0 && se[i] < MAX_RELATIVE_STDERR * est[i])
        .collect()
}

fn log_weights(est: &[f64], se: &[f64], used: &[usize]) -> Vec<f64> {
    let rel: Vec<f64> = used.iter().map(|&i| se[i] / est[i]).collect();
    if rel.iter().all(|&r| r == 0.0) {
        return alloc::vec![1.0; used.len()];
    }
    // Delta-method variance of log(est); a floor keeps exact points from dominating.
    let floor = rel.iter().copied().filter(|&r| r > 0.0).fold(f64::INFINITY, f64::min) * 0.1;
    rel.iter().map(|&r| 1.0 / (r.max(floor) * r.max(floor))).collect()
}

/// Weighted least squares of `log est` on `log x`, weights `(est / se)^2`,
/// over points with relative stderr below [`MAX_RELATIVE_STDERR`]. The
/// interval comes from a parametric bootstrap that redraws each estimate
/// from `N(est, se^2)`.
pub fn loglog_slope(x: &[f64], est: &[f64], se: &[f64], resamples: usize, seed: u64) -> Result<SlopeFit> {
    if x.len() != est.len() || x.len() != se.len() {
        return Err(StatsError::LengthMismatch);
    }
    let used = usable(est, se);
    if used.len() < 4 {
        return Err(StatsError::TooFewPoints(used.len()));
    }
    let lx: Vec<f64> = used.iter().map(|&i| Float::ln(x[i])).collect();
    let ly: Vec<f64> = used.iter().map(|&i| Float::ln(est[i])).collect();
    let w = log_weights(est, se, &used);
    let (intercept, slope) = weighted_line(&lx, &ly, &w);

    let mut rng = rng_from_seed(seed);
    let mut slopes = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let ly_b: Vec<f64> = used
            .iter()
            .map(|&i| {
                let draw = est[i] + se[i] * standard_normal(&mut rng);
                Float::ln(draw.max(est[i] * 1e-3))
            })
            .collect();
        slopes.push(weighted_line(&lx, &ly_b, &w).1);
    }
    Ok(SlopeFit { slope, intercept, ci: percentile_ci(slopes, slope), used, resamples })
}

/// As [`loglog_slope`], with estimates and stderrs taken from per-replica
/// values `samples[r][j]` at `x[j]` and the interval from resampling replicas.
pub fn loglog_slope_replicas(x: &[f64], samples: &[Vec<f64>], resamples: usize, seed: u64) -> Result<SlopeFit> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if samples.iter().any(|r| r.len() != x.len()) {
        return Err(StatsError::LengthMismatch);
    }
    let (est, se) = column_moments(samples, None);
    let used = usable(&est, &se);
    if used.len() < 4 {
        return Err(StatsError::TooFewPoints(used.len()));
    }
    let lx: Vec<f64> = used.iter().map(|&i| Float::ln(x[i])).collect();
    let ly: Vec<f64> = used.iter().map(|&i| Float::ln(est[i])).collect();
    let w = log_weights(&est, &se, &used);
    let (intercept, slope) = weighted_line(&lx, &ly, &w);

    let mut rng = rng_from_seed(seed);
    let mut slopes = Vec::with_capacity(resamples);
    let mut pick = alloc::vec![0usize; samples.len()];
    for _ in 0..resamples {
        for p in pick.iter_mut() {
            *p = rng.random_range(0..samples.len());
        }
        let (est_b, _) = column_moments(samples, Some(&pick));
        if used.iter().any(|&i| !(est_b[i] > 0.0)) {
            continue;
        }
        let ly_b: Vec<f64> = used.iter().map(|&i| Float::ln(est_b[i])).collect();
        slopes.push(weighted_line(&lx, &ly_b, &w).1);
    }
    Ok(SlopeFit { slope, intercept, ci: percentile_ci(slopes, slope), used, resamples })
}

/// Log-log fit of estimates computed by `statistic` from a set of replica
/// indices, with a bootstrap over replicas. `statistic` returns the estimate
/// at each `x`; `se` are their standard errors for the filter and weights.
pub fn loglog_slope_bootstrap(
    x: &[f64],
    replicas: usize,
    statistic: impl Fn(&[usize]) -> Vec<f64>,
    se: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<SlopeFit> {
    if replicas == 0 {
        return Err(StatsError::Empty);
    }
    let all: Vec<usize> = (0..replicas).collect();
    let est = statistic(&all);
    if est.len() != x.len() || se.len() != x.len() {
        return Err(StatsError::LengthMismatch);
    }
    let used = usable(&est, se);
    if used.len() < 4 {
        return Err(StatsError::TooFewPoints(used.len()));
    }
    let lx: Vec<f64> = used.iter().map(|&i| Float::ln(x[i])).collect();
    let ly: Vec<f64> = used.iter().map(|&i| Float::ln(est[i])).collect();
    let w = log_weights(&est, se, &used);
    let (intercept, slope) = weighted_line(&lx, &ly, &w);

    let mut rng = rng_from_seed(seed);
    let mut slopes = Vec::with_capacity(resamples);
    let mut pick = alloc::vec![0usize; replicas];
    for _ in 0..resamples {
        for p in pick.iter_mut() {
            *p = rng.random_range(0..replicas);
        }
        let est_b = statistic(&pick);
        if used.iter().any(|&i| !(est_b[i] > 0.0)) {
            continue;
        }
        let ly_b: Vec<f64> = used.iter().map(|&i| Float::ln(est_b[i])).collect();
        slopes.push(weighted_line(&lx, &ly_b, &w).1);
    }
    Ok(SlopeFit { slope, intercept, ci: percentile_ci(slopes, slope), used, resamples })
}

/// Pooled ratio `sum num / sum den` over the picked replicas.
pub fn pooled_ratio(num: &[f64], den: &[f64], pick: &[usize]) -> f64 {
    let a: f64 = pick.iter().map(|&r| num[r]).sum();
    let b: f64 = pick.iter().map(|&r| den[r]).sum();
    a / b
}

/// Standard error of [`pooled_ratio`] over all replicas by the delta method.
pub fn pooled_ratio_se(num: &[f64], den: &[f64]) -> f64 {
    let n = num.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let all: Vec<usize> = (0..num.len()).collect();
    let p = pooled_ratio(num, den, &all);
    let dbar = den.iter().sum::<f64>() / n;
    let ss: f64 = num.iter().zip(den).map(|(a, b)| (a - p * b) * (a - p * b)).sum();
    Float::sqrt(ss / (n * (n - 1.0))) / dbar
}

/// Column means and standard errors over replicas, optionally for a resample.
pub fn column_moments(samples: &[Vec<f64>], pick: Option<&[usize]>) -> (Vec<f64>, Vec<f64>) {
    let cols = samples[0].len();
    let rows: Vec<&Vec<f64>> = match pick {
        Some(p) => p.iter().map(|&i| &samples[i]).collect(),
        None => samples.iter().collect(),
    };
    let n = rows.len() as f64;
    let mut mean = alloc::vec![0.0; cols];
    let mut sq = alloc::vec![0.0; cols];
    for r in &rows {
        for j in 0..cols {
            mean[j] += r[j];
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    for r in &rows {
        for j in 0..cols {
            sq[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
        }
    }
    let se = sq
        .iter()
        .map(|s| if n > 1.0 { Float::sqrt(s / (n - 1.0) / n) } else { 0.0 })
        .collect();
    (mean, se)
}

fn percentile_ci(mut slopes: Vec<f64>, point: f64) -> (f64, f64) {
    if slopes.is_empty() {
        return (point, point);
    }
    slopes.sort_unstable_by(f64::total_cmp);
    let lo = sorted_quantile(&slopes, 0.025).min(point);
    let hi = sorted_quantile(&slopes, 0.975).max(point);
    (lo, hi)
}

pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Box-counting estimate over a ladder of block sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    /// Box sizes, decreasing.
    pub deltas: Vec<f64>,
    /// Mean covering counts per box size.
    pub counts: Vec<f64>,
    /// `None` marks an empty set.
    pub slope: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub replicas: usize,
    pub label: &'static str,
}

impl DimensionEstimate {
    /// `(log 1/delta, log N_delta)` pairs for plotting.
    pub fn plot_points(&self) -> Vec<(f64, f64)> {
        self.deltas
            .iter()
            .zip(&self.counts)
            .filter(|(_, &c)| c > 0.0)
            .map(|(&d, &c)| (-Float::ln(d), Float::ln(c)))
            .collect()
    }
}

pub const BOX_COUNT_LABEL: &str = "box-count proxy";

/// Number of blocks of `block` consecutive cells holding a flagged cell.
pub fn covering_count(flags: &[bool], block: usize) -> Result<usize> {
    if block == 0 || flags.len() % block != 0 {
        return Err(StatsError::Indivisible { block, cells: flags.len() });
    }
    Ok(flags.chunks(block).filter(|c| c.iter().any(|&f| f)).count())
}

fn count_ladder(flags: &[bool], blocks: &[usize]) -> Result<Vec<f64>> {
    blocks.iter().map(|&b| covering_count(flags, b).map(|c| c as f64)).collect()
}

fn ols_slope(deltas: &[f64], counts: &[f64]) -> f64 {
    let lx: Vec<f64> = deltas.iter().map(|d| -Float::ln(*d)).collect();
    let ly: Vec<f64> = counts.iter().map(|c| Float::ln(*c)).collect();
    weighted_line(&lx, &ly, &alloc::vec![1.0; lx.len()]).1
}

/// Box count of one indicator set with cells of width `cell`; `blocks` are
/// box sizes in cells, in increasing order. The interval is 1.96 regression
/// standard errors.
pub fn box_count(flags: &[bool], cell: f64, blocks: &[usize]) -> Result<DimensionEstimate> {
    let counts = count_ladder(flags, blocks)?;
    let deltas: Vec<f64> = blocks.iter().map(|&b| b as f64 * cell).collect();
    if counts.iter().all(|&c| c == 0.0) {
        return Ok(DimensionEstimate { deltas, counts, slope: None, ci: None, replicas: 1, label: BOX_COUNT_LABEL });
    }
    let slope = ols_slope(&deltas, &counts);
    let lx: Vec<f64> = deltas.iter().map(|d| -Float::ln(*d)).collect();
    let ly: Vec<f64> = counts.iter().map(|c| Float::ln(*c)).collect();
    let (a, _) = weighted_line(&lx, &ly, &alloc::vec![1.0; lx.len()]);
    let n = lx.len() as f64;
    let mx = mean(&lx);
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - a - slope * x) * (y - a - slope * x)).sum();
    let se = if n > 2.0 { Float::sqrt(rss / (n - 2.0) / sxx) } else { 0.0 };
    Ok(DimensionEstimate {
        deltas,
        counts,
        slope: Some(slope),
        ci: Some((slope - 1.96 * se, slope + 1.96 * se)),
        replicas: 1,
        label: BOX_COUNT_LABEL,
    })
}

/// Box count of mean covering numbers over replicas; the interval resamples replicas.
pub fn box_count_replicas(
    sets: &[Vec<bool>],
    cell: f64,
    blocks: &[usize],
    resamples: usize,
    seed: u64,
) -> Result<DimensionEstimate> {
    if sets.is_empty() {
        return Err(StatsError::Empty);
    }
    let per: Vec<Vec<f64>> = sets.iter().map(|s| count_ladder(s, blocks)).collect::<Result<_>>()?;
    let deltas: Vec<f64> = blocks.iter().map(|&b| b as f64 * cell).collect();
    let (counts, _) = column_moments(&per, None);
    if counts.iter().any(|&c| c == 0.0) {
        let slope = if counts.iter().all(|&c| c == 0.0) { None } else { Some(f64::NAN) };
        return Ok(DimensionEstimate { deltas, counts, slope, ci: None, replicas: sets.len(), label: BOX_COUNT_LABEL });
    }
    let slope = ols_slope(&deltas, &counts);
    let mut rng = rng_from_seed(seed);
    let mut slopes = Vec::with_capacity(resamples);
    let mut pick = alloc::vec![0usize; per.len()];
    for _ in 0..resamples {
        for p in pick.iter_mut() {
            *p = rng.random_range(0..per.len());
        }
        let (c, _) = column_moments(&per, Some(&pick));
        if c.iter().all(|&v| v > 0.0) {
            slopes.push(ols_slope(&deltas, &c));
        }
    }
    Ok(DimensionEstimate {
        deltas,
        counts,
        slope: Some(slope),
        ci: Some(percentile_ci(slopes, slope)),
        replicas: sets.len(),
        label: BOX_COUNT_LABEL,
    })
}

/// Dyadic block sizes `2^lo ..= 2^hi` cells.
pub fn dyadic_blocks(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|j| 1usize << j).collect()
}

/// Indicators of the middle-thirds Cantor set on `3^depth` cells of `[0, 1]`.
pub fn cantor_indicators(depth: u32) -> Vec<bool> {
    let cells = 3usize.pow(depth);
    (0..cells)
        .map(|mut i| {
            for _ in 0..depth {
                if i % 3 == 1 {
                    return false;
                }
                i /= 3;
            }
            true
        })
        .collect()
}

/// Result of refitting synthetic power laws with multiplicative noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub exponent: f64,
    pub noise: f64,
    pub trials: usize,
    pub covered: usize,
    pub rate: f64,
}

/// Fraction of trials in which the [`loglog_slope`] interval for
/// `x^exponent (1 + noise Z)` on `x = 1, 2, ..., 32` contains `exponent`.
pub fn synthetic_coverage(exponent: f64, noise: f64, trials: usize, seed: u64) -> CoverageReport {
    let x = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let se: Vec<f64> = x.iter().map(|v| noise * Float::powf(*v, exponent)).collect();
    let mut rng = rng_from_seed(seed);
    let mut covered = 0;
    for t in 0..trials {
        let est: Vec<f64> = x.iter().map(|v| Float::powf(*v, exponent) * (1.0 + noise * standard_normal(&mut rng))).collect();
        if loglog_slope(&x, &est, &se, 500, derive_seed(seed, &[t as u64])).is_ok_and(|f| f.covers(exponent)) {
            covered += 1;
        }
    }
    CoverageReport { exponent, noise, trials, covered, rate: covered as f64 / trials.max(1) as f64 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn normal_table() -> CdfTable {
        let x: Vec<f64> = (0..=800).map(|i| -8.0 + 0.02 * i as f64).collect();
        let p = x.iter().map(|&v| crate::fredholm::normal_cdf(v)).collect();
        CdfTable::new(x, p).unwrap()
    }

    #[test]
    fn ks_against_own_law_is_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..10_000).map(|_| standard_normal(&mut rng)).collect();
        assert!(ks_distance(&s, &normal_table()).unwrap() < 0.025);
    }

    #[test]
    fn ks_atom_and_disjoint() {
        let atoms = alloc::vec![0.0; 200];
        assert!(ks_distance(&atoms, &normal_table()).unwrap() >= 0.5);
        let a: Vec<f64> = (0..150).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..150).map(|i| 1000.0 + i as f64).collect();
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 1.0);
        assert_eq!(ks_distance(&[], &normal_table()), Err(StatsError::Empty));
        assert!(ks_distance(&[0.0; 10], &normal_table()).is_err());
    }

    #[test]
    fn exact_power_laws() {
        let x = [1.0, 2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let fit = loglog_slope(&x, &y, &[0.0; 5], 200, 1).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.ci.1 - fit.ci.0 < 1e-12);
        let flat = loglog_slope(&x, &[3.0; 5], &[0.0; 5], 200, 1).unwrap();
        assert!(flat.slope.abs() < 1e-12);
        assert_eq!(loglog_slope(&x[..3], &y[..3], &[0.0; 3], 10, 1), Err(StatsError::TooFewPoints(3)));
    }

    #[test]
    fn stderr_filter_drops_noisy_points() {
        let x = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let y = [1.0, 2.0, 4.0, 8.0, 16.0, 1.0];
        let se = [0.01, 0.02, 0.04, 0.08, 0.16, 0.5];
        let fit = loglog_slope(&x, &y, &se, 200, 2).unwrap();
        assert_eq!(fit.used, alloc::vec![0, 1, 2, 3, 4]);
        assert!((fit.slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn interval_covers_noisy_power_law() {
        let r = synthetic_coverage(0.7, 0.05, 200, 9);
        assert!(r.rate >= 0.9, "{r:?}");
    }

    #[test]
    fn box_counts_of_simple_sets() {
        let blocks = dyadic_blocks(0, 6);
        let mut point = alloc::vec![false; 1024];
        point[300] = true;
        let est = box_count(&point, 1.0 / 2048.0, &blocks).unwrap();
        assert!(est.counts.iter().all(|&c| c == 1.0));
        assert!(est.slope.unwrap().abs() < 1e-12);

        let full = alloc::vec![true; 1024];
        let est = box_count(&full, 1.0 / 2048.0, &blocks).unwrap();
        assert!((est.slope.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(est.counts[0], 1024.0);

        let empty = box_count(&alloc::vec![false; 1024], 1.0, &blocks).unwrap();
        assert_eq!(empty.slope, None);
        assert!(empty.counts.iter().all(|&c| c == 0.0));
        assert!(box_count(&full, 1.0, &[3]).is_err());
    }

    #[test]
    fn cantor_dimension() {
        let flags = cantor_indicators(10);
        let blocks: Vec<usize> = (2..=7).map(|j| 3usize.pow(j)).collect();
        let est = box_count(&flags, Float::powi(3.0f64, -10), &blocks).unwrap();
        let target = Float::ln(2.0f64) / Float::ln(3.0f64);
        assert!((est.slope.unwrap() - target).abs() < 0.03);
    }

    #[test]
    fn refinement_monotonicity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let flags: Vec<bool> = (0..512).map(|_| rng.random::<f64>() < 0.02).collect();
            for j in 1..9 {
                let coarse = covering_count(&flags, 1 << j).unwrap();
                let fine = covering_count(&flags, 1 << (j - 1)).unwrap();
                assert!(coarse <= fine && fine <= 2 * coarse);
            }
        }
    }

    #[test]
    fn quantiles_and_moments() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert!((std_dev(&v) - Float::sqrt(5.0f64 / 3.0)).abs() < 1e-12);
    }
}
