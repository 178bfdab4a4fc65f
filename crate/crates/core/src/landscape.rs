//! Directed-landscape approximations on a Poisson field and the KPZ fixed
//! point from general initial data via the variational formula
//! `h(t, y) = sup_x h0(x) + L(x, 0; y, t)`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dimension::{ks_two_sample, mean};
use crate::poisson_lpp::{
    multi_source_sweep, sample_domain, Domain, LppError, LppParams, PoissonField, SpaceTime,
};
use crate::rng::{derive_seed, replica_seed};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LandscapeError {
    #[error(transparent)]
    Lpp(#[from] LppError),
    #[error("initial condition has no finite value")]
    NoFiniteValue,
    #[error("initial condition takes the value {0}")]
    BadValue(f64),
    #[error("grid and values differ in length or the grid is not increasing")]
    BadGrid,
    #[error("table edges must sit at least {DECAY_MARGIN} below the maximum {max}; edge value {edge}")]
    NotDecaying { max: f64, edge: f64 },
    #[error("window must be positive, got {0}")]
    BadWindow(f64),
    #[error("truncation to [-{0}, {0}] removes the global maximum")]
    RemovesMaximum(f64),
    #[error("source {0} lies outside the sampled source window")]
    SourceOutside(f64),
    #[error("query ({y}, {t}) lies outside the sampled window")]
    QueryOutside { y: f64, t: f64 },
    #[error("no source reaches ({y}, {t}); enlarge the window or n")]
    Unreachable { y: f64, t: f64 },
    #[error("field does not cover the requested window")]
    FieldTooSmall,
    #[error("empty query grid")]
    EmptyGrid,
}

pub type Result<T> = core::result::Result<T, LandscapeError>;

/// Table edges must lie this far below the table maximum.
pub const DECAY_MARGIN: f64 = 10.0;
/// Values within this of the column maximum are reported as maximisers.
pub const ARGMAX_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_BESSEL_WINDOW: f64 = 8.0;
pub const GRID_STEP: f64 = 0.02;
/// Largest profile change accepted when doubling the truncation window.
pub const TRUNCATION_TOLERANCE: f64 = 1e-9;

/// Initial data `h0`, upper semicontinuous with values in `R ∪ {-inf}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// Narrow wedges: 0 at each location, `-inf` elsewhere.
    Wedges(Vec<f64>),
    /// `-R` on a grid for a two-sided Bessel path `R`, cut off outside `[-window, window]`.
    Bessel { grid: Vec<f64>, values: Vec<f64>, window: f64 },
    Table { grid: Vec<f64>, values: Vec<f64> },
}

fn check_grid(grid: &[f64], values: &[f64]) -> Result<()> {
    if grid.len() != values.len() || grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(LandscapeError::BadGrid);
    }
    if let Some(&v) = values.iter().find(|v| v.is_nan() || **v == f64::INFINITY) {
        return Err(LandscapeError::BadValue(v));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(LandscapeError::BadGrid);
    }
    if values.iter().all(|v| !v.is_finite()) {
        return Err(LandscapeError::NoFiniteValue);
    }
    Ok(())
}

impl InitialCondition {
    pub fn narrow_wedge(x: f64) -> Self {
        Self::Wedges(alloc::vec![x])
    }

    pub fn wedges(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(LandscapeError::NoFiniteValue);
        }
        if let Some(&x) = xs.iter().find(|x| !x.is_finite()) {
            return Err(LandscapeError::BadValue(x));
        }
        let mut v = xs.to_vec();
        v.sort_unstable_by(f64::total_cmp);
        v.dedup();
        Ok(Self::Wedges(v))
    }

    /// `-r` on `grid`, with `-inf` outside `[-window, window]`.
    pub fn bessel(grid: &[f64], r: &[f64], window: f64) -> Result<Self> {
        if !(window > 0.0) {
            return Err(LandscapeError::BadWindow(window));
        }
        if r.iter().any(|v| !(*v >= 0.0)) {
            return Err(LandscapeError::BadValue(r.iter().copied().find(|v| !(*v >= 0.0)).unwrap()));
        }
        let values: Vec<f64> = grid
            .iter()
            .zip(r)
            .map(|(&x, &v)| if x.abs() <= window { -v } else { f64::NEG_INFINITY })
            .collect();
        check_grid(grid, &values)?;
        Ok(Self::Bessel { grid: grid.to_vec(), values, window })
    }

    /// Tabulated data; the first and last entries must sit [`DECAY_MARGIN`]
    /// below the maximum.
    pub fn table(grid: &[f64], values: &[f64]) -> Result<Self> {
        check_grid(grid, values)?;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for &edge in [values[0], values[values.len() - 1]].iter() {
            if edge > max - DECAY_MARGIN {
                return Err(LandscapeError::NotDecaying { max, edge });
            }
        }
        Ok(Self::Table { grid: grid.to_vec(), values: values.to_vec() })
    }

    /// Finite `(x, h0(x))` pairs, in increasing `x`.
    pub fn support(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Wedges(xs) => xs.iter().map(|&x| (x, 0.0)).collect(),
            Self::Bessel { grid, values, .. } | Self::Table { grid, values } => grid
                .iter()
                .zip(values)
                .filter(|(_, v)| v.is_finite())
                .map(|(&x, &v)| (x, v))
                .collect(),
        }
    }

    pub fn max_value(&self) -> f64 {
        self.support().iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest interval holding the support.
    pub fn extent(&self) -> (f64, f64) {
        let s = self.support();
        (s[0].0, s[s.len() - 1].0)
    }

    fn map_values(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        match self {
            Self::Wedges(xs) => Self::Wedges(xs.iter().copied().filter(|&x| f(x, 0.0).is_finite()).collect()),
            Self::Bessel { grid, values, window } => Self::Bessel {
                grid: grid.clone(),
                values: grid.iter().zip(values).map(|(&x, &v)| f(x, v)).collect(),
                window: *window,
            },
            Self::Table { grid, values } => Self::Table {
                grid: grid.clone(),
                values: grid.iter().zip(values).map(|(&x, &v)| f(x, v)).collect(),
            },
        }
    }

    /// `h0 + c`.
    pub fn shifted_by(&self, c: f64) -> Self {
        match self {
            Self::Wedges(xs) => Self::Table { grid: xs.clone(), values: alloc::vec![c; xs.len()] },
            _ => self.map_values(|_, v| v + c),
        }
    }
}

/// `h0` with values outside `[-b, b]` replaced by `-inf`.
pub fn truncate_initial_condition(h0: &InitialCondition, b: f64) -> Result<InitialCondition> {
    if !(b > 0.0) {
        return Err(LandscapeError::BadWindow(b));
    }
    let out = h0.map_values(|x, v| if x.abs() <= b { v } else { f64::NEG_INFINITY });
    let kept = out.support();
    if kept.is_empty() || out.max_value() < h0.max_value() {
        return Err(LandscapeError::RemovesMaximum(b));
    }
    Ok(out)
}

/// A Poisson field restricted to the paths from a source window at time 0
/// to a target window at `horizon`, with the prelimit parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeSample {
    pub params: LppParams,
    pub domain: Domain,
    field: PoissonField,
}

impl LandscapeSample {
    pub fn sample(params: LppParams, sources: (f64, f64), targets: (f64, f64), horizon: f64, seed: u64) -> Result<Self> {
        let domain = Domain::new(sources, 0.0, targets, horizon, params.slope)?;
        let field = sample_domain(domain, params.intensity, seed)?;
        Ok(Self { params, domain, field })
    }

    /// Wraps an existing field, which must hold every point of `domain`.
    pub fn from_field(params: LppParams, field: PoissonField, domain: Domain) -> Result<Self> {
        let covered = match field.domain() {
            Some(d) => {
                d.slope == domain.slope
                    && d.source_t == domain.source_t
                    && d.target_t == domain.target_t
                    && d.source_lo <= domain.source_lo
                    && d.source_hi >= domain.source_hi
                    && d.target_lo <= domain.target_lo
                    && d.target_hi >= domain.target_hi
            }
            None => field.region().contains_region(&domain.bounding_region()?),
        };
        if !covered || domain.slope != params.slope {
            return Err(LandscapeError::FieldTooSmall);
        }
        Ok(Self { params, domain, field })
    }

    pub fn field(&self) -> &PoissonField {
        &self.field
    }

    /// `L(x, 0; y, t)` for each `y`, `-inf` where unreachable.
    pub fn column(&self, x: f64, ys: &[f64], t: f64) -> Result<Vec<f64>> {
        let raw = self.sweep(&[(x, 0.0)], ys, t)?;
        Ok(raw.iter().map(|h| h.map_or(f64::NEG_INFINITY, |h| self.params.length(h.value, t))).collect())
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        Ok(self.column(x, &[y], t)?[0])
    }

    fn sweep(&self, sources: &[(f64, f64)], ys: &[f64], t: f64) -> Result<Vec<Option<crate::poisson_lpp::SweepHit>>> {
        for &(x, _) in sources {
            if x < self.domain.source_lo - 1e-12 || x > self.domain.source_hi + 1e-12 {
                return Err(LandscapeError::SourceOutside(x));
            }
        }
        if ys.is_empty() {
            return Err(LandscapeError::EmptyGrid);
        }
        let targets: Vec<SpaceTime> = ys.iter().map(|&y| SpaceTime::new(y, t)).collect();
        for q in &targets {
            if !(t > 0.0) || !self.domain.contains(*q) {
                return Err(LandscapeError::QueryOutside { y: q.x, t });
            }
        }
        let weighted: Vec<(f64, f64)> = sources.iter().map(|&(x, w)| (x, w * self.params.scale)).collect();
        Ok(multi_source_sweep(&self.field, self.params.slope, 0.0, &weighted, &targets)?)
    }
}

/// `h(t, .)` on a grid with its near-maximisers and the source attaining each value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointProfile {
    pub t: f64,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
    pub is_argmax: Vec<bool>,
    pub source_x: Vec<f64>,
    pub tolerance: f64,
}

impl FixedPointProfile {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax_indices(&self) -> Vec<usize> {
        (0..self.ys.len()).filter(|&j| self.is_argmax[j]).collect()
    }

    /// Leftmost exact maximiser.
    pub fn argmax(&self) -> usize {
        let m = self.max();
        self.values.iter().position(|&v| v == m).expect("profile is nonempty")
    }

    pub fn inf_argmax(&self) -> f64 {
        self.ys[*self.argmax_indices().first().expect("argmax set is nonempty")]
    }

    pub fn sup_argmax(&self) -> f64 {
        self.ys[*self.argmax_indices().last().expect("argmax set is nonempty")]
    }

    /// CSV with columns `t,y,value,is_argmax,source_x`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,y,value,is_argmax,source_x\n");
        for j in 0..self.ys.len() {
            let _ = writeln!(s, "{},{},{},{},{}", self.t, self.ys[j], self.values[j], self.is_argmax[j] as u8, self.source_x[j]);
        }
        s
    }

    /// `max h - h(Y + lag)` for each lag, with `Y` the leftmost maximiser.
    /// Lags must land on grid points; `None` where they leave the grid.
    pub fn drops_from_argmax(&self, lags: &[f64]) -> Vec<Option<f64>> {
        let j = self.argmax();
        let y = self.ys[j];
        let m = self.values[j];
        lags.iter()
            .map(|&lag| {
                let target = y + lag;
                let k = self.ys.partition_point(|&v| v < target - 1e-9);
                (k < self.ys.len() && (self.ys[k] - target).abs() < 1e-9).then(|| m - self.values[k])
            })
            .collect()
    }
}

/// `h(t, y) = max_i h0(x_i) + L(x_i, 0; y, t)` over the finite support of `h0`.
pub fn evaluate_fixed_point(sample: &LandscapeSample, h0: &InitialCondition, t: f64, ys: &[f64]) -> Result<FixedPointProfile> {
    let support = h0.support();
    let hits = sample.sweep(&support, ys, t)?;
    let p = &sample.params;
    let mut values = Vec::with_capacity(ys.len());
    let mut source_x = Vec::with_capacity(ys.len());
    for (j, h) in hits.iter().enumerate() {
        let h = h.ok_or(LandscapeError::Unreachable { y: ys[j], t })?;
        values.push((h.value - p.drift * t) / p.scale);
        source_x.push(support[h.source].0);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let is_argmax = values.iter().map(|&v| v >= max - ARGMAX_TOLERANCE).collect();
    Ok(FixedPointProfile { t, ys: ys.to_vec(), values, is_argmax, source_x, tolerance: ARGMAX_TOLERANCE })
}

/// Effect of doubling the truncation window on one pilot replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationDiagnostic {
    pub window: f64,
    pub max_abs_difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares profiles of `h0` truncated to `[-b, b]` and to `[-2b, 2b]` on one
/// field covering the larger window.
pub fn truncation_diagnostic(
    params: LppParams,
    h0: &InitialCondition,
    b: f64,
    t: f64,
    ys: &[f64],
    seed: u64,
) -> Result<TruncationDiagnostic> {
    let narrow = truncate_initial_condition(h0, b)?;
    let wide = truncate_initial_condition(h0, 2.0 * b)?;
    if ys.is_empty() {
        return Err(LandscapeError::EmptyGrid);
    }
    let (lo, hi) = (ys[0].min(ys[ys.len() - 1]), ys[0].max(ys[ys.len() - 1]));
    let sample = LandscapeSample::sample(params, wide.extent(), (lo, hi), t, seed)?;
    let a = evaluate_fixed_point(&sample, &narrow, t, ys)?;
    let c = evaluate_fixed_point(&sample, &wide, t, ys)?;
    let diff = a.values.iter().zip(&c.values).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    Ok(TruncationDiagnostic { window: b, max_abs_difference: diff, tolerance: TRUNCATION_TOLERANCE, pass: diff <= TRUNCATION_TOLERANCE })
}

/// One replica's worth of landscape values for [`symmetry_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryDraw {
    /// `L(0, 0; 0, 1)` and `L(1, 0; 1, 1)`.
    pub shifted: [f64; 2],
    /// `s^{-1/3} L(0, 0; 0, s)` for `s` in [`SCALES`].
    pub scaled: [f64; 3],
    /// `L(0, 0; y, 1) + y^2` on [`parabola_grid`].
    pub parabola: Vec<f64>,
}

pub const SCALES: [f64; 3] = [0.5, 1.0, 2.0];
pub const SYMMETRY_TOLERANCE: f64 = 0.06;
pub const PARABOLA_TOLERANCE: f64 = 0.15;

/// `y = -1, -0.75, ..., 1`.
pub fn parabola_grid() -> Vec<f64> {
    (0..=8).map(|j| -1.0 + 0.25 * j as f64).collect()
}

/// Landscape values for one replica. The shift and parabola values share one
/// field; the scale values share a second field of height 2.
pub fn symmetry_draw(params: LppParams, seed: u64) -> Result<SymmetryDraw> {
    let a = LandscapeSample::sample(params, (0.0, 1.0), (-1.0, 1.0), 1.0, derive_seed(seed, &[0]))?;
    let ys = parabola_grid();
    let col = a.column(0.0, &ys, 1.0)?;
    let shifted = [a.value(0.0, 0.0, 1.0)?, a.value(1.0, 1.0, 1.0)?];
    let b = LandscapeSample::sample(params, (0.0, 0.0), (0.0, 0.0), 2.0, derive_seed(seed, &[1]))?;
    let mut scaled = [0.0; 3];
    for (i, &s) in SCALES.iter().enumerate() {
        scaled[i] = b.value(0.0, 0.0, s)? / Float::cbrt(s);
    }
    let parabola = ys.iter().zip(&col).map(|(y, v)| v + y * y).collect();
    Ok(SymmetryDraw { shifted, scaled, parabola })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, statistic: f64, tolerance: f64) -> Self {
        Check { name: name.into(), statistic, tolerance, pass: statistic <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub n: f64,
    pub replicas: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub parabola_means: Vec<f64>,
}

/// Aggregates draws into the stationarity, scaling and parabola checks.
pub fn symmetry_report(n: f64, seed: u64, draws: &[SymmetryDraw]) -> Result<SymmetryReport> {
    let col = |f: &dyn Fn(&SymmetryDraw) -> f64| draws.iter().map(f).collect::<Vec<f64>>();
    let ks = |a: &[f64], b: &[f64]| ks_two_sample(a, b).unwrap_or(1.0);
    let shift = ks(&col(&|d| d.shifted[0]), &col(&|d| d.shifted[1]));
    let scaled: Vec<Vec<f64>> = (0..3).map(|i| col(&|d| d.scaled[i])).collect();
    let mut scale = 0.0f64;
    for i in 0..3 {
        for j in i + 1..3 {
            scale = scale.max(ks(&scaled[i], &scaled[j]));
        }
    }
    let means: Vec<f64> = (0..parabola_grid().len()).map(|j| mean(&col(&|d| d.parabola[j]))).collect();
    let drift = means.iter().copied().fold(f64::NEG_INFINITY, f64::max) - means.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SymmetryReport {
        n,
        replicas: draws.len(),
        seed,
        checks: alloc::vec![
            Check::at_most("spatial stationarity", shift, SYMMETRY_TOLERANCE),
            Check::at_most("scale invariance", scale, SYMMETRY_TOLERANCE),
            Check::at_most("parabola drift", drift, PARABOLA_TOLERANCE),
        ],
        parabola_means: means,
    })
}

/// Sequential symmetry suite with the landscape normalisation at `n`.
pub fn symmetry_suite(n: f64, replicas: usize, seed: u64) -> Result<SymmetryReport> {
    let params = LppParams::landscape(n)?;
    let draws = (0..replicas)
        .map(|r| symmetry_draw(params, replica_seed(seed, r as u64)))
        .collect::<Result<Vec<_>>>()?;
    symmetry_report(n, seed, &draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson_lpp::{chain_index, Region};
    use rand::{Rng, SeedableRng};

    fn params() -> LppParams {
        LppParams::new(1.0, 1.0, 0.0, 1.0).unwrap()
    }

    fn small_sample(seed: u64, points: usize) -> LandscapeSample {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let region = Region::new(-6.0, 6.0, 0.0, 3.0).unwrap();
        let pts = (0..points)
            .map(|_| SpaceTime::new(rng.random_range(-6.0..6.0), rng.random_range(0.0..3.0)))
            .collect();
        let field = PoissonField::from_points(region, 1.0, seed, pts).unwrap();
        let domain = Domain::new((-2.0, 2.0), 0.0, (-1.0, 1.0), 3.0, 1.0).unwrap();
        LandscapeSample::from_field(params(), field, domain).unwrap()
    }

    fn brute(sample: &LandscapeSample, h0: &InitialCondition, t: f64, y: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for (x, h) in h0.support() {
            let idx = chain_index(sample.field(), SpaceTime::new(x, 0.0), 1.0).unwrap();
            if let Some(c) = idx.max_count_to(SpaceTime::new(y, t)) {
                best = best.max(h + c as f64);
            }
        }
        best
    }

    #[test]
    fn table_matches_double_loop() {
        let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let ys = [-0.9, -0.3, 0.0, 0.4, 1.0];
        for seed in 0..30 {
            let sample = small_sample(seed, 60);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + seed);
            let values = [-20.0, rng.random_range(-3.0..0.0), rng.random_range(-3.0..0.0), rng.random_range(-3.0..0.0), -25.0];
            let h0 = InitialCondition::table(&grid, &values).unwrap();
            let prof = evaluate_fixed_point(&sample, &h0, 2.5, &ys).unwrap();
            for (j, &y) in ys.iter().enumerate() {
                assert_eq!(prof.values[j], brute(&sample, &h0, 2.5, y));
            }
        }
    }

    #[test]
    fn narrow_wedge_is_a_column() {
        let sample = small_sample(7, 80);
        let ys = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let prof = evaluate_fixed_point(&sample, &InitialCondition::narrow_wedge(0.5), 2.0, &ys).unwrap();
        assert_eq!(prof.values, sample.column(0.5, &ys, 2.0).unwrap());
        assert!(prof.source_x.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn two_wedges_take_the_larger_column() {
        let sample = small_sample(8, 80);
        let ys = [-1.0, -0.25, 0.5, 1.0];
        let prof = evaluate_fixed_point(&sample, &InitialCondition::wedges(&[1.0, 2.0]).unwrap(), 3.0, &ys).unwrap();
        let a = sample.column(1.0, &ys, 3.0).unwrap();
        let b = sample.column(2.0, &ys, 3.0).unwrap();
        for j in 0..ys.len() {
            assert_eq!(prof.values[j], a[j].max(b[j]));
        }
    }

    #[test]
    fn monotone_in_initial_data() {
        let grid: Vec<f64> = (0..=20).map(|i| -2.0 + 0.2 * i as f64).collect();
        let ys = [-1.0, -0.5, 0.0, 0.5, 1.0];
        for seed in 0..20 {
            let sample = small_sample(seed, 70);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut lo: Vec<f64> = grid.iter().map(|_| rng.random_range(-4.0..0.0)).collect();
            lo[0] = -30.0;
            lo[20] = -30.0;
            let hi: Vec<f64> = lo.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
            let a = evaluate_fixed_point(&sample, &InitialCondition::table(&grid, &lo).unwrap(), 2.0, &ys).unwrap();
            let b = evaluate_fixed_point(&sample, &InitialCondition::table(&grid, &hi).unwrap(), 2.0, &ys).unwrap();
            assert!(a.values.iter().zip(&b.values).all(|(u, v)| u <= v));
        }
    }

    #[test]
    fn shift_equivariance() {
        let sample = small_sample(3, 90);
        let shifted = LandscapeSample::from_field(
            params(),
            sample.field().shifted(0.75),
            Domain::new((-1.25, 2.75), 0.0, (-0.25, 1.75), 3.0, 1.0).unwrap(),
        )
        .unwrap();
        let h0 = InitialCondition::wedges(&[-1.0, 0.5]).unwrap();
        let h0s = InitialCondition::wedges(&[-0.25, 1.25]).unwrap();
        let ys = [-0.8, 0.0, 0.6];
        let ys_s: Vec<f64> = ys.iter().map(|y| y + 0.75).collect();
        let a = evaluate_fixed_point(&sample, &h0, 2.0, &ys).unwrap();
        let b = evaluate_fixed_point(&shifted, &h0s, 2.0, &ys_s).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn argmax_set_is_valid() {
        for seed in 0..20 {
            let sample = small_sample(seed, 50);
            let ys: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
            let prof = evaluate_fixed_point(&sample, &InitialCondition::wedges(&[-1.0, 0.0, 1.0]).unwrap(), 2.0, &ys).unwrap();
            let m = prof.max();
            assert!(prof.is_argmax[prof.argmax()]);
            for j in prof.argmax_indices() {
                assert!(prof.values[j] >= m - ARGMAX_TOLERANCE);
            }
            assert!(prof.inf_argmax() <= prof.sup_argmax());
        }
    }

    #[test]
    fn queries_outside_the_window_fail() {
        let sample = small_sample(1, 30);
        let h0 = InitialCondition::narrow_wedge(0.0);
        assert!(matches!(evaluate_fixed_point(&sample, &h0, 2.0, &[5.0]), Err(LandscapeError::QueryOutside { .. })));
        let far = InitialCondition::narrow_wedge(4.0);
        assert!(matches!(evaluate_fixed_point(&sample, &far, 2.0, &[0.0]), Err(LandscapeError::SourceOutside(_))));
        assert!(evaluate_fixed_point(&sample, &h0, 0.0, &[0.0]).is_err());
    }

    #[test]
    fn unreachable_column_is_an_error() {
        let region = Region::new(-3.0, 3.0, 0.0, 1.0).unwrap();
        let field = PoissonField::from_points(region, 1.0, 0, Vec::new()).unwrap();
        let domain = Domain::new((-1.0, 1.0), 0.0, (-1.0, 1.0), 1.0, 1.0).unwrap();
        let sample = LandscapeSample::from_field(params(), field, domain).unwrap();
        // With no points every source still reaches targets within its cone.
        let prof = evaluate_fixed_point(&sample, &InitialCondition::narrow_wedge(0.0), 0.5, &[0.25]).unwrap();
        assert_eq!(prof.values, alloc::vec![0.0]);
        let err = evaluate_fixed_point(&sample, &InitialCondition::narrow_wedge(-1.0), 0.5, &[0.9]);
        assert!(matches!(err, Err(LandscapeError::Unreachable { .. })));
    }

    #[test]
    fn initial_condition_validation() {
        assert!(InitialCondition::table(&[0.0, 1.0, 2.0], &[-20.0, 0.0, -20.0]).is_ok());
        assert!(matches!(
            InitialCondition::table(&[0.0, 1.0, 2.0], &[-5.0, 0.0, -20.0]),
            Err(LandscapeError::NotDecaying { .. })
        ));
        assert_eq!(
            InitialCondition::table(&[0.0, 1.0], &[f64::NEG_INFINITY; 2]),
            Err(LandscapeError::NoFiniteValue)
        );
        assert!(InitialCondition::table(&[0.0, 1.0, 2.0], &[-20.0, f64::INFINITY, -20.0]).is_err());
        assert!(InitialCondition::table(&[1.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(InitialCondition::bessel(&[-1.0, 0.0, 1.0], &[1.0, 0.0, 2.0], 0.5).is_ok());
        assert!(InitialCondition::bessel(&[-1.0, 0.0, 1.0], &[1.0, -0.1, 2.0], 0.5).is_err());
    }

    #[test]
    fn truncation() {
        let w = InitialCondition::wedges(&[-1.0, 1.0]).unwrap();
        assert_eq!(truncate_initial_condition(&w, 2.0).unwrap(), w);
        let t = InitialCondition::table(&[-3.0, -1.0, 0.0, 1.0, 3.0], &[-20.0, -2.0, 0.0, -1.0, -15.0]).unwrap();
        let cut = truncate_initial_condition(&t, 1.5).unwrap();
        assert_eq!(cut.support(), alloc::vec![(-1.0, -2.0), (0.0, 0.0), (1.0, -1.0)]);
        assert_eq!(truncate_initial_condition(&t, 0.5).unwrap().support(), alloc::vec![(0.0, 0.0)]);
        let off = InitialCondition::table(&[-3.0, -1.0, 2.0, 3.0], &[-20.0, -2.0, 0.0, -15.0]).unwrap();
        assert_eq!(truncate_initial_condition(&off, 1.5), Err(LandscapeError::RemovesMaximum(1.5)));
        assert!(truncate_initial_condition(&t, 0.0).is_err());
    }

    #[test]
    fn profile_csv_and_drops() {
        let prof = FixedPointProfile {
            t: 1.0,
            ys: alloc::vec![-0.5, 0.0, 0.5],
            values: alloc::vec![-1.0, 0.5, 0.25],
            is_argmax: alloc::vec![false, true, false],
            source_x: alloc::vec![0.0, 0.0, 1.0],
            tolerance: ARGMAX_TOLERANCE,
        };
        let csv = prof.to_csv();
        assert!(csv.starts_with("t,y,value,is_argmax,source_x\n1,-0.5,-1,0,0\n"));
        assert_eq!(prof.drops_from_argmax(&[0.5, -0.5, 1.0]), alloc::vec![Some(0.25), Some(1.5), None]);
    }

    #[test]
    fn symmetry_suite_is_reproducible() {
        let a = symmetry_suite(8.0, 20, 4).unwrap();
        let b = symmetry_suite(8.0, 20, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.checks.len(), 3);
        assert_eq!(a.parabola_means.len(), 9);
    }
}
