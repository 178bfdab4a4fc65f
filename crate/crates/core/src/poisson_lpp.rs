//! Poisson last-passage percolation with Lipschitz paths.
//!
//! A path is an `m`-Lipschitz function of time; its length is the number of
//! Poisson points on its graph, recentred and rescaled as
//! `(#points - drift * duration) / scale`. Shearing space-time by
//! `u = m (t - s) + (x - x0)`, `v = m (t - s) - (x - x0)` turns Lipschitz paths
//! into componentwise nondecreasing chains, so maximal lengths are longest
//! weakly increasing subsequences after one sort.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LppError {
    #[error("intensity must be positive and finite, got {0}")]
    InvalidIntensity(f64),
    #[error("region [{x_min}, {x_max}] x [{t_min}, {t_max}] is empty")]
    EmptyRegion { x_min: f64, x_max: f64, t_min: f64, t_max: f64 },
    #[error("Lipschitz bound must be positive and finite, got {0}")]
    InvalidSlope(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("target time {target} precedes source time {origin}")]
    TargetBeforeSource { origin: f64, target: f64 },
    #[error("time grid must be nonempty and strictly increasing")]
    UnsortedGrid,
    #[error("time grid [{first}, {last}] leaves the field extent [{start}, {end}]")]
    GridOutsideField { first: f64, last: f64, start: f64, end: f64 },
    #[error("index was built with slope {index} but params use {params}")]
    SlopeMismatch { index: f64, params: f64 },
    #[error("strips around {0} and {1} overlap")]
    OverlappingStrips(f64, f64),
    #[error("strip around {0} is not inside the region")]
    StripOutsideRegion(f64),
    #[error("point ({x}, {t}) lies outside the region")]
    PointOutsideRegion { x: f64, t: f64 },
    #[error("points share an exact coordinate")]
    DuplicateCoordinate,
    #[error("malformed field encoding: {0}")]
    Decode(&'static str),
}

pub type Result<T> = core::result::Result<T, LppError>;

/// A space-time location `(x, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTime {
    pub x: f64,
    pub t: f64,
}

impl SpaceTime {
    pub const fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }
}

/// Axis-aligned rectangle `[x_min, x_max] x [t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, t_min: f64, t_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, t_min, t_max].iter().all(|v| v.is_finite());
        if !finite || x_max <= x_min || t_max <= t_min {
            return Err(LppError::EmptyRegion { x_min, x_max, t_min, t_max });
        }
        Ok(Self { x_min, x_max, t_min, t_max })
    }

    /// Smallest region holding every `slope`-Lipschitz path that starts in
    /// `[x_lo, x_hi]` at time `t0` and is observed up to time `t1`.
    pub fn forward_cone(x_lo: f64, x_hi: f64, t0: f64, t1: f64, slope: f64) -> Result<Self> {
        let pad = slope * (t1 - t0);
        Self::new(x_lo - pad, x_hi + pad, t0, t1)
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.t_max - self.t_min)
    }

    pub fn contains(&self, p: SpaceTime) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.t >= self.t_min && p.t <= self.t_max
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        other.x_min >= self.x_min
            && other.x_max <= self.x_max
            && other.t_min >= self.t_min
            && other.t_max <= self.t_max
    }
}

/// The tuple `(m, lambda, ell, chi)` defining `d_{m, lambda, ell, chi}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LppParams {
    /// Lipschitz bound `m` on admissible paths.
    pub slope: f64,
    /// Poisson intensity `lambda` (points per unit area).
    pub intensity: f64,
    /// Linear recentring `ell` per unit time.
    pub drift: f64,
    /// Fluctuation normaliser `chi`.
    pub scale: f64,
}

impl LppParams {
    pub fn new(slope: f64, intensity: f64, drift: f64, scale: f64) -> Result<Self> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(LppError::InvalidSlope(slope));
        }
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(LppError::InvalidIntensity(intensity));
        }
        if !(drift >= 0.0 && drift.is_finite()) {
            return Err(LppError::InvalidParams("drift must be finite and nonnegative"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(LppError::InvalidParams("scale must be finite and positive"));
        }
        Ok(Self { slope, intensity, drift, scale })
    }

    /// `d^n = d_{n^{1/3}/2, 4 n^{5/3}, 2n, n^{1/3}}`.
    ///
    /// With these constants the recentred length from `(x, 0)` to `(y, t)`
    /// has mean shape `-4 (x - y)^2 / t`, i.e. it approximates the directed
    /// landscape evaluated at doubled spatial coordinates. See
    /// [`LppParams::landscape`] for the normalisation with unit curvature.
    pub fn prelimit(n: f64) -> Result<Self> {
        let c = Float::cbrt(n);
        Self::new(c / 2.0, 4.0 * n * n / c, 2.0 * n, c)
    }

    /// `d_{n^{1/3}, 2 n^{5/3}, 2n, n^{1/3}}`: the prelimit rescaled so that
    /// `d(x, 0; y, t) ≈ t^{1/3} TW - (x - y)^2 / t`, matching the directed
    /// landscape's own spatial normalisation.
    ///
    /// It is the image of [`LppParams::prelimit`] under `x -> 2x`, which
    /// doubles the slope and halves the intensity.
    pub fn landscape(n: f64) -> Result<Self> {
        let c = Float::cbrt(n);
        Self::new(c, 2.0 * n * n / c, 2.0 * n, c)
    }

    /// Recentred length of a path collecting `count` points over `duration`.
    pub fn length(&self, count: f64, duration: f64) -> f64 {
        (count - self.drift * duration) / self.scale
    }
}

/// Points lying on some `slope`-Lipschitz path from the segment
/// `[source_lo, source_hi] x {source_t}` to `[target_lo, target_hi] x {target_t}`.
///
/// Chains between those segments only ever use points of this set, so a field
/// restricted to it gives the same passage values at a fraction of the cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub source_lo: f64,
    pub source_hi: f64,
    pub source_t: f64,
    pub target_lo: f64,
    pub target_hi: f64,
    pub target_t: f64,
    pub slope: f64,
}

impl Domain {
    pub fn new(source: (f64, f64), source_t: f64, target: (f64, f64), target_t: f64, slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(LppError::InvalidSlope(slope));
        }
        let vals = [source.0, source.1, source_t, target.0, target.1, target_t];
        let reach = slope * (target_t - source_t);
        if vals.iter().any(|v| !v.is_finite())
            || source.1 < source.0
            || target.1 < target.0
            || target_t <= source_t
            || target.0 - source.1 > reach
            || source.0 - target.1 > reach
        {
            return Err(LppError::InvalidParams("no admissible path joins the two segments"));
        }
        Ok(Self {
            source_lo: source.0,
            source_hi: source.1,
            source_t,
            target_lo: target.0,
            target_hi: target.1,
            target_t,
            slope,
        })
    }

    /// Every path from the point `source` to the segment `[lo, hi]` at `t`.
    pub fn from_point(source: SpaceTime, target: (f64, f64), t: f64, slope: f64) -> Result<Self> {
        Self::new((source.x, source.x), source.t, target, t, slope)
    }

    /// Admissible `x` range at time `t`.
    pub fn x_range(&self, t: f64) -> (f64, f64) {
        let ahead = self.slope * (t - self.source_t);
        let behind = self.slope * (self.target_t - t);
        (
            (self.source_lo - ahead).max(self.target_lo - behind),
            (self.source_hi + ahead).min(self.target_hi + behind),
        )
    }

    /// Hull of the admissible `x` ranges over `[t0, t1]`.
    fn x_hull(&self, t0: f64, t1: f64) -> (f64, f64) {
        let m = self.slope;
        let lo_turn = (self.source_lo - self.target_lo + m * (self.source_t + self.target_t)) / (2.0 * m);
        let hi_turn = (self.target_hi - self.source_hi + m * (self.source_t + self.target_t)) / (2.0 * m);
        (self.x_range(lo_turn.clamp(t0, t1)).0, self.x_range(hi_turn.clamp(t0, t1)).1)
    }

    pub fn contains(&self, p: SpaceTime) -> bool {
        if p.t < self.source_t || p.t > self.target_t {
            return false;
        }
        let (lo, hi) = self.x_range(p.t);
        p.x >= lo && p.x <= hi
    }

    /// Smallest rectangle containing the domain.
    pub fn bounding_region(&self) -> Result<Region> {
        let (lo, hi) = self.x_hull(self.source_t, self.target_t);
        Region::new(lo, hi, self.source_t, self.target_t)
    }

    fn mapped(&self, f: impl Fn(f64) -> f64) -> Self {
        let (a, b) = (f(self.source_lo), f(self.source_hi));
        let (c, d) = (f(self.target_lo), f(self.target_hi));
        Self {
            source_lo: a.min(b),
            source_hi: a.max(b),
            target_lo: c.min(d),
            target_hi: c.max(d),
            ..*self
        }
    }
}

/// A realisation of a homogeneous Poisson process on a rectangle, optionally
/// restricted to a [`Domain`].
///
/// Points are stored sorted by time and no two points share an `x` or a `t`
/// coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonField {
    points: Vec<SpaceTime>,
    region: Region,
    domain: Option<Domain>,
    intensity: f64,
    seed: u64,
}

impl PoissonField {
    /// Builds a field from explicit points (used for fixtures and replay).
    pub fn from_points(region: Region, intensity: f64, seed: u64, points: Vec<SpaceTime>) -> Result<Self> {
        Self::from_parts(region, None, intensity, seed, points)
    }

    pub fn from_parts(
        region: Region,
        domain: Option<Domain>,
        intensity: f64,
        seed: u64,
        mut points: Vec<SpaceTime>,
    ) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(LppError::InvalidIntensity(intensity));
        }
        let inside = |p: &SpaceTime| region.contains(*p) && domain.is_none_or(|d| d.contains(*p));
        if let Some(p) = points.iter().find(|p| !inside(p)) {
            return Err(LppError::PointOutsideRegion { x: p.x, t: p.t });
        }
        points.sort_unstable_by(|a, b| a.t.total_cmp(&b.t));
        if duplicate_position(&points).is_some() {
            return Err(LppError::DuplicateCoordinate);
        }
        Ok(Self { points, region, domain, intensity, seed })
    }

    pub fn points(&self) -> &[SpaceTime] {
        &self.points
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn domain(&self) -> Option<Domain> {
        self.domain
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points inside `window` (which need not be inside the region).
    pub fn points_in(&self, window: &Region) -> impl Iterator<Item = SpaceTime> + '_ {
        let window = *window;
        self.points.iter().copied().filter(move |p| window.contains(*p))
    }

    /// The mirror image `x -> -x` of this field.
    pub fn reflected(&self) -> Self {
        let region = Region {
            x_min: -self.region.x_max,
            x_max: -self.region.x_min,
            ..self.region
        };
        let mut points: Vec<SpaceTime> = self.points.iter().map(|p| SpaceTime::new(-p.x, p.t)).collect();
        points.sort_unstable_by(|a, b| a.t.total_cmp(&b.t));
        let domain = self.domain.map(|d| d.mapped(|x| -x));
        Self { points, region, domain, intensity: self.intensity, seed: self.seed }
    }

    /// The field translated by `dx` in space.
    pub fn shifted(&self, dx: f64) -> Self {
        let region = Region {
            x_min: self.region.x_min + dx,
            x_max: self.region.x_max + dx,
            ..self.region
        };
        let points = self.points.iter().map(|p| SpaceTime::new(p.x + dx, p.t)).collect();
        let domain = self.domain.map(|d| d.mapped(|x| x + dx));
        Self { points, region, domain, intensity: self.intensity, seed: self.seed }
    }

    /// Serialises the field into the versioned little-endian binary layout
    /// `KPZF | version u16 | seed u64 | intensity f64 | region 4 x f64 |
    /// has_domain u8 | [domain 7 x f64] | count u64 | (x f64, t f64) * count`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIELD_HEADER_LEN + 16 * self.points.len());
        out.extend_from_slice(FIELD_MAGIC);
        out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.intensity.to_le_bytes());
        for v in [self.region.x_min, self.region.x_max, self.region.t_min, self.region.t_max] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        match self.domain {
            None => out.push(0),
            Some(d) => {
                out.push(1);
                let vals = [d.source_lo, d.source_hi, d.source_t, d.target_lo, d.target_hi, d.target_t, d.slope];
                for v in vals {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&(self.points.len() as u64).to_le_bytes());
        for p in &self.points {
            out.extend_from_slice(&p.x.to_le_bytes());
            out.extend_from_slice(&p.t.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = ByteCursor { bytes, pos: 0 };
        if cur.take(4)? != FIELD_MAGIC {
            return Err(LppError::Decode("bad magic"));
        }
        let version = u16::from_le_bytes(cur.array()?);
        if version != FIELD_VERSION {
            return Err(LppError::Decode("unsupported version"));
        }
        let seed = u64::from_le_bytes(cur.array()?);
        let intensity = cur.f64()?;
        let region = Region::new(cur.f64()?, cur.f64()?, cur.f64()?, cur.f64()?)?;
        let domain = match cur.take(1)?[0] {
            0 => None,
            1 => {
                let mut v = [0.0; 7];
                for slot in v.iter_mut() {
                    *slot = cur.f64()?;
                }
                Some(Domain::new((v[0], v[1]), v[2], (v[3], v[4]), v[5], v[6])?)
            }
            _ => return Err(LppError::Decode("bad domain flag")),
        };
        let count = u64::from_le_bytes(cur.array()?) as usize;
        if Some(bytes.len() - cur.pos) != count.checked_mul(16) {
            return Err(LppError::Decode("length does not match point count"));
        }
        let points = (0..count)
            .map(|_| Ok(SpaceTime::new(cur.f64()?, cur.f64()?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(region, domain, intensity, seed, points)
    }
}

const FIELD_MAGIC: &[u8; 4] = b"KPZF";
const FIELD_VERSION: u16 = 1;
const FIELD_HEADER_LEN: usize = 4 + 2 + 8 + 8 + 32 + 1 + 8;

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(LppError::Decode("truncated input"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

/// Points per time strip when generating a field in time order.
const STRIP_OCCUPANCY: f64 = 32.0;

/// Samples an intensity-`intensity` Poisson process on `region`.
///
/// The same `(region, intensity, seed)` always yields the same points. Points
/// are generated strip by strip in time so the output is time-sorted; the rare
/// exact coordinate collisions are rejected and redrawn.
pub fn sample_field(region: Region, intensity: f64, seed: u64) -> Result<PoissonField> {
    let region = Region::new(region.x_min, region.x_max, region.t_min, region.t_max)?;
    sample(region, None, intensity, seed)
}

/// Samples the Poisson process restricted to `domain` (on its bounding region).
pub fn sample_domain(domain: Domain, intensity: f64, seed: u64) -> Result<PoissonField> {
    sample(domain.bounding_region()?, Some(domain), intensity, seed)
}

fn sample(region: Region, domain: Option<Domain>, intensity: f64, seed: u64) -> Result<PoissonField> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(LppError::InvalidIntensity(intensity));
    }
    let mut rng = rng_from_seed(seed);
    let strips = Float::ceil(intensity * region.area() / STRIP_OCCUPANCY).clamp(1.0, (1u64 << 24) as f64) as usize;
    let dt = (region.t_max - region.t_min) / strips as f64;
    let strip_box = |j: usize| {
        let t0 = region.t_min + dt * j as f64;
        let t1 = if j + 1 == strips { region.t_max } else { t0 + dt };
        let (lo, hi) = match domain {
            None => (region.x_min, region.x_max),
            Some(d) => {
                let (lo, hi) = d.x_hull(t0, t1);
                (lo.max(region.x_min), hi.min(region.x_max))
            }
        };
        (lo, hi, t0, t1)
    };
    let keep = |p: SpaceTime| domain.is_none_or(|d| d.contains(p));

    let mut points = Vec::new();
    for j in 0..strips {
        let (lo, hi, t0, t1) = strip_box(j);
        if hi <= lo {
            continue;
        }
        let mean = intensity * (hi - lo) * (t1 - t0);
        let count = Poisson::new(mean).map_err(|_| LppError::InvalidIntensity(intensity))?.sample(&mut rng) as usize;
        let start = points.len();
        for _ in 0..count {
            let p = SpaceTime::new(lo + (hi - lo) * rng.random::<f64>(), t0 + (t1 - t0) * rng.random::<f64>());
            if keep(p) {
                points.push(p);
            }
        }
        points[start..].sort_unstable_by(|a, b| a.t.total_cmp(&b.t));
    }

    while let Some(dup) = duplicate_position(&points) {
        let strip = (((points[dup].t - region.t_min) / dt) as usize).min(strips - 1);
        let (lo, hi, t0, t1) = strip_box(strip);
        points[dup] = loop {
            let p = SpaceTime::new(lo + (hi - lo) * rng.random::<f64>(), t0 + (t1 - t0) * rng.random::<f64>());
            if keep(p) {
                break p;
            }
        };
        points.sort_unstable_by(|a, b| a.t.total_cmp(&b.t));
    }

    Ok(PoissonField { points, region, domain, intensity, seed })
}

/// Sorts by `cmp`, whose primary key must be `key`.
///
/// One counting pass scatters records into a few thousand equal-width bins of
/// the key range, so each bin fits in cache for its comparison sort. This
/// beats a global sort of large records several times over.
pub(crate) fn bucket_sort<T: Copy>(items: &mut Vec<T>, key: impl Fn(&T) -> f64, cmp: impl Fn(&T, &T) -> Ordering) {
    let n = items.len();
    let bins = (n / 512).clamp(1, 4096);
    if bins == 1 {
        items.sort_unstable_by(cmp);
        return;
    }
    let (lo, hi) = items.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), it| {
        let k = key(it);
        (lo.min(k), hi.max(k))
    });
    let scale = if hi > lo && (hi - lo).is_finite() { bins as f64 / (hi - lo) } else { 0.0 };
    let bin = |it: &T| (((key(it) - lo) * scale) as usize).min(bins - 1);
    let mut starts = vec![0usize; bins + 1];
    for it in items.iter() {
        starts[bin(it) + 1] += 1;
    }
    for b in 0..bins {
        starts[b + 1] += starts[b];
    }
    let mut fill = starts.clone();
    let mut out = Vec::with_capacity(n);
    out.resize(n, items[0]);
    for it in items.iter() {
        let b = bin(it);
        out[fill[b]] = *it;
        fill[b] += 1;
    }
    for b in 0..bins {
        out[starts[b]..starts[b + 1]].sort_unstable_by(&cmp);
    }
    *items = out;
}

/// Index of some point involved in an exact coordinate tie, if any.
fn duplicate_position(time_sorted: &[SpaceTime]) -> Option<usize> {
    if let Some(i) = time_sorted.windows(2).position(|w| w[0].t == w[1].t) {
        return Some(i + 1);
    }
    let mut xs: Vec<u64> = time_sorted.iter().map(|p| p.x.to_bits()).collect();
    xs.sort_unstable();
    let bits = xs.windows(2).find(|w| w[0] == w[1])?[0];
    time_sorted.iter().rposition(|p| p.x.to_bits() == bits)
}

/// Half-width of the shared strips used by [`coupled_fields`].
pub const STRIP_HALF_WIDTH: f64 = 1.0 / 3.0;

/// Samples `k + 1` fields where fields `1..=k` are independent and field 0
/// coincides with field `i` on the strip `[c_i - 1/3, c_i + 1/3] x [0, 1]`
/// and is independent of all of them elsewhere.
pub fn coupled_fields(
    k: usize,
    intensity: f64,
    region: Region,
    strip_centers: &[f64],
    seed: u64,
) -> Result<Vec<PoissonField>> {
    if strip_centers.len() != k {
        return Err(LppError::InvalidParams("need exactly one strip centre per coupled field"));
    }
    let strips: Vec<Region> = strip_centers
        .iter()
        .map(|&c| Region::new(c - STRIP_HALF_WIDTH, c + STRIP_HALF_WIDTH, 0.0, 1.0))
        .collect::<Result<_>>()?;
    for (s, &c) in strips.iter().zip(strip_centers) {
        if !region.contains_region(s) {
            return Err(LppError::StripOutsideRegion(c));
        }
    }
    let mut sorted: Vec<f64> = strip_centers.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    if let Some(w) = sorted.windows(2).find(|w| w[1] - w[0] < 2.0 * STRIP_HALF_WIDTH) {
        return Err(LppError::OverlappingStrips(w[0], w[1]));
    }

    let mut fields = Vec::with_capacity(k + 1);
    let base = sample_field(region, intensity, crate::rng::derive_seed(seed, &[0]))?;
    fields.push(base);
    for i in 1..=k {
        fields.push(sample_field(region, intensity, crate::rng::derive_seed(seed, &[i as u64]))?);
    }

    let in_any_strip = |p: &SpaceTime| strips.iter().any(|s| s.contains(*p));
    let mut merged: Vec<SpaceTime> = fields[0].points.iter().copied().filter(|p| !in_any_strip(p)).collect();
    for (i, strip) in strips.iter().enumerate() {
        merged.extend(fields[i + 1].points_in(strip));
    }
    fields[0] = PoissonField::from_points(region, intensity, seed, merged)
        .or_else(|_| resolve_merge_ties(region, intensity, seed, &fields[0], &strips, &fields[1..]))?;
    Ok(fields)
}

/// Merging independent samples can in principle create a coordinate tie; drop
/// the offending points of the independent background until none remain.
fn resolve_merge_ties(
    region: Region,
    intensity: f64,
    seed: u64,
    base: &PoissonField,
    strips: &[Region],
    coupled: &[PoissonField],
) -> Result<PoissonField> {
    let mut shared: Vec<SpaceTime> = Vec::new();
    for (i, strip) in strips.iter().enumerate() {
        shared.extend(coupled[i].points_in(strip));
    }
    let xs: Vec<u64> = shared.iter().map(|p| p.x.to_bits()).collect();
    let ts: Vec<u64> = shared.iter().map(|p| p.t.to_bits()).collect();
    let mut merged: Vec<SpaceTime> = base
        .points
        .iter()
        .copied()
        .filter(|p| !strips.iter().any(|s| s.contains(*p)))
        .filter(|p| !xs.contains(&p.x.to_bits()) && !ts.contains(&p.t.to_bits()))
        .collect();
    merged.extend(shared);
    PoissonField::from_points(region, intensity, seed, merged)
}

#[derive(Debug, Clone, Copy)]
struct SweepRecord {
    u: f64,
    v: f64,
    x: f64,
    t: f64,
    idx: u32,
}

/// Longest-chain data for every field point reachable from one source.
///
/// Entries are stored in sweep order (increasing sheared `u`, then `v`).
#[derive(Debug, Clone)]
pub struct ChainIndex {
    source: SpaceTime,
    slope: f64,
    xs: Vec<f64>,
    ts: Vec<f64>,
    chain: Vec<u32>,
    pred: Vec<u32>,
    order: Vec<u32>,
}

/// Marker for "no predecessor" in [`ChainIndex::predecessor`].
const NO_PRED: u32 = u32::MAX;

/// Builds the longest-chain index of `field` from `source` for `slope`-Lipschitz paths.
///
/// A point `(x', t')` is reachable when `t' >= s` and `|x' - x| <= m (t' - s)`.
/// Chain lengths count the point itself. Runs in `O(N log N)`.
pub fn chain_index(field: &PoissonField, source: SpaceTime, slope: f64) -> Result<ChainIndex> {
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(LppError::InvalidSlope(slope));
    }
    let mut recs: Vec<SweepRecord> = Vec::with_capacity(field.len());
    for (i, p) in field.points.iter().enumerate() {
        let dt = p.t - source.t;
        if dt < 0.0 {
            continue;
        }
        let dx = p.x - source.x;
        let reach = slope * dt;
        if dx.abs() <= reach {
            recs.push(SweepRecord { u: reach + dx, v: reach - dx, x: p.x, t: p.t, idx: i as u32 });
        }
    }
    bucket_sort(&mut recs, |r| r.u, |a, b| a.u.total_cmp(&b.u).then(a.v.total_cmp(&b.v)));

    let n = recs.len();
    let mut chain = Vec::with_capacity(n);
    let mut pred = Vec::with_capacity(n);
    let mut tails: Vec<f64> = Vec::new();
    let mut tail_owner: Vec<u32> = Vec::new();
    for (pos, r) in recs.iter().enumerate() {
        let v = r.v;
        let level = tails.partition_point(|&tv| tv <= v);
        pred.push(if level == 0 { NO_PRED } else { tail_owner[level - 1] });
        chain.push(level as u32 + 1);
        if level == tails.len() {
            tails.push(v);
            tail_owner.push(pos as u32);
        } else {
            tails[level] = v;
            tail_owner[level] = pos as u32;
        }
    }

    let order = recs.iter().map(|r| r.idx).collect();
    let xs = recs.iter().map(|r| r.x).collect();
    let ts = recs.iter().map(|r| r.t).collect();
    Ok(ChainIndex { source, slope, xs, ts, chain, pred, order })
}

impl ChainIndex {
    pub fn source(&self) -> SpaceTime {
        self.source
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Number of reachable points.
    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    /// Longest chain length over all indexed points.
    pub fn max_chain(&self) -> u32 {
        self.chain.iter().copied().max().unwrap_or(0)
    }

    /// Chain lengths in sweep order.
    pub fn chain_lengths(&self) -> &[u32] {
        &self.chain
    }

    /// Position of each sweep entry in the original field.
    pub fn field_order(&self) -> &[u32] {
        &self.order
    }

    pub fn point(&self, entry: usize) -> SpaceTime {
        SpaceTime::new(self.xs[entry], self.ts[entry])
    }

    pub fn predecessor(&self, entry: usize) -> Option<usize> {
        match self.pred[entry] {
            NO_PRED => None,
            p => Some(p as usize),
        }
    }

    /// Chain length of the field point with original position `field_pos`,
    /// or `None` when it is not reachable.
    pub fn chain_of_field_point(&self, field_pos: usize) -> Option<u32> {
        self.order.iter().position(|&o| o as usize == field_pos).map(|e| self.chain[e])
    }

    /// A maximal chain ending at `entry`, listed from the source side.
    pub fn geodesic_points(&self, entry: usize) -> Vec<SpaceTime> {
        let mut out = Vec::with_capacity(self.chain[entry] as usize);
        let mut cur = Some(entry);
        while let Some(e) = cur {
            out.push(self.point(e));
            cur = self.predecessor(e);
        }
        out.reverse();
        out
    }

    fn reaches(&self, target: SpaceTime) -> bool {
        (target.x - self.source.x).abs() <= self.slope * (target.t - self.source.t)
    }

    fn compatible(&self, entry: usize, target: SpaceTime) -> bool {
        let dt = target.t - self.ts[entry];
        dt >= 0.0 && (target.x - self.xs[entry]).abs() <= self.slope * dt
    }

    /// Maximal number of points collectable on the way to `target`
    /// (`None` when the target is not reachable at all).
    pub fn max_count_to(&self, target: SpaceTime) -> Option<u32> {
        if target.t < self.source.t || !self.reaches(target) {
            return None;
        }
        Some(
            (0..self.len())
                .filter(|&e| self.compatible(e, target))
                .map(|e| self.chain[e])
                .max()
                .unwrap_or(0),
        )
    }

    /// Batched [`ChainIndex::max_count_to`]: replays the sweep once and answers
    /// every target in `O((N + Q) log N)`.
    pub fn max_counts_to(&self, targets: &[SpaceTime]) -> Vec<Option<u32>> {
        let sheared = |p: SpaceTime| {
            let reach = self.slope * (p.t - self.source.t);
            let dx = p.x - self.source.x;
            (reach + dx, reach - dx)
        };
        let mut queries: Vec<(f64, f64, usize)> = targets
            .iter()
            .enumerate()
            .filter(|(_, q)| q.t >= self.source.t && self.reaches(**q))
            .map(|(i, q)| {
                let (u, v) = sheared(*q);
                (u, v, i)
            })
            .collect();
        queries.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let mut out = vec![None; targets.len()];
        let mut tails: Vec<f64> = Vec::new();
        let mut entry = 0;
        for (qu, qv, qi) in queries {
            while entry < self.len() {
                let (u, v) = sheared(self.point(entry));
                if u > qu {
                    break;
                }
                let level = tails.partition_point(|&tv| tv <= v);
                if level == tails.len() {
                    tails.push(v);
                } else {
                    tails[level] = v;
                }
                entry += 1;
            }
            out[qi] = Some(tails.partition_point(|&tv| tv <= qv) as u32);
        }
        out
    }

    /// Best chain over points from which some location in `[y_lo, y_hi]` at
    /// time `t` can be reached, together with the sweep entry that attains it.
    pub fn max_count_to_segment(&self, y_lo: f64, y_hi: f64, t: f64) -> (u32, Option<usize>) {
        let mut best = (0u32, None);
        for e in 0..self.len() {
            let dt = t - self.ts[e];
            if dt < 0.0 {
                continue;
            }
            let reach = self.slope * dt;
            if self.xs[e] - reach <= y_hi && self.xs[e] + reach >= y_lo && self.chain[e] > best.0 {
                best = (self.chain[e], Some(e));
            }
        }
        best
    }
}

/// `d_{m, lambda, ell, chi}(source; target)` from a prebuilt index.
///
/// Returns `f64::NEG_INFINITY` when no `m`-Lipschitz path reaches `target`.
pub fn passage_value(index: &ChainIndex, params: &LppParams, target: SpaceTime) -> Result<f64> {
    check_slope(index, params)?;
    let source = index.source();
    if target.t < source.t {
        return Err(LppError::TargetBeforeSource { origin: source.t, target: target.t });
    }
    Ok(match index.max_count_to(target) {
        None => f64::NEG_INFINITY,
        Some(c) => params.length(c as f64, target.t - source.t),
    })
}

fn check_slope(index: &ChainIndex, params: &LppParams) -> Result<()> {
    if index.slope() != params.slope {
        return Err(LppError::SlopeMismatch { index: index.slope(), params: params.slope });
    }
    Ok(())
}

/// Running maximum `t -> max_y d(source; y, t)` sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxProcess {
    pub source: SpaceTime,
    pub times: Vec<f64>,
    /// Recentred maxima `M(t)`.
    pub values: Vec<f64>,
    /// Raw maximal point counts behind `values`.
    pub counts: Vec<u32>,
    /// Endpoint of the preferred maximising chain.
    pub argmax: Vec<f64>,
    /// Smallest endpoint `x` among all maximising chains.
    pub inf_argmax: Vec<f64>,
    /// Largest endpoint `x` among all maximising chains.
    pub sup_argmax: Vec<f64>,
}

impl MaxProcess {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Clone, Copy)]
struct Best {
    count: u32,
    t: f64,
    x: f64,
    x_min: f64,
    x_max: f64,
}

impl Best {
    fn absorb(&mut self, count: u32, t: f64, x: f64) {
        if count > self.count {
            *self = Best { count, t, x, x_min: x, x_max: x };
        } else if count == self.count {
            if t < self.t || (t == self.t && x < self.x) {
                self.t = t;
                self.x = x;
            }
            self.x_min = self.x_min.min(x);
            self.x_max = self.x_max.max(x);
        }
    }

    fn merge(&mut self, other: &Best) {
        if other.count > self.count {
            *self = *other;
        } else if other.count == self.count && other.count > 0 {
            if other.t < self.t || (other.t == self.t && other.x < self.x) {
                self.t = other.t;
                self.x = other.x;
            }
            self.x_min = self.x_min.min(other.x_min);
            self.x_max = self.x_max.max(other.x_max);
        }
    }
}

/// Computes `M(t) = (max chain over points with t' <= t - ell (t - s)) / chi`
/// on `time_grid` in `O(N log G + G)`.
///
/// With no collectable point the empty path gives `M(t) = -ell (t - s) / chi`
/// and the argmax stays at the source.
pub fn running_max_process(
    index: &ChainIndex,
    params: &LppParams,
    time_grid: &[f64],
) -> Result<MaxProcess> {
    check_slope(index, params)?;
    if time_grid.is_empty() || time_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LppError::UnsortedGrid);
    }
    let source = index.source();
    let (first, last) = (time_grid[0], time_grid[time_grid.len() - 1]);
    if first < source.t {
        return Err(LppError::GridOutsideField { first, last, start: source.t, end: f64::INFINITY });
    }

    let empty = Best { count: 0, t: source.t, x: source.x, x_min: source.x, x_max: source.x };
    let mut buckets = vec![empty; time_grid.len()];
    for e in 0..index.len() {
        let t = index.ts[e];
        let g = time_grid.partition_point(|&tg| tg < t);
        if g < time_grid.len() {
            buckets[g].absorb(index.chain[e], t, index.xs[e]);
        }
    }

    let mut running = empty;
    let mut out = MaxProcess {
        source,
        times: time_grid.to_vec(),
        values: Vec::with_capacity(time_grid.len()),
        counts: Vec::with_capacity(time_grid.len()),
        argmax: Vec::with_capacity(time_grid.len()),
        inf_argmax: Vec::with_capacity(time_grid.len()),
        sup_argmax: Vec::with_capacity(time_grid.len()),
    };
    for (g, &t) in time_grid.iter().enumerate() {
        running.merge(&buckets[g]);
        out.counts.push(running.count);
        out.values.push(params.length(running.count as f64, t - source.t));
        out.argmax.push(running.x);
        out.inf_argmax.push(running.x_min);
        out.sup_argmax.push(running.x_max);
    }
    Ok(out)
}

/// Running-maximum process checked against the field's time extent.
pub fn running_max_process_in(
    field: &PoissonField,
    index: &ChainIndex,
    params: &LppParams,
    time_grid: &[f64],
) -> Result<MaxProcess> {
    if let (Some(&first), Some(&last)) = (time_grid.first(), time_grid.last()) {
        let r = field.region();
        if first < r.t_min || last > r.t_max {
            return Err(LppError::GridOutsideField { first, last, start: r.t_min, end: r.t_max });
        }
    }
    running_max_process(index, params, time_grid)
}

/// Result of a multi-source sweep for one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepHit {
    /// `max_i (w_i + count_i)` in point-count units.
    pub value: f64,
    /// Index of the source attaining the maximum.
    pub source: usize,
}

/// Fenwick tree for prefix maxima of `(value, source)` pairs.
struct PrefixMax {
    tree: Vec<(f64, u32)>,
}

impl PrefixMax {
    fn new(n: usize) -> Self {
        Self { tree: vec![(f64::NEG_INFINITY, u32::MAX); n + 1] }
    }

    fn better(a: (f64, u32), b: (f64, u32)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    fn update(&mut self, rank: usize, item: (f64, u32)) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            if Self::better(item, self.tree[i]) {
                self.tree[i] = item;
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Maximum over ranks `< upto`.
    fn query(&self, upto: usize) -> (f64, u32) {
        let mut best = (f64::NEG_INFINITY, u32::MAX);
        let mut i = upto;
        while i > 0 {
            if Self::better(self.tree[i], best) {
                best = self.tree[i];
            }
            i -= i & i.wrapping_neg();
        }
        best
    }
}

/// Evaluates `max_i w_i + #(best chain from (x_i, s) to target)` for many
/// weighted sources and targets in a single sweep.
///
/// `sources` are `(x_i, w_i)` pairs at the common time `source_time`, with
/// weights in point-count units (`-inf` weights are skipped). The answer for a
/// target is `None` when no source reaches it. Runs in `O((N + S + Q) log N)`.
pub fn multi_source_sweep(
    field: &PoissonField,
    slope: f64,
    source_time: f64,
    sources: &[(f64, f64)],
    targets: &[SpaceTime],
) -> Result<Vec<Option<SweepHit>>> {
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(LppError::InvalidSlope(slope));
    }
    const SOURCE: u8 = 0;
    const POINT: u8 = 1;
    const TARGET: u8 = 2;
    let shear = |x: f64, t: f64| {
        let reach = slope * (t - source_time);
        (reach + x, reach - x)
    };

    // (u, kind, v, id)
    let mut events: Vec<(f64, u8, f64, u32)> = Vec::with_capacity(field.len() + sources.len() + targets.len());
    for (i, &(x, w)) in sources.iter().enumerate() {
        if w > f64::NEG_INFINITY {
            let (u, v) = shear(x, source_time);
            events.push((u, SOURCE, v, i as u32));
        }
    }
    for p in field.points.iter().filter(|p| p.t >= source_time) {
        let (u, v) = shear(p.x, p.t);
        events.push((u, POINT, v, 0));
    }
    for (i, q) in targets.iter().enumerate() {
        if q.t >= source_time {
            let (u, v) = shear(q.x, q.t);
            events.push((u, TARGET, v, i as u32));
        }
    }
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));

    let mut vs: Vec<f64> = events.iter().filter(|e| e.1 != TARGET).map(|e| e.2).collect();
    vs.sort_unstable_by(f64::total_cmp);
    let rank_of = |v: f64| vs.partition_point(|&w| w < v);
    let rank_upto = |v: f64| vs.partition_point(|&w| w <= v);

    let mut tree = PrefixMax::new(vs.len());
    let mut out = vec![None; targets.len()];
    for &(_, kind, v, id) in &events {
        match kind {
            SOURCE => tree.update(rank_of(v), (sources[id as usize].1, id)),
            POINT => {
                let (best, src) = tree.query(rank_upto(v));
                if best > f64::NEG_INFINITY {
                    tree.update(rank_of(v), (best + 1.0, src));
                }
            }
            _ => {
                let (best, src) = tree.query(rank_upto(v));
                if best > f64::NEG_INFINITY {
                    out[id as usize] = Some(SweepHit { value: best, source: src as usize });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Region {
        Region::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    fn fixture(points: &[(f64, f64)]) -> PoissonField {
        let pts = points.iter().map(|&(x, t)| SpaceTime::new(x, t)).collect();
        PoissonField::from_points(Region::new(-2.0, 2.0, 0.0, 2.0).unwrap(), 1.0, 0, pts).unwrap()
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = sample_field(unit_square(), 5.0, 1).unwrap();
        let b = sample_field(unit_square(), 5.0, 1).unwrap();
        assert_eq!(a, b);
        assert!(a.points().iter().all(|p| unit_square().contains(*p)));
    }

    #[test]
    fn different_seeds_give_different_fields() {
        let a = sample_field(unit_square(), 10.0, 1).unwrap();
        let b = sample_field(unit_square(), 10.0, 2).unwrap();
        assert_ne!(a.points(), b.points());
    }

    #[test]
    fn prelimit_intensity_on_area_two_has_mean_256() {
        let params = LppParams::prelimit(8.0).unwrap();
        assert!((params.intensity - 128.0).abs() < 1e-9);
        assert!((params.slope - 1.0).abs() < 1e-12);
        assert!((params.drift - 16.0).abs() < 1e-12);
        assert!((params.scale - 2.0).abs() < 1e-12);
        let region = Region::new(0.0, 2.0, 0.0, 1.0).unwrap();
        let reps = 400;
        let total: usize = (0..reps).map(|s| sample_field(region, params.intensity, s).unwrap().len()).sum();
        let mean = total as f64 / reps as f64;
        // Poisson(256) mean over 400 draws has standard error 0.8.
        assert!((mean - 256.0).abs() < 4.0, "mean count {mean}");
    }

    #[test]
    fn field_points_are_time_sorted_without_ties() {
        let f = sample_field(Region::new(-3.0, 3.0, 0.0, 1.0).unwrap(), 2000.0, 9).unwrap();
        assert!(f.points().windows(2).all(|w| w[0].t < w[1].t));
        assert!(duplicate_position(f.points()).is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(sample_field(unit_square(), 0.0, 1), Err(LppError::InvalidIntensity(_))));
        assert!(matches!(sample_field(unit_square(), -1.0, 1), Err(LppError::InvalidIntensity(_))));
        assert!(matches!(Region::new(0.0, 0.0, 0.0, 1.0), Err(LppError::EmptyRegion { .. })));
        assert!(chain_index(&fixture(&[]), SpaceTime::new(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn empty_field_has_empty_index() {
        let idx = chain_index(&fixture(&[]), SpaceTime::new(0.0, 0.0), 1.0).unwrap();
        assert!(idx.is_empty());
        let params = LppParams::new(1.0, 1.0, 3.0, 2.0).unwrap();
        let v = passage_value(&idx, &params, SpaceTime::new(0.0, 1.0)).unwrap();
        assert_eq!(v, -1.5);
    }

    #[test]
    fn single_reachable_point() {
        let idx = chain_index(&fixture(&[(0.1, 0.25)]), SpaceTime::new(0.0, 0.0), 1.0).unwrap();
        assert_eq!(idx.chain_lengths(), &[1]);
        // |0.5| > 1 * 0.25: outside the cone.
        let idx = chain_index(&fixture(&[(0.5, 0.25)]), SpaceTime::new(0.0, 0.0), 1.0).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.max_count_to(SpaceTime::new(0.5, 1.0)), Some(0));
    }

    #[test]
    fn equal_times_do_not_chain() {
        let field = fixture(&[(-0.4, 0.5), (0.4, 0.5000000001)]);
        let idx = chain_index(&field, SpaceTime::new(0.0, 0.0), 1.0).unwrap();
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.max_chain(), 1);
    }

    #[test]
    fn three_points_on_a_chain() {
        let field = fixture(&[(0.0, 0.1), (0.05, 0.2), (0.01, 0.3)]);
        let idx = chain_index(&field, SpaceTime::new(0.0, 0.0), 1.0).unwrap();
        let params = LppParams::new(1.0, 1.0, 4.0, 2.0).unwrap();
        let v = passage_value(&idx, &params, SpaceTime::new(0.0, 0.5)).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unreachable_target_is_sentinel_and_past_target_is_error() {
        let idx = chain_index(&fixture(&[]), SpaceTime::new(0.0, 0.0), 1.0).unwrap();
        let params = LppParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(passage_value(&idx, &params, SpaceTime::new(2.0, 1.0)).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(
            passage_value(&idx, &params, SpaceTime::new(0.0, -1.0)),
            Err(LppError::TargetBeforeSource { .. })
        ));
    }

    #[test]
    fn slope_exactly_m_is_admissible() {
        let field = fixture(&[(0.25, 0.25), (0.5, 0.5)]);
        let idx = chain_index(&field, SpaceTime::new(0.0, 0.0), 1.0).unwrap();
        assert_eq!(idx.max_chain(), 2);
        assert_eq!(idx.geodesic_points(1).len(), 2);
    }

    #[test]
    fn running_max_of_empty_field_is_drift_line() {
        let idx = chain_index(&fixture(&[]), SpaceTime::new(0.0, 0.0), 1.0).unwrap();
        let params = LppParams::new(1.0, 1.0, 2.0, 4.0).unwrap();
        let grid = [0.25, 0.5, 1.0];
        let mp = running_max_process(&idx, &params, &grid).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            assert_eq!(mp.values[i], -2.0 * t / 4.0);
            assert_eq!(mp.argmax[i], 0.0);
        }
    }

    #[test]
    fn running_max_single_point_jump() {
        let idx = chain_index(&fixture(&[(0.1, 0.3)]), SpaceTime::new(0.0, 0.0), 1.0).unwrap();
        let params = LppParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let grid = [0.1, 0.2, 0.29, 0.3, 0.5, 0.9];
        let mp = running_max_process(&idx, &params, &grid).unwrap();
        assert_eq!(mp.values, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(mp.argmax, vec![0.0, 0.0, 0.0, 0.1, 0.1, 0.1]);
    }

    #[test]
    fn running_max_rejects_bad_grids() {
        let field = fixture(&[]);
        let idx = chain_index(&field, SpaceTime::new(0.0, 0.0), 1.0).unwrap();
        let params = LppParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(running_max_process(&idx, &params, &[0.5, 0.5]), Err(LppError::UnsortedGrid)));
        assert!(matches!(
            running_max_process_in(&field, &idx, &params, &[0.5, 3.0]),
            Err(LppError::GridOutsideField { .. })
        ));
        let other = LppParams::new(2.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(running_max_process(&idx, &other, &[0.5]), Err(LppError::SlopeMismatch { .. })));
    }

    #[test]
    fn coupled_fields_share_strips() {
        let region = Region::new(-1.0, 4.0, 0.0, 1.0).unwrap();
        let fields = coupled_fields(2, 200.0, region, &[1.0, 2.0], 5).unwrap();
        assert_eq!(fields.len(), 3);
        for (i, c) in [1.0, 2.0].iter().enumerate() {
            let strip = Region::new(c - STRIP_HALF_WIDTH, c + STRIP_HALF_WIDTH, 0.0, 1.0).unwrap();
            let a: Vec<_> = fields[0].points_in(&strip).collect();
            let b: Vec<_> = fields[i + 1].points_in(&strip).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn coupled_fields_reject_overlap() {
        let region = Region::new(-1.0, 4.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            coupled_fields(2, 10.0, region, &[1.0, 1.5], 5),
            Err(LppError::OverlappingStrips(..))
        ));
        assert!(matches!(
            coupled_fields(1, 10.0, region, &[3.9], 5),
            Err(LppError::StripOutsideRegion(_))
        ));
    }

    #[test]
    fn binary_round_trip() {
        let f = sample_field(Region::new(-1.0, 1.0, 0.0, 0.5).unwrap(), 300.0, 3).unwrap();
        let bytes = f.to_bytes();
        assert_eq!(PoissonField::from_bytes(&bytes).unwrap(), f);
        assert!(PoissonField::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(PoissonField::from_bytes(&bad).is_err());
    }

    #[test]
    fn bucket_sort_matches_comparison_sort() {
        use rand::Rng;
        let mut rng = rng_from_seed(3);
        let mut a: Vec<(f64, f64)> = (0..50_000)
            .map(|i| {
                let k = if i % 5 == 0 { 0.5 } else { (rng.random::<f64>() * 10.0).powi(3) };
                (k, rng.random())
            })
            .collect();
        let mut b = a.clone();
        let cmp = |x: &(f64, f64), y: &(f64, f64)| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1));
        bucket_sort(&mut a, |x| x.0, cmp);
        b.sort_unstable_by(cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn batched_counts_match_scans() {
        let region = Region::new(-3.0, 3.0, 0.0, 1.0).unwrap();
        let field = sample_field(region, 400.0, 11).unwrap();
        let idx = chain_index(&field, SpaceTime::new(0.0, 0.0), 2.0).unwrap();
        let targets: Vec<SpaceTime> = (0..41)
            .map(|j| SpaceTime::new(-2.5 + 0.125 * j as f64, 0.3 + 0.7 * ((j * 7) % 41) as f64 / 41.0))
            .collect();
        let batched = idx.max_counts_to(&targets);
        for (q, b) in targets.iter().zip(batched) {
            assert_eq!(idx.max_count_to(*q), b);
        }
    }

    #[test]
    fn multi_source_with_one_source_matches_chain_index() {
        let region = Region::new(-3.0, 3.0, 0.0, 1.0).unwrap();
        let field = sample_field(region, 300.0, 4).unwrap();
        let idx = chain_index(&field, SpaceTime::new(0.2, 0.0), 2.0).unwrap();
        let targets: Vec<SpaceTime> = (0..30).map(|j| SpaceTime::new(-1.5 + 0.1 * j as f64, 0.9)).collect();
        let hits = multi_source_sweep(&field, 2.0, 0.0, &[(0.2, 0.0)], &targets).unwrap();
        for (q, h) in targets.iter().zip(hits) {
            assert_eq!(idx.max_count_to(*q).map(f64::from), h.map(|h| h.value));
        }
    }
}
