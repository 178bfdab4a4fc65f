//! Fredholm determinants for the Tracy-Widom GUE law and for the law of the
//! maximum of the KPZ fixed point from narrow-wedge initial data.
//!
//! Everything is a Nystrom discretisation `det(I + W^{1/2} K W^{1/2})` on a
//! composite Gauss-Legendre rule, accepted only once doubling the node count
//! moves it by less than [`LADDER_TOLERANCE`].
//!
//! The hypo kernel of `f = max_i (h_i at x_i)` is
//! `Gamma S*_{t,l1} P^Hit S_{t,-l2} Gamma` on an interval `[l1, l2]` around the
//! wedges, where `P^Hit(u1, u2)` is the heat kernel times the probability that
//! the bridge between `u1` and `u2` drops to or below some `h_i`. Epi kernels
//! are reflections `rho K^{hypo(-g)} rho`. The maximum over `[-1, 1]` is
//! `det(I - K^{hypo(h0)}_{1/2} K^{epi(g_a)}_{-1/2})` with `g_a = a` on
//! `[-1, 1]`.

pub mod airy;
pub mod gaussian;
pub mod quadrature;

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_traits::Float;
use serde::{Deserialize, Serialize};

pub use airy::{airy, airy_pair};
pub use gaussian::{heat_kernel, normal_cdf, Bridge};
pub use quadrature::{integrate_adaptive, QuadratureRule};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FredholmError {
    #[error("{what} {value} out of range")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("determinant not converged at {nodes} nodes (last change {change:e})")]
    NotConverged { nodes: usize, change: f64 },
    #[error("{0} wedges requested, at most 3 supported")]
    TooManyWedges(usize),
    #[error("no wedges given")]
    NoWedges,
    #[error("wedge at {x} outside [{lo}, {hi}]")]
    WedgeOutside { x: f64, lo: f64, hi: f64 },
    #[error("wedge positions must be finite and distinct")]
    BadWedges,
    #[error("wedge height {0} must be finite and at most 0")]
    BadHeight(f64),
    #[error("conjugation coefficient {0} outside (0, sqrt(2)/3)")]
    BadKappa(f64),
    #[error("invalid quadrature rule: {0}")]
    InvalidRule(&'static str),
    #[error("invalid kernel: {0}")]
    InvalidKernel(&'static str),
    #[error("kernel matrix has non-finite entries")]
    NonFinite,
}

pub type Result<T> = core::result::Result<T, FredholmError>;

/// Conjugation coefficient of `Gamma(z) = exp(kappa sgn(z) |z|^{3/2})`.
pub const KAPPA: f64 = 0.3;
/// Half width of the truncated `z` interval.
pub const TRUNCATION: f64 = 12.0;
/// Distance from the outermost wedge to the ends of `[l1, l2]`.
pub const WEDGE_MARGIN: f64 = 0.5;
/// Node counts tried when accepting a determinant.
pub const NODE_LADDER: [usize; 4] = [50, 100, 200, 400];
pub const LADDER_TOLERANCE: f64 = 1e-6;

const Z_PANELS: usize = 10;
const AIRY_PANELS: usize = 5;
const U_PANELS: usize = 8;
const U_BELOW: f64 = 12.0;
const U_ABOVE: f64 = 14.0;
const U_SLOPE: f64 = 2.0;

/// Narrow wedge of height `height` at `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wedge {
    pub x: f64,
    pub height: f64,
}

impl Wedge {
    pub fn new(x: f64, height: f64) -> Self {
        Wedge { x, height }
    }
}

#[derive(Clone, Debug)]
pub enum KernelKind {
    /// Airy kernel on `(s, infinity)`.
    AiryKernel { s: f64 },
    /// Hypo kernel of the wedges.
    HypoWedges { wedges: Vec<Wedge>, ell: (f64, f64) },
    /// Epi kernel of `g` with `g(x_i) = h_i` and `+infinity` elsewhere.
    EpiWedges { wedges: Vec<Wedge>, ell: (f64, f64) },
    /// Epi kernel of `g_a = a` on `[-1, 1]`.
    EpiConstantBarrier { a: f64 },
    /// Bridge no-hit kernel in the endpoint variables `(u1, u2)` for the level `-a`.
    NoHitBarrier { a: f64, ell: (f64, f64) },
    /// Operator product, sharing the outer rule as the inner variable.
    Composed(Box<KernelSpec>, Box<KernelSpec>),
    /// Closed-form kernel on an interval.
    Custom { kernel: fn(f64, f64) -> f64, domain: (f64, f64) },
}

/// An integral operator with its conjugation and truncation settings. The
/// represented operator is `coefficient` times the one named by `kind`.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub t: f64,
    pub kappa: f64,
    pub truncation: f64,
    pub coefficient: f64,
}

/// An accepted determinant and the ladder step that accepted it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Determinant {
    pub value: f64,
    pub nodes: usize,
    pub change: f64,
}

impl KernelSpec {
    fn with_kind(kind: KernelKind, t: f64) -> Self {
        KernelSpec { kind, t, kappa: KAPPA, truncation: TRUNCATION, coefficient: 1.0 }
    }

    pub fn airy_kernel(s: f64) -> Self {
        Self::with_kind(KernelKind::AiryKernel { s }, 1.0)
    }

    /// `ell = None` places `[l1, l2]` at [`WEDGE_MARGIN`] around the wedges.
    pub fn hypo_wedges(wedges: &[Wedge], ell: Option<(f64, f64)>, t: f64) -> Result<Self> {
        let (wedges, ell) = checked_wedges(wedges, ell)?;
        Ok(Self::with_kind(KernelKind::HypoWedges { wedges, ell }, t))
    }

    /// Epi kernel at time `t < 0` of the function equal to `h_i` at each `x_i`.
    pub fn epi_wedges(wedges: &[Wedge], ell: Option<(f64, f64)>, t: f64) -> Result<Self> {
        let (wedges, ell) = checked_wedges(wedges, ell)?;
        Ok(Self::with_kind(KernelKind::EpiWedges { wedges, ell }, t))
    }

    pub fn epi_constant_barrier(a: f64, t: f64) -> Self {
        Self::with_kind(KernelKind::EpiConstantBarrier { a }, t)
    }

    pub fn composed(left: KernelSpec, right: KernelSpec) -> Self {
        let (kappa, truncation) = (left.kappa, left.truncation);
        KernelSpec {
            kind: KernelKind::Composed(Box::new(left), Box::new(right)),
            t: 0.0,
            kappa,
            truncation,
            coefficient: 1.0,
        }
    }

    pub fn custom(kernel: fn(f64, f64) -> f64, domain: (f64, f64)) -> Self {
        Self::with_kind(KernelKind::Custom { kernel, domain }, 0.0)
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.coefficient *= c;
        self
    }

    /// Sets the conjugation coefficient, here and in composed factors.
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        if let KernelKind::Composed(a, b) = self.kind {
            self.kind = KernelKind::Composed(Box::new(a.with_kappa(kappa)), Box::new(b.with_kappa(kappa)));
        }
        self
    }

    /// Sets the truncation, here and in composed factors.
    pub fn with_truncation(mut self, truncation: f64) -> Self {
        self.truncation = truncation;
        if let KernelKind::Composed(a, b) = self.kind {
            self.kind = KernelKind::Composed(
                Box::new(a.with_truncation(truncation)),
                Box::new(b.with_truncation(truncation)),
            );
        }
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < Float::sqrt(2.0) / 3.0) {
            return Err(FredholmError::BadKappa(self.kappa));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(FredholmError::InvalidKernel("truncation must be positive"));
        }
        match &self.kind {
            KernelKind::HypoWedges { .. } | KernelKind::EpiWedges { .. } | KernelKind::EpiConstantBarrier { .. }
                if self.t == 0.0 || !self.t.is_finite() =>
            {
                Err(FredholmError::InvalidKernel("time must be nonzero"))
            }
            KernelKind::Composed(a, b) => {
                a.validate()?;
                b.validate()
            }
            _ => Ok(()),
        }
    }

    /// Natural rule for this kernel with about `nodes` nodes.
    pub fn default_rule(&self, nodes: usize) -> Result<QuadratureRule> {
        let l = self.truncation;
        match &self.kind {
            KernelKind::AiryKernel { s } => QuadratureRule::panels(*s, s.max(0.0) + l, AIRY_PANELS, nodes),
            KernelKind::Custom { domain, .. } => QuadratureRule::panels(domain.0, domain.1, AIRY_PANELS, nodes),
            KernelKind::NoHitBarrier { a, .. } if -a > -l && -a < l => {
                QuadratureRule::composite(&[-l, -a, l], nodes.div_ceil(2))
            }
            _ => QuadratureRule::panels(-l, l, Z_PANELS, nodes),
        }
    }

    /// Pointwise value, for kernels with a closed form.
    pub fn eval(&self, x: f64, y: f64) -> Option<f64> {
        let v = match &self.kind {
            KernelKind::AiryKernel { .. } => airy_kernel(x, y),
            KernelKind::NoHitBarrier { a, ell } => no_hit_density(*a, *ell, x, y),
            KernelKind::Custom { kernel, .. } => kernel(x, y),
            _ => return None,
        };
        Some(self.coefficient * v)
    }

    /// Kernel values `K(x_i, x_j)` at the rule's nodes, without weights.
    pub fn matrix(&self, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
        self.validate()?;
        let z = rule.nodes();
        let inner = inner_per_panel(rule.len());
        let m = match &self.kind {
            KernelKind::AiryKernel { .. } | KernelKind::NoHitBarrier { .. } | KernelKind::Custom { .. } => {
                DMatrix::from_fn(z.len(), z.len(), |i, j| self.eval(z[i], z[j]).unwrap_or(0.0))
            }
            KernelKind::HypoWedges { wedges, ell } => {
                self.coefficient * hypo_matrix(wedges, *ell, self.t.abs(), self.kappa, z, inner)
            }
            KernelKind::EpiWedges { wedges, ell } => {
                let negated: Vec<Wedge> = wedges.iter().map(|w| Wedge::new(w.x, -w.height)).collect();
                let flipped: Vec<f64> = z.iter().map(|v| -v).collect();
                self.coefficient * hypo_matrix(&negated, *ell, self.t.abs(), self.kappa, &flipped, inner)
            }
            KernelKind::EpiConstantBarrier { a } => {
                let flipped: Vec<f64> = z.iter().map(|v| -v).collect();
                self.coefficient * barrier_matrix(*a, self.t.abs(), self.kappa, &flipped, inner)
            }
            KernelKind::Composed(a, b) => {
                let left = a.matrix(rule)?;
                let right = b.matrix(rule)?;
                let w = nalgebra::DVector::from_column_slice(rule.weights());
                let mut scaled = right;
                for (i, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= w[i];
                }
                self.coefficient * (left * scaled)
            }
        };
        if m.iter().any(|v| !v.is_finite()) {
            return Err(FredholmError::NonFinite);
        }
        Ok(m)
    }
}

fn checked_wedges(wedges: &[Wedge], ell: Option<(f64, f64)>) -> Result<(Vec<Wedge>, (f64, f64))> {
    if wedges.is_empty() {
        return Err(FredholmError::NoWedges);
    }
    if wedges.len() > 3 {
        return Err(FredholmError::TooManyWedges(wedges.len()));
    }
    let mut sorted = wedges.to_vec();
    if sorted.iter().any(|w| !w.x.is_finite() || !w.height.is_finite()) {
        return Err(FredholmError::BadWedges);
    }
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    if sorted.windows(2).any(|p| p[0].x == p[1].x) {
        return Err(FredholmError::BadWedges);
    }
    let (first, last) = (sorted[0].x, sorted[sorted.len() - 1].x);
    let ell = ell.unwrap_or((first - WEDGE_MARGIN, last + WEDGE_MARGIN));
    if !(ell.0 < ell.1) {
        return Err(FredholmError::InvalidKernel("empty bridge interval"));
    }
    for w in &sorted {
        if w.x < ell.0 || w.x > ell.1 {
            return Err(FredholmError::WedgeOutside { x: w.x, lo: ell.0, hi: ell.1 });
        }
    }
    Ok((sorted, ell))
}

fn inner_per_panel(outer: usize) -> usize {
    (outer / 4).clamp(16, 100)
}

/// `(Ai(x) Ai'(y) - Ai'(x) Ai(y)) / (x - y)`, with the diagonal limit.
pub fn airy_kernel(x: f64, y: f64) -> f64 {
    let (ax, apx) = airy_pair(x);
    if x == y {
        return apx * apx - x * ax * ax;
    }
    let (ay, apy) = airy_pair(y);
    (ax * apy - apx * ay) / (x - y)
}

/// `S_{t,x}(z) = t^{-1/3} exp(2x^3/(3t^2) - zx/t) Ai(-t^{-1/3} z + t^{-4/3} x^2)`.
pub fn s_kernel(t: f64, x: f64, z: f64) -> f64 {
    let c = Float::cbrt(t);
    let ai = airy_pair(-z / c + x * x / (c * c * c * c)).0;
    if ai == 0.0 {
        return 0.0;
    }
    Float::exp(2.0 * x * x * x / (3.0 * t * t) - z * x / t) * ai / c
}

/// `exp(kappa sgn(z) |z|^{3/2})`.
pub fn gamma_conjugation(kappa: f64, z: f64) -> f64 {
    Float::exp(kappa * z.signum() * Float::powf(z.abs(), 1.5))
}

/// Heat kernel on `[l1, l2]` times the probability that the bridge between
/// `u1` and `u2` stays strictly above `-a`.
pub fn no_hit_density(a: f64, ell: (f64, f64), u1: f64, u2: f64) -> f64 {
    if u1 <= -a || u2 <= -a {
        return 0.0;
    }
    let len = ell.1 - ell.0;
    let cross = -(u1 + a) * (u2 + a) / len;
    -heat_kernel(len, u1, u2) * Float::exp_m1(cross)
}

/// `gamma(z_i) [S*_{t,l1} P^Hit S_{t,-l2}](z_i, z_j) gamma(z_j)` at the points `z`.
fn hypo_matrix(wedges: &[Wedge], ell: (f64, f64), t: f64, kappa: f64, z: &[f64], per_panel: usize) -> DMatrix<f64> {
    let (l1, l2) = ell;
    let top = wedges.iter().fold(0.0f64, |m, w| m.max(w.height));
    let u = u_rule(z, top, None, per_panel);
    let un = u.nodes();
    let uw = u.weights();
    let n = un.len();
    let hit = DMatrix::from_fn(n, n, |i, j| {
        let p = heat_kernel(l2 - l1, un[i], un[j]);
        if p == 0.0 {
            return 0.0;
        }
        uw[i] * uw[j] * p * Bridge::new(l1, un[i], l2, un[j]).hit(wedges)
    });
    sandwich(&hit, un, z, t, l1, -l2, kappa)
}

/// Hypo kernel of `-g_a` on `[-1, 1]` at the points `z`.
fn barrier_matrix(a: f64, t: f64, kappa: f64, z: &[f64], per_panel: usize) -> DMatrix<f64> {
    let u = u_rule(z, -a, Some(-a), per_panel);
    let un = u.nodes();
    let uw = u.weights();
    let n = un.len();
    let q = DMatrix::from_fn(n, n, |i, j| {
        let (u1, u2) = (un[i], un[j]);
        let v = if u1 <= -a || u2 <= -a {
            heat_kernel(2.0, u1, u2)
        } else {
            Float::exp(-(u1 + u2 + 2.0 * a) * (u1 + u2 + 2.0 * a) / 8.0) / Float::sqrt(8.0 * PI)
        };
        uw[i] * uw[j] * v
    });
    sandwich(&q, un, z, t, -1.0, -1.0, kappa)
}

/// Rule for the bridge endpoints. The integrands peak near `u1 + u2 = 2 level + 8`,
/// so the upper end moves up with the highest barrier or wedge level.
fn u_rule(z: &[f64], level: f64, kink: Option<f64>, per_panel: usize) -> QuadratureRule {
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min) - U_BELOW;
    let hi = U_ABOVE + U_SLOPE * level.max(0.0);
    let breaks: Vec<f64> = match kink {
        Some(k) if k > lo + 1.0 && k < hi - 1.0 => {
            let half = U_PANELS / 2 + 2;
            let mut b: Vec<f64> = (0..=half).map(|i| lo + (k - lo) * i as f64 / half as f64).collect();
            b.extend((1..=half).map(|i| k + (hi - k) * i as f64 / half as f64));
            b
        }
        _ => (0..=U_PANELS).map(|i| lo + (hi - lo) * i as f64 / U_PANELS as f64).collect(),
    };
    QuadratureRule::composite(&breaks, per_panel).expect("increasing breaks")
}

/// `gamma S*_{t,x1} M S_{t,x2} gamma` with `S*(z, u) = S_{t,x1}(u - z)` and `S(u, z) = S_{t,x2}(u - z)`.
fn sandwich(m: &DMatrix<f64>, u: &[f64], z: &[f64], t: f64, x1: f64, x2: f64, kappa: f64) -> DMatrix<f64> {
    let left = DMatrix::from_fn(u.len(), z.len(), |i, j| s_kernel(t, x1, u[i] - z[j]) * gamma_conjugation(kappa, z[j]));
    let right = DMatrix::from_fn(u.len(), z.len(), |i, j| s_kernel(t, x2, u[i] - z[j]) * gamma_conjugation(kappa, z[j]));
    left.transpose() * (m * right)
}

/// Nystrom value `det(I + W^{1/2} K W^{1/2})` on one rule.
pub fn nystrom_det(kernel: &KernelSpec, rule: &QuadratureRule) -> Result<f64> {
    let k = kernel.matrix(rule)?;
    Ok(weighted(&k, rule, true).determinant())
}

fn weighted(k: &DMatrix<f64>, rule: &QuadratureRule, add_identity: bool) -> DMatrix<f64> {
    let s: Vec<f64> = rule.weights().iter().map(|w| Float::sqrt(*w)).collect();
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
        let id = if add_identity && i == j { 1.0 } else { 0.0 };
        id + s[i] * k[(i, j)] * s[j]
    })
}

/// `det(I + K)` starting from `rule` and doubling the node count until two
/// successive values agree to [`LADDER_TOLERANCE`], up to the last rung of
/// [`NODE_LADDER`].
pub fn fredholm_det(kernel: &KernelSpec, rule: &QuadratureRule) -> Result<Determinant> {
    let max = NODE_LADDER[NODE_LADDER.len() - 1];
    let mut rule = rule.clone();
    let mut prev = nystrom_det(kernel, &rule)?;
    loop {
        let next_rule = rule.with_nodes(2 * rule.len());
        if next_rule.len() > max {
            return Err(FredholmError::NotConverged { nodes: rule.len(), change: f64::NAN });
        }
        let next = nystrom_det(kernel, &next_rule)?;
        let change = (next - prev).abs();
        if change < LADDER_TOLERANCE {
            return Ok(Determinant { value: next, nodes: next_rule.len(), change });
        }
        if 2 * next_rule.len() > max {
            return Err(FredholmError::NotConverged { nodes: next_rule.len(), change });
        }
        rule = next_rule;
        prev = next;
    }
}

/// Sum of singular values of `W^{1/2} K W^{1/2}`.
pub fn nuclear_norm(kernel: &KernelSpec, rule: &QuadratureRule) -> Result<f64> {
    let k = kernel.matrix(rule)?;
    let m = weighted(&k, rule, false);
    Ok(m.singular_values().iter().sum())
}

/// Tracy-Widom GUE distribution function on `[-10, 6]`.
pub fn tracy_widom_gue_cdf(s: f64) -> Result<f64> {
    Ok(tracy_widom_gue(s)?.value)
}

/// As [`tracy_widom_gue_cdf`], with the ladder details.
pub fn tracy_widom_gue(s: f64) -> Result<Determinant> {
    if !(-10.0..=6.0).contains(&s) {
        return Err(FredholmError::OutOfRange { what: "Tracy-Widom argument", value: s });
    }
    let kernel = KernelSpec::airy_kernel(s).scaled(-1.0);
    let mut d = fredholm_det(&kernel, &kernel.default_rule(NODE_LADDER[0])?)?;
    d.value = d.value.clamp(0.0, 1.0);
    Ok(d)
}

/// Kernel of [`no_hit_density`] for the level `-a` on `[ell.0, ell.1]`.
pub fn barrier_no_hit_kernel(a: f64, ell: (f64, f64)) -> KernelSpec {
    KernelSpec::with_kind(KernelKind::NoHitBarrier { a, ell }, ell.1 - ell.0)
}

/// Hypo kernel at time `t` of narrow wedges with the given heights, bridged
/// over `ell` (default: [`WEDGE_MARGIN`] beyond the outer wedges).
pub fn wedge_hypo_kernel(wedges: &[Wedge], t: f64, ell: Option<(f64, f64)>) -> Result<KernelSpec> {
    KernelSpec::hypo_wedges(wedges, ell, t)
}

fn checked_initial_wedges(h0: &[Wedge]) -> Result<()> {
    for w in h0 {
        if !(w.height <= 0.0 && w.height.is_finite()) {
            return Err(FredholmError::BadHeight(w.height));
        }
        if !(-1.0..=1.0).contains(&w.x) {
            return Err(FredholmError::WedgeOutside { x: w.x, lo: -1.0, hi: 1.0 });
        }
    }
    Ok(())
}

/// Kernel of `det(I - K^{hypo(h0)}_{1/2} K^{epi(g_a)}_{-1/2})`.
pub fn max_kernel(h0: &[Wedge], a: f64) -> Result<KernelSpec> {
    checked_initial_wedges(h0)?;
    if !a.is_finite() {
        return Err(FredholmError::OutOfRange { what: "barrier level", value: a });
    }
    let hypo = KernelSpec::hypo_wedges(h0, None, 0.5)?;
    Ok(KernelSpec::composed(hypo, KernelSpec::epi_constant_barrier(a, -0.5)).scaled(-1.0))
}

/// Below this rigorous upper bound [`max_cdf`] reports 0 without a determinant.
pub const TAIL_CUTOFF: f64 = 1e-9;

/// `P(max_{[-1,1]} h(1, .; h0) <= a)` for wedge initial data with heights <= 0.
///
/// Since the maximum is at least `h(1, x_i) = h_i + TW`, the value is at most
/// `F2(a - h_i)` for every wedge. Deep in the lower tail, where that bound is
/// below [`TAIL_CUTOFF`] and the determinant is dominated by cancellation, the
/// result is 0 with `nodes == 0`.
pub fn max_cdf(h0: &[Wedge], a: f64) -> Result<Determinant> {
    let kernel = max_kernel(h0, a)?;
    if tail_bound(h0, a)? < TAIL_CUTOFF {
        return Ok(Determinant { value: 0.0, nodes: 0, change: 0.0 });
    }
    let mut d = fredholm_det(&kernel, &kernel.default_rule(NODE_LADDER[0])?)?;
    d.value = clamp_probability(d.value);
    Ok(d)
}

/// `min_i F2(a - h_i)`, an upper bound for [`max_cdf`].
pub fn tail_bound(h0: &[Wedge], a: f64) -> Result<f64> {
    let mut bound = 1.0f64;
    for w in h0 {
        let s = a - w.height;
        if s <= 6.0 {
            bound = bound.min(tracy_widom_gue_cdf(s.max(-10.0))?);
        }
    }
    Ok(bound)
}

/// `P(h(1, x; h0) <= s)` through the hypo/epi composition with a point barrier.
pub fn point_cdf(h0: &[Wedge], x: f64, s: f64) -> Result<Determinant> {
    checked_initial_wedges(h0)?;
    let hypo = KernelSpec::hypo_wedges(h0, None, 0.5)?;
    let epi = KernelSpec::epi_wedges(&[Wedge::new(x, s)], None, -0.5)?;
    let kernel = KernelSpec::composed(hypo, epi).scaled(-1.0);
    let mut d = fredholm_det(&kernel, &kernel.default_rule(NODE_LADDER[0])?)?;
    d.value = clamp_probability(d.value);
    Ok(d)
}

/// Snaps values within 1e-8 outside `[0, 1]` onto it; larger excursions are left visible.
fn clamp_probability(v: f64) -> f64 {
    if (-1e-8..0.0).contains(&v) {
        0.0
    } else if v > 1.0 && v <= 1.0 + 1e-8 {
        1.0
    } else {
        v
    }
}
