//! Composite Gauss-Legendre rules and adaptive Gauss-Kronrod integration.

use alloc::vec::Vec;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{FredholmError, Result};

/// Nodes and weights of a composite Gauss-Legendre rule on `[lo, hi]`.
///
/// The interval is split at `breaks` into panels that each carry the same
/// number of Legendre nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    breaks: Vec<f64>,
    per_panel: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Single-panel Gauss-Legendre rule with `n` nodes.
    pub fn gauss_legendre(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::composite(&[lo, hi], n)
    }

    /// `panels` equal panels on `[lo, hi]` holding about `total` nodes overall.
    pub fn panels(lo: f64, hi: f64, panels: usize, total: usize) -> Result<Self> {
        if panels == 0 {
            return Err(FredholmError::InvalidRule("no panels"));
        }
        let breaks: Vec<f64> = (0..=panels)
            .map(|i| lo + (hi - lo) * i as f64 / panels as f64)
            .collect();
        Self::composite(&breaks, total.div_ceil(panels))
    }

    /// Panels between consecutive `breaks`, `per_panel` nodes each.
    pub fn composite(breaks: &[f64], per_panel: usize) -> Result<Self> {
        if breaks.len() < 2 || per_panel == 0 {
            return Err(FredholmError::InvalidRule("need at least one panel and one node"));
        }
        if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FredholmError::InvalidRule("panel breaks must be finite and increasing"));
        }
        let (x, w) = legendre(per_panel);
        let mut nodes = Vec::with_capacity(per_panel * (breaks.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for pair in breaks.windows(2) {
            let half = 0.5 * (pair[1] - pair[0]);
            let mid = 0.5 * (pair[1] + pair[0]);
            for (&xi, &wi) in x.iter().zip(&w) {
                nodes.push(mid + half * xi);
                weights.push(half * wi);
            }
        }
        Ok(QuadratureRule { breaks: breaks.to_vec(), per_panel, nodes, weights })
    }

    /// Same panels with about `total` nodes.
    pub fn with_nodes(&self, total: usize) -> Self {
        let panels = self.breaks.len() - 1;
        Self::composite(&self.breaks, total.div_ceil(panels).max(1)).expect("breaks already validated")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn per_panel(&self) -> usize {
        self.per_panel
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.breaks[0], self.breaks[self.breaks.len() - 1])
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = Float::cos(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_eval(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_eval(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_eval(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

const KRONROD_X: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];
const KRONROD_W: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];
const GAUSS_W: [f64; 4] = [
    0.129_484_966_168_869_693,
    0.279_705_391_489_276_668,
    0.381_830_050_505_118_945,
    0.417_959_183_673_469_388,
];

fn kronrod(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let center = f(mid);
    let mut k = KRONROD_W[7] * center;
    let mut g = GAUSS_W[3] * center;
    for j in 0..7 {
        let dx = half * KRONROD_X[j];
        let s = f(mid - dx) + f(mid + dx);
        k += KRONROD_W[j] * s;
        if j % 2 == 1 {
            g += GAUSS_W[j / 2] * s;
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Adaptive 15-point Gauss-Kronrod integration to absolute tolerance `tol`.
pub fn integrate_adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack: Vec<(f64, f64, f64, u32)> = alloc::vec![(a, b, tol, 0)];
    let mut total = 0.0;
    while let Some((lo, hi, budget, depth)) = stack.pop() {
        let (value, err) = kronrod(&mut f, lo, hi);
        if err <= budget || depth >= 40 {
            total += value;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * budget, depth + 1));
            stack.push((mid, hi, 0.5 * budget, depth + 1));
        }
    }
    total
}
