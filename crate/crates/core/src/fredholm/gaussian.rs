//! Normal probabilities and hitting probabilities of Brownian bridges with
//! quadratic variation 2 per unit length.

use core::f64::consts::{FRAC_1_SQRT_2, PI};
use num_traits::Float;

use super::quadrature::integrate_adaptive;
use super::Wedge;

const TAIL: f64 = 9.0;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    Float::exp(-0.5 * x * x) / Float::sqrt(2.0 * PI)
}

/// Heat kernel of variance 2 per unit time: (4 pi s)^{-1/2} exp(-(v-u)^2 / 4s).
pub fn heat_kernel(s: f64, u: f64, v: f64) -> f64 {
    Float::exp(-(v - u) * (v - u) / (4.0 * s)) / Float::sqrt(4.0 * PI * s)
}

/// Brownian bridge from `(l1, u1)` to `(l2, u2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bridge {
    pub l1: f64,
    pub u1: f64,
    pub l2: f64,
    pub u2: f64,
}

impl Bridge {
    pub fn new(l1: f64, u1: f64, l2: f64, u2: f64) -> Self {
        Bridge { l1, u1, l2, u2 }
    }

    pub fn mean(&self, x: f64) -> f64 {
        self.u1 + (self.u2 - self.u1) * (x - self.l1) / (self.l2 - self.l1)
    }

    pub fn variance(&self, x: f64) -> f64 {
        (2.0 * (x - self.l1) * (self.l2 - x) / (self.l2 - self.l1)).max(0.0)
    }

    /// P(B(x) <= h).
    pub fn below(&self, x: f64, h: f64) -> f64 {
        let var = self.variance(x);
        let mean = self.mean(x);
        if var <= 0.0 {
            return if mean <= h { 1.0 } else { 0.0 };
        }
        normal_cdf((h - mean) / Float::sqrt(var))
    }

    /// P(B(x_i) <= h_i for some i), wedges sorted by position.
    ///
    /// Several wedges are handled by conditioning on the value at the middle
    /// one, which splits the bridge into two independent bridges.
    pub fn hit(&self, wedges: &[Wedge]) -> f64 {
        match wedges.len() {
            0 => 0.0,
            1 => self.below(wedges[0].x, wedges[0].height),
            n => {
                let j = n / 2;
                let pivot = wedges[j];
                let (left, right) = (&wedges[..j], &wedges[j + 1..]);
                let first = self.below(pivot.x, pivot.height);
                let var = self.variance(pivot.x);
                let mean = self.mean(pivot.x);
                let split = |w: f64| {
                    let hl = Bridge::new(self.l1, self.u1, pivot.x, w).hit(left);
                    let hr = Bridge::new(pivot.x, w, self.l2, self.u2).hit(right);
                    hl + (1.0 - hl) * hr
                };
                if var <= 0.0 {
                    return if mean <= pivot.height { 1.0 } else { split(mean) };
                }
                let sd = Float::sqrt(var);
                let lo = ((pivot.height - mean) / sd).max(-TAIL);
                if lo >= TAIL {
                    return first;
                }
                let g = |xi: f64| normal_pdf(xi) * split(mean + sd * xi);
                let rough = integrate_adaptive(g, lo, TAIL, f64::INFINITY);
                let tol = (1e-11 * rough.abs()).max(1e-300);
                (first + integrate_adaptive(g, lo, TAIL, tol)).min(1.0)
            }
        }
    }

    /// P(B(x_i) > h_i for all i).
    pub fn orthant(&self, wedges: &[Wedge]) -> f64 {
        1.0 - self.hit(wedges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn w(x: f64, height: f64) -> Wedge {
        Wedge { x, height }
    }

    #[test]
    fn single_wedge_matches_bridge_simulation() {
        // Midpoint of [-1, 1], endpoints at 1: B(0) ~ N(1, 1).
        let bridge = Bridge::new(-1.0, 1.0, 1.0, 1.0);
        let exact = bridge.orthant(&[w(0.0, 0.0)]);
        assert!((exact - normal_cdf(1.0)).abs() < 1e-15);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let steps = 16;
        let dt = 2.0 / steps as f64;
        let paths = 1_000_000;
        let mut above = 0u32;
        for _ in 0..paths {
            // Free path with variance 2 per unit length, then pinned.
            let mut walk = [0.0f64; 17];
            for i in 1..=steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                walk[i] = walk[i - 1] + Float::sqrt(2.0 * dt) * z;
            }
            let mid = walk[steps / 2] - 0.5 * walk[steps] + 1.0;
            if mid > 0.0 {
                above += 1;
            }
        }
        let p = above as f64 / paths as f64;
        let se = Float::sqrt(exact * (1.0 - exact) / paths as f64);
        assert!((p - exact).abs() < 4.0 * se, "{p} vs {exact}");
    }

    #[test]
    fn two_wedges_match_bivariate_normal() {
        // Direct quadrature of the joint normal density (scipy dblquad, tplquad).
        let bridge = Bridge::new(-1.0, 0.3, 1.0, -0.2);
        let got = bridge.orthant(&[w(-0.4, -0.5), w(0.5, 0.1)]);
        assert!((got - 0.364_520_783_8).abs() < 1e-8, "{got}");
    }

    #[test]
    fn three_wedges_match_trivariate_normal() {
        let bridge = Bridge::new(-1.2, 0.5, 1.1, 1.0);
        let got = bridge.orthant(&[w(-0.8, 0.0), w(0.0, -0.3), w(0.6, 0.2)]);
        assert!((got - 0.580_273_670_8).abs() < 1e-8, "{got}");
    }

    #[test]
    fn more_wedges_only_shrink_the_orthant() {
        let bridge = Bridge::new(-1.0, 0.4, 1.0, 0.9);
        let a = w(-0.3, 0.0);
        let b = w(0.4, 0.2);
        let both = bridge.orthant(&[a, b]);
        assert!(both <= bridge.orthant(&[a]) + 1e-15);
        assert!(both <= bridge.orthant(&[b]) + 1e-15);
    }

    #[test]
    fn endpoint_wedge_is_deterministic() {
        let bridge = Bridge::new(-1.0, 0.5, 1.0, 2.0);
        assert_eq!(bridge.orthant(&[w(-1.0, 0.0)]), 1.0);
        assert_eq!(bridge.orthant(&[w(-1.0, 1.0)]), 0.0);
    }
}
