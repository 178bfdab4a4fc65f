//! Airy function Ai and its derivative.
//!
//! |z| <= 2 uses the Maclaurin series. |z| >= 8 uses the asymptotic
//! expansions truncated at their smallest term. In between the defining ODE
//! `y'' = z y` is integrated by Taylor steps of length at most 1/2: from the
//! exact values at 0 on the oscillatory side, and backwards from the
//! asymptotic values at 8 on the decaying side, where Ai is the dominant
//! solution.

use core::f64::consts::{FRAC_PI_4, PI};
use num_traits::Float;

use super::{FredholmError, Result};

/// Ai(0).
pub const AI0: f64 = 0.355_028_053_887_817_239_26;
/// -Ai'(0).
pub const AIP0: f64 = 0.258_819_403_792_806_798_41;

const SERIES_EDGE: f64 = 2.0;
const ASYMPTOTIC_EDGE: f64 = 8.0;
const STEP: f64 = 0.5;

/// Ai(z) for z in [-30, 30].
pub fn airy(z: f64) -> Result<f64> {
    if !(-30.0..=30.0).contains(&z) {
        return Err(FredholmError::OutOfRange { what: "airy argument", value: z });
    }
    Ok(airy_pair(z).0)
}

/// (Ai(z), Ai'(z)) for any finite z. Values underflow to zero beyond z ~ 105.
pub fn airy_pair(z: f64) -> (f64, f64) {
    if z.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    if z.abs() <= SERIES_EDGE {
        maclaurin(z)
    } else if z >= ASYMPTOTIC_EDGE {
        asymptotic_positive(z)
    } else if z <= -ASYMPTOTIC_EDGE {
        asymptotic_negative(-z)
    } else if z > 0.0 {
        let (a, ap) = asymptotic_positive(ASYMPTOTIC_EDGE);
        integrate(ASYMPTOTIC_EDGE, a, ap, z)
    } else {
        integrate(0.0, AI0, -AIP0, z)
    }
}

fn maclaurin(z: f64) -> (f64, f64) {
    let z3 = z * z * z;
    let (mut f, mut g) = (1.0, z);
    let (mut fp, mut gp) = (0.0, 1.0);
    let (mut ft, mut gt) = (1.0, z);
    let (mut fpt, mut gpt) = (z * z / 2.0, 1.0);
    fp += fpt;
    for k in 1..60 {
        let k3 = 3.0 * k as f64;
        ft *= z3 / ((k3 - 1.0) * k3);
        gt *= z3 / (k3 * (k3 + 1.0));
        gpt *= z3 / ((k3 - 2.0) * k3);
        f += ft;
        g += gt;
        gp += gpt;
        if k > 1 {
            fpt *= z3 / ((k3 - 3.0) * (k3 - 1.0));
            fp += fpt;
        }
        if ft.abs() + gt.abs() + fpt.abs() + gpt.abs() < 1e-18 {
            break;
        }
    }
    (AI0 * f - AIP0 * g, AI0 * fp - AIP0 * gp)
}

/// Taylor steps for y'' = z y from (z0, y, y') to `target`.
fn integrate(mut z0: f64, mut y: f64, mut yp: f64, target: f64) -> (f64, f64) {
    let steps = Float::ceil((target - z0).abs() / STEP).max(1.0) as usize;
    let h = (target - z0) / steps as f64;
    for _ in 0..steps {
        let (mut a_km1, mut a_k) = (y, yp);
        let mut a_kp1 = z0 * y / 2.0;
        let mut value = y + yp * h + a_kp1 * h * h;
        let mut slope = yp + 2.0 * a_kp1 * h;
        let scale = y.abs() + yp.abs();
        let mut hk = h * h;
        for k in 1..80 {
            let next = (z0 * a_k + a_km1) / ((k + 2) as f64 * (k + 1) as f64);
            a_km1 = a_k;
            a_k = a_kp1;
            a_kp1 = next;
            slope += (k + 2) as f64 * next * hk;
            hk *= h;
            let term = next * hk;
            value += term;
            if term.abs() < 1e-18 * scale && (a_k * hk / h).abs() < 1e-18 * scale {
                break;
            }
        }
        y = value;
        yp = slope;
        z0 += h;
    }
    (y, yp)
}

/// Sums of the u_k and v_k series in 1/zeta, with the requested parity and
/// alternating signs, stopping at the smallest term.
fn asymptotic_sums(zeta: f64, stride_even: Option<bool>) -> (f64, f64) {
    let mut u = 1.0;
    let mut su = 0.0;
    let mut sv = 0.0;
    let mut power = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60usize {
        if k > 0 {
            let kf = k as f64;
            u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / (216.0 * kf * (2.0 * kf - 1.0));
            power /= zeta;
        }
        let v = if k == 0 { 1.0 } else { -(6.0 * k as f64 + 1.0) / (6.0 * k as f64 - 1.0) * u };
        let term = u * power;
        if term.abs() > last {
            break;
        }
        last = term.abs();
        let sign = match stride_even {
            None => if k % 2 == 0 { 1.0 } else { -1.0 },
            Some(even) => {
                if (k % 2 == 0) != even {
                    continue;
                }
                if (k / 2) % 2 == 0 { 1.0 } else { -1.0 }
            }
        };
        su += sign * term;
        sv += sign * v * power;
        if term.abs() < 1e-17 {
            break;
        }
    }
    (su, sv)
}

fn asymptotic_positive(z: f64) -> (f64, f64) {
    let root = Float::sqrt(z);
    let zeta = 2.0 / 3.0 * z * root;
    let quarter = Float::sqrt(root);
    let (su, sv) = asymptotic_sums(zeta, None);
    let pre = Float::exp(-zeta) / (2.0 * Float::sqrt(PI));
    (pre / quarter * su, -pre * quarter * sv)
}

fn asymptotic_negative(x: f64) -> (f64, f64) {
    let root = Float::sqrt(x);
    let zeta = 2.0 / 3.0 * x * root;
    let quarter = Float::sqrt(root);
    let (ue, ve) = asymptotic_sums(zeta, Some(true));
    let (uo, vo) = asymptotic_sums(zeta, Some(false));
    let (s, c) = Float::sin_cos(zeta - FRAC_PI_4);
    let pre = 1.0 / Float::sqrt(PI);
    (pre / quarter * (c * ue + s * uo), pre * quarter * (s * ve - c * vo))
}
