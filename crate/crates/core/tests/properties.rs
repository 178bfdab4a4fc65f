use kpzlab::bessel::sample_bessel;
use kpzlab::dimension::{box_count, covering_count, dyadic_blocks};
use kpzlab::exceptional::{run_replica, ExceptionalConfig};
use kpzlab::fredholm::{max_cdf, tracy_widom_gue_cdf, Wedge};
use kpzlab::poisson_lpp::{chain_index, passage_value, LppParams, PoissonField, Region, SpaceTime};
use proptest::prelude::*;

fn region() -> Region {
    Region::new(-4.0, 4.0, 0.0, 1.0).unwrap()
}

fn points() -> impl Strategy<Value = Vec<SpaceTime>> {
    prop::collection::vec((-3.0..3.0f64, 0.01..0.99f64), 0..=12)
        .prop_map(|v| v.into_iter().map(|(x, t)| SpaceTime::new(x, t)).collect())
}

fn field(pts: Vec<SpaceTime>) -> Option<PoissonField> {
    PoissonField::from_points(region(), 1.0, 0, pts).ok()
}

fn hop(a: SpaceTime, b: SpaceTime, m: f64) -> bool {
    b.t >= a.t && (b.x - a.x).abs() <= m * (b.t - a.t)
}

/// Longest chainable subset by trying all of them.
fn brute_force(pts: &[SpaceTime], src: SpaceTime, dst: SpaceTime, m: f64) -> Option<u32> {
    if !hop(src, dst, m) {
        return None;
    }
    let mut sorted = pts.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut best = 0;
    for mask in 0u32..(1 << sorted.len()) {
        let mut prev = src;
        let mut ok = true;
        for (i, p) in sorted.iter().enumerate() {
            if mask >> i & 1 == 1 {
                ok &= hop(prev, *p, m);
                prev = *p;
            }
        }
        if ok && hop(prev, dst, m) {
            best = best.max(mask.count_ones());
        }
    }
    Some(best)
}

fn count(f: &PoissonField, src: SpaceTime, dst: SpaceTime, m: f64) -> Option<u32> {
    chain_index(f, src, m).unwrap().max_count_to(dst)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chain_count_matches_enumeration(
        pts in points(),
        m in prop::sample::select(vec![0.5, 1.0, 2.0, 4.0]),
        x in -1.0..1.0f64,
        y in -2.0..2.0f64,
    ) {
        let Some(f) = field(pts.clone()) else { return Ok(()) };
        let (src, dst) = (SpaceTime::new(x, 0.0), SpaceTime::new(y, 1.0));
        prop_assert_eq!(count(&f, src, dst, m), brute_force(&pts, src, dst, m));
    }

    #[test]
    fn reflection_leaves_passage_values_unchanged(pts in points(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let Some(f) = field(pts) else { return Ok(()) };
        let p = LppParams::new(2.0, 1.0, 2.0, 1.5).unwrap();
        let a = passage_value(&chain_index(&f, SpaceTime::new(x, 0.0), 2.0).unwrap(), &p, SpaceTime::new(y, 1.0)).unwrap();
        let r = f.reflected();
        let b = passage_value(&chain_index(&r, SpaceTime::new(-x, 0.0), 2.0).unwrap(), &p, SpaceTime::new(-y, 1.0)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn concatenation_is_superadditive(
        pts in points(),
        x in -1.0..1.0f64,
        y in -1.0..1.0f64,
        z in -1.0..1.0f64,
        r in 0.05..0.95f64,
    ) {
        let Some(f) = field(pts) else { return Ok(()) };
        let m = 2.0;
        let p = LppParams::new(m, 1.0, 2.0, 1.5).unwrap();
        let (src, mid, dst) = (SpaceTime::new(x, 0.0), SpaceTime::new(z, r), SpaceTime::new(y, 1.0));
        let d = |a: SpaceTime, b: SpaceTime| passage_value(&chain_index(&f, a, m).unwrap(), &p, b).unwrap();
        let (whole, left, right) = (d(src, dst), d(src, mid), d(mid, dst));
        if left.is_finite() && right.is_finite() {
            prop_assert!(whole >= left + right - 1e-12, "{whole} < {left} + {right}");
        }
    }

    #[test]
    fn adding_a_point_never_shortens_chains(
        pts in points(),
        extra in (-3.0..3.0f64, 0.01..0.99f64),
        y in -2.0..2.0f64,
    ) {
        let Some(f) = field(pts.clone()) else { return Ok(()) };
        let mut more = pts;
        more.push(SpaceTime::new(extra.0, extra.1));
        let Some(g) = field(more) else { return Ok(()) };
        let (src, dst) = (SpaceTime::new(0.0, 0.0), SpaceTime::new(y, 1.0));
        prop_assert!(count(&g, src, dst, 2.0) >= count(&f, src, dst, 2.0));
    }

    #[test]
    fn refinement_bounds_covering_numbers(flags in prop::collection::vec(any::<bool>(), 256), j in 1u32..8) {
        let coarse = covering_count(&flags, 1 << j).unwrap();
        let fine = covering_count(&flags, 1 << (j - 1)).unwrap();
        prop_assert!(coarse <= fine && fine <= 2 * coarse);
    }

    #[test]
    fn single_points_have_dimension_zero(at in 0usize..1024) {
        let mut flags = vec![false; 1024];
        flags[at] = true;
        let d = box_count(&flags, 1.0 / 1024.0, &dyadic_blocks(0, 6)).unwrap();
        prop_assert!(d.slope.unwrap().abs() < 1e-12);
    }

    #[test]
    fn bessel_paths_are_nonnegative(a in 0.0..3.0f64, seed in any::<u64>()) {
        let grid: Vec<f64> = (-50..=50).map(|j| j as f64 * 0.04).collect();
        let path = sample_bessel(&grid, a, seed).unwrap();
        prop_assert!(path.values.iter().all(|&v| v >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tracy_widom_is_a_distribution_function(s in -6.0..4.0f64, h in 0.01..1.0f64) {
        let (a, b) = (tracy_widom_gue_cdf(s).unwrap(), tracy_widom_gue_cdf(s + h).unwrap());
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b >= a - 1e-10);
    }

    #[test]
    fn max_cdf_lies_in_unit_interval(a in -2.0..3.0f64, x in -0.5..0.5f64) {
        let v = max_cdf(&[Wedge::new(x, 0.0)], a).unwrap().value;
        prop_assert!((-1e-10..=1.0 + 1e-10).contains(&v));
    }

    #[test]
    fn exceptional_sets_nest(seed in any::<u64>(), k in 2usize..=3, e1 in 0.0..1.0f64, e2 in 0.0..1.0f64) {
        let cfg = ExceptionalConfig::new(k, 16.0).unwrap();
        let mut rec = run_replica(&cfg, seed).unwrap();
        rec.set_alpha(2.0);
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let small = rec.tie_indicators(lo);
        let big = rec.tie_indicators(hi);
        prop_assert!(small.iter().zip(&big).all(|(a, b)| !a || *b));
        let ab = rec.tie_and_thinned(hi);
        prop_assert!(ab.iter().zip(&big).all(|(a, b)| !a || *b));
    }
}
