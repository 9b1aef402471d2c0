use proptest::prelude::*;

use flowmem::synth::{iid_gaussian, pareto};
use flowmem::tails::{
    empirical_ccdf, fit_tail_exponent, hill_exponent, tail_size, TailMethod, TailSide,
};

/// Standard normal upper tail by composite Simpson integration of the density
/// out to 12 standard deviations.
fn normal_tail_quadrature(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_tail_quadrature(-x);
    }
    let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (a, b, m) = (x, 12.0f64.max(x + 1.0), 4000);
    let h = (b - a) / m as f64;
    let mut s = phi(a) + phi(b);
    for i in 1..m {
        s += phi(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn gaussian_ccdf_reference_matches_quadrature() {
    for x in [-3.0, -1.2, 0.0, 0.5, 1.7, 3.3, 5.0] {
        let got = flowmem::tails::gaussian_ccdf(0.0, 1.0, x);
        let want = normal_tail_quadrature(x);
        assert!((got - want).abs() < 1e-10 * want.max(1e-6), "x={x}: {got} vs {want}");
    }
    let shifted = flowmem::tails::gaussian_ccdf(2.0, 3.0, 5.0);
    assert!((shifted - normal_tail_quadrature(1.0)).abs() < 1e-10);
}

#[test]
fn empirical_ccdf_sits_inside_dkw_band() {
    let n = 1000;
    let eps = ((2.0f64 / 0.01).ln() / (2.0 * n as f64)).sqrt();
    let x = iid_gaussian(n, 11);
    let ccdf = empirical_ccdf(&x, TailSide::Upper).unwrap();
    assert_eq!(ccdf.points.len(), n - 1);
    let worst = ccdf
        .points
        .iter()
        .map(|&(x, p)| (p - normal_tail_quadrature(x)).abs())
        .fold(0.0, f64::max);
    assert!(worst <= eps, "sup deviation {worst} > {eps}");
}

#[test]
fn sides_transform_before_counting() {
    let x: Vec<f64> = (-6..=6).map(|v| v as f64).collect();
    let upper = empirical_ccdf(&x, TailSide::Upper).unwrap();
    let lower = empirical_ccdf(&x, TailSide::Lower).unwrap();
    let abs = empirical_ccdf(&x, TailSide::Absolute).unwrap();
    assert_eq!(upper.points, lower.points);
    assert_eq!(abs.points.len(), 6);
    assert_eq!(abs.points[0], (0.0, 12.0 / 13.0));
    assert_eq!(abs.points[5], (5.0, 2.0 / 13.0));
}

#[test]
fn equal_values_are_degenerate() {
    let c = empirical_ccdf(&[4.2; 20], TailSide::Upper).unwrap();
    assert!(c.degenerate);
    assert_eq!(c.points, vec![(4.2, 1.0)]);
    assert!(empirical_ccdf(&[1.0; 9], TailSide::Upper).is_err());
}

proptest! {
    #[test]
    fn ccdf_is_a_decreasing_step_function(x in prop::collection::vec(-1e6f64..1e6, 10..300), dup in 0usize..5) {
        let mut x = x;
        // force ties
        for i in 0..dup.min(x.len() - 1) {
            x[i + 1] = x[i];
        }
        let c = empirical_ccdf(&x, TailSide::Upper).unwrap();
        prop_assume!(!c.degenerate);
        let mut distinct = x.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assert_eq!(c.points.len(), distinct.len() - 1);
        prop_assert!(c.points.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 > w[1].1));
        for &(v, p) in &c.points {
            prop_assert!(p > 0.0 && p < 1.0);
            let above = x.iter().filter(|&&y| y > v).count();
            prop_assert_eq!(p, above as f64 / x.len() as f64);
        }
    }

    #[test]
    fn exponents_ignore_scale(seed in 0u64..500, c in 1e-3f64..1e3) {
        let x = pareto(2.0, 400, seed).unwrap();
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        for method in [TailMethod::CcdfOls, TailMethod::Hill] {
            let a = fit_tail_exponent(&x, 0.1, method, TailSide::Upper).unwrap();
            let b = fit_tail_exponent(&y, 0.1, method, TailSide::Upper).unwrap();
            prop_assert!((a.exponent - b.exponent).abs() < 1e-9 * a.exponent, "{:?}", method);
            prop_assert_eq!(a.n_tail, b.n_tail);
            prop_assert!((b.fit_xmin / a.fit_xmin - c).abs() < 1e-9 * c);
        }
    }
}

#[test]
fn tail_size_has_a_floor() {
    assert_eq!(tail_size(2500, 0.05), 125);
    assert_eq!(tail_size(100, 0.05), 10);
    assert_eq!(tail_size(1000, 0.0101), 10);
}

#[test]
fn hill_settles_as_k_grows() {
    let mut err_small = 0.0;
    let mut err_large = 0.0;
    let seeds = 0..12u64;
    for seed in seeds.clone() {
        let x = pareto(2.5, 10_000, seed).unwrap();
        err_small += (hill_exponent(&x, 20).unwrap().exponent - 2.5).abs();
        err_large += (hill_exponent(&x, 1000).unwrap().exponent - 2.5).abs();
    }
    let n = seeds.count() as f64;
    let (small, large) = (err_small / n, err_large / n);
    assert!(large < small, "k=1000 {large} vs k=20 {small}");
    assert!(large < 0.15, "{large}");
}

#[test]
fn gaussian_tail_is_not_a_power_law() {
    let g = iid_gaussian(100_000, 5);
    let p = pareto(2.5, 100_000, 5).unwrap();
    let gf = fit_tail_exponent(&g, 0.01, TailMethod::CcdfOls, TailSide::Upper).unwrap();
    let pf = fit_tail_exponent(&p, 0.01, TailMethod::CcdfOls, TailSide::Upper).unwrap();
    assert_eq!(gf.n_tail, 1000);
    assert!(gf.exponent > 5.0, "{}", gf.exponent);
    assert!(gf.r_squared.unwrap() < pf.r_squared.unwrap(), "{:?} vs {:?}", gf.r_squared, pf.r_squared);
    assert!((pf.exponent - 2.5).abs() < 0.25, "{}", pf.exponent);
}

#[test]
fn hill_rejects_bad_k() {
    let x = pareto(2.0, 50, 1).unwrap();
    assert!(hill_exponent(&x, 5).is_err());
    assert!(hill_exponent(&x, 50).is_err());
    assert!(fit_tail_exponent(&x, 1.5, TailMethod::Hill, TailSide::Upper).is_err());
}
