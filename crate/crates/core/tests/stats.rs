mod common;

use proptest::prelude::*;

use common::calendar;
use flowmem::flows::TradingDay;
use flowmem::rolling::{RollingEntry, RollingHurst, WindowFit};
use flowmem::stats::{align_h_rv, ols, ols_with, AlignedPair, DatedSeries, FillPolicy, StdErrorKind};
use flowmem::synth::{fgn, iid_gaussian};
use flowmem::Error;

const X5: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
const Y5: [f64; 5] = [2.1, 3.9, 6.2, 7.8, 10.1];

/// Inverse of X'X for the design [1, x], from the raw (uncentered) sums.
fn xtx_inverse(x: &[f64]) -> [[f64; 2]; 2] {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let det = n * sxx - sx * sx;
    [[sxx / det, -sx / det], [-sx / det, n / det]]
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Two-sided p for a t statistic with 3 degrees of freedom by Simpson's rule
/// on the density `2 / (pi sqrt 3) (1 + t^2/3)^-2`.
fn p_value_t3(t: f64) -> f64 {
    let c = 2.0 / (std::f64::consts::PI * 3f64.sqrt());
    let density = |u: f64| c / (1.0 + u * u / 3.0).powi(2);
    let (a, b, m) = (0.0, t.abs(), 20_000);
    let h = (b - a) / m as f64;
    let mut s = density(a) + density(b);
    for i in 1..m {
        s += density(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

#[test]
fn five_points_match_matrix_oracle() {
    let fit = ols(&Y5, &X5).unwrap();
    let inv = xtx_inverse(&X5);
    let sxy: f64 = X5.iter().zip(&Y5).map(|(x, y)| x * y).sum();
    let sy: f64 = Y5.iter().sum();
    let alpha = inv[0][0] * sy + inv[0][1] * sxy;
    let beta = inv[1][0] * sy + inv[1][1] * sxy;
    let ssr: f64 = X5.iter().zip(&Y5).map(|(x, y)| (y - alpha - beta * x).powi(2)).sum();
    let s2 = ssr / 3.0;

    assert!((fit.alpha - alpha).abs() < 1e-12);
    assert!((fit.beta - beta).abs() < 1e-12);
    assert!((fit.se_alpha - (s2 * inv[0][0]).sqrt()).abs() < 1e-12);
    assert!((fit.se_beta - (s2 * inv[1][1]).sqrt()).abs() < 1e-12);
    assert!((fit.t_beta - beta / (s2 * inv[1][1]).sqrt()).abs() < 1e-9);
    assert!((fit.residual_variance - s2).abs() < 1e-12);
    assert_eq!(fit.n, 5);

    let p = fit.p_beta();
    let want = p_value_t3(fit.t_beta);
    assert!((p - want).abs() < 1e-9, "{p} vs {want}");
    assert_eq!(fit.beta_stars(), "***");

    let pa = fit.p_alpha();
    assert!((pa - p_value_t3(fit.t_alpha)).abs() < 1e-9);
}

#[test]
fn exact_line_has_no_error() {
    let y: Vec<f64> = X5.iter().map(|x| 0.25 - 1.5 * x).collect();
    let fit = ols(&y, &X5).unwrap();
    assert!((fit.beta + 1.5).abs() < 1e-14);
    assert!((fit.alpha - 0.25).abs() < 1e-14);
    assert!(fit.se_beta < 1e-14);
    assert!((fit.r_squared - 1.0).abs() < 1e-14);
}

#[test]
fn hc1_matches_sandwich_oracle() {
    let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 + ((i * 7) % 5) as f64).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 1.0 + 0.3 * v + (i as f64 - 5.0) * 0.1 * v.sin()).collect();
    let fit = ols_with(&y, &x, StdErrorKind::Hc1).unwrap();
    let classical = ols(&y, &x).unwrap();
    assert_eq!(fit.beta, classical.beta);
    assert_eq!(fit.std_errors, StdErrorKind::Hc1);

    let inv = xtx_inverse(&x);
    let mut meat = [[0.0; 2]; 2];
    for (xi, yi) in x.iter().zip(&y) {
        let u = yi - fit.alpha - fit.beta * xi;
        let row = [1.0, *xi];
        for a in 0..2 {
            for b in 0..2 {
                meat[a][b] += row[a] * row[b] * u * u;
            }
        }
    }
    let cov = mat_mul(mat_mul(inv, meat), inv);
    let scale = x.len() as f64 / (x.len() - 2) as f64;
    assert!((fit.se_alpha - (scale * cov[0][0]).sqrt()).abs() < 1e-10);
    assert!((fit.se_beta - (scale * cov[1][1]).sqrt()).abs() < 1e-10);
}

#[test]
fn constant_regressor_is_rejected() {
    assert!(matches!(ols(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]), Err(Error::DegenerateRegressor)));
    assert!(ols(&[1.0, 2.0], &[1.0, 2.0]).is_err());
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

fn xy_pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (5usize..60).prop_flat_map(|n| {
        (prop::collection::vec(-100.0f64..100.0, n), prop::collection::vec(-100.0f64..100.0, n))
    })
}

proptest! {
    #[test]
    fn residuals_are_orthogonal_and_sum_to_zero((x, y) in xy_pairs()) {
        let fit = ols(&y, &x).unwrap();
        let u: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - fit.alpha - fit.beta * a).collect();
        let scale: f64 = y.iter().map(|v| v.abs()).sum::<f64>() * x.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
        prop_assert!(u.iter().sum::<f64>().abs() < 1e-9 * scale);
        prop_assert!(u.iter().zip(&x).map(|(r, a)| r * a).sum::<f64>().abs() < 1e-9 * scale);
    }

    #[test]
    fn scaling_y_scales_beta_and_keeps_t((x, y) in xy_pairs(), c in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0], d in -50.0f64..50.0) {
        let base = ols(&y, &x).unwrap();
        let y2: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        let fit = ols(&y2, &x).unwrap();
        prop_assert!((fit.beta - c * base.beta).abs() < 1e-9 * (1.0 + base.beta.abs() * c.abs()));
        if base.se_beta > 1e-9 {
            prop_assert!((fit.t_beta - c.signum() * base.t_beta).abs() < 1e-6 * (1.0 + base.t_beta.abs()));
        }
        prop_assert!((fit.r_squared - base.r_squared).abs() < 1e-9);
    }

    #[test]
    fn r_squared_is_squared_correlation((x, y) in xy_pairs()) {
        let fit = ols(&y, &x).unwrap();
        let r = pearson(&x, &y);
        prop_assert!((fit.r_squared - r * r).abs() < 1e-9);
    }
}

fn entries_fixture() -> (RollingHurst, Vec<TradingDay>) {
    let cal = calendar(200);
    let entries = (0..36)
        .map(|k| {
            let end_index = 20 + 5 * k;
            let gap = k % 9 == 4;
            RollingEntry {
                end_date: cal[end_index],
                end_index,
                fit: (!gap).then(|| WindowFit { h: 0.4 + 0.01 * k as f64, stderr: 0.02, r_squared: 0.98, n_points: 12 }),
                gap: gap.then(|| "insufficient scales".to_string()),
            }
        })
        .collect();
    (RollingHurst { label: None, window: 20, step: 5, entries }, cal)
}

/// For each volatility day: the latest rolling entry whose end date is on or
/// before it, if that entry is at most `step - 1` volatility days old.
fn alignment_oracle(r: &RollingHurst, rv: &DatedSeries, policy: FillPolicy, lag: usize) -> Vec<AlignedPair> {
    let cal = &rv.calendar;
    let h_for = |j: usize| -> Option<f64> {
        let e = r.entries.iter().filter(|e| e.end_date <= cal[j]).last()?;
        if e.end_date < cal[0] {
            return None;
        }
        match policy {
            FillPolicy::StepDatesOnly => (e.end_date == cal[j]).then_some(())?,
            FillPolicy::ForwardFill => {
                let start = cal.iter().position(|d| *d >= e.end_date).unwrap();
                (j - start < r.step).then_some(())?
            }
        }
        e.fit.map(|f| f.h)
    };
    (lag..cal.len())
        .filter_map(|i| h_for(i - lag).map(|h| AlignedPair { date: cal[i], h, rv: rv.values[i] }))
        .collect()
}

#[test]
fn alignment_matches_brute_force_with_calendar_holes() {
    let (r, cal) = entries_fixture();
    // drop some days from the volatility calendar, including rolling end dates
    let rv_cal: Vec<TradingDay> = cal.iter().enumerate().filter(|(i, _)| i % 7 != 3 && i % 11 != 0).map(|(_, d)| *d).collect();
    let rv = DatedSeries { values: (0..rv_cal.len()).map(|i| 1e-4 * (1.0 + i as f64)).collect(), calendar: rv_cal };
    for policy in [FillPolicy::ForwardFill, FillPolicy::StepDatesOnly] {
        for lag in [0, 1, 4] {
            let got = align_h_rv(&r, &rv, policy, lag).unwrap();
            let want = alignment_oracle(&r, &rv, policy, lag);
            assert_eq!(got, want, "{policy:?} lag {lag}");
        }
    }
}

#[test]
fn disjoint_calendars_give_empty_alignment() {
    let (r, _) = entries_fixture();
    let far = flowmem::synth::weekday_calendar(chrono::NaiveDate::from_ymd_opt(2030, 1, 1).unwrap(), 50);
    let rv = DatedSeries { values: vec![1.0; 50], calendar: far };
    assert!(matches!(align_h_rv(&r, &rv, FillPolicy::ForwardFill, 0), Err(Error::EmptyAlignment)));
}

#[test]
fn regression_recovers_planted_slope() {
    // rv = 0.02 + 0.06 h + noise, with a persistent h path as the regressor
    let n = 500;
    let h: Vec<f64> = fgn(0.9, n, 3).unwrap().iter().map(|v| 0.5 + 0.05 * v).collect();
    let noise = iid_gaussian(n, 4);
    let rv: Vec<f64> = h.iter().zip(&noise).map(|(hv, e)| 0.02 + 0.06 * hv + 0.002 * e).collect();
    for kind in [StdErrorKind::Classical, StdErrorKind::Hc1] {
        let fit = ols_with(&rv, &h, kind).unwrap();
        assert!((fit.beta - 0.06).abs() < 3.0 * fit.se_beta, "{kind:?}: {} ± {}", fit.beta, fit.se_beta);
        assert!(fit.t_beta > 10.0);
    }
}
