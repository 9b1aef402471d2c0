//! Ground-truth generators: fractional Gaussian noise, cumulated fGn,
//! i.i.d. Gaussian and Pareto samples, plus synthetic flow panels built from
//! them.
//!
//! All randomness comes from [`rng`], a ChaCha8 stream cipher generator, so
//! outputs are reproducible across platforms for a given seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{FlowPanel, InvestorGroup, TradingDay};

/// Recorded in output metadata so golden files can be tied to a generator.
pub const RNG_ID: &str = "rand_chacha-0.9/ChaCha8Rng+rand_distr-0.5/StandardNormal";

/// Deterministic generator for `(seed, stream)`; distinct streams are independent.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Fgn,
    FbmIncrementsCumsum,
    IidGaussian,
    Pareto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub hurst: Option<f64>,
    pub alpha: Option<f64>,
    pub n: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn fgn(hurst: f64, n: usize, seed: u64) -> Self {
        Self { kind: GeneratorKind::Fgn, hurst: Some(hurst), alpha: None, n, seed }
    }

    pub fn fbm(hurst: f64, n: usize, seed: u64) -> Self {
        Self { kind: GeneratorKind::FbmIncrementsCumsum, hurst: Some(hurst), alpha: None, n, seed }
    }

    pub fn iid_gaussian(n: usize, seed: u64) -> Self {
        Self { kind: GeneratorKind::IidGaussian, hurst: None, alpha: None, n, seed }
    }

    pub fn pareto(alpha: f64, n: usize, seed: u64) -> Self {
        Self { kind: GeneratorKind::Pareto, hurst: None, alpha: Some(alpha), n, seed }
    }

    pub fn generate(&self) -> Result<Vec<f64>> {
        let hurst = || {
            self.hurst
                .ok_or_else(|| Error::InvalidInput(format!("{:?} requires a Hurst exponent", self.kind)))
        };
        match self.kind {
            GeneratorKind::Fgn => fgn(hurst()?, self.n, self.seed),
            GeneratorKind::FbmIncrementsCumsum => Ok(cumsum(&fgn(hurst()?, self.n, self.seed)?)),
            GeneratorKind::IidGaussian => Ok(iid_gaussian(self.n, self.seed)),
            GeneratorKind::Pareto => pareto(
                self.alpha
                    .ok_or_else(|| Error::InvalidInput("pareto requires alpha".into()))?,
                self.n,
                self.seed,
            ),
        }
    }
}

/// Unit-variance fGn autocovariance at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

fn check_fgn_params(hurst: f64, n: usize) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidInput(format!("Hurst exponent {hurst} outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::InvalidInput("fGn length must be at least 2".into()));
    }
    Ok(())
}

/// Exact fractional Gaussian noise by circulant embedding (Davies-Harte).
///
/// Falls back to [`fgn_hosking`] if the embedding has a negative eigenvalue.
pub fn fgn(hurst: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_fgn_params(hurst, n)?;
    let half = n.next_power_of_two();
    let m = 2 * half;
    // First row of the circulant: gamma(0..=half), then gamma(half-1..=1).
    let mut row: Vec<Complex64> = (0..m)
        .map(|j| {
            let lag = if j <= half { j } else { m - j };
            Complex64::new(fgn_autocovariance(hurst, lag), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let lambda: Vec<f64> = row.iter().map(|c| c.re).collect();
    let tol = 1e-10 * lambda.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
    if lambda.iter().any(|&l| l < -tol) {
        log::warn!("circulant embedding not nonnegative definite for H={hurst}; using Hosking recursion");
        return fgn_hosking(hurst, n, seed);
    }

    let mut r = rng(seed, 0);
    let mf = m as f64;
    let mut w = vec![Complex64::new(0.0, 0.0); m];
    let z0: f64 = r.sample(StandardNormal);
    w[0] = Complex64::new((lambda[0].max(0.0) / mf).sqrt() * z0, 0.0);
    let zh: f64 = r.sample(StandardNormal);
    w[half] = Complex64::new((lambda[half].max(0.0) / mf).sqrt() * zh, 0.0);
    for k in 1..half {
        let a: f64 = r.sample(StandardNormal);
        let b: f64 = r.sample(StandardNormal);
        let s = (lambda[k].max(0.0) / (2.0 * mf)).sqrt();
        w[k] = Complex64::new(s * a, s * b);
        w[m - k] = w[k].conj();
    }
    fft.process(&mut w);
    Ok(w.iter().take(n).map(|c| c.re).collect())
}

/// Exact fGn by the sequential Durbin-Levinson (Hosking) recursion, O(n^2).
pub fn fgn_hosking(hurst: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_fgn_params(hurst, n)?;
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(hurst, k)).collect();
    let mut r = rng(seed, 0);
    let mut out = Vec::with_capacity(n);
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev = Vec::with_capacity(n);
    let mut v = gamma[0];
    let z: f64 = r.sample(StandardNormal);
    out.push(v.sqrt() * z);
    for t in 1..n {
        // Update partial autocorrelations phi_{t,1..t}.
        let num = gamma[t] - (0..t - 1).map(|j| phi[j] * gamma[t - 1 - j]).sum::<f64>();
        let kappa = num / v;
        prev.clear();
        prev.extend_from_slice(&phi);
        phi.clear();
        phi.extend((0..t - 1).map(|j| prev[j] - kappa * prev[t - 2 - j]));
        phi.push(kappa);
        v *= 1.0 - kappa * kappa;
        let cond_mean: f64 = (0..t).map(|j| phi[j] * out[t - 1 - j]).sum();
        let z: f64 = r.sample(StandardNormal);
        out.push(cond_mean + v.sqrt() * z);
    }
    Ok(out)
}

pub fn cumsum(series: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    series
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

pub fn iid_gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed, 0);
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

/// Pareto(alpha) on `[1, inf)` by inverse-CDF sampling `x = u^(-1/alpha)`.
pub fn pareto(alpha: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("pareto alpha {alpha} must be positive")));
    }
    let mut r = rng(seed, 0);
    Ok((0..n)
        .map(|_| {
            // gen::<f64>() is in [0, 1); 1 - u lies in (0, 1].
            let u = 1.0 - r.random::<f64>();
            u.powf(-1.0 / alpha)
        })
        .collect())
}

/// Consecutive weekdays starting at `start` (inclusive if it is a weekday).
pub fn weekday_calendar(start: TradingDay, n: usize) -> Vec<TradingDay> {
    use chrono::{Datelike, Weekday};
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Shifts and scales `x` to strictly positive amounts. The map is affine, so
/// DFA exponents are unchanged.
pub fn to_amounts(x: &[f64], scale: f64) -> Vec<f64> {
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let sd = crate::numeric::population_std(x).max(f64::MIN_POSITIVE);
    x.iter().map(|v| scale * (1.0 + (v - min) / sd)).collect()
}

/// Builds a panel whose BUY and SELL series for each group are affine images
/// of independent draws from that group's generator.
pub fn synthetic_panel(
    calendar: &[TradingDay],
    groups: &BTreeMap<InvestorGroup, GeneratorSpec>,
    seed: u64,
) -> Result<FlowPanel> {
    let n = calendar.len();
    let mut columns = BTreeMap::new();
    for (gi, (&group, spec)) in groups.iter().enumerate() {
        let draw = |side: u64| -> Result<Vec<f64>> {
            let stream_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(((group as u64) << 8) | side);
            let spec = GeneratorSpec { n, seed: stream_seed, ..spec.clone() };
            Ok(to_amounts(&spec.generate()?, 1e9 * (gi as f64 + 1.0)))
        };
        columns.insert(group, (draw(0)?, draw(1)?));
    }
    FlowPanel::from_buy_sell(calendar.to_vec(), columns)
}

/// Closing prices from i.i.d. Gaussian log returns with daily std `sigma`.
pub fn synthetic_prices(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let z = iid_gaussian(n, seed);
    let mut p = 100.0_f64;
    z.iter()
        .enumerate()
        .map(|(i, e)| {
            if i > 0 {
                p *= (sigma * e).exp();
            }
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn autocov(x: &[f64], lag: usize) -> f64 {
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
    }

    #[test]
    fn autocovariance_formula() {
        assert_eq!(fgn_autocovariance(0.7, 0), 1.0);
        assert!(fgn_autocovariance(0.5, 1).abs() < 1e-15);
        assert!(fgn_autocovariance(0.5, 7).abs() < 1e-15);
        assert!(fgn_autocovariance(0.8, 1) > 0.0);
        assert!(fgn_autocovariance(0.3, 1) < 0.0);
    }

    #[test]
    fn half_is_white_noise() {
        let n = 1 << 14;
        let x = fgn(0.5, n, 3).unwrap();
        assert!(autocov(&x, 1).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn autocovariance_matches_theory() {
        let n = 1 << 14;
        let x = fgn(0.7, n, 11).unwrap();
        let tol = 4.0 / (n as f64).sqrt();
        for lag in 1..=5 {
            let diff = autocov(&x, lag) - fgn_autocovariance(0.7, lag);
            assert!(diff.abs() < tol, "lag {lag}: diff {diff}");
        }
        let var = autocov(&x, 0);
        assert!((var - 1.0).abs() < tol, "variance {var}");
    }

    #[test]
    fn hosking_autocovariance_matches_theory() {
        let n = 4096;
        // average over a few seeds to tame the long-memory sampling error
        let tol = 4.0 / (n as f64).sqrt();
        for lag in 1..=3 {
            let avg: f64 = (0..4)
                .map(|s| autocov(&fgn_hosking(0.7, n, s).unwrap(), lag))
                .sum::<f64>()
                / 4.0;
            assert!((avg - fgn_autocovariance(0.7, lag)).abs() < tol, "lag {lag}: {avg}");
        }
    }

    #[test]
    fn odd_lengths_and_bad_params() {
        assert_eq!(fgn(0.6, 1001, 1).unwrap().len(), 1001);
        assert!(fgn(1.0, 10, 1).is_err());
        assert!(fgn(0.0, 10, 1).is_err());
        assert!(fgn(0.5, 1, 1).is_err());
        assert!(pareto(0.0, 10, 1).is_err());
    }

    #[test]
    fn deterministic_by_seed() {
        assert_eq!(fgn(0.7, 512, 9).unwrap(), fgn(0.7, 512, 9).unwrap());
        assert_ne!(fgn(0.7, 512, 9).unwrap(), fgn(0.7, 512, 10).unwrap());
        assert_eq!(pareto(2.0, 50, 1).unwrap(), pareto(2.0, 50, 1).unwrap());
        assert_eq!(iid_gaussian(50, 1), iid_gaussian(50, 1));
    }

    #[test]
    fn cumsum_basics() {
        assert_eq!(cumsum(&[1.0, 2.0, 3.0]), vec![1.0, 3.0, 6.0]);
        assert_eq!(cumsum(&[0.0; 4]), vec![0.0; 4]);
    }

    #[test]
    fn pareto_support_and_median() {
        let alpha = 2.5;
        let n = 20_000;
        let mut x = pareto(alpha, n, 5).unwrap();
        assert!(x.iter().all(|&v| v >= 1.0));
        x.sort_by(f64::total_cmp);
        let median = x[n / 2];
        let expected = 2f64.powf(1.0 / alpha);
        // sd of the sample median: 1 / (2 f(m) sqrt(n)), f(m) = alpha m^{-alpha-1}
        let f_m = alpha * expected.powf(-alpha - 1.0);
        let se = 1.0 / (2.0 * f_m * (n as f64).sqrt());
        assert!((median - expected).abs() < 4.0 * se);
    }

    #[test]
    fn gaussian_mean() {
        let n = 10_000;
        let x = iid_gaussian(n, 2);
        let m = x.iter().sum::<f64>() / n as f64;
        assert!(m.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn weekday_calendar_skips_weekends() {
        let start = chrono::NaiveDate::from_ymd_opt(2015, 1, 2).unwrap(); // Friday
        let c = weekday_calendar(start, 3);
        assert_eq!(c[1], chrono::NaiveDate::from_ymd_opt(2015, 1, 5).unwrap());
    }

    #[test]
    fn synthetic_panel_has_valid_amounts() {
        let cal = weekday_calendar(chrono::NaiveDate::from_ymd_opt(2015, 1, 2).unwrap(), 300);
        let mut groups = BTreeMap::new();
        groups.insert(InvestorGroup::Retail, GeneratorSpec::fbm(0.35, 0, 0));
        groups.insert(InvestorGroup::Foreign, GeneratorSpec::fgn(0.55, 0, 0));
        let panel = synthetic_panel(&cal, &groups, 7).unwrap();
        assert_eq!(panel.groups(), vec![InvestorGroup::Retail, InvestorGroup::Foreign]);
        assert_eq!(panel.len(), 300);
    }
}
