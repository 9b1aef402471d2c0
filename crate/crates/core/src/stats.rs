//! Volatility series, H/volatility alignment and simple OLS with t-statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::flows::TradingDay;
use crate::numeric::{compensated_sum, mean};
use crate::rolling::RollingHurst;

/// Daily log returns on a trading calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    calendar: Vec<TradingDay>,
    returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(calendar: Vec<TradingDay>, returns: Vec<f64>) -> Result<Self> {
        if calendar.len() != returns.len() {
            return Err(Error::InvalidInput(format!(
                "return series: {} dates but {} returns",
                calendar.len(),
                returns.len()
            )));
        }
        if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidInput(format!("return series: non-finite value at {i}")));
        }
        if calendar.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("return series: calendar not strictly increasing".into()));
        }
        Ok(Self { calendar, returns })
    }

    /// Log returns `ln(p_t / p_{t-1})`; the first date is consumed.
    pub fn from_prices(calendar: &[TradingDay], closes: &[f64]) -> Result<Self> {
        if calendar.len() != closes.len() || closes.len() < 2 {
            return Err(Error::InvalidInput(
                "prices: need at least two closes matching the calendar".into(),
            ));
        }
        if let Some(i) = closes.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidInput(format!("prices: close at {i} is not positive")));
        }
        let returns = closes.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        Self::new(calendar[1..].to_vec(), returns)
    }

    pub fn calendar(&self) -> &[TradingDay] {
        &self.calendar
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }
}

/// A dated real series (used for realized volatility).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatedSeries {
    pub calendar: Vec<TradingDay>,
    pub values: Vec<f64>,
}

/// Baseline realized volatility: the squared daily return.
pub fn squared_return_vol(returns: &ReturnSeries) -> DatedSeries {
    DatedSeries {
        calendar: returns.calendar.clone(),
        values: returns.returns.iter().map(|r| r * r).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Hold the last rolling H for up to `step - 1` following trading days.
    #[default]
    ForwardFill,
    /// Only pair on the rolling end dates themselves.
    StepDatesOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub date: TradingDay,
    pub h: f64,
    pub rv: f64,
}

/// Pairs rolling H with volatility on the volatility calendar.
///
/// With `lag > 0` the H known at trading day `t - lag` is paired with the
/// volatility of day `t`.
pub fn align_h_rv(
    rolling: &RollingHurst,
    rv: &DatedSeries,
    policy: FillPolicy,
    lag: usize,
) -> Result<Vec<AlignedPair>> {
    let cal = &rv.calendar;
    let max_stale = rolling.step.max(1);
    // h_at[i]: H attributable to rv calendar position i, before lagging.
    let mut h_at: Vec<Option<f64>> = vec![None; cal.len()];
    for (k, entry) in rolling.entries.iter().enumerate() {
        let Ok(start) = cal.binary_search(&entry.end_date).or_else(|pos| {
            // a date missing from the volatility calendar is filled forward only
            // when it falls inside that calendar's span
            if policy == FillPolicy::StepDatesOnly || pos == 0 || pos >= cal.len() {
                Err(())
            } else {
                Ok(pos)
            }
        }) else {
            continue;
        };
        let next_date = rolling.entries.get(k + 1).map(|e| e.end_date);
        let span = match policy {
            FillPolicy::StepDatesOnly => 1,
            FillPolicy::ForwardFill => max_stale,
        };
        for (offset, slot) in h_at[start..].iter_mut().take(span).enumerate() {
            if offset > 0 && next_date.is_some_and(|nd| cal[start + offset] >= nd) {
                break;
            }
            *slot = entry.h();
        }
    }

    let pairs: Vec<AlignedPair> = (lag..cal.len())
        .filter_map(|i| {
            h_at[i - lag].map(|h| AlignedPair {
                date: cal[i],
                h,
                rv: rv.values[i],
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyAlignment);
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdErrorKind {
    /// Homoskedastic standard errors.
    #[default]
    Classical,
    /// White heteroskedasticity-consistent errors with the n/(n-2) correction.
    Hc1,
}

/// Simple regression `y = alpha + beta * x + u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsResult {
    pub alpha: f64,
    pub beta: f64,
    pub se_alpha: f64,
    pub se_beta: f64,
    pub t_alpha: f64,
    pub t_beta: f64,
    pub r_squared: f64,
    pub n: usize,
    /// SSR / (n - 2).
    pub residual_variance: f64,
    pub std_errors: StdErrorKind,
}

impl OlsResult {
    /// Two-sided p-value of the slope under a t distribution with n - 2 d.o.f.
    pub fn p_beta(&self) -> f64 {
        two_sided_p(self.t_beta, self.n)
    }

    pub fn p_alpha(&self) -> f64 {
        two_sided_p(self.t_alpha, self.n)
    }

    pub fn beta_stars(&self) -> &'static str {
        significance_stars(self.p_beta())
    }
}

fn two_sided_p(t: f64, n: usize) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t.is_nan() {
        return 1.0;
    }
    let dist = StudentsT::new(0.0, 1.0, (n - 2) as f64).expect("n >= 3 gives positive d.o.f.");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// `***`, `**`, `*` at the 1%, 5% and 10% levels.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

/// Closed-form simple OLS with classical standard errors.
pub fn ols(y: &[f64], x: &[f64]) -> Result<OlsResult> {
    ols_with(y, x, StdErrorKind::Classical)
}

pub fn ols_with(y: &[f64], x: &[f64], kind: StdErrorKind) -> Result<OlsResult> {
    if y.len() != x.len() {
        return Err(Error::InvalidInput(format!(
            "ols: y has {} values, x has {}",
            y.len(),
            x.len()
        )));
    }
    let n = y.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("ols: need at least 3 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("ols: non-finite input".into()));
    }
    let xm = mean(x);
    let ym = mean(y);
    let sxx = compensated_sum(x.iter().map(|v| (v - xm) * (v - xm)));
    if sxx <= 0.0 || x.iter().all(|v| *v == x[0]) {
        return Err(Error::DegenerateRegressor);
    }
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)));
    let syy = compensated_sum(y.iter().map(|v| (v - ym) * (v - ym)));
    let beta = sxy / sxx;
    let alpha = ym - beta * xm;

    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - alpha - beta * a).collect();
    let ssr = compensated_sum(residuals.iter().map(|r| r * r));
    let dof = (n - 2) as f64;
    let residual_variance = ssr / dof;
    let sum_x2 = compensated_sum(x.iter().map(|v| v * v));

    let (se_alpha, se_beta) = match kind {
        StdErrorKind::Classical => (
            (residual_variance * sum_x2 / (n as f64 * sxx)).sqrt(),
            (residual_variance / sxx).sqrt(),
        ),
        StdErrorKind::Hc1 => {
            // Sandwich (X'X)^-1 X' diag(u^2) X (X'X)^-1 written out for one regressor.
            let scale = n as f64 / dof;
            let var_beta = compensated_sum(
                x.iter().zip(&residuals).map(|(a, u)| (a - xm) * (a - xm) * u * u),
            ) / (sxx * sxx);
            let var_alpha = compensated_sum(x.iter().zip(&residuals).map(|(a, u)| {
                let w = 1.0 / n as f64 - xm * (a - xm) / sxx;
                w * w * u * u
            }));
            ((scale * var_alpha).sqrt(), (scale * var_beta).sqrt())
        }
    };

    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(OlsResult {
        alpha,
        beta,
        se_alpha,
        se_beta,
        t_alpha: alpha / se_alpha,
        t_beta: beta / se_beta,
        r_squared,
        n,
        residual_variance,
        std_errors: kind,
    })
}
