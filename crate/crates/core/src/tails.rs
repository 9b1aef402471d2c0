//! Heavy-tail diagnostics: empirical CCDF, a mean/variance matched Gaussian
//! reference, and power-law exponents from the upper tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ols;

pub const MIN_VALUES: usize = 10;
pub const MIN_TAIL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSide {
    Upper,
    Lower,
    /// Tail of `|x|`; the default, since NET flows are signed.
    #[default]
    Absolute,
}

impl TailSide {
    /// Maps values so that the requested tail becomes the upper tail.
    pub fn transform(self, values: &[f64]) -> Vec<f64> {
        match self {
            TailSide::Upper => values.to_vec(),
            TailSide::Lower => values.iter().map(|v| -v).collect(),
            TailSide::Absolute => values.iter().map(|v| v.abs()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoints {
    /// `(x, P(X > x))`, `x` strictly increasing.
    pub points: Vec<(f64, f64)>,
    pub side: TailSide,
    /// All observations were equal; the curve is a single point with p = 1.
    pub degenerate: bool,
}

/// `p(x) = #{obs > x} / N` at each distinct observed value. The largest
/// value has p = 0 and is left out, so every point can go on a log axis.
pub fn empirical_ccdf(values: &[f64], side: TailSide) -> Result<CcdfPoints> {
    if values.len() < MIN_VALUES {
        return Err(Error::InvalidInput(format!(
            "CCDF needs at least {MIN_VALUES} values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("CCDF input contains non-finite values".into()));
    }
    let mut x = side.transform(values);
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if x[0] == x[n - 1] {
        log::warn!("all {n} values are equal; CCDF is degenerate");
        return Ok(CcdfPoints {
            points: vec![(x[0], 1.0)],
            side,
            degenerate: true,
        });
    }
    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[j + 1] == x[i] {
            j += 1;
        }
        let above = n - (j + 1);
        if above > 0 {
            points.push((x[i], above as f64 / n as f64));
        }
        i = j + 1;
    }
    Ok(CcdfPoints {
        points,
        side,
        degenerate: false,
    })
}

/// Gaussian `P(X > x) = erfc((x - mean) / (std sqrt 2)) / 2` at `xs`
/// (sorted and deduplicated).
pub fn gaussian_ccdf_reference(mean: f64, std: f64, xs: &[f64]) -> Result<CcdfPoints> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidInput(format!("reference std must be positive, got {std}")));
    }
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    Ok(CcdfPoints {
        points: xs
            .into_iter()
            .map(|x| (x, gaussian_ccdf(mean, std, x)))
            .collect(),
        side: TailSide::Upper,
        degenerate: false,
    })
}

pub fn gaussian_ccdf(mean: f64, std: f64, x: f64) -> f64 {
    0.5 * libm::erfc((x - mean) / (std * std::f64::consts::SQRT_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    CcdfOls,
    Hill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub exponent: f64,
    pub fit_xmin: f64,
    pub n_tail: usize,
    pub method: TailMethod,
    pub stderr: f64,
    /// Log-log fit quality; only for `CcdfOls`.
    pub r_squared: Option<f64>,
}

/// `max(10, floor(N * tail_fraction))`.
pub fn tail_size(n: usize, tail_fraction: f64) -> usize {
    MIN_TAIL.max((n as f64 * tail_fraction).floor() as usize)
}

/// Power-law exponent from CCDF points by OLS of `log p` on `log x`
/// (exponent = -slope).
pub fn ccdf_ols_exponent(points: &[(f64, f64)]) -> Result<TailFit> {
    if points.len() < MIN_TAIL {
        return Err(Error::InsufficientTail(format!(
            "{} CCDF points, need {MIN_TAIL}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, p)| !(x > 0.0) || !(p > 0.0)) {
        return Err(Error::InsufficientTail("nonpositive value in the tail".into()));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let lp: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = ols(&lp, &lx)?;
    Ok(TailFit {
        exponent: -fit.beta,
        fit_xmin: points[0].0,
        n_tail: points.len(),
        method: TailMethod::CcdfOls,
        stderr: fit.se_beta,
        r_squared: Some(fit.r_squared),
    })
}

/// Hill estimator `k / sum_{i<k} ln(x_(i) / x_(k))` over the top `k` order
/// statistics (descending, zero-based), with standard error `alpha / sqrt k`.
pub fn hill_exponent(values: &[f64], k: usize) -> Result<TailFit> {
    if k < MIN_TAIL || k >= values.len() {
        return Err(Error::InsufficientTail(format!(
            "Hill needs {MIN_TAIL} <= k < N, got k = {k}, N = {}",
            values.len()
        )));
    }
    let mut desc = values.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let threshold = desc[k];
    if !(threshold > 0.0) {
        return Err(Error::InsufficientTail(format!(
            "nonpositive threshold {threshold} in the tail"
        )));
    }
    let log_sum: f64 = desc[..k].iter().map(|x| (x / threshold).ln()).sum();
    if !(log_sum > 0.0) {
        return Err(Error::InsufficientTail("tail values are all equal".into()));
    }
    let alpha = k as f64 / log_sum;
    Ok(TailFit {
        exponent: alpha,
        fit_xmin: threshold,
        n_tail: k,
        method: TailMethod::Hill,
        stderr: alpha / (k as f64).sqrt(),
        r_squared: None,
    })
}

/// Fits the upper tail of `side.transform(values)` with `n_tail` observations.
pub fn fit_tail_exponent(
    values: &[f64],
    tail_fraction: f64,
    method: TailMethod,
    side: TailSide,
) -> Result<TailFit> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "tail_fraction {tail_fraction} outside (0, 1)"
        )));
    }
    let x = side.transform(values);
    let k = tail_size(x.len(), tail_fraction);
    if k >= x.len() {
        return Err(Error::InsufficientTail(format!(
            "{} values cannot supply a tail of {k}",
            x.len()
        )));
    }
    match method {
        TailMethod::Hill => hill_exponent(&x, k),
        TailMethod::CcdfOls => {
            let mut sorted = x.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            // k points above the (k+1)-th largest value, the same threshold Hill uses
            let xmin = sorted[k];
            if !(xmin > 0.0) {
                return Err(Error::InsufficientTail(format!(
                    "nonpositive value {xmin} in the tail"
                )));
            }
            let ccdf = empirical_ccdf(&x, TailSide::Upper)?;
            let tail: Vec<(f64, f64)> = ccdf.points.into_iter().filter(|p| p.0 >= xmin).collect();
            ccdf_ols_exponent(&tail)
        }
    }
}

/// Writes `x,p_empirical,p_gaussian` for a log-log plot.
pub fn write_ccdf_csv<W: std::io::Write>(
    empirical: &CcdfPoints,
    reference: &CcdfPoints,
    writer: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["x", "p_empirical", "p_gaussian"])?;
    for ((x, p), (_, g)) in empirical.points.iter().zip(&reference.points) {
        wtr.write_record([x.to_string(), p.to_string(), g.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
