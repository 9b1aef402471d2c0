//! Detrended fluctuation analysis.
//!
//! The series is mean-adjusted and integrated into a profile. For every scale
//! `n` on a log-spaced grid the profile is cut into `floor(T / n)` leading,
//! non-overlapping blocks (any trailing remainder is discarded), a degree-`m`
//! polynomial is removed from each block by least squares, and
//!
//! ```text
//! F(n) = sqrt( mean_b( mean_j r_bj^2 ) )
//! ```
//!
//! The Hurst exponent is the OLS slope of `log10 F(n)` on `log10 n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ols;

/// F(n) values below this multiple of `max |Y|` are treated as exact zeros.
pub const F_FLOOR_RELATIVE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DfaConfig {
    /// Polynomial detrending order `m`.
    pub detrend_order: usize,
    pub n_min: usize,
    /// Largest scale as a fraction of the series length.
    pub n_max_fraction: f64,
    /// Number of log-spaced scale targets before rounding and dedup.
    pub n_scales: usize,
    /// Minimum number of blocks a scale must provide.
    pub min_blocks: usize,
}

impl Default for DfaConfig {
    fn default() -> Self {
        Self {
            detrend_order: 2,
            n_min: 8,
            n_max_fraction: 0.25,
            n_scales: 20,
            min_blocks: 4,
        }
    }
}

impl DfaConfig {
    pub fn with_order(mut self, detrend_order: usize) -> Self {
        self.detrend_order = detrend_order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.detrend_order == 0 {
            return Err(Error::InvalidConfig("detrend_order must be at least 1".into()));
        }
        if self.n_min < self.detrend_order + 2 {
            return Err(Error::InvalidConfig(format!(
                "n_min = {} must be at least detrend_order + 2 = {}",
                self.n_min,
                self.detrend_order + 2
            )));
        }
        if !(self.n_max_fraction > 0.0 && self.n_max_fraction <= 1.0) {
            return Err(Error::InvalidConfig("n_max_fraction must lie in (0, 1]".into()));
        }
        if self.n_scales < 4 {
            return Err(Error::InvalidConfig("n_scales must be at least 4".into()));
        }
        if self.min_blocks < 2 {
            return Err(Error::InvalidConfig("min_blocks must be at least 2".into()));
        }
        Ok(())
    }
}

/// Sampled `(n, F(n))` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationCurve {
    pub points: Vec<(usize, f64)>,
    pub detrend_order: usize,
    pub series_length: usize,
    /// Scales whose F(n) fell to the numerical floor and were left out.
    pub dropped_scales: Vec<usize>,
}

impl FluctuationCurve {
    pub fn scales(&self) -> impl Iterator<Item = usize> + '_ {
        self.points.iter().map(|p| p.0)
    }

    /// `n,F` rows for log-log plotting.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["n", "F"])?;
        for (n, f) in &self.points {
            wtr.write_record([n.to_string(), f.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaFit {
    pub hurst: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub admissible_scales: (usize, usize),
    pub n_points_used: usize,
    pub detrend_order: usize,
}

/// Integrated profile `Y[k] = sum_{t <= k} (X_t - mean X)`.
pub fn profile(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort { length: series.len() });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value at index {i}")));
    }
    let mean = crate::numeric::mean(series);
    let mut acc = 0.0;
    Ok(series
        .iter()
        .map(|x| {
            acc += x - mean;
            acc
        })
        .collect())
}

/// Log-spaced integer scales between `n_min` and `floor(T * n_max_fraction)`,
/// keeping only scales with at least `min_blocks` blocks.
pub fn make_scale_grid(length: usize, config: &DfaConfig) -> Result<Vec<usize>> {
    config.validate()?;
    let n_min = config.n_min;
    let n_max = ((length as f64 * config.n_max_fraction).floor() as usize).max(n_min);
    let k = config.n_scales;
    let ratio = n_max as f64 / n_min as f64;
    let mut grid: Vec<usize> = (0..k)
        .map(|i| {
            let target = n_min as f64 * ratio.powf(i as f64 / (k - 1) as f64);
            target.round() as usize
        })
        .filter(|&n| n >= n_min && n <= n_max && length / n >= config.min_blocks)
        .collect();
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::SeriesTooShort { length });
    }
    Ok(grid)
}

/// Orthonormal basis of polynomials up to `order` sampled on `n` points mapped
/// to [-1, 1], built by modified Gram-Schmidt.
fn poly_basis(n: usize, order: usize) -> Result<Vec<Vec<f64>>> {
    let coords: Vec<f64> = if n == 1 {
        vec![0.0]
    } else {
        (0..n)
            .map(|j| 2.0 * j as f64 / (n - 1) as f64 - 1.0)
            .collect()
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for degree in 0..=order {
        // explicit products: `powi` may round differently between builds
        let mut v: Vec<f64> = coords.iter().map(|&u| (0..degree).fold(1.0, |acc, _| acc * u)).collect();
        let raw_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for q in &basis {
            let c: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 1e-10 * raw_norm.max(1e-300)) {
            return Err(Error::SingularFit { scale: n, order });
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    Ok(basis)
}

/// Mean square residual of `block` after projecting out `basis`.
fn block_mean_square(block: &[f64], basis: &[Vec<f64>], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(block);
    for q in basis {
        let c: f64 = q.iter().zip(scratch.iter()).map(|(a, b)| a * b).sum();
        scratch.iter_mut().zip(q).for_each(|(r, qi)| *r -= c * qi);
    }
    scratch.iter().map(|r| r * r).sum::<f64>() / block.len() as f64
}

/// F(n) at one scale. Blocks are accumulated in index order.
pub fn fluctuation_at(profile: &[f64], scale: usize, order: usize) -> Result<f64> {
    if scale == 0 || scale > profile.len() {
        return Err(Error::InvalidInput(format!(
            "scale {scale} invalid for profile of length {}",
            profile.len()
        )));
    }
    let basis = poly_basis(scale, order)?;
    let blocks = profile.len() / scale;
    let mut scratch = Vec::with_capacity(scale);
    let total: f64 = profile
        .chunks_exact(scale)
        .take(blocks)
        .map(|b| block_mean_square(b, &basis, &mut scratch))
        .sum();
    Ok((total / blocks as f64).sqrt())
}

/// Fluctuation function over `scales`; scales at the numerical floor are
/// dropped from the curve.
pub fn fluctuation(profile: &[f64], scales: &[usize], order: usize) -> Result<FluctuationCurve> {
    if scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("scales must be strictly increasing".into()));
    }
    let values: Vec<f64> = scales
        .par_iter()
        .map(|&n| fluctuation_at(profile, n, order))
        .collect::<Result<_>>()?;
    let scale_ref = profile.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
    let floor = F_FLOOR_RELATIVE * scale_ref;
    let mut points = Vec::with_capacity(scales.len());
    let mut dropped = Vec::new();
    for (&n, f) in scales.iter().zip(values) {
        if f > floor && f.is_finite() {
            points.push((n, f));
        } else {
            dropped.push(n);
        }
    }
    Ok(FluctuationCurve {
        points,
        detrend_order: order,
        series_length: profile.len(),
        dropped_scales: dropped,
    })
}

/// OLS of `log10 F` on `log10 n`, optionally restricted to `[lo, hi]`.
pub fn fit_hurst(curve: &FluctuationCurve, fit_range: Option<(usize, usize)>) -> Result<DfaFit> {
    let used: Vec<(usize, f64)> = curve
        .points
        .iter()
        .copied()
        .filter(|&(n, _)| fit_range.is_none_or(|(lo, hi)| n >= lo && n <= hi))
        .collect();
    if used.len() < 4 {
        return Err(Error::InsufficientScales { found: used.len() });
    }
    let x: Vec<f64> = used.iter().map(|p| (p.0 as f64).log10()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.1.log10()).collect();
    let fit = ols(&y, &x)?;
    Ok(DfaFit {
        hurst: fit.beta,
        intercept: fit.alpha,
        slope_stderr: fit.se_beta,
        r_squared: fit.r_squared,
        admissible_scales: (used[0].0, used[used.len() - 1].0),
        n_points_used: used.len(),
        detrend_order: curve.detrend_order,
    })
}

/// Profile, scale grid and fluctuation curve for `series`.
pub fn dfa_curve(series: &[f64], config: &DfaConfig) -> Result<FluctuationCurve> {
    config.validate()?;
    let y = profile(series)?;
    let grid = make_scale_grid(series.len(), config)?;
    fluctuation(&y, &grid, config.detrend_order)
}

/// End-to-end static DFA estimate of the Hurst exponent.
pub fn dfa_hurst(series: &[f64], config: &DfaConfig) -> Result<DfaFit> {
    fit_hurst(&dfa_curve(series, config)?, None)
}
