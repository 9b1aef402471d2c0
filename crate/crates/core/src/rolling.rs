//! Rolling-window DFA and regime-window summaries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dfa::{dfa_hurst, make_scale_grid, DfaConfig};
use crate::error::{Error, Result};
use crate::flows::{SeriesKey, TradingDay};
use crate::numeric::{mean, population_std};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollingParams {
    /// Window length in trading days.
    pub window: usize,
    /// Step between window starts in trading days.
    pub step: usize,
}

impl Default for RollingParams {
    fn default() -> Self {
        Self { window: 250, step: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub h: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// One window, stamped at its last trading day. Exactly one of `fit` and
/// `gap` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingEntry {
    pub end_date: TradingDay,
    /// Position of `end_date` in the input calendar.
    pub end_index: usize,
    pub fit: Option<WindowFit>,
    pub gap: Option<String>,
}

impl RollingEntry {
    pub fn h(&self) -> Option<f64> {
        self.fit.map(|f| f.h)
    }

    pub fn is_gap(&self) -> bool {
        self.fit.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingHurst {
    pub label: Option<SeriesKey>,
    pub window: usize,
    pub step: usize,
    pub entries: Vec<RollingEntry>,
}

impl RollingHurst {
    pub fn hurst_values(&self) -> Vec<f64> {
        self.entries.iter().filter_map(RollingEntry::h).collect()
    }

    /// `end_date,H,stderr,r2`; gap rows leave the numeric columns empty.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["end_date", "H", "stderr", "r2"])?;
        for e in &self.entries {
            let date = e.end_date.format(crate::flows::DATE_FORMAT).to_string();
            match e.fit {
                Some(f) => wtr.write_record([
                    date,
                    f.h.to_string(),
                    f.stderr.to_string(),
                    f.r_squared.to_string(),
                ])?,
                None => wtr.write_record([date, String::new(), String::new(), String::new()])?,
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// DFA on every window `[t, t + W)` for `t = 0, s, 2s, ...` with `t + W <= T`.
///
/// The scale grid is derived from `W` with the same rule as the static
/// analysis, so it is identical for every window. Windows whose fit fails are
/// kept as gap entries.
pub fn rolling_hurst(
    calendar: &[TradingDay],
    values: &[f64],
    params: RollingParams,
    config: &DfaConfig,
) -> Result<RollingHurst> {
    if calendar.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "calendar has {} dates but series has {} values",
            calendar.len(),
            values.len()
        )));
    }
    if params.window == 0 || params.step == 0 {
        return Err(Error::InvalidConfig("window and step must be positive".into()));
    }
    if values.len() < params.window {
        return Err(Error::WindowTooLong {
            length: values.len(),
            window: params.window,
        });
    }
    let grid = make_scale_grid(params.window, config)?;
    if grid.len() < 4 {
        return Err(Error::InvalidConfig(format!(
            "window {} yields only {} DFA scales",
            params.window,
            grid.len()
        )));
    }

    let starts: Vec<usize> = (0..=values.len() - params.window)
        .step_by(params.step)
        .collect();
    let entries = starts
        .par_iter()
        .map(|&start| {
            let end = start + params.window - 1;
            let (fit, gap) = match dfa_hurst(&values[start..=end], config) {
                Ok(f) => (
                    Some(WindowFit {
                        h: f.hurst,
                        stderr: f.slope_stderr,
                        r_squared: f.r_squared,
                        n_points: f.n_points_used,
                    }),
                    None,
                ),
                Err(e) => (None, Some(e.to_string())),
            };
            RollingEntry {
                end_date: calendar[end],
                end_index: end,
                fit,
                gap,
            }
        })
        .collect();
    Ok(RollingHurst {
        label: None,
        window: params.window,
        step: params.step,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeWindow {
    pub label: String,
    pub start: TradingDay,
    pub end: TradingDay,
}

impl RegimeWindow {
    pub fn new(label: impl Into<String>, start: TradingDay, end: TradingDay) -> Result<Self> {
        let w = Self {
            label: label.into(),
            start,
            end,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::InvalidConfig(format!(
                "regime `{}`: start must precede end",
                self.label
            )));
        }
        Ok(())
    }

    pub fn contains(&self, date: TradingDay) -> bool {
        self.start <= date && date <= self.end
    }
}

/// Stress episodes used as the default regime windows: the 2018-2019 tariff
/// tensions, the COVID-19 period and the 2022-2024 disinflation phase.
pub fn default_stress_regimes() -> Vec<RegimeWindow> {
    let d = |s: &str| crate::flows::parse_date(s).expect("static date");
    vec![
        RegimeWindow { label: "tariff".into(), start: d("2018-01-01"), end: d("2019-12-31") },
        RegimeWindow { label: "covid".into(), start: d("2020-01-20"), end: d("2021-12-31") },
        RegimeWindow { label: "disinflation".into(), start: d("2022-11-01"), end: d("2024-10-31") },
    ]
}

/// Level and dispersion of rolling H inside a regime window. Statistics are
/// `None` when no fitted entry falls inside the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub label: String,
    pub n_obs: usize,
    pub n_gaps: usize,
    pub mean_h: Option<f64>,
    /// Population standard deviation.
    pub std_h: Option<f64>,
    pub min_h: Option<f64>,
    pub max_h: Option<f64>,
}

pub fn regime_summary(rolling: &RollingHurst, windows: &[RegimeWindow]) -> Vec<RegimeSummary> {
    windows
        .iter()
        .map(|w| {
            let inside: Vec<&RollingEntry> = rolling
                .entries
                .iter()
                .filter(|e| w.contains(e.end_date))
                .collect();
            let hs: Vec<f64> = inside.iter().filter_map(|e| e.h()).collect();
            let n_gaps = inside.len() - hs.len();
            if hs.is_empty() {
                return RegimeSummary {
                    label: w.label.clone(),
                    n_obs: 0,
                    n_gaps,
                    mean_h: None,
                    std_h: None,
                    min_h: None,
                    max_h: None,
                };
            }
            RegimeSummary {
                label: w.label.clone(),
                n_obs: hs.len(),
                n_gaps,
                mean_h: Some(mean(&hs)),
                std_h: Some(population_std(&hs)),
                min_h: hs.iter().copied().reduce(f64::min),
                max_h: hs.iter().copied().reduce(f64::max),
            }
        })
        .collect()
}
