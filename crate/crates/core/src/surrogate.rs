//! Surrogate null models: time shuffles (keep the marginal distribution) and
//! Fourier phase randomization (keep the power spectrum).

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dfa::{dfa_hurst, DfaConfig};
use crate::error::{Error, Result};
use crate::numeric::{mean, quantile_sorted, sample_std};
use crate::synth::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Shuffle,
    PhaseRandomize,
}

impl SurrogateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SurrogateKind::Shuffle => "shuffle",
            SurrogateKind::PhaseRandomize => "phase_randomize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub seed: u64,
    pub count: usize,
}

/// Fisher-Yates permutation driven by `seed`.
pub fn shuffle(series: &[f64], seed: u64) -> Vec<f64> {
    shuffle_stream(series, seed, 0)
}

fn shuffle_stream(series: &[f64], seed: u64, stream: u64) -> Vec<f64> {
    let mut out = series.to_vec();
    out.shuffle(&mut rng(seed, stream));
    out
}

/// Replaces Fourier phases with uniform random ones while keeping amplitudes.
/// The zero-frequency term and, for even lengths, the Nyquist term are kept
/// as they are, so the output is real with the input's mean and periodogram.
pub fn phase_randomize(series: &[f64], seed: u64) -> Result<Vec<f64>> {
    phase_randomize_stream(series, seed, 0)
}

fn phase_randomize_stream(series: &[f64], seed: u64, stream: u64) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "phase randomization needs at least 4 values, got {n}"
        )));
    }
    let m = mean(series);
    let mut spec: Vec<Complex64> = series.iter().map(|x| Complex64::new(x - m, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut spec);

    let mut r = rng(seed, stream);
    // Independent conjugate pairs are k = 1 .. ceil(n/2) - 1; k = n/2 is the
    // self-conjugate Nyquist bin when n is even.
    let pairs = (n - 1) / 2;
    for k in 1..=pairs {
        let amp = spec[k].norm();
        let phase = r.random::<f64>() * std::f64::consts::TAU;
        spec[k] = Complex64::from_polar(amp, phase);
        spec[n - k] = spec[k].conj();
    }
    spec[0] = Complex64::new(0.0, 0.0);
    if n % 2 == 0 {
        spec[n / 2] = Complex64::new(spec[n / 2].re, 0.0);
    }

    planner.plan_fft_inverse(n).process(&mut spec);
    let scale = 1.0 / n as f64;
    Ok(spec.iter().map(|c| c.re * scale + m).collect())
}

/// Surrogate `index` of `spec`, reproducible without generating the others.
pub fn surrogate(series: &[f64], spec: &SurrogateSpec, index: usize) -> Result<Vec<f64>> {
    match spec.kind {
        SurrogateKind::Shuffle => Ok(shuffle_stream(series, spec.seed, index as u64)),
        SurrogateKind::PhaseRandomize => phase_randomize_stream(series, spec.seed, index as u64),
    }
}

/// Distribution of DFA estimates over a family of surrogates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateBand {
    pub kind: SurrogateKind,
    pub seed: u64,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single surrogate.
    pub std: Option<f64>,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    /// Individual estimates ordered by surrogate index.
    pub hurst: Vec<f64>,
}

impl SurrogateBand {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["index", "H"])?;
        for (i, h) in self.hurst.iter().enumerate() {
            wtr.write_record([i.to_string(), h.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn surrogate_band(series: &[f64], spec: &SurrogateSpec, config: &DfaConfig) -> Result<SurrogateBand> {
    if spec.count == 0 {
        return Err(Error::InvalidConfig("surrogate count must be at least 1".into()));
    }
    let hurst: Vec<f64> = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let s = surrogate(series, spec, i)?;
            Ok(dfa_hurst(&s, config)?.hurst)
        })
        .collect::<Result<_>>()?;
    let mut sorted = hurst.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(SurrogateBand {
        kind: spec.kind,
        seed: spec.seed,
        count: spec.count,
        mean: mean(&hurst),
        std: sample_std(&hurst),
        q05: quantile_sorted(&sorted, 0.05),
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        q95: quantile_sorted(&sorted, 0.95),
        hurst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodogram(x: &[f64]) -> Vec<f64> {
        // direct O(n^2) DFT, independent of the FFT path
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let a = -std::f64::consts::TAU * (k * t) as f64 / n as f64;
                    re += (v - m) * a.cos();
                    im += (v - m) * a.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn singleton_and_multiset() {
        assert_eq!(shuffle(&[7.0], 1), vec![7.0]);
        let x: Vec<f64> = (0..50).map(|i| (i * 37 % 11) as f64).collect();
        let mut a = shuffle(&x, 3);
        let mut b = x.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        assert_eq!(shuffle(&x, 3), shuffle(&x, 3));
    }

    #[test]
    fn phase_randomization_keeps_spectrum_and_mean() {
        for n in [64usize, 65] {
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() * 4.0 + (i % 7) as f64 + 10.0).collect();
            let y = phase_randomize(&x, 5).unwrap();
            assert_ne!(x, y);
            let (px, py) = (periodogram(&x), periodogram(&y));
            let top = px.iter().cloned().fold(0.0, f64::max);
            for (a, b) in px.iter().zip(&py) {
                assert!((a - b).abs() <= 1e-8 * top.max(*a), "{a} vs {b}");
            }
            let mx = x.iter().sum::<f64>() / n as f64;
            let my = y.iter().sum::<f64>() / n as f64;
            assert!((mx - my).abs() < 1e-10);
        }
    }

    #[test]
    fn phase_randomization_needs_four() {
        assert!(phase_randomize(&[1.0, 2.0, 3.0], 0).is_err());
        assert!(phase_randomize(&[1.0, 2.0, 3.0, 4.0], 0).is_ok());
    }

    #[test]
    fn surrogate_index_is_addressable() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let spec = SurrogateSpec { kind: SurrogateKind::Shuffle, seed: 9, count: 5 };
        assert_eq!(surrogate(&x, &spec, 3).unwrap(), surrogate(&x, &spec, 3).unwrap());
        assert_ne!(surrogate(&x, &spec, 3).unwrap(), surrogate(&x, &spec, 4).unwrap());
        assert_eq!(surrogate(&x, &spec, 0).unwrap(), shuffle(&x, 9));
    }

    #[test]
    fn single_surrogate_band() {
        let x = crate::synth::iid_gaussian(512, 1);
        let spec = SurrogateSpec { kind: SurrogateKind::Shuffle, seed: 2, count: 1 };
        let band = surrogate_band(&x, &spec, &DfaConfig::default()).unwrap();
        assert!(band.std.is_none());
        assert_eq!(band.mean, band.hurst[0]);
        assert_eq!(band, surrogate_band(&x, &spec, &DfaConfig::default()).unwrap());
    }
}
