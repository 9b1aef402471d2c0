#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use flowmem::pipeline::RunConfig;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Bundled config with its output redirected to `out`.
pub fn bundled_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&data_dir().join("config.json")).expect("bundled config");
    cfg.out_dir = out.display().to_string();
    cfg
}

/// File name -> contents for every regular file directly under `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            out.insert(
                entry.file_name().to_string_lossy().into_owned(),
                fs::read(entry.path()).unwrap(),
            );
        }
    }
    out
}

/// Closed-form OLS with plain sums, used as an oracle.
pub fn naive_ols(y: &[f64], x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let beta = sxy / sxx;
    (my - beta * mx, beta)
}

/// Persistent series with Pareto(2.5) marginals: fGn(0.8) pushed through the
/// Gaussian CDF and the Pareto quantile function.
pub fn heavy_tailed_persistent(n: usize, seed: u64) -> Vec<f64> {
    let z = flowmem::synth::fgn(0.8, n, seed).unwrap();
    z.iter()
        .map(|&v| flowmem::tails::gaussian_ccdf(0.0, 1.0, v).powf(-1.0 / 2.5))
        .collect()
}

pub fn calendar(n: usize) -> Vec<chrono::NaiveDate> {
    flowmem::synth::weekday_calendar(chrono::NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(), n)
}
