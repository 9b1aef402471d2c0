//! End-to-end analysis run with file-based stage boundaries.
//!
//! Each stage reads its inputs (flows CSV, prices CSV or an earlier stage's
//! JSON), computes per-series results and writes CSV/JSON artifacts into an
//! output directory:
//!
//! | stage       | artifacts                                                        |
//! |-------------|------------------------------------------------------------------|
//! | `ingest`    | `ingest.json`                                                    |
//! | `tails`     | `tails.json`, `fig2_ccdf_<series>.csv`                           |
//! | `dfa`       | `dfa.json`, `fig3_dfa_<series>.csv`                              |
//! | `surrogate` | `surrogates.json`, `fig3_dfa_<series>_shuffled.csv`              |
//! | `rolling`   | `rolling.json`, `regimes.json`, `fig4_rolling_<series>.csv`      |
//! | `regress`   | `regression.json`, `table1_regression.csv`                       |
//! | `report`    | `report.json`                                                    |
//!
//! [`run_pipeline`] runs every stage into a staging directory and moves the
//! artifacts into place only when all stages succeed; otherwise the partial
//! output is left in `<out>/quarantine`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dfa::{dfa_curve, fit_hurst, DfaConfig, DfaFit};
use crate::error::{Error, Result};
use crate::flows::{load_panel, parse_date, FlowPanel, SeriesKey, TradingDay, DATE_FORMAT};
use crate::numeric::{mean, population_std};
use crate::rolling::{regime_summary, rolling_hurst, RegimeSummary, RegimeWindow, RollingHurst, RollingParams};
use crate::stats::{align_h_rv, ols_with, squared_return_vol, FillPolicy, OlsResult, ReturnSeries, StdErrorKind};
use crate::surrogate::{surrogate, surrogate_band, SurrogateBand, SurrogateKind, SurrogateSpec};
use crate::tails::{
    empirical_ccdf, fit_tail_exponent, gaussian_ccdf_reference, write_ccdf_csv, TailFit, TailMethod,
    TailSide,
};

pub const TOOLKIT: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const OUT_DIR_ENV: &str = "FLOWMEM_OUT";

/// Hill and CCDF-OLS exponents further apart than this are flagged.
pub const TAIL_DISAGREEMENT: f64 = 0.3;

// --- configuration ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputPaths {
    pub flows: String,
    #[serde(default)]
    pub prices: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub kinds: Vec<SurrogateKind>,
    pub count: usize,
    /// Also write the individual surrogate estimates as CSV.
    pub write_values: bool,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            kinds: vec![SurrogateKind::Shuffle, SurrogateKind::PhaseRandomize],
            count: 50,
            write_values: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TailConfig {
    pub tail_fraction: f64,
    pub side: TailSide,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            tail_fraction: 0.05,
            side: TailSide::Absolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionConfig {
    pub fill_policy: FillPolicy,
    /// Add HC1 standard errors next to the classical ones.
    pub robust_se: bool,
    /// Pair volatility at `t` with H known at `t - lag_k`.
    pub lag_k: usize,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            fill_policy: FillPolicy::ForwardFill,
            robust_se: true,
            lag_k: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub inputs: InputPaths,
    pub out_dir: String,
    pub seed: u64,
    #[serde(default)]
    pub dfa: DfaConfig,
    /// Also report DFA(1) static fits.
    #[serde(default = "default_true")]
    pub dfa1_check: bool,
    #[serde(default)]
    pub rolling: RollingParams,
    #[serde(default)]
    pub surrogates: SurrogateConfig,
    #[serde(default)]
    pub tails: TailConfig,
    #[serde(default = "crate::rolling::default_stress_regimes")]
    pub regimes: Vec<RegimeWindow>,
    #[serde(default)]
    pub regression: RegressionConfig,
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn new(flows: impl Into<String>, out_dir: impl Into<String>, seed: u64) -> Self {
        Self {
            inputs: InputPaths {
                flows: flows.into(),
                prices: None,
            },
            out_dir: out_dir.into(),
            seed,
            dfa: DfaConfig::default(),
            dfa1_check: true,
            rolling: RollingParams::default(),
            surrogates: SurrogateConfig::default(),
            tails: TailConfig::default(),
            regimes: crate::rolling::default_stress_regimes(),
            regression: RegressionConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative input paths are taken relative to the
    /// file's directory; `out_dir` stays relative to the working directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &str| {
            if Path::new(p).is_relative() {
                base.join(p).display().to_string()
            } else {
                p.to_string()
            }
        };
        cfg.inputs.flows = resolve(&cfg.inputs.flows);
        cfg.inputs.prices = cfg.inputs.prices.as_deref().map(resolve);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pretty JSON with a trailing newline; stable field order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.dfa.validate()?;
        if self.rolling.window == 0 || self.rolling.step == 0 {
            return Err(Error::InvalidConfig("rolling window and step must be positive".into()));
        }
        if self.surrogates.count == 0 {
            return Err(Error::InvalidConfig("surrogate count must be at least 1".into()));
        }
        if !(self.tails.tail_fraction > 0.0 && self.tails.tail_fraction < 1.0) {
            return Err(Error::InvalidConfig("tail_fraction must lie in (0, 1)".into()));
        }
        for r in &self.regimes {
            r.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the analysis parameters: the serialized config without the
    /// input paths and output directory, so relocating files keeps the hash.
    pub fn config_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("inputs");
            map.remove("out_dir");
        }
        sha256_hex(value.to_string().as_bytes())
    }

    fn seed_for(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }
}

/// Seed for a named stage or series, derived from the run seed.
pub fn derive_seed(run_seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// --- artifact IO -------------------------------------------------------------

/// Writes `bytes` to `dir/name` via a temporary file and rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &target)?;
    Ok(target)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(dir, name, s.as_bytes())?;
    Ok(())
}

fn write_csv_with(dir: &Path, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(dir, name, &buf)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path,
        message: e.to_string(),
    })
}

/// Parses a `date,close` prices CSV.
pub fn read_prices(path: &Path) -> Result<(Vec<TradingDay>, Vec<f64>)> {
    let source = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    if header != ["date", "close"] {
        return Err(Error::Parse {
            path: source,
            line: 1,
            message: format!("expected header `date,close`, found `{}`", header.join(",")),
        });
    }
    let mut dates = Vec::new();
    let mut closes = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| Error::Parse {
            path: source.clone(),
            line,
            message,
        };
        dates.push(parse_date(row.get(0).unwrap_or("")).map_err(err)?);
        let close = row.get(1).unwrap_or("");
        closes.push(
            close
                .parse::<f64>()
                .map_err(|_| err(format!("bad close `{close}`")))?,
        );
    }
    Ok((dates, closes))
}

pub fn write_prices<W: Write>(calendar: &[TradingDay], closes: &[f64], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date", "close"])?;
    for (d, c) in calendar.iter().zip(closes) {
        wtr.write_record([d.format(DATE_FORMAT).to_string(), c.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

// --- stage results ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub key: SeriesKey,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub n_days: usize,
    pub first_date: TradingDay,
    pub last_date: TradingDay,
    pub series: Vec<SeriesSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub key: SeriesKey,
    pub side: TailSide,
    pub ccdf_ols: TailFit,
    pub hill: TailFit,
    /// |hill - ccdf_ols| exceeds the disagreement threshold.
    pub methods_disagree: bool,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaReport {
    pub key: SeriesKey,
    pub n_obs: usize,
    pub fit: DfaFit,
    pub dfa1: Option<DfaFit>,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    pub key: SeriesKey,
    pub bands: Vec<SurrogateBand>,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingReport {
    pub key: SeriesKey,
    pub rolling: RollingHurst,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub key: SeriesKey,
    pub summaries: Vec<RegimeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionCell {
    pub key: SeriesKey,
    pub classical: OlsResult,
    pub robust: Option<OlsResult>,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub rng: String,
    pub flows_sha256: String,
    pub prices_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingRef {
    pub artifact: String,
    pub n_windows: usize,
    pub n_gaps: usize,
    pub mean_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub key: SeriesKey,
    pub dfa: DfaFit,
    pub dfa1: Option<DfaFit>,
    pub surrogates: Vec<SurrogateBand>,
    pub tails: TailReport,
    pub rolling: RollingRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub n_days: usize,
    pub first_date: TradingDay,
    pub last_date: TradingDay,
    pub series: Vec<SeriesResult>,
    pub regimes: Vec<RegimeReport>,
    pub regression: Option<Vec<RegressionCell>>,
    /// Every artifact the report refers to, relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunReport {
    /// Series keys ordered by static H, most persistent first.
    pub fn ranking(&self, flow: crate::flows::FlowType) -> Vec<SeriesKey> {
        let mut v: Vec<&SeriesResult> = self.series.iter().filter(|s| s.key.flow == flow).collect();
        v.sort_by(|a, b| b.dfa.hurst.total_cmp(&a.dfa.hurst));
        v.into_iter().map(|s| s.key).collect()
    }
}

pub const INGEST_JSON: &str = "ingest.json";
pub const TAILS_JSON: &str = "tails.json";
pub const DFA_JSON: &str = "dfa.json";
pub const SURROGATES_JSON: &str = "surrogates.json";
pub const ROLLING_JSON: &str = "rolling.json";
pub const REGIMES_JSON: &str = "regimes.json";
pub const REGRESSION_JSON: &str = "regression.json";
pub const TABLE1_CSV: &str = "table1_regression.csv";
pub const REPORT_JSON: &str = "report.json";
pub const CONFIG_JSON: &str = "config.json";

// --- stages ----------------------------------------------------------------

fn flows_path(config: &RunConfig) -> PathBuf {
    PathBuf::from(&config.inputs.flows)
}

pub fn load_inputs(config: &RunConfig) -> Result<FlowPanel> {
    load_panel(&flows_path(config))
}

pub fn ingest_stage(config: &RunConfig, dir: &Path) -> Result<IngestSummary> {
    let panel = load_inputs(config)?;
    let series = panel
        .all_series()
        .into_iter()
        .map(|s| SeriesSummary {
            key: s.key,
            mean: mean(&s.values),
            std: population_std(&s.values),
            min: s.values.iter().copied().fold(f64::INFINITY, f64::min),
            max: s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    let summary = IngestSummary {
        n_days: panel.len(),
        first_date: panel.calendar()[0],
        last_date: panel.calendar()[panel.len() - 1],
        series,
    };
    write_json(dir, INGEST_JSON, &summary)?;
    Ok(summary)
}

pub fn tails_stage(config: &RunConfig, panel: &FlowPanel, dir: &Path) -> Result<Vec<TailReport>> {
    let side = config.tails.side;
    let frac = config.tails.tail_fraction;
    let computed: Vec<(TailReport, Vec<u8>)> = panel
        .all_series()
        .par_iter()
        .map(|s| {
            let ctx = |e: Error| Error::InvalidInput(format!("{}: {e}", s.key));
            let ccdf = empirical_ccdf(&s.values, side).map_err(ctx)?;
            let transformed = side.transform(&s.values);
            let reference = gaussian_ccdf_reference(
                mean(&transformed),
                population_std(&transformed).max(f64::MIN_POSITIVE),
                &ccdf.points.iter().map(|p| p.0).collect::<Vec<_>>(),
            )
            .map_err(ctx)?;
            let mut buf = Vec::new();
            write_ccdf_csv(&ccdf, &reference, &mut buf)?;
            let ccdf_ols = fit_tail_exponent(&s.values, frac, TailMethod::CcdfOls, side).map_err(ctx)?;
            let hill = fit_tail_exponent(&s.values, frac, TailMethod::Hill, side).map_err(ctx)?;
            let methods_disagree = (ccdf_ols.exponent - hill.exponent).abs() > TAIL_DISAGREEMENT;
            Ok((
                TailReport {
                    key: s.key,
                    side,
                    ccdf_ols,
                    hill,
                    methods_disagree,
                    artifact: format!("fig2_ccdf_{}.csv", s.key.slug()),
                },
                buf,
            ))
        })
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(computed.len());
    for (report, bytes) in computed {
        write_atomic(dir, &report.artifact, &bytes)?;
        reports.push(report);
    }
    write_json(dir, TAILS_JSON, &reports)?;
    Ok(reports)
}

pub fn dfa_stage(config: &RunConfig, panel: &FlowPanel, dir: &Path) -> Result<Vec<DfaReport>> {
    let computed: Vec<(DfaReport, Vec<u8>)> = panel
        .all_series()
        .par_iter()
        .map(|s| {
            let ctx = |e: Error| Error::InvalidInput(format!("{}: {e}", s.key));
            let curve = dfa_curve(&s.values, &config.dfa).map_err(ctx)?;
            let fit = fit_hurst(&curve, None).map_err(ctx)?;
            let dfa1 = if config.dfa1_check && config.dfa.detrend_order != 1 {
                let cfg1 = config.dfa.clone().with_order(1);
                Some(fit_hurst(&dfa_curve(&s.values, &cfg1).map_err(ctx)?, None).map_err(ctx)?)
            } else {
                None
            };
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            Ok((
                DfaReport {
                    key: s.key,
                    n_obs: s.len(),
                    fit,
                    dfa1,
                    artifact: format!("fig3_dfa_{}.csv", s.key.slug()),
                },
                buf,
            ))
        })
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(computed.len());
    for (report, bytes) in computed {
        write_atomic(dir, &report.artifact, &bytes)?;
        reports.push(report);
    }
    write_json(dir, DFA_JSON, &reports)?;
    Ok(reports)
}

pub fn surrogate_spec(config: &RunConfig, key: SeriesKey, kind: SurrogateKind) -> SurrogateSpec {
    SurrogateSpec {
        kind,
        seed: config.seed_for(&format!("surrogate/{}/{}", kind.as_str(), key.slug())),
        count: config.surrogates.count,
    }
}

pub fn surrogate_stage(config: &RunConfig, panel: &FlowPanel, dir: &Path) -> Result<Vec<SurrogateReport>> {
    let computed: Vec<(SurrogateReport, Vec<(String, Vec<u8>)>)> = panel
        .all_series()
        .par_iter()
        .map(|s| {
            let ctx = |e: Error| Error::InvalidInput(format!("{}: {e}", s.key));
            let mut files = Vec::new();
            let mut bands = Vec::new();
            for &kind in &config.surrogates.kinds {
                let spec = surrogate_spec(config, s.key, kind);
                let band = surrogate_band(&s.values, &spec, &config.dfa).map_err(ctx)?;
                if config.surrogates.write_values {
                    let mut buf = Vec::new();
                    band.write_csv(&mut buf)?;
                    files.push((format!("surrogates_{}_{}.csv", kind.as_str(), s.key.slug()), buf));
                }
                bands.push(band);
            }
            // Shuffled fluctuation curve for the side-by-side log-log plot.
            let shuffled_spec = surrogate_spec(config, s.key, SurrogateKind::Shuffle);
            let shuffled = surrogate(&s.values, &shuffled_spec, 0)?;
            let curve = dfa_curve(&shuffled, &config.dfa).map_err(ctx)?;
            let artifact = format!("fig3_dfa_{}_shuffled.csv", s.key.slug());
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            files.push((artifact.clone(), buf));
            Ok((
                SurrogateReport {
                    key: s.key,
                    bands,
                    artifact,
                },
                files,
            ))
        })
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(computed.len());
    for (report, files) in computed {
        for (name, bytes) in files {
            write_atomic(dir, &name, &bytes)?;
        }
        reports.push(report);
    }
    write_json(dir, SURROGATES_JSON, &reports)?;
    Ok(reports)
}

pub fn rolling_stage(
    config: &RunConfig,
    panel: &FlowPanel,
    dir: &Path,
) -> Result<(Vec<RollingReport>, Vec<RegimeReport>)> {
    let computed: Vec<(RollingReport, Vec<u8>)> = panel
        .all_series()
        .par_iter()
        .map(|s| {
            let mut rolling = rolling_hurst(&s.calendar, &s.values, config.rolling, &config.dfa)
                .map_err(|e| Error::InvalidInput(format!("{}: {e}", s.key)))?;
            rolling.label = Some(s.key);
            let mut buf = Vec::new();
            rolling.write_csv(&mut buf)?;
            Ok((
                RollingReport {
                    key: s.key,
                    rolling,
                    artifact: format!("fig4_rolling_{}.csv", s.key.slug()),
                },
                buf,
            ))
        })
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(computed.len());
    for (report, bytes) in computed {
        write_atomic(dir, &report.artifact, &bytes)?;
        reports.push(report);
    }
    let regimes: Vec<RegimeReport> = reports
        .iter()
        .map(|r| RegimeReport {
            key: r.key,
            summaries: regime_summary(&r.rolling, &config.regimes),
        })
        .collect();
    write_json(dir, ROLLING_JSON, &reports)?;
    write_json(dir, REGIMES_JSON, &regimes)?;
    Ok((reports, regimes))
}

/// Regresses realized volatility on each rolling H series. Reads the rolling
/// stage's `rolling.json` from `dir`.
pub fn regress_stage(config: &RunConfig, dir: &Path) -> Result<Vec<RegressionCell>> {
    let prices = config
        .inputs
        .prices
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("regression needs a prices CSV".into()))?;
    let (calendar, closes) = read_prices(Path::new(prices))?;
    let rv = squared_return_vol(&ReturnSeries::from_prices(&calendar, &closes)?);
    let rolling: Vec<RollingReport> = read_json(dir, ROLLING_JSON)?;
    let cells: Vec<RegressionCell> = rolling
        .iter()
        .map(|r| {
            let ctx = |e: Error| Error::InvalidInput(format!("{}: {e}", r.key));
            let pairs = align_h_rv(&r.rolling, &rv, config.regression.fill_policy, config.regression.lag_k)
                .map_err(ctx)?;
            let h: Vec<f64> = pairs.iter().map(|p| p.h).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.rv).collect();
            let classical = ols_with(&y, &h, StdErrorKind::Classical).map_err(ctx)?;
            let robust = if config.regression.robust_se {
                Some(ols_with(&y, &h, StdErrorKind::Hc1).map_err(ctx)?)
            } else {
                None
            };
            Ok(RegressionCell {
                key: r.key,
                stars: classical.beta_stars().to_string(),
                classical,
                robust,
            })
        })
        .collect::<Result<_>>()?;
    write_json(dir, REGRESSION_JSON, &cells)?;
    write_csv_with(dir, TABLE1_CSV, |buf| write_table1(&cells, buf))?;
    Ok(cells)
}

/// Table-shaped CSV: one block of rows per group, one column per flow type.
pub fn write_table1<W: Write>(cells: &[RegressionCell], writer: W) -> Result<()> {
    use crate::flows::{FlowType, InvestorGroup};
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["group", "statistic", "BUY", "SELL", "NET"])?;
    let lookup: BTreeMap<SeriesKey, &RegressionCell> = cells.iter().map(|c| (c.key, c)).collect();
    for group in InvestorGroup::ALL {
        if !lookup.keys().any(|k| k.group == group) {
            continue;
        }
        let row = |f: &dyn Fn(&RegressionCell) -> String| -> Vec<String> {
            FlowType::ALL
                .iter()
                .map(|&flow| lookup.get(&SeriesKey::new(group, flow)).map(|c| f(c)).unwrap_or_default())
                .collect()
        };
        let mut emit = |stat: &str, values: Vec<String>| -> Result<()> {
            let mut rec = vec![group.to_string(), stat.to_string()];
            rec.extend(values);
            wtr.write_record(rec)?;
            Ok(())
        };
        emit("beta", row(&|c| format!("{:.6}{}", c.classical.beta, c.stars)))?;
        emit("t", row(&|c| format!("{:.3}", c.classical.t_beta)))?;
        if cells.iter().any(|c| c.robust.is_some()) {
            emit(
                "t_hc1",
                row(&|c| c.robust.as_ref().map(|r| format!("{:.3}", r.t_beta)).unwrap_or_default()),
            )?;
        }
        emit("n", row(&|c| c.classical.n.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Assembles `report.json` from the stage artifacts in `dir`.
pub fn report_stage(config: &RunConfig, dir: &Path) -> Result<RunReport> {
    let ingest: IngestSummary = read_json(dir, INGEST_JSON)?;
    let dfa: Vec<DfaReport> = read_json(dir, DFA_JSON)?;
    let tails: Vec<TailReport> = read_json(dir, TAILS_JSON)?;
    let surrogates: Vec<SurrogateReport> = read_json(dir, SURROGATES_JSON)?;
    let rolling: Vec<RollingReport> = read_json(dir, ROLLING_JSON)?;
    let regimes: Vec<RegimeReport> = read_json(dir, REGIMES_JSON)?;
    let regression: Option<Vec<RegressionCell>> = if config.inputs.prices.is_some() {
        Some(read_json(dir, REGRESSION_JSON)?)
    } else {
        None
    };

    let by_key = |key: SeriesKey, what: &str, file: &str| Error::Schema {
        path: dir.join(file),
        message: format!("no {what} entry for {key}"),
    };
    let mut artifacts = vec![
        INGEST_JSON.to_string(),
        TAILS_JSON.to_string(),
        DFA_JSON.to_string(),
        SURROGATES_JSON.to_string(),
        ROLLING_JSON.to_string(),
        REGIMES_JSON.to_string(),
    ];
    if regression.is_some() {
        artifacts.push(REGRESSION_JSON.to_string());
        artifacts.push(TABLE1_CSV.to_string());
    }
    let mut series = Vec::with_capacity(dfa.len());
    for d in &dfa {
        let key = d.key;
        let t = tails.iter().find(|t| t.key == key).ok_or_else(|| by_key(key, "tails", TAILS_JSON))?;
        let s = surrogates
            .iter()
            .find(|s| s.key == key)
            .ok_or_else(|| by_key(key, "surrogate", SURROGATES_JSON))?;
        let r = rolling.iter().find(|r| r.key == key).ok_or_else(|| by_key(key, "rolling", ROLLING_JSON))?;
        let hs = r.rolling.hurst_values();
        artifacts.extend([d.artifact.clone(), t.artifact.clone(), s.artifact.clone(), r.artifact.clone()]);
        series.push(SeriesResult {
            key,
            dfa: d.fit.clone(),
            dfa1: d.dfa1.clone(),
            surrogates: s.bands.clone(),
            tails: t.clone(),
            rolling: RollingRef {
                artifact: r.artifact.clone(),
                n_windows: r.rolling.entries.len(),
                n_gaps: r.rolling.entries.len() - hs.len(),
                mean_h: (!hs.is_empty()).then(|| mean(&hs)),
            },
        });
    }
    for name in &artifacts {
        if !dir.join(name).exists() {
            return Err(Error::MissingArtifact(dir.join(name)));
        }
    }
    artifacts.sort();
    artifacts.dedup();

    let report = RunReport {
        provenance: Provenance {
            toolkit: TOOLKIT.to_string(),
            version: VERSION.to_string(),
            config_hash: config.config_hash(),
            seed: config.seed,
            rng: crate::synth::RNG_ID.to_string(),
            flows_sha256: file_sha256(&flows_path(config))?,
            prices_sha256: config
                .inputs
                .prices
                .as_ref()
                .map(|p| file_sha256(Path::new(p)))
                .transpose()?,
        },
        n_days: ingest.n_days,
        first_date: ingest.first_date,
        last_date: ingest.last_date,
        series,
        regimes,
        regression,
        artifacts,
    };
    write_json(dir, REPORT_JSON, &report)?;
    Ok(report)
}

fn run_stages(config: &RunConfig, dir: &Path) -> Result<RunReport> {
    use Error as E;
    write_atomic(dir, CONFIG_JSON, config.to_json().as_bytes())?;
    ingest_stage(config, dir).map_err(E::in_stage("ingest"))?;
    let panel = load_inputs(config).map_err(E::in_stage("ingest"))?;
    tails_stage(config, &panel, dir).map_err(E::in_stage("tails"))?;
    dfa_stage(config, &panel, dir).map_err(E::in_stage("dfa"))?;
    surrogate_stage(config, &panel, dir).map_err(E::in_stage("surrogate"))?;
    rolling_stage(config, &panel, dir).map_err(E::in_stage("rolling"))?;
    if config.inputs.prices.is_some() {
        regress_stage(config, dir).map_err(E::in_stage("regress"))?;
    }
    report_stage(config, dir).map_err(E::in_stage("report"))
}

/// Output directory: explicit override, then `$FLOWMEM_OUT`, then the config.
pub fn resolve_out_dir(config: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&config.out_dir))
}

/// Runs every stage. Artifacts are staged in `<out>/.staging` and moved into
/// `<out>` on success; on failure they are moved to `<out>/quarantine`.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport> {
    config.validate().map_err(Error::in_stage("config"))?;
    let out = PathBuf::from(&config.out_dir);
    let staging = out.join(".staging");
    let quarantine = out.join("quarantine");
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(&staging)?;
    match run_stages(config, &staging) {
        Ok(report) => {
            let mut names: Vec<_> = fs::read_dir(&staging)?
                .map(|e| e.map(|e| e.file_name()))
                .collect::<std::io::Result<_>>()?;
            names.sort();
            for name in names {
                fs::rename(staging.join(&name), out.join(&name))?;
            }
            fs::remove_dir(&staging)?;
            if quarantine.exists() {
                fs::remove_dir_all(&quarantine)?;
            }
            Ok(report)
        }
        Err(e) => {
            if quarantine.exists() {
                fs::remove_dir_all(&quarantine)?;
            }
            fs::rename(&staging, &quarantine)?;
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_is_byte_identical() {
        let mut cfg = RunConfig::new("flows.csv", "out", 7);
        cfg.inputs.prices = Some("prices.csv".into());
        let text = cfg.to_json();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"inputs":{"flows":"f.csv"},"out_dir":"o","seed":1}"#).unwrap();
        assert_eq!(cfg.dfa, DfaConfig::default());
        assert_eq!(cfg.rolling, RollingParams { window: 250, step: 5 });
        assert_eq!(cfg.regimes.len(), 3);
        assert!(cfg.dfa1_check);
    }

    #[test]
    fn hash_ignores_locations_but_not_parameters() {
        let a = RunConfig::new("a.csv", "out1", 1);
        let b = RunConfig::new("/elsewhere/a.csv", "out2", 1);
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = a.clone();
        c.rolling.step = 10;
        assert_ne!(a.config_hash(), c.config_hash());
        assert_ne!(a.config_hash(), RunConfig::new("a.csv", "out1", 2).config_hash());
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1, "x"), derive_seed(1, "x"));
        assert_ne!(derive_seed(1, "x"), derive_seed(1, "y"));
        assert_ne!(derive_seed(1, "x"), derive_seed(2, "x"));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = RunConfig::new("f", "o", 1);
        cfg.surrogates.count = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::new("f", "o", 1);
        cfg.tails.tail_fraction = 1.5;
        assert!(cfg.validate().is_err());
    }
}
