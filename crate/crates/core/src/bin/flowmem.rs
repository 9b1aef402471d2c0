//! Command-line front end. Each subcommand runs one pipeline stage against an
//! output directory; `run` executes all of them.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use flowmem::flows::{parse_date, write_wide_csv, InvestorGroup};
use flowmem::pipeline::{self, RunConfig, OUT_DIR_ENV};
use flowmem::synth::{self, GeneratorSpec};
use flowmem::Result;

#[derive(Parser)]
#[command(name = "flowmem", version, about = "Long-memory diagnostics for investor trading flows")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Flows CSV; overrides the config.
    #[arg(long, global = true)]
    flows: Option<String>,
    /// Prices CSV (`date,close`); overrides the config.
    #[arg(long, global = true)]
    prices: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate the flows CSV, write ingest.json.
    IngestCheck,
    /// Static DFA per series.
    Dfa,
    /// Rolling DFA and regime summaries.
    Roll,
    /// Shuffle and phase-randomized surrogate bands.
    Surrogate,
    /// Empirical CCDFs and tail exponents.
    Tails,
    /// Volatility on rolling H regressions (needs `roll` output).
    Regress,
    /// Assemble report.json from stage artifacts.
    Report,
    /// Run every stage.
    Run,
    /// Write a synthetic flows CSV (and optionally prices).
    Synth(SynthArgs),
    /// Print the effective configuration as JSON.
    ShowConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Fgn,
    Fbm,
    Iid,
    Pareto,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "fgn")]
    kind: SynthKind,
    #[arg(long = "H", default_value_t = 0.7)]
    hurst: f64,
    #[arg(long, default_value_t = 2.5)]
    alpha: f64,
    #[arg(long, default_value_t = 2500)]
    n: usize,
    /// Per-group Hurst override, e.g. `retail=0.85`. Repeatable.
    #[arg(long = "group-h", value_parser = parse_group_h)]
    group_h: Vec<(InvestorGroup, f64)>,
    /// First calendar date; weekdays only.
    #[arg(long, default_value = "2015-01-01")]
    start: String,
    /// Also write `prices.csv` with i.i.d. log returns of this daily std.
    #[arg(long)]
    price_sigma: Option<f64>,
}

fn parse_group_h(s: &str) -> std::result::Result<(InvestorGroup, f64), String> {
    let (g, h) = s.split_once('=').ok_or("expected GROUP=H")?;
    Ok((g.parse()?, h.parse().map_err(|_| format!("bad H `{h}`"))?))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(cli.flows.clone().unwrap_or_default(), "out", 0),
    };
    if let Some(f) = &cli.flows {
        cfg.inputs.flows = f.clone();
    }
    if cli.prices.is_some() {
        cfg.inputs.prices = cli.prices.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.out_dir = pipeline::resolve_out_dir(&cfg, cli.out.as_deref()).display().to_string();
    cfg.validate()?;
    Ok(cfg)
}

fn synth_cmd(args: &SynthArgs, seed: u64, out: &std::path::Path) -> Result<()> {
    let start = parse_date(&args.start).map_err(flowmem::Error::InvalidInput)?;
    let calendar = synth::weekday_calendar(start, args.n);
    let overrides: BTreeMap<_, _> = args.group_h.iter().copied().collect();
    let groups: BTreeMap<InvestorGroup, GeneratorSpec> = InvestorGroup::ALL
        .iter()
        .map(|&g| {
            let h = overrides.get(&g).copied().unwrap_or(args.hurst);
            let spec = match args.kind {
                SynthKind::Fgn => GeneratorSpec::fgn(h, args.n, seed),
                SynthKind::Fbm => GeneratorSpec::fbm(h, args.n, seed),
                SynthKind::Iid => GeneratorSpec::iid_gaussian(args.n, seed),
                SynthKind::Pareto => GeneratorSpec::pareto(args.alpha, args.n, seed),
            };
            (g, spec)
        })
        .collect();
    let panel = synth::synthetic_panel(&calendar, &groups, seed)?;
    let mut buf = Vec::new();
    write_wide_csv(&panel, &mut buf)?;
    let flows = pipeline::write_atomic(out, "flows.csv", &buf)?;
    println!("{}", flows.display());
    if let Some(sigma) = args.price_sigma {
        let closes = synth::synthetic_prices(args.n, sigma, pipeline::derive_seed(seed, "synth/prices"));
        let mut buf = Vec::new();
        pipeline::write_prices(&calendar, &closes, &mut buf)?;
        println!("{}", pipeline::write_atomic(out, "prices.csv", &buf)?.display());
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::Synth(args) = &cli.command {
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
        return synth_cmd(args, cli.seed.unwrap_or(0), &out);
    }
    let cfg = effective_config(cli)?;
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir)?;
    log::info!("output directory {}", dir.display());
    match &cli.command {
        Command::IngestCheck => print_json(&pipeline::ingest_stage(&cfg, &dir)?),
        Command::Dfa => {
            let panel = pipeline::load_inputs(&cfg)?;
            let reports = pipeline::dfa_stage(&cfg, &panel, &dir)?;
            for r in &reports {
                println!("{:<24} H = {:.4} (se {:.4}, R2 {:.4})", r.key.to_string(), r.fit.hurst, r.fit.slope_stderr, r.fit.r_squared);
            }
            Ok(())
        }
        Command::Roll => {
            let panel = pipeline::load_inputs(&cfg)?;
            let (_, regimes) = pipeline::rolling_stage(&cfg, &panel, &dir)?;
            print_json(&regimes)
        }
        Command::Surrogate => {
            let panel = pipeline::load_inputs(&cfg)?;
            for r in pipeline::surrogate_stage(&cfg, &panel, &dir)? {
                for b in &r.bands {
                    println!("{:<24} {:<16} mean {:.4} [{:.4}, {:.4}]", r.key.to_string(), b.kind.as_str(), b.mean, b.q05, b.q95);
                }
            }
            Ok(())
        }
        Command::Tails => {
            let panel = pipeline::load_inputs(&cfg)?;
            for t in pipeline::tails_stage(&cfg, &panel, &dir)? {
                println!(
                    "{:<24} ccdf_ols {:.3}  hill {:.3}{}",
                    t.key.to_string(),
                    t.ccdf_ols.exponent,
                    t.hill.exponent,
                    if t.methods_disagree { "  (methods disagree)" } else { "" }
                );
            }
            Ok(())
        }
        Command::Regress => {
            pipeline::regress_stage(&cfg, &dir)?;
            print!("{}", fs::read_to_string(dir.join(pipeline::TABLE1_CSV))?);
            Ok(())
        }
        Command::Report => {
            let report = pipeline::report_stage(&cfg, &dir)?;
            println!("{}", dir.join(pipeline::REPORT_JSON).display());
            println!("config_hash {}", report.provenance.config_hash);
            Ok(())
        }
        Command::Run => {
            pipeline::run_pipeline(&cfg)?;
            println!("{}", dir.join(pipeline::REPORT_JSON).display());
            Ok(())
        }
        Command::ShowConfig => {
            print!("{}", cfg.to_json());
            Ok(())
        }
        Command::Synth(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
