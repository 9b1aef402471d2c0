// Run every stage on the bundled data set and print the persistence ranking.
// Artifacts go to `$FLOWMEM_OUT`, or a directory under the system temp dir.

use std::path::{Path, PathBuf};

use flowmem::flows::FlowType;
use flowmem::pipeline::{resolve_out_dir, run_pipeline, RunConfig, RunReport};

pub fn run(out: &Path) -> flowmem::Result<RunReport> {
    let mut config = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("config.json"))?;
    config.out_dir = out.display().to_string();
    let report = run_pipeline(&config)?;
    println!("config hash {}", report.provenance.config_hash);
    println!("{} days, {} .. {}", report.n_days, report.first_date, report.last_date);
    for flow in FlowType::ALL {
        let ranking: Vec<String> = report.ranking(flow).iter().map(|k| k.group.as_str().to_string()).collect();
        println!("{:<5} by H: {}", flow.as_str(), ranking.join(" > "));
    }
    for s in &report.series {
        println!(
            "{:<22} H {:.3}  shuffled {:.3}  tail {:.2}",
            s.key.to_string(),
            s.dfa.hurst,
            s.surrogates.first().map_or(f64::NAN, |b| b.mean),
            s.tails.hill.exponent
        );
    }
    println!("{} artifacts in {}", report.artifacts.len(), out.display());
    Ok(report)
}

fn main() -> flowmem::Result<()> {
    let fallback = RunConfig::new("", std::env::temp_dir().join("flowmem-example").display().to_string(), 0);
    let out: PathBuf = resolve_out_dir(&fallback, None);
    run(&out).map(|_| ())
}
