// Rolling DFA over the bundled retail NET series and its level inside the
// default stress windows.

use std::path::Path;

use flowmem::dfa::DfaConfig;
use flowmem::flows::{load_panel, FlowType, InvestorGroup};
use flowmem::rolling::{default_stress_regimes, regime_summary, rolling_hurst, RegimeSummary, RollingParams};

pub fn run() -> flowmem::Result<Vec<RegimeSummary>> {
    let panel = load_panel(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("flows.csv"))?;
    let s = panel.extract_series(InvestorGroup::Retail, FlowType::Net)?;
    let rolling = rolling_hurst(&s.calendar, &s.values, RollingParams::default(), &DfaConfig::default())?;
    let hs = rolling.hurst_values();
    println!(
        "{} windows of {} days every {} days, {} gaps",
        rolling.entries.len(),
        rolling.window,
        rolling.step,
        rolling.entries.iter().filter(|e| e.is_gap()).count()
    );
    for e in rolling.entries.iter().step_by(50) {
        println!("  {}  {}", e.end_date, e.h().map_or("gap".into(), |h| format!("{h:.3}")));
    }
    println!("mean rolling H {:.4}", hs.iter().sum::<f64>() / hs.len() as f64);

    let summaries = regime_summary(&rolling, &default_stress_regimes());
    for r in &summaries {
        match (r.mean_h, r.std_h) {
            (Some(m), Some(sd)) => println!("{:<14} n={:<4} mean {m:.4} sd {sd:.4}", r.label, r.n_obs),
            _ => println!("{:<14} no windows", r.label),
        }
    }
    Ok(summaries)
}

fn main() -> flowmem::Result<()> {
    run().map(|_| ())
}
