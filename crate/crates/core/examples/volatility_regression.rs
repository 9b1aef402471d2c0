// Regress squared-return volatility on rolling H for the bundled prices,
// with classical and HC1 standard errors.

use std::path::Path;

use flowmem::dfa::DfaConfig;
use flowmem::flows::{load_panel, FlowType, InvestorGroup};
use flowmem::pipeline::read_prices;
use flowmem::rolling::{rolling_hurst, RollingParams};
use flowmem::stats::{align_h_rv, ols_with, squared_return_vol, FillPolicy, OlsResult, ReturnSeries, StdErrorKind};

pub fn run() -> flowmem::Result<Vec<OlsResult>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let panel = load_panel(&data.join("flows.csv"))?;
    let (dates, closes) = read_prices(&data.join("prices.csv"))?;
    let rv = squared_return_vol(&ReturnSeries::from_prices(&dates, &closes)?);

    let s = panel.extract_series(InvestorGroup::Retail, FlowType::Net)?;
    let rolling = rolling_hurst(&s.calendar, &s.values, RollingParams::default(), &DfaConfig::default())?;
    let pairs = align_h_rv(&rolling, &rv, FillPolicy::ForwardFill, 0)?;
    let h: Vec<f64> = pairs.iter().map(|p| p.h).collect();
    let v: Vec<f64> = pairs.iter().map(|p| p.rv).collect();
    println!("{} aligned days", pairs.len());

    let mut fits = Vec::new();
    for kind in [StdErrorKind::Classical, StdErrorKind::Hc1] {
        let fit = ols_with(&v, &h, kind)?;
        println!(
            "{kind:?}: beta {:.3e}{}  se {:.3e}  t {:.2}  p {:.3}  R² {:.4}",
            fit.beta,
            fit.beta_stars(),
            fit.se_beta,
            fit.t_beta,
            fit.p_beta(),
            fit.r_squared
        );
        fits.push(fit);
    }
    Ok(fits)
}

fn main() -> flowmem::Result<()> {
    run().map(|_| ())
}
