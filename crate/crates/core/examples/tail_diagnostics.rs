// CCDF against a matched Gaussian and two tail-exponent estimators, on a
// Pareto sample and on the bundled flows.

use std::path::Path;

use flowmem::flows::load_panel;
use flowmem::synth::{iid_gaussian, pareto};
use flowmem::tails::{empirical_ccdf, fit_tail_exponent, gaussian_ccdf_reference, write_ccdf_csv, TailMethod, TailSide};

/// Returns the `(ccdf_ols, hill)` exponents of a Pareto(2.5) sample.
pub fn run() -> flowmem::Result<(f64, f64)> {
    let p = pareto(2.5, 20_000, 7)?;
    let ols = fit_tail_exponent(&p, 0.05, TailMethod::CcdfOls, TailSide::Upper)?;
    let hill = fit_tail_exponent(&p, 0.05, TailMethod::Hill, TailSide::Upper)?;
    println!(
        "Pareto(2.5): ccdf_ols {:.3} (R² {:.3}), hill {:.3} ± {:.3}, tail of {} above {:.3}",
        ols.exponent,
        ols.r_squared.unwrap_or(f64::NAN),
        hill.exponent,
        hill.stderr,
        hill.n_tail,
        hill.fit_xmin
    );

    let g = iid_gaussian(20_000, 7);
    let gfit = fit_tail_exponent(&g, 0.01, TailMethod::CcdfOls, TailSide::Absolute)?;
    println!("Gaussian |x|: ccdf_ols {:.3} (R² {:.3})", gfit.exponent, gfit.r_squared.unwrap_or(f64::NAN));

    let panel = load_panel(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("flows.csv"))?;
    for s in panel.all_series() {
        let fit = fit_tail_exponent(&s.values, 0.05, TailMethod::Hill, TailSide::Absolute)?;
        println!("{:<22} hill {:.3}", s.key.to_string(), fit.exponent);
    }

    // First lines of the plotting table for one series.
    let s = &panel.all_series()[0];
    let abs: Vec<f64> = s.values.iter().map(|v| v.abs()).collect();
    let emp = empirical_ccdf(&abs, TailSide::Upper)?;
    let n = abs.len() as f64;
    let mean = abs.iter().sum::<f64>() / n;
    let sd = (abs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let xs: Vec<f64> = emp.points.iter().map(|p| p.0).collect();
    let reference = gaussian_ccdf_reference(mean, sd, &xs)?;
    let mut csv = Vec::new();
    write_ccdf_csv(&emp, &reference, &mut csv)?;
    for line in String::from_utf8_lossy(&csv).lines().take(4) {
        println!("  {line}");
    }
    Ok((ols.exponent, hill.exponent))
}

fn main() -> flowmem::Result<()> {
    run().map(|_| ())
}
