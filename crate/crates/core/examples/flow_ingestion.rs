// Load the bundled flow file, aggregate it to a daily panel and print a
// summary of the nine BUY/SELL/NET series.

use std::path::Path;

use flowmem::flows::{aggregate_daily, load_panel, write_wide_csv, FlowPanel, FlowRecord, InvestorGroup, Side};

pub fn run() -> flowmem::Result<FlowPanel> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("flows.csv");
    let panel = load_panel(&path)?;
    println!(
        "{} trading days, {} .. {}",
        panel.len(),
        panel.calendar()[0],
        panel.calendar()[panel.len() - 1]
    );
    for s in panel.all_series() {
        let mean = s.values.iter().sum::<f64>() / s.len() as f64;
        let max = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("{:<22} mean {:>14.4e}  max {:>14.4e}", s.key.to_string(), mean, max);
    }

    // Firm-level records collapse to one value per day, group and side.
    let d = |s: &str| flowmem::flows::parse_date(s).unwrap();
    let records = vec![
        FlowRecord::new(d("2024-03-04"), InvestorGroup::Retail, Side::Buy, 120.0).with_firm("A"),
        FlowRecord::new(d("2024-03-04"), InvestorGroup::Retail, Side::Buy, 80.0).with_firm("B"),
        FlowRecord::new(d("2024-03-04"), InvestorGroup::Retail, Side::Sell, 150.0).with_firm("A"),
        FlowRecord::new(d("2024-03-05"), InvestorGroup::Foreign, Side::Sell, 40.0),
    ];
    let small = aggregate_daily(&records)?;
    let mut out = Vec::new();
    write_wide_csv(&small, &mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(panel)
}

fn main() -> flowmem::Result<()> {
    run().map(|_| ())
}
