//! Investor-segregated flow records and the daily flow panel.
//!
//! Raw records (optionally firm-level) are summed per trading day, investor
//! group and side. Each group present in the input contributes three series
//! to the panel: BUY, SELL and NET = BUY - SELL.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Trading-day identifier. Dates are only ever read from input, never synthesized
/// by the analysis stages.
pub type TradingDay = NaiveDate;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvestorGroup {
    Retail,
    Institutional,
    Foreign,
}

impl InvestorGroup {
    pub const ALL: [InvestorGroup; 3] = [
        InvestorGroup::Retail,
        InvestorGroup::Institutional,
        InvestorGroup::Foreign,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InvestorGroup::Retail => "retail",
            InvestorGroup::Institutional => "institutional",
            InvestorGroup::Foreign => "foreign",
        }
    }
}

impl fmt::Display for InvestorGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InvestorGroup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "retail" | "individual" => Ok(InvestorGroup::Retail),
            "institutional" | "institution" => Ok(InvestorGroup::Institutional),
            "foreign" => Ok(InvestorGroup::Foreign),
            other => Err(format!("unknown investor group `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Buy,
    Sell,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Buy => "BUY",
            Side::Sell => "SELL",
        })
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "BUY" => Ok(Side::Buy),
            "SELL" => Ok(Side::Sell),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FlowType {
    Buy,
    Sell,
    Net,
}

impl FlowType {
    pub const ALL: [FlowType; 3] = [FlowType::Buy, FlowType::Sell, FlowType::Net];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowType::Buy => "BUY",
            FlowType::Sell => "SELL",
            FlowType::Net => "NET",
        }
    }
}

impl fmt::Display for FlowType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "BUY" => Ok(FlowType::Buy),
            "SELL" => Ok(FlowType::Sell),
            "NET" => Ok(FlowType::Net),
            other => Err(format!("unknown flow type `{other}`")),
        }
    }
}

/// Identifies one of the (up to nine) panel series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub group: InvestorGroup,
    pub flow: FlowType,
}

impl SeriesKey {
    pub fn new(group: InvestorGroup, flow: FlowType) -> Self {
        Self { group, flow }
    }

    /// Lower-case file-name fragment, e.g. `retail_buy`.
    pub fn slug(&self) -> String {
        format!("{}_{}", self.group, self.flow.as_str().to_ascii_lowercase())
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.group, self.flow)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub date: TradingDay,
    pub firm_id: Option<String>,
    pub group: InvestorGroup,
    pub side: Side,
    pub amount: f64,
}

impl FlowRecord {
    pub fn new(date: TradingDay, group: InvestorGroup, side: Side, amount: f64) -> Self {
        Self {
            date,
            firm_id: None,
            group,
            side,
            amount,
        }
    }

    pub fn with_firm(mut self, firm_id: impl Into<String>) -> Self {
        self.firm_id = Some(firm_id.into());
        self
    }

    fn check(&self, index: usize) -> Result<()> {
        let reason = if !self.amount.is_finite() {
            "amount is not finite"
        } else if self.amount < 0.0 {
            "amount is negative"
        } else {
            return Ok(());
        };
        Err(Error::InvalidRecord {
            index,
            date: self.date.format(DATE_FORMAT).to_string(),
            group: self.group.to_string(),
            side: self.side.to_string(),
            reason: reason.to_string(),
        })
    }
}

/// A single panel series together with its label and calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub key: SeriesKey,
    pub calendar: Vec<TradingDay>,
    pub values: Vec<f64>,
}

impl LabeledSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Calendar-aligned daily BUY/SELL/NET series per investor group.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPanel {
    calendar: Vec<TradingDay>,
    series: BTreeMap<SeriesKey, Vec<f64>>,
}

impl FlowPanel {
    /// Builds a panel from per-group BUY and SELL columns, deriving NET.
    pub fn from_buy_sell(
        calendar: Vec<TradingDay>,
        columns: BTreeMap<InvestorGroup, (Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let mut series = BTreeMap::new();
        for (group, (buy, sell)) in columns {
            if buy.len() != sell.len() {
                return Err(Error::InvalidPanel(format!(
                    "{group}: BUY and SELL lengths differ"
                )));
            }
            let net = buy.iter().zip(&sell).map(|(b, s)| b - s).collect();
            series.insert(SeriesKey::new(group, FlowType::Buy), buy);
            series.insert(SeriesKey::new(group, FlowType::Sell), sell);
            series.insert(SeriesKey::new(group, FlowType::Net), net);
        }
        let panel = Self { calendar, series };
        panel.validate()?;
        Ok(panel)
    }

    /// Reassembles a panel from extracted series. Every present group must
    /// supply all three flow types on a shared calendar.
    pub fn from_series(parts: Vec<LabeledSeries>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidPanel("no series".into()));
        };
        let calendar = first.calendar.clone();
        let mut series = BTreeMap::new();
        for part in parts {
            if part.calendar != calendar {
                return Err(Error::InvalidPanel(format!(
                    "{}: calendar differs from the first series",
                    part.key
                )));
            }
            if series.insert(part.key, part.values).is_some() {
                return Err(Error::InvalidPanel(format!("duplicate series {}", part.key)));
            }
        }
        let panel = Self { calendar, series };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<()> {
        if self.calendar.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPanel("calendar is not strictly increasing".into()));
        }
        let t = self.calendar.len();
        for group in self.groups() {
            let get = |flow| {
                self.series
                    .get(&SeriesKey::new(group, flow))
                    .ok_or_else(|| Error::InvalidPanel(format!("{group}: missing {flow}")))
            };
            let (buy, sell, net) = (get(FlowType::Buy)?, get(FlowType::Sell)?, get(FlowType::Net)?);
            if buy.len() != t || sell.len() != t || net.len() != t {
                return Err(Error::InvalidPanel(format!(
                    "{group}: series length differs from calendar length {t}"
                )));
            }
            for i in 0..t {
                let (b, s, n) = (buy[i], sell[i], net[i]);
                if !(b.is_finite() && s.is_finite() && n.is_finite()) {
                    return Err(Error::InvalidPanel(format!("{group}: non-finite value at {i}")));
                }
                if b < 0.0 || s < 0.0 {
                    return Err(Error::InvalidPanel(format!("{group}: negative amount at {i}")));
                }
                if n != b - s {
                    return Err(Error::InvalidPanel(format!("{group}: NET != BUY - SELL at {i}")));
                }
            }
        }
        Ok(())
    }

    pub fn calendar(&self) -> &[TradingDay] {
        &self.calendar
    }

    pub fn len(&self) -> usize {
        self.calendar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calendar.is_empty()
    }

    /// Groups present in the panel, in canonical order.
    pub fn groups(&self) -> Vec<InvestorGroup> {
        let set: BTreeSet<_> = self.series.keys().map(|k| k.group).collect();
        set.into_iter().collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = SeriesKey> + '_ {
        self.series.keys().copied()
    }

    pub fn values(&self, key: SeriesKey) -> Option<&[f64]> {
        self.series.get(&key).map(Vec::as_slice)
    }

    pub fn extract_series(&self, group: InvestorGroup, flow: FlowType) -> Result<LabeledSeries> {
        let key = SeriesKey::new(group, flow);
        let values = self
            .series
            .get(&key)
            .ok_or(Error::MissingSeries { group, flow })?;
        Ok(LabeledSeries {
            key,
            calendar: self.calendar.clone(),
            values: values.clone(),
        })
    }

    pub fn all_series(&self) -> Vec<LabeledSeries> {
        self.series
            .iter()
            .map(|(key, values)| LabeledSeries {
                key: *key,
                calendar: self.calendar.clone(),
                values: values.clone(),
            })
            .collect()
    }
}

/// Sums records per (date, group, side) and derives NET.
///
/// Amounts within each cell are summed in sorted order with compensation, so
/// the result does not depend on the order of `records`. A trading day on
/// which a present group has no records gets zero BUY and SELL.
pub fn aggregate_daily(records: &[FlowRecord]) -> Result<FlowPanel> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let mut cells: BTreeMap<(InvestorGroup, Side, TradingDay), Vec<f64>> = BTreeMap::new();
    let mut dates = BTreeSet::new();
    let mut groups = BTreeSet::new();
    for (index, record) in records.iter().enumerate() {
        record.check(index)?;
        dates.insert(record.date);
        groups.insert(record.group);
        cells
            .entry((record.group, record.side, record.date))
            .or_default()
            .push(record.amount);
    }
    let calendar: Vec<TradingDay> = dates.into_iter().collect();

    let mut columns = BTreeMap::new();
    for group in groups {
        let mut column = |side| -> Vec<f64> {
            calendar
                .iter()
                .map(|date| match cells.get_mut(&(group, side, *date)) {
                    Some(amounts) => {
                        amounts.sort_by(f64::total_cmp);
                        compensated_sum(amounts.iter().copied())
                    }
                    None => 0.0,
                })
                .collect()
        };
        let buy = column(Side::Buy);
        let sell = column(Side::Sell);
        columns.insert(group, (buy, sell));
    }
    FlowPanel::from_buy_sell(calendar, columns)
}

// --- CSV -------------------------------------------------------------------

/// Which flows CSV layout a header describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowCsvLayout {
    /// `date,firm_id,group,side,amount`
    Long,
    /// `date,group,buy,sell`
    Wide,
}

fn parse_err(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

pub fn parse_date(s: &str) -> std::result::Result<TradingDay, String> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|e| format!("bad date `{}` ({e}); expected YYYY-MM-DD", s.trim()))
}

fn parse_amount(s: &str) -> std::result::Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("bad amount `{}`", s.trim()))
}

/// Parses either flows CSV layout; `source` names the input in error messages.
pub fn parse_flow_records<R: Read>(reader: R, source: &str) -> Result<Vec<FlowRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let layout = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["date", "firm_id", "group", "side", "amount"] => FlowCsvLayout::Long,
        ["date", "group", "buy", "sell"] => FlowCsvLayout::Wide,
        _ => {
            return Err(parse_err(
                source,
                1,
                format!(
                    "unrecognized header `{}`; expected `date,firm_id,group,side,amount` or `date,group,buy,sell`",
                    header.join(",")
                ),
            ))
        }
    };

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let err = |m: String| parse_err(source, line, m);
        let date = parse_date(field(0)).map_err(err)?;
        match layout {
            FlowCsvLayout::Long => {
                let firm = field(1);
                let group = field(2).parse().map_err(err)?;
                let side = field(3).parse().map_err(err)?;
                let amount = parse_amount(field(4)).map_err(err)?;
                records.push(FlowRecord {
                    date,
                    firm_id: (!firm.is_empty()).then(|| firm.to_string()),
                    group,
                    side,
                    amount,
                });
            }
            FlowCsvLayout::Wide => {
                let group = field(1).parse().map_err(err)?;
                let buy = parse_amount(field(2)).map_err(err)?;
                let sell = parse_amount(field(3)).map_err(err)?;
                records.push(FlowRecord::new(date, group, Side::Buy, buy));
                records.push(FlowRecord::new(date, group, Side::Sell, sell));
            }
        }
    }
    Ok(records)
}

pub fn read_flow_records(path: &Path) -> Result<Vec<FlowRecord>> {
    let file = std::fs::File::open(path)?;
    parse_flow_records(file, &path.display().to_string())
}

/// Reads a flows CSV and aggregates it into a panel.
pub fn load_panel(path: &Path) -> Result<FlowPanel> {
    aggregate_daily(&read_flow_records(path)?)
}

/// Writes the panel in the wide `date,group,buy,sell` layout.
pub fn write_wide_csv<W: Write>(panel: &FlowPanel, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date", "group", "buy", "sell"])?;
    let groups = panel.groups();
    for (i, date) in panel.calendar().iter().enumerate() {
        for &group in &groups {
            let buy = panel.series[&SeriesKey::new(group, FlowType::Buy)][i];
            let sell = panel.series[&SeriesKey::new(group, FlowType::Sell)][i];
            wtr.write_record([
                date.format(DATE_FORMAT).to_string(),
                group.to_string(),
                buy.to_string(),
                sell.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes records in the long `date,firm_id,group,side,amount` layout.
pub fn write_long_csv<W: Write>(records: &[FlowRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date", "firm_id", "group", "side", "amount"])?;
    for r in records {
        wtr.write_record([
            r.date.format(DATE_FORMAT).to_string(),
            r.firm_id.clone().unwrap_or_default(),
            r.group.to_string(),
            r.side.to_string(),
            r.amount.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
