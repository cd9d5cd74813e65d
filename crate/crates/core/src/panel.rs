//! Panels of intraday bar returns.
//!
//! A [`ReturnPanel`] holds `η_α(k;t)` for every stock `α`, day `t` and bin
//! `k`. Intraday bins are numbered `1..=K`; bin `0` is the overnight return
//! (previous close to open) and is only present when the panel carries it.
//!
//! Values are stored day-major with stocks contiguous, so a cross-section at
//! fixed `(k, t)` is a plain slice.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bin index reserved for the overnight return.
pub const OVERNIGHT_BIN: usize = 0;

/// Default sanity bound on a single bar return (50%).
pub const DEFAULT_SANITY_BOUND: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    stock_ids: Vec<String>,
    dates: Vec<NaiveDate>,
    bins_per_day: usize,
    overnight_present: bool,
    values: Vec<f64>,
}

impl ReturnPanel {
    /// Builds a panel and checks every invariant: at least two stocks and two
    /// days, unique symbols, strictly increasing dates and finite values.
    ///
    /// `values` is laid out as `[day][bin slot][stock]`, where the bin slots
    /// run over [`ReturnPanel::bins`].
    pub fn new(
        stock_ids: Vec<String>,
        dates: Vec<NaiveDate>,
        bins_per_day: usize,
        overnight_present: bool,
        values: Vec<f64>,
    ) -> Result<Self> {
        let panel = Self::from_raw_parts(stock_ids, dates, bins_per_day, overnight_present, values)?;
        if let Some(first) = panel.invariant_violations().into_iter().next() {
            return Err(Error::Invariant(first));
        }
        Ok(panel)
    }

    /// Builds a panel checking only that the value array matches the declared
    /// shape. Use [`validate_panel`] to audit the remaining invariants.
    pub fn from_raw_parts(
        stock_ids: Vec<String>,
        dates: Vec<NaiveDate>,
        bins_per_day: usize,
        overnight_present: bool,
        values: Vec<f64>,
    ) -> Result<Self> {
        if bins_per_day == 0 {
            return Err(Error::Invariant("bins_per_day must be at least 1".into()));
        }
        let slots = bins_per_day + usize::from(overnight_present);
        let expected = stock_ids.len() * dates.len() * slots;
        if values.len() != expected {
            return Err(Error::Invariant(format!(
                "value array has {} entries, shape {}x{}x{} needs {}",
                values.len(),
                stock_ids.len(),
                dates.len(),
                slots,
                expected
            )));
        }
        Ok(Self {
            stock_ids,
            dates,
            bins_per_day,
            overnight_present,
            values,
        })
    }

    /// Builds a panel by evaluating `f(stock, day, bin)` for every cell.
    pub fn from_fn(
        stock_ids: Vec<String>,
        dates: Vec<NaiveDate>,
        bins_per_day: usize,
        overnight_present: bool,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let first_bin = if overnight_present { 0 } else { 1 };
        let mut values =
            Vec::with_capacity(stock_ids.len() * dates.len() * (bins_per_day + 1));
        for day in 0..dates.len() {
            for bin in first_bin..=bins_per_day {
                for stock in 0..stock_ids.len() {
                    values.push(f(stock, day, bin));
                }
            }
        }
        Self::new(stock_ids, dates, bins_per_day, overnight_present, values)
    }

    pub fn n_stocks(&self) -> usize {
        self.stock_ids.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn bins_per_day(&self) -> usize {
        self.bins_per_day
    }

    pub fn overnight_present(&self) -> bool {
        self.overnight_present
    }

    pub fn stock_ids(&self) -> &[String] {
        &self.stock_ids
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Raw values in `[day][bin slot][stock]` order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All bins carried by the panel, overnight first when present.
    pub fn bins(&self) -> std::ops::RangeInclusive<usize> {
        let first = if self.overnight_present { 0 } else { 1 };
        first..=self.bins_per_day
    }

    pub fn intraday_bins(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.bins_per_day
    }

    pub fn has_bin(&self, bin: usize) -> bool {
        bin <= self.bins_per_day && (bin > 0 || self.overnight_present)
    }

    fn n_slots(&self) -> usize {
        self.bins_per_day + usize::from(self.overnight_present)
    }

    fn slot(&self, bin: usize) -> usize {
        assert!(
            self.has_bin(bin),
            "bin {bin} not present in panel (K = {}, overnight = {})",
            self.bins_per_day,
            self.overnight_present
        );
        if self.overnight_present {
            bin
        } else {
            bin - 1
        }
    }

    fn offset(&self, day: usize, bin: usize) -> usize {
        (day * self.n_slots() + self.slot(bin)) * self.n_stocks()
    }

    pub fn get(&self, stock: usize, day: usize, bin: usize) -> f64 {
        self.values[self.offset(day, bin) + stock]
    }

    /// The `N` returns of bin `bin` on day `day`.
    pub fn cross_section(&self, bin: usize, day: usize) -> &[f64] {
        let start = self.offset(day, bin);
        &self.values[start..start + self.n_stocks()]
    }

    /// The `T` daily returns of one stock in one bin.
    pub fn series(&self, stock: usize, bin: usize) -> Vec<f64> {
        (0..self.n_days()).map(|day| self.get(stock, day, bin)).collect()
    }

    /// A panel with the same labels and every value replaced by `f(stock, day, bin, value)`.
    pub fn map(&self, mut f: impl FnMut(usize, usize, usize, f64) -> f64) -> ReturnPanel {
        let mut values = Vec::with_capacity(self.values.len());
        for day in 0..self.n_days() {
            for bin in self.bins() {
                for (stock, &v) in self.cross_section(bin, day).iter().enumerate() {
                    values.push(f(stock, day, bin, v));
                }
            }
        }
        ReturnPanel {
            stock_ids: self.stock_ids.clone(),
            dates: self.dates.clone(),
            bins_per_day: self.bins_per_day,
            overnight_present: self.overnight_present,
            values,
        }
    }

    /// Keeps only the listed days, in the given order.
    pub fn select_days(&self, days: &[usize]) -> Result<ReturnPanel> {
        let width = self.n_slots() * self.n_stocks();
        let mut values = Vec::with_capacity(days.len() * width);
        for &day in days {
            values.extend_from_slice(&self.values[day * width..(day + 1) * width]);
        }
        ReturnPanel::from_raw_parts(
            self.stock_ids.clone(),
            days.iter().map(|&d| self.dates[d]).collect(),
            self.bins_per_day,
            self.overnight_present,
            values,
        )
    }

    fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_stocks() < 2 {
            out.push(format!("panel needs at least 2 stocks, has {}", self.n_stocks()));
        }
        if self.n_days() < 2 {
            out.push(format!("panel needs at least 2 days, has {}", self.n_days()));
        }
        let mut seen = BTreeSet::new();
        for id in &self.stock_ids {
            if !seen.insert(id) {
                out.push(format!("duplicate stock id {id}"));
            }
        }
        for pair in self.dates.windows(2) {
            if pair[1] == pair[0] {
                out.push(format!("duplicate date {}", pair[0]));
            } else if pair[1] < pair[0] {
                out.push(format!("dates not increasing: {} before {}", pair[0], pair[1]));
            }
        }
        let non_finite = self.values.iter().filter(|v| !v.is_finite()).count();
        if non_finite > 0 {
            out.push(format!("{non_finite} non-finite return values"));
        }
        out
    }
}

/// One row of the bar-return table.
#[derive(Debug, Clone, PartialEq)]
pub struct BarRecord {
    pub date: NaiveDate,
    pub bin: usize,
    pub symbol: String,
    pub value: f64,
}

/// One row of the price table.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRecord {
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub symbol: String,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadPolicy {
    /// Any missing cell is an error.
    #[default]
    Strict,
    /// Drop mostly-absent stocks, then every day that still has a gap.
    DropIncomplete,
    /// Missing cells become 0.0.
    ZeroFill,
}

impl std::str::FromStr for LoadPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Self::Strict),
            "drop-incomplete" => Ok(Self::DropIncomplete),
            "zero-fill" => Ok(Self::ZeroFill),
            other => Err(Error::Contract(format!("unknown load policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedStock {
    pub symbol: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedDay {
    pub date: NaiveDate,
    pub reason: String,
}

/// Every mutation applied while assembling a panel.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub stocks_dropped: Vec<DroppedStock>,
    pub days_dropped: Vec<DroppedDay>,
    pub fills_applied: usize,
    pub warnings: Vec<String>,
}

impl LoadReport {
    /// True when nothing was dropped, filled, or warned about.
    pub fn is_clean(&self) -> bool {
        self.stocks_dropped.is_empty()
            && self.days_dropped.is_empty()
            && self.fills_applied == 0
            && self.warnings.is_empty()
    }
}

/// Parses the bar-return table (`date,bin,symbol,return`, header required).
///
/// Row numbers in errors count the header as row 1.
pub fn read_bar_records<R: Read>(reader: R) -> Result<Vec<BarRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                row: 1,
                message: format!("missing column {name:?}"),
            })
    };
    let (c_date, c_bin, c_sym, c_ret) = (col("date")?, col("bin")?, col("symbol")?, col("return")?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = rec
            .as_ref()
            .ok()
            .and_then(|r| r.position())
            .map_or(i + 2, |p| p.line() as usize);
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let date = parse_date(field(c_date), row)?;
        let bin = field(c_bin).parse::<usize>().map_err(|e| Error::Parse {
            row,
            message: format!("bad bin {:?}: {e}", field(c_bin)),
        })?;
        let symbol = field(c_sym).to_string();
        if symbol.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty symbol".into(),
            });
        }
        let value = parse_real(field(c_ret), row)?;
        out.push(BarRecord {
            date,
            bin,
            symbol,
            value,
        });
    }
    Ok(out)
}

/// Parses the price table (`date,time,symbol,price`, header required).
pub fn read_price_records<R: Read>(reader: R) -> Result<Vec<PriceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                row: 1,
                message: format!("missing column {name:?}"),
            })
    };
    let (c_date, c_time, c_sym, c_price) =
        (col("date")?, col("time")?, col("symbol")?, col("price")?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = rec
            .as_ref()
            .ok()
            .and_then(|r| r.position())
            .map_or(i + 2, |p| p.line() as usize);
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let date = parse_date(field(c_date), row)?;
        let time = NaiveTime::parse_from_str(field(c_time), "%H:%M").map_err(|e| Error::Parse {
            row,
            message: format!("bad time {:?}: {e}", field(c_time)),
        })?;
        let symbol = field(c_sym).to_string();
        let price = parse_real(field(c_price), row)?;
        if price <= 0.0 {
            return Err(Error::Domain(format!(
                "non-positive price {price} at row {row}"
            )));
        }
        out.push(PriceRecord {
            date,
            time,
            symbol,
            price,
        });
    }
    Ok(out)
}

fn parse_date(s: &str, row: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Parse {
        row,
        message: format!("bad date {s:?}: {e}"),
    })
}

fn parse_real(s: &str, row: usize) -> Result<f64> {
    let v = s.parse::<f64>().map_err(|e| Error::Parse {
        row,
        message: format!("bad number {s:?}: {e}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("non-finite number {s:?}"),
        });
    }
    Ok(v)
}

/// Assembles a panel from bar-return records.
///
/// Stocks are ordered by symbol and days by date, so the result does not
/// depend on the order of `records`. When overnight returns are present, a
/// leading day without any overnight record (the first day of a price
/// history) is trimmed and reported rather than treated as a gap.
pub fn load_panel(records: &[BarRecord], policy: LoadPolicy) -> Result<(ReturnPanel, LoadReport)> {
    let mut report = LoadReport {
        rows_read: records.len(),
        ..LoadReport::default()
    };
    if records.is_empty() {
        return Err(Error::Invariant("no records to load".into()));
    }

    let symbols: Vec<String> = records
        .iter()
        .map(|r| r.symbol.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut dates: Vec<NaiveDate> = records
        .iter()
        .map(|r| r.date)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let bins_per_day = records.iter().map(|r| r.bin).max().unwrap_or(0);
    if bins_per_day == 0 {
        return Err(Error::Invariant("no intraday bins (bin >= 1) in input".into()));
    }
    let overnight_present = records.iter().any(|r| r.bin == OVERNIGHT_BIN);
    let first_bin = usize::from(!overnight_present);
    let n_slots = bins_per_day + 1 - first_bin;

    let stock_index: HashMap<&str, usize> = symbols
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let date_index: HashMap<NaiveDate, usize> =
        dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();

    // cells[(day * n_slots + slot) * n + stock]
    let n = symbols.len();
    let mut cells: Vec<Option<f64>> = vec![None; dates.len() * n_slots * n];
    let mut duplicates: Vec<(String, NaiveDate, usize)> = Vec::new();
    for r in records {
        let idx = (date_index[&r.date] * n_slots + (r.bin - first_bin)) * n
            + stock_index[r.symbol.as_str()];
        if cells[idx].replace(r.value).is_some() {
            duplicates.push((r.symbol.clone(), r.date, r.bin));
        }
    }
    if let Some((symbol, date, bin)) = duplicates.into_iter().min() {
        return Err(Error::Duplicate {
            symbol,
            date,
            slot: format!("bin {bin}"),
        });
    }

    let mut keep_days: Vec<usize> = (0..dates.len()).collect();
    if overnight_present {
        let day0_has_overnight = (0..n).any(|s| cells[s].is_some());
        if !day0_has_overnight {
            report.days_dropped.push(DroppedDay {
                date: dates[0],
                reason: "no overnight returns (first day of history)".into(),
            });
            keep_days.remove(0);
        }
    }
    let mut keep_stocks: Vec<usize> = (0..n).collect();

    let is_missing =
        |day: usize, slot: usize, stock: usize| cells[(day * n_slots + slot) * n + stock].is_none();

    match policy {
        LoadPolicy::Strict => {
            // report the gap with the smallest (symbol, date, bin)
            for &stock in &keep_stocks {
                for &day in &keep_days {
                    for slot in 0..n_slots {
                        if is_missing(day, slot, stock) {
                            return Err(Error::Completeness {
                                symbol: symbols[stock].clone(),
                                date: dates[day],
                                bin: slot + first_bin,
                            });
                        }
                    }
                }
            }
        }
        LoadPolicy::DropIncomplete => {
            let n_days = keep_days.len();
            keep_stocks.retain(|&stock| {
                let gap_days = keep_days
                    .iter()
                    .filter(|&&day| (0..n_slots).any(|slot| is_missing(day, slot, stock)))
                    .count();
                if 2 * gap_days > n_days {
                    report.stocks_dropped.push(DroppedStock {
                        symbol: symbols[stock].clone(),
                        reason: format!("gaps on {gap_days} of {n_days} days"),
                    });
                    false
                } else {
                    true
                }
            });
            keep_days.retain(|&day| {
                for &stock in &keep_stocks {
                    for slot in 0..n_slots {
                        if is_missing(day, slot, stock) {
                            report.days_dropped.push(DroppedDay {
                                date: dates[day],
                                reason: format!(
                                    "missing {} in bin {}",
                                    symbols[stock],
                                    slot + first_bin
                                ),
                            });
                            return false;
                        }
                    }
                }
                true
            });
        }
        LoadPolicy::ZeroFill => {}
    }

    let mut values = Vec::with_capacity(keep_days.len() * n_slots * keep_stocks.len());
    for &day in &keep_days {
        for slot in 0..n_slots {
            for &stock in &keep_stocks {
                match cells[(day * n_slots + slot) * n + stock] {
                    Some(v) => values.push(v),
                    None => {
                        report.fills_applied += 1;
                        values.push(0.0);
                    }
                }
            }
        }
    }
    if report.fills_applied > 0 {
        report
            .warnings
            .push(format!("{} missing cells zero-filled", report.fills_applied));
    }

    let stock_ids: Vec<String> = keep_stocks.iter().map(|&s| symbols[s].clone()).collect();
    dates = keep_days.iter().map(|&d| dates[d]).collect();
    let panel = ReturnPanel::new(stock_ids, dates, bins_per_day, overnight_present, values)?;
    Ok((panel, report))
}

/// How intraday price stamps map onto bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StampConvention {
    /// `K+1` stamps per day: the opening print, then the close of each bin.
    /// Bin `k` runs from stamp `k-1` to stamp `k`.
    #[default]
    CloseToClose,
    /// `2K` stamps per day: the open and close of each bin in turn. Bin `k`
    /// runs from stamp `2k-2` to stamp `2k-1`; gaps between bins are skipped.
    OpenToClose,
}

impl std::str::FromStr for StampConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "close-to-close" => Ok(Self::CloseToClose),
            "open-to-close" => Ok(Self::OpenToClose),
            other => Err(Error::Contract(format!("unknown stamp convention {other:?}"))),
        }
    }
}

/// Converts price stamps into bar-return records.
///
/// The stamp grid is the sorted set of all times seen in the input. A
/// symbol-day missing a stamp simply produces no record for the affected
/// bins; the load policy decides what happens to those gaps. The overnight
/// return of day `t` is `open(t) / last(t-1) - 1`, where `t-1` is the previous
/// date present in the input, so the first day has no overnight record.
pub fn returns_from_prices(
    prices: &[PriceRecord],
    convention: StampConvention,
) -> Result<Vec<BarRecord>> {
    for p in prices {
        if !(p.price > 0.0) || !p.price.is_finite() {
            return Err(Error::Domain(format!(
                "non-positive price {} for {} on {} at {}",
                p.price, p.symbol, p.date, p.time
            )));
        }
    }
    let grid: Vec<NaiveTime> = prices
        .iter()
        .map(|p| p.time)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let bins_per_day = match convention {
        StampConvention::CloseToClose => grid.len().saturating_sub(1),
        StampConvention::OpenToClose => {
            if grid.len() % 2 != 0 {
                return Err(Error::Contract(format!(
                    "open-to-close needs an even number of stamps per day, found {}",
                    grid.len()
                )));
            }
            grid.len() / 2
        }
    };
    if bins_per_day == 0 {
        return Err(Error::Contract("price grid too short to form a bin".into()));
    }
    let position: HashMap<NaiveTime, usize> =
        grid.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let dates: Vec<NaiveDate> = prices
        .iter()
        .map(|p| p.date)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    // symbol -> date -> stamp prices
    let mut table: BTreeMap<&str, BTreeMap<NaiveDate, Vec<Option<f64>>>> = BTreeMap::new();
    for p in prices {
        let day = table
            .entry(p.symbol.as_str())
            .or_default()
            .entry(p.date)
            .or_insert_with(|| vec![None; grid.len()]);
        if day[position[&p.time]].replace(p.price).is_some() {
            return Err(Error::Duplicate {
                symbol: p.symbol.clone(),
                date: p.date,
                slot: format!("time {}", p.time.format("%H:%M")),
            });
        }
    }

    let last = grid.len() - 1;
    let mut out = Vec::new();
    for (symbol, days) in &table {
        for (i, date) in dates.iter().enumerate() {
            let Some(stamps) = days.get(date) else {
                continue;
            };
            if i > 0 {
                if let (Some(prev), Some(open)) = (days.get(&dates[i - 1]), stamps[0]) {
                    if let Some(close) = prev[last] {
                        out.push(BarRecord {
                            date: *date,
                            bin: OVERNIGHT_BIN,
                            symbol: symbol.to_string(),
                            value: open / close - 1.0,
                        });
                    }
                }
            }
            for bin in 1..=bins_per_day {
                let (from, to) = match convention {
                    StampConvention::CloseToClose => (bin - 1, bin),
                    StampConvention::OpenToClose => (2 * bin - 2, 2 * bin - 1),
                };
                if let (Some(a), Some(b)) = (stamps[from], stamps[to]) {
                    out.push(BarRecord {
                        date: *date,
                        bin,
                        symbol: symbol.to_string(),
                        value: b / a - 1.0,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// A cell whose magnitude exceeds the sanity bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CellWarning {
    pub stock: usize,
    pub bin: usize,
    pub day: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<CellWarning>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty() && self.warnings.is_empty()
    }
}

/// Audits a panel without modifying it: invariant violations plus every
/// cell with `|return| > sanity_bound`.
pub fn validate_panel(panel: &ReturnPanel, sanity_bound: f64) -> ValidationReport {
    let mut report = ValidationReport {
        violations: panel.invariant_violations(),
        warnings: Vec::new(),
    };
    for day in 0..panel.n_days() {
        for bin in panel.bins() {
            for (stock, &value) in panel.cross_section(bin, day).iter().enumerate() {
                if value.abs() > sanity_bound {
                    report.warnings.push(CellWarning {
                        stock,
                        bin,
                        day,
                        value,
                    });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn complete_records() -> Vec<BarRecord> {
        let mut out = Vec::new();
        for (di, date) in ["2020-01-02", "2020-01-03"].iter().enumerate() {
            for bin in 1..=2 {
                for (si, sym) in ["AAA", "BBB"].iter().enumerate() {
                    out.push(BarRecord {
                        date: d(date),
                        bin,
                        symbol: sym.to_string(),
                        value: 0.001 * (di * 4 + bin * 2 + si) as f64,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn complete_input_loads_cleanly() {
        let (panel, report) = load_panel(&complete_records(), LoadPolicy::Strict).unwrap();
        assert_eq!((panel.n_stocks(), panel.n_days(), panel.bins_per_day()), (2, 2, 2));
        assert!(!panel.overnight_present());
        assert!(report.is_clean());
        assert_eq!(report.rows_read, 8);
        assert_eq!(panel.get(1, 1, 2), 0.001 * 9.0);
    }

    #[test]
    fn strict_mode_names_the_gap() {
        let mut recs = complete_records();
        recs.retain(|r| !(r.symbol == "BBB" && r.date == d("2020-01-03") && r.bin == 1));
        match load_panel(&recs, LoadPolicy::Strict) {
            Err(Error::Completeness { symbol, date, bin }) => {
                assert_eq!(symbol, "BBB");
                assert_eq!(date, d("2020-01-03"));
                assert_eq!(bin, 1);
            }
            other => panic!("expected completeness error, got {other:?}"),
        }
    }

    #[test]
    fn zero_fill_fills_only_the_gap() {
        let full = complete_records();
        let mut recs = full.clone();
        recs.retain(|r| !(r.symbol == "BBB" && r.date == d("2020-01-03") && r.bin == 1));
        let (panel, report) = load_panel(&recs, LoadPolicy::ZeroFill).unwrap();
        let (reference, _) = load_panel(&full, LoadPolicy::Strict).unwrap();
        assert_eq!(report.fills_applied, 1);
        assert_eq!(panel.get(1, 1, 1), 0.0);
        for day in 0..2 {
            for bin in 1..=2 {
                for stock in 0..2 {
                    if (stock, day, bin) != (1, 1, 1) {
                        assert_eq!(panel.get(stock, day, bin), reference.get(stock, day, bin));
                    }
                }
            }
        }
    }

    #[test]
    fn drop_incomplete_drops_the_gappy_day() {
        let mut recs = complete_records();
        for date in ["2020-01-06", "2020-01-07"] {
            for bin in 1..=2 {
                for sym in ["AAA", "BBB"] {
                    recs.push(BarRecord {
                        date: d(date),
                        bin,
                        symbol: sym.into(),
                        value: 0.0,
                    });
                }
            }
        }
        recs.retain(|r| !(r.symbol == "AAA" && r.date == d("2020-01-06") && r.bin == 2));
        let (panel, report) = load_panel(&recs, LoadPolicy::DropIncomplete).unwrap();
        assert_eq!(panel.n_days(), 3);
        assert_eq!(report.days_dropped.len(), 1);
        assert_eq!(report.days_dropped[0].date, d("2020-01-06"));
        assert!(report.stocks_dropped.is_empty());
    }

    #[test]
    fn drop_incomplete_drops_mostly_absent_stock() {
        let mut recs = complete_records();
        recs.push(BarRecord {
            date: d("2020-01-02"),
            bin: 1,
            symbol: "CCC".into(),
            value: 0.0,
        });
        let (panel, report) = load_panel(&recs, LoadPolicy::DropIncomplete).unwrap();
        assert_eq!(panel.stock_ids(), &["AAA".to_string(), "BBB".to_string()]);
        assert_eq!(report.stocks_dropped.len(), 1);
        assert_eq!(report.stocks_dropped[0].symbol, "CCC");
        assert_eq!(panel.n_days(), 2);
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let mut recs = complete_records();
        recs.push(recs[3].clone());
        assert!(matches!(
            load_panel(&recs, LoadPolicy::ZeroFill),
            Err(Error::Duplicate { .. })
        ));
    }

    #[test]
    fn parse_error_carries_row_number() {
        let text = "date,bin,symbol,return\n2020-01-02,1,AAA,0.01\n2020-01-02,x,BBB,0.02\n";
        match read_bar_records(text.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn crlf_input_is_accepted() {
        let text = "date,bin,symbol,return\r\n2020-01-02,1,AAA,0.01\r\n";
        let recs = read_bar_records(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].value, 0.01);
    }

    fn price(date: &str, time: &str, symbol: &str, price: f64) -> PriceRecord {
        PriceRecord {
            date: d(date),
            time: NaiveTime::parse_from_str(time, "%H:%M").unwrap(),
            symbol: symbol.into(),
            price,
        }
    }

    #[test]
    fn intraday_and_overnight_returns_from_prices() {
        let prices = vec![
            price("2020-01-02", "09:30", "AAA", 100.0),
            price("2020-01-02", "09:35", "AAA", 101.0),
            price("2020-01-03", "09:30", "AAA", 103.02),
            price("2020-01-03", "09:35", "AAA", 103.02),
        ];
        let recs = returns_from_prices(&prices, StampConvention::CloseToClose).unwrap();
        let get = |date: &str, bin: usize| {
            recs.iter()
                .find(|r| r.date == d(date) && r.bin == bin)
                .map(|r| r.value)
        };
        assert!((get("2020-01-02", 1).unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(get("2020-01-02", 0), None);
        assert!((get("2020-01-03", 0).unwrap() - 0.02).abs() < 1e-12);
        assert_eq!(get("2020-01-03", 1), Some(0.0));
    }

    #[test]
    fn open_to_close_skips_between_bin_moves() {
        let prices = vec![
            price("2020-01-02", "09:30", "AAA", 100.0),
            price("2020-01-02", "09:34", "AAA", 101.0),
            price("2020-01-02", "09:35", "AAA", 200.0),
            price("2020-01-02", "09:39", "AAA", 202.0),
        ];
        let recs = returns_from_prices(&prices, StampConvention::OpenToClose).unwrap();
        assert_eq!(recs.len(), 2);
        assert!((recs[0].value - 0.01).abs() < 1e-12);
        assert!((recs[1].value - 0.01).abs() < 1e-12);
    }

    #[test]
    fn zero_price_is_a_domain_error() {
        let prices = vec![
            price("2020-01-02", "09:30", "AAA", 100.0),
            price("2020-01-02", "09:35", "AAA", 0.0),
        ];
        assert!(matches!(
            returns_from_prices(&prices, StampConvention::CloseToClose),
            Err(Error::Domain(_))
        ));
        let text = "date,time,symbol,price\n2020-01-02,09:30,AAA,0\n";
        assert!(matches!(read_price_records(text.as_bytes()), Err(Error::Domain(_))));
    }

    #[test]
    fn first_day_without_overnight_is_trimmed() {
        let prices: Vec<PriceRecord> = ["2020-01-02", "2020-01-03", "2020-01-06"]
            .iter()
            .flat_map(|date| {
                ["AAA", "BBB"].into_iter().flat_map(move |sym| {
                    [("09:30", 100.0), ("09:35", 101.0), ("09:40", 100.5)]
                        .into_iter()
                        .map(move |(t, p)| price(date, t, sym, p))
                })
            })
            .collect();
        let recs = returns_from_prices(&prices, StampConvention::CloseToClose).unwrap();
        let (panel, report) = load_panel(&recs, LoadPolicy::Strict).unwrap();
        assert!(panel.overnight_present());
        assert_eq!(panel.n_days(), 2);
        assert_eq!(report.days_dropped.len(), 1);
        assert_eq!(report.days_dropped[0].date, d("2020-01-02"));
        assert!((panel.get(0, 0, 0) - (100.0 / 100.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn validation_flags_large_cells_and_bad_dates() {
        let (panel, _) = load_panel(&complete_records(), LoadPolicy::Strict).unwrap();
        assert!(validate_panel(&panel, DEFAULT_SANITY_BOUND).is_empty());

        let wild = panel.map(|s, t, k, v| if (s, t, k) == (1, 0, 2) { 0.9 } else { v });
        let report = validate_panel(&wild, DEFAULT_SANITY_BOUND);
        assert!(report.violations.is_empty());
        assert_eq!(
            report.warnings,
            vec![CellWarning {
                stock: 1,
                bin: 2,
                day: 0,
                value: 0.9
            }]
        );

        let dup = ReturnPanel::from_raw_parts(
            panel.stock_ids().to_vec(),
            vec![d("2020-01-02"), d("2020-01-02")],
            2,
            false,
            panel.values().to_vec(),
        )
        .unwrap();
        let report = validate_panel(&dup, DEFAULT_SANITY_BOUND);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].contains("duplicate date"));
    }
}
