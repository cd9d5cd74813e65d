//! Intraday profiles and the morning power-law fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::ReturnPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandKind {
    /// Standard error of the mean, `std / √n`.
    StdErr,
    /// One standard deviation of the averaged values.
    Dispersion,
}

/// A statistic sampled on a (bin, column) grid, where columns are days or
/// stocks. Missing cells (degenerate estimates) are `None` and are skipped
/// when averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSeries {
    name: String,
    bins_per_day: usize,
    overnight_present: bool,
    columns: usize,
    /// `[bin slot][column]`
    cells: Vec<Option<f64>>,
}

impl BinSeries {
    pub fn from_fn(
        name: impl Into<String>,
        bins_per_day: usize,
        overnight_present: bool,
        columns: usize,
        mut f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Self {
        let first = usize::from(!overnight_present);
        let mut cells = Vec::with_capacity((bins_per_day + 1) * columns);
        for bin in first..=bins_per_day {
            for col in 0..columns {
                cells.push(f(bin, col));
            }
        }
        Self {
            name: name.into(),
            bins_per_day,
            overnight_present,
            columns,
            cells,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    fn bin_cells(&self, bin: usize) -> impl Iterator<Item = f64> + '_ {
        let slot = bin - usize::from(!self.overnight_present);
        self.cells[slot * self.columns..(slot + 1) * self.columns]
            .iter()
            .flatten()
            .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvernightPoint {
    pub value: f64,
    pub band: f64,
}

/// A per-bin curve over intraday bins `1..=K`, with an optional detached
/// overnight point.
#[derive(Debug, Clone, PartialEq)]
pub struct IntradayProfile {
    pub statistic: String,
    /// `values[k - 1]` is bin `k`.
    pub values: Vec<f64>,
    pub band: Vec<f64>,
    pub band_kind: BandKind,
    pub overnight: Option<OvernightPoint>,
}

impl IntradayProfile {
    pub fn bins_per_day(&self) -> usize {
        self.values.len()
    }

    /// Value at intraday bin `k` (1-based).
    pub fn value(&self, bin: usize) -> f64 {
        self.values[bin - 1]
    }

    /// Multiplies values and bands by `c`.
    pub fn scaled(&self, c: f64) -> IntradayProfile {
        IntradayProfile {
            statistic: self.statistic.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            band: self.band.iter().map(|b| b * c.abs()).collect(),
            band_kind: self.band_kind,
            overnight: self.overnight.map(|p| OvernightPoint {
                value: p.value * c,
                band: p.band * c.abs(),
            }),
        }
    }
}

fn mean_and_band(values: impl Iterator<Item = f64>, kind: BandKind) -> Option<(f64, f64)> {
    let xs: Vec<f64> = values.collect();
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    let band = match kind {
        BandKind::StdErr => std / n.sqrt(),
        BandKind::Dispersion => std,
    };
    Some((mean, band))
}

fn profile_over_columns(series: &BinSeries, kind: BandKind) -> Result<IntradayProfile> {
    let mut values = Vec::with_capacity(series.bins_per_day);
    let mut band = Vec::with_capacity(series.bins_per_day);
    for bin in 1..=series.bins_per_day {
        let (m, b) = mean_and_band(series.bin_cells(bin), kind).ok_or_else(|| {
            Error::Degenerate(format!("{}: no defined values in bin {bin}", series.name))
        })?;
        values.push(m);
        band.push(b);
    }
    let overnight = if series.overnight_present {
        mean_and_band(series.bin_cells(0), kind).map(|(value, band)| OvernightPoint { value, band })
    } else {
        None
    };
    Ok(IntradayProfile {
        statistic: series.name.clone(),
        values,
        band,
        band_kind: kind,
        overnight,
    })
}

/// `[⟨F⟩](k)`: per-bin average over days of a (bin, day) statistic.
pub fn profile_over_days(series: &BinSeries, kind: BandKind) -> Result<IntradayProfile> {
    if series.columns < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: series.columns,
        });
    }
    profile_over_columns(series, kind)
}

/// Per-bin average over stocks of a (stock, bin) statistic.
pub fn profile_over_stocks(series: &BinSeries, kind: BandKind) -> Result<IntradayProfile> {
    if series.columns < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: series.columns,
        });
    }
    profile_over_columns(series, kind)
}

/// `⟨|μ_d(k;t)|⟩`, the average absolute equiweighted index return per bin.
pub fn index_abs_return_profile(panel: &ReturnPanel) -> Result<IntradayProfile> {
    let n = panel.n_stocks() as f64;
    let series = BinSeries::from_fn(
        "abs_index_return",
        panel.bins_per_day(),
        panel.overnight_present(),
        panel.n_days(),
        |bin, day| Some((panel.cross_section(bin, day).iter().sum::<f64>() / n).abs()),
    );
    profile_over_columns(&series, BandKind::StdErr)
}

/// Pointwise ratio with first-order error propagation.
pub fn ratio_profile(
    numerator: &IntradayProfile,
    denominator: &IntradayProfile,
) -> Result<IntradayProfile> {
    if numerator.values.len() != denominator.values.len() {
        return Err(Error::Contract(format!(
            "profiles have {} and {} bins",
            numerator.values.len(),
            denominator.values.len()
        )));
    }
    let ratio = |n: f64, nb: f64, d: f64, db: f64| {
        let r = n / d;
        // (r·√((nb/n)² + (db/d)²)), written to stay finite at n = 0
        (r, ((nb / d).powi(2) + (r * db / d).powi(2)).sqrt())
    };
    let mut values = Vec::with_capacity(numerator.values.len());
    let mut band = Vec::with_capacity(numerator.values.len());
    for k in 0..numerator.values.len() {
        let d = denominator.values[k];
        if d == 0.0 {
            return Err(Error::ZeroDenominator { bin: k + 1 });
        }
        let (r, b) = ratio(numerator.values[k], numerator.band[k], d, denominator.band[k]);
        values.push(r);
        band.push(b);
    }
    let overnight = match (numerator.overnight, denominator.overnight) {
        (Some(n), Some(d)) if d.value != 0.0 => {
            let (value, band) = ratio(n.value, n.band, d.value, d.band);
            Some(OvernightPoint { value, band })
        }
        _ => None,
    };
    Ok(IntradayProfile {
        statistic: format!("{}/{}", numerator.statistic, denominator.statistic),
        values,
        band,
        band_kind: numerator.band_kind,
        overnight,
    })
}

/// Inclusive range of intraday bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitRange {
    pub first: usize,
    pub last: usize,
}

impl FitRange {
    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }
}

/// Named fit windows for the morning decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitWindow {
    /// Bins `1..=⌊K/2⌋`.
    #[default]
    FirstHalf,
    /// The first two hours of a 6.5-hour session: bins `1..=round(K·120/390)`.
    FirstTwoHours,
}

impl FitWindow {
    pub fn resolve(self, bins_per_day: usize) -> FitRange {
        let last = match self {
            FitWindow::FirstHalf => bins_per_day / 2,
            FitWindow::FirstTwoHours => ((bins_per_day * 120) as f64 / 390.0).round() as usize,
        };
        FitRange {
            first: 1,
            last: last.max(1),
        }
    }
}

impl std::str::FromStr for FitWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-half" => Ok(Self::FirstHalf),
            "first-two-hours" => Ok(Self::FirstTwoHours),
            other => Err(Error::Contract(format!("unknown fit window {other:?}"))),
        }
    }
}

/// `value(k) ≈ A · k^(−β)` fitted by least squares in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub fit_range: FitRange,
    /// Root mean square of the log-space residuals.
    pub residual_rms: f64,
    pub stderr_beta: f64,
}

impl PowerLawFit {
    pub fn predict(&self, bin: usize) -> f64 {
        self.amplitude * (bin as f64).powf(-self.exponent)
    }
}

pub fn fit_power_law(profile: &IntradayProfile, range: FitRange) -> Result<PowerLawFit> {
    if range.first < 1 || range.last > profile.values.len() || range.is_empty() {
        return Err(Error::Contract(format!(
            "fit range {}..={} outside bins 1..={}",
            range.first,
            range.last,
            profile.values.len()
        )));
    }
    if range.len() < 3 {
        return Err(Error::Contract(format!(
            "power-law fit needs at least 3 bins, range has {}",
            range.len()
        )));
    }
    let mut xs = Vec::with_capacity(range.len());
    let mut ys = Vec::with_capacity(range.len());
    for bin in range.first..=range.last {
        let v = profile.value(bin);
        if !(v > 0.0) {
            return Err(Error::Domain(format!(
                "non-positive profile value {v} in bin {bin}"
            )));
        }
        xs.push((bin as f64).ln());
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    Ok(PowerLawFit {
        amplitude: intercept.exp(),
        exponent: -slope,
        fit_range: range,
        residual_rms: (ssr / n).sqrt(),
        stderr_beta: (ssr / (n - 2.0) / sxx).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(values: Vec<f64>) -> IntradayProfile {
        let k = values.len();
        IntradayProfile {
            statistic: "test".into(),
            values,
            band: vec![0.0; k],
            band_kind: BandKind::StdErr,
            overnight: None,
        }
    }

    #[test]
    fn constant_series_has_zero_band() {
        let series = BinSeries::from_fn("c", 4, true, 5, |_, _| Some(0.3));
        let p = profile_over_days(&series, BandKind::Dispersion).unwrap();
        assert_eq!(p.values, vec![0.3; 4]);
        assert_eq!(p.band, vec![0.0; 4]);
        assert_eq!(p.overnight, Some(OvernightPoint { value: 0.3, band: 0.0 }));
    }

    #[test]
    fn two_day_average_and_dispersion() {
        let series = BinSeries::from_fn("x", 2, false, 2, |bin, day| {
            Some(if day == 0 { 1.0 * bin as f64 } else { 4.0 })
        });
        let p = profile_over_days(&series, BandKind::Dispersion).unwrap();
        assert_eq!(p.values, vec![2.5, 3.0]);
        assert_eq!(p.band, vec![1.5, 1.0]);
        assert!(p.overnight.is_none());
    }

    #[test]
    fn two_stock_average() {
        let series = BinSeries::from_fn("sigma", 3, false, 2, |bin, stock| {
            Some(if stock == 0 { 0.01 * bin as f64 } else { 0.03 })
        });
        let p = profile_over_stocks(&series, BandKind::StdErr).unwrap();
        for k in 1..=3 {
            assert!((p.value(k) - (0.01 * k as f64 + 0.03) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_cells_are_skipped() {
        let series = BinSeries::from_fn("kappa", 1, false, 3, |_, col| (col != 1).then_some(col as f64));
        let p = profile_over_days(&series, BandKind::StdErr).unwrap();
        assert_eq!(p.values, vec![1.0]);
        let empty = BinSeries::from_fn("kappa", 1, false, 3, |_, _| None);
        assert!(matches!(
            profile_over_days(&empty, BandKind::StdErr),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn ratio_examples() {
        let a = profile(vec![1.0, 2.0, 3.0]);
        let r = ratio_profile(&a, &a).unwrap();
        assert_eq!(r.values, vec![1.0; 3]);
        let r = ratio_profile(&a.scaled(2.0), &a).unwrap();
        assert_eq!(r.values, vec![2.0; 3]);
        let zero = profile(vec![1.0, 0.0, 1.0]);
        assert!(matches!(
            ratio_profile(&a, &zero),
            Err(Error::ZeroDenominator { bin: 2 })
        ));
    }

    #[test]
    fn ratio_band_adds_relative_errors_in_quadrature() {
        let mut num = profile(vec![2.0]);
        num.band = vec![0.06];
        let mut den = profile(vec![4.0]);
        den.band = vec![0.16];
        let r = ratio_profile(&num, &den).unwrap();
        // relative errors 3% and 4% -> 5%
        assert!((r.band[0] - 0.5 * 0.05).abs() < 1e-15);
    }

    #[test]
    fn noiseless_power_law() {
        let p = profile((1..=40).map(|k| 0.02 * (k as f64).powf(-0.3)).collect());
        let fit = fit_power_law(&p, FitWindow::FirstHalf.resolve(40)).unwrap();
        assert!((fit.exponent - 0.3).abs() < 1e-10);
        assert!((fit.amplitude - 0.02).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-10);
        assert_eq!(fit.fit_range, FitRange { first: 1, last: 20 });
    }

    #[test]
    fn flat_profile_has_zero_exponent() {
        let fit = fit_power_law(&profile(vec![0.5; 10]), FitRange { first: 1, last: 10 }).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let p = profile(vec![1.0, -1.0, 0.5, 0.2]);
        assert!(matches!(
            fit_power_law(&p, FitRange { first: 1, last: 4 }),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            fit_power_law(&p, FitRange { first: 3, last: 4 }),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn window_presets() {
        assert_eq!(FitWindow::FirstHalf.resolve(78), FitRange { first: 1, last: 39 });
        assert_eq!(FitWindow::FirstTwoHours.resolve(78), FitRange { first: 1, last: 24 });
    }
}
