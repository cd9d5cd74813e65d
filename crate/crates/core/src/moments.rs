//! Low-moment estimators of location, scale, skewness and kurtosis.
//!
//! Skewness and kurtosis are estimated without moments above the second:
//!
//! ```text
//! ζ = 6 (μ − m) / σ
//! κ = 24 (1 − √(π/2) ⟨|x − μ|⟩ / σ)  [+ ζ²]
//! ```
//!
//! where `m` is the median. Both vanish for a Gaussian. The variance is the
//! population variance (divide by the sample count).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::ReturnPanel;

/// `√(π/2)`
pub(crate) const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;

/// Location and scale summary shared by the time-series and cross-sectional
/// estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Summary {
    pub mean: f64,
    pub variance: f64,
    pub median: f64,
    /// Mean absolute deviation about the mean.
    pub mad: f64,
    pub count: usize,
    /// All samples equal.
    pub constant: bool,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Result<Self> {
        let count = samples.len();
        if count < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: count,
            });
        }
        let n = count as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let first = samples[0];
        let constant = samples.iter().all(|&x| x == first);
        let (variance, mad) = if constant {
            (0.0, 0.0)
        } else {
            let (sq, abs) = samples.iter().fold((0.0, 0.0), |(sq, abs), &x| {
                let d = x - mean;
                (sq + d * d, abs + d.abs())
            });
            (sq / n, abs / n)
        };
        Ok(Self {
            mean,
            variance,
            median: median(samples),
            mad,
            count,
            constant,
        })
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn skewness(&self) -> Option<f64> {
        (!self.constant).then(|| 6.0 * (self.mean - self.median) / self.std())
    }

    /// Kurtosis without the ζ² correction.
    pub fn kurtosis(&self) -> Option<f64> {
        (!self.constant).then(|| 24.0 * (1.0 - SQRT_HALF_PI * self.mad / self.std()))
    }
}

fn median(samples: &[f64]) -> f64 {
    let mut buf = samples.to_vec();
    let n = buf.len();
    let mid = n / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

/// Mean, population variance and median of a sample.
pub fn sample_mean_var_median(samples: &[f64]) -> Result<(f64, f64, f64)> {
    let s = Summary::of(samples)?;
    Ok((s.mean, s.variance, s.median))
}

/// `6 (μ − m) / σ`.
pub fn low_moment_skewness(samples: &[f64]) -> Result<f64> {
    Summary::of(samples)?
        .skewness()
        .ok_or_else(|| Error::Degenerate("zero volatility, skewness undefined".into()))
}

/// `24 (1 − √(π/2) MAD / σ)`, plus `ζ²` when `include_skew_correction` is set.
pub fn low_moment_kurtosis(samples: &[f64], include_skew_correction: bool) -> Result<f64> {
    let s = Summary::of(samples)?;
    let kurtosis = s
        .kurtosis()
        .ok_or_else(|| Error::Degenerate("zero volatility, kurtosis undefined".into()))?;
    Ok(if include_skew_correction {
        let skew = s.skewness().unwrap_or(0.0);
        kurtosis + skew * skew
    } else {
        kurtosis
    })
}

/// The four low moments of one sample.
///
/// `skewness` and `kurtosis` are `None` when every sample is equal (zero
/// volatility); they are never silently zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub mean: f64,
    pub volatility: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub median: f64,
    pub sample_count: usize,
}

impl MomentSet {
    pub fn from_samples(samples: &[f64], include_skew_correction: bool) -> Result<Self> {
        let s = Summary::of(samples)?;
        let skewness = s.skewness();
        let kurtosis = s.kurtosis().map(|k| {
            if include_skew_correction {
                let z = skewness.unwrap_or(0.0);
                k + z * z
            } else {
                k
            }
        });
        Ok(Self {
            mean: s.mean,
            volatility: s.std(),
            skewness,
            kurtosis,
            median: s.median,
            sample_count: s.count,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.skewness.is_none()
    }
}

/// Per-(stock, bin) moments over days.
#[derive(Debug, Clone, PartialEq)]
pub struct StockBinMoments {
    stock_ids: Vec<String>,
    bins_per_day: usize,
    overnight_present: bool,
    /// `[stock][bin slot]`
    cells: Vec<MomentSet>,
}

impl StockBinMoments {
    /// Assembles the table from explicit cells laid out `[stock][bin slot]`.
    pub fn from_cells(
        stock_ids: Vec<String>,
        bins_per_day: usize,
        overnight_present: bool,
        cells: Vec<MomentSet>,
    ) -> Result<Self> {
        let slots = bins_per_day + usize::from(overnight_present);
        if cells.len() != stock_ids.len() * slots {
            return Err(Error::Invariant(format!(
                "{} moment cells for {} stocks x {} bins",
                cells.len(),
                stock_ids.len(),
                slots
            )));
        }
        Ok(Self {
            stock_ids,
            bins_per_day,
            overnight_present,
            cells,
        })
    }

    pub fn stock_ids(&self) -> &[String] {
        &self.stock_ids
    }

    pub fn n_stocks(&self) -> usize {
        self.stock_ids.len()
    }

    pub fn bins_per_day(&self) -> usize {
        self.bins_per_day
    }

    pub fn overnight_present(&self) -> bool {
        self.overnight_present
    }

    pub fn bins(&self) -> std::ops::RangeInclusive<usize> {
        usize::from(!self.overnight_present)..=self.bins_per_day
    }

    pub fn get(&self, stock: usize, bin: usize) -> &MomentSet {
        let first = usize::from(!self.overnight_present);
        assert!(bin >= first && bin <= self.bins_per_day, "bin {bin} out of range");
        let slots = self.bins_per_day + 1 - first;
        &self.cells[stock * slots + bin - first]
    }

    /// Number of degenerate (zero-volatility) cells.
    pub fn degenerate_count(&self) -> usize {
        self.cells.iter().filter(|m| m.is_degenerate()).count()
    }
}

/// Moments of every (stock, bin) series over the panel's days, including the
/// overnight bin when present. Degenerate cells are carried, not fatal.
pub fn stock_bin_moments(panel: &ReturnPanel) -> Result<StockBinMoments> {
    if panel.n_days() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: panel.n_days(),
        });
    }
    let bins: Vec<usize> = panel.bins().collect();
    let cells = (0..panel.n_stocks())
        .into_par_iter()
        .flat_map_iter(|stock| {
            bins.iter()
                .map(move |&bin| MomentSet::from_samples(&panel.series(stock, bin), false))
                .collect::<Vec<_>>()
        })
        .collect::<Result<Vec<_>>>()?;
    StockBinMoments::from_cells(
        panel.stock_ids().to_vec(),
        panel.bins_per_day(),
        panel.overnight_present(),
        cells,
    )
}
