//! Cross-sectional statistics at fixed (bin, day).
//!
//! `μ_d` is the equiweighted index return, `σ_d` the dispersion of the `N`
//! stock returns around it. The kurtosis uses the same low-moment kernel as
//! the single-stock estimator, without the `ζ²` correction, and measures the
//! absolute deviations about the cross-sectional mean `μ_d(k;t)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::Summary;
use crate::panel::ReturnPanel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSet {
    pub bin: usize,
    pub day: usize,
    pub index_return: f64,
    pub dispersion: f64,
    /// `None` when all stocks returned the same amount.
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub median: f64,
    /// Cross-sectional mean absolute deviation about `μ_d`.
    pub mad: f64,
}

impl DispersionSet {
    pub fn from_cross_section(bin: usize, day: usize, returns: &[f64]) -> Result<Self> {
        let s = Summary::of(returns)?;
        Ok(Self {
            bin,
            day,
            index_return: s.mean,
            dispersion: s.std(),
            skewness: s.skewness(),
            kurtosis: s.kurtosis(),
            median: s.median,
            mad: s.mad,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.skewness.is_none()
    }
}

pub fn dispersion_moments(panel: &ReturnPanel, bin: usize, day: usize) -> Result<DispersionSet> {
    check_cell(panel, bin, day)?;
    DispersionSet::from_cross_section(bin, day, panel.cross_section(bin, day))
}

/// `[|η_α − μ_d|](k;t)`
pub fn dispersion_mad(panel: &ReturnPanel, bin: usize, day: usize) -> Result<f64> {
    check_cell(panel, bin, day)?;
    Ok(Summary::of(panel.cross_section(bin, day))?.mad)
}

fn check_cell(panel: &ReturnPanel, bin: usize, day: usize) -> Result<()> {
    if !panel.has_bin(bin) || day >= panel.n_days() {
        return Err(Error::Contract(format!(
            "cell (bin {bin}, day {day}) outside panel"
        )));
    }
    Ok(())
}

/// Dispersion statistics for every (bin, day), ordered day-major with bins
/// in [`ReturnPanel::bins`] order.
pub fn dispersion_grid(panel: &ReturnPanel) -> Result<Vec<DispersionSet>> {
    let bins: Vec<usize> = panel.bins().collect();
    (0..panel.n_days())
        .into_par_iter()
        .flat_map_iter(|day| {
            bins.iter()
                .map(move |&bin| {
                    DispersionSet::from_cross_section(bin, day, panel.cross_section(bin, day))
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Returns divided by the contemporaneous dispersion, `η̂ = η / σ_d(k;t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPanel {
    values: ReturnPanel,
    /// `σ_d` per (day, bin slot), kept to tie the values back to the source.
    dispersions: Vec<f64>,
}

impl NormalizedPanel {
    /// The normalized values, with the source panel's labels.
    pub fn values(&self) -> &ReturnPanel {
        &self.values
    }

    /// The `σ_d(k;t)` each cell was divided by.
    pub fn source_dispersion(&self, bin: usize, day: usize) -> f64 {
        let first = usize::from(!self.values.overnight_present());
        let slots = self.values.bins_per_day() + 1 - first;
        self.dispersions[day * slots + bin - first]
    }
}

pub fn normalize_panel(panel: &ReturnPanel) -> Result<NormalizedPanel> {
    let mut dispersions = Vec::with_capacity(panel.n_days() * (panel.bins_per_day() + 1));
    let mut degenerate = Vec::new();
    for day in 0..panel.n_days() {
        for bin in panel.bins() {
            let s = Summary::of(panel.cross_section(bin, day))?;
            if s.constant {
                degenerate.push((bin, day));
            }
            dispersions.push(s.std());
        }
    }
    if !degenerate.is_empty() {
        return Err(Error::DegenerateBinDays(degenerate));
    }
    let first = usize::from(!panel.overnight_present());
    let slots = panel.bins_per_day() + 1 - first;
    let values = panel.map(|_, day, bin, v| v / dispersions[day * slots + bin - first]);
    Ok(NormalizedPanel {
        values,
        dispersions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn panel_from(cross_sections: Vec<Vec<f64>>) -> ReturnPanel {
        // one bin, one cross-section per day
        let n = cross_sections[0].len();
        let days = cross_sections.len();
        ReturnPanel::from_fn(
            (0..n).map(|i| format!("S{i}")).collect(),
            (0..days)
                .map(|t| NaiveDate::from_ymd_opt(2021, 3, 1 + t as u32).unwrap())
                .collect(),
            1,
            false,
            |s, t, _| cross_sections[t][s],
        )
        .unwrap()
    }

    #[test]
    fn constant_cross_section() {
        let panel = panel_from(vec![vec![0.01; 3], vec![0.0, 0.01, 0.02]]);
        let d = dispersion_moments(&panel, 1, 0).unwrap();
        assert!((d.index_return - 0.01).abs() < 1e-17);
        assert_eq!(d.dispersion, 0.0);
        assert!(d.is_degenerate());
        assert_eq!(dispersion_mad(&panel, 1, 0).unwrap(), 0.0);
    }

    #[test]
    fn two_stock_hand_case() {
        let panel = panel_from(vec![vec![0.0, 0.02], vec![-0.01, 0.01]]);
        let d = dispersion_moments(&panel, 1, 0).unwrap();
        assert_eq!(d.index_return, 0.01);
        assert_eq!(d.dispersion, 0.01);
        assert_eq!(d.median, 0.01);
        assert_eq!(d.skewness, Some(0.0));
        assert_eq!(dispersion_mad(&panel, 1, 1).unwrap(), 0.01);
    }

    #[test]
    fn normalization_is_scale_free() {
        let base = vec![vec![0.01, -0.02, 0.005], vec![0.03, 0.0, -0.01]];
        let mut doubled = base.clone();
        doubled[1].iter_mut().for_each(|v| *v *= 2.0);
        let a = normalize_panel(&panel_from(base)).unwrap();
        let b = normalize_panel(&panel_from(doubled)).unwrap();
        for s in 0..3 {
            let (x, y) = (a.values().get(s, 1, 1), b.values().get(s, 1, 1));
            assert!((x - y).abs() < 1e-14);
        }
        assert!((b.source_dispersion(1, 1) - 2.0 * a.source_dispersion(1, 1)).abs() < 1e-15);
    }

    #[test]
    fn unit_dispersion_panel_is_unchanged() {
        let panel = panel_from(vec![vec![-1.0, 1.0], vec![0.5, 2.5]]);
        let normalized = normalize_panel(&panel).unwrap();
        assert_eq!(normalized.values(), &panel);
    }

    #[test]
    fn constant_bin_day_is_named() {
        let panel = panel_from(vec![vec![0.01, -0.01], vec![0.02, 0.02]]);
        match normalize_panel(&panel) {
            Err(Error::DegenerateBinDays(cells)) => assert_eq!(cells, vec![(1, 1)]),
            other => panic!("expected degeneracy error, got {other:?}"),
        }
    }

    #[test]
    fn grid_order_is_day_major() {
        let panel = panel_from(vec![vec![0.0, 0.1], vec![0.2, 0.4]]);
        let grid = dispersion_grid(&panel).unwrap();
        assert_eq!(grid.iter().map(|d| (d.day, d.bin)).collect::<Vec<_>>(), [(0, 1), (1, 1)]);
        assert!((grid[1].index_return - 0.3).abs() < 1e-15);
    }
}
