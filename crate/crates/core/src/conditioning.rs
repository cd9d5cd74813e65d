//! Binned conditional statistics of the cross-sectional moments.
//!
//! Every curve is a set of buckets over a conditioning variable `x` (the
//! index return `μ_d`, its absolute value, or the dispersion), each holding
//! the mean of a statistic `y` with its standard error. Buckets with fewer
//! than `min_count` pairs are left out and counted.

use serde::{Deserialize, Serialize};

use crate::cross_section::DispersionSet;
use crate::error::{Error, Result};

/// Default bucket width on `μ_d` (0.10%).
pub const DEFAULT_BUCKET_WIDTH: f64 = 0.001;
/// Default range half-width on `μ_d` (3%).
pub const DEFAULT_BUCKET_SPAN: f64 = 0.03;
pub const DEFAULT_MIN_COUNT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BucketSpec {
    /// `⌈(hi − lo) / width⌉` equal buckets starting at `lo`; `x = hi` lands
    /// in the last bucket.
    FixedWidth { lo: f64, hi: f64, width: f64 },
    /// Strictly increasing edges; bucket `i` is `[edges[i], edges[i+1])`,
    /// the last one closed.
    Edges(Vec<f64>),
}

impl BucketSpec {
    /// ±3% in steps of 0.10%.
    pub fn default_signed() -> Self {
        BucketSpec::FixedWidth {
            lo: -DEFAULT_BUCKET_SPAN,
            hi: DEFAULT_BUCKET_SPAN,
            width: DEFAULT_BUCKET_WIDTH,
        }
    }

    /// 0 to 3% in steps of 0.10%.
    pub fn default_absolute() -> Self {
        BucketSpec::FixedWidth {
            lo: 0.0,
            hi: DEFAULT_BUCKET_SPAN,
            width: DEFAULT_BUCKET_WIDTH,
        }
    }

    fn edges(&self) -> Result<Vec<f64>> {
        match self {
            BucketSpec::FixedWidth { lo, hi, width } => {
                if !(*width > 0.0) || !(hi > lo) || !width.is_finite() {
                    return Err(Error::Contract(format!(
                        "bucket spec needs width > 0 and hi > lo, got width {width} over [{lo}, {hi}]"
                    )));
                }
                let count = ((hi - lo) / width - 1e-9).ceil().max(1.0) as usize;
                Ok((0..=count)
                    .map(|i| if i == count { *hi } else { lo + i as f64 * width })
                    .collect())
            }
            BucketSpec::Edges(edges) => {
                if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Contract(
                        "bucket edges must be at least two strictly increasing values".into(),
                    ));
                }
                Ok(edges.clone())
            }
        }
    }
}

fn bucket_of(edges: &[f64], x: f64) -> Option<usize> {
    let last = edges.len() - 1;
    if !(x >= edges[0] && x <= edges[last]) {
        return None;
    }
    let i = edges.partition_point(|e| *e <= x);
    Some(i.clamp(1, last) - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCurve {
    pub conditioning_name: String,
    pub statistic_name: String,
    pub bucket_centers: Vec<f64>,
    pub means: Vec<f64>,
    pub stderr: Vec<f64>,
    pub counts: Vec<usize>,
    /// Non-empty buckets dropped for having fewer than `min_count` pairs.
    pub omitted_buckets: usize,
    /// Pairs falling outside the bucket range.
    pub out_of_range: usize,
}

impl ConditionalCurve {
    pub fn len(&self) -> usize {
        self.bucket_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bucket_centers.is_empty()
    }

    fn with_names(mut self, conditioning: &str, statistic: &str) -> Self {
        self.conditioning_name = conditioning.into();
        self.statistic_name = statistic.into();
        self
    }

    /// Buckets whose mirror image `−x` is also present.
    pub fn symmetric_subset(&self) -> ConditionalCurve {
        let tol = pairing_tolerance(&self.bucket_centers);
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let c = self.bucket_centers[i];
                self.bucket_centers.iter().any(|&o| (o + c).abs() <= tol)
            })
            .collect();
        self.select(&keep)
    }

    fn select(&self, idx: &[usize]) -> ConditionalCurve {
        ConditionalCurve {
            conditioning_name: self.conditioning_name.clone(),
            statistic_name: self.statistic_name.clone(),
            bucket_centers: idx.iter().map(|&i| self.bucket_centers[i]).collect(),
            means: idx.iter().map(|&i| self.means[i]).collect(),
            stderr: idx.iter().map(|&i| self.stderr[i]).collect(),
            counts: idx.iter().map(|&i| self.counts[i]).collect(),
            omitted_buckets: self.omitted_buckets,
            out_of_range: self.out_of_range,
        }
    }
}

/// Per-bucket mean of `y` given `x`, with `stderr = std(y) / √count`.
pub fn conditional_statistic(
    pairs: &[(f64, f64)],
    buckets: &BucketSpec,
    min_count: usize,
) -> Result<ConditionalCurve> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let edges = buckets.edges()?;
    let nb = edges.len() - 1;
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); nb];
    let mut out_of_range = 0;
    for &(x, y) in pairs {
        match bucket_of(&edges, x) {
            Some(b) if y.is_finite() => members[b].push(y),
            Some(_) => {}
            None => out_of_range += 1,
        }
    }
    let mut curve = ConditionalCurve {
        conditioning_name: "x".into(),
        statistic_name: "y".into(),
        bucket_centers: Vec::new(),
        means: Vec::new(),
        stderr: Vec::new(),
        counts: Vec::new(),
        omitted_buckets: 0,
        out_of_range,
    };
    for (b, ys) in members.iter_mut().enumerate() {
        if ys.is_empty() {
            continue;
        }
        if ys.len() < min_count.max(1) {
            curve.omitted_buckets += 1;
            continue;
        }
        // sorted so the sums do not depend on input order
        ys.sort_by(f64::total_cmp);
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        curve.bucket_centers.push(0.5 * (edges[b] + edges[b + 1]));
        curve.means.push(mean);
        curve.stderr.push((var / n).sqrt());
        curve.counts.push(ys.len());
    }
    Ok(curve)
}

/// Which conditioning axis to use for the index return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexAxis {
    Signed,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispersionKind {
    /// Cross-sectional standard deviation `σ_d`.
    Std,
    /// Cross-sectional mean absolute deviation.
    Mad,
}

/// Selects which bin-days enter a conditional curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DispersionFilter {
    pub include_overnight: bool,
    /// Restrict to one bin.
    pub bin: Option<usize>,
}

impl DispersionFilter {
    pub fn accepts(&self, d: &DispersionSet) -> bool {
        (self.include_overnight || d.bin != 0) && self.bin.is_none_or(|b| d.bin == b)
    }
}

fn collect_pairs(
    sets: &[DispersionSet],
    filter: DispersionFilter,
    f: impl Fn(&DispersionSet) -> Option<(f64, f64)>,
) -> Vec<(f64, f64)> {
    sets.iter().filter(|d| filter.accepts(d)).filter_map(f).collect()
}

/// `σ_d` against `μ_d`.
pub fn dispersion_vs_index(
    sets: &[DispersionSet],
    filter: DispersionFilter,
    buckets: &BucketSpec,
    min_count: usize,
) -> Result<ConditionalCurve> {
    let pairs = collect_pairs(sets, filter, |d| Some((d.index_return, d.dispersion)));
    Ok(conditional_statistic(&pairs, buckets, min_count)?.with_names("index_return", "dispersion"))
}

/// `ζ_d` against `μ_d`. Degenerate cross-sections are skipped.
pub fn skew_vs_index(
    sets: &[DispersionSet],
    filter: DispersionFilter,
    buckets: &BucketSpec,
    min_count: usize,
) -> Result<ConditionalCurve> {
    let pairs = collect_pairs(sets, filter, |d| d.skewness.map(|z| (d.index_return, z)));
    Ok(conditional_statistic(&pairs, buckets, min_count)?.with_names("index_return", "skewness"))
}

/// `κ_d` against `μ_d` or `|μ_d|`.
pub fn kurtosis_vs_index(
    sets: &[DispersionSet],
    filter: DispersionFilter,
    axis: IndexAxis,
    buckets: &BucketSpec,
    min_count: usize,
) -> Result<ConditionalCurve> {
    let pairs = collect_pairs(sets, filter, |d| {
        let x = match axis {
            IndexAxis::Signed => d.index_return,
            IndexAxis::Absolute => d.index_return.abs(),
        };
        d.kurtosis.map(|k| (x, k))
    });
    let name = match axis {
        IndexAxis::Signed => "index_return",
        IndexAxis::Absolute => "abs_index_return",
    };
    Ok(conditional_statistic(&pairs, buckets, min_count)?.with_names(name, "kurtosis"))
}

/// `κ_d` against the dispersion, measured as `σ_d` or as the MAD.
pub fn kurtosis_vs_dispersion(
    sets: &[DispersionSet],
    filter: DispersionFilter,
    buckets: &BucketSpec,
    min_count: usize,
    kind: DispersionKind,
) -> Result<ConditionalCurve> {
    let pairs = collect_pairs(sets, filter, |d| {
        d.kurtosis.map(|k| (dispersion_of(d, kind), k))
    });
    let name = match kind {
        DispersionKind::Std => "dispersion",
        DispersionKind::Mad => "mad_dispersion",
    };
    Ok(conditional_statistic(&pairs, buckets, min_count)?.with_names(name, "kurtosis"))
}

fn dispersion_of(d: &DispersionSet, kind: DispersionKind) -> f64 {
    match kind {
        DispersionKind::Std => d.dispersion,
        DispersionKind::Mad => d.mad,
    }
}

/// Spearman rank correlation between the dispersion (of the given kind) and
/// `κ_d` over all accepted, non-degenerate bin-days.
pub fn dispersion_kurtosis_rank_correlation(
    sets: &[DispersionSet],
    filter: DispersionFilter,
    kind: DispersionKind,
) -> Result<f64> {
    let pairs = collect_pairs(sets, filter, |d| d.kurtosis.map(|k| (dispersion_of(d, kind), k)));
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    rank_correlation(&xs, &ys)
}

/// Spearman rank correlation with average ranks for ties.
pub fn rank_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Contract("rank correlation needs equal lengths".into()));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: xs.len(),
        });
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("constant input to rank correlation".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pairing_tolerance(centers: &[f64]) -> f64 {
    let spacing = centers
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min);
    let scale = centers.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if spacing.is_finite() {
        1e-6 * spacing
    } else {
        1e-9 * scale.max(1e-300)
    }
}

/// Odd and even parts `(f(x) ∓ f(−x)) / 2` on the nonnegative centers.
pub fn odd_even_decompose(curve: &ConditionalCurve) -> Result<(ConditionalCurve, ConditionalCurve)> {
    let tol = pairing_tolerance(&curve.bucket_centers);
    let mirror = |i: usize| {
        let c = curve.bucket_centers[i];
        (0..curve.len()).find(|&j| (curve.bucket_centers[j] + c).abs() <= tol)
    };
    let unpaired: Vec<f64> = (0..curve.len())
        .filter(|&i| mirror(i).is_none())
        .map(|i| curve.bucket_centers[i])
        .collect();
    if !unpaired.is_empty() {
        return Err(Error::Unpairable(unpaired));
    }
    let mut odd = curve.select(&[]);
    let mut even = curve.select(&[]);
    odd.statistic_name = format!("{}_odd", curve.statistic_name);
    even.statistic_name = format!("{}_even", curve.statistic_name);
    for i in 0..curve.len() {
        let c = curve.bucket_centers[i];
        if c < -tol {
            continue;
        }
        let j = mirror(i).expect("checked above");
        let (fp, fm) = (curve.means[i], curve.means[j]);
        let center = c.max(0.0);
        if i == j {
            // the zero bucket is its own mirror
            odd.bucket_centers.push(center);
            odd.means.push(0.0);
            odd.stderr.push(0.0);
            odd.counts.push(curve.counts[i]);
            even.bucket_centers.push(center);
            even.means.push(fp);
            even.stderr.push(curve.stderr[i]);
            even.counts.push(curve.counts[i]);
            continue;
        }
        let se = 0.5 * curve.stderr[i].hypot(curve.stderr[j]);
        let count = curve.counts[i] + curve.counts[j];
        odd.bucket_centers.push(center);
        odd.means.push(0.5 * (fp - fm));
        odd.stderr.push(se);
        odd.counts.push(count);
        even.bucket_centers.push(center);
        even.means.push(0.5 * (fp + fm));
        even.stderr.push(se);
        even.counts.push(count);
    }
    Ok((odd, even))
}

/// Observed minus linearly extrapolated value at one outer bucket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub center: f64,
    pub observed: f64,
    pub predicted: f64,
    pub deviation: f64,
    /// Observation and extrapolation errors combined in quadrature.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchReport {
    /// `+1` for `x > 0`, `−1` for `x < 0`.
    pub sign: i8,
    /// Line `y = intercept + slope·|x|` through the origin window.
    pub intercept: f64,
    pub slope: f64,
    pub deviations: Vec<Deviation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SublinearityReport {
    pub branches: Vec<BranchReport>,
    /// Every outer deviation is below zero by more than its stderr.
    pub sublinear: bool,
}

/// Fits a line to the `origin_window` buckets nearest zero on each side and
/// compares the outer buckets with its extrapolation. A bucket centred
/// exactly on zero belongs to neither branch.
pub fn sublinearity_diagnostic(
    curve: &ConditionalCurve,
    origin_window: usize,
) -> Result<SublinearityReport> {
    if origin_window < 2 {
        return Err(Error::Contract("origin window needs at least 2 buckets".into()));
    }
    let mut branches = Vec::new();
    for sign in [1i8, -1] {
        let mut idx: Vec<usize> = (0..curve.len())
            .filter(|&i| curve.bucket_centers[i] * f64::from(sign) > 0.0)
            .collect();
        idx.sort_by(|&a, &b| curve.bucket_centers[a].abs().total_cmp(&curve.bucket_centers[b].abs()));
        if idx.len() < origin_window + 2 {
            return Err(Error::Contract(format!(
                "branch {sign:+} has {} buckets, need at least {}",
                idx.len(),
                origin_window + 2
            )));
        }
        let (window, outer) = idx.split_at(origin_window);
        let xs: Vec<f64> = window.iter().map(|&i| curve.bucket_centers[i].abs()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        // prediction at x is Σ w_i(x) y_i with w_i(x) = 1/n + (x − x̄)(x_i − x̄)/Sxx
        let weights = |x: f64| -> Vec<f64> {
            xs.iter().map(|xi| 1.0 / n + (x - mx) * (xi - mx) / sxx).collect()
        };
        let predict = |x: f64| -> (f64, f64) {
            let w = weights(x);
            let value = w.iter().zip(window).map(|(w, &i)| w * curve.means[i]).sum();
            let var = w
                .iter()
                .zip(window)
                .map(|(w, &i)| (w * curve.stderr[i]).powi(2))
                .sum::<f64>();
            (value, var)
        };
        let (intercept, _) = predict(0.0);
        let slope = predict(1.0).0 - intercept;
        let deviations = outer
            .iter()
            .map(|&i| {
                let x = curve.bucket_centers[i].abs();
                let (predicted, var) = predict(x);
                let observed = curve.means[i];
                Deviation {
                    center: curve.bucket_centers[i],
                    observed,
                    predicted,
                    deviation: observed - predicted,
                    stderr: (var + curve.stderr[i].powi(2)).sqrt(),
                }
            })
            .collect();
        branches.push(BranchReport {
            sign,
            intercept,
            slope,
            deviations,
        });
    }
    let sublinear = branches
        .iter()
        .flat_map(|b| &b.deviations)
        .all(|d| d.deviation < -d.stderr);
    Ok(SublinearityReport {
        branches,
        sublinear,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve_of(points: &[(f64, f64)]) -> ConditionalCurve {
        ConditionalCurve {
            conditioning_name: "x".into(),
            statistic_name: "y".into(),
            bucket_centers: points.iter().map(|p| p.0).collect(),
            means: points.iter().map(|p| p.1).collect(),
            stderr: vec![0.0; points.len()],
            counts: vec![100; points.len()],
            omitted_buckets: 0,
            out_of_range: 0,
        }
    }

    fn symmetric_centers() -> Vec<f64> {
        (0..20).map(|i| -0.95 + 0.1 * i as f64).map(|c: f64| (c * 1e6).round() / 1e6).collect()
    }

    #[test]
    fn single_bucket_constant() {
        let pairs: Vec<(f64, f64)> = (0..60).map(|i| (0.1 + 0.001 * i as f64, 2.5)).collect();
        let spec = BucketSpec::FixedWidth { lo: 0.0, hi: 1.0, width: 1.0 };
        let c = conditional_statistic(&pairs, &spec, 50).unwrap();
        assert_eq!(c.bucket_centers, vec![0.5]);
        assert_eq!(c.means, vec![2.5]);
        assert_eq!(c.stderr, vec![0.0]);
        assert_eq!(c.counts, vec![60]);
    }

    #[test]
    fn identity_statistic_reproduces_bucket_means() {
        let pairs: Vec<(f64, f64)> = (0..200).map(|i| {
            let x = i as f64 / 200.0;
            (x, x)
        }).collect();
        let spec = BucketSpec::FixedWidth { lo: 0.0, hi: 1.0, width: 0.5 };
        let c = conditional_statistic(&pairs, &spec, 1).unwrap();
        let lower: f64 = (0..100).map(|i| i as f64 / 200.0).sum::<f64>() / 100.0;
        let upper: f64 = (100..200).map(|i| i as f64 / 200.0).sum::<f64>() / 100.0;
        assert!((c.means[0] - lower).abs() < 1e-12);
        assert!((c.means[1] - upper).abs() < 1e-12);
    }

    #[test]
    fn underpopulated_buckets_are_counted() {
        let pairs = vec![(0.1, 1.0), (0.2, 1.0), (0.9, 3.0), (5.0, 0.0)];
        let spec = BucketSpec::FixedWidth { lo: 0.0, hi: 1.0, width: 0.5 };
        let c = conditional_statistic(&pairs, &spec, 2).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.omitted_buckets, 1);
        assert_eq!(c.out_of_range, 1);
    }

    #[test]
    fn bucket_spec_errors() {
        let pairs = vec![(0.1, 1.0)];
        assert!(matches!(
            conditional_statistic(&[], &BucketSpec::default_signed(), 1),
            Err(Error::InsufficientData { .. })
        ));
        let bad = BucketSpec::FixedWidth { lo: 0.0, hi: 1.0, width: 0.0 };
        assert!(matches!(conditional_statistic(&pairs, &bad, 1), Err(Error::Contract(_))));
        let bad = BucketSpec::Edges(vec![0.0, 0.0, 1.0]);
        assert!(matches!(conditional_statistic(&pairs, &bad, 1), Err(Error::Contract(_))));
    }

    #[test]
    fn edges_bucket_assignment() {
        let edges = [0.0, 1.0, 2.0];
        assert_eq!(bucket_of(&edges, 0.0), Some(0));
        assert_eq!(bucket_of(&edges, 1.0), Some(1));
        assert_eq!(bucket_of(&edges, 2.0), Some(1));
        assert_eq!(bucket_of(&edges, 2.5), None);
        assert_eq!(bucket_of(&edges, f64::NAN), None);
    }

    #[test]
    fn odd_even_of_simple_functions() {
        let xs = symmetric_centers();
        let line = curve_of(&xs.iter().map(|&x| (x, x)).collect::<Vec<_>>());
        let (odd, even) = odd_even_decompose(&line).unwrap();
        assert!(even.means.iter().all(|v| v.abs() < 1e-12));
        assert!(odd.bucket_centers.iter().zip(&odd.means).all(|(c, v)| (c - v).abs() < 1e-12));

        let abs = curve_of(&xs.iter().map(|&x| (x, x.abs())).collect::<Vec<_>>());
        let (odd, _) = odd_even_decompose(&abs).unwrap();
        assert!(odd.means.iter().all(|v| v.abs() < 1e-12));

        let poly = curve_of(&xs.iter().map(|&x| (x, x + x * x)).collect::<Vec<_>>());
        let (odd, even) = odd_even_decompose(&poly).unwrap();
        for i in 0..odd.len() {
            let c = odd.bucket_centers[i];
            assert!((odd.means[i] - c).abs() < 1e-12);
            assert!((even.means[i] - c * c).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_bucket_is_its_own_mirror() {
        let c = curve_of(&[(-1.0, 3.0), (0.0, 5.0), (1.0, 1.0)]);
        let (odd, even) = odd_even_decompose(&c).unwrap();
        assert_eq!(odd.bucket_centers, vec![0.0, 1.0]);
        assert_eq!(odd.means, vec![0.0, -1.0]);
        assert_eq!(even.means, vec![5.0, 2.0]);
    }

    #[test]
    fn unpairable_buckets_are_listed() {
        let c = curve_of(&[(-1.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        match odd_even_decompose(&c) {
            Err(Error::Unpairable(cs)) => assert_eq!(cs, vec![2.0]),
            other => panic!("expected unpairable error, got {other:?}"),
        }
        let trimmed = c.symmetric_subset();
        assert_eq!(trimmed.bucket_centers, vec![-1.0, 1.0]);
    }

    #[test]
    fn linear_curve_has_no_deviation() {
        let xs = symmetric_centers();
        let c = curve_of(&xs.iter().map(|&x| (x, 0.2 + 3.0 * x.abs())).collect::<Vec<_>>());
        let report = sublinearity_diagnostic(&c, 2).unwrap();
        for b in &report.branches {
            assert!((b.slope - 3.0).abs() < 1e-9);
            assert!((b.intercept - 0.2).abs() < 1e-9);
            assert!(b.deviations.iter().all(|d| d.deviation.abs() < 1e-12));
        }
        assert!(!report.sublinear);
    }

    #[test]
    fn concave_curve_is_sublinear() {
        let xs = symmetric_centers();
        let c = curve_of(&xs.iter().map(|&x| (x, x.abs().sqrt())).collect::<Vec<_>>());
        let report = sublinearity_diagnostic(&c, 2).unwrap();
        assert!(report.branches.iter().flat_map(|b| &b.deviations).all(|d| d.deviation < 0.0));
        assert!(report.sublinear);
    }

    #[test]
    fn sublinearity_needs_enough_buckets() {
        let c = curve_of(&[(-0.2, 1.0), (-0.1, 1.0), (0.1, 1.0), (0.2, 1.0)]);
        assert!(matches!(sublinearity_diagnostic(&c, 2), Err(Error::Contract(_))));
    }

    #[test]
    fn rank_correlation_basics() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((rank_correlation(&xs, &[10.0, 20.0, 25.0, 100.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((rank_correlation(&xs, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }
}
