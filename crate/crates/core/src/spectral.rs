//! Per-bin correlation spectra, the market mode, and eigen-subspace overlaps.
//!
//! The correlation matrix of bin `k` is built from dispersion-normalized
//! returns with per-stock means over days removed (the connected part), and
//! normalized to unit diagonal. Eigenvectors are sign-fixed so that the sum
//! of their entries is nonnegative, which orients the market mode along
//! `e = (1/√N, …, 1/√N)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cross_section::NormalizedPanel;
use crate::error::{Error, Result};

const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
    bin: usize,
    sample_count: usize,
}

impl CorrelationMatrix {
    /// Wraps an explicit matrix, checking it is square with unit diagonal.
    pub fn from_matrix(entries: DMatrix<f64>, bin: usize, sample_count: usize) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() < 1 {
            return Err(Error::Contract(format!(
                "correlation matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..entries.nrows() {
            if (entries[(i, i)] - 1.0).abs() > 1e-10 {
                return Err(Error::Contract(format!(
                    "diagonal entry {i} is {}, expected 1",
                    entries[(i, i)]
                )));
            }
        }
        Ok(Self {
            entries,
            bin,
            sample_count,
        })
    }

    /// Unit diagonal with `ρ` everywhere else: the exchangeable matrix.
    pub fn uniform(n: usize, rho: f64) -> Self {
        let entries = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
        Self {
            entries,
            bin: 0,
            sample_count: 0,
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn bin(&self) -> usize {
        self.bin
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// More stocks than days: the matrix is singular.
    pub fn is_rank_deficient(&self) -> bool {
        self.sample_count < self.dim()
    }
}

/// `C_{αβ}(k) = ⟨η̂_α η̂_β⟩_c / (σ̂_α σ̂_β)` over the days of the panel.
pub fn correlation_matrix(npanel: &NormalizedPanel, bin: usize) -> Result<CorrelationMatrix> {
    let panel = npanel.values();
    if !panel.has_bin(bin) {
        return Err(Error::Contract(format!("bin {bin} not in panel")));
    }
    let (n, t) = (panel.n_stocks(), panel.n_days());
    let mut z = DMatrix::<f64>::zeros(t, n);
    for day in 0..t {
        for (stock, &v) in panel.cross_section(bin, day).iter().enumerate() {
            z[(day, stock)] = v;
        }
    }
    for (stock, mut col) in z.column_iter_mut().enumerate() {
        let mean = col.sum() / t as f64;
        col.add_scalar_mut(-mean);
        let std = (col.norm_squared() / t as f64).sqrt();
        if std == 0.0 || !std.is_finite() {
            return Err(Error::Degenerate(format!(
                "stock {stock} has zero variance in bin {bin}"
            )));
        }
        col /= std;
    }
    let mut c = z.tr_mul(&z) / t as f64;
    for i in 0..n {
        c[(i, i)] = 1.0;
        for j in 0..i {
            let v = (0.5 * (c[(i, j)] + c[(j, i)])).clamp(-1.0, 1.0);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(CorrelationMatrix {
        entries: c,
        bin,
        sample_count: t,
    })
}

/// Eigenpairs of one bin's correlation matrix, eigenvalues descending.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSpectrum {
    pub bin: usize,
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl BinSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvector by 1-based rank (1 is the market mode).
    pub fn vector(&self, rank: usize) -> DVector<f64> {
        self.eigenvectors.column(rank - 1).into_owned()
    }
}

/// Flips `v` so its entries sum to a nonnegative value; an exactly zero sum
/// is resolved by making the first nonzero entry positive.
fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let sum = v.sum();
    let flip = if sum.abs() > 1e-12 * v.amax().max(f64::MIN_POSITIVE) {
        sum < 0.0
    } else {
        v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.neg_mut();
    }
    v
}

pub fn eigen_decompose(c: &CorrelationMatrix) -> Result<BinSpectrum> {
    let m = &c.entries;
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::Contract(format!(
                    "matrix not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &fix_sign(eig.eigenvectors.column(src).into_owned()));
    }
    Ok(BinSpectrum {
        bin: c.bin,
        eigenvalues,
        eigenvectors,
    })
}

/// Correlation matrices and spectra for every bin of the panel, in
/// [`crate::panel::ReturnPanel::bins`] order.
pub fn bin_spectra(npanel: &NormalizedPanel) -> Result<Vec<BinSpectrum>> {
    let bins: Vec<usize> = npanel.values().bins().collect();
    bins.par_iter()
        .map(|&bin| eigen_decompose(&correlation_matrix(npanel, bin)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketMode {
    pub lambda1_over_n: f64,
    pub v1_dot_e: f64,
}

pub fn market_mode_stats(spectrum: &BinSpectrum) -> MarketMode {
    let n = spectrum.dim() as f64;
    let v1 = spectrum.eigenvectors.column(0);
    MarketMode {
        lambda1_over_n: spectrum.eigenvalues[0] / n,
        v1_dot_e: v1.sum() / n.sqrt(),
    }
}

/// Singular values of `W_ij(k) = v_i(ref) · v_j(k)` over a set of ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapResult {
    pub bin: usize,
    pub reference_bin: usize,
    pub ranks: std::ops::RangeInclusive<usize>,
    pub overlap: DMatrix<f64>,
    /// Descending.
    pub singular_values: Vec<f64>,
}

fn singular_values_desc(m: DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Overlap of each bin's eigenvectors (ranks in `ranks`, 1-based) with those
/// of `reference_bin`.
pub fn overlap_singular_values(
    spectra: &[BinSpectrum],
    reference_bin: usize,
    ranks: std::ops::RangeInclusive<usize>,
) -> Result<Vec<OverlapResult>> {
    let reference = spectra
        .iter()
        .find(|s| s.bin == reference_bin)
        .ok_or_else(|| Error::Contract(format!("reference bin {reference_bin} has no spectrum")))?;
    let n = reference.dim();
    if *ranks.start() < 1 || *ranks.end() > n || ranks.is_empty() {
        return Err(Error::Contract(format!(
            "eigenvector ranks {}..={} outside 1..={n}",
            ranks.start(),
            ranks.end()
        )));
    }
    if let Some(bad) = spectra.iter().find(|s| s.dim() != n) {
        return Err(Error::Contract(format!(
            "bin {} has dimension {}, reference has {n}",
            bad.bin,
            bad.dim()
        )));
    }
    let (lo, d) = (*ranks.start() - 1, ranks.end() + 1 - ranks.start());
    let ref_frame = reference.eigenvectors.columns(lo, d);
    Ok(spectra
        .iter()
        .map(|s| {
            let overlap = ref_frame.tr_mul(&s.eigenvectors.columns(lo, d));
            OverlapResult {
                bin: s.bin,
                reference_bin,
                ranks: ranks.clone(),
                singular_values: singular_values_desc(overlap.clone()),
                overlap,
            }
        })
        .collect())
}

/// Largest overlap singular value between two independent random
/// `d`-frames in `N` dimensions, as an upper `quantile` over `trials`.
///
/// Trial `i` draws from its own ChaCha stream, so the result does not depend
/// on how trials are scheduled.
pub fn random_overlap_baseline(
    n: usize,
    d: usize,
    trials: usize,
    quantile: f64,
    seed: u64,
) -> Result<f64> {
    if d == 0 || d >= n {
        return Err(Error::Contract(format!(
            "subspace size {d} must be in 1..{n}"
        )));
    }
    if trials < 1000 {
        return Err(Error::Contract(format!(
            "null baseline needs at least 1000 trials, got {trials}"
        )));
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::Contract(format!("quantile {quantile} outside [0, 1]")));
    }
    let mut maxima: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let mut frame = || {
                let g = DMatrix::<f64>::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
                g.qr().q()
            };
            let (a, b) = (frame(), frame());
            singular_values_desc(a.tr_mul(&b))[0]
        })
        .collect();
    maxima.sort_by(f64::total_cmp);
    Ok(upper_quantile(&maxima, quantile))
}

/// Nearest-rank quantile of sorted data.
fn upper_quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> CorrelationMatrix {
        CorrelationMatrix::from_matrix(DMatrix::from_fn(n, n, f), 1, 100).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let s = eigen_decompose(&matrix(5, |i, j| f64::from(i == j))).unwrap();
        assert!(s.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-12));
        let gram = s.eigenvectors.tr_mul(&s.eigenvectors);
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-12);
        assert!((market_mode_stats(&s).lambda1_over_n - 0.2).abs() < 1e-12);
    }

    #[test]
    fn two_by_two() {
        let c = 0.4;
        let s = eigen_decompose(&matrix(2, |i, j| if i == j { 1.0 } else { c })).unwrap();
        assert!((s.eigenvalues[0] - 1.4).abs() < 1e-12);
        assert!((s.eigenvalues[1] - 0.6).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.vector(1) - DVector::from_vec(vec![h, h])).amax() < 1e-12);
    }

    #[test]
    fn uniform_correlation_closed_form() {
        let s = eigen_decompose(&CorrelationMatrix::uniform(126, 0.3)).unwrap();
        assert!((s.eigenvalues[0] - 38.5).abs() / 38.5 < 1e-8);
        assert!(s.eigenvalues[1..].iter().all(|l| (l - 0.7).abs() < 1e-8));
        let mm = market_mode_stats(&s);
        assert!((mm.v1_dot_e - 1.0).abs() < 1e-10);
        assert!((mm.lambda1_over_n - 38.5 / 126.0).abs() < 1e-10);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        let c = CorrelationMatrix::from_matrix(m, 1, 10).unwrap();
        assert!(matches!(eigen_decompose(&c), Err(Error::Contract(_))));
    }

    #[test]
    fn sign_convention() {
        let v = fix_sign(DVector::from_vec(vec![-0.6, -0.8]));
        assert!(v.sum() > 0.0);
        let v = fix_sign(DVector::from_vec(vec![0.0, -1.0, 1.0]));
        assert_eq!(v.as_slice(), &[0.0, 1.0, -1.0]);
    }

    fn spectrum_from(bin: usize, q: DMatrix<f64>) -> BinSpectrum {
        let n = q.nrows();
        BinSpectrum {
            bin,
            eigenvalues: (0..n).rev().map(|i| i as f64).collect(),
            eigenvectors: q,
        }
    }

    #[test]
    fn overlap_self_permutation_and_complement() {
        let n = 8;
        let g = DMatrix::<f64>::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 + 0.5 * f64::from(u8::from(i == j)));
        let q = g.qr().q();
        // ranks 2..=4 of `perm` are ranks 4, 2, 3 of `q` with a sign flip
        let mut perm = q.clone();
        perm.set_column(1, &(-q.column(3)));
        perm.set_column(2, &q.column(1));
        perm.set_column(3, &q.column(2));
        perm.set_column(4, &q.column(4));
        // ranks 2..=4 of `comp` are ranks 5..=7 of `q`
        let mut comp = q.clone();
        for (dst, src) in [(1, 4), (2, 5), (3, 6)] {
            comp.set_column(dst, &q.column(src));
        }
        let spectra = vec![spectrum_from(1, q), spectrum_from(2, perm), spectrum_from(3, comp)];
        let res = overlap_singular_values(&spectra, 1, 2..=4).unwrap();
        for s in &res[0].singular_values {
            assert!((s - 1.0).abs() < 1e-10);
        }
        for s in &res[1].singular_values {
            assert!((s - 1.0).abs() < 1e-10);
        }
        for s in &res[2].singular_values {
            assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn overlap_contract_errors() {
        let a = spectrum_from(1, DMatrix::identity(4, 4));
        let b = spectrum_from(2, DMatrix::identity(3, 3));
        assert!(matches!(
            overlap_singular_values(&[a.clone(), b], 1, 2..=3),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            overlap_singular_values(&[a], 1, 2..=5),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn baseline_contract() {
        assert!(matches!(
            random_overlap_baseline(6, 6, 1000, 0.99, 1),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            random_overlap_baseline(6, 2, 10, 0.99, 1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn baseline_is_deterministic() {
        let a = random_overlap_baseline(20, 2, 1000, 0.9, 7).unwrap();
        let b = random_overlap_baseline(20, 2, 1000, 0.9, 7).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0 && a <= 1.0 + 1e-12);
    }

    #[test]
    fn nearest_rank_quantile() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(upper_quantile(&xs, 0.99), 99.0);
        assert_eq!(upper_quantile(&xs, 1.0), 100.0);
        assert_eq!(upper_quantile(&xs, 0.0), 1.0);
    }
}
