use chrono::NaiveDate;
use nalgebra::DMatrix;
use proptest::prelude::*;

use seasonality_core::conditioning::{conditional_statistic, odd_even_decompose, BucketSpec};
use seasonality_core::cross_section::DispersionSet;
use seasonality_core::moments::MomentSet;
use seasonality_core::panel::{load_panel, BarRecord, LoadPolicy};
use seasonality_core::spectral::{eigen_decompose, CorrelationMatrix};
use seasonality_core::table::{fmt_exact, fmt_g10, parse_f64};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0e3..1.0e3f64, 3..60)
}

/// Random correlation matrix from a random data matrix.
fn correlation(n: usize, t: usize, data: &[f64]) -> CorrelationMatrix {
    let x = DMatrix::from_column_slice(t, n, &data[..t * n]);
    let mut c = x.tr_mul(&x);
    for j in 0..n {
        let mean = x.column(j).mean();
        for i in 0..n {
            let mi = x.column(i).mean();
            c[(i, j)] -= t as f64 * mi * mean;
        }
    }
    let d: Vec<f64> = (0..n).map(|i| c[(i, i)].sqrt()).collect();
    let mut corr = DMatrix::from_fn(n, n, |i, j| c[(i, j)] / (d[i] * d[j]));
    for i in 0..n {
        corr[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (corr[(i, j)] + corr[(j, i)]);
            corr[(i, j)] = v;
            corr[(j, i)] = v;
        }
    }
    CorrelationMatrix::from_matrix(corr, 1, t).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn moment_set_affine_equivariance(xs in sample(), a in prop::sample::select(vec![-3.5, -0.25, 0.5, 2.0, 7.0]), b in -10.0..10.0f64) {
        prop_assume!(xs.iter().any(|x| *x != xs[0]));
        let base = MomentSet::from_samples(&xs, false).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let moved = MomentSet::from_samples(&ys, false).unwrap();
        prop_assert!(close(moved.mean, a * base.mean + b, 1e-9));
        prop_assert!(close(moved.median, a * base.median + b, 1e-9));
        prop_assert!(close(moved.volatility, a.abs() * base.volatility, 1e-9));
        let sign = a.signum();
        prop_assert!(close(moved.skewness.unwrap(), sign * base.skewness.unwrap(), 1e-7));
        prop_assert!(close(moved.kurtosis.unwrap(), base.kurtosis.unwrap(), 1e-7));
    }

    #[test]
    fn mad_never_exceeds_dispersion(xs in prop::collection::vec(-0.2..0.2f64, 2..200)) {
        let d = DispersionSet::from_cross_section(1, 0, &xs).unwrap();
        prop_assert!(d.mad <= d.dispersion * (1.0 + 1e-12));
        if let Some(k) = d.kurtosis {
            prop_assert!(k <= 24.0 + 1e-9);
        }
    }

    #[test]
    fn load_is_order_independent(
        n in 2usize..6,
        t in 2usize..5,
        k in 1usize..4,
        overnight in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let first = usize::from(!overnight);
        let mut records = Vec::new();
        for day in 0..t {
            for bin in first..=k {
                for s in 0..n {
                    records.push(BarRecord {
                        date: NaiveDate::from_ymd_opt(2022, 5, 2 + day as u32).unwrap(),
                        bin,
                        symbol: format!("X{s}"),
                        value: ((s * 31 + day * 7 + bin) as f64).sin() * 1e-3,
                    });
                }
            }
        }
        let (base, _) = load_panel(&records, LoadPolicy::Strict).unwrap();
        let mut shuffled = records.clone();
        let len = shuffled.len();
        let mut state = seed | 1;
        for i in (1..len).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let (again, _) = load_panel(&shuffled, LoadPolicy::Strict).unwrap();
        prop_assert_eq!(base, again);
    }

    #[test]
    fn conditioning_is_order_independent(
        pairs in prop::collection::vec((-0.03..0.03f64, -5.0..5.0f64), 1..300),
        rotate in 0usize..300,
    ) {
        let spec = BucketSpec::FixedWidth { lo: -0.03, hi: 0.03, width: 0.005 };
        let base = conditional_statistic(&pairs, &spec, 3).unwrap();
        let mut moved = pairs.clone();
        moved.reverse();
        let r = rotate % moved.len();
        moved.rotate_left(r);
        prop_assert_eq!(base, conditional_statistic(&moved, &spec, 3).unwrap());
    }

    #[test]
    fn odd_plus_even_reconstructs(values in prop::collection::vec(-10.0..10.0f64, 12)) {
        let pairs: Vec<(f64, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, v)| (-0.03 + 0.005 * i as f64 + 0.0025, *v))
            .collect();
        let spec = BucketSpec::FixedWidth { lo: -0.03, hi: 0.03, width: 0.005 };
        let curve = conditional_statistic(&pairs, &spec, 1).unwrap();
        let (odd, even) = odd_even_decompose(&curve).unwrap();
        for i in 0..odd.bucket_centers.len() {
            let x = odd.bucket_centers[i];
            let j = curve.bucket_centers.iter().position(|c| (c - x).abs() < 1e-9).unwrap();
            prop_assert!(close(odd.means[i] + even.means[i], curve.means[j], 1e-12));
        }
    }

    #[test]
    fn spectrum_trace_and_reconstruction(
        n in 2usize..=20,
        extra in 1usize..30,
        data in prop::collection::vec(-1.0..1.0f64, 50 * 20),
    ) {
        let t = (n + extra).min(50);
        let c = correlation(n, t, &data);
        let s = eigen_decompose(&c).unwrap();
        let trace: f64 = s.eigenvalues.iter().sum();
        prop_assert!(close(trace, n as f64, 1e-10));
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let v = &s.eigenvectors;
        let rebuilt = v * DMatrix::from_diagonal(&s.eigenvalues.clone().into()) * v.transpose();
        prop_assert!((rebuilt - c.entries()).amax() < 1e-10);
        let gram = v.tr_mul(v) - DMatrix::identity(n, n);
        prop_assert!(gram.amax() < 1e-10);
    }

    #[test]
    fn number_formats(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(parse_f64(&fmt_exact(x)).unwrap(), x);
        let g = parse_f64(&fmt_g10(x)).unwrap();
        prop_assert!((g - x).abs() <= 5e-10 * x.abs());
    }
}
