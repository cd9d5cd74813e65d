//! Pipeline stages. Each stage maps documented text tables to documented
//! text tables, so staged runs and the full pipeline agree byte for byte.

use std::collections::HashMap;
use std::path::PathBuf;

use chrono::NaiveDate;

use seasonality_core::conditioning::{
    dispersion_kurtosis_rank_correlation, dispersion_vs_index, kurtosis_vs_dispersion,
    kurtosis_vs_index, odd_even_decompose, skew_vs_index, sublinearity_diagnostic, BucketSpec,
    ConditionalCurve, DispersionFilter, DispersionKind, IndexAxis,
};
use seasonality_core::cross_section::{dispersion_grid, normalize_panel, DispersionSet};
use seasonality_core::moments::{stock_bin_moments, MomentSet, StockBinMoments};
use seasonality_core::panel::{
    load_panel, read_bar_records, read_price_records, returns_from_prices, validate_panel,
    BarRecord, LoadPolicy, ReturnPanel, StampConvention,
};
use seasonality_core::seasonality::{
    fit_power_law, index_abs_return_profile, profile_over_days, profile_over_stocks,
    ratio_profile, BandKind, BinSeries, FitWindow, IntradayProfile, OvernightPoint,
};
use seasonality_core::spectral::{
    bin_spectra, market_mode_stats, overlap_singular_values, random_overlap_baseline,
};
use seasonality_core::synth::{generate_market, GeneratorManifest};
use seasonality_core::table::{
    check_returns_schema, fmt_exact, fmt_g10, parse_f64, returns_table, Table,
};

use crate::config::{ConditionConfig, InputKind, SpectraConfig};
use crate::error::{CliError, CliResult};

/// A named output file and its contents.
pub type Output = (String, String);

pub const PANEL_FILE: &str = "panel.csv";
pub const SYNTH_MANIFEST_FILE: &str = "synth_manifest.toml";
pub const MOMENTS_FILE: &str = "moments.csv";
pub const DISPERSION_FILE: &str = "dispersion.csv";
pub const FIG1_FILE: &str = "fig1.csv";
pub const FIT_FILE: &str = "fig1_fit.csv";

/// Seed of the random-overlap baseline, derived from the run seed so the
/// null draws do not reuse the generator's streams.
pub fn null_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

fn read_file(path: &PathBuf) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Reads return or price files into a panel table. Warnings describe every
/// mutation the load policy applied and every out-of-bound cell.
pub fn ingest(
    paths: &[PathBuf],
    kind: InputKind,
    policy: LoadPolicy,
    convention: StampConvention,
    sanity_bound: f64,
) -> CliResult<(String, Vec<String>)> {
    let mut records: Vec<BarRecord> = Vec::new();
    match kind {
        InputKind::Returns => {
            for p in paths {
                let text = read_file(p)?;
                check_returns_schema(&text)?;
                records.extend(read_bar_records(text.as_bytes()).map_err(|e| CliError::from(e).context(p.display()))?);
            }
        }
        InputKind::Prices => {
            let mut prices = Vec::new();
            for p in paths {
                let text = read_file(p)?;
                prices.extend(read_price_records(text.as_bytes()).map_err(|e| CliError::from(e).context(p.display()))?);
            }
            records = returns_from_prices(&prices, convention)?;
        }
        InputKind::Synthetic => {
            return Err(CliError::input("ingest reads returns or prices; use synth for synthetic input"))
        }
    }
    let (panel, report) = load_panel(&records, policy)?;
    let mut warnings = report.warnings.clone();
    warnings.extend(report.stocks_dropped.iter().map(|s| format!("dropped stock {}: {}", s.symbol, s.reason)));
    warnings.extend(report.days_dropped.iter().map(|d| format!("dropped day {}: {}", d.date, d.reason)));
    let validation = validate_panel(&panel, sanity_bound);
    warnings.extend(validation.violations.iter().cloned());
    if !validation.warnings.is_empty() {
        let w = &validation.warnings[0];
        warnings.push(format!(
            "{} cells exceed the sanity bound {sanity_bound}, first: stock {} day {} bin {} value {}",
            validation.warnings.len(),
            panel.stock_ids()[w.stock],
            panel.dates()[w.day],
            w.bin,
            w.value
        ));
    }
    Ok((returns_table(&panel), warnings))
}

/// Generates a synthetic panel. `seed` overrides the manifest's seed.
pub fn synth(manifest: &GeneratorManifest, seed: Option<u64>) -> CliResult<Vec<Output>> {
    let mut manifest = manifest.clone();
    if let Some(seed) = seed {
        manifest.seed = seed;
    }
    let (panel, echoed) = generate_market(&manifest)?;
    Ok(vec![
        (PANEL_FILE.into(), returns_table(&panel)),
        (SYNTH_MANIFEST_FILE.into(), echoed.to_toml_string()),
    ])
}

/// Parses a panel table written by `ingest` or `synth`.
pub fn read_panel(text: &str) -> CliResult<ReturnPanel> {
    check_returns_schema(text)?;
    let records = read_bar_records(text.as_bytes())?;
    Ok(load_panel(&records, LoadPolicy::Strict)?.0)
}

const MOMENT_COLUMNS: [&str; 8] =
    ["symbol", "bin", "mean", "volatility", "skewness", "kurtosis", "median", "count"];

pub fn moments(panel: &ReturnPanel) -> CliResult<String> {
    let table = stock_bin_moments(panel)?;
    let mut t = Table::new("moments", &MOMENT_COLUMNS);
    let opt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), fmt_exact);
    for (stock, id) in table.stock_ids().iter().enumerate() {
        for bin in table.bins() {
            let m = table.get(stock, bin);
            t.push(vec![
                id.clone(),
                bin.to_string(),
                fmt_exact(m.mean),
                fmt_exact(m.volatility),
                opt(m.skewness),
                opt(m.kurtosis),
                fmt_exact(m.median),
                m.sample_count.to_string(),
            ]);
        }
    }
    Ok(t.to_text())
}

fn schema_err(kind: &str, message: impl std::fmt::Display) -> CliError {
    CliError::from(seasonality_core::Error::Schema(format!("{kind}: {message}")))
}

fn parse_usize(kind: &str, s: &str) -> CliResult<usize> {
    s.parse().map_err(|_| schema_err(kind, format!("expected an integer, found {s:?}")))
}

fn non_nan(x: f64) -> Option<f64> {
    (!x.is_nan()).then_some(x)
}

pub fn read_moments(text: &str) -> CliResult<StockBinMoments> {
    let t = Table::parse(text, "moments")?;
    let cols: Vec<usize> = MOMENT_COLUMNS.iter().map(|c| t.column(c)).collect::<Result<_, _>>()?;
    let mut ids: Vec<String> = Vec::new();
    let mut bins: Vec<usize> = Vec::new();
    let mut cells = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let id = &row[cols[0]];
        if ids.last() != Some(id) {
            ids.push(id.clone());
        }
        let bin = parse_usize("moments", &row[cols[1]])?;
        if ids.len() == 1 {
            bins.push(bin);
        }
        cells.push(MomentSet {
            mean: parse_f64(&row[cols[2]])?,
            volatility: parse_f64(&row[cols[3]])?,
            skewness: non_nan(parse_f64(&row[cols[4]])?),
            kurtosis: non_nan(parse_f64(&row[cols[5]])?),
            median: parse_f64(&row[cols[6]])?,
            sample_count: parse_usize("moments", &row[cols[7]])?,
        });
    }
    let overnight = bins.first() == Some(&0);
    let k = bins.last().copied().unwrap_or(0);
    let expected: Vec<usize> = (usize::from(!overnight)..=k).collect();
    let layout_ok = t.rows.iter().enumerate().all(|(i, row)| {
        expected.get(i % expected.len().max(1)).map(|b| b.to_string()) == Some(row[cols[1]].clone())
    });
    if bins != expected || k == 0 || !layout_ok || cells.len() != ids.len() * expected.len() {
        return Err(schema_err("moments", "bins must run 0 or 1 through K for every symbol"));
    }
    Ok(StockBinMoments::from_cells(ids, k, overnight, cells)?)
}

const DISPERSION_COLUMNS: [&str; 10] = [
    "day", "date", "bin", "index_return", "dispersion", "skewness", "kurtosis", "median", "mad",
    "stocks",
];

pub struct CrossSectionOutputs {
    pub dispersion: String,
    pub fig1: String,
    pub fig2: String,
}

/// Dispersion grid, the volatility/dispersion profiles (fig1) and the
/// kurtosis profiles (fig2).
pub fn cross_section(panel: &ReturnPanel, moments: &StockBinMoments) -> CliResult<CrossSectionOutputs> {
    if moments.stock_ids() != panel.stock_ids()
        || moments.bins_per_day() != panel.bins_per_day()
        || moments.overnight_present() != panel.overnight_present()
    {
        return Err(schema_err("moments", "table does not match the panel's stocks and bins"));
    }
    let grid = dispersion_grid(panel)?;
    let mut t = Table::new("dispersion", &DISPERSION_COLUMNS);
    let opt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), fmt_exact);
    for d in &grid {
        t.push(vec![
            d.day.to_string(),
            panel.dates()[d.day].format("%Y-%m-%d").to_string(),
            d.bin.to_string(),
            fmt_exact(d.index_return),
            fmt_exact(d.dispersion),
            opt(d.skewness),
            opt(d.kurtosis),
            fmt_exact(d.median),
            fmt_exact(d.mad),
            panel.n_stocks().to_string(),
        ]);
    }

    let (k, overnight, days) = (panel.bins_per_day(), panel.overnight_present(), panel.n_days());
    let slots = k + usize::from(overnight);
    let at = |bin: usize, day: usize| &grid[day * slots + bin - usize::from(!overnight)];

    let stock_series = |name: &str, f: &dyn Fn(&MomentSet) -> Option<f64>| {
        BinSeries::from_fn(name, k, overnight, moments.n_stocks(), |bin, stock| {
            f(moments.get(stock, bin))
        })
    };
    let day_series = |name: &str, f: &dyn Fn(&DispersionSet) -> Option<f64>| {
        BinSeries::from_fn(name, k, overnight, days, |bin, day| f(at(bin, day)))
    };

    let vol = profile_over_stocks(&stock_series("volatility", &|m| Some(m.volatility)), BandKind::StdErr)?;
    let disp = profile_over_days(&day_series("dispersion", &|d| Some(d.dispersion)), BandKind::StdErr)?;
    let abs_index = index_abs_return_profile(panel)?;
    let ratio = ratio_profile(&vol, &disp)?;
    let fig1 = profile_table(
        "fig1",
        &[("volatility", &vol), ("dispersion", &disp), ("abs_index_return", &abs_index), ("ratio", &ratio)],
    );

    let kurt = profile_over_stocks(&stock_series("kurtosis", &|m| m.kurtosis), BandKind::Dispersion)?;
    let kurt_d = profile_over_days(&day_series("dispersion_kurtosis", &|d| d.kurtosis), BandKind::Dispersion)?;
    let fig2 = profile_table("fig2", &[("kurtosis", &kurt), ("dispersion_kurtosis", &kurt_d)]);

    Ok(CrossSectionOutputs {
        dispersion: t.to_text(),
        fig1,
        fig2,
    })
}

/// One row per bin, overnight first; each profile contributes a value and a
/// band column.
fn profile_table(kind: &str, profiles: &[(&str, &IntradayProfile)]) -> String {
    let band_names: Vec<String> = profiles
        .iter()
        .map(|(name, p)| match p.band_kind {
            BandKind::StdErr => format!("{name}_stderr"),
            BandKind::Dispersion => format!("{name}_std"),
        })
        .collect();
    let mut columns = vec!["bin"];
    for ((name, _), band) in profiles.iter().zip(&band_names) {
        columns.push(name);
        columns.push(band);
    }
    let mut t = Table::new(kind, &columns);
    let has_overnight = profiles.iter().all(|(_, p)| p.overnight.is_some());
    if has_overnight {
        let mut row = vec!["0".to_string()];
        for (_, p) in profiles {
            let OvernightPoint { value, band } = p.overnight.expect("checked");
            row.push(fmt_g10(value));
            row.push(fmt_g10(band));
        }
        t.push(row);
    }
    for bin in 1..=profiles[0].1.bins_per_day() {
        let mut row = vec![bin.to_string()];
        for (_, p) in profiles {
            row.push(fmt_g10(p.value(bin)));
            row.push(fmt_g10(p.band[bin - 1]));
        }
        t.push(row);
    }
    t.to_text()
}

/// Power-law fit of one fig1 column over a fit window, as a one-row table.
pub fn fit(fig1: &str, window: FitWindow, column: &str) -> CliResult<String> {
    let t = Table::parse(fig1, "fig1")?;
    let bins: Vec<usize> = {
        let c = t.column("bin")?;
        t.rows.iter().map(|r| parse_usize("fig1", &r[c])).collect::<Result<_, _>>()?
    };
    let values = t.f64_column(column)?;
    let intraday: Vec<f64> = bins.iter().zip(&values).filter(|(b, _)| **b > 0).map(|(_, v)| *v).collect();
    if intraday.is_empty() {
        return Err(schema_err("fig1", "no intraday rows"));
    }
    let profile = IntradayProfile {
        statistic: column.to_string(),
        band: vec![0.0; intraday.len()],
        values: intraday,
        band_kind: BandKind::StdErr,
        overnight: None,
    };
    let range = window.resolve(profile.bins_per_day());
    let f = fit_power_law(&profile, range)?;
    let mut out = Table::new(
        "fig1_fit",
        &["statistic", "first_bin", "last_bin", "amplitude", "exponent", "exponent_stderr", "residual_rms"],
    );
    out.push(vec![
        column.to_string(),
        f.fit_range.first.to_string(),
        f.fit_range.last.to_string(),
        fmt_g10(f.amplitude),
        fmt_g10(f.exponent),
        fmt_g10(f.stderr_beta),
        fmt_g10(f.residual_rms),
    ]);
    Ok(out.to_text())
}

pub fn read_dispersion(text: &str) -> CliResult<Vec<DispersionSet>> {
    let t = Table::parse(text, "dispersion")?;
    let c: HashMap<&str, usize> = DISPERSION_COLUMNS
        .iter()
        .map(|name| t.column(name).map(|i| (*name, i)))
        .collect::<Result<_, _>>()?;
    t.rows
        .iter()
        .map(|r| {
            let f = |name: &str| parse_f64(&r[c[name]]);
            NaiveDate::parse_from_str(&r[c["date"]], "%Y-%m-%d")
                .map_err(|_| schema_err("dispersion", format!("bad date {:?}", r[c["date"]])))?;
            Ok(DispersionSet {
                bin: parse_usize("dispersion", &r[c["bin"]])?,
                day: parse_usize("dispersion", &r[c["day"]])?,
                index_return: f("index_return")?,
                dispersion: f("dispersion")?,
                skewness: non_nan(f("skewness")?),
                kurtosis: non_nan(f("kurtosis")?),
                median: f("median")?,
                mad: f("mad")?,
            })
        })
        .collect()
}

fn curve_table(kind: &str, curve: &ConditionalCurve) -> String {
    let mut t = Table::new(
        kind,
        &[curve.conditioning_name.as_str(), curve.statistic_name.as_str(), "stderr", "count"],
    );
    for i in 0..curve.len() {
        t.push(vec![
            fmt_g10(curve.bucket_centers[i]),
            fmt_g10(curve.means[i]),
            fmt_g10(curve.stderr[i]),
            curve.counts[i].to_string(),
        ]);
    }
    t.to_text()
}

/// Equal-count bucket edges over the values (at most `buckets` buckets).
fn quantile_edges(values: &[f64], buckets: usize) -> Option<Vec<f64>> {
    let mut xs: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if xs.len() < 2 {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (0..=buckets)
        .map(|i| xs[((i * (xs.len() - 1)) as f64 / buckets as f64).round() as usize])
        .collect();
    edges.dedup();
    (edges.len() >= 2).then_some(edges)
}

/// Conditional curves (fig3 to fig5) with the sub-linearity diagnostic,
/// odd/even split and rank correlations. Empty curves produce warnings, not
/// errors.
pub fn condition(sets: &[DispersionSet], opts: &ConditionConfig) -> CliResult<(Vec<Output>, Vec<String>)> {
    let filter = DispersionFilter {
        include_overnight: opts.include_overnight,
        bin: opts.bin,
    };
    let signed = BucketSpec::FixedWidth {
        lo: -opts.bucket_span,
        hi: opts.bucket_span,
        width: opts.bucket_width,
    };
    let absolute = BucketSpec::FixedWidth {
        lo: 0.0,
        hi: opts.bucket_span,
        width: opts.bucket_width,
    };
    let accepted: Vec<DispersionSet> = sets.iter().copied().filter(|d| filter.accepts(d)).collect();
    if accepted.is_empty() {
        return Err(CliError::input("no bin-days pass the conditioning filter"));
    }
    let mut outputs = Vec::new();
    let mut warnings = Vec::new();
    let note_empty = |name: &str, c: &ConditionalCurve, warnings: &mut Vec<String>| {
        if c.is_empty() {
            warnings.push(format!(
                "{name}: every bucket has fewer than {} entries, curve is empty",
                opts.min_count
            ));
        }
    };

    let fig3 = dispersion_vs_index(&accepted, filter, &signed, opts.min_count)?;
    note_empty("fig3", &fig3, &mut warnings);
    outputs.push(("fig3.csv".into(), curve_table("fig3", &fig3)));
    let mut sub = Table::new(
        "fig3_sublinearity",
        &["sign", "center", "observed", "predicted", "deviation", "stderr", "below_one_stderr"],
    );
    match sublinearity_diagnostic(&fig3, opts.origin_window) {
        Ok(report) => {
            for b in &report.branches {
                for d in &b.deviations {
                    sub.push(vec![
                        b.sign.to_string(),
                        fmt_g10(d.center),
                        fmt_g10(d.observed),
                        fmt_g10(d.predicted),
                        fmt_g10(d.deviation),
                        fmt_g10(d.stderr),
                        (d.deviation < -d.stderr).to_string(),
                    ]);
                }
            }
        }
        Err(e) => warnings.push(format!("fig3 sub-linearity skipped: {e}")),
    }
    outputs.push(("fig3_sublinearity.csv".into(), sub.to_text()));

    let fig4 = skew_vs_index(&accepted, filter, &signed, opts.min_count)?;
    note_empty("fig4", &fig4, &mut warnings);
    outputs.push(("fig4.csv".into(), curve_table("fig4", &fig4)));
    let mut parts = Table::new(
        "fig4_parts",
        &["abs_index_return", "odd", "odd_stderr", "even", "even_stderr"],
    );
    let symmetric = fig4.symmetric_subset();
    if !symmetric.is_empty() {
        let (odd, even) = odd_even_decompose(&symmetric)?;
        for i in 0..odd.len() {
            parts.push(vec![
                fmt_g10(odd.bucket_centers[i]),
                fmt_g10(odd.means[i]),
                fmt_g10(odd.stderr[i]),
                fmt_g10(even.means[i]),
                fmt_g10(even.stderr[i]),
            ]);
        }
    }
    outputs.push(("fig4_parts.csv".into(), parts.to_text()));

    let fig5a = kurtosis_vs_index(&accepted, filter, IndexAxis::Absolute, &absolute, opts.min_count)?;
    note_empty("fig5a", &fig5a, &mut warnings);
    outputs.push(("fig5a.csv".into(), curve_table("fig5a", &fig5a)));

    let mut ranks = Table::new("fig5_rank", &["dispersion_kind", "rank_correlation"]);
    for (file, kind, label) in [
        ("fig5b", DispersionKind::Std, "std"),
        ("fig5c", DispersionKind::Mad, "mad"),
    ] {
        let xs: Vec<f64> = accepted
            .iter()
            .filter(|d| d.kurtosis.is_some())
            .map(|d| match kind {
                DispersionKind::Std => d.dispersion,
                DispersionKind::Mad => d.mad,
            })
            .collect();
        let curve = match quantile_edges(&xs, opts.dispersion_buckets) {
            Some(edges) => kurtosis_vs_dispersion(
                &accepted,
                filter,
                &BucketSpec::Edges(edges),
                opts.min_count,
                kind,
            )?,
            None => ConditionalCurve {
                conditioning_name: format!("{label}_dispersion"),
                statistic_name: "kurtosis".into(),
                bucket_centers: vec![],
                means: vec![],
                stderr: vec![],
                counts: vec![],
                omitted_buckets: 0,
                out_of_range: 0,
            },
        };
        note_empty(file, &curve, &mut warnings);
        outputs.push((format!("{file}.csv"), curve_table(file, &curve)));
        let rho = match dispersion_kurtosis_rank_correlation(&accepted, filter, kind) {
            Ok(r) => fmt_g10(r),
            Err(e) => {
                warnings.push(format!("{label} rank correlation undefined: {e}"));
                "nan".into()
            }
        };
        ranks.push(vec![label.into(), rho]);
    }
    outputs.push(("fig5_rank.csv".into(), ranks.to_text()));
    Ok((outputs, warnings))
}

/// Market-mode statistics (fig6), the next eigenvalues with their overlap
/// singular values (fig7), and the random-overlap threshold (fig7_null).
/// Warns when there are fewer days than stocks.
pub fn spectra(panel: &ReturnPanel, opts: &SpectraConfig, seed: u64) -> CliResult<(Vec<Output>, Vec<String>)> {
    let n = panel.n_stocks();
    let ranks = opts.rank_range();
    if *ranks.end() >= n {
        return Err(CliError::input(format!(
            "eigenvector ranks {}..={} need more than {} stocks",
            ranks.start(),
            ranks.end(),
            n
        )));
    }
    let mut warnings = Vec::new();
    let npanel = normalize_panel(panel)?;
    let spectra = bin_spectra(&npanel)?;
    if spectra.iter().any(|s| s.eigenvalues.len() > panel.n_days()) {
        warnings.push(format!(
            "{n} stocks over {} days: correlation matrices are rank-deficient",
            panel.n_days()
        ));
    }
    let overlaps = overlap_singular_values(&spectra, opts.reference_bin, ranks.clone())?;
    let d = ranks.end() + 1 - ranks.start();
    let threshold = random_overlap_baseline(n, d, opts.null_trials, opts.null_quantile, null_seed(seed))?;

    let mut fig6 = Table::new("fig6", &["bin", "lambda1_over_n", "v1_dot_e"]);
    let lambda_cols: Vec<String> = ranks.clone().map(|r| format!("lambda_{r}")).collect();
    let s_cols: Vec<String> = ranks.clone().map(|r| format!("s_{r}")).collect();
    let mut columns = vec!["bin"];
    columns.extend(lambda_cols.iter().map(String::as_str));
    columns.extend(s_cols.iter().map(String::as_str));
    columns.push("null_threshold");
    let mut fig7 = Table::new("fig7", &columns);
    for (s, o) in spectra.iter().zip(&overlaps) {
        let mm = market_mode_stats(s);
        fig6.push(vec![s.bin.to_string(), fmt_g10(mm.lambda1_over_n), fmt_g10(mm.v1_dot_e)]);
        let mut row = vec![s.bin.to_string()];
        row.extend(ranks.clone().map(|r| fmt_g10(s.eigenvalues[r - 1])));
        row.extend(o.singular_values.iter().map(|v| fmt_g10(*v)));
        row.push(fmt_g10(threshold));
        fig7.push(row);
    }
    let mut null = Table::new("fig7_null", &["n", "d", "trials", "quantile", "seed", "threshold"]);
    null.push(vec![
        n.to_string(),
        d.to_string(),
        opts.null_trials.to_string(),
        fmt_g10(opts.null_quantile),
        null_seed(seed).to_string(),
        fmt_g10(threshold),
    ]);
    Ok((
        vec![
            ("fig6.csv".into(), fig6.to_text()),
            ("fig7.csv".into(), fig7.to_text()),
            ("fig7_null.csv".into(), null.to_text()),
        ],
        warnings,
    ))
}

/// Reads one numeric column of a figure table.
pub fn column(text: &str, kind: &str, name: &str) -> CliResult<Vec<f64>> {
    Ok(Table::parse(text, kind)?.f64_column(name)?)
}
