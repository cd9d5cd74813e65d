//! Argument parsing and subcommand dispatch for the `seasonality` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seasonality_core::panel::{LoadPolicy, StampConvention, DEFAULT_SANITY_BOUND};
use seasonality_core::seasonality::FitWindow;
use seasonality_core::synth::GeneratorManifest;

use crate::config::{ConditionConfig, InputKind, SpectraConfig};
use crate::error::{Category, CliError, CliResult};
use crate::pipeline::{run_pipeline, write_outputs};
use crate::stages;
use crate::RunConfig;

/// Intraday seasonality statistics for panels of bar returns.
#[derive(Parser)]
#[command(name = "seasonality", version, about)]
struct Cli {
    /// Run configuration; stages take their options and seed from it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage from the configured input.
    Run {
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        min_count: Option<usize>,
        #[arg(long)]
        null_trials: Option<usize>,
    },
    /// Read return or price files into a panel table.
    Ingest {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "returns")]
        kind: InputKind,
        #[arg(long, default_value = "strict")]
        load_policy: LoadPolicy,
        #[arg(long, default_value = "close-to-close")]
        stamp_convention: StampConvention,
        #[arg(long, default_value_t = DEFAULT_SANITY_BOUND)]
        sanity_bound: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic one-factor market.
    Synth {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Per-stock, per-bin moments.
    Moments {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-sectional moments and the fig1/fig2 profiles.
    CrossSection {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        moments: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Power-law fit of a fig1 column.
    Fit {
        #[arg(long)]
        fig1: PathBuf,
        #[arg(long)]
        window: Option<FitWindow>,
        #[arg(long)]
        column: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Index-conditioned curves (fig3 to fig5).
    Condition {
        #[arg(long)]
        dispersion: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        opts: ConditionFlags,
    },
    /// Correlation spectra and eigenvector overlaps (fig6, fig7).
    Spectra {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        opts: SpectraFlags,
    },
}

#[derive(Args)]
struct ConditionFlags {
    /// Smallest bucket population that is reported
    #[arg(long)]
    min_count: Option<usize>,
    /// Bucket width on the index-return axis
    #[arg(long)]
    bucket_width: Option<f64>,
    /// Half-range of the signed index-return axis
    #[arg(long)]
    bucket_span: Option<f64>,
    /// Pool overnight bin-days with the intraday ones
    #[arg(long)]
    include_overnight: bool,
    /// Restrict to one intraday bin
    #[arg(long)]
    bin: Option<usize>,
    /// Buckets per branch used for the linear fit near zero
    #[arg(long)]
    origin_window: Option<usize>,
    /// Equal-count buckets on the dispersion axis
    #[arg(long)]
    dispersion_buckets: Option<usize>,
}

#[derive(Args)]
struct SpectraFlags {
    /// First eigenvector rank of the overlap subspace
    #[arg(long)]
    first_rank: Option<usize>,
    /// Last eigenvector rank of the overlap subspace
    #[arg(long)]
    last_rank: Option<usize>,
    /// Bin whose eigenvectors the others are compared with
    #[arg(long)]
    reference_bin: Option<usize>,
    /// Monte-Carlo trials for the random-overlap threshold
    #[arg(long)]
    null_trials: Option<usize>,
    /// Quantile of the random-overlap distribution
    #[arg(long)]
    null_quantile: Option<f64>,
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn set_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("SEASONALITY_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::input(format!("SEASONALITY_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::new(Category::Internal, e.to_string()))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let config = cli.config.as_deref().map(RunConfig::load).transpose()?;
    match cli.command {
        Command::Run {
            output_dir,
            seed,
            min_count,
            null_trials,
        } => {
            let mut config = config.ok_or_else(|| CliError::input("run needs --config"))?;
            if let Some(dir) = output_dir {
                config.output_dir = dir;
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(n) = min_count {
                config.conditioning.min_count = n;
            }
            if let Some(n) = null_trials {
                config.spectra.null_trials = n;
            }
            warn(&run_pipeline(&config)?);
        }
        Command::Ingest {
            inputs,
            kind,
            load_policy,
            stamp_convention,
            sanity_bound,
            out,
        } => {
            let (text, warnings) = stages::ingest(&inputs, kind, load_policy, stamp_convention, sanity_bound)?;
            warn(&warnings);
            write_file(&out, &text)?;
        }
        Command::Synth {
            manifest,
            seed,
            out_dir,
        } => {
            let manifest = GeneratorManifest::from_toml_str(&read(&manifest)?)?;
            let seed = seed.or(config.as_ref().map(|c| c.seed));
            write_outputs(&out_dir, &stages::synth(&manifest, seed)?)?;
        }
        Command::Moments { panel, out } => {
            let panel = stages::read_panel(&read(&panel)?)?;
            write_file(&out, &stages::moments(&panel)?)?;
        }
        Command::CrossSection {
            panel,
            moments,
            out_dir,
        } => {
            let panel = stages::read_panel(&read(&panel)?)?;
            let moments = stages::read_moments(&read(&moments)?)?;
            let cs = stages::cross_section(&panel, &moments)?;
            write_outputs(
                &out_dir,
                &[
                    (stages::DISPERSION_FILE.into(), cs.dispersion),
                    (stages::FIG1_FILE.into(), cs.fig1),
                    ("fig2.csv".into(), cs.fig2),
                ],
            )?;
        }
        Command::Fit {
            fig1,
            window,
            column,
            out,
        } => {
            let defaults = config.map(|c| c.fit).unwrap_or_default();
            let window = window.unwrap_or(defaults.window);
            let column = column.unwrap_or(defaults.column);
            write_file(&out, &stages::fit(&read(&fig1)?, window, &column)?)?;
        }
        Command::Condition {
            dispersion,
            out_dir,
            opts,
        } => {
            let mut c = config.map(|c| c.conditioning).unwrap_or_else(ConditionConfig::default);
            if let Some(v) = opts.min_count {
                c.min_count = v;
            }
            if let Some(v) = opts.bucket_width {
                c.bucket_width = v;
            }
            if let Some(v) = opts.bucket_span {
                c.bucket_span = v;
            }
            if opts.include_overnight {
                c.include_overnight = true;
            }
            if opts.bin.is_some() {
                c.bin = opts.bin;
            }
            if let Some(v) = opts.origin_window {
                c.origin_window = v;
            }
            if let Some(v) = opts.dispersion_buckets {
                c.dispersion_buckets = v;
            }
            let sets = stages::read_dispersion(&read(&dispersion)?)?;
            let (outputs, warnings) = stages::condition(&sets, &c)?;
            warn(&warnings);
            write_outputs(&out_dir, &outputs)?;
        }
        Command::Spectra {
            panel,
            out_dir,
            seed,
            opts,
        } => {
            let run_seed = config.as_ref().map(|c| c.seed);
            let mut s = config.map(|c| c.spectra).unwrap_or_else(SpectraConfig::default);
            if let Some(v) = opts.first_rank {
                s.ranks[0] = v;
            }
            if let Some(v) = opts.last_rank {
                s.ranks[1] = v;
            }
            if let Some(v) = opts.reference_bin {
                s.reference_bin = v;
            }
            if let Some(v) = opts.null_trials {
                s.null_trials = v;
            }
            if let Some(v) = opts.null_quantile {
                s.null_quantile = v;
            }
            let seed = seed.or(run_seed).unwrap_or(0);
            let panel = stages::read_panel(&read(&panel)?)?;
            let (outputs, warnings) = stages::spectra(&panel, &s, seed)?;
            warn(&warnings);
            write_outputs(&out_dir, &outputs)?;
        }
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Parses `args` (program name first) and runs the subcommand in process.
/// Usage errors are input errors; the thread pool is left alone.
pub fn execute<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::input(e.to_string()))?;
    dispatch(cli)
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| set_threads().and_then(|()| dispatch(cli)));
    let result = outcome.unwrap_or_else(|panic| {
        let message = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "unexpected failure".into());
        Err(CliError::new(Category::Internal, message))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
