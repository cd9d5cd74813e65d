use chrono::NaiveDate;
use thiserror::Error;

/// Errors raised by the statistics toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("missing return for symbol {symbol} on {date} in bin {bin}")]
    Completeness {
        symbol: String,
        date: NaiveDate,
        bin: usize,
    },

    #[error("duplicate record for symbol {symbol} on {date} at {slot}")]
    Duplicate {
        symbol: String,
        date: NaiveDate,
        slot: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("zero dispersion in bin-days {}", format_bin_days(.0))]
    DegenerateBinDays(Vec<(usize, usize)>),

    #[error("zero denominator in bin {bin}")]
    ZeroDenominator { bin: usize },

    #[error("infeasible generator configuration in bin {bin}: {message}")]
    Infeasible { bin: usize, message: String },

    #[error("unpairable bucket centers {0:?}")]
    Unpairable(Vec<f64>),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_bin_days(cells: &[(usize, usize)]) -> String {
    let shown: Vec<String> = cells
        .iter()
        .take(20)
        .map(|(k, t)| format!("(bin {k}, day {t})"))
        .collect();
    if cells.len() > shown.len() {
        format!("{} and {} more", shown.join(", "), cells.len() - shown.len())
    } else {
        shown.join(", ")
    }
}

pub type Result<T> = std::result::Result<T, Error>;
