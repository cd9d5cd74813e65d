//! Delimited text tables with a schema line, and pinned float formatting.
//!
//! Every table starts with `# schema: <kind> v<version>`, then a header row,
//! then comma-separated rows. Reading a table of the wrong kind or version is
//! a schema error.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::panel::ReturnPanel;

pub const SCHEMA_VERSION: u32 = 1;
const SCHEMA_PREFIX: &str = "# schema:";

/// `%.10g`: ten significant digits, fixed notation for decimal exponents in
/// `[-4, 10)`, trailing zeros removed. Locale independent.
pub fn fmt_g10(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..10).contains(&exp) {
        let decimals = (9 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_exact(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// `nan` for `None`.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), fmt_g10)
}

pub fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse()
            .map_err(|_| Error::Schema(format!("expected a number, found {s:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self {
            kind: kind.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{SCHEMA_PREFIX} {} v{SCHEMA_VERSION}", self.kind).unwrap();
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }

    /// Parses a table, requiring the schema line to name `kind` at the
    /// current version.
    pub fn parse(text: &str, kind: &str) -> Result<Self> {
        let mut lines = text.lines();
        let schema = lines
            .next()
            .ok_or_else(|| Error::Schema(format!("empty file, expected {kind} table")))?;
        check_schema_line(schema, kind)?;
        let header = lines
            .next()
            .ok_or_else(|| Error::Schema(format!("{kind} table has no header")))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != columns.len() {
                return Err(Error::Schema(format!(
                    "{kind} table row {} has {} fields, header has {}",
                    i + 3,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self {
            kind: kind.into(),
            columns,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Schema(format!("{} table has no column {name:?}", self.kind)))
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows.iter().map(|r| parse_f64(&r[c])).collect()
    }
}

/// Checks a `# schema:` line. Tables without one are not accepted.
pub fn check_schema_line(line: &str, kind: &str) -> Result<()> {
    let found = line
        .strip_prefix(SCHEMA_PREFIX)
        .map(str::trim)
        .ok_or_else(|| Error::Schema(format!("missing schema line, expected {kind} v{SCHEMA_VERSION}")))?;
    let expected = format!("{kind} v{SCHEMA_VERSION}");
    if found != expected {
        return Err(Error::Schema(format!("expected {expected}, found {found}")));
    }
    Ok(())
}

/// Kind of the standard bar-return table.
pub const RETURNS_KIND: &str = "returns";

/// The panel as a bar-return table (`date,bin,symbol,return`), values in
/// exact round-trip form.
pub fn returns_table(panel: &ReturnPanel) -> String {
    let mut out = String::with_capacity(panel.values().len() * 32);
    writeln!(out, "{SCHEMA_PREFIX} {RETURNS_KIND} v{SCHEMA_VERSION}").unwrap();
    out.push_str("date,bin,symbol,return\n");
    for (day, date) in panel.dates().iter().enumerate() {
        let date = date.format("%Y-%m-%d").to_string();
        for bin in panel.bins() {
            for (stock, v) in panel.cross_section(bin, day).iter().enumerate() {
                writeln!(out, "{date},{bin},{},{}", panel.stock_ids()[stock], fmt_exact(*v)).unwrap();
            }
        }
    }
    out
}

/// Rejects a bar-return file whose schema line names another table. Files
/// without a schema line are plain user data and pass.
pub fn check_returns_schema(text: &str) -> Result<()> {
    match text.lines().next() {
        Some(first) if first.starts_with(SCHEMA_PREFIX) => check_schema_line(first, RETURNS_KIND),
        _ => Ok(()),
    }
}
