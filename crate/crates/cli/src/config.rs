//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//!
//! [input]
//! kind = "synthetic"              # returns | prices | synthetic
//! manifest = "market.toml"        # synthetic only
//! paths = []                      # returns / prices files
//! load_policy = "strict"          # strict | drop-incomplete | zero-fill
//! stamp_convention = "close-to-close"
//! sanity_bound = 0.5
//!
//! [fit]
//! window = "first-half"           # first-half | first-two-hours
//! column = "volatility"
//!
//! [conditioning]
//! bucket_width = 0.001
//! bucket_span = 0.03
//! min_count = 50
//! include_overnight = false
//! origin_window = 3
//! dispersion_buckets = 20
//!
//! [spectra]
//! ranks = [2, 7]
//! reference_bin = 1
//! null_trials = 10000
//! null_quantile = 0.99
//! ```
//!
//! Relative paths are resolved against the directory holding the config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seasonality_core::conditioning::{DEFAULT_BUCKET_SPAN, DEFAULT_BUCKET_WIDTH, DEFAULT_MIN_COUNT};
use seasonality_core::panel::{LoadPolicy, StampConvention, DEFAULT_SANITY_BOUND};
use seasonality_core::seasonality::FitWindow;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    Returns,
    Prices,
    Synthetic,
}

impl std::str::FromStr for InputKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "returns" => Ok(Self::Returns),
            "prices" => Ok(Self::Prices),
            "synthetic" => Ok(Self::Synthetic),
            other => Err(CliError::input(format!("unknown input kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub kind: InputKind,
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub load_policy: LoadPolicy,
    #[serde(default)]
    pub stamp_convention: StampConvention,
    #[serde(default = "default_sanity_bound")]
    pub sanity_bound: f64,
}

fn default_sanity_bound() -> f64 {
    DEFAULT_SANITY_BOUND
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub window: FitWindow,
    pub column: String,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            window: FitWindow::FirstHalf,
            column: "volatility".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionConfig {
    pub bucket_width: f64,
    pub bucket_span: f64,
    pub min_count: usize,
    pub include_overnight: bool,
    /// Restrict the curves to one bin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin: Option<usize>,
    pub origin_window: usize,
    /// Equal-count buckets on the dispersion axis.
    pub dispersion_buckets: usize,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        Self {
            bucket_width: DEFAULT_BUCKET_WIDTH,
            bucket_span: DEFAULT_BUCKET_SPAN,
            min_count: DEFAULT_MIN_COUNT,
            include_overnight: false,
            bin: None,
            origin_window: 3,
            dispersion_buckets: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectraConfig {
    /// First and last eigenvector rank (1-based, inclusive).
    pub ranks: [usize; 2],
    pub reference_bin: usize,
    pub null_trials: usize,
    pub null_quantile: f64,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        Self {
            ranks: [2, 7],
            reference_bin: 1,
            null_trials: 10_000,
            null_quantile: 0.99,
        }
    }
}

impl SpectraConfig {
    pub fn rank_range(&self) -> std::ops::RangeInclusive<usize> {
        self.ranks[0]..=self.ranks[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub input: InputConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub conditioning: ConditionConfig,
    #[serde(default)]
    pub spectra: SpectraConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let config: Self = toml::from_str(text)
            .map_err(|e| CliError::input(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        self.output_dir = join(&self.output_dir);
        self.input.paths = self.input.paths.iter().map(join).collect();
        self.input.manifest = self.input.manifest.as_ref().map(join);
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::input(format!("config: {m}")));
        match self.input.kind {
            InputKind::Synthetic if self.input.manifest.is_none() => {
                return bad("synthetic input needs input.manifest".into())
            }
            InputKind::Returns | InputKind::Prices if self.input.paths.is_empty() => {
                return bad("input.paths is empty".into())
            }
            _ => {}
        }
        if !(self.input.sanity_bound > 0.0) {
            return bad(format!("sanity_bound must be positive, got {}", self.input.sanity_bound));
        }
        let c = &self.conditioning;
        if !(c.bucket_width > 0.0 && c.bucket_span > 0.0 && c.bucket_width <= c.bucket_span) {
            return bad(format!(
                "need 0 < bucket_width <= bucket_span, got {} and {}",
                c.bucket_width, c.bucket_span
            ));
        }
        if c.origin_window < 2 {
            return bad(format!("origin_window must be at least 2, got {}", c.origin_window));
        }
        if c.dispersion_buckets < 2 {
            return bad(format!(
                "dispersion_buckets must be at least 2, got {}",
                c.dispersion_buckets
            ));
        }
        let s = &self.spectra;
        if s.ranks[0] < 1 || s.ranks[1] < s.ranks[0] {
            return bad(format!("ranks must satisfy 1 <= first <= last, got {:?}", s.ranks));
        }
        if s.null_trials < 1000 {
            return bad(format!("null_trials must be at least 1000, got {}", s.null_trials));
        }
        if !(s.null_quantile > 0.0 && s.null_quantile < 1.0) {
            return bad(format!("null_quantile must be in (0, 1), got {}", s.null_quantile));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
output_dir = "out"
[input]
kind = "returns"
paths = ["bars.csv"]
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.spectra.rank_range(), 2..=7);
        assert_eq!(c.conditioning.min_count, 50);
        assert_eq!(c.input.load_policy, LoadPolicy::Strict);
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let mut c = RunConfig::from_toml_str(MINIMAL).unwrap();
        c.resolve_paths(Path::new("/data/run"));
        assert_eq!(c.input.paths[0], PathBuf::from("/data/run/bars.csv"));
        assert_eq!(c.output_dir, PathBuf::from("/data/run/out"));
    }

    #[test]
    fn rejects_bad_values() {
        let typo = MINIMAL.replace("seed", "sede");
        assert!(RunConfig::from_toml_str(&typo).is_err());
        let trials = format!("{MINIMAL}[spectra]\nnull_trials = 10\n");
        assert_eq!(RunConfig::from_toml_str(&trials).unwrap_err().exit_code(), 2);
        let synthetic = MINIMAL.replace("\"returns\"", "\"synthetic\"");
        assert!(RunConfig::from_toml_str(&synthetic).is_err());
    }
}
