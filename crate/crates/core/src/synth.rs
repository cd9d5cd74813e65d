//! Synthetic one-factor markets with intraday patterns.
//!
//! ```text
//! η_α(k;t) = β_α F(k;t) + s(k) (|F(k;t)| / f(k))^γ ε_α(k;t)
//! ```
//!
//! `F ~ N(0, f(k)²)`, `β_α ~ N(beta_mean, beta_std²)` drawn once per stock,
//! and `ε` is unit-variance Gaussian or Student-t noise. `s(k)` is solved so
//! that stocks with equal β have pairwise correlation `ρ(k)`. On a jump day
//! one stock, chosen uniformly, has every residual multiplied by
//! `jump_scale`.
//!
//! Manifests are TOML:
//!
//! ```toml
//! n_stocks = 126
//! n_days = 2000
//! bins_per_day = 78
//! factor_vol = [0.0015, ...]          # one per intraday bin
//! target_correlation = [0.12, ...]    # one per intraday bin, in [0, 1)
//! beta_mean = 1.0
//! beta_std = 0.0
//! residual_tail = { kind = "student", nu = 5.0 }   # or { kind = "gaussian" }
//! residual_vol_coupling = 0.0          # γ in [0, 1]
//! jump_day_rate = 0.0
//! jump_scale = 1.0
//! overnight_vol_multiplier = 0.0       # 0 disables the overnight bin
//! seed = 1
//! ```
//!
//! The overnight bin, when enabled, has factor vol `multiplier × mean f(k)`
//! and the last bin's target correlation.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::ReturnPanel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResidualTail {
    Gaussian,
    Student { nu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorManifest {
    pub n_stocks: usize,
    pub n_days: usize,
    pub bins_per_day: usize,
    pub factor_vol: Vec<f64>,
    pub target_correlation: Vec<f64>,
    pub beta_mean: f64,
    pub beta_std: f64,
    pub residual_tail: ResidualTail,
    #[serde(default)]
    pub residual_vol_coupling: f64,
    #[serde(default)]
    pub jump_day_rate: f64,
    #[serde(default = "one")]
    pub jump_scale: f64,
    #[serde(default)]
    pub overnight_vol_multiplier: f64,
    pub seed: u64,
    /// Mean pairwise correlation per intraday bin for the drawn β's, jumps
    /// ignored. Filled in by [`generate_market`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub implied_correlation: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implied_overnight_correlation: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl GeneratorManifest {
    /// Gaussian market with equal β = 1, no coupling, no jumps and no
    /// overnight bin.
    pub fn one_factor(
        n_stocks: usize,
        n_days: usize,
        factor_vol: Vec<f64>,
        target_correlation: Vec<f64>,
        seed: u64,
    ) -> Self {
        Self {
            n_stocks,
            n_days,
            bins_per_day: factor_vol.len(),
            factor_vol,
            target_correlation,
            beta_mean: 1.0,
            beta_std: 0.0,
            residual_tail: ResidualTail::Gaussian,
            residual_vol_coupling: 0.0,
            jump_day_rate: 0.0,
            jump_scale: 1.0,
            overnight_vol_multiplier: 0.0,
            seed,
            implied_correlation: Vec::new(),
            implied_overnight_correlation: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let manifest: Self =
            toml::from_str(s).map_err(|e| Error::Schema(format!("generator manifest: {}", e.message())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn has_overnight(&self) -> bool {
        self.overnight_vol_multiplier > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Contract(m));
        if self.n_stocks < 2 || self.n_days < 2 || self.bins_per_day < 1 {
            return bad(format!(
                "need N >= 2, T >= 2, K >= 1, got N={} T={} K={}",
                self.n_stocks, self.n_days, self.bins_per_day
            ));
        }
        if self.factor_vol.len() != self.bins_per_day
            || self.target_correlation.len() != self.bins_per_day
        {
            return bad(format!(
                "factor_vol and target_correlation need {} entries, got {} and {}",
                self.bins_per_day,
                self.factor_vol.len(),
                self.target_correlation.len()
            ));
        }
        for (i, (&f, &rho)) in self.factor_vol.iter().zip(&self.target_correlation).enumerate() {
            if !(f > 0.0 && f.is_finite()) {
                return bad(format!("factor_vol in bin {} must be positive, got {f}", i + 1));
            }
            if !(0.0..1.0).contains(&rho) {
                return bad(format!("target_correlation in bin {} must be in [0, 1), got {rho}", i + 1));
            }
        }
        if !self.beta_mean.is_finite() || !(self.beta_std >= 0.0 && self.beta_std.is_finite()) {
            return bad("beta_mean must be finite and beta_std nonnegative".into());
        }
        if let ResidualTail::Student { nu } = self.residual_tail {
            if !(nu > 2.0) {
                return bad(format!("student residuals need nu > 2, got {nu}"));
            }
        }
        if !(0.0..=1.0).contains(&self.residual_vol_coupling) {
            return bad(format!(
                "residual_vol_coupling must be in [0, 1], got {}",
                self.residual_vol_coupling
            ));
        }
        if !(0.0..=1.0).contains(&self.jump_day_rate) {
            return bad(format!("jump_day_rate must be in [0, 1], got {}", self.jump_day_rate));
        }
        if !(self.jump_scale >= 0.0 && self.jump_scale.is_finite()) {
            return bad(format!("jump_scale must be nonnegative, got {}", self.jump_scale));
        }
        if !(self.overnight_vol_multiplier >= 0.0 && self.overnight_vol_multiplier.is_finite()) {
            return bad(format!(
                "overnight_vol_multiplier must be nonnegative, got {}",
                self.overnight_vol_multiplier
            ));
        }
        Ok(())
    }

    /// `(bin, f, ρ)` for every generated bin, overnight first.
    fn bin_targets(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::with_capacity(self.bins_per_day + 1);
        if self.has_overnight() {
            let mean_f = self.factor_vol.iter().sum::<f64>() / self.bins_per_day as f64;
            out.push((
                0,
                self.overnight_vol_multiplier * mean_f,
                self.target_correlation[self.bins_per_day - 1],
            ));
        }
        out.extend(
            self.factor_vol
                .iter()
                .zip(&self.target_correlation)
                .enumerate()
                .map(|(i, (&f, &rho))| (i + 1, f, rho)),
        );
        out
    }
}

/// `E|Z|^{2γ}` for standard normal `Z`.
fn coupling_moment(gamma: f64) -> f64 {
    use statrs::function::gamma::gamma as gamma_fn;
    2f64.powf(gamma) * gamma_fn(gamma + 0.5) / std::f64::consts::PI.sqrt()
}

/// Residual scale `s(k)` giving correlation `ρ` between two stocks with
/// β = beta_mean.
fn residual_scale(m: &GeneratorManifest, bin: usize, f: f64, rho: f64) -> Result<f64> {
    let b = m.beta_mean;
    if rho == 0.0 {
        if b != 0.0 {
            return Err(Error::Infeasible {
                bin,
                message: format!("zero correlation needs beta_mean = 0, got {b}"),
            });
        }
        return Ok(f);
    }
    if b == 0.0 {
        return Err(Error::Infeasible {
            bin,
            message: format!("correlation {rho} needs a nonzero beta_mean"),
        });
    }
    let m_gamma = coupling_moment(m.residual_vol_coupling);
    Ok((b * b * f * f * (1.0 - rho) / (rho * m_gamma)).sqrt())
}

fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(count)
        .collect()
}

fn synthetic_dates(count: usize) -> Vec<NaiveDate> {
    business_days(NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"), count)
}

fn synthetic_ids(count: usize) -> Vec<String> {
    let width = count.to_string().len().max(3);
    (1..=count).map(|i| format!("S{i:0width$}")).collect()
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

enum Noise {
    Gaussian,
    Student(StudentT<f64>, f64),
}

impl Noise {
    fn new(tail: ResidualTail) -> Self {
        match tail {
            ResidualTail::Gaussian => Noise::Gaussian,
            ResidualTail::Student { nu } => Noise::Student(
                StudentT::new(nu).expect("nu validated"),
                ((nu - 2.0) / nu).sqrt(),
            ),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Noise::Gaussian => StandardNormal.sample(rng),
            Noise::Student(t, scale) => t.sample(rng) * scale,
        }
    }
}

/// Draws a panel from the manifest and returns it with the manifest's
/// implied correlations filled in.
pub fn generate_market(manifest: &GeneratorManifest) -> Result<(ReturnPanel, GeneratorManifest)> {
    generate(manifest, 1.0)
}

/// Same draws as [`generate_market`] with the factor and residual draws
/// negated.
pub fn generate_market_sign_flipped(
    manifest: &GeneratorManifest,
) -> Result<(ReturnPanel, GeneratorManifest)> {
    generate(manifest, -1.0)
}

fn generate(manifest: &GeneratorManifest, sign: f64) -> Result<(ReturnPanel, GeneratorManifest)> {
    manifest.validate()?;
    let targets = manifest.bin_targets();
    let scales = targets
        .iter()
        .map(|&(bin, f, rho)| residual_scale(manifest, bin, f, rho))
        .collect::<Result<Vec<_>>>()?;

    let n = manifest.n_stocks;
    let betas: Vec<f64> = {
        let mut rng = stream(manifest.seed, 0);
        let dist = Normal::new(manifest.beta_mean, manifest.beta_std).expect("beta_std validated");
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    };

    let gamma = manifest.residual_vol_coupling;
    let days: Vec<Vec<f64>> = (0..manifest.n_days)
        .into_par_iter()
        .map(|day| {
            let mut rng = stream(manifest.seed, day as u64 + 1);
            let noise = Noise::new(manifest.residual_tail);
            let jumper = (rng.random::<f64>() < manifest.jump_day_rate)
                .then(|| rng.random_range(0..n));
            let mut out = Vec::with_capacity(targets.len() * n);
            for (&(_, f, _), &s) in targets.iter().zip(&scales) {
                let z: f64 = StandardNormal.sample(&mut rng);
                let factor = sign * f * z;
                let amplitude = if gamma == 0.0 { 1.0 } else { z.abs().powf(gamma) };
                for (stock, beta) in betas.iter().enumerate() {
                    let mut eps = sign * s * amplitude * noise.sample(&mut rng);
                    if jumper == Some(stock) {
                        eps *= manifest.jump_scale;
                    }
                    out.push(beta * factor + eps);
                }
            }
            out
        })
        .collect();

    let panel = ReturnPanel::new(
        synthetic_ids(n),
        synthetic_dates(manifest.n_days),
        manifest.bins_per_day,
        manifest.has_overnight(),
        days.concat(),
    )?;

    let m_gamma = coupling_moment(gamma);
    let implied: Vec<f64> = targets
        .iter()
        .zip(&scales)
        .map(|(&(_, f, _), &s)| mean_pairwise_correlation(&betas, f, s * s * m_gamma))
        .collect();
    let mut echoed = manifest.clone();
    if manifest.has_overnight() {
        echoed.implied_overnight_correlation = Some(implied[0]);
        echoed.implied_correlation = implied[1..].to_vec();
    } else {
        echoed.implied_overnight_correlation = None;
        echoed.implied_correlation = implied;
    }
    Ok((panel, echoed))
}

/// Mean over stock pairs of `β_a β_b f² / √(var_a var_b)`.
fn mean_pairwise_correlation(betas: &[f64], f: f64, residual_var: f64) -> f64 {
    let f2 = f * f;
    let loadings: Vec<f64> = betas
        .iter()
        .map(|b| b * f / (b * b * f2 + residual_var).sqrt())
        .collect();
    let n = loadings.len() as f64;
    let sum: f64 = loadings.iter().sum();
    let sum_sq: f64 = loadings.iter().map(|l| l * l).sum();
    (sum * sum - sum_sq) / (n * (n - 1.0))
}

/// Independent Gaussian cells with standard deviation `vol_profile[k−1]` in
/// bin `k`, no overnight bin.
pub fn gaussian_iid_panel(
    n_stocks: usize,
    n_days: usize,
    bins_per_day: usize,
    vol_profile: &[f64],
    seed: u64,
) -> Result<ReturnPanel> {
    if n_stocks < 2 || n_days < 2 || bins_per_day < 1 {
        return Err(Error::Contract(format!(
            "need N >= 2, T >= 2, K >= 1, got N={n_stocks} T={n_days} K={bins_per_day}"
        )));
    }
    if vol_profile.len() != bins_per_day || vol_profile.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Contract(format!(
            "vol_profile needs {bins_per_day} positive entries"
        )));
    }
    let days: Vec<Vec<f64>> = (0..n_days)
        .into_par_iter()
        .map(|day| {
            let mut rng = stream(seed, day as u64 + 1);
            let mut out = Vec::with_capacity(bins_per_day * n_stocks);
            for &v in vol_profile {
                for _ in 0..n_stocks {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    out.push(v * z);
                }
            }
            out
        })
        .collect();
    ReturnPanel::new(
        synthetic_ids(n_stocks),
        synthetic_dates(n_days),
        bins_per_day,
        false,
        days.concat(),
    )
}

/// `base (1 + curvature u²)` with `u` running from −1 at bin 1 to 1 at bin K.
pub fn u_shaped_profile(bins_per_day: usize, base: f64, curvature: f64) -> Vec<f64> {
    let mid = 0.5 * (bins_per_day as f64 + 1.0);
    let half = (mid - 1.0).max(1.0);
    (1..=bins_per_day)
        .map(|k| {
            let u = (k as f64 - mid) / half;
            base * (1.0 + curvature * u * u)
        })
        .collect()
}

/// Linear interpolation from `first` at bin 1 to `last` at bin K.
pub fn linear_ramp(bins_per_day: usize, first: f64, last: f64) -> Vec<f64> {
    if bins_per_day == 1 {
        return vec![first];
    }
    (0..bins_per_day)
        .map(|i| first + (last - first) * i as f64 / (bins_per_day - 1) as f64)
        .collect()
}
