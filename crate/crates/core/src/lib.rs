//! Intraday seasonality statistics over panels of bar returns.
//!
//! The pipeline runs from a [`panel::ReturnPanel`] through single-stock
//! moments ([`moments`]), cross-sectional moments ([`cross_section`]),
//! intraday profiles and power-law fits ([`seasonality`]), per-bin
//! correlation spectra ([`spectral`]) and index-conditioned curves
//! ([`conditioning`]). [`synth`] generates one-factor test markets.

pub mod conditioning;
pub mod cross_section;
pub mod error;
pub mod moments;
pub mod panel;
pub mod seasonality;
pub mod spectral;
pub mod synth;
pub mod table;

pub use error::{Error, Result};
pub use panel::ReturnPanel;
