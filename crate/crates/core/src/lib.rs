//! Stochastic-geometry simulator for dimensioning the bandwidth that URLLC
//! service targets (`delta` bits within `tau` seconds with probability
//! `alpha`) need in 3GPP urban-macro networks.
//!
//! The pipeline runs bottom-up:
//!
//! * [`geometry`] samples base-station deployments (PPP and two-operator
//!   Gauss-Poisson) around a typical user at the origin.
//! * [`channel`] implements the TR 38.901 UMa large-scale channel and the
//!   planar-array gain.
//! * [`link`] turns one deployment into an end-to-end SINR sample for a
//!   regime and connectivity mode.
//! * [`dimensioning`] maps SINR samples onto required bandwidth through an
//!   empirical quantile of the inverse spectral efficiency.
//! * [`engine`] runs reproducible parallel campaigns over sweep cells.
//! * [`config`] and [`output`] are the file formats used by the CLI.

pub mod channel;
pub mod config;
pub mod dimensioning;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod link;
pub mod output;
pub mod validate;

pub use error::{Error, Result};
