//! TOML run configuration and command-line overrides.
//!
//! Every key is optional; omitted keys take the reference campaign defaults
//! (three bands, δ = 256 bits, τ = 1 ms, α ∈ {0.9, 0.999, 0.99999}). Unknown
//! keys are rejected.
//!
//! ```toml
//! seed = 42
//! samples = 1000000
//! densities = [10, 30, 60]
//! regimes = ["noise", "interference"]
//! modes = ["single", "multiconn"]
//! alphas = [0.9, 0.999]
//! bands = [700e6, 4e9, { carrier_hz = 30e9, array_side = 4 }]
//!
//! [cdf]
//! bandwidth_hz = 100e6
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::BandProfile;
use crate::engine::{CampaignConfig, CdfRequest};
use crate::error::{Error, Result};
use crate::link::{ConnectivityMode, Regime};

/// Campaign plus CDF extraction settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub campaign: CampaignConfig,
    pub cdf: CdfRequest,
    /// Non-fatal findings, e.g. unusual band/array pairings.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum BandEntry {
    Carrier(f64),
    Full(BandTable),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BandTable {
    carrier_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    array_side: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bs_height_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ue_height_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tx_power_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ue_gain_dbi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_figure_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_floor_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rayleigh_fading: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum SeedValue {
    Int(i64),
    /// Decimal or `0x` hex; for seeds beyond the TOML integer range.
    Text(String),
}

impl SeedValue {
    fn from_u64(seed: u64) -> Self {
        match i64::try_from(seed) {
            Ok(v) => SeedValue::Int(v),
            Err(_) => SeedValue::Text(format!("{seed:#x}")),
        }
    }

    fn to_u64(&self) -> Result<u64> {
        match self {
            SeedValue::Int(v) => u64::try_from(*v).map_err(|_| Error::config("seed", "must be >= 0")),
            SeedValue::Text(s) => parse_seed(s).map_err(|reason| Error::config("seed", reason)),
        }
    }
}

pub fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse::<u64>(),
    };
    parsed.map_err(|e| format!("invalid seed `{s}`: {e}"))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CdfTable {
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sinr_grid_db: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay_grid_s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<SeedValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    densities: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regimes: Option<Vec<Regime>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    modes: Option<Vec<ConnectivityMode>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_tx_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster_radius_m: Option<f64>,
    /// Default for bands that do not set it.
    #[serde(skip_serializing_if = "Option::is_none")]
    rayleigh_fading: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bands: Option<Vec<BandEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cdf: Option<CdfTable>,
}

/// Command-line values that replace the file's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub bands: Option<Vec<f64>>,
    pub densities: Option<Vec<f64>>,
    pub alphas: Option<Vec<f64>>,
    pub regimes: Option<Vec<Regime>>,
    pub modes: Option<Vec<ConnectivityMode>>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

fn band_from_entry(entry: &BandEntry, rayleigh_default: bool) -> BandProfile {
    match entry {
        BandEntry::Carrier(f) => {
            let mut b = BandProfile::new(*f);
            b.rayleigh_fading = rayleigh_default;
            b
        }
        BandEntry::Full(t) => {
            let mut b = match t.array_side {
                Some(n) => BandProfile::with_array(t.carrier_hz, n),
                None => BandProfile::new(t.carrier_hz),
            };
            b.bs_height = t.bs_height_m.unwrap_or(b.bs_height);
            b.ue_height = t.ue_height_m.unwrap_or(b.ue_height);
            b.tx_power = t.tx_power_dbm.unwrap_or(b.tx_power);
            b.ue_gain = t.ue_gain_dbi.unwrap_or(b.ue_gain);
            b.noise_figure = t.noise_figure_db.unwrap_or(b.noise_figure);
            b.noise_floor = t.noise_floor_dbm.unwrap_or(b.noise_floor);
            b.rayleigh_fading = t.rayleigh_fading.unwrap_or(rayleigh_default);
            b
        }
    }
}

fn band_to_entry(b: &BandProfile) -> BandEntry {
    BandEntry::Full(BandTable {
        carrier_hz: b.carrier_frequency,
        array_side: Some(b.array_side),
        bs_height_m: Some(b.bs_height),
        ue_height_m: Some(b.ue_height),
        tx_power_dbm: Some(b.tx_power),
        ue_gain_dbi: Some(b.ue_gain),
        noise_figure_db: Some(b.noise_figure),
        noise_floor_dbm: Some(b.noise_floor),
        rayleigh_fading: Some(b.rayleigh_fading),
    })
}

fn pairing_warnings(bands: &[BandProfile]) -> Vec<String> {
    bands
        .iter()
        .filter(|b| !b.has_default_pairing())
        .map(|b| {
            format!(
                "band {} Hz uses a {}x{} array; the reference pairing is {}x{}",
                b.carrier_frequency,
                b.array_side,
                b.array_side,
                BandProfile::default_array_side(b.carrier_frequency),
                BandProfile::default_array_side(b.carrier_frequency)
            )
        })
        .collect()
}

/// Parses TOML text, applies `overrides` and validates the result.
pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
    let defaults = RunConfig::default();
    let mut c = defaults.campaign;
    let rayleigh = file.rayleigh_fading.unwrap_or(true);
    if let Some(seed) = &file.seed {
        c.master_seed = seed.to_u64()?;
    }
    if let Some(n) = file.samples {
        c.n_samples = n;
    }
    if let Some(d) = file.densities {
        c.densities = d;
    }
    if let Some(r) = file.regimes {
        c.regimes = r;
    }
    if let Some(m) = file.modes {
        c.modes = m;
    }
    if let Some(a) = file.alphas {
        c.alphas = a;
    }
    if let Some(d) = file.delta_bits {
        c.delta = d;
    }
    if let Some(t) = file.tau_tx_s {
        c.tau_tx = t;
    }
    if let Some(r) = file.cluster_radius_m {
        c.cluster_radius = r;
    }
    match &file.bands {
        Some(entries) => c.bands = entries.iter().map(|e| band_from_entry(e, rayleigh)).collect(),
        None => c.bands.iter_mut().for_each(|b| b.rayleigh_fading = rayleigh),
    }

    let mut cdf = defaults.cdf;
    if let Some(t) = file.cdf {
        if let Some(w) = t.bandwidth_hz {
            cdf.bandwidth = w;
        }
        if let Some(g) = t.sinr_grid_db {
            cdf.sinr_grid_db = g;
        }
        if let Some(g) = t.delay_grid_s {
            cdf.delay_grid = g;
        }
    }

    if let Some(bands) = &overrides.bands {
        c.bands = bands
            .iter()
            .map(|&f| band_from_entry(&BandEntry::Carrier(f), rayleigh))
            .collect();
    }
    if let Some(d) = &overrides.densities {
        c.densities = d.clone();
    }
    if let Some(a) = &overrides.alphas {
        c.alphas = a.clone();
    }
    if let Some(r) = &overrides.regimes {
        c.regimes = r.clone();
    }
    if let Some(m) = &overrides.modes {
        c.modes = m.clone();
    }
    if let Some(n) = overrides.samples {
        c.n_samples = n;
    }
    if let Some(s) = overrides.seed {
        c.master_seed = s;
    }

    c.validate()?;
    cdf.validate()?;
    let warnings = pairing_warnings(&c.bands);
    Ok(RunConfig {
        campaign: c,
        cdf,
        warnings,
    })
}

/// Reads and parses a TOML config file. A missing path means all defaults.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::config("config", format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    parse_config_str(&text, overrides).map_err(|e| match (e, path) {
        (Error::Config { field, reason }, Some(p)) if field == "config" => Error::Format {
            path: p.to_path_buf(),
            message: reason,
        },
        (e, _) => e,
    })
}

/// Fully explicit TOML for `config`; parsing it yields `config` back.
pub fn to_toml(config: &RunConfig) -> Result<String> {
    let c = &config.campaign;
    let file = FileConfig {
        seed: Some(SeedValue::from_u64(c.master_seed)),
        samples: Some(c.n_samples),
        densities: Some(c.densities.clone()),
        regimes: Some(c.regimes.clone()),
        modes: Some(c.modes.clone()),
        alphas: Some(c.alphas.clone()),
        delta_bits: Some(c.delta),
        tau_tx_s: Some(c.tau_tx),
        cluster_radius_m: Some(c.cluster_radius),
        rayleigh_fading: None,
        bands: Some(c.bands.iter().map(band_to_entry).collect()),
        cdf: Some(CdfTable {
            bandwidth_hz: Some(config.cdf.bandwidth),
            sinr_grid_db: Some(config.cdf.sinr_grid_db.clone()),
            delay_grid_s: Some(config.cdf.delay_grid.clone()),
        }),
    };
    toml::to_string(&file).map_err(|e| Error::config("config", e.to_string()))
}
