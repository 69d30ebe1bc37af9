//! CSV result tables and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back parses to the identical `f64`. The manifest is written before
//! any CSV is moved into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{to_toml, RunConfig};
use crate::engine::{CampaignConfig, CampaignOutput, CdfRequest, Cell, CellCdf, ResultRow};
use crate::error::{Error, Result};
use crate::geometry::{MIN_EXPECTED_BS, MIN_WINDOW_RADIUS_KM};

pub const BANDWIDTH_FILE: &str = "bandwidth_vs_density.csv";
pub const SINR_CDF_FILE: &str = "sinr_cdf.csv";
pub const DELAY_CDF_FILE: &str = "delay_cdf.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const BANDWIDTH_HEADER: [&str; 11] = [
    "band_hz",
    "density_per_km2",
    "regime",
    "mode",
    "alpha",
    "n_samples",
    "bandwidth_hz",
    "ci_low_hz",
    "ci_high_hz",
    "aggregate_bandwidth_hz",
    "undersampled",
];
pub const SINR_CDF_HEADER: [&str; 5] = ["band_hz", "density_per_km2", "regime", "sinr_db", "cdf"];
pub const DELAY_CDF_HEADER: [&str; 5] = ["band_hz", "density_per_km2", "w_hz", "delay_s", "cdf"];

/// Which tables a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tables {
    pub bandwidth: bool,
    pub cdf: bool,
}

#[derive(Debug, Serialize)]
struct ModelConstants {
    noise_model: String,
    window_rule: String,
    interferer_mobile_rule: &'static str,
    association: &'static str,
    fading: String,
    shadowing_sigma_db: [f64; 2],
    distance_clamp_m: [f64; 2],
    quantile: &'static str,
    confidence_interval: &'static str,
    seeding: &'static str,
    multi_operator_split: &'static str,
}

fn model_constants(config: &CampaignConfig) -> ModelConstants {
    let noise = config
        .bands
        .iter()
        .map(|b| {
            format!(
                "{} Hz: noise floor {} dBm + noise figure {} dB = {} dBm, independent of bandwidth",
                b.carrier_frequency,
                b.noise_floor,
                b.noise_figure,
                b.noise_power_dbm()
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    ModelConstants {
        noise_model: noise,
        window_rule: format!(
            "disk centred on the user, radius max({MIN_WINDOW_RADIUS_KM} km, sqrt({MIN_EXPECTED_BS} / (pi * density)))"
        ),
        interferer_mobile_rule: "one mobile per BS, uniform on a disk of radius sqrt(1 / (pi * operator density)) around it; beam steered at it",
        association: "highest average received power (path loss and shadowing, boresight gain); ties to lowest index",
        fading: format!(
            "lognormal shadowing and {}, independent per link",
            config
                .bands
                .iter()
                .map(|b| format!(
                    "{} Rayleigh power gain at {} Hz",
                    if b.rayleigh_fading { "Exp(1)" } else { "no" },
                    b.carrier_frequency
                ))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        shadowing_sigma_db: [crate::channel::SHADOWING_SIGMA_LOS_DB, crate::channel::SHADOWING_SIGMA_NLOS_DB],
        distance_clamp_m: [crate::channel::MIN_D2D_M, crate::channel::MAX_D2D_M],
        quantile: "ceil(alpha * n)-th order statistic of 1 / log2(1 + SINR)",
        confidence_interval: "95% distribution-free binomial order-statistic interval",
        seeding: "ChaCha8 keyed by SHA-256(master seed, band, density, deployment family, stage); stream id = experiment index",
        multi_operator_split: "total density split evenly between operators A and B",
    }
}

#[derive(Debug, Serialize)]
struct CellRecord {
    band_hz: f64,
    array_side: u32,
    density_per_km2: f64,
    regime: String,
    mode: String,
    runtime_s: f64,
    resample_count: u64,
    clamped_links: u64,
}

#[derive(Debug, Serialize)]
struct FailureRecord {
    band_hz: f64,
    density_per_km2: f64,
    regime: String,
    mode: String,
    message: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    master_seed: u64,
    /// Feeding this back through `--config` reproduces the run.
    config_toml: String,
    campaign: &'a CampaignConfig,
    cdf: Option<&'a CdfRequest>,
    model: ModelConstants,
    cells: Vec<CellRecord>,
    failure: Option<FailureRecord>,
    files: Vec<&'static str>,
}

fn cell_records(rows: &[ResultRow]) -> Vec<CellRecord> {
    let mut out: Vec<CellRecord> = Vec::new();
    for r in rows {
        let same = out.last().is_some_and(|c| {
            c.band_hz == r.band
                && c.array_side == r.array_side
                && c.density_per_km2 == r.density
                && c.regime == r.regime.as_str()
                && c.mode == r.mode.as_str()
        });
        if !same {
            out.push(CellRecord {
                band_hz: r.band,
                array_side: r.array_side,
                density_per_km2: r.density,
                regime: r.regime.to_string(),
                mode: r.mode.to_string(),
                runtime_s: r.runtime,
                resample_count: r.resample_count,
                clamped_links: r.clamped_links,
            });
        }
    }
    out
}

fn bandwidth_csv(rows: &[ResultRow], failure: Option<(&Cell, u64)>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::config("csv", e.to_string());
    w.write_record(BANDWIDTH_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.band.to_string(),
            r.density.to_string(),
            r.regime.to_string(),
            r.mode.to_string(),
            r.alpha.to_string(),
            r.n_samples.to_string(),
            r.bandwidth.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.aggregate_bandwidth().to_string(),
            r.undersampled.to_string(),
        ])
        .map_err(csv_err)?;
    }
    if let Some((cell, n)) = failure {
        w.write_record([
            cell.band.carrier_frequency.to_string(),
            cell.density.to_string(),
            cell.regime.to_string(),
            cell.mode.to_string(),
            String::new(),
            n.to_string(),
            "NaN".into(),
            "NaN".into(),
            "NaN".into(),
            "NaN".into(),
            "failed".into(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::config("csv", e.to_string()))
}

fn sinr_csv(cdfs: &[CellCdf]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::config("csv", e.to_string());
    w.write_record(SINR_CDF_HEADER).map_err(csv_err)?;
    for c in cdfs {
        for (x, p) in &c.sinr {
            w.write_record([
                c.cell.band.carrier_frequency.to_string(),
                c.cell.density.to_string(),
                c.cell.regime.to_string(),
                x.to_string(),
                p.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::config("csv", e.to_string()))
}

fn delay_csv(cdfs: &[CellCdf]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::config("csv", e.to_string());
    w.write_record(DELAY_CDF_HEADER).map_err(csv_err)?;
    for c in cdfs {
        for (x, p) in &c.delay {
            w.write_record([
                c.cell.band.carrier_frequency.to_string(),
                c.cell.density.to_string(),
                c.bandwidth.to_string(),
                x.to_string(),
                p.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::config("csv", e.to_string()))
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.partial"));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the manifest and the requested tables into `out_dir`, returning
/// the paths written.
pub fn emit_results(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    output: &CampaignOutput,
    tables: Tables,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();
    if tables.bandwidth {
        files.push(BANDWIDTH_FILE);
    }
    if tables.cdf {
        files.push(SINR_CDF_FILE);
        files.push(DELAY_CDF_FILE);
    }
    let campaign = &config.campaign;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        master_seed: campaign.master_seed,
        config_toml: to_toml(config)?,
        campaign,
        cdf: tables.cdf.then_some(&config.cdf),
        model: model_constants(campaign),
        cells: cell_records(&output.rows),
        failure: output.failure.as_ref().map(|f| FailureRecord {
            band_hz: f.cell.band.carrier_frequency,
            density_per_km2: f.cell.density,
            regime: f.cell.regime.to_string(),
            mode: f.cell.mode.to_string(),
            message: f.message.clone(),
        }),
        files: files.clone(),
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::config("manifest", e.to_string()))?;
    let mut written = vec![write_atomic(out_dir, MANIFEST_FILE, &json)?];

    if tables.bandwidth {
        let failure = output.failure.as_ref().map(|f| (&f.cell, campaign.n_samples));
        written.push(write_atomic(out_dir, BANDWIDTH_FILE, &bandwidth_csv(&output.rows, failure)?)?);
    }
    if tables.cdf {
        written.push(write_atomic(out_dir, SINR_CDF_FILE, &sinr_csv(&output.cdfs)?)?);
        written.push(write_atomic(out_dir, DELAY_CDF_FILE, &delay_csv(&output.cdfs)?)?);
    }
    Ok(written)
}
