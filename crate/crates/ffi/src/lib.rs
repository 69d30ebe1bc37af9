//! C ABI over `urllc_dim`.
//!
//! Every fallible function returns a [`UrllcStatus`]; on failure the message
//! is kept per thread and read back with [`urllc_last_error`]. Campaigns live
//! behind the opaque [`UrllcCampaign`] handle, which must be released with
//! [`urllc_campaign_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use urllc_dim::config::{parse_config_str, Overrides, RunConfig};
use urllc_dim::dimensioning::{dimension_bandwidth, required_bandwidth_sample, tx_delay, ReliabilitySpec};
use urllc_dim::engine::{run_campaign, CampaignOptions, CampaignOutput, ResultRow};
use urllc_dim::link::{ConnectivityMode, Regime};
use urllc_dim::output::{emit_results, Tables};
use urllc_dim::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrllcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    EmptyDeployment = 4,
    Io = 5,
    /// The campaign was not run yet.
    NotRun = 6,
    /// The campaign stopped at a failing cell; rows before it are valid.
    Incomplete = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrllcRegime {
    Noise = 0,
    Interference = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrllcMode {
    Single = 0,
    MultiConnectivity = 1,
    MultiOperator = 2,
    MultiOperatorUnclustered = 3,
}

/// Dimensioned bandwidth of one sample set.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UrllcDimension {
    /// Hz.
    pub bandwidth: f64,
    /// 95% order-statistic interval, Hz.
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: u64,
    /// Nonzero when fewer than 10/(1 - alpha) samples were given.
    pub undersampled: u8,
}

/// One row of the bandwidth-vs-density table.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UrllcRow {
    pub carrier_hz: f64,
    pub array_side: u32,
    pub density_per_km2: f64,
    pub regime: UrllcRegime,
    pub mode: UrllcMode,
    pub alpha: f64,
    pub bandwidth_hz: f64,
    pub ci_low_hz: f64,
    pub ci_high_hz: f64,
    pub n_samples: u64,
    pub resample_count: u64,
    pub clamped_links: u64,
    pub runtime_s: f64,
    pub undersampled: u8,
}

/// Opaque campaign handle.
pub struct UrllcCampaign {
    config: RunConfig,
    workers: usize,
    output: Option<CampaignOutput>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(UrllcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter { .. } => UrllcStatus::InvalidArgument,
            Error::EmptyDeployment(_) => UrllcStatus::EmptyDeployment,
            Error::Config { .. } | Error::Format { .. } => UrllcStatus::Config,
            Error::Io { .. } => UrllcStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(UrllcStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UrllcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UrllcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            UrllcStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(UrllcStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn handle<'a>(h: *mut UrllcCampaign) -> Result<&'a mut UrllcCampaign, Failure> {
    h.as_mut().ok_or_else(|| null("campaign"))
}

fn spec(delta: f64, tau_tx: f64, alpha: f64) -> Result<ReliabilitySpec, Failure> {
    Ok(ReliabilitySpec::new(delta, tau_tx, alpha)?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn urllc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and returns the buffer size needed to hold
/// it, including the NUL. Returns 0 when no error has been recorded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn urllc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Bandwidth (Hz) needed to send `delta_bits` within `tau_tx_s` seconds at
/// linear SINR `gamma`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn urllc_required_bandwidth(delta_bits: f64, tau_tx_s: f64, gamma: f64, out: *mut f64) -> UrllcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = ReliabilitySpec {
            delta: delta_bits,
            tau_tx: tau_tx_s,
            ..ReliabilitySpec::default()
        };
        spec.validate()?;
        *out = required_bandwidth_sample(&spec, gamma)?;
        Ok(())
    })
}

/// Transmission delay (s) of `delta_bits` over bandwidth `w_hz` at linear
/// SINR `gamma`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn urllc_tx_delay(delta_bits: f64, w_hz: f64, gamma: f64, out: *mut f64) -> UrllcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = tx_delay(delta_bits, w_hz, gamma)?;
        Ok(())
    })
}

/// Dimensions bandwidth from `n` linear SINR samples.
///
/// # Safety
/// `gammas` must point to `n` readable doubles; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn urllc_dimension_bandwidth(
    gammas: *const f64,
    n: usize,
    delta_bits: f64,
    tau_tx_s: f64,
    alpha: f64,
    out: *mut UrllcDimension,
) -> UrllcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if gammas.is_null() {
            return Err(null("gammas"));
        }
        let samples = std::slice::from_raw_parts(gammas, n);
        let r = dimension_bandwidth(samples, &spec(delta_bits, tau_tx_s, alpha)?)?;
        *out = UrllcDimension {
            bandwidth: r.bandwidth,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            n_samples: r.n_samples as u64,
            undersampled: r.undersampled as u8,
        };
        Ok(())
    })
}

/// Creates a campaign from TOML text in the CLI's config format. An empty
/// string gives the default campaign.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn urllc_campaign_new(toml: *const c_char, out: *mut *mut UrllcCampaign) -> UrllcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let text = read_str(toml, "toml")?;
        let config = parse_config_str(text, &Overrides::default())?;
        *out = Box::into_raw(Box::new(UrllcCampaign {
            config,
            workers: 0,
            output: None,
        }));
        Ok(())
    })
}

/// Releases a campaign. Null is ignored.
///
/// # Safety
/// `campaign` must come from [`urllc_campaign_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn urllc_campaign_free(campaign: *mut UrllcCampaign) {
    if !campaign.is_null() {
        drop(Box::from_raw(campaign));
    }
}

/// Overrides the number of experiments per cell.
///
/// # Safety
/// `campaign` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn urllc_campaign_set_samples(campaign: *mut UrllcCampaign, n_samples: u64) -> UrllcStatus {
    guard(|| {
        let c = handle(campaign)?;
        let mut next = c.config.campaign.clone();
        next.n_samples = n_samples;
        next.validate()?;
        c.config.campaign = next;
        c.output = None;
        Ok(())
    })
}

/// Overrides the master seed.
///
/// # Safety
/// `campaign` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn urllc_campaign_set_seed(campaign: *mut UrllcCampaign, seed: u64) -> UrllcStatus {
    guard(|| {
        let c = handle(campaign)?;
        c.config.campaign.master_seed = seed;
        c.output = None;
        Ok(())
    })
}

/// Sets the worker-thread count; 0 uses every core. Results do not depend on
/// it.
///
/// # Safety
/// `campaign` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn urllc_campaign_set_workers(campaign: *mut UrllcCampaign, workers: usize) -> UrllcStatus {
    guard(|| {
        handle(campaign)?.workers = workers;
        Ok(())
    })
}

/// Number of (band, density, regime, mode) cells the campaign will run.
///
/// # Safety
/// `campaign` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn urllc_campaign_cell_count(campaign: *const UrllcCampaign, out: *mut usize) -> UrllcStatus {
    guard(|| {
        let c = campaign.as_ref().ok_or_else(|| null("campaign"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = c.config.campaign.cells().len();
        Ok(())
    })
}

/// Runs every cell. Returns `Incomplete` if a cell fails; rows of the cells
/// before it stay readable.
///
/// # Safety
/// `campaign` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn urllc_campaign_run(campaign: *mut UrllcCampaign) -> UrllcStatus {
    guard(|| {
        let c = handle(campaign)?;
        let options = CampaignOptions {
            workers: c.workers,
            ..CampaignOptions::default()
        };
        let output = run_campaign(&c.config.campaign, &options)?;
        let failure = output.failure.as_ref().map(|f| f.message.clone());
        c.output = Some(output);
        match failure {
            Some(message) => Err(Failure(UrllcStatus::Incomplete, message)),
            None => Ok(()),
        }
    })
}

/// Number of result rows (cells × alphas) available after a run.
///
/// # Safety
/// `campaign` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn urllc_campaign_row_count(campaign: *const UrllcCampaign, out: *mut usize) -> UrllcStatus {
    guard(|| {
        let c = campaign.as_ref().ok_or_else(|| null("campaign"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let output = c.output.as_ref().ok_or_else(not_run)?;
        *out = output.rows.len();
        Ok(())
    })
}

/// Copies row `index` into `out`.
///
/// # Safety
/// `campaign` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn urllc_campaign_row(campaign: *const UrllcCampaign, index: usize, out: *mut UrllcRow) -> UrllcStatus {
    guard(|| {
        let c = campaign.as_ref().ok_or_else(|| null("campaign"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rows = &c.output.as_ref().ok_or_else(not_run)?.rows;
        let row = rows.get(index).ok_or_else(|| {
            Failure(
                UrllcStatus::InvalidArgument,
                format!("row {index} out of range ({} rows)", rows.len()),
            )
        })?;
        *out = to_c_row(row);
        Ok(())
    })
}

/// Writes `bandwidth_vs_density.csv` and `manifest.json` into `out_dir`.
///
/// # Safety
/// `campaign` must be a live handle; `out_dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn urllc_campaign_write(campaign: *const UrllcCampaign, out_dir: *const c_char) -> UrllcStatus {
    guard(|| {
        let c = campaign.as_ref().ok_or_else(|| null("campaign"))?;
        let dir = read_str(out_dir, "out_dir")?;
        let output = c.output.as_ref().ok_or_else(not_run)?;
        let tables = Tables {
            bandwidth: true,
            cdf: false,
        };
        emit_results(Path::new(dir), "dimension", &c.config, output, tables)?;
        Ok(())
    })
}

fn not_run() -> Failure {
    Failure(UrllcStatus::NotRun, "campaign has not been run".into())
}

fn to_c_row(row: &ResultRow) -> UrllcRow {
    UrllcRow {
        carrier_hz: row.band,
        array_side: row.array_side,
        density_per_km2: row.density,
        regime: match row.regime {
            Regime::NoiseLimited => UrllcRegime::Noise,
            Regime::InterferenceLimited => UrllcRegime::Interference,
        },
        mode: match row.mode {
            ConnectivityMode::Single => UrllcMode::Single,
            ConnectivityMode::MultiConnectivity => UrllcMode::MultiConnectivity,
            ConnectivityMode::MultiOperator => UrllcMode::MultiOperator,
            ConnectivityMode::MultiOperatorUnclustered => UrllcMode::MultiOperatorUnclustered,
        },
        alpha: row.alpha,
        bandwidth_hz: row.bandwidth,
        ci_low_hz: row.ci_low,
        ci_high_hz: row.ci_high,
        n_samples: row.n_samples,
        resample_count: row.resample_count,
        clamped_links: row.clamped_links,
        runtime_s: row.runtime,
        undersampled: row.undersampled as u8,
    }
}
