//! Monte Carlo campaigns over bands, densities, regimes and connectivity
//! modes.
//!
//! Every experiment draws from its own ChaCha stream. The stream key is a
//! hash of the master seed and the cell's deployment family; the stream id is
//! the experiment index. Results are therefore independent of worker count
//! and scheduling, and any experiment can be replayed alone.
//!
//! The regime is not part of the key, and single- and multi-connectivity share
//! one deployment family, so those cells see identical deployments, link draws
//! and interferer beams experiment by experiment.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::BandProfile;
use crate::dimensioning::{
    self, delay_cdf, sinr_cdf, streaming_quantile, DimensioningResult, ReliabilitySpec,
};
use crate::error::{Error, Result};
use crate::geometry::{sample_gpp, sample_ppp_tagged, simulation_radius, Deployment, Operator};
use crate::link::{ConnectivityMode, InterferenceField, Regime, Snapshot};

/// Upper bound on deployment resamples per cell.
pub const MAX_RESAMPLES: u64 = 1_000_000;
pub const DEFAULT_SAMPLES: u64 = 30_000_000;
pub const DEFAULT_SEED: u64 = 0x5EED_2022_0001;
/// Radius of the disk around an operator-A site holding its operator-B twin.
pub const DEFAULT_CLUSTER_RADIUS_M: f64 = 50.0;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub bands: Vec<BandProfile>,
    /// BS per km².
    pub densities: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub modes: Vec<ConnectivityMode>,
    /// Payload, bits.
    pub delta: f64,
    /// Deadline, seconds.
    pub tau_tx: f64,
    /// Ascending.
    pub alphas: Vec<f64>,
    pub n_samples: u64,
    pub master_seed: u64,
    /// Metres.
    pub cluster_radius: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            bands: vec![BandProfile::low(), BandProfile::mid(), BandProfile::high()],
            densities: vec![10.0, 20.0, 30.0, 60.0, 90.0, 120.0],
            regimes: vec![Regime::NoiseLimited, Regime::InterferenceLimited],
            modes: vec![ConnectivityMode::Single],
            delta: 256.0,
            tau_tx: 1e-3,
            alphas: vec![0.9, 0.999, 0.99999],
            n_samples: DEFAULT_SAMPLES,
            master_seed: DEFAULT_SEED,
            cluster_radius: DEFAULT_CLUSTER_RADIUS_M,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::config("bands", "at least one band is required"));
        }
        for (i, b) in self.bands.iter().enumerate() {
            b.validate().map_err(|e| Error::config(format!("bands[{i}]"), e.to_string()))?;
        }
        if self.densities.is_empty() {
            return Err(Error::config("densities", "at least one density is required"));
        }
        for (i, &d) in self.densities.iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::config(format!("densities[{i}]"), format!("must be finite and > 0, got {d}")));
            }
        }
        if self.regimes.is_empty() {
            return Err(Error::config("regimes", "at least one regime is required"));
        }
        if self.modes.is_empty() {
            return Err(Error::config("modes", "at least one mode is required"));
        }
        if self.alphas.is_empty() {
            return Err(Error::config("alphas", "at least one alpha is required"));
        }
        for (i, &a) in self.alphas.iter().enumerate() {
            ReliabilitySpec::new(self.delta, self.tau_tx, a).map_err(|e| match e {
                Error::InvalidParameter { name: "alpha", reason } => Error::config(format!("alphas[{i}]"), reason),
                Error::InvalidParameter { name, reason } => Error::config(name, reason),
                other => other,
            })?;
        }
        if self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("alphas", "must be strictly ascending"));
        }
        if self.n_samples == 0 {
            return Err(Error::config("samples", "must be >= 1"));
        }
        if !(self.cluster_radius.is_finite() && self.cluster_radius > 0.0) {
            return Err(Error::config("cluster_radius_m", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Every sweep cell, in output order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut bands = self.bands.clone();
        bands.sort_by(|a, b| {
            a.carrier_frequency
                .total_cmp(&b.carrier_frequency)
                .then(a.array_side.cmp(&b.array_side))
        });
        let mut densities = self.densities.clone();
        densities.sort_by(f64::total_cmp);
        let mut regimes = self.regimes.clone();
        regimes.sort();
        regimes.dedup();
        let mut modes = self.modes.clone();
        modes.sort();
        modes.dedup();
        let mut cells = Vec::new();
        for band in &bands {
            for &density in &densities {
                for &regime in &regimes {
                    for &mode in &modes {
                        cells.push(Cell {
                            band: *band,
                            density,
                            regime,
                            mode,
                            cluster_radius: self.cluster_radius,
                        });
                    }
                }
            }
        }
        cells
    }

    pub fn spec(&self, alpha: f64) -> ReliabilitySpec {
        ReliabilitySpec {
            delta: self.delta,
            tau_tx: self.tau_tx,
            alpha,
        }
    }
}

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub band: BandProfile,
    /// Total BS density, per km².
    pub density: f64,
    pub regime: Regime,
    pub mode: ConnectivityMode,
    pub cluster_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Family {
    Ppp,
    Gpp,
    TwoPpp,
}

impl Cell {
    fn family(&self) -> Family {
        match self.mode {
            ConnectivityMode::Single | ConnectivityMode::MultiConnectivity => Family::Ppp,
            ConnectivityMode::MultiOperator => Family::Gpp,
            ConnectivityMode::MultiOperatorUnclustered => Family::TwoPpp,
        }
    }

    pub fn window_radius(&self) -> Result<f64> {
        simulation_radius(self.density)
    }

    fn sample_deployment(&self, radius: f64, rng: &mut ChaCha8Rng) -> Result<Deployment> {
        match self.family() {
            Family::Ppp => sample_ppp_tagged(self.density, radius, Operator::A, rng),
            Family::Gpp => sample_gpp(self.density, self.cluster_radius, radius, rng),
            Family::TwoPpp => {
                let a = sample_ppp_tagged(0.5 * self.density, radius, Operator::A, rng)?;
                let b = sample_ppp_tagged(0.5 * self.density, radius, Operator::B, rng)?;
                Ok(a.merge(b))
            }
        }
    }
}

/// Key of a counter-based family of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    fn derive(master_seed: u64, cell: &Cell, stage: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"urllc-dim/stream/v1");
        h.update(master_seed.to_le_bytes());
        h.update([cell.family() as u8]);
        h.update(cell.band.carrier_frequency.to_bits().to_le_bytes());
        h.update(cell.band.array_side.to_le_bytes());
        h.update([cell.band.rayleigh_fading as u8]);
        h.update(cell.density.to_bits().to_le_bytes());
        if cell.family() == Family::Gpp {
            h.update(cell.cluster_radius.to_bits().to_le_bytes());
        }
        h.update(stage.as_bytes());
        StreamKey(h.finalize().into())
    }

    /// Random stream of experiment `index`.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(index);
        rng
    }
}

/// Outcome of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experiment {
    pub gamma: f64,
    pub resamples: u64,
    pub clamped_links: u64,
}

/// Stream keys and derived constants of one cell.
#[derive(Debug, Clone)]
pub struct CellRunner {
    pub cell: Cell,
    radius: f64,
    deployment_key: StreamKey,
    mobile_key: StreamKey,
}

impl CellRunner {
    pub fn new(cell: Cell, master_seed: u64) -> Result<Self> {
        cell.band.validate()?;
        Ok(CellRunner {
            radius: cell.window_radius()?,
            deployment_key: StreamKey::derive(master_seed, &cell, "deployment"),
            mobile_key: StreamKey::derive(master_seed, &cell, "mobiles"),
            cell,
        })
    }

    /// Runs experiment `index` in isolation.
    pub fn experiment(&self, index: u64) -> Result<Experiment> {
        let cell = &self.cell;
        let mut rng = self.deployment_key.stream(index);
        let mut resamples = 0u64;
        let deployment = loop {
            let d = cell.sample_deployment(self.radius, &mut rng)?;
            if cell.mode.check_deployment(&d).is_ok() {
                break d;
            }
            resamples += 1;
            if resamples > MAX_RESAMPLES {
                return Err(resample_error(cell));
            }
        };
        let snapshot = Snapshot::draw(&deployment, &cell.band, &mut rng);
        let field = match cell.regime {
            Regime::NoiseLimited => None,
            Regime::InterferenceLimited => {
                Some(InterferenceField::draw(&snapshot, &mut self.mobile_key.stream(index)))
            }
        };
        let sample = snapshot.evaluate(cell.mode, field.as_ref())?;
        Ok(Experiment {
            gamma: sample.gamma,
            resamples,
            clamped_links: snapshot.clamped_links() as u64,
        })
    }

    /// Experiments `start..start + out.len()` written into `out`; returns
    /// (resamples, clamped links).
    fn fill(&self, start: u64, out: &mut [f64]) -> Result<(u64, u64)> {
        let (mut resamples, mut clamped) = (0, 0);
        for (j, slot) in out.iter_mut().enumerate() {
            let e = self.experiment(start + j as u64)?;
            *slot = e.gamma;
            resamples += e.resamples;
            clamped += e.clamped_links;
        }
        Ok((resamples, clamped))
    }
}

fn resample_error(cell: &Cell) -> Error {
    Error::config(
        "densities",
        format!(
            "more than {MAX_RESAMPLES} deployment resamples at density {} for mode {}; density too low",
            cell.density, cell.mode
        ),
    )
}

/// SINR samples of one cell plus diagnostics.
#[derive(Debug, Clone)]
pub struct CellSamples {
    pub cell: Cell,
    /// Linear SINR, indexed by experiment.
    pub gammas: Vec<f64>,
    pub resamples: u64,
    pub clamped_links: u64,
    pub runtime: f64,
}

/// Runs `n_samples` experiments of `cell` on `pool`.
pub fn run_cell(cell: &Cell, n_samples: u64, master_seed: u64, pool: &rayon::ThreadPool) -> Result<CellSamples> {
    if n_samples == 0 {
        return Err(Error::config("samples", "must be >= 1"));
    }
    let runner = CellRunner::new(*cell, master_seed)?;
    let started = Instant::now();
    let mut gammas = vec![0.0; n_samples as usize];
    let totals = pool.install(|| {
        gammas
            .par_chunks_mut(CHUNK)
            .enumerate()
            .map(|(c, out)| runner.fill((c * CHUNK) as u64, out))
            .collect::<Result<Vec<_>>>()
    })?;
    let resamples = totals.iter().map(|t| t.0).sum::<u64>();
    let clamped_links = totals.iter().map(|t| t.1).sum::<u64>();
    if resamples > MAX_RESAMPLES {
        return Err(resample_error(cell));
    }
    let runtime = started.elapsed().as_secs_f64();
    log::info!(
        "cell band={} density={} regime={} mode={}: {} samples in {:.1} s ({:.0} samples/s)",
        cell.band.carrier_frequency,
        cell.density,
        cell.regime,
        cell.mode,
        n_samples,
        runtime,
        n_samples as f64 / runtime.max(1e-9)
    );
    Ok(CellSamples {
        cell: *cell,
        gammas,
        resamples,
        clamped_links,
        runtime,
    })
}

/// One line of the dimensioning table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub band: f64,
    pub array_side: u32,
    pub density: f64,
    pub regime: Regime,
    pub mode: ConnectivityMode,
    pub alpha: f64,
    /// Per-connection bandwidth, Hz.
    pub bandwidth: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: u64,
    pub resample_count: u64,
    pub clamped_links: u64,
    pub runtime: f64,
    pub undersampled: bool,
}

impl ResultRow {
    /// Spectrum summed over all connections.
    pub fn aggregate_bandwidth(&self) -> f64 {
        self.bandwidth * self.mode.connections() as f64
    }
}

/// Grids for the SINR and delay CDFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfRequest {
    /// Fixed bandwidth for the delay CDF, Hz.
    pub bandwidth: f64,
    pub sinr_grid_db: Vec<f64>,
    /// Seconds.
    pub delay_grid: Vec<f64>,
}

impl Default for CdfRequest {
    fn default() -> Self {
        CdfRequest {
            bandwidth: 100e6,
            // -50 dB to 80 dB in 0.5 dB steps.
            sinr_grid_db: (0..=260).map(|i| -50.0 + 0.5 * i as f64).collect(),
            // 1e-7 s to 1 s, 20 points per decade.
            delay_grid: (0..=140).map(|i| 10f64.powf(-7.0 + i as f64 / 20.0)).collect(),
        }
    }
}

impl CdfRequest {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::config("cdf.bandwidth_hz", "must be finite and > 0"));
        }
        for (name, grid) in [("cdf.sinr_grid_db", &self.sinr_grid_db), ("cdf.delay_grid_s", &self.delay_grid)] {
            if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(name, "must be a non-empty, strictly increasing list of finite values"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellCdf {
    pub cell: Cell,
    pub sinr: Vec<(f64, f64)>,
    /// Evaluated at [`CdfRequest::bandwidth`].
    pub delay: Vec<(f64, f64)>,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CampaignOptions {
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub cdf: Option<CdfRequest>,
    /// Regenerate samples for a two-pass streaming quantile instead of
    /// holding them in memory. Incompatible with `cdf`.
    pub low_memory: bool,
}

#[derive(Debug, Clone)]
pub struct CellFailure {
    pub cell: Cell,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct CampaignOutput {
    pub rows: Vec<ResultRow>,
    pub cdfs: Vec<CellCdf>,
    /// Set when a cell failed; rows hold every cell completed before it.
    pub failure: Option<CellFailure>,
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

/// Rows of one cell from its in-memory samples. `gammas` is consumed as
/// scratch space.
pub fn dimension_cell(
    config: &CampaignConfig,
    samples: &mut CellSamples,
) -> Result<Vec<ResultRow>> {
    let inv = &mut samples.gammas;
    for g in inv.iter_mut() {
        *g = dimensioning::inverse_efficiency(*g)?;
    }
    config
        .alphas
        .iter()
        .map(|&alpha| {
            let r = dimensioning::dimension_from_inverse_efficiency(inv, &config.spec(alpha))?;
            Ok(row(config, &samples.cell, &r, samples.resamples, samples.clamped_links, samples.runtime))
        })
        .collect()
}

fn row(
    config: &CampaignConfig,
    cell: &Cell,
    r: &DimensioningResult,
    resamples: u64,
    clamped: u64,
    runtime: f64,
) -> ResultRow {
    ResultRow {
        band: cell.band.carrier_frequency,
        array_side: cell.band.array_side,
        density: cell.density,
        regime: cell.regime,
        mode: cell.mode,
        alpha: r.alpha,
        bandwidth: r.bandwidth,
        ci_low: r.ci_low,
        ci_high: r.ci_high,
        n_samples: config.n_samples,
        resample_count: resamples,
        clamped_links: clamped,
        runtime,
        undersampled: r.undersampled,
    }
}

fn run_cell_streaming(config: &CampaignConfig, cell: &Cell, pool: &rayon::ThreadPool) -> Result<Vec<ResultRow>> {
    let runner = CellRunner::new(*cell, config.master_seed)?;
    let started = Instant::now();
    let n = config.n_samples;
    let block = (CHUNK * 64) as u64;
    let mut resamples = 0;
    let mut clamped = 0;
    let mut rows = Vec::new();
    for (pass, &alpha) in config.alphas.iter().enumerate() {
        let mut counted = false;
        let q = streaming_quantile(
            |emit| {
                let mut buf = vec![0.0; block as usize];
                let mut start = 0u64;
                while start < n {
                    let len = (n - start).min(block) as usize;
                    let out = &mut buf[..len];
                    let totals = pool.install(|| {
                        out.par_chunks_mut(CHUNK)
                            .enumerate()
                            .map(|(c, o)| runner.fill(start + (c * CHUNK) as u64, o))
                            .collect::<Result<Vec<_>>>()
                    })?;
                    if !counted && pass == 0 {
                        resamples += totals.iter().map(|t| t.0).sum::<u64>();
                        clamped += totals.iter().map(|t| t.1).sum::<u64>();
                    }
                    for &g in out.iter() {
                        emit(dimensioning::inverse_efficiency(g)?);
                    }
                    start += len as u64;
                }
                counted = true;
                Ok(())
            },
            alpha,
        )?;
        let r = DimensioningResult::from_quantile(&q, &config.spec(alpha));
        rows.push(row(config, cell, &r, 0, 0, 0.0));
    }
    if resamples > MAX_RESAMPLES {
        return Err(resample_error(cell));
    }
    let runtime = started.elapsed().as_secs_f64();
    for r in &mut rows {
        r.resample_count = resamples;
        r.clamped_links = clamped;
        r.runtime = runtime;
    }
    Ok(rows)
}

fn run_one(
    config: &CampaignConfig,
    options: &CampaignOptions,
    cell: &Cell,
    pool: &rayon::ThreadPool,
) -> Result<(Vec<ResultRow>, Option<CellCdf>)> {
    if options.low_memory {
        return Ok((run_cell_streaming(config, cell, pool)?, None));
    }
    let mut samples = run_cell(cell, config.n_samples, config.master_seed, pool)?;
    let cdf = match &options.cdf {
        Some(req) => Some(CellCdf {
            cell: *cell,
            sinr: sinr_cdf(&samples.gammas, &req.sinr_grid_db)?,
            delay: delay_cdf(&samples.gammas, config.delta, req.bandwidth, &req.delay_grid)?,
            bandwidth: req.bandwidth,
        }),
        None => None,
    };
    Ok((dimension_cell(config, &mut samples)?, cdf))
}

/// Evaluates every sweep cell. One sample set per cell serves all alphas.
/// A failing cell stops the campaign; completed rows are kept in the output
/// alongside the failure.
pub fn run_campaign(config: &CampaignConfig, options: &CampaignOptions) -> Result<CampaignOutput> {
    config.validate()?;
    if options.low_memory && options.cdf.is_some() {
        return Err(Error::config("low_memory", "CDF extraction needs in-memory samples"));
    }
    if let Some(req) = &options.cdf {
        req.validate()?;
    }
    let pool = thread_pool(options.workers)?;
    let mut out = CampaignOutput::default();
    for cell in config.cells() {
        match run_one(config, options, &cell, &pool) {
            Ok((rows, cdf)) => {
                out.rows.extend(rows);
                out.cdfs.extend(cdf);
            }
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => {
                out.failure = Some(CellFailure {
                    cell,
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    Ok(out)
}
