//! Mapping SINR samples onto bandwidth requirements.
//!
//! The transmission delay of `delta` bits over bandwidth `w` at SINR `gamma`
//! is `delta / (w * log2(1 + gamma))`. Meeting the deadline `tau_tx` with
//! probability `alpha` therefore needs
//! `w = delta / tau_tx * Q_alpha(1 / log2(1 + gamma))`, where `Q_alpha` is the
//! empirical `alpha`-quantile over the Monte Carlo samples.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};

/// Two-sided confidence level of the order-statistic interval.
pub const CONFIDENCE_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilitySpec {
    /// Payload, bits.
    pub delta: f64,
    /// Transmission deadline, seconds.
    pub tau_tx: f64,
    /// Required success probability.
    pub alpha: f64,
}

impl Default for ReliabilitySpec {
    /// 32 bytes within 1 ms at 99.999 %.
    fn default() -> Self {
        ReliabilitySpec {
            delta: 256.0,
            tau_tx: 1e-3,
            alpha: 0.99999,
        }
    }
}

impl ReliabilitySpec {
    pub fn new(delta: f64, tau_tx: f64, alpha: f64) -> Result<Self> {
        let spec = ReliabilitySpec { delta, tau_tx, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid("delta", format!("must be > 0, got {}", self.delta)));
        }
        if !(self.tau_tx.is_finite() && self.tau_tx > 0.0) {
            return Err(Error::invalid("tau_tx", format!("must be > 0, got {}", self.tau_tx)));
        }
        check_alpha(self.alpha)
    }

    /// `delta / tau_tx`, the bit rate the deadline implies, in bit/s.
    pub fn rate(&self) -> f64 {
        self.delta / self.tau_tx
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Rounds values within float noise of an integer before taking the ceiling,
/// so that e.g. `0.9 * 100` gives 90 and `10 / (1 - 0.9)` gives 100.
fn ceil_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Smallest sample count for which the `alpha`-quantile is considered
/// adequately sampled: `ceil(10 / (1 - alpha))`.
pub fn min_samples(alpha: f64) -> u64 {
    ceil_snapped(10.0 / (1.0 - alpha)) as u64
}

pub fn is_undersampled(n: usize, alpha: f64) -> bool {
    (n as u64) < min_samples(alpha)
}

#[inline]
fn spectral_efficiency(gamma: f64) -> f64 {
    gamma.ln_1p() / std::f64::consts::LN_2
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::invalid("gamma", format!("SINR must be > 0, got {gamma}")));
    }
    Ok(())
}

/// Transmission delay in seconds.
pub fn tx_delay(delta: f64, w: f64, gamma: f64) -> Result<f64> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::invalid("delta", format!("must be > 0, got {delta}")));
    }
    if w.is_nan() || w <= 0.0 {
        return Err(Error::invalid("w", format!("bandwidth must be > 0, got {w}")));
    }
    check_gamma(gamma)?;
    Ok(delta / (w * spectral_efficiency(gamma)))
}

/// Bandwidth (Hz) that delivers the payload within the deadline at `gamma`.
pub fn required_bandwidth_sample(spec: &ReliabilitySpec, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(spec.rate() / spectral_efficiency(gamma))
}

/// `1 / log2(1 + gamma)`.
pub fn inverse_efficiency(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(1.0 / spectral_efficiency(gamma))
}

/// Empirical quantile with its distribution-free confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantile {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub undersampled: bool,
}

/// 1-based order-statistic ranks `(low, point, high)` for the
/// `alpha`-quantile of `n` samples. The point rank is `ceil(alpha * n)`; the
/// interval ranks bracket it with binomial tail mass of at most
/// `(1 - CONFIDENCE_LEVEL) / 2` on each side.
pub fn quantile_ranks(n: usize, alpha: f64) -> (usize, usize, usize) {
    let k = (ceil_snapped(alpha * n as f64) as usize).clamp(1, n);
    let tail = 0.5 * (1.0 - CONFIDENCE_LEVEL);
    let binom = match Binomial::new(alpha, n as u64) {
        Ok(b) => b,
        Err(_) => return (k, k, k),
    };
    // Largest m with P(B <= m) <= tail; the lower rank is m + 1.
    let low = {
        let (mut lo, mut hi) = (0u64, n as u64);
        if binom.cdf(0) > tail {
            1
        } else {
            // invariant: cdf(lo) <= tail < cdf(hi) or hi == n
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if binom.cdf(mid) <= tail {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo as usize + 1
        }
    };
    // Smallest m with P(B <= m) >= 1 - tail; the upper rank is m + 1.
    let high = {
        let (mut lo, mut hi) = (0u64, n as u64);
        if binom.cdf(0) >= 1.0 - tail {
            1
        } else {
            // invariant: cdf(lo) < 1 - tail <= cdf(hi)
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if binom.cdf(mid) >= 1.0 - tail {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi as usize + 1
        }
    };
    (low.clamp(1, k), k, high.clamp(k, n))
}

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.total_cmp(b)
}

/// Quantile by selection, reordering `samples` in place.
pub fn empirical_quantile_in_place(samples: &mut [f64], alpha: f64) -> Result<Quantile> {
    check_alpha(alpha)?;
    let n = samples.len();
    if n == 0 {
        return Err(Error::invalid("samples", "empty sample set"));
    }
    if let Some(bad) = samples.iter().find(|x| x.is_nan()) {
        return Err(Error::invalid("samples", format!("non-numeric sample {bad}")));
    }
    let (low, k, high) = quantile_ranks(n, alpha);
    let (_, hi_val, _) = samples.select_nth_unstable_by(high - 1, cmp_f64);
    let ci_high = *hi_val;
    let head = &mut samples[..high - 1];
    let value = if k < high {
        *head.select_nth_unstable_by(k - 1, cmp_f64).1
    } else {
        ci_high
    };
    let head = &mut samples[..k - 1];
    let ci_low = if low < k {
        *head.select_nth_unstable_by(low - 1, cmp_f64).1
    } else {
        value
    };
    Ok(Quantile {
        value,
        ci_low,
        ci_high,
        n,
        undersampled: is_undersampled(n, alpha),
    })
}

/// `ceil(alpha * n)`-th order statistic of `samples`, with a 95 %
/// order-statistic confidence interval.
pub fn empirical_quantile(samples: &[f64], alpha: f64) -> Result<Quantile> {
    let mut buf = samples.to_vec();
    empirical_quantile_in_place(&mut buf, alpha)
}

// Log-spaced histogram used by the streaming quantile.
const HIST_BINS: usize = 1 << 16;
const HIST_LOG_MIN: f64 = -12.0;
const HIST_LOG_MAX: f64 = 12.0;

fn hist_bin(x: f64) -> usize {
    // Bin 0 catches x <= 1e-12 (and non-positive values), the last bin the
    // overflow.
    if x.is_nan() || x <= 0.0 {
        return 0;
    }
    let t = (x.log10() - HIST_LOG_MIN) / (HIST_LOG_MAX - HIST_LOG_MIN);
    if t <= 0.0 {
        0
    } else if t >= 1.0 {
        HIST_BINS + 1
    } else {
        1 + ((t * HIST_BINS as f64) as usize).min(HIST_BINS - 1)
    }
}

/// Same result as [`empirical_quantile`] without holding every sample.
///
/// `source` must replay the identical sample sequence each time it is called;
/// it is called twice. The first pass histograms the samples, the second keeps
/// only those falling in bins that hold the needed order statistics.
pub fn streaming_quantile<F>(mut source: F, alpha: f64) -> Result<Quantile>
where
    F: FnMut(&mut dyn FnMut(f64)) -> Result<()>,
{
    check_alpha(alpha)?;
    let mut counts = vec![0u64; HIST_BINS + 2];
    let mut n = 0usize;
    let mut nan = false;
    source(&mut |x| {
        nan |= x.is_nan();
        counts[hist_bin(x)] += 1;
        n += 1;
    })?;
    if n == 0 {
        return Err(Error::invalid("samples", "empty sample set"));
    }
    if nan {
        return Err(Error::invalid("samples", "non-numeric sample"));
    }
    let (low, k, high) = quantile_ranks(n, alpha);
    // Bins holding ranks low..=high, and how many samples precede them.
    let mut cum = 0u64;
    let mut first_bin = None;
    let mut last_bin = 0;
    let mut before = 0u64;
    for (b, &c) in counts.iter().enumerate() {
        if first_bin.is_none() && cum + c >= low as u64 {
            first_bin = Some(b);
            before = cum;
        }
        cum += c;
        if cum >= high as u64 {
            last_bin = b;
            break;
        }
    }
    let first_bin = first_bin.unwrap_or(last_bin);
    let mut kept = Vec::new();
    source(&mut |x| {
        let b = hist_bin(x);
        if b >= first_bin && b <= last_bin {
            kept.push(x);
        }
    })?;
    kept.sort_unstable_by(cmp_f64);
    let at = |rank: usize| kept[rank - 1 - before as usize];
    Ok(Quantile {
        value: at(k),
        ci_low: at(low),
        ci_high: at(high),
        n,
        undersampled: is_undersampled(n, alpha),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensioningResult {
    /// Required bandwidth, Hz.
    pub bandwidth: f64,
    /// `Q_alpha(1 / log2(1 + gamma))`.
    pub quantile_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: usize,
    pub alpha: f64,
    pub undersampled: bool,
}

impl DimensioningResult {
    pub fn from_quantile(q: &Quantile, spec: &ReliabilitySpec) -> Self {
        let rate = spec.rate();
        DimensioningResult {
            bandwidth: rate * q.value,
            quantile_value: q.value,
            ci_low: rate * q.ci_low,
            ci_high: rate * q.ci_high,
            n_samples: q.n,
            alpha: spec.alpha,
            undersampled: q.undersampled,
        }
    }
}

/// Maps SINR samples to inverse spectral efficiencies.
pub fn inverse_efficiencies(gammas: &[f64]) -> Result<Vec<f64>> {
    gammas.iter().map(|&g| inverse_efficiency(g)).collect()
}

/// Dimensions bandwidth from inverse spectral efficiencies, reordering the
/// buffer. Lets one buffer serve several reliability targets.
pub fn dimension_from_inverse_efficiency(inv_eff: &mut [f64], spec: &ReliabilitySpec) -> Result<DimensioningResult> {
    spec.validate()?;
    let q = empirical_quantile_in_place(inv_eff, spec.alpha)?;
    Ok(DimensioningResult::from_quantile(&q, spec))
}

/// Minimum bandwidth meeting `spec` over the SINR samples `gammas`.
pub fn dimension_bandwidth(gammas: &[f64], spec: &ReliabilitySpec) -> Result<DimensioningResult> {
    if gammas.is_empty() {
        return Err(Error::invalid("gammas", "empty sample set"));
    }
    let mut inv = inverse_efficiencies(gammas)?;
    dimension_from_inverse_efficiency(&mut inv, spec)
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.iter().any(|x| x.is_nan()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(name, "grid must be strictly increasing"));
    }
    Ok(())
}

/// Empirical CDF of `values` evaluated on `grid`: fraction of values <= x.
fn ecdf_on_grid(mut values: Vec<f64>, grid: &[f64]) -> Vec<(f64, f64)> {
    values.sort_unstable_by(cmp_f64);
    let n = values.len() as f64;
    grid.iter()
        .map(|&x| {
            let count = values.partition_point(|&v| v <= x);
            (x, if n > 0.0 { count as f64 / n } else { 0.0 })
        })
        .collect()
}

/// CDF of the transmission delay at fixed bandwidth `w`, on a grid in seconds.
pub fn delay_cdf(gammas: &[f64], delta: f64, w: f64, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_grid("delay_grid", grid)?;
    let delays = gammas
        .iter()
        .map(|&g| tx_delay(delta, w, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(ecdf_on_grid(delays, grid))
}

/// CDF of the SINR in dB on a dB grid.
pub fn sinr_cdf(gammas: &[f64], grid_db: &[f64]) -> Result<Vec<(f64, f64)>> {
    if gammas.is_empty() {
        return Err(Error::invalid("gammas", "empty sample set"));
    }
    check_grid("sinr_grid", grid_db)?;
    let db = gammas.iter().map(|g| 10.0 * g.log10()).collect();
    Ok(ecdf_on_grid(db, grid_db))
}
