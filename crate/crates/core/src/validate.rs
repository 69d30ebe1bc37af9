//! Quick self-checks behind `urllc-dim validate`: closed-form link budget,
//! TR 38.901 spot values, point-process statistics, quantile selection and
//! run determinism.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::channel::{los_probability, path_loss, sample_shadowing, BandProfile, LinkDraw};
use crate::dimensioning::empirical_quantile;
use crate::engine::{run_campaign, CampaignConfig, CampaignOptions};
use crate::geometry::{sample_ppp, Deployment, Operator, Point2D};
use crate::link::{ConnectivityMode, Regime, Snapshot};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Asymptotic Kolmogorov p-value for statistic `d` over `n` samples.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS distance between `samples` and Uniform(lo, hi).
pub fn ks_uniform(samples: &mut [f64], lo: f64, hi: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Chi-square goodness-of-fit p-value of integer `counts` against
/// Poisson(`mean`), merging tail bins until every expected count is >= 5.
pub fn poisson_chi_square_p(counts: &[usize], mean: f64) -> f64 {
    let n = counts.len() as f64;
    let dist = Poisson::new(mean).expect("positive mean");
    let max = counts.iter().copied().max().unwrap_or(0) + 1;
    let mut observed = vec![0f64; max + 1];
    for &c in counts {
        observed[c] += 1.0;
    }
    // Bin edges grown from the left until expected >= 5.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (k, &obs) in observed.iter().enumerate() {
        o += obs;
        e += if k == max { n * (1.0 - poisson_cdf(&dist, max - 1)) } else { n * dist.pmf(k as u64) };
        if e >= 5.0 {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += o;
        last.1 += e;
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (bins.len() as f64 - 1.0).max(1.0);
    1.0 - ChiSquared::new(df).expect("positive df").cdf(stat)
}

fn poisson_cdf(dist: &Poisson, k: usize) -> f64 {
    (0..=k).map(|j| dist.pmf(j as u64)).sum()
}

fn sort_quantile(v: &[f64], alpha: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = ((alpha * s.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    s[k - 1]
}

pub fn check_quantile_selection(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..instances {
        let n = rng.random_range(10..=100_000);
        let alpha = [0.5, 0.9, 0.999][rng.random_range(0..3)];
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3) * 1e3).collect();
        let q = empirical_quantile(&v, alpha).expect("valid input");
        if q.value != sort_quantile(&v, alpha) {
            mismatches += 1;
        }
    }
    check(
        "quantile selection equals full sort",
        mismatches == 0,
        format!("{mismatches} mismatches over {instances} instances"),
    )
}

pub fn check_link_budget() -> Check {
    let band = BandProfile::mid();
    let d = Deployment::from_points(vec![Point2D::new(100.0, 0.0)], Operator::A, 30.0, 2.0);
    let pl = path_loss(100.0, true, &band).expect("valid distance");
    let link = LinkDraw {
        d2d: 100.0,
        d3d: band.d3d(100.0),
        los: true,
        path_loss: pl,
        shadowing: 0.0,
        tx_gain: 0.0,
        rx_gain: 0.0,
        fading: 1.0,
        clamped: false,
    };
    let snr_db = Snapshot::from_links(&d, &band, vec![link])
        .and_then(|s| s.evaluate(ConnectivityMode::Single, None))
        .map(|s| s.gamma_db())
        .unwrap_or(f64::NAN);
    check(
        "link budget at 100 m, 4 GHz, LOS",
        (snr_db - 65.74).abs() <= 0.01,
        format!("SNR {snr_db:.4} dB (expected 65.74 ± 0.01)"),
    )
}

pub fn check_channel_spot_values(draws: usize) -> Check {
    let p63 = los_probability(63.0).unwrap_or(f64::NAN);
    let mut worst_gap: f64 = 0.0;
    for band in [BandProfile::low(), BandProfile::mid(), BandProfile::high()] {
        let bp = band.breakpoint_distance();
        let below = path_loss(bp * (1.0 - 1e-12), true, &band).unwrap_or(f64::NAN);
        let above = path_loss(bp * (1.0 + 1e-12), true, &band).unwrap_or(f64::NAN);
        worst_gap = worst_gap.max((below - above).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5AD0);
    let mut sigmas = [0.0; 2];
    for (slot, los) in sigmas.iter_mut().zip([true, false]) {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let x = sample_shadowing(los, &mut rng);
            s += x;
            s2 += x * x;
        }
        let mean = s / draws as f64;
        *slot = (s2 / draws as f64 - mean * mean).sqrt();
    }
    let passed = (p63 - 0.5485).abs() <= 1e-4
        && worst_gap < 1e-6
        && (sigmas[0] - 4.0).abs() <= 0.05
        && (sigmas[1] - 6.0).abs() <= 0.05;
    check(
        "TR 38.901 spot checks",
        passed,
        format!(
            "P_LOS(63 m) = {p63:.5}, breakpoint gap {worst_gap:.2e} dB, sigma LOS {:.4} dB, NLOS {:.4} dB",
            sigmas[0], sigmas[1]
        ),
    )
}

pub fn check_ppp_statistics(draws: usize, seed: u64) -> Check {
    let (density, radius) = (30.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(draws);
    let mut angles = Vec::new();
    for _ in 0..draws {
        let d = sample_ppp(density, radius, &mut rng).expect("valid parameters");
        counts.push(d.len());
        angles.extend(d.points.iter().map(|p| p.y.atan2(p.x).rem_euclid(2.0 * PI)));
    }
    let chi_p = poisson_chi_square_p(&counts, density * PI * radius * radius);
    let n_angles = angles.len();
    let ks_d = ks_uniform(&mut angles, 0.0, 2.0 * PI);
    let ks_p = ks_p_value(ks_d, n_angles);
    check(
        "PPP count and isotropy",
        chi_p > 0.01 && ks_p > 0.01,
        format!("chi-square p = {chi_p:.4}, angular KS p = {ks_p:.4}"),
    )
}

pub fn check_determinism(samples: u64) -> Check {
    let config = CampaignConfig {
        bands: vec![BandProfile::high()],
        densities: vec![30.0],
        regimes: vec![Regime::InterferenceLimited],
        modes: vec![ConnectivityMode::Single],
        alphas: vec![0.9, 0.99],
        n_samples: samples,
        ..CampaignConfig::default()
    };
    let run = |workers| {
        run_campaign(&config, &CampaignOptions { workers, ..Default::default() })
            .map(|o| o.rows.iter().map(|r| (r.bandwidth, r.ci_low, r.ci_high)).collect::<Vec<_>>())
    };
    let (a, b) = (run(1), run(16));
    let same = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);
    check("1 vs 16 workers give identical results", same, format!("{samples} samples per run"))
}

/// Runs every check. `quick` shrinks sample counts for a fast smoke test.
pub fn run_all(quick: bool) -> Vec<Check> {
    let scale = if quick { 10 } else { 1 };
    vec![
        check_quantile_selection(200 / scale, 1),
        check_link_budget(),
        check_channel_spot_values(1_000_000 / scale),
        check_ppp_statistics(10_000 / scale, 2),
        check_determinism(20_000 / scale as u64),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        for c in run_all(true) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn ks_detects_non_uniform() {
        let mut v: Vec<f64> = (0..1000).map(|i| (i as f64 / 1000.0).powi(2)).collect();
        let d = ks_uniform(&mut v, 0.0, 1.0);
        assert!(ks_p_value(d, 1000) < 1e-6);
    }

    #[test]
    fn chi_square_detects_wrong_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let counts: Vec<usize> = (0..5000)
            .map(|_| sample_ppp(30.0, 1.0, &mut rng).unwrap().len())
            .collect();
        assert!(poisson_chi_square_p(&counts, 30.0 * PI) > 0.001);
        assert!(poisson_chi_square_p(&counts, 100.0) < 1e-6);
    }
}
