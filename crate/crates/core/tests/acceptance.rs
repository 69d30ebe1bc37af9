//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Criteria 1-10 always run. The full-scale criteria 11-13 take hours on a
//! single core and run only with `-- --ignored` (or `--include-ignored`), or
//! when `URLLC_FULL_SCALE=1`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use urllc_dim::channel::{los_probability, path_loss, sample_shadowing, BandProfile, LinkDraw};
use urllc_dim::dimensioning::empirical_quantile;
use urllc_dim::engine::{run_campaign, run_cell, thread_pool, CampaignConfig, CampaignOptions, Cell, ResultRow};
use urllc_dim::geometry::{sample_ppp, Deployment, Operator, Point2D};
use urllc_dim::link::{ConnectivityMode, Regime, Snapshot};

const DESK_SAMPLES: u64 = 1_000_000;
const FULL_SAMPLES: u64 = 30_000_000;
const SEED: u64 = 0x5EED_2022_0001;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(results: &mut Vec<Outcome>, id: u32, name: &'static str, passed: bool, detail: String) {
    let line = format!("[{}] {id:>2}. {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    println!("{line}");
    let _ = std::io::stdout().flush();
    results.push(Outcome { id, name, passed, detail });
}

fn progress(msg: &str) {
    eprintln!("  .. {msg}");
}

// ---------------------------------------------------------------- oracles

/// k-th order statistic with k = ceil(num/den * n), computed in integers.
fn sort_oracle(v: &[f64], num: u64, den: u64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as u64;
    let k = (num * n).div_ceil(den).max(1);
    s[(k - 1) as usize]
}

/// UMa LOS path loss below the breakpoint, written out by hand.
fn los_pl_near(d2d: f64, fc_ghz: f64) -> f64 {
    let d3d = (d2d * d2d + 23.5 * 23.5).sqrt();
    28.0 + 22.0 * d3d.log10() + 20.0 * fc_ghz.log10()
}

fn los_pl_far(d2d: f64, fc_ghz: f64) -> f64 {
    let d3d = (d2d * d2d + 23.5 * 23.5).sqrt();
    let bp = 4.0 * 24.0 * 0.5 * fc_ghz * 1e9 / 3e8;
    28.0 + 40.0 * d3d.log10() + 20.0 * fc_ghz.log10() - 9.0 * (bp * bp + 23.5 * 23.5).log10()
}

fn ks_statistic_uniform(x: &mut [f64], hi: f64) -> f64 {
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let f = v / hi;
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov distribution tail, Q(λ) = 2 Σ (-1)^(k-1) exp(-2k²λ²).
fn kolmogorov_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let p: f64 = (1..200)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
        })
        .sum();
    (2.0 * p).clamp(0.0, 1.0)
}

/// Pearson chi-square against Poisson(mean) with bins of expected count >= 5.
fn poisson_gof_p(counts: &[usize], mean: f64) -> f64 {
    let dist = Poisson::new(mean).unwrap();
    let n = counts.len() as f64;
    let lo = (mean - 6.0 * mean.sqrt()).floor().max(0.0) as usize;
    let hi = (mean + 6.0 * mean.sqrt()).ceil() as usize;
    // Interior bins [lo, hi] plus two tails; merged greedily afterwards.
    let mut expected: Vec<f64> = Vec::new();
    let mut observed: Vec<f64> = Vec::new();
    let below: f64 = (0..lo).map(|k| dist.pmf(k as u64)).sum();
    expected.push(below * n);
    observed.push(counts.iter().filter(|&&c| c < lo).count() as f64);
    let mut mass = below;
    for k in lo..=hi {
        let p = dist.pmf(k as u64);
        mass += p;
        expected.push(p * n);
        observed.push(counts.iter().filter(|&&c| c == k).count() as f64);
    }
    expected.push((1.0 - mass).max(0.0) * n);
    observed.push(counts.iter().filter(|&&c| c > hi).count() as f64);

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (ob, ex) in observed.into_iter().zip(expected) {
        o += ob;
        e += ex;
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
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    1.0 - ChiSquared::new((bins.len() - 1) as f64).unwrap().cdf(stat)
}

// ---------------------------------------------------------------- oracle suite

fn criterion_1(out: &mut Vec<Outcome>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
    let alphas = [(0.5, 1, 2), (0.9, 9, 10), (0.999, 999, 1000)];
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(10..=100_000usize);
        let (alpha, num, den) = alphas[rng.random_range(0..3)];
        // Heavy ties and a wide dynamic range.
        let v: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.1 {
                    rng.random_range(0..5) as f64
                } else {
                    (rng.random::<f64>() * 40.0 - 20.0).exp()
                }
            })
            .collect();
        let got = empirical_quantile(&v, alpha).unwrap().value;
        if got.to_bits() != sort_oracle(&v, num, den).to_bits() {
            mismatches += 1;
        }
    }
    report(
        out,
        1,
        "quantile selection equals full-sort oracle",
        mismatches == 0,
        format!("{mismatches} mismatches over 200 instances"),
    );
}

fn criterion_2(out: &mut Vec<Outcome>) {
    let band = BandProfile::mid();
    let expected = 49.0 + (8.0 + 10.0 * 16f64.log10()) - los_pl_near(100.0, 4.0) - (-90.0 + 9.0);
    let deployment = Deployment::from_points(vec![Point2D::new(100.0, 0.0)], Operator::A, 30.0, 2.0);
    let link = LinkDraw {
        d2d: 100.0,
        d3d: band.d3d(100.0),
        los: true,
        path_loss: path_loss(100.0, true, &band).unwrap(),
        shadowing: 0.0,
        tx_gain: 0.0,
        rx_gain: 0.0,
        fading: 1.0,
        clamped: false,
    };
    let snr = Snapshot::from_links(&deployment, &band, vec![link])
        .and_then(|s| s.evaluate(ConnectivityMode::Single, None))
        .unwrap()
        .gamma_db();
    report(
        out,
        2,
        "link budget at 100 m, 4 GHz, LOS, no shadowing",
        (snr - 65.74).abs() <= 0.01 && (snr - expected).abs() <= 0.01,
        format!("SNR {snr:.4} dB, hand budget {expected:.4} dB, target 65.74 +/- 0.01"),
    );
}

fn criterion_3(out: &mut Vec<Outcome>) {
    let p63 = los_probability(63.0).unwrap();
    let p63_oracle = 18.0 / 63.0 + (-1.0f64).exp() * (1.0 - 18.0 / 63.0);

    let mut gap: f64 = 0.0;
    let mut oracle_gap: f64 = 0.0;
    for fc in [0.7, 4.0, 30.0] {
        let band = BandProfile::new(fc * 1e9);
        let bp = band.breakpoint_distance();
        let below = path_loss(bp * (1.0 - 1e-13), true, &band).unwrap();
        let above = path_loss(bp * (1.0 + 1e-13), true, &band).unwrap();
        gap = gap.max((below - above).abs());
        if bp < 5000.0 {
            oracle_gap = oracle_gap.max((los_pl_near(bp, fc) - los_pl_far(bp, fc)).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0003);
    let mut sigma = [0.0; 2];
    for (s, los) in sigma.iter_mut().zip([true, false]) {
        let draws: Vec<f64> = (0..1_000_000).map(|_| sample_shadowing(los, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (draws.len() - 1) as f64;
        *s = var.sqrt();
    }
    let passed = (p63 - 0.5485).abs() <= 1e-4
        && (p63 - p63_oracle).abs() <= 1e-12
        && gap < 1e-6
        && oracle_gap < 1e-6
        && (sigma[0] - 4.0).abs() <= 0.05
        && (sigma[1] - 6.0).abs() <= 0.05;
    report(
        out,
        3,
        "TR 38.901 spot checks",
        passed,
        format!(
            "P_LOS(63 m) {p63:.5}; breakpoint gap {gap:.1e} dB (oracle {oracle_gap:.1e}); sigma {:.4}/{:.4} dB",
            sigma[0], sigma[1]
        ),
    );
}

fn criterion_4(out: &mut Vec<Outcome>) {
    let (density, radius) = (30.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0004);
    let mut counts = Vec::with_capacity(10_000);
    let mut angles = Vec::new();
    for _ in 0..10_000 {
        let d = sample_ppp(density, radius, &mut rng).unwrap();
        counts.push(d.len());
        angles.extend(d.points.iter().map(|p| p.y.atan2(p.x).rem_euclid(2.0 * PI)));
    }
    let chi_p = poisson_gof_p(&counts, density * PI * radius * radius);
    let n = angles.len();
    let ks_p = kolmogorov_p(ks_statistic_uniform(&mut angles, 2.0 * PI), n);
    report(
        out,
        4,
        "PPP count and angular uniformity",
        chi_p > 0.01 && ks_p > 0.01,
        format!("chi-square p {chi_p:.4}, KS p {ks_p:.4} over 10^4 draws"),
    );
}

fn criterion_5(out: &mut Vec<Outcome>) {
    let dir = tempfile::tempdir().unwrap();
    let run = |command: &str, workers: u32| {
        let target = dir.path().join(format!("{command}-{workers}"));
        let status = Command::new(env!("CARGO_BIN_EXE_urllc-dim"))
            .args([command, "--band", "30e9", "--density", "20,30", "--regime", "interference"])
            .args(["--mode", "single", "--alpha", "0.9,0.99", "--samples", "20000", "--seed", "77"])
            .arg("--workers")
            .arg(workers.to_string())
            .arg("--out")
            .arg(&target)
            .env("RUST_LOG", "warn")
            .status()
            .unwrap();
        assert!(status.success());
        target
    };
    let mut identical = true;
    let mut compared = 0;
    for (command, files) in [
        ("dimension", &["bandwidth_vs_density.csv"][..]),
        ("cdf", &["sinr_cdf.csv", "delay_cdf.csv"][..]),
    ] {
        let (a, b) = (run(command, 16), run(command, 1));
        for f in files {
            let read = |d: &Path| std::fs::read(d.join(f)).unwrap();
            identical &= read(&a) == read(&b);
            compared += 1;
        }
    }
    report(
        out,
        5,
        "16-worker and 1-worker runs give byte-identical CSVs",
        identical,
        format!("{compared} CSV files compared"),
    );
}

// ---------------------------------------------------------------- desk scale

type Key = (u64, Regime, ConnectivityMode, u64);

fn key(density: f64, regime: Regime, mode: ConnectivityMode, alpha: f64) -> Key {
    (density.to_bits(), regime, mode, alpha.to_bits())
}

struct Table(HashMap<Key, ResultRow>);

impl Table {
    fn w(&self, density: f64, regime: Regime, mode: ConnectivityMode, alpha: f64) -> f64 {
        self.0
            .get(&key(density, regime, mode, alpha))
            .map(|r| r.bandwidth)
            .unwrap_or(f64::NAN)
    }
}

fn campaign(densities: &[f64], regimes: &[Regime], modes: &[ConnectivityMode], alphas: &[f64], n: u64) -> Vec<ResultRow> {
    let config = CampaignConfig {
        bands: vec![BandProfile::high()],
        densities: densities.to_vec(),
        regimes: regimes.to_vec(),
        modes: modes.to_vec(),
        alphas: alphas.to_vec(),
        n_samples: n,
        master_seed: SEED,
        ..CampaignConfig::default()
    };
    let start = Instant::now();
    let output = run_campaign(&config, &CampaignOptions::default()).unwrap();
    assert!(output.failure.is_none(), "{:?}", output.failure);
    progress(&format!(
        "{} cells x {n} samples in {:.0} s",
        config.cells().len(),
        start.elapsed().as_secs_f64()
    ));
    output.rows
}

fn desk_table() -> Table {
    use ConnectivityMode::*;
    use Regime::*;
    let alphas = [0.9, 0.999];
    progress("desk-scale campaign: 30 GHz, noise and interference, lambda in {10, 30, 100}");
    let mut rows = campaign(&[10.0, 30.0, 100.0], &[NoiseLimited, InterferenceLimited], &[Single], &alphas, DESK_SAMPLES);
    progress("desk-scale campaign: 30 GHz, interference, lambda 30, multi-link modes");
    rows.extend(campaign(
        &[30.0],
        &[InterferenceLimited],
        &[MultiConnectivity, MultiOperator, MultiOperatorUnclustered],
        &alphas,
        DESK_SAMPLES,
    ));
    Table(rows.into_iter().map(|r| (key(r.density, r.regime, r.mode, r.alpha), r)).collect())
}

fn criterion_6(out: &mut Vec<Outcome>, t: &Table) {
    use ConnectivityMode::Single;
    let hi = t.w(30.0, Regime::NoiseLimited, Single, 0.999);
    let lo = t.w(30.0, Regime::NoiseLimited, Single, 0.9);
    let ratio = hi / lo;
    report(
        out,
        6,
        "noise-limited tier spread w(0.999)/w(0.9) at lambda 30 in [3, 30]",
        (3.0..=30.0).contains(&ratio),
        format!("{hi:.4e} / {lo:.4e} Hz = {ratio:.3}"),
    );
}

fn criterion_7(out: &mut Vec<Outcome>, t: &Table) {
    let w: Vec<f64> = [10.0, 30.0, 100.0]
        .iter()
        .map(|&d| t.w(d, Regime::NoiseLimited, ConnectivityMode::Single, 0.9))
        .collect();
    let max = w.iter().cloned().fold(f64::NAN, f64::max);
    let min = w.iter().cloned().fold(f64::NAN, f64::min);
    report(
        out,
        7,
        "noise-limited alpha 0.9 varies < 3x over lambda 10..100",
        max / min < 3.0,
        format!("w = {:.4e}, {:.4e}, {:.4e} Hz; spread {:.3}", w[0], w[1], w[2], max / min),
    );
}

fn criterion_8(out: &mut Vec<Outcome>, t: &Table) {
    use ConnectivityMode::Single;
    let mut ordered = true;
    let mut gap_small = true;
    let mut parts = Vec::new();
    for d in [10.0, 30.0, 100.0] {
        for alpha in [0.9, 0.999] {
            let i = t.w(d, Regime::InterferenceLimited, Single, alpha);
            let n = t.w(d, Regime::NoiseLimited, Single, alpha);
            ordered &= i >= n;
            if alpha == 0.9 {
                gap_small &= i / n <= 3.0;
            }
            parts.push(format!("l{d}/a{alpha}: {:.2}", i / n));
        }
    }
    report(
        out,
        8,
        "interference >= noise at every matched cell, ratio <= 3 at alpha 0.9",
        ordered && gap_small,
        format!("interference/noise {}", parts.join(", ")),
    );
}

fn criterion_9(out: &mut Vec<Outcome>, t: &Table) {
    use ConnectivityMode::*;
    let r = Regime::InterferenceLimited;
    let single = t.w(30.0, r, Single, 0.999);
    let mc = t.w(30.0, r, MultiConnectivity, 0.999);
    let mo = t.w(30.0, r, MultiOperator, 0.999);
    let (red_mc, red_mo) = (single / mc, single / mo);
    report(
        out,
        9,
        "single > multiconn > multiop at alpha 0.999, multiconn reduction in [3, 30], multiop larger",
        single > mc && mc > mo && (3.0..=30.0).contains(&red_mc) && red_mo > red_mc,
        format!("w = {single:.4e} / {mc:.4e} / {mo:.4e} Hz; reductions {red_mc:.2}x, {red_mo:.2}x"),
    );
}

fn criterion_10(out: &mut Vec<Outcome>, t: &Table) {
    use ConnectivityMode::*;
    let r = Regime::InterferenceLimited;
    let clustered = t.w(30.0, r, MultiOperator, 0.999);
    let unclustered = t.w(30.0, r, MultiOperatorUnclustered, 0.999);
    let ratio = clustered / unclustered;
    let at_09 = t.w(30.0, r, MultiOperator, 0.9) / t.w(30.0, r, MultiOperatorUnclustered, 0.9);
    report(
        out,
        10,
        "clustered multiop needs >= unclustered bandwidth, ratio <= 2 (alpha 0.999)",
        (1.0..=2.0).contains(&ratio),
        format!("{clustered:.4e} / {unclustered:.4e} Hz = {ratio:.4} (alpha 0.9: {at_09:.4})"),
    );
}

// ---------------------------------------------------------------- full scale

fn full_scale(out: &mut Vec<Outcome>) {
    use ConnectivityMode::*;
    let r = Regime::InterferenceLimited;
    progress("full-scale: interference, lambda 30, single and multiop at 3e7 samples");
    let rows = campaign(&[30.0], &[r], &[Single, MultiOperator], &[0.99999], FULL_SAMPLES);
    let t = Table(rows.into_iter().map(|x| (key(x.density, x.regime, x.mode, x.alpha), x)).collect());
    let single = t.w(30.0, r, Single, 0.99999);
    let mo = t.w(30.0, r, MultiOperator, 0.99999);
    report(
        out,
        11,
        "interference-limited lambda 30 alpha 0.99999 within 3x of 1 GHz",
        (1e9 / 3.0..=3e9).contains(&single),
        format!("w = {single:.4e} Hz"),
    );

    // Fixed-bandwidth reliability: fraction of experiments meeting 1 ms at 100 MHz.
    let pool = thread_pool(0).unwrap();
    let mut smallest = None;
    let mut parts = Vec::new();
    for density in [10.0, 20.0, 30.0, 60.0, 90.0, 120.0] {
        let cell = Cell {
            band: BandProfile::high(),
            density,
            regime: r,
            mode: Single,
            cluster_radius: 50.0,
        };
        let start = Instant::now();
        let samples = run_cell(&cell, FULL_SAMPLES, SEED, &pool).unwrap();
        let met = samples
            .gammas
            .iter()
            .filter(|&&g| 256.0 / (100e6 * (1.0 + g).log2()) <= 1e-3)
            .count();
        let cdf = met as f64 / samples.gammas.len() as f64;
        progress(&format!("lambda {density}: CDF(1 ms) = {cdf:.7} in {:.0} s", start.elapsed().as_secs_f64()));
        parts.push(format!("l{density}: {cdf:.6}"));
        if smallest.is_none() && cdf >= 0.99999 {
            smallest = Some(density);
        }
    }
    report(
        out,
        12,
        "smallest density meeting CDF(1 ms) >= 0.99999 at 100 MHz lies in [30, 120]",
        matches!(smallest, Some(d) if (30.0..=120.0).contains(&d)),
        format!("{smallest:?}; {}", parts.join(", ")),
    );

    report(
        out,
        13,
        "multiop alpha 0.99999 below 30 MHz and >= 30x below single",
        mo < 30e6 && single / mo >= 30.0,
        format!("multiop {mo:.4e} Hz, single {single:.4e} Hz, ratio {:.1}", single / mo),
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    // libtest-style listing so `cargo test -- --list` keeps working.
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let full = args.iter().any(|a| a == "--ignored" || a == "--include-ignored")
        || std::env::var("URLLC_FULL_SCALE").is_ok_and(|v| v == "1");

    let mut out = Vec::new();
    criterion_1(&mut out);
    criterion_2(&mut out);
    criterion_3(&mut out);
    criterion_4(&mut out);
    criterion_5(&mut out);

    let table = desk_table();
    criterion_6(&mut out, &table);
    criterion_7(&mut out, &table);
    criterion_8(&mut out, &table);
    criterion_9(&mut out, &table);
    criterion_10(&mut out, &table);

    if full {
        full_scale(&mut out);
    } else {
        println!("[SKIP] 11-13. full-scale criteria (pass --ignored or set URLLC_FULL_SCALE=1)");
    }

    let failed: Vec<&Outcome> = out.iter().filter(|o| !o.passed).collect();
    println!(
        "\nacceptance: {} passed, {} failed",
        out.len() - failed.len(),
        failed.len()
    );
    for f in &failed {
        println!("  failed {:>2}. {} ({})", f.id, f.name, f.detail);
    }
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
