//! One Monte Carlo experiment: association of the typical user, beam steering
//! and the end-to-end SINR under a regime and connectivity mode.
//!
//! An experiment is split in two random stages so that regimes and modes can
//! be compared sample by sample:
//!
//! 1. [`Snapshot::draw`] draws LOS state, path loss, shadowing (and optional
//!    Rayleigh fading) for every BS.
//! 2. [`InterferenceField::draw`] places one active mobile per BS and steers
//!    each BS beam at it, giving the interference power each BS would cause
//!    at the typical user.
//!
//! Given both stages, [`Snapshot::evaluate`] is deterministic.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{offset_gain, BandProfile, LinkDraw, LinkSampler};
use crate::error::{Error, Result};
use crate::geometry::{uniform_in_disk, Deployment, Operator, Point2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// No co-channel interference.
    #[serde(rename = "noise")]
    NoiseLimited,
    /// Full frequency reuse: every non-serving BS transmits.
    #[serde(rename = "interference")]
    InterferenceLimited,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::NoiseLimited => "noise",
            Regime::InterferenceLimited => "interference",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" | "noise_limited" => Ok(Regime::NoiseLimited),
            "interference" | "interference_limited" => Ok(Regime::InterferenceLimited),
            other => Err(Error::config("regime", format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConnectivityMode {
    #[serde(rename = "single")]
    Single,
    /// Two connections to distinct BSs of one operator, combined with MRC.
    #[serde(rename = "multiconn")]
    MultiConnectivity,
    /// One connection per operator on a clustered two-operator deployment.
    #[serde(rename = "multiop")]
    MultiOperator,
    /// As [`ConnectivityMode::MultiOperator`] on independent deployments.
    #[serde(rename = "multiop-unclustered")]
    MultiOperatorUnclustered,
}

impl ConnectivityMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConnectivityMode::Single => "single",
            ConnectivityMode::MultiConnectivity => "multiconn",
            ConnectivityMode::MultiOperator => "multiop",
            ConnectivityMode::MultiOperatorUnclustered => "multiop-unclustered",
        }
    }

    /// Number of simultaneous connections.
    pub fn connections(&self) -> usize {
        match self {
            ConnectivityMode::Single => 1,
            _ => 2,
        }
    }

    pub fn is_multi_operator(&self) -> bool {
        matches!(
            self,
            ConnectivityMode::MultiOperator | ConnectivityMode::MultiOperatorUnclustered
        )
    }

    /// Checks that `deployment` has enough BSs for this mode.
    pub fn check_deployment(&self, deployment: &Deployment) -> Result<()> {
        match self {
            ConnectivityMode::Single if deployment.is_empty() => {
                Err(Error::EmptyDeployment("no base station".into()))
            }
            ConnectivityMode::MultiConnectivity if deployment.count(Operator::A) < 2 => Err(
                Error::EmptyDeployment("multi-connectivity needs two operator-A base stations".into()),
            ),
            ConnectivityMode::MultiOperator | ConnectivityMode::MultiOperatorUnclustered => {
                for op in [Operator::A, Operator::B] {
                    if deployment.count(op) == 0 {
                        return Err(Error::EmptyDeployment(format!("no base station of operator {op:?}")));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ConnectivityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConnectivityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(ConnectivityMode::Single),
            "multiconn" => Ok(ConnectivityMode::MultiConnectivity),
            "multiop" => Ok(ConnectivityMode::MultiOperator),
            "multiop-unclustered" => Ok(ConnectivityMode::MultiOperatorUnclustered),
            other => Err(Error::config("mode", format!("unknown connectivity mode `{other}`"))),
        }
    }
}

/// End-to-end SINR of the typical user.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrSample {
    /// Linear SINR after combining.
    pub gamma: f64,
    /// Per-connection linear SINR.
    pub components: Vec<f64>,
}

impl SinrSample {
    pub fn single(gamma: f64) -> Self {
        SinrSample {
            gamma,
            components: vec![gamma],
        }
    }

    /// Maximum-ratio combining: the output SINR is the sum of branch SINRs.
    pub fn mrc(components: Vec<f64>) -> Self {
        SinrSample {
            gamma: components.iter().sum(),
            components,
        }
    }

    pub fn gamma_db(&self) -> f64 {
        10.0 * self.gamma.log10()
    }
}

#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    (dbm * (0.1 * std::f64::consts::LN_10)).exp()
}

/// Index of the BS with the highest average received power among those owned
/// by `operator`. Every candidate is evaluated at boresight gain, so the
/// ordering reduces to the smallest path loss plus shadowing. Ties go to the
/// lowest index.
pub fn associate(deployment: &Deployment, links: &[LinkDraw], operator: Operator) -> Result<usize> {
    best_two(deployment, links, operator, None)
        .map(|(i, _)| i)
        .ok_or_else(|| Error::EmptyDeployment(format!("no base station of operator {operator:?}")))
}

fn best_two(
    deployment: &Deployment,
    links: &[LinkDraw],
    operator: Operator,
    exclude: Option<usize>,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (link, op)) in links.iter().zip(&deployment.operators).enumerate() {
        if *op != operator || Some(i) == exclude {
            continue;
        }
        let score = -(link.path_loss + link.shadowing);
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((i, score)),
        }
    }
    best
}

/// Radius (m) of the disk around an interfering BS in which its own active
/// mobile is placed: the radius of a typical cell at `density` BS/km².
pub fn mobile_radius_m(density: f64) -> f64 {
    1e3 * (1.0 / (PI * density)).sqrt()
}

/// Large-scale draws for every BS of a deployment.
#[derive(Debug, Clone)]
pub struct Snapshot<'a> {
    pub deployment: &'a Deployment,
    pub band: BandProfile,
    pub links: Vec<LinkDraw>,
}

impl<'a> Snapshot<'a> {
    pub fn draw<R: Rng + ?Sized>(deployment: &'a Deployment, band: &BandProfile, rng: &mut R) -> Self {
        let sampler = LinkSampler::new(band);
        let links = deployment.points.iter().map(|p| sampler.draw(*p, rng)).collect();
        Snapshot {
            deployment,
            band: *band,
            links,
        }
    }

    /// Uses caller-provided link draws, e.g. with LOS forced or shadowing
    /// zeroed.
    pub fn from_links(deployment: &'a Deployment, band: &BandProfile, links: Vec<LinkDraw>) -> Result<Self> {
        if links.len() != deployment.len() {
            return Err(Error::invalid(
                "links",
                format!("{} draws for {} base stations", links.len(), deployment.len()),
            ));
        }
        Ok(Snapshot {
            deployment,
            band: *band,
            links,
        })
    }

    pub fn clamped_links(&self) -> usize {
        self.links.iter().filter(|l| l.clamped).count()
    }

    /// Received signal power (mW) from BS `i` with a perfectly aligned beam.
    pub fn signal_mw(&self, i: usize) -> f64 {
        let link = &self.links[i];
        dbm_to_mw(link.mean_rx_power_dbm(&self.band, self.band.boresight_gain())) * link.fading
    }

    fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.band.noise_power_dbm())
    }

    fn link_sinr(&self, serving: usize, excluded: &[usize], interference: Option<&InterferenceField>) -> f64 {
        let operator = self.deployment.operators[serving];
        let i_sum: f64 = match interference {
            None => 0.0,
            Some(field) => field
                .power_mw
                .iter()
                .zip(&self.deployment.operators)
                .enumerate()
                .filter(|(j, (_, op))| **op == operator && !excluded.contains(j))
                .map(|(_, (p, _))| *p)
                .sum(),
        };
        self.signal_mw(serving) / (self.noise_mw() + i_sum)
    }

    /// Combines the draws into the SINR seen under `mode`. `interference` is
    /// `None` in the noise-limited regime.
    pub fn evaluate(&self, mode: ConnectivityMode, interference: Option<&InterferenceField>) -> Result<SinrSample> {
        mode.check_deployment(self.deployment)?;
        match mode {
            ConnectivityMode::Single => {
                let s = associate(self.deployment, &self.links, Operator::A)
                    .or_else(|_| associate(self.deployment, &self.links, Operator::B))?;
                Ok(SinrSample::single(self.link_sinr(s, &[s], interference)))
            }
            ConnectivityMode::MultiConnectivity => {
                let (first, _) = best_two(self.deployment, &self.links, Operator::A, None)
                    .ok_or_else(|| Error::EmptyDeployment("no operator-A base station".into()))?;
                let (second, _) = best_two(self.deployment, &self.links, Operator::A, Some(first))
                    .ok_or_else(|| Error::EmptyDeployment("fewer than two operator-A base stations".into()))?;
                let serving = [first, second];
                Ok(SinrSample::mrc(vec![
                    self.link_sinr(first, &serving, interference),
                    self.link_sinr(second, &serving, interference),
                ]))
            }
            ConnectivityMode::MultiOperator | ConnectivityMode::MultiOperatorUnclustered => {
                let a = associate(self.deployment, &self.links, Operator::A)?;
                let b = associate(self.deployment, &self.links, Operator::B)?;
                Ok(SinrSample::mrc(vec![
                    self.link_sinr(a, &[a], interference),
                    self.link_sinr(b, &[b], interference),
                ]))
            }
        }
    }
}

/// Interference power each BS would inject at the typical user when
/// transmitting to its own mobile.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceField {
    /// mW, aligned with the deployment's points.
    pub power_mw: Vec<f64>,
}

impl InterferenceField {
    /// Places one mobile per BS uniformly within the typical cell radius of
    /// the BS's operator and steers each beam at it. Every BS consumes the
    /// same randomness whether or not it ends up serving.
    pub fn draw<R: Rng + ?Sized>(snapshot: &Snapshot<'_>, rng: &mut R) -> Self {
        let deployment = snapshot.deployment;
        let operators_present = [Operator::A, Operator::B]
            .iter()
            .filter(|op| deployment.count(**op) > 0)
            .count()
            .max(1);
        // Each operator's share of the total density sets its cell size.
        let radius = mobile_radius_m(deployment.density / operators_present as f64);
        let mobiles: Vec<Point2D> = deployment
            .points
            .iter()
            .map(|bs| uniform_in_disk(*bs, radius, rng))
            .collect();
        Self::from_mobiles(snapshot, &mobiles)
    }

    /// Interference given explicit mobile positions, one per BS.
    pub fn from_mobiles(snapshot: &Snapshot<'_>, mobiles: &[Point2D]) -> Self {
        let band = &snapshot.band;
        let h = band.bs_height - band.ue_height;
        let base_dbm = band.tx_power + band.ue_gain;
        let power_mw = snapshot
            .deployment
            .points
            .iter()
            .zip(mobiles)
            .zip(&snapshot.links)
            .map(|((bs, mobile), link)| {
                // Offsets between the beam (toward the mobile) and the user.
                let (sx, sy) = (mobile.x - bs.x, mobile.y - bs.y);
                let (tx, ty) = (-bs.x, -bs.y);
                let d_az = (sx * ty - sy * tx).atan2(sx * tx + sy * ty);
                let (ds, dt) = ((sx * sx + sy * sy).sqrt(), (tx * tx + ty * ty).sqrt());
                let d_zen = (h * (ds - dt)).atan2(ds * dt + h * h);
                let (peak_db, af2) = offset_gain(d_az, d_zen, band.array_side);
                dbm_to_mw(base_dbm + peak_db - link.path_loss - link.shadowing) * af2 * link.fading
            })
            .collect();
        InterferenceField { power_mw }
    }
}

/// Draws a full experiment on `deployment` and evaluates it.
pub fn sample<R: Rng + ?Sized>(
    deployment: &Deployment,
    band: &BandProfile,
    regime: Regime,
    mode: ConnectivityMode,
    rng: &mut R,
) -> Result<SinrSample> {
    mode.check_deployment(deployment)?;
    let snapshot = Snapshot::draw(deployment, band, rng);
    let field = match regime {
        Regime::NoiseLimited => None,
        Regime::InterferenceLimited => Some(InterferenceField::draw(&snapshot, rng)),
    };
    snapshot.evaluate(mode, field.as_ref())
}

/// Noise-limited SNR of a single connection.
pub fn sample_snr<R: Rng + ?Sized>(deployment: &Deployment, band: &BandProfile, rng: &mut R) -> Result<SinrSample> {
    sample(deployment, band, Regime::NoiseLimited, ConnectivityMode::Single, rng)
}

/// Interference-limited SINR of a single connection.
pub fn sample_sinr<R: Rng + ?Sized>(deployment: &Deployment, band: &BandProfile, rng: &mut R) -> Result<SinrSample> {
    sample(deployment, band, Regime::InterferenceLimited, ConnectivityMode::Single, rng)
}

/// Interference-limited multi-connectivity to the two strongest BSs.
pub fn sample_multiconn<R: Rng + ?Sized>(deployment: &Deployment, band: &BandProfile, rng: &mut R) -> Result<SinrSample> {
    sample(deployment, band, Regime::InterferenceLimited, ConnectivityMode::MultiConnectivity, rng)
}

/// Interference-limited multi-operator connectivity; each operator only
/// interferes with its own link.
pub fn sample_multiop<R: Rng + ?Sized>(deployment: &Deployment, band: &BandProfile, rng: &mut R) -> Result<SinrSample> {
    sample(deployment, band, Regime::InterferenceLimited, ConnectivityMode::MultiOperator, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::path_loss;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed_link(band: &BandProfile, d2d: f64, los: bool, shadowing: f64) -> LinkDraw {
        LinkDraw {
            d2d,
            d3d: band.d3d(d2d),
            los,
            path_loss: path_loss(d2d, los, band).unwrap(),
            shadowing,
            tx_gain: 0.0,
            rx_gain: 0.0,
            fading: 1.0,
            clamped: false,
        }
    }

    fn db(x: f64) -> f64 {
        10.0 * x.log10()
    }

    #[test]
    fn associate_singleton_and_ties() {
        let band = BandProfile::mid();
        let d = Deployment::from_points(vec![Point2D::new(100.0, 0.0)], Operator::A, 30.0, 2.0);
        let links = vec![fixed_link(&band, 100.0, true, 0.0)];
        assert_eq!(associate(&d, &links, Operator::A).unwrap(), 0);
        assert!(associate(&d, &links, Operator::B).is_err());

        let d2 = Deployment::from_points(
            vec![Point2D::new(100.0, 0.0), Point2D::new(0.0, 100.0)],
            Operator::A,
            30.0,
            2.0,
        );
        let same = fixed_link(&band, 100.0, true, 0.0);
        assert_eq!(associate(&d2, &[same, same], Operator::A).unwrap(), 0);
    }

    #[test]
    fn associate_prefers_lower_path_loss() {
        let band = BandProfile::mid();
        // NLOS at 100 m (~104.2 dB) versus LOS at 300 m (~94.7 dB).
        let d = Deployment::from_points(
            vec![Point2D::new(100.0, 0.0), Point2D::new(300.0, 0.0)],
            Operator::A,
            30.0,
            2.0,
        );
        let links = vec![fixed_link(&band, 100.0, false, 0.0), fixed_link(&band, 300.0, true, 0.0)];
        let pl300 = 28.0 + 22.0 * band.d3d(300.0).log10() + 20.0 * 4f64.log10();
        assert!(pl300 < 104.2);
        assert_eq!(associate(&d, &links, Operator::A).unwrap(), 1);
    }

    #[test]
    fn link_budget_snr() {
        let band = BandProfile::mid();
        let d = Deployment::from_points(vec![Point2D::new(100.0, 0.0)], Operator::A, 30.0, 2.0);
        let snap = Snapshot::from_links(&d, &band, vec![fixed_link(&band, 100.0, true, 0.0)]).unwrap();
        let snr = snap.evaluate(ConnectivityMode::Single, None).unwrap();
        assert!((db(snr.gamma) - 65.74).abs() < 0.01, "{}", db(snr.gamma));

        let shadowed = Snapshot::from_links(&d, &band, vec![fixed_link(&band, 100.0, true, -10.0)]).unwrap();
        // Negative shadowing loss means a 10 dB stronger link.
        let g = shadowed.evaluate(ConnectivityMode::Single, None).unwrap().gamma;
        assert!((db(g) - db(snr.gamma) - 10.0).abs() < 1e-9);
        let weaker = Snapshot::from_links(&d, &band, vec![fixed_link(&band, 100.0, true, 10.0)]).unwrap();
        let g = weaker.evaluate(ConnectivityMode::Single, None).unwrap().gamma;
        assert!((db(snr.gamma) - db(g) - 10.0).abs() < 1e-9);

        let far = Deployment::from_points(vec![Point2D::new(200.0, 0.0)], Operator::A, 30.0, 2.0);
        let snap200 = Snapshot::from_links(&far, &band, vec![fixed_link(&band, 200.0, true, 0.0)]).unwrap();
        assert!(snap200.evaluate(ConnectivityMode::Single, None).unwrap().gamma < snr.gamma);
    }

    #[test]
    fn no_interferers_gives_snr() {
        let band = BandProfile::high();
        let d = Deployment::from_points(vec![Point2D::new(150.0, 40.0)], Operator::A, 30.0, 2.0);
        let snap = Snapshot::draw(&d, &band, &mut ChaCha8Rng::seed_from_u64(1));
        let field = InterferenceField::draw(&snap, &mut ChaCha8Rng::seed_from_u64(2));
        let snr = snap.evaluate(ConnectivityMode::Single, None).unwrap();
        let sinr = snap.evaluate(ConnectivityMode::Single, Some(&field)).unwrap();
        assert_eq!(snr, sinr);
    }

    #[test]
    fn interferer_aimed_at_user() {
        let band = BandProfile::high();
        let d = Deployment::from_points(
            vec![Point2D::new(100.0, 0.0), Point2D::new(-100.0, 0.0)],
            Operator::A,
            30.0,
            2.0,
        );
        let links = vec![fixed_link(&band, 100.0, true, 0.0), fixed_link(&band, 100.0, true, 3.0)];
        let snap = Snapshot::from_links(&d, &band, links).unwrap();
        // Interferer's own mobile sits at the user: full boresight gain.
        let field = InterferenceField::from_mobiles(&snap, &[Point2D::new(200.0, 0.0), Point2D::ORIGIN]);
        let rx = 49.0 + band.boresight_gain() - path_loss(100.0, true, &band).unwrap();
        let s = dbm_to_mw(rx);
        let i = dbm_to_mw(rx - 3.0);
        let n = dbm_to_mw(-81.0);
        let g = snap.evaluate(ConnectivityMode::Single, Some(&field)).unwrap().gamma;
        assert!((g / (s / (n + i)) - 1.0).abs() < 1e-12);
        assert!(g < snap.evaluate(ConnectivityMode::Single, None).unwrap().gamma);
    }

    #[test]
    fn mrc_sum_rule() {
        let s = SinrSample::mrc(vec![1.0, 3.0]);
        assert_eq!(s.gamma, 4.0);
        assert_eq!(SinrSample::mrc(vec![2.5, 0.0]).gamma, 2.5);
    }

    #[test]
    fn multiop_symmetric_deployment() {
        let band = BandProfile::high();
        let d = Deployment {
            points: vec![Point2D::new(80.0, 0.0), Point2D::new(80.0, 0.0)],
            operators: vec![Operator::A, Operator::B],
            density: 30.0,
            radius: 2.0,
        };
        let link = fixed_link(&band, 80.0, true, 0.0);
        let snap = Snapshot::from_links(&d, &band, vec![link, link]).unwrap();
        let field = InterferenceField::draw(&snap, &mut ChaCha8Rng::seed_from_u64(3));
        let s = snap.evaluate(ConnectivityMode::MultiOperator, Some(&field)).unwrap();
        assert_eq!(s.components[0], s.components[1]);
        assert_eq!(s.gamma, 2.0 * s.components[0]);
        let snr = snap.evaluate(ConnectivityMode::MultiOperator, None).unwrap();
        // No same-operator interferers exist.
        assert_eq!(s, snr);
    }

    #[test]
    fn mode_preconditions() {
        let band = BandProfile::high();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let empty = Deployment::empty(30.0, 2.0);
        assert!(matches!(sample_snr(&empty, &band, &mut rng), Err(Error::EmptyDeployment(_))));
        let one = Deployment::from_points(vec![Point2D::new(50.0, 0.0)], Operator::A, 30.0, 2.0);
        assert!(sample_multiconn(&one, &band, &mut rng).is_err());
        assert!(sample_multiop(&one, &band, &mut rng).is_err());
    }

    #[test]
    fn random_draws_respect_orderings() {
        let band = BandProfile::high();
        for seed in 0..200u64 {
            let mut geo = ChaCha8Rng::seed_from_u64(seed);
            let d = crate::geometry::sample_ppp(30.0, 2.0, &mut geo).unwrap();
            let snap = Snapshot::draw(&d, &band, &mut geo);
            let field = InterferenceField::draw(&snap, &mut ChaCha8Rng::seed_from_u64(seed + 1000));
            let snr = snap.evaluate(ConnectivityMode::Single, None).unwrap();
            let sinr = snap.evaluate(ConnectivityMode::Single, Some(&field)).unwrap();
            let mc = snap.evaluate(ConnectivityMode::MultiConnectivity, Some(&field)).unwrap();
            assert!(sinr.gamma <= snr.gamma);
            assert!(mc.gamma >= sinr.gamma);
            assert!(mc.gamma >= mc.components[0].max(mc.components[1]));
            assert_eq!(mc.components.len(), 2);
            assert!(sinr.gamma > 0.0 && sinr.gamma.is_finite());
        }
    }

    #[test]
    fn mode_parsing_round_trips() {
        for m in [
            ConnectivityMode::Single,
            ConnectivityMode::MultiConnectivity,
            ConnectivityMode::MultiOperator,
            ConnectivityMode::MultiOperatorUnclustered,
        ] {
            assert_eq!(m.as_str().parse::<ConnectivityMode>().unwrap(), m);
        }
        assert_eq!("noise".parse::<Regime>().unwrap(), Regime::NoiseLimited);
        assert!("bogus".parse::<Regime>().is_err());
    }
}
