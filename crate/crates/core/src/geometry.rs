//! Base-station deployments around a typical user at the origin.
//!
//! Deployments are sampled on a disk window centred on the user. Positions are
//! in metres; densities are in BS per km² and window radii in km, matching the
//! units used throughout network dimensioning.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest window radius, in km.
pub const MIN_WINDOW_RADIUS_KM: f64 = 2.0;
/// The window is sized to hold at least this many BSs on average.
pub const MIN_EXPECTED_BS: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const ORIGIN: Point2D = Point2D { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Azimuth of `other` as seen from `self`, in radians.
    pub fn azimuth_to(&self, other: &Point2D) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Operator owning a base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operator {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub points: Vec<Point2D>,
    /// Aligned with `points`.
    pub operators: Vec<Operator>,
    /// Total BS density, per km².
    pub density: f64,
    /// Window radius, km.
    pub radius: f64,
}

impl Deployment {
    pub fn empty(density: f64, radius: f64) -> Self {
        Deployment {
            points: Vec::new(),
            operators: Vec::new(),
            density,
            radius,
        }
    }

    /// Builds a deployment from explicit positions, all owned by `operator`.
    pub fn from_points(points: Vec<Point2D>, operator: Operator, density: f64, radius: f64) -> Self {
        let operators = vec![operator; points.len()];
        Deployment {
            points,
            operators,
            density,
            radius,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count(&self, operator: Operator) -> usize {
        self.operators.iter().filter(|&&o| o == operator).count()
    }

    pub fn push(&mut self, point: Point2D, operator: Operator) {
        self.points.push(point);
        self.operators.push(operator);
    }

    /// Superimposes `other` onto `self`; density adds up.
    pub fn merge(mut self, other: Deployment) -> Deployment {
        self.points.extend(other.points);
        self.operators.extend(other.operators);
        self.density += other.density;
        self.radius = self.radius.max(other.radius);
        self
    }
}

fn check_density(density: f64) -> Result<()> {
    if !density.is_finite() || density < 0.0 {
        return Err(Error::invalid("density", format!("must be finite and >= 0, got {density}")));
    }
    Ok(())
}

fn check_radius(radius: f64) -> Result<()> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::invalid("radius", format!("must be finite and > 0, got {radius}")));
    }
    Ok(())
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    // Infallible for a finite positive mean.
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as usize
}

/// Uniform point on a disk of radius `radius_m` centred at `center`.
pub fn uniform_in_disk<R: Rng + ?Sized>(center: Point2D, radius_m: f64, rng: &mut R) -> Point2D {
    let r = radius_m * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point2D::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// Homogeneous PPP of `density` (per km²) on a disk of `radius` km, all points
/// tagged with `operator`.
pub fn sample_ppp_tagged<R: Rng + ?Sized>(
    density: f64,
    radius: f64,
    operator: Operator,
    rng: &mut R,
) -> Result<Deployment> {
    check_density(density)?;
    check_radius(radius)?;
    let n = poisson_count(density * PI * radius * radius, rng);
    let radius_m = radius * 1e3;
    let points = (0..n)
        .map(|_| uniform_in_disk(Point2D::ORIGIN, radius_m, rng))
        .collect();
    Ok(Deployment::from_points(points, operator, density, radius))
}

/// Homogeneous PPP with every point owned by operator A.
pub fn sample_ppp<R: Rng + ?Sized>(density: f64, radius: f64, rng: &mut R) -> Result<Deployment> {
    sample_ppp_tagged(density, radius, Operator::A, rng)
}

/// Two-operator Gauss-Poisson deployment.
///
/// Cluster centres form a PPP of `total_density / 2`; each centre is an
/// operator-A site and carries one operator-B site uniform within
/// `cluster_radius` metres. The B site is kept even if it falls just outside
/// the window.
pub fn sample_gpp<R: Rng + ?Sized>(
    total_density: f64,
    cluster_radius: f64,
    radius: f64,
    rng: &mut R,
) -> Result<Deployment> {
    check_density(total_density)?;
    check_radius(radius)?;
    if !cluster_radius.is_finite() || cluster_radius <= 0.0 {
        return Err(Error::invalid(
            "cluster_radius",
            format!("must be finite and > 0, got {cluster_radius}"),
        ));
    }
    let clusters = poisson_count(0.5 * total_density * PI * radius * radius, rng);
    let radius_m = radius * 1e3;
    let mut deployment = Deployment {
        points: Vec::with_capacity(2 * clusters),
        operators: Vec::with_capacity(2 * clusters),
        density: total_density,
        radius,
    };
    for _ in 0..clusters {
        let center = uniform_in_disk(Point2D::ORIGIN, radius_m, rng);
        let offset = uniform_in_disk(center, cluster_radius, rng);
        deployment.push(center, Operator::A);
        deployment.push(offset, Operator::B);
    }
    Ok(deployment)
}

/// Window radius (km) for a given density: large enough to hold
/// [`MIN_EXPECTED_BS`] BSs on average, never below [`MIN_WINDOW_RADIUS_KM`].
pub fn simulation_radius(density: f64) -> Result<f64> {
    if !density.is_finite() || density <= 0.0 {
        return Err(Error::invalid("density", format!("must be finite and > 0, got {density}")));
    }
    Ok(MIN_WINDOW_RADIUS_KM.max((MIN_EXPECTED_BS / (PI * density)).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_density_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = sample_ppp(0.0, 1.0, &mut rng).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn rejects_bad_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_ppp(-1.0, 1.0, &mut rng).is_err());
        assert!(sample_ppp(f64::NAN, 1.0, &mut rng).is_err());
        assert!(sample_gpp(f64::INFINITY, 50.0, 1.0, &mut rng).is_err());
        assert!(sample_gpp(30.0, 0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn window_radius_rule() {
        assert_eq!(simulation_radius(30.0).unwrap(), 2.0);
        let r = simulation_radius(1.0).unwrap();
        assert!((r - (300.0 / PI).sqrt()).abs() < 1e-12);
        assert!((r - 9.772).abs() < 1e-3);
        assert_eq!(simulation_radius(1e6).unwrap(), 2.0);
        assert!(simulation_radius(0.0).is_err());
        assert!(simulation_radius(-3.0).is_err());
    }

    #[test]
    fn ppp_points_inside_window_and_tagged_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = sample_ppp(30.0, 1.0, &mut rng).unwrap();
        assert!(!d.is_empty());
        assert_eq!(d.points.len(), d.operators.len());
        assert!(d.points.iter().all(|p| p.norm() <= 1000.0));
        assert_eq!(d.count(Operator::A), d.len());
    }

    #[test]
    fn gpp_pairs_within_cluster_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let d = sample_gpp(30.0, 50.0, 1.0, &mut rng).unwrap();
            assert_eq!(d.count(Operator::A), d.count(Operator::B));
            let a: Vec<_> = d.points.iter().zip(&d.operators).filter(|(_, &o)| o == Operator::A).map(|(p, _)| *p).collect();
            for (p, _) in d.points.iter().zip(&d.operators).filter(|(_, &o)| o == Operator::B) {
                let near = a.iter().filter(|c| c.distance(p) <= 50.0).count();
                // Another centre landing within 50 m is possible but rare at this density.
                assert!(near >= 1);
            }
            // Pairs are emitted adjacently: centre then offset.
            for pair in d.points.chunks(2) {
                assert!(pair[0].distance(&pair[1]) <= 50.0);
            }
        }
    }

    #[test]
    fn same_seed_same_deployment() {
        let a = sample_gpp(30.0, 50.0, 2.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_gpp(30.0, 50.0, 2.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }
}
