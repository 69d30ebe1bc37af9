//! Urban-macro (UMa) large-scale channel from 3GPP TR 38.901: LOS
//! probability, LOS/NLOS path loss, lognormal shadow fading and the
//! base-station planar-array gain.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2D;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// UMa validity range of the path-loss model, metres.
pub const MIN_D2D_M: f64 = 10.0;
pub const MAX_D2D_M: f64 = 5000.0;

pub const SHADOWING_SIGMA_LOS_DB: f64 = 4.0;
pub const SHADOWING_SIGMA_NLOS_DB: f64 = 6.0;

/// Peak gain of one antenna element, dBi.
pub const ELEMENT_MAX_GAIN_DBI: f64 = 8.0;
const ELEMENT_BEAMWIDTH_DEG: f64 = 65.0;
/// Front-to-back and side-lobe limit of the element pattern, dB.
const ELEMENT_MAX_ATTENUATION_DB: f64 = 30.0;
/// Floor on the per-axis array factor so array nulls stay finite.
const ARRAY_FACTOR_FLOOR: f64 = 1e-6;

/// Carrier, array and link-budget constants of one frequency band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandProfile {
    /// Hz.
    pub carrier_frequency: f64,
    /// Elements per side of the square BS array.
    pub array_side: u32,
    pub bs_height: f64,
    pub ue_height: f64,
    /// dBm.
    pub tx_power: f64,
    /// dBi.
    pub ue_gain: f64,
    /// dB.
    pub noise_figure: f64,
    /// dBm.
    pub noise_floor: f64,
    /// Multiply each link power by an Exp(1) Rayleigh power gain. On by
    /// default; off leaves shadowing as the only fading.
    pub rayleigh_fading: bool,
}

impl BandProfile {
    /// Default array side for the three reference carriers: 2 at 700 MHz,
    /// 4 at 4 GHz, 8 at 30 GHz. Other carriers get the nearest rule.
    pub fn default_array_side(carrier_frequency: f64) -> u32 {
        if carrier_frequency < 2e9 {
            2
        } else if carrier_frequency < 15e9 {
            4
        } else {
            8
        }
    }

    pub fn new(carrier_frequency: f64) -> Self {
        Self::with_array(carrier_frequency, Self::default_array_side(carrier_frequency))
    }

    pub fn with_array(carrier_frequency: f64, array_side: u32) -> Self {
        BandProfile {
            carrier_frequency,
            array_side,
            bs_height: 25.0,
            ue_height: 1.5,
            tx_power: 49.0,
            ue_gain: 0.0,
            noise_figure: 9.0,
            noise_floor: -90.0,
            rayleigh_fading: true,
        }
    }

    pub fn low() -> Self {
        Self::new(0.7e9)
    }

    pub fn mid() -> Self {
        Self::new(4e9)
    }

    pub fn high() -> Self {
        Self::new(30e9)
    }

    /// Whether the array side follows the reference pairing for this carrier.
    pub fn has_default_pairing(&self) -> bool {
        self.array_side == Self::default_array_side(self.carrier_frequency)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency.is_finite() && self.carrier_frequency > 0.0) {
            return Err(Error::invalid("carrier_frequency", "must be finite and > 0"));
        }
        if self.array_side == 0 {
            return Err(Error::invalid("array_side", "must be >= 1"));
        }
        if !(self.bs_height.is_finite() && self.bs_height > 0.0) {
            return Err(Error::invalid("bs_height", "must be finite and > 0"));
        }
        if !(self.ue_height.is_finite() && self.ue_height > 0.0) {
            return Err(Error::invalid("ue_height", "must be finite and > 0"));
        }
        for (name, v) in [
            ("tx_power", self.tx_power),
            ("ue_gain", self.ue_gain),
            ("noise_figure", self.noise_figure),
            ("noise_floor", self.noise_floor),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// Receiver noise power in dBm: noise floor plus noise figure. It does not
    /// scale with the dimensioned bandwidth.
    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_floor + self.noise_figure
    }

    /// Peak BS gain (element plus full array gain), dBi.
    pub fn boresight_gain(&self) -> f64 {
        boresight_gain(self.array_side)
    }

    pub fn carrier_ghz(&self) -> f64 {
        self.carrier_frequency / 1e9
    }

    /// LOS breakpoint distance d'_BP in metres (effective heights h - 1 m).
    pub fn breakpoint_distance(&self) -> f64 {
        4.0 * (self.bs_height - 1.0) * (self.ue_height - 1.0) * self.carrier_frequency / SPEED_OF_LIGHT
    }

    pub fn d3d(&self, d2d: f64) -> f64 {
        let dh = self.bs_height - self.ue_height;
        (d2d * d2d + dh * dh).sqrt()
    }

    /// Zenith angle (radians from vertical) of a ground receiver at `d2d`
    /// metres as seen from the BS.
    pub fn zenith_to_ground(&self, d2d: f64) -> f64 {
        0.5 * PI + (self.bs_height - self.ue_height).atan2(d2d)
    }
}

/// Large-scale state of one BS-to-user link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDraw {
    /// Metres, after clamping to the model's validity range.
    pub d2d: f64,
    pub d3d: f64,
    pub los: bool,
    /// dB.
    pub path_loss: f64,
    /// dB, subtracted from the received power.
    pub shadowing: f64,
    /// dBi; zero until link-sim assigns a role.
    pub tx_gain: f64,
    pub rx_gain: f64,
    /// Linear small-scale power gain, 1 unless Rayleigh fading is enabled.
    pub fading: f64,
    /// The geometric distance lay outside [`MIN_D2D_M`, `MAX_D2D_M`].
    pub clamped: bool,
}

impl LinkDraw {
    /// Average received power in dBm with the given BS gain (no small-scale
    /// fading).
    pub fn mean_rx_power_dbm(&self, band: &BandProfile, tx_gain: f64) -> f64 {
        band.tx_power + tx_gain + band.ue_gain - self.path_loss - self.shadowing
    }
}

/// UMa LOS probability for outdoor users below 13 m.
pub fn los_probability(d2d: f64) -> Result<f64> {
    if d2d.is_nan() || d2d < 0.0 {
        return Err(Error::invalid("d2d", format!("must be >= 0, got {d2d}")));
    }
    Ok(los_probability_unchecked(d2d))
}

#[inline]
fn los_probability_unchecked(d2d: f64) -> f64 {
    if d2d <= 18.0 {
        1.0
    } else {
        let r = 18.0 / d2d;
        r + (-d2d / 63.0).exp() * (1.0 - r)
    }
}

/// Clamps to the UMa validity range, reporting whether clamping happened.
pub fn clamp_distance(d2d: f64) -> (f64, bool) {
    if d2d < MIN_D2D_M {
        (MIN_D2D_M, true)
    } else if d2d > MAX_D2D_M {
        (MAX_D2D_M, true)
    } else {
        (d2d, false)
    }
}

/// UMa path loss in dB. Distances outside the validity range are clamped.
pub fn path_loss(d2d: f64, los: bool, band: &BandProfile) -> Result<f64> {
    if !d2d.is_finite() || d2d < 0.0 {
        return Err(Error::invalid("d2d", format!("must be finite and >= 0, got {d2d}")));
    }
    band.validate()?;
    let (d2d, _) = clamp_distance(d2d);
    Ok(path_loss_unchecked(d2d, los, band))
}

/// Band-dependent path-loss terms, hoisted out of per-link evaluation.
#[derive(Debug, Clone, Copy)]
struct PathLossTerms {
    fc_db: f64,
    breakpoint: f64,
    beyond_bp: f64,
    dh2: f64,
    nlos_offset: f64,
}

impl PathLossTerms {
    fn new(band: &BandProfile) -> Self {
        let fc_db = 20.0 * band.carrier_ghz().log10();
        let bp = band.breakpoint_distance();
        let dh = band.bs_height - band.ue_height;
        PathLossTerms {
            fc_db,
            breakpoint: bp,
            beyond_bp: 9.0 * (bp * bp + dh * dh).log10(),
            dh2: dh * dh,
            nlos_offset: 13.54 + fc_db - 0.6 * (band.ue_height - 1.5),
        }
    }

    #[inline]
    fn d3d(&self, d2d: f64) -> f64 {
        (d2d * d2d + self.dh2).sqrt()
    }

    #[inline]
    fn eval(&self, d2d: f64, los: bool) -> f64 {
        let lg = self.d3d(d2d).log10();
        let pl_los = if d2d <= self.breakpoint {
            28.0 + 22.0 * lg + self.fc_db
        } else {
            28.0 + 40.0 * lg + self.fc_db - self.beyond_bp
        };
        if los {
            pl_los
        } else {
            pl_los.max(self.nlos_offset + 39.08 * lg)
        }
    }
}

fn path_loss_unchecked(d2d: f64, los: bool, band: &BandProfile) -> f64 {
    PathLossTerms::new(band).eval(d2d, los)
}

pub fn shadowing_sigma(los: bool) -> f64 {
    if los {
        SHADOWING_SIGMA_LOS_DB
    } else {
        SHADOWING_SIGMA_NLOS_DB
    }
}

/// Zero-mean normal shadow fading in dB.
pub fn sample_shadowing<R: Rng + ?Sized>(los: bool, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    shadowing_sigma(los) * z
}

pub fn boresight_gain(array_side: u32) -> f64 {
    let n = array_side as f64;
    ELEMENT_MAX_GAIN_DBI + 10.0 * (n * n).log10()
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Element attenuation (dB, <= 0) for offsets from the element boresight.
fn element_attenuation(az_offset: f64, zen_offset: f64) -> f64 {
    let az = az_offset.to_degrees();
    let zen = zen_offset.to_degrees();
    let a_h = -(12.0 * (az / ELEMENT_BEAMWIDTH_DEG).powi(2)).min(ELEMENT_MAX_ATTENUATION_DB);
    let a_v = -(12.0 * (zen / ELEMENT_BEAMWIDTH_DEG).powi(2)).min(ELEMENT_MAX_ATTENUATION_DB);
    -(-(a_h + a_v)).min(ELEMENT_MAX_ATTENUATION_DB)
}

/// Normalised array factor magnitude of an N-element half-wavelength line.
fn array_factor(u: f64, n: u32) -> f64 {
    let half = 0.5 * PI * u;
    let den = half.sin();
    if den.abs() < 1e-12 {
        return 1.0;
    }
    let af = ((n as f64) * half).sin().abs() / ((n as f64) * den.abs());
    af.clamp(ARRAY_FACTOR_FLOOR, 1.0)
}

/// Gain in dBi of an N×N half-wavelength planar array steered toward
/// (`steer_azimuth`, `steer_zenith`) evaluated in direction
/// (`target_azimuth`, `target_zenith`). Zenith angles are measured from the
/// vertical.
///
/// The element pattern is taken relative to the steering direction, so a
/// perfectly aligned beam yields exactly [`boresight_gain`].
pub fn array_gain(
    steer_azimuth: f64,
    steer_zenith: f64,
    target_azimuth: f64,
    target_zenith: f64,
    array_side: u32,
) -> f64 {
    let d_az = wrap_angle(target_azimuth - steer_azimuth);
    let d_zen = wrap_angle(target_zenith - steer_zenith);
    let (peak_db, af2) = offset_gain(d_az, d_zen, array_side);
    peak_db + 10.0 * af2.log10()
}

/// Gain at angular offsets from the steering direction, split into a dB part
/// (element pattern plus full array gain) and the linear squared array
/// factor, so callers can fold the dB part into one exponentiation.
#[inline]
pub(crate) fn offset_gain(d_az: f64, d_zen: f64, array_side: u32) -> (f64, f64) {
    let element = ELEMENT_MAX_GAIN_DBI + element_attenuation(d_az, d_zen);
    let af = array_factor(d_az.sin(), array_side) * array_factor(d_zen.sin(), array_side);
    let n = array_side as f64;
    (element + 10.0 * (n * n).log10(), af * af)
}

/// Per-band state for drawing many links.
#[derive(Debug, Clone, Copy)]
pub struct LinkSampler {
    band: BandProfile,
    terms: PathLossTerms,
}

impl LinkSampler {
    pub fn new(band: &BandProfile) -> Self {
        LinkSampler {
            band: *band,
            terms: PathLossTerms::new(band),
        }
    }

    /// Draws the large-scale state of the link from `bs` to the user at the
    /// origin. Randomness is consumed in a fixed order: LOS, shadowing, then
    /// fading when enabled.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, bs: Point2D, rng: &mut R) -> LinkDraw {
        let (d2d, clamped) = clamp_distance(bs.norm());
        let los = rng.random::<f64>() < los_probability_unchecked(d2d);
        let path_loss = self.terms.eval(d2d, los);
        let shadowing = sample_shadowing(los, rng);
        let fading = if self.band.rayleigh_fading {
            Exp1.sample(rng)
        } else {
            1.0
        };
        LinkDraw {
            d2d,
            d3d: self.terms.d3d(d2d),
            los,
            path_loss,
            shadowing,
            tx_gain: 0.0,
            rx_gain: 0.0,
            fading,
            clamped,
        }
    }
}

/// Draws the large-scale state of the link from `bs` to the user at the
/// origin. Antenna gains are left at zero.
pub fn draw_link<R: Rng + ?Sized>(bs: Point2D, band: &BandProfile, rng: &mut R) -> LinkDraw {
    LinkSampler::new(band).draw(bs, rng)
}
