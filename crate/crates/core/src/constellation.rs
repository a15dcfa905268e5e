//! Satellite truth states, orbit propagation and pseudorange synthesis.

use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geodesy::{CartesianCoord, FrameMode, SPEED_OF_LIGHT_KM_S};
use crate::signal::nav::{Almanac, Ephemeris};

/// Plausible pseudorange band used to validate observations, km.
pub const PSEUDORANGE_BOUNDS_KM: (f64, f64) = (15_000.0, 40_000.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimError {
    StaleEphemeris { prn: u8, age_s: f64, span_s: f64 },
    Unhealthy { prn: u8 },
    EmptyAlmanac,
    NegativeNoise(f64),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StaleEphemeris { prn, age_s, span_s } => write!(
                f,
                "ephemeris for prn {prn} is {age_s} s from its epoch, valid for {span_s} s"
            ),
            Self::Unhealthy { prn } => write!(f, "prn {prn} is flagged unhealthy"),
            Self::EmptyAlmanac => f.write_str("almanac has no satellites"),
            Self::NegativeNoise(s) => write!(f, "noise sigma {s} is negative"),
        }
    }
}

impl core::error::Error for SimError {}

/// Circle of `radius_km` about `center` in the plane given by its
/// inclination (tilt about the node line) and node angle (rotation of the
/// node line about `z`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CircularOrbit {
    pub center: CartesianCoord,
    pub radius_km: f64,
    pub inclination_rad: f64,
    pub node_rad: f64,
    /// Angle along the circle at the ephemeris epoch, measured from the node.
    pub phase_rad: f64,
    pub rate_rad_s: f64,
}

impl CircularOrbit {
    pub fn period_s(&self) -> f64 {
        2.0 * core::f64::consts::PI / libm::fabs(self.rate_rad_s)
    }

    pub fn position_at(&self, dt_s: f64) -> CartesianCoord {
        let theta = self.phase_rad + self.rate_rad_s * dt_s;
        let (sn, cn) = (libm::sin(self.node_rad), libm::cos(self.node_rad));
        let (si, ci) = (libm::sin(self.inclination_rad), libm::cos(self.inclination_rad));
        let u = CartesianCoord::new(cn, sn, 0.0);
        let v = CartesianCoord::new(-ci * sn, ci * cn, si);
        self.center + (u * libm::cos(theta) + v * libm::sin(theta)) * self.radius_km
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "lowercase"))]
pub enum Orbit {
    Static { position: CartesianCoord },
    Circular(CircularOrbit),
}

impl Orbit {
    /// Position `dt_s` seconds after the orbit's epoch.
    pub fn position_at(&self, dt_s: f64) -> CartesianCoord {
        match self {
            Self::Static { position } => *position,
            Self::Circular(c) => c.position_at(dt_s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SatelliteState {
    pub prn: u8,
    pub position: CartesianCoord,
    pub clock_error_s: f64,
    pub healthy: bool,
}

/// Error terms injected into one observation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ErrorModel {
    /// Propagation delay for this satellite; common to every receiver.
    pub iono_delay_s: f64,
    pub receiver_noise_sigma_km: f64,
    /// Receiver clock ahead of system time by this much (the `b` solved for).
    pub receiver_clock_bias_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PseudorangeObservation {
    pub prn: u8,
    pub transmit_time_s: f64,
    pub receive_time_s: f64,
    /// `(receive - transmit) * c`, kept separately so it does not lose
    /// precision to the large time-of-week values.
    pub pseudorange_km: f64,
}

impl PseudorangeObservation {
    pub fn from_times(prn: u8, transmit_time_s: f64, receive_time_s: f64, c_km_s: f64) -> Self {
        Self {
            prn,
            transmit_time_s,
            receive_time_s,
            pseudorange_km: (receive_time_s - transmit_time_s) * c_km_s,
        }
    }

    pub fn from_range(prn: u8, transmit_time_s: f64, pseudorange_km: f64, c_km_s: f64) -> Self {
        Self {
            prn,
            transmit_time_s,
            receive_time_s: transmit_time_s + pseudorange_km / c_km_s,
            pseudorange_km,
        }
    }

    pub fn is_plausible(&self) -> bool {
        self.receive_time_s > self.transmit_time_s
            && (PSEUDORANGE_BOUNDS_KM.0..=PSEUDORANGE_BOUNDS_KM.1).contains(&self.pseudorange_km)
    }
}

pub fn propagate(eph: &Ephemeris, t_s: f64) -> Result<SatelliteState, SimError> {
    let age_s = t_s - eph.epoch_s;
    if libm::fabs(age_s) > eph.validity_span_s {
        return Err(SimError::StaleEphemeris {
            prn: eph.prn,
            age_s,
            span_s: eph.validity_span_s,
        });
    }
    Ok(SatelliteState {
        prn: eph.prn,
        position: eph.orbit.position_at(age_s),
        clock_error_s: eph.clock_offset_s,
        healthy: eph.healthy,
    })
}

/// Synthesizes the observation a receiver at `receiver` would make of `sat`
/// for a signal sent at `t_s`. Reproducible from `seed`.
pub fn observe(
    receiver: CartesianCoord,
    sat: &SatelliteState,
    t_s: f64,
    err: &ErrorModel,
    seed: u64,
) -> Result<PseudorangeObservation, SimError> {
    observe_with_c(receiver, sat, t_s, err, seed, SPEED_OF_LIGHT_KM_S)
}

pub fn observe_with_c(
    receiver: CartesianCoord,
    sat: &SatelliteState,
    t_s: f64,
    err: &ErrorModel,
    seed: u64,
    c_km_s: f64,
) -> Result<PseudorangeObservation, SimError> {
    if !sat.healthy {
        return Err(SimError::Unhealthy { prn: sat.prn });
    }
    let sigma = err.receiver_noise_sigma_km;
    if !(sigma >= 0.0) {
        return Err(SimError::NegativeNoise(sigma));
    }
    let noise_km = if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Normal::new(0.0, sigma).expect("sigma checked").sample(&mut rng)
    } else {
        0.0
    };
    let range = receiver.distance(sat.position);
    let pr = range + c_km_s * (err.receiver_clock_bias_s + err.iono_delay_s) + noise_km;
    Ok(PseudorangeObservation::from_range(sat.prn, t_s, pr, c_km_s))
}

/// Elevation of `sat` seen from `receiver`, degrees.
pub fn elevation_deg(frame: FrameMode, receiver: CartesianCoord, sat: CartesianCoord) -> f64 {
    let los = sat - receiver;
    let n = los.norm();
    if n == 0.0 {
        return 90.0;
    }
    let s = (frame.up(receiver).dot(los) / n).clamp(-1.0, 1.0);
    libm::asin(s).to_degrees()
}

/// Healthy almanac satellites whose elevation from `approx_pos` at `t_s`
/// exceeds `mask_deg`. With a zero mask in the flat frame this is the
/// half-space `z_sat > z_receiver`.
pub fn visible_satellites(
    alm: &Almanac,
    approx_pos: CartesianCoord,
    t_s: f64,
    frame: FrameMode,
    mask_deg: f64,
) -> Result<Vec<u8>, SimError> {
    if alm.entries.is_empty() {
        return Err(SimError::EmptyAlmanac);
    }
    Ok(alm
        .entries
        .iter()
        .filter(|e| e.healthy)
        .filter(|e| {
            let pos = e.orbit.position_at(t_s - e.epoch_s);
            elevation_deg(frame, approx_pos, pos) > mask_deg
        })
        .map(|e| e.prn)
        .collect())
}
