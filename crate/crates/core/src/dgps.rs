//! Differential corrections: base-station computation, the correction
//! message codec, rover-side application and a delayed, lossy channel.
//!
//! Wire layout, MSB first:
//!
//! ```text
//! epoch_time_s:32 | station_id:12 | count:6 | count x (prn:6 | correction:i24) | crc:16
//! ```
//!
//! Corrections are two's-complement in 1/8 m steps. The CRC (CRC-16/CCITT-FALSE)
//! covers the preceding bits zero-padded to a byte boundary; the whole
//! message is zero-padded to a byte boundary after the CRC.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::bits::{extract_bits, fits_signed, BitReader, BitWriter, CRC16};
use crate::constellation::{PseudorangeObservation, SatelliteState};
use crate::geodesy::CartesianCoord;

pub const HEADER_BITS: usize = 32 + 12 + 6;
pub const ENTRY_BITS: usize = 6 + 24;
pub const CRC_BITS: usize = 16;
pub const MAX_STATION_ID: u16 = (1 << 12) - 1;
pub const MAX_ENTRIES: usize = (1 << 6) - 1;
/// Correction steps per metre.
pub const STEPS_PER_M: f64 = 8.0;
pub const CORRECTION_BITS: u32 = 24;
pub const DEFAULT_MAX_AGE_S: f64 = 30.0;

/// Encoded size in bytes of a message with `count` entries.
pub const fn encoded_len(count: usize) -> usize {
    (HEADER_BITS + count * ENTRY_BITS + CRC_BITS).div_ceil(8)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DgpsError {
    Crc { stored: u16, computed: u16 },
    Truncated { have: usize, need: usize },
    CountMismatch { count: usize, bytes: usize },
    StationId(u16),
    TooManyEntries(usize),
    Prn(u8),
    /// Correction in metres outside the 24-bit span.
    Range(f64),
    Stale { age_s: f64, max_age_s: f64 },
    NoObservations,
}

impl fmt::Display for DgpsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Crc { stored, computed } => {
                write!(f, "crc mismatch: stored {stored:#06x}, computed {computed:#06x}")
            }
            Self::Truncated { have, need } => write!(f, "message truncated: {have} bytes, need {need}"),
            Self::CountMismatch { count, bytes } => {
                write!(f, "count {count} implies {} bytes, buffer has {bytes}", encoded_len(*count))
            }
            Self::StationId(id) => write!(f, "station id {id} exceeds 12 bits"),
            Self::TooManyEntries(n) => write!(f, "{n} corrections exceed the 6-bit count"),
            Self::Prn(p) => write!(f, "prn {p} outside 1..=63"),
            Self::Range(m) => write!(f, "correction {m} m outside the representable span"),
            Self::Stale { age_s, max_age_s } => {
                write!(f, "correction message is {age_s} s old (limit {max_age_s} s)")
            }
            Self::NoObservations => f.write_str("no observations"),
        }
    }
}

impl core::error::Error for DgpsError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RangeCorrection {
    pub prn: u8,
    /// Correction in 1/8 m steps.
    pub steps: i32,
}

impl RangeCorrection {
    pub fn from_metres(prn: u8, metres: f64) -> Result<Self, DgpsError> {
        let steps = libm::round(metres * STEPS_PER_M);
        if !(steps.abs() < (1i64 << (CORRECTION_BITS - 1)) as f64) {
            return Err(DgpsError::Range(metres));
        }
        Ok(Self { prn, steps: steps as i32 })
    }

    pub fn metres(&self) -> f64 {
        self.steps as f64 / STEPS_PER_M
    }

    pub fn km(&self) -> f64 {
        self.metres() / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CorrectionMessage {
    pub epoch_time_s: u32,
    pub station_id: u16,
    pub corrections: Vec<RangeCorrection>,
}

impl CorrectionMessage {
    pub fn get(&self, prn: u8) -> Option<&RangeCorrection> {
        self.corrections.iter().find(|c| c.prn == prn)
    }

    pub fn encoded_len(&self) -> usize {
        encoded_len(self.corrections.len())
    }

    pub fn validate(&self) -> Result<(), DgpsError> {
        if self.station_id > MAX_STATION_ID {
            return Err(DgpsError::StationId(self.station_id));
        }
        if self.corrections.len() > MAX_ENTRIES {
            return Err(DgpsError::TooManyEntries(self.corrections.len()));
        }
        for c in &self.corrections {
            if !(1..=63).contains(&c.prn) {
                return Err(DgpsError::Prn(c.prn));
            }
            if !fits_signed(c.steps as i64, CORRECTION_BITS) {
                return Err(DgpsError::Range(c.metres()));
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, DgpsError> {
        self.validate()?;
        let mut w = BitWriter::new();
        w.write_u64(self.epoch_time_s as u64, 32);
        w.write_u64(self.station_id as u64, 12);
        w.write_u64(self.corrections.len() as u64, 6);
        for c in &self.corrections {
            w.write_u64(c.prn as u64, 6);
            w.write_i64(c.steps as i64, CORRECTION_BITS);
        }
        let crc = w.crc();
        w.write_u64(crc as u64, 16);
        w.pad_to_byte();
        Ok(w.into_bytes())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DgpsError> {
        let need = encoded_len(0);
        if bytes.len() < need {
            return Err(DgpsError::Truncated { have: bytes.len(), need });
        }
        let mut r = BitReader::new(bytes);
        let epoch_time_s = r.read_u64(32).unwrap_or_default() as u32;
        let station_id = r.read_u64(12).unwrap_or_default() as u16;
        let count = r.read_u64(6).unwrap_or_default() as usize;
        let need = encoded_len(count);
        if bytes.len() < need {
            return Err(DgpsError::Truncated { have: bytes.len(), need });
        }
        if bytes.len() > need {
            return Err(DgpsError::CountMismatch { count, bytes: bytes.len() });
        }
        let payload_bits = HEADER_BITS + count * ENTRY_BITS;
        let computed = CRC16.checksum(&extract_bits(bytes, 0, payload_bits));
        let mut corrections = Vec::with_capacity(count);
        for _ in 0..count {
            let prn = r.read_u64(6).unwrap_or_default() as u8;
            let steps = r.read_i64(CORRECTION_BITS).unwrap_or_default() as i32;
            corrections.push(RangeCorrection { prn, steps });
        }
        let stored = r.read_u64(16).unwrap_or_default() as u16;
        if stored != computed {
            return Err(DgpsError::Crc { stored, computed });
        }
        let msg = Self {
            epoch_time_s,
            station_id,
            corrections,
        };
        msg.validate()?;
        Ok(msg)
    }
}

/// Base-station output: the message plus the number of observations
/// dropped because no satellite state matched them.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionBatch {
    pub message: CorrectionMessage,
    pub skipped: usize,
}

/// Per satellite, `geometric_range(base_truth, sat) - (pseudorange - c b)`
/// where `b` is the base receiver's own solved clock bias.
pub fn compute_corrections(
    base_truth: CartesianCoord,
    obs: &[PseudorangeObservation],
    sats: &[SatelliteState],
    base_clock_bias_s: f64,
    c_km_s: f64,
    epoch_time_s: u32,
    station_id: u16,
) -> Result<CorrectionBatch, DgpsError> {
    if obs.is_empty() {
        return Err(DgpsError::NoObservations);
    }
    let mut corrections = Vec::with_capacity(obs.len());
    let mut skipped = 0;
    for o in obs {
        let Some(sat) = sats.iter().find(|s| s.prn == o.prn) else {
            skipped += 1;
            continue;
        };
        let geometric = base_truth.distance(sat.position);
        let corr_km = geometric - (o.pseudorange_km - c_km_s * base_clock_bias_s);
        corrections.push(RangeCorrection::from_metres(o.prn, corr_km * 1000.0)?);
    }
    let message = CorrectionMessage {
        epoch_time_s,
        station_id,
        corrections,
    };
    message.validate()?;
    Ok(CorrectionBatch { message, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CorrectedObservation {
    pub observation: PseudorangeObservation,
    pub corrected: bool,
}

/// Adds each satellite's correction to its pseudorange. Observations with no
/// matching correction pass through with `corrected = false`.
pub fn apply_corrections(
    obs: &[PseudorangeObservation],
    msg: &CorrectionMessage,
    now_s: f64,
    max_age_s: f64,
) -> Result<Vec<CorrectedObservation>, DgpsError> {
    let age_s = now_s - msg.epoch_time_s as f64;
    if !(age_s >= 0.0 && age_s <= max_age_s) {
        return Err(DgpsError::Stale { age_s, max_age_s });
    }
    Ok(obs
        .iter()
        .map(|o| match msg.get(o.prn) {
            Some(c) => {
                let mut corrected = *o;
                corrected.pseudorange_km += c.km();
                CorrectedObservation {
                    observation: corrected,
                    corrected: true,
                }
            }
            None => CorrectedObservation {
                observation: *o,
                corrected: false,
            },
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ChannelConfig {
    pub latency_min_s: f64,
    pub latency_max_s: f64,
    pub loss_probability: f64,
    pub bandwidth_bps: f64,
    pub correction_period_s: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            latency_min_s: 5.0,
            latency_max_s: 10.0,
            loss_probability: 0.0,
            bandwidth_bps: 20_000.0,
            correction_period_s: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelConfigError {
    Latency,
    Loss,
    Bandwidth,
    Period,
}

impl fmt::Display for ChannelConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Latency => "latency bounds must satisfy 0 <= min <= max",
            Self::Loss => "loss probability must lie in [0, 1]",
            Self::Bandwidth => "bandwidth must be positive",
            Self::Period => "correction period must be positive",
        })
    }
}

impl core::error::Error for ChannelConfigError {}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ChannelConfigError> {
        if !(self.latency_min_s >= 0.0 && self.latency_max_s >= self.latency_min_s && self.latency_max_s.is_finite()) {
            return Err(ChannelConfigError::Latency);
        }
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return Err(ChannelConfigError::Loss);
        }
        if !(self.bandwidth_bps > 0.0) {
            return Err(ChannelConfigError::Bandwidth);
        }
        if !(self.correction_period_s > 0.0) {
            return Err(ChannelConfigError::Period);
        }
        Ok(())
    }

    pub fn transmission_s(&self, size_bytes: usize) -> f64 {
        size_bytes as f64 * 8.0 / self.bandwidth_bps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Delivery {
    Arrived { t_arrive_s: f64, delay_s: f64 },
    Lost,
}

impl Delivery {
    pub fn arrival(&self) -> Option<f64> {
        match self {
            Self::Arrived { t_arrive_s, .. } => Some(*t_arrive_s),
            Self::Lost => None,
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, cfg: &ChannelConfig) -> Option<f64> {
    // Loss first so the latency stream does not depend on the loss rate's
    // outcome ordering.
    let lost = rng.random::<f64>() < cfg.loss_probability;
    let latency = if cfg.latency_max_s > cfg.latency_min_s {
        rng.random_range(cfg.latency_min_s..=cfg.latency_max_s)
    } else {
        cfg.latency_min_s
    };
    (!lost).then_some(latency)
}

/// One independent send: `t_send + latency + size / bandwidth`, or lost.
pub fn channel_send(size_bytes: usize, t_send_s: f64, cfg: &ChannelConfig, seed: u64) -> Delivery {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match draw(&mut rng, cfg) {
        Some(latency) => {
            let delay_s = latency + cfg.transmission_s(size_bytes);
            Delivery::Arrived {
                t_arrive_s: t_send_s + delay_s,
                delay_s,
            }
        }
        None => Delivery::Lost,
    }
}

/// A sender's link. Messages are serialized onto the link one at a time, so
/// with constant latency deliveries keep send order.
#[derive(Debug, Clone)]
pub struct Channel {
    cfg: ChannelConfig,
    rng: ChaCha8Rng,
    link_free_s: f64,
    sent: u64,
    lost: u64,
}

impl Channel {
    pub fn new(cfg: ChannelConfig, seed: u64) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            link_free_s: f64::NEG_INFINITY,
            sent: 0,
            lost: 0,
        }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn lost(&self) -> u64 {
        self.lost
    }

    pub fn send(&mut self, size_bytes: usize, t_send_s: f64) -> Delivery {
        self.sent += 1;
        let start = t_send_s.max(self.link_free_s);
        let done = start + self.cfg.transmission_s(size_bytes);
        self.link_free_s = done;
        match draw(&mut self.rng, &self.cfg) {
            Some(latency) => {
                let t_arrive_s = done + latency;
                Delivery::Arrived {
                    t_arrive_s,
                    delay_s: t_arrive_s - t_send_s,
                }
            }
            None => {
                self.lost += 1;
                Delivery::Lost
            }
        }
    }
}
