//! Compact broadcast carrying only satellite identity and transmit time, for
//! receivers that already hold the orbits.
//!
//! `prn:6 | transmit_time:64 (u64, 2^-20 s) | crc:16` = 86 bits, sent as
//! 11 bytes MSB-first with two trailing zero bits.

use alloc::vec::Vec;
use core::fmt;

use crate::bits::{extract_bits, BitReader, BitWriter};

pub const COMPACT_BITS: usize = 6 + 64 + 16;
pub const COMPACT_BYTES: usize = COMPACT_BITS.div_ceil(8);
pub const TIME_SCALE: f64 = 1_048_576.0; // 2^20 ticks per second

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompactError {
    Prn(u8),
    Time,
    WrongLength { bits: usize },
    Crc { stored: u16, computed: u16 },
}

impl fmt::Display for CompactError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Prn(p) => write!(f, "prn {p} outside 1..=32"),
            Self::Time => f.write_str("transmit time not representable"),
            Self::WrongLength { bits } => write!(f, "compact message has {bits} bits, expected {COMPACT_BITS}"),
            Self::Crc { stored, computed } => {
                write!(f, "crc mismatch: stored {stored:#06x}, computed {computed:#06x}")
            }
        }
    }
}

impl core::error::Error for CompactError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompactMessage {
    pub prn: u8,
    /// Seconds of week in 2^-20 s ticks.
    pub transmit_ticks: u64,
}

impl CompactMessage {
    pub fn new(prn: u8, transmit_time_s: f64) -> Result<Self, CompactError> {
        if !(1..=32).contains(&prn) {
            return Err(CompactError::Prn(prn));
        }
        let ticks = libm::round(transmit_time_s * TIME_SCALE);
        if !(ticks >= 0.0) || ticks >= 1.8e19 {
            return Err(CompactError::Time);
        }
        Ok(Self {
            prn,
            transmit_ticks: ticks as u64,
        })
    }

    pub fn transmit_time_s(&self) -> f64 {
        self.transmit_ticks as f64 / TIME_SCALE
    }

    pub fn to_bytes(&self) -> [u8; COMPACT_BYTES] {
        let mut w = BitWriter::new();
        w.write_u64(self.prn as u64, 6);
        w.write_u64(self.transmit_ticks, 64);
        let crc = w.crc();
        w.write_u64(crc as u64, 16);
        w.pad_to_byte();
        let mut out = [0u8; COMPACT_BYTES];
        out.copy_from_slice(w.as_bytes());
        out
    }

    pub fn to_bits(&self) -> Vec<bool> {
        let bytes = self.to_bytes();
        let mut r = BitReader::with_limit(&bytes, COMPACT_BITS);
        core::iter::from_fn(|| r.read_bit()).collect()
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self, CompactError> {
        if bits.len() != COMPACT_BITS {
            return Err(CompactError::WrongLength { bits: bits.len() });
        }
        let mut w = BitWriter::new();
        for &b in bits {
            w.push_bit(b);
        }
        Self::from_bytes(w.as_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CompactError> {
        if bytes.len() != COMPACT_BYTES {
            return Err(CompactError::WrongLength { bits: bytes.len() * 8 });
        }
        let payload = extract_bits(bytes, 0, 70);
        let computed = crate::bits::CRC16.checksum(&payload);
        let mut r = BitReader::new(bytes);
        let prn = r.read_u64(6).ok_or(CompactError::WrongLength { bits: 0 })? as u8;
        let transmit_ticks = r.read_u64(64).ok_or(CompactError::WrongLength { bits: 6 })?;
        let stored = r.read_u64(16).ok_or(CompactError::WrongLength { bits: 70 })? as u16;
        if stored != computed {
            return Err(CompactError::Crc { stored, computed });
        }
        if !(1..=32).contains(&prn) {
            return Err(CompactError::Prn(prn));
        }
        Ok(Self { prn, transmit_ticks })
    }
}

pub fn build_compact_message(prn: u8, transmit_time_s: f64) -> Result<[u8; COMPACT_BYTES], CompactError> {
    Ok(CompactMessage::new(prn, transmit_time_s)?.to_bytes())
}

pub fn parse_compact_message(bytes: &[u8]) -> Result<CompactMessage, CompactError> {
    CompactMessage::from_bytes(bytes)
}
