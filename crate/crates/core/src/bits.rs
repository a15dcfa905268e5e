//! MSB-first bit packing shared by the navigation frame, the compact
//! message and the correction message codecs.

use alloc::vec::Vec;
use crc::{Crc, CRC_16_IBM_3740};

/// CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF).
pub const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push_bit(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let idx = self.len / 8;
            self.bytes[idx] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    /// Writes the low `nbits` of `value`, most significant first.
    pub fn write_u64(&mut self, value: u64, nbits: u32) {
        debug_assert!(nbits <= 64);
        debug_assert!(nbits == 64 || value >> nbits == 0, "value does not fit");
        for i in (0..nbits).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }

    /// Two's complement in `nbits`.
    pub fn write_i64(&mut self, value: i64, nbits: u32) {
        debug_assert!(fits_signed(value, nbits));
        let mask = if nbits == 64 { u64::MAX } else { (1u64 << nbits) - 1 };
        self.write_u64(value as u64 & mask, nbits);
    }

    pub fn pad_to(&mut self, nbits: usize) {
        while self.len < nbits {
            self.push_bit(false);
        }
    }

    pub fn pad_to_byte(&mut self) {
        while !self.len.is_multiple_of(8) {
            self.push_bit(false);
        }
    }

    /// CRC over the bits written so far, zero-padded to a byte boundary.
    pub fn crc(&self) -> u16 {
        CRC16.checksum(&self.bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    limit: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self {
            bytes,
            pos: 0,
            limit: bytes.len() * 8,
        }
    }

    pub fn with_limit(bytes: &'a [u8], limit: usize) -> Self {
        Self {
            bytes,
            pos: 0,
            limit: limit.min(bytes.len() * 8),
        }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.limit - self.pos
    }

    pub fn seek(&mut self, pos: usize) {
        self.pos = pos.min(self.limit);
    }

    pub fn read_bit(&mut self) -> Option<bool> {
        if self.pos >= self.limit {
            return None;
        }
        let bit = self.bytes[self.pos / 8] & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Some(bit)
    }

    pub fn read_u64(&mut self, nbits: u32) -> Option<u64> {
        if self.remaining() < nbits as usize {
            return None;
        }
        let mut v = 0u64;
        for _ in 0..nbits {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Some(v)
    }

    pub fn read_i64(&mut self, nbits: u32) -> Option<i64> {
        let raw = self.read_u64(nbits)?;
        if nbits == 64 {
            return Some(raw as i64);
        }
        let sign = 1u64 << (nbits - 1);
        Some(if raw & sign != 0 {
            (raw | !((1u64 << nbits) - 1)) as i64
        } else {
            raw as i64
        })
    }
}

pub fn fits_signed(value: i64, nbits: u32) -> bool {
    if nbits >= 64 {
        return true;
    }
    let half = 1i64 << (nbits - 1);
    (-half..half).contains(&value)
}

pub fn fits_unsigned(value: u64, nbits: u32) -> bool {
    nbits >= 64 || value >> nbits == 0
}

/// Copies bits `[start, start + len)` of `src` into a fresh byte buffer,
/// zero-padded at the tail.
pub fn extract_bits(src: &[u8], start: usize, len: usize) -> Vec<u8> {
    let mut reader = BitReader::new(src);
    reader.seek(start);
    let mut out = BitWriter::new();
    for _ in 0..len {
        out.push_bit(reader.read_bit().unwrap_or(false));
    }
    out.into_bytes()
}
