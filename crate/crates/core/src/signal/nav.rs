//! The 1500-bit, 30-second navigation frame and the records it carries.
//!
//! Layout (bit offsets within the frame, MSB first):
//!
//! | bits        | section   | content                                   |
//! |-------------|-----------|-------------------------------------------|
//! | 0..300      | clock     | frame index, week, time of week, health,  |
//! |             |           | clock bias and drift, CRC-16 at 284..300  |
//! | 300..900    | ephemeris | the sender's own orbit, CRC-16 at 884..900|
//! | 900..1500   | almanac   | one 584-bit page (1/25), CRC-16 at the end|
//!
//! Field-level tables live in `docs/wire-format.md`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::bits::{extract_bits, fits_signed, fits_unsigned, BitReader, BitWriter, CRC16};
use crate::constellation::{CircularOrbit, Orbit};
use crate::geodesy::CartesianCoord;

pub const NAV_BIT_RATE_BPS: u32 = 50;
pub const FRAME_BITS: usize = 1500;
pub const FRAME_BYTES: usize = FRAME_BITS.div_ceil(8);
pub const FRAME_DURATION_S: f64 = FRAME_BITS as f64 / NAV_BIT_RATE_BPS as f64;
pub const CLOCK_SECTION: (usize, usize) = (0, 300);
pub const EPHEMERIS_SECTION: (usize, usize) = (300, 900);
pub const ALMANAC_SECTION: (usize, usize) = (900, 1500);
pub const ALMANAC_PAGES: usize = 25;
pub const PAGE_DATA_BITS: usize = 584;
pub const PAGE_DATA_BYTES: usize = PAGE_DATA_BITS / 8;
/// Default ephemeris validity, seconds.
pub const EPHEMERIS_VALIDITY_S: f64 = 4.0 * 3600.0;
pub const MAX_ALMANAC_ENTRIES: usize = 32;

// Fixed-point scales.
const POS_LSB_KM: f64 = 1.0 / 65_536.0; // 2^-16
const POS_BITS: u32 = 40;
const RADIUS_LSB_KM: f64 = 1.0 / 1024.0; // 2^-10
const RADIUS_BITS: u32 = 32;
const ANGLE_LSB_SC: f64 = 1.0 / 2_147_483_648.0; // 2^-31 semicircles
const RATE_LSB_SC: f64 = 1.0 / 8_796_093_022_208.0; // 2^-43 semicircles/s
const CLOCK_LSB_S: f64 = 1.0 / 34_359_738_368.0; // 2^-35
const DRIFT_LSB: f64 = 1.0 / 1_125_899_906_842_624.0; // 2^-50
const IONO_LSB_S: f64 = 1.0 / 1_099_511_627_776.0; // 2^-40
const OBLIQUITY_LSB: f64 = 1.0 / 4096.0;
const TIME_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Clock,
    Ephemeris,
    Almanac,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NavError {
    WrongLength { bits: usize },
    Overflow { field: &'static str },
    FrameIndex(u8),
    BadChecksum(Section),
    Malformed(&'static str),
    MissingPages { have: usize },
}

impl fmt::Display for NavError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WrongLength { bits } => write!(f, "frame has {bits} bits, expected {FRAME_BITS}"),
            Self::Overflow { field } => write!(f, "field `{field}` does not fit its encoding"),
            Self::FrameIndex(i) => write!(f, "frame index {i} outside 0..{ALMANAC_PAGES}"),
            Self::BadChecksum(s) => write!(f, "{s:?} section checksum mismatch"),
            Self::Malformed(what) => write!(f, "malformed frame: {what}"),
            Self::MissingPages { have } => {
                write!(f, "almanac incomplete: {have} of {ALMANAC_PAGES} pages")
            }
        }
    }
}

impl core::error::Error for NavError {}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Ephemeris {
    pub prn: u8,
    /// Reference epoch, whole seconds of week.
    pub epoch_s: f64,
    pub orbit: Orbit,
    pub clock_offset_s: f64,
    pub validity_span_s: f64,
    pub healthy: bool,
}

impl Ephemeris {
    pub fn new(prn: u8, epoch_s: f64, orbit: Orbit) -> Self {
        Self {
            prn,
            epoch_s,
            orbit,
            clock_offset_s: 0.0,
            validity_span_s: EPHEMERIS_VALIDITY_S,
            healthy: true,
        }
    }

    /// The record as it survives a trip through the frame encoding.
    pub fn quantized(&self) -> Result<Self, NavError> {
        let mut w = BitWriter::new();
        encode_ephemeris(&mut w, self)?;
        let bytes = w.into_bytes();
        decode_ephemeris(&mut BitReader::new(&bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AlmanacEntry {
    pub prn: u8,
    pub healthy: bool,
    pub epoch_s: f64,
    pub orbit: Orbit,
}

/// Scalar ionospheric delay: `vertical_delay_s * (1 + obliquity * (1 - sin(elev)))`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IonoModel {
    pub vertical_delay_s: f64,
    pub obliquity: f64,
}

impl IonoModel {
    pub fn delay_s(&self, elevation_deg: f64) -> f64 {
        let s = libm::sin(elevation_deg.to_radians());
        self.vertical_delay_s * (1.0 + self.obliquity * (1.0 - s))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Almanac {
    pub entries: Vec<AlmanacEntry>,
    pub iono: IonoModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ClockFields {
    pub week: u16,
    /// Whole seconds of week at the start of the frame.
    pub time_of_week_s: u32,
    pub healthy: bool,
    pub clock_bias_s: f64,
    pub clock_drift_s_per_s: f64,
}

/// 1/25th of an encoded almanac.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlmanacPage {
    pub index: u8,
    pub data: [u8; PAGE_DATA_BYTES],
}

#[derive(Clone, PartialEq, Eq)]
pub struct NavFrame {
    bytes: [u8; FRAME_BYTES],
}

impl fmt::Debug for NavFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NavFrame({} bits)", FRAME_BITS)
    }
}

impl NavFrame {
    pub fn from_bits(bits: &[bool]) -> Result<Self, NavError> {
        if bits.len() != FRAME_BITS {
            return Err(NavError::WrongLength { bits: bits.len() });
        }
        let mut w = BitWriter::new();
        for &b in bits {
            w.push_bit(b);
        }
        let mut bytes = [0u8; FRAME_BYTES];
        bytes.copy_from_slice(w.as_bytes());
        Ok(Self { bytes })
    }

    /// Frame from its MSB-first serialization (188 bytes, last 4 bits zero).
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NavError> {
        if bytes.len() != FRAME_BYTES {
            return Err(NavError::WrongLength { bits: bytes.len() * 8 });
        }
        let mut out = [0u8; FRAME_BYTES];
        out.copy_from_slice(bytes);
        Ok(Self { bytes: out })
    }

    pub fn as_bytes(&self) -> &[u8; FRAME_BYTES] {
        &self.bytes
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < FRAME_BITS);
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..FRAME_BITS).map(|i| self.bit(i)).collect()
    }

    /// Flips one bit in place.
    pub fn flip(&mut self, i: usize) {
        assert!(i < FRAME_BITS);
        self.bytes[i / 8] ^= 0x80 >> (i % 8);
    }

    fn section(&self, (start, end): (usize, usize)) -> Vec<u8> {
        extract_bits(&self.bytes, start, end - start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFrame {
    pub clock: ClockFields,
    pub ephemeris: Ephemeris,
    pub page: AlmanacPage,
}

fn to_fixed(value: f64, lsb: f64, bits: u32, field: &'static str) -> Result<i64, NavError> {
    let v = libm::round(value / lsb);
    if !v.is_finite() || !fits_signed(v as i64, bits) || libm::fabs(v) > 9.0e18 {
        return Err(NavError::Overflow { field });
    }
    Ok(v as i64)
}

fn to_ufixed(value: f64, lsb: f64, bits: u32, field: &'static str) -> Result<u64, NavError> {
    let v = libm::round(value / lsb);
    if !v.is_finite() || !(0.0..=1.8e19).contains(&v) || !fits_unsigned(v as u64, bits) {
        return Err(NavError::Overflow { field });
    }
    Ok(v as u64)
}

/// Angle to signed semicircles, wrapped into [-1, 1).
fn angle_to_fixed(rad: f64) -> i64 {
    let sc = rad / PI;
    let wrapped = sc - 2.0 * libm::floor((sc + 1.0) / 2.0);
    let mut v = libm::round(wrapped / ANGLE_LSB_SC) as i64;
    if v >= 1 << 31 {
        v -= 1 << 32;
    }
    v
}

fn angle_from_fixed(v: i64) -> f64 {
    v as f64 * ANGLE_LSB_SC * PI
}

fn write_section_crc(w: &mut BitWriter, section_bits: usize) {
    w.pad_to(section_bits - 16);
    let crc = w.crc();
    w.write_u64(crc as u64, 16);
}

fn check_section_crc(bytes: &[u8], section_bits: usize, section: Section) -> Result<(), NavError> {
    let payload = extract_bits(bytes, 0, section_bits - 16);
    let mut r = BitReader::new(bytes);
    r.seek(section_bits - 16);
    let stored = r.read_u64(16).ok_or(NavError::Malformed("short section"))? as u16;
    if CRC16.checksum(&payload) != stored {
        return Err(NavError::BadChecksum(section));
    }
    Ok(())
}

fn encode_position(w: &mut BitWriter, p: CartesianCoord) -> Result<(), NavError> {
    for v in [p.x_km, p.y_km, p.z_km] {
        w.write_i64(to_fixed(v, POS_LSB_KM, POS_BITS, "position")?, POS_BITS);
    }
    Ok(())
}

fn decode_position(r: &mut BitReader<'_>) -> Result<CartesianCoord, NavError> {
    let mut c = [0.0; 3];
    for v in &mut c {
        *v = r.read_i64(POS_BITS).ok_or(NavError::Malformed("position"))? as f64 * POS_LSB_KM;
    }
    Ok(CartesianCoord::new(c[0], c[1], c[2]))
}

fn encode_orbit(w: &mut BitWriter, orbit: &Orbit) -> Result<(), NavError> {
    match orbit {
        Orbit::Static { position } => {
            w.write_u64(0, 2);
            encode_position(w, *position)
        }
        Orbit::Circular(c) => {
            w.write_u64(1, 2);
            encode_position(w, c.center)?;
            w.write_u64(to_ufixed(c.radius_km, RADIUS_LSB_KM, RADIUS_BITS, "radius")?, RADIUS_BITS);
            w.write_i64(angle_to_fixed(c.inclination_rad), 32);
            w.write_i64(angle_to_fixed(c.node_rad), 32);
            w.write_i64(angle_to_fixed(c.phase_rad), 32);
            w.write_i64(to_fixed(c.rate_rad_s / PI, RATE_LSB_SC, 32, "angular rate")?, 32);
            Ok(())
        }
    }
}

fn decode_orbit(r: &mut BitReader<'_>) -> Result<Orbit, NavError> {
    let bad = NavError::Malformed("orbit");
    match r.read_u64(2).ok_or(bad.clone())? {
        0 => Ok(Orbit::Static {
            position: decode_position(r)?,
        }),
        1 => {
            let center = decode_position(r)?;
            let radius_km = r.read_u64(RADIUS_BITS).ok_or(bad.clone())? as f64 * RADIUS_LSB_KM;
            let inclination_rad = angle_from_fixed(r.read_i64(32).ok_or(bad.clone())?);
            let node_rad = angle_from_fixed(r.read_i64(32).ok_or(bad.clone())?);
            let phase_rad = angle_from_fixed(r.read_i64(32).ok_or(bad.clone())?);
            let rate_rad_s = r.read_i64(32).ok_or(bad)? as f64 * RATE_LSB_SC * PI;
            Ok(Orbit::Circular(CircularOrbit {
                center,
                radius_km,
                inclination_rad,
                node_rad,
                phase_rad,
                rate_rad_s,
            }))
        }
        _ => Err(NavError::Malformed("unknown orbit kind")),
    }
}

fn check_prn(prn: u8) -> Result<(), NavError> {
    if !(1..=63).contains(&prn) {
        return Err(NavError::Overflow { field: "prn" });
    }
    Ok(())
}

fn encode_ephemeris(w: &mut BitWriter, e: &Ephemeris) -> Result<(), NavError> {
    check_prn(e.prn)?;
    if !(e.validity_span_s > 0.0) {
        return Err(NavError::Overflow { field: "validity span" });
    }
    w.write_u64(e.prn as u64, 6);
    w.push_bit(e.healthy);
    w.write_u64(to_ufixed(e.epoch_s, 1.0, TIME_BITS, "epoch")?, TIME_BITS);
    w.write_u64(to_ufixed(e.validity_span_s, 1.0, TIME_BITS, "validity span")?, TIME_BITS);
    w.write_i64(to_fixed(e.clock_offset_s, CLOCK_LSB_S, 32, "clock offset")?, 32);
    encode_orbit(w, &e.orbit)
}

fn decode_ephemeris(r: &mut BitReader<'_>) -> Result<Ephemeris, NavError> {
    let bad = NavError::Malformed("ephemeris");
    let prn = r.read_u64(6).ok_or(bad.clone())? as u8;
    let healthy = r.read_bit().ok_or(bad.clone())?;
    let epoch_s = r.read_u64(TIME_BITS).ok_or(bad.clone())? as f64;
    let validity_span_s = r.read_u64(TIME_BITS).ok_or(bad.clone())? as f64;
    let clock_offset_s = r.read_i64(32).ok_or(bad)? as f64 * CLOCK_LSB_S;
    let orbit = decode_orbit(r)?;
    Ok(Ephemeris {
        prn,
        epoch_s,
        orbit,
        clock_offset_s,
        validity_span_s,
        healthy,
    })
}

impl Almanac {
    /// Serializes the almanac into its 25 pages.
    pub fn pages(&self) -> Result<Vec<AlmanacPage>, NavError> {
        if self.entries.len() > MAX_ALMANAC_ENTRIES {
            return Err(NavError::Overflow { field: "almanac entries" });
        }
        let mut w = BitWriter::new();
        w.write_u64(self.entries.len() as u64, 6);
        w.write_u64(to_ufixed(self.iono.vertical_delay_s, IONO_LSB_S, 32, "iono delay")?, 32);
        w.write_i64(to_fixed(self.iono.obliquity, OBLIQUITY_LSB, 16, "iono obliquity")?, 16);
        for e in &self.entries {
            check_prn(e.prn)?;
            w.write_u64(e.prn as u64, 6);
            w.push_bit(e.healthy);
            w.write_u64(to_ufixed(e.epoch_s, 1.0, TIME_BITS, "almanac epoch")?, TIME_BITS);
            encode_orbit(&mut w, &e.orbit)?;
        }
        if w.len() > ALMANAC_PAGES * PAGE_DATA_BITS {
            return Err(NavError::Overflow { field: "almanac" });
        }
        w.pad_to(ALMANAC_PAGES * PAGE_DATA_BITS);
        let bytes = w.into_bytes();
        Ok(bytes
            .chunks_exact(PAGE_DATA_BYTES)
            .enumerate()
            .map(|(i, chunk)| {
                let mut data = [0u8; PAGE_DATA_BYTES];
                data.copy_from_slice(chunk);
                AlmanacPage { index: i as u8, data }
            })
            .collect())
    }

    fn from_stream(bytes: &[u8]) -> Result<Self, NavError> {
        let bad = NavError::Malformed("almanac");
        let mut r = BitReader::new(bytes);
        let count = r.read_u64(6).ok_or(bad.clone())? as usize;
        if count > MAX_ALMANAC_ENTRIES {
            return Err(NavError::Malformed("almanac entry count"));
        }
        let vertical_delay_s = r.read_u64(32).ok_or(bad.clone())? as f64 * IONO_LSB_S;
        let obliquity = r.read_i64(16).ok_or(bad.clone())? as f64 * OBLIQUITY_LSB;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let prn = r.read_u64(6).ok_or(bad.clone())? as u8;
            let healthy = r.read_bit().ok_or(bad.clone())?;
            let epoch_s = r.read_u64(TIME_BITS).ok_or(bad.clone())? as f64;
            let orbit = decode_orbit(&mut r)?;
            entries.push(AlmanacEntry {
                prn,
                healthy,
                epoch_s,
                orbit,
            });
        }
        Ok(Self {
            entries,
            iono: IonoModel {
                vertical_delay_s,
                obliquity,
            },
        })
    }

    pub fn quantized(&self) -> Result<Self, NavError> {
        let mut asm = AlmanacAssembler::new();
        for p in self.pages()? {
            asm.insert(p)?;
        }
        asm.assemble()
    }
}

/// Collects almanac pages in any order.
#[derive(Debug, Clone, Default)]
pub struct AlmanacAssembler {
    pages: [Option<[u8; PAGE_DATA_BYTES]>; ALMANAC_PAGES],
}

impl AlmanacAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true when the page was new.
    pub fn insert(&mut self, page: AlmanacPage) -> Result<bool, NavError> {
        let slot = self
            .pages
            .get_mut(page.index as usize)
            .ok_or(NavError::FrameIndex(page.index))?;
        let fresh = slot.is_none();
        *slot = Some(page.data);
        Ok(fresh)
    }

    pub fn received(&self) -> usize {
        self.pages.iter().filter(|p| p.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.received() == ALMANAC_PAGES
    }

    pub fn assemble(&self) -> Result<Almanac, NavError> {
        if !self.is_complete() {
            return Err(NavError::MissingPages { have: self.received() });
        }
        let mut stream = Vec::with_capacity(ALMANAC_PAGES * PAGE_DATA_BYTES);
        for p in self.pages.iter().flatten() {
            stream.extend_from_slice(p);
        }
        Almanac::from_stream(&stream)
    }
}

pub fn build_nav_frame(clock: &ClockFields, eph: &Ephemeris, page: &AlmanacPage) -> Result<NavFrame, NavError> {
    if page.index as usize >= ALMANAC_PAGES {
        return Err(NavError::FrameIndex(page.index));
    }

    let mut w = BitWriter::new();
    w.write_u64(page.index as u64, 5);
    if clock.week >= 1 << 10 {
        return Err(NavError::Overflow { field: "week" });
    }
    w.write_u64(clock.week as u64, 10);
    w.write_u64(to_ufixed(clock.time_of_week_s as f64, 1.0, TIME_BITS, "time of week")?, TIME_BITS);
    w.push_bit(clock.healthy);
    w.write_i64(to_fixed(clock.clock_bias_s, CLOCK_LSB_S, 32, "clock bias")?, 32);
    w.write_i64(to_fixed(clock.clock_drift_s_per_s, DRIFT_LSB, 24, "clock drift")?, 24);
    write_section_crc(&mut w, CLOCK_SECTION.1);

    let mut e = BitWriter::new();
    encode_ephemeris(&mut e, eph)?;
    if e.len() > EPHEMERIS_SECTION.1 - EPHEMERIS_SECTION.0 - 16 {
        return Err(NavError::Overflow { field: "ephemeris" });
    }
    write_section_crc(&mut e, EPHEMERIS_SECTION.1 - EPHEMERIS_SECTION.0);

    let mut a = BitWriter::new();
    for &byte in &page.data {
        a.write_u64(byte as u64, 8);
    }
    write_section_crc(&mut a, ALMANAC_SECTION.1 - ALMANAC_SECTION.0);

    for section in [e, a] {
        let bytes = section.as_bytes();
        let mut r = BitReader::with_limit(bytes, section.len());
        while let Some(b) = r.read_bit() {
            w.push_bit(b);
        }
    }
    debug_assert_eq!(w.len(), FRAME_BITS);
    let mut bytes = [0u8; FRAME_BYTES];
    bytes.copy_from_slice(w.as_bytes());
    Ok(NavFrame { bytes })
}

pub fn parse_nav_frame(frame: &NavFrame) -> Result<ParsedFrame, NavError> {
    let clock_bytes = frame.section(CLOCK_SECTION);
    check_section_crc(&clock_bytes, CLOCK_SECTION.1 - CLOCK_SECTION.0, Section::Clock)?;
    let eph_bytes = frame.section(EPHEMERIS_SECTION);
    check_section_crc(&eph_bytes, EPHEMERIS_SECTION.1 - EPHEMERIS_SECTION.0, Section::Ephemeris)?;
    let alm_bytes = frame.section(ALMANAC_SECTION);
    check_section_crc(&alm_bytes, ALMANAC_SECTION.1 - ALMANAC_SECTION.0, Section::Almanac)?;

    let bad = NavError::Malformed("clock");
    let mut r = BitReader::new(&clock_bytes);
    let index = r.read_u64(5).ok_or(bad.clone())? as u8;
    if index as usize >= ALMANAC_PAGES {
        return Err(NavError::FrameIndex(index));
    }
    let clock = ClockFields {
        week: r.read_u64(10).ok_or(bad.clone())? as u16,
        time_of_week_s: r.read_u64(TIME_BITS).ok_or(bad.clone())? as u32,
        healthy: r.read_bit().ok_or(bad.clone())?,
        clock_bias_s: r.read_i64(32).ok_or(bad.clone())? as f64 * CLOCK_LSB_S,
        clock_drift_s_per_s: r.read_i64(24).ok_or(bad)? as f64 * DRIFT_LSB,
    };

    let ephemeris = decode_ephemeris(&mut BitReader::new(&eph_bytes))?;

    let mut data = [0u8; PAGE_DATA_BYTES];
    data.copy_from_slice(&alm_bytes[..PAGE_DATA_BYTES]);
    Ok(ParsedFrame {
        clock,
        ephemeris,
        page: AlmanacPage { index, data },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn circular() -> Orbit {
        Orbit::Circular(CircularOrbit {
            center: CartesianCoord::new(0.0, 0.0, -6400.0),
            radius_km: 26_560.0,
            inclination_rad: 55f64.to_radians(),
            node_rad: -2.0,
            phase_rad: 3.0,
            rate_rad_s: 2.0 * PI / 43_082.0,
        })
    }

    fn sample_almanac(n: u8) -> Almanac {
        Almanac {
            entries: (1..=n)
                .map(|prn| AlmanacEntry {
                    prn,
                    healthy: prn % 5 != 0,
                    epoch_s: 3600.0 * prn as f64,
                    orbit: if prn % 2 == 0 {
                        circular()
                    } else {
                        Orbit::Static {
                            position: CartesianCoord::new(prn as f64 * 1000.25, -3000.5, 20_200.0),
                        }
                    },
                })
                .collect(),
            iono: IonoModel {
                vertical_delay_s: 30e-9,
                obliquity: 1.5,
            },
        }
    }

    #[test]
    fn timing_constants() {
        assert_eq!(FRAME_DURATION_S, 30.0);
        assert_eq!(CLOCK_SECTION.1 as f64 / NAV_BIT_RATE_BPS as f64, 6.0);
        assert_eq!((EPHEMERIS_SECTION.1 - EPHEMERIS_SECTION.0) as f64 / 50.0, 12.0);
        assert_eq!(ALMANAC_PAGES as f64 * FRAME_DURATION_S / 60.0, 12.5);
    }

    #[test]
    fn frame_round_trip() {
        let clock = ClockFields {
            week: 1023,
            time_of_week_s: 345_600,
            healthy: true,
            clock_bias_s: 1.5e-5,
            clock_drift_s_per_s: -2e-12,
        };
        let eph = Ephemeris::new(12, 7200.0, circular()).quantized().unwrap();
        let pages = sample_almanac(32).pages().unwrap();
        assert_eq!(pages.len(), ALMANAC_PAGES);
        let frame = build_nav_frame(&clock, &eph, &pages[7]).unwrap();
        let parsed = parse_nav_frame(&frame).unwrap();
        assert_eq!(parsed.ephemeris, eph);
        assert_eq!(parsed.page, pages[7]);
        assert_eq!(parsed.clock.week, 1023);
        assert_eq!(parsed.clock.time_of_week_s, 345_600);
        assert!((parsed.clock.clock_bias_s - 1.5e-5).abs() < 1e-10);

        let again = NavFrame::from_bits(&frame.bits()).unwrap();
        assert_eq!(again, frame);
        assert_eq!(NavFrame::from_bytes(frame.as_bytes()).unwrap(), frame);
    }

    #[test]
    fn twenty_five_frames_rebuild_the_almanac() {
        let alm = sample_almanac(32).quantized().unwrap();
        let pages = alm.pages().unwrap();
        let mut asm = AlmanacAssembler::new();
        // arrival order scrambled
        for k in 0..ALMANAC_PAGES {
            let idx = (k * 7 + 3) % ALMANAC_PAGES;
            assert!(!asm.is_complete());
            let frame = build_nav_frame(&ClockFields::default(), &Ephemeris::new(1, 0.0, circular()), &pages[idx]).unwrap();
            assert!(asm.insert(parse_nav_frame(&frame).unwrap().page).unwrap());
        }
        assert!(asm.is_complete());
        assert_eq!(asm.assemble().unwrap(), alm);
    }

    #[test]
    fn incomplete_almanac() {
        let pages = sample_almanac(4).pages().unwrap();
        let mut asm = AlmanacAssembler::new();
        for p in &pages[..24] {
            asm.insert(*p).unwrap();
        }
        assert_eq!(asm.assemble(), Err(NavError::MissingPages { have: 24 }));
    }

    #[test]
    fn frame_index_bound() {
        let page = AlmanacPage {
            index: 25,
            data: [0; PAGE_DATA_BYTES],
        };
        let eph = Ephemeris::new(1, 0.0, circular());
        assert_eq!(build_nav_frame(&ClockFields::default(), &eph, &page), Err(NavError::FrameIndex(25)));
    }

    #[test]
    fn wrong_length_and_checksum() {
        assert_eq!(NavFrame::from_bits(&vec![false; 1499]), Err(NavError::WrongLength { bits: 1499 }));
        let page = sample_almanac(3).pages().unwrap()[0];
        let eph = Ephemeris::new(1, 0.0, circular());
        let frame = build_nav_frame(&ClockFields::default(), &eph, &page).unwrap();
        for (bit, section) in [(10, Section::Clock), (450, Section::Ephemeris), (1000, Section::Almanac)] {
            let mut f = frame.clone();
            f.flip(bit);
            assert_eq!(parse_nav_frame(&f), Err(NavError::BadChecksum(section)));
        }
    }

    #[test]
    fn section_overflow() {
        let eph = Ephemeris::new(
            1,
            0.0,
            Orbit::Static {
                position: CartesianCoord::new(1e9, 0.0, 0.0),
            },
        );
        let page = sample_almanac(1).pages().unwrap()[0];
        assert_eq!(
            build_nav_frame(&ClockFields::default(), &eph, &page),
            Err(NavError::Overflow { field: "position" })
        );
        let too_many = Almanac {
            entries: vec![sample_almanac(1).entries[0]; 33],
            iono: IonoModel::default(),
        };
        assert!(too_many.pages().is_err());
    }

    #[test]
    fn quantization_is_idempotent() {
        let e = Ephemeris::new(5, 100.0, circular());
        let q = e.quantized().unwrap();
        assert_eq!(q.quantized().unwrap(), q);
        if let (Orbit::Circular(a), Orbit::Circular(b)) = (e.orbit, q.orbit) {
            assert!((a.phase_rad - b.phase_rad).abs() < 1e-8);
            assert!((a.radius_km - b.radius_km).abs() < 1e-3);
        }
    }
}
