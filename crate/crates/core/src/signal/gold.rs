//! C/A Gold codes: generation, circular correlation and PRN acquisition.
//!
//! Each code is `G1 xor G2'` where G1 and G2 are 10-stage maximal-length
//! LFSRs (`1 + x^3 + x^10` and `1 + x^2 + x^3 + x^6 + x^8 + x^9 + x^10`) and
//! G2' is G2 read through the PRN's two phase-select taps.

use alloc::vec::Vec;
use core::fmt;

/// Chips per code period (one millisecond at 1.023 Mcps).
pub const CA_CODE_LEN: usize = 1023;
pub const CA_CHIP_RATE_HZ: f64 = 1.023e6;
pub const MAX_CA_PRN: u8 = 32;

/// Minimum correlation peak accepted by [`identify_satellite`].
pub const LOCK_THRESHOLD: i32 = 400;

/// Carrier frequencies, for reference.
pub const L1_FREQ_HZ: f64 = 1575.42e6;
pub const L2_FREQ_HZ: f64 = 1227.60e6;

const WORDS: usize = CA_CODE_LEN.div_ceil(64);

/// G2 phase-select taps (1-based register stages) for PRN 1..=32.
const G2_TAPS: [(usize, usize); 32] = [
    (2, 6),
    (3, 7),
    (4, 8),
    (5, 9),
    (1, 9),
    (2, 10),
    (1, 8),
    (2, 9),
    (3, 10),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (7, 8),
    (8, 9),
    (9, 10),
    (1, 4),
    (2, 5),
    (3, 6),
    (4, 7),
    (5, 8),
    (6, 9),
    (1, 3),
    (4, 6),
    (5, 7),
    (6, 8),
    (7, 9),
    (8, 10),
    (1, 6),
    (2, 7),
    (3, 8),
    (4, 9),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeError {
    PrnOutOfRange(u8),
    ShortInput { len: usize },
    NoLock { best_peak: i32 },
}

impl fmt::Display for CodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PrnOutOfRange(p) => write!(f, "prn {p} outside 1..={MAX_CA_PRN}"),
            Self::ShortInput { len } => {
                write!(f, "received sequence has {len} chips, need at least {CA_CODE_LEN}")
            }
            Self::NoLock { best_peak } => {
                write!(f, "no lock: best correlation {best_peak} below {LOCK_THRESHOLD}")
            }
        }
    }
}

impl core::error::Error for CodeError {}

/// One period of a satellite's C/A code; chips are 0 or 1.
#[derive(Clone, PartialEq, Eq)]
pub struct PrnCode {
    prn: u8,
    chips: [u8; CA_CODE_LEN],
}

impl fmt::Debug for PrnCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrnCode")
            .field("prn", &self.prn)
            .field("first_chips", &&self.chips[..10])
            .finish()
    }
}

impl PrnCode {
    pub fn prn(&self) -> u8 {
        self.prn
    }

    pub fn chips(&self) -> &[u8; CA_CODE_LEN] {
        &self.chips
    }

    /// Chip as ±1 (0 -> +1, 1 -> -1).
    pub fn bipolar(&self, i: usize) -> i32 {
        1 - 2 * self.chips[i % CA_CODE_LEN] as i32
    }

    /// The code delayed by `shift` chips: `out[i] = code[i - shift]`.
    pub fn shifted(&self, shift: usize) -> [u8; CA_CODE_LEN] {
        let mut out = [0u8; CA_CODE_LEN];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.chips[(i + CA_CODE_LEN - shift % CA_CODE_LEN) % CA_CODE_LEN];
        }
        out
    }
}

pub fn generate_ca_code(prn: u8) -> Result<PrnCode, CodeError> {
    if !(1..=MAX_CA_PRN).contains(&prn) {
        return Err(CodeError::PrnOutOfRange(prn));
    }
    let (s1, s2) = G2_TAPS[prn as usize - 1];
    let mut g1 = [1u8; 10];
    let mut g2 = [1u8; 10];
    let mut chips = [0u8; CA_CODE_LEN];
    for chip in chips.iter_mut() {
        *chip = g1[9] ^ g2[s1 - 1] ^ g2[s2 - 1];
        let fb1 = g1[2] ^ g1[9];
        let fb2 = g2[1] ^ g2[2] ^ g2[5] ^ g2[7] ^ g2[8] ^ g2[9];
        g1.copy_within(0..9, 1);
        g2.copy_within(0..9, 1);
        g1[0] = fb1;
        g2[0] = fb2;
    }
    Ok(PrnCode { prn, chips })
}

/// Circular correlation of the first 1023 received chips against `code`
/// delayed by `lag`: `sum_i r[i] * c[i - lag]` in ±1 form.
pub fn correlate(received: &[u8], code: &PrnCode, lag: usize) -> Result<i32, CodeError> {
    if received.len() < CA_CODE_LEN {
        return Err(CodeError::ShortInput { len: received.len() });
    }
    let lag = lag % CA_CODE_LEN;
    let mut sum = 0i32;
    for (i, &r) in received[..CA_CODE_LEN].iter().enumerate() {
        let c = code.chips[(i + CA_CODE_LEN - lag) % CA_CODE_LEN];
        sum += if (r & 1) == c { 1 } else { -1 };
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Acquisition {
    pub prn: u8,
    pub lag: usize,
    pub peak: i32,
}

type Packed = [u64; WORDS];

fn pack(chips: &[u8]) -> Packed {
    let mut out = [0u64; WORDS];
    for (i, &c) in chips.iter().take(CA_CODE_LEN).enumerate() {
        if c & 1 == 1 {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

fn packed_correlation(a: &Packed, b: &Packed) -> i32 {
    let disagree: u32 = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum();
    CA_CODE_LEN as i32 - 2 * disagree as i32
}

/// All 32 codes plus every circular shift of each, bit-packed, so that a
/// full (prn, lag) search is a few hundred thousand popcounts.
pub struct CodeBank {
    codes: Vec<PrnCode>,
    shifts: Vec<Vec<Packed>>,
}

impl Default for CodeBank {
    fn default() -> Self {
        Self::new()
    }
}

impl CodeBank {
    pub fn new() -> Self {
        let codes: Vec<PrnCode> = (1..=MAX_CA_PRN)
            .map(|p| generate_ca_code(p).expect("prn in range"))
            .collect();
        let shifts = codes
            .iter()
            .map(|c| (0..CA_CODE_LEN).map(|lag| pack(&c.shifted(lag))).collect())
            .collect();
        Self { codes, shifts }
    }

    pub fn code(&self, prn: u8) -> Result<&PrnCode, CodeError> {
        if !(1..=MAX_CA_PRN).contains(&prn) {
            return Err(CodeError::PrnOutOfRange(prn));
        }
        Ok(&self.codes[prn as usize - 1])
    }

    pub fn codes(&self) -> &[PrnCode] {
        &self.codes
    }

    /// Same value as [`correlate`], from the packed table.
    pub fn correlate(&self, received: &[u8], prn: u8, lag: usize) -> Result<i32, CodeError> {
        self.code(prn)?;
        if received.len() < CA_CODE_LEN {
            return Err(CodeError::ShortInput { len: received.len() });
        }
        let r = pack(received);
        Ok(packed_correlation(&r, &self.shifts[prn as usize - 1][lag % CA_CODE_LEN]))
    }

    /// Correlation of two codes at every lag: `out[lag] = sum a[i] b[i - lag]`.
    pub fn cross_correlation(&self, a: u8, b: u8) -> Result<Vec<i32>, CodeError> {
        let pa = pack(self.code(a)?.chips());
        self.code(b)?;
        Ok(self.shifts[b as usize - 1]
            .iter()
            .map(|shifted| packed_correlation(&pa, shifted))
            .collect())
    }

    /// Argmax of the correlation over every (prn, lag); ties resolve to the
    /// lowest prn, then the lowest lag.
    pub fn identify(&self, received: &[u8]) -> Result<Acquisition, CodeError> {
        if received.len() < CA_CODE_LEN {
            return Err(CodeError::ShortInput { len: received.len() });
        }
        let r = pack(received);
        let mut best = Acquisition {
            prn: 0,
            lag: 0,
            peak: i32::MIN,
        };
        for (idx, shifts) in self.shifts.iter().enumerate() {
            for (lag, s) in shifts.iter().enumerate() {
                let v = packed_correlation(&r, s);
                if v > best.peak {
                    best = Acquisition {
                        prn: idx as u8 + 1,
                        lag,
                        peak: v,
                    };
                }
            }
        }
        if best.peak < LOCK_THRESHOLD {
            return Err(CodeError::NoLock { best_peak: best.peak });
        }
        Ok(best)
    }
}

/// One-shot acquisition. Builds a [`CodeBank`]; hold one yourself when
/// identifying repeatedly.
pub fn identify_satellite(received: &[u8]) -> Result<Acquisition, CodeError> {
    CodeBank::new().identify(received)
}
