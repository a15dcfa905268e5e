//! Independent, reproducible RNG streams derived from one scenario seed.

/// Purpose of a derived stream; distinct streams never share seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Constellation = 1,
    Iono = 2,
    RoverNoise = 3,
    BaseNoise = 4,
    CorrectionLink = 5,
    Uplink = 6,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `stream`, further keyed by `keys` (epoch index, prn, ...).
pub fn derive_seed(seed: u64, stream: Stream, keys: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ splitmix(stream as u64));
    for &k in keys {
        h = splitmix(h ^ k);
    }
    h
}
