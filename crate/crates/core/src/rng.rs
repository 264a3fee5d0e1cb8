//! Seeded pseudo-random streams.
//!
//! Every random draw in the crate (weight init, shuffling, synthetic data,
//! splits) goes through [`Prng`], a 128-bit-state PCG with XSL-RR output.
//! Its output sequence is fixed by the algorithm, so a seed reproduces the
//! same run on any platform.

use rand::SeedableRng;
use rand_pcg::Pcg64;

pub type Prng = Pcg64;

/// Identifier stored in run metadata.
pub const PRNG_ID: &str = "pcg64-xsl-rr-128/64 (rand_pcg 0.10, seed_from_u64)";

/// Named sub-streams so that the init, shuffle and data draws of one seed
/// never share a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Data = 3,
    Split = 4,
    Noise = 5,
}

pub fn seeded(seed: u64) -> Prng {
    Prng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: Stream) -> Prng {
    Prng::seed_from_u64(mix(seed, stream as u64))
}

/// Deterministically combine a base seed with a stream tag (SplitMix64 finalizer).
pub fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
