//! Seed derivation and the named per-path random streams.
//!
//! Path `i` of a batch with base seed `b` uses the seed
//! `splitmix64(b + (i + 1) * 0x9E3779B97F4A7C15)` (wrapping arithmetic), and
//! draws from two ChaCha8 streams keyed by that seed: stream 0 for the
//! Brownian increments and stream 1 for the excursion marks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub const STREAM_INCREMENTS: u64 = 0;
pub const STREAM_MARKS: u64 = 1;

/// The SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn path_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Where a path's randomness came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedRecord {
    pub base_seed: u64,
    pub index: u64,
    /// Written as a hex string: TOML integers stop at `i64::MAX`.
    #[serde(with = "hex_u64")]
    pub path_seed: u64,
}

mod hex_u64 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:#018x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let text = String::deserialize(d)?;
        let digits = text
            .strip_prefix("0x")
            .ok_or_else(|| D::Error::custom("expected a 0x-prefixed hex string"))?;
        u64::from_str_radix(digits, 16).map_err(D::Error::custom)
    }
}

impl SeedRecord {
    pub fn new(base_seed: u64, index: u64) -> Self {
        Self {
            base_seed,
            index,
            path_seed: path_seed(base_seed, index),
        }
    }

    pub fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.path_seed);
        rng.set_stream(stream);
        rng
    }

    pub fn increments(&self) -> ChaCha8Rng {
        self.stream(STREAM_INCREMENTS)
    }

    pub fn marks(&self) -> ChaCha8Rng {
        self.stream(STREAM_MARKS)
    }
}

impl From<u64> for SeedRecord {
    fn from(base_seed: u64) -> Self {
        Self::new(base_seed, 0)
    }
}
