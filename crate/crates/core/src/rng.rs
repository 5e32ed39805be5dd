//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha` 0.9, `ChaCha8Rng`).
//! The 256-bit key is four consecutive SplitMix64 outputs seeded with the
//! master seed, written little-endian; the 64-bit ChaCha stream id is the
//! replicate index; the block counter starts at zero. ChaCha is counter
//! based, so `(master_seed, stream_id)` fully determines the sequence and
//! distinct stream ids never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator handed to every simulation routine.
pub type Stream = ChaCha8Rng;

/// Identifies one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngSpec {
            master_seed,
            stream_id,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds the stream for `(master_seed, stream_id)`.
pub fn derive_rng_stream(spec: RngSpec) -> Stream {
    let mut state = spec.master_seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(spec.stream_id);
    rng
}

/// Derives an independent master seed for a named sub-experiment:
/// the first eight bytes (little-endian) of `SHA-256(seed_le || tag)`.
pub fn derive_seed(master_seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(tag.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// A family of replicate streams sharing one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFamily {
    pub master_seed: u64,
}

impl StreamFamily {
    pub fn new(master_seed: u64) -> Self {
        StreamFamily { master_seed }
    }

    /// Sub-family for a named part of an experiment.
    pub fn child(&self, tag: &str) -> StreamFamily {
        StreamFamily::new(derive_seed(self.master_seed, tag))
    }

    pub fn stream(&self, replicate: u64) -> Stream {
        derive_rng_stream(RngSpec::new(self.master_seed, replicate))
    }
}
