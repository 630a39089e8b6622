//! Seed derivation for named random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the experiment seed plus a
//! short textual tag (a language code, `"epoch:3"`, ...). Streams with
//! different tags are independent, and the derivation is stable across
//! platforms, which is what makes samples reproducible from the seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ChaCha8 stream for `(seed, tag)`: the 32-byte key is the seed in little
/// endian followed by up to 24 tag bytes, zero-padded.
pub fn derive(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let bytes = tag.as_bytes();
    let n = bytes.len().min(24);
    key[8..8 + n].copy_from_slice(&bytes[..n]);
    ChaCha8Rng::from_seed(key)
}
