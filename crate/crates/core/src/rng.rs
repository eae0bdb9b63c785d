//! Reproducible random streams.
//!
//! Every ensemble member draws from ChaCha8 keyed by the master seed, with the
//! member index selecting the ChaCha stream (the 64-bit nonce). Streams are
//! independent and the output is identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for member `stream` of the ensemble keyed by `master`.
pub fn stream(master: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer, used to derive per-member seeds that are themselves
/// valid master seeds (for nested ensembles).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
