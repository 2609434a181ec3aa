//! Seed management.
//!
//! Every random stream in the crate is a ChaCha8 generator derived from a
//! single root seed. A child stream is identified by a `(Purpose, index)`
//! pair: the purpose selects the 256-bit key (the root seed mixed with a
//! fixed per-purpose tag through SplitMix64) and the index selects one of the
//! 2^64 ChaCha streams under that key. Episode `i` of an evaluation therefore
//! always sees the same randomness no matter which worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Pretrain,
    Train,
    Evaluate,
    Checkpoint,
    Audit,
    Misc,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Pretrain => 0x7072_6574_7261_696e,
            Purpose::Train => 0x7472_6169_6e00_0000,
            Purpose::Evaluate => 0x6576_616c_7561_7465,
            Purpose::Checkpoint => 0x6368_6563_6b70_7400,
            Purpose::Audit => 0x6175_6469_7400_0000,
            Purpose::Misc => 0x6d69_7363_0000_0000,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key derivation for `(root, purpose)`.
pub fn derive_key(root: u64, purpose: Purpose) -> [u8; 32] {
    let mut state = root ^ purpose.tag();
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Child stream `index` of `purpose` under `root`.
pub fn stream(root: u64, purpose: Purpose, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::from_seed(derive_key(root, purpose));
    rng.set_stream(index);
    rng
}

/// Derives a fresh root seed, used when one experiment spawns another
/// (e.g. an audit retraining run) that must not share streams with it.
pub fn child_seed(root: u64, purpose: Purpose, index: u64) -> u64 {
    let mut state = root ^ purpose.tag() ^ index.rotate_left(17);
    splitmix64(&mut state)
}
