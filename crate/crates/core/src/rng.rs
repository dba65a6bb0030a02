//! Seed streams. Every stochastic decision draws from a ChaCha stream keyed by
//! `(base_seed, lane)` and selected by a replica/path counter, so replicas can
//! be generated in any order and on any thread with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent purposes that draw randomness under one base seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    Disorder,
    Paths,
    Auxiliary,
}

impl Lane {
    fn tag(self) -> u64 {
        match self {
            Lane::Disorder => 0x6469_736f_7264_6572,
            Lane::Paths => 0x7061_7468_735f_5f5f,
            Lane::Auxiliary => 0x6175_7869_6c69_6172,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for replica `index` of `lane` under `base_seed`.
pub fn stream_rng(base_seed: u64, lane: Lane, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = base_seed ^ lane.tag();
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives a child base seed, e.g. one per grid point or per system size.
pub fn child_seed(base_seed: u64, label: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(label.wrapping_add(0x5eed)))
}
