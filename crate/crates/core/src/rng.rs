//! Deterministic random substreams.
//!
//! Every random draw in the simulator comes from a ChaCha8 stream whose key is
//! the run seed and whose stream id is a hash of a purpose tag plus a list of
//! indices (trial number, sample number, link id, ...). Work items therefore
//! draw the same numbers no matter how they are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id for a purpose tag and index path.
pub fn stream_id(tag: &str, indices: &[u64]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    for &i in indices {
        h = splitmix(h ^ i);
    }
    h
}

/// Independent generator for `(seed, tag, indices)`.
pub fn substream(seed: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, indices));
    rng
}
