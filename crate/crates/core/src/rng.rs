//! Counter-based random streams.
//!
//! Every random draw in the simulator and the harness comes from a ChaCha8
//! stream addressed by `(seed, purpose, index)`, so results never depend on
//! the order in which events are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for. The tag keeps streams for different
/// purposes disjoint even when they share a seed and an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    World,
    Request,
    Candidates,
    Clicks,
    LongTerm,
    Assignment,
    Thompson(u32),
    Retrain(u32),
    Split,
    Folds,
    Bootstrap,
    Custom(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::World => 1,
            Purpose::Request => 2,
            Purpose::Candidates => 3,
            Purpose::Clicks => 4,
            Purpose::LongTerm => 5,
            Purpose::Assignment => 6,
            Purpose::Thompson(arm) => 0x1000_0000 | u64::from(arm),
            Purpose::Retrain(arm) => 0x2000_0000 | u64::from(arm),
            Purpose::Split => 7,
            Purpose::Folds => 8,
            Purpose::Bootstrap => 9,
            Purpose::Custom(tag) => 0x4000_0000_0000_0000 | tag,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(purpose.tag())));
    rng.set_stream(index);
    rng
}
