//! Seeded random streams.
//!
//! Every consumer of randomness gets its own generator derived from a
//! `(seed, purpose)` pair, so two runs that differ in one perturbed channel
//! draw identical numbers on every other channel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

/// Named purposes for independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Targets,
    Exploration,
    Transition,
    Observation,
    Reward,
    Projection,
    Gradient,
    Probe,
    Matrix,
    Custom(u64),
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Targets => 1,
            Stream::Exploration => 2,
            Stream::Transition => 3,
            Stream::Observation => 4,
            Stream::Reward => 5,
            Stream::Projection => 6,
            Stream::Gradient => 7,
            Stream::Probe => 8,
            Stream::Matrix => 9,
            Stream::Custom(k) => 1000 + k,
        }
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for `purpose` under `seed`.
pub fn stream(seed: u64, purpose: Stream) -> StreamRng {
    StreamRng::seed_from_u64(mix(mix(seed) ^ purpose.tag()))
}

/// One standard normal draw.
pub fn normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Vector of `n` i.i.d. standard normal draws.
pub fn normal_vec<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}
