//! Seeded random streams. Every draw is a pure function of `(seed, iteration, role)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// What a stream is used for. The tag selects an independent ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Role {
    Coordinates = 1,
    CovariateX2 = 2,
    CovariateX3 = 3,
    Beta1 = 4,
    Beta2 = 5,
    Beta3Spatial = 6,
    Beta3Spline = 7,
    Noise = 8,
}

pub fn substream(seed: u64, iteration: u64, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iteration << 8) | role as u64);
    rng
}

pub fn standard_normals<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
