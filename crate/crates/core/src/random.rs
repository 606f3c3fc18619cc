//! Seeded random helpers shared by the initializer and the verification suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tensor with entries drawn uniformly from `(-bound, bound)`.
pub fn uniform_tensor(rng: &mut impl Rng, shape: &[usize], bound: f32) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..bound))
}

/// Random distribution over `k` entries (nonnegative, sums to one).
pub fn random_simplex(rng: &mut impl Rng, k: usize) -> Vec<f32> {
    let raw: Vec<f32> = (0..k).map(|_| rng.gen_range(0.05f32..1.0)).collect();
    let s: f32 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}
