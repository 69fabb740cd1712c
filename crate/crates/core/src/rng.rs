//! Seeded randomness. Every randomized routine takes an explicit seed; per-trial
//! seeds are derived with a SplitMix64 step so trials can run in any order.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for trial `counter` of a run started from `base`.
pub fn derive_seed(base: u64, counter: u64) -> u64 {
    let mut z = base.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_vector(rng: &mut Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| gaussian(rng))
}

pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Uniform point on the unit sphere in `dim` dimensions (normalized Gaussian).
pub fn unit_vector(rng: &mut Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vector(rng, dim);
        let norm = v.norm();
        if norm > 1e-300 {
            return v / norm;
        }
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the sign of
/// R's diagonal folded into Q.
pub fn random_orthogonal(rng: &mut Rng, dim: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, dim, dim);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}
