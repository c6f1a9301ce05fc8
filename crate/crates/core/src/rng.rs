//! Deterministic random streams derived from a master seed.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for `seed` identified by `key`.
pub fn stream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let id = key.iter().fold(0x5EED_u64, |h, &k| splitmix(h ^ k));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Circularly-symmetric complex Gaussian with variance `var`.
pub fn complex_normal<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

pub fn complex_normal_vec<R: Rng>(rng: &mut R, len: usize, var: f64) -> Vec<Complex64> {
    (0..len).map(|_| complex_normal(rng, var)).collect()
}

/// Domain tags keeping streams of different purposes apart.
pub mod tag {
    pub const NOISE: u64 = 1;
    pub const PILOT: u64 = 2;
    pub const SCENE: u64 = 3;
}
