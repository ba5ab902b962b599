//! Direction sampling and deterministic RNG stream derivation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::Vec3;

pub type Rng64 = ChaCha8Rng;

/// Independent stream for `(seed, a, b)`; used for per-view / per-tile RNGs so
/// results do not depend on thread scheduling.
pub fn stream_rng(seed: u64, a: u64, b: u64) -> Rng64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.rotate_left(32) ^ b);
    rng
}

pub fn uniform_sphere(u1: f64, u2: f64) -> Vec3 {
    let z = 1.0 - 2.0 * u1;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

pub const UNIFORM_SPHERE_PDF: f64 = 1.0 / (4.0 * PI);
pub const UNIFORM_HEMISPHERE_PDF: f64 = 1.0 / (2.0 * PI);

/// Uniform over the hemisphere `z >= 0`.
pub fn uniform_hemisphere(u1: f64, u2: f64) -> Vec3 {
    let z = u1;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Cosine-weighted over `z >= 0`; pdf `z / pi`.
pub fn cosine_hemisphere(u1: f64, u2: f64) -> Vec3 {
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    Vec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u1).max(0.0).sqrt())
}

/// Maps a local direction (z up) into the frame around the unit vector `n`.
pub fn to_world(local: Vec3, n: Vec3) -> Vec3 {
    let (t, b) = n.orthonormal_basis();
    t * local.x + b * local.y + n * local.z
}

pub fn sample_uniform_sphere(rng: &mut impl Rng) -> Vec3 {
    uniform_sphere(rng.random(), rng.random())
}

/// Uniform direction in the hemisphere around `n`.
pub fn sample_uniform_hemisphere(n: Vec3, rng: &mut impl Rng) -> Vec3 {
    to_world(uniform_hemisphere(rng.random(), rng.random()), n)
}
