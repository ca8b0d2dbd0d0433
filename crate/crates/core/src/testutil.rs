//! Shared fixtures for unit tests.

use crate::field::{ScalarField, VectorField3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use crate::grid::GridSpec;
use crate::llg::SpinField;
use crate::vec3::Vec3;
use std::f64::consts::PI;

pub const E3: Vec3 = [0.0, 0.0, 1.0];

/// Smooth periodic bump of height `amp` (radians away from e3) with an
/// azimuthal twist so that every component varies.
pub fn blob(grid: GridSpec, amp: f64) -> SpinField {
    blob_with_width(grid, amp, 1.5)
}

pub fn blob_with_width(grid: GridSpec, amp: f64, kappa: f64) -> SpinField {
    let l = grid.box_length();
    let c = 0.5 * l;
    let f = VectorField3::from_fn(grid, |x| {
        let w: f64 = (0..grid.dimension())
            .map(|a| 1.0 - (2.0 * PI * (x[a] - c) / l).cos())
            .sum();
        let eta = amp * (-kappa * w).exp();
        let phi = 2.0 * PI * x[0] / l;
        [eta.sin() * phi.cos(), eta.sin() * phi.sin(), eta.cos()]
    });
    SpinField::normalized(f, E3).unwrap()
}

/// Normalized plane wave `(ε cos k·x, ε sin k·x, 1)`.
pub fn wave(grid: GridSpec, eps: f64, k: [f64; 3]) -> SpinField {
    let f = VectorField3::from_fn(grid, |x| {
        let ph = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
        [eps * ph.cos(), eps * ph.sin(), 1.0]
    });
    SpinField::normalized(f, E3).unwrap()
}

/// Real field built from random modes with |j|_inf <= kmax.
pub fn band_limited(g: GridSpec, kmax: i64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.dimension();
    let mut terms = Vec::new();
    let range = -kmax..=kmax;
    for a in range.clone() {
        for b in if n > 1 { range.clone() } else { 0..=0 } {
            for c in if n > 2 { range.clone() } else { 0..=0 } {
                terms.push(([a, b, c], rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let base = 2.0 * PI / g.box_length();
    ScalarField::from_fn(g, |x| {
        terms
            .iter()
            .map(|(j, ca, cb)| {
                let phase = base * (j[0] as f64 * x[0] + j[1] as f64 * x[1] + j[2] as f64 * x[2]);
                ca * phase.cos() + cb * phase.sin()
            })
            .sum()
    })
}
