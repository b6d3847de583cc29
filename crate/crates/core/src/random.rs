//! Seeded generators for random smooth curves, fields and homotopies.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::curve::{Curve, DeformationField};
use crate::error::Result;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Random star-shaped planar curve with radius
/// `1 + Σ_{k=2}^{modes} (a_k cos kθ + b_k sin kθ)/k²`, randomly scaled,
/// rotated and translated, sampled at `n` points on the curve with equal chords.
pub fn smooth_curve<R: Rng + ?Sized>(rng: &mut R, n: usize, modes: usize) -> Result<Curve> {
    let coeffs: Vec<(f64, f64)> = (2..=modes.max(2))
        .map(|k| {
            let k2 = (k * k) as f64;
            (0.3 * normal(rng) / k2, 0.3 * normal(rng) / k2)
        })
        .collect();
    let total: f64 = coeffs.iter().map(|(a, b)| a.abs() + b.abs()).sum();
    // Keep the radius in [0.6, 1.4].
    let shrink = if total > 0.4 { 0.4 / total } else { 1.0 };
    let scale = 0.5 + rng.random::<f64>();
    let angle = 2.0 * PI * rng.random::<f64>();
    let center = [normal(rng), normal(rng)];
    Curve::from_parametric_equal_chords(n, |t| {
        let mut r = 1.0;
        for (i, (a, b)) in coeffs.iter().enumerate() {
            let k = (i + 2) as f64;
            r += shrink * (a * (k * t).cos() + b * (k * t).sin());
        }
        let (s, c) = (t + angle).sin_cos();
        vec![center[0] + scale * r * c, center[1] + scale * r * s]
    })
}

/// Random band-limited field: independent Gaussian cosine and sine
/// coefficients in the sample index for frequencies `0..=band`.
pub fn band_limited_field<R: Rng + ?Sized>(
    rng: &mut R,
    samples: usize,
    dim: usize,
    band: usize,
) -> DeformationField {
    let table: Vec<(f64, f64)> = (0..samples)
        .map(|k| (2.0 * PI * k as f64 / samples as f64).sin_cos())
        .collect();
    let mut v = Array2::zeros((samples, dim));
    for d in 0..dim {
        for l in 0..=band {
            let (a, b) = (normal(rng), normal(rng));
            for i in 0..samples {
                let (sin, cos) = table[(l * i) % samples];
                v[[i, d]] += a * cos + if l == 0 { 0.0 } else { b * sin };
            }
        }
    }
    DeformationField::new(v).expect("finite by construction")
}

/// Band-limited field with the default band `N/4`.
pub fn field<R: Rng + ?Sized>(rng: &mut R, c: &Curve) -> DeformationField {
    band_limited_field(rng, c.samples(), c.dim(), c.samples() / 4)
}

/// Smooth low-frequency field scaled so that its largest vector has norm
/// `size`.
pub fn smooth_field<R: Rng + ?Sized>(rng: &mut R, c: &Curve, band: usize, size: f64) -> DeformationField {
    let h = band_limited_field(rng, c.samples(), c.dim(), band);
    let m = h.max_norm();
    h.scaled(if m > 0.0 { size / m } else { 0.0 })
}
