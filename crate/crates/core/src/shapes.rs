//! Canonical test curves.

use std::f64::consts::PI;

use crate::curve::Curve;
use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Counterclockwise circle of radius `r` about the origin, starting at `(r, 0)`.
pub fn circle(n: usize, r: f64) -> Result<Curve> {
    positive("radius", r)?;
    Curve::from_parametric(n, |t| vec![r * t.cos(), r * t.sin()])
}

pub fn circle_at(n: usize, r: f64, center: [f64; 2]) -> Result<Curve> {
    circle(n, r)?.translated(&center)
}

/// Ellipse `(a cos θ, b sin θ)` sampled uniformly in `θ` (not in arc length).
pub fn ellipse(n: usize, a: f64, b: f64) -> Result<Curve> {
    positive("semi-axis", a)?;
    positive("semi-axis", b)?;
    Curve::from_parametric(n, |t| vec![a * t.cos(), b * t.sin()])
}

/// Radially perturbed circle `r (1 + amplitude cos(mode θ))`.
pub fn perturbed_circle(n: usize, r: f64, amplitude: f64, mode: u32) -> Result<Curve> {
    positive("radius", r)?;
    if amplitude.abs() >= 1.0 {
        return Err(Error::InvalidParameter(
            "perturbation amplitude must be below 1".into(),
        ));
    }
    Curve::from_parametric(n, |t| {
        let rho = r * (1.0 + amplitude * (mode as f64 * t).cos());
        vec![rho * t.cos(), rho * t.sin()]
    })
}

/// A closed path made of straight pieces and circular arcs, sampled at equal
/// arc-length spacing.
struct Piecewise {
    pieces: Vec<Piece>,
}

enum Piece {
    Line { from: [f64; 2], to: [f64; 2] },
    Arc { center: [f64; 2], radius: f64, start: f64, sweep: f64 },
}

impl Piece {
    fn length(&self) -> f64 {
        match self {
            Piece::Line { from, to } => (to[0] - from[0]).hypot(to[1] - from[1]),
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn at(&self, u: f64) -> [f64; 2] {
        match self {
            Piece::Line { from, to } => [
                from[0] + u * (to[0] - from[0]),
                from[1] + u * (to[1] - from[1]),
            ],
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let a = start + u * sweep;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
        }
    }
}

impl Piecewise {
    fn sample(&self, n: usize) -> Result<Curve> {
        let lengths: Vec<f64> = self.pieces.iter().map(Piece::length).collect();
        let total: f64 = lengths.iter().sum();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = total * i as f64 / n as f64;
            let mut k = 0;
            while k + 1 < self.pieces.len() && s >= lengths[k] {
                s -= lengths[k];
                k += 1;
            }
            let u = if lengths[k] > 0.0 { s / lengths[k] } else { 0.0 };
            rows.push(self.pieces[k].at(u).to_vec());
        }
        Curve::from_rows(&rows)
    }
}

/// Square of half-side `half` with corners rounded by circular arcs of radius
/// `rho`, sampled at equal arc length starting at `(half, 0)`.
pub fn rounded_square(n: usize, half: f64, rho: f64) -> Result<Curve> {
    positive("half side", half)?;
    positive("corner radius", rho)?;
    if rho > half {
        return Err(Error::InvalidParameter(
            "corner radius exceeds half side".into(),
        ));
    }
    let e = half - rho;
    let mut pieces = Vec::new();
    // Right edge from (half, 0) upwards, then the four corners and edges.
    pieces.push(Piece::Line {
        from: [half, 0.0],
        to: [half, e],
    });
    let corners = [[e, e], [-e, e], [-e, -e], [e, -e]];
    let edges = [
        ([e, half], [-e, half]),
        ([-half, e], [-half, -e]),
        ([-e, -half], [e, -half]),
        ([half, -e], [half, 0.0]),
    ];
    for (k, (center, (from, to))) in corners.iter().zip(edges).enumerate() {
        pieces.push(Piece::Arc {
            center: *center,
            radius: rho,
            start: k as f64 * PI / 2.0,
            sweep: PI / 2.0,
        });
        pieces.push(Piece::Line { from, to });
    }
    Piecewise { pieces }.sample(n)
}

/// Stadium: two half circles of radius `r` joined by segments of length
/// `2·half_len`, sampled at equal arc length.
pub fn stadium(n: usize, half_len: f64, r: f64) -> Result<Curve> {
    positive("half length", half_len)?;
    positive("radius", r)?;
    let pieces = vec![
        Piece::Line {
            from: [-half_len, -r],
            to: [half_len, -r],
        },
        Piece::Arc {
            center: [half_len, 0.0],
            radius: r,
            start: -PI / 2.0,
            sweep: PI,
        },
        Piece::Line {
            from: [half_len, r],
            to: [-half_len, r],
        },
        Piece::Arc {
            center: [-half_len, 0.0],
            radius: r,
            start: PI / 2.0,
            sweep: PI,
        },
    ];
    Piecewise { pieces }.sample(n)
}

/// Flat closed curve tracing the segment `[-half_len, half_len] × {0}` forth
/// and back at constant speed. `n` must be divisible by 4 so that the turning
/// points are samples.
pub fn flat_segment(n: usize, half_len: f64) -> Result<Curve> {
    positive("half length", half_len)?;
    if n % 4 != 0 {
        return Err(Error::InvalidParameter(format!(
            "flat segment needs a sample count divisible by 4, got {n}"
        )));
    }
    let q = n / 4;
    let step = half_len / q as f64;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            // Triangle wave starting at the origin heading right.
            let x = if i <= q {
                i as f64 * step
            } else if i <= 3 * q {
                half_len - (i - q) as f64 * step
            } else {
                -half_len + (i - 3 * q) as f64 * step
            };
            vec![x, 0.0]
        })
        .collect();
    Curve::from_rows(&rows)
}

/// Names accepted by [`by_name`].
pub const SHAPE_NAMES: [&str; 6] = [
    "circle",
    "ellipse",
    "rounded-square",
    "flat-segment",
    "perturbed-circle",
    "stadium",
];

/// Builds a canonical shape with default proportions scaled by `size`.
pub fn by_name(name: &str, n: usize, size: f64) -> Result<Curve> {
    match name {
        "circle" => circle(n, size),
        "ellipse" => ellipse(n, 2.0 * size, size),
        "rounded-square" | "rounded_square" => rounded_square(n, size, 0.5 * size),
        "flat-segment" | "flat_segment" => flat_segment(n, size),
        "perturbed-circle" | "perturbed_circle" => perturbed_circle(n, size, 0.1, 5),
        "stadium" => stadium(n, size, 0.5 * size),
        other => Err(Error::InvalidParameter(format!("unknown shape {other:?}"))),
    }
}
