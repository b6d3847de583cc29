//! Sampled closed curves, deformation fields along them, and their discrete
//! differential geometry.
//!
//! A [`Curve`] holds `N` points indexed by the uniform parameter
//! `θ_i = 2πi/N`; index arithmetic is cyclic. Arc-length quantities use the
//! chord lengths `ℓ_i = |p_{i+1} - p_i|` and the trapezoidal weights
//! `w_i = (ℓ_{i-1} + ℓ_i) / 2`, so that `Σ w_i = L` exactly.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Smallest admissible number of samples.
pub const MIN_SAMPLES: usize = 8;

/// A closed immersed curve sampled at `N` uniform parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    points: Array2<f64>,
}

/// A vector field along a curve, one vector per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    vectors: Array2<f64>,
}

/// Cumulative arc length and discrete speeds of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcTable {
    /// `N + 1` values, starting at 0 and ending at the length `L`.
    pub cumulative_length: Vec<f64>,
    /// Discrete speed `|ċ(θ_i)| = w_i / Δθ`.
    pub speeds: Vec<f64>,
}

impl ArcTable {
    pub fn total_length(&self) -> f64 {
        *self.cumulative_length.last().unwrap_or(&0.0)
    }

    /// Trapezoidal arc weights `w_i`.
    pub fn weights(&self) -> Vec<f64> {
        let dtheta = 2.0 * PI / self.speeds.len() as f64;
        self.speeds.iter().map(|s| s * dtheta).collect()
    }
}

fn check_finite(data: &Array2<f64>) -> Result<()> {
    for (i, row) in data.outer_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(())
}

pub(crate) fn distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl Curve {
    /// Builds a curve from an `N × n` array of points.
    pub fn new(points: Array2<f64>) -> Result<Self> {
        let (n, dim) = points.dim();
        if n < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                min: MIN_SAMPLES,
                got: n,
            });
        }
        if dim < 2 {
            return Err(Error::AmbientDimension(dim));
        }
        check_finite(&points)?;
        for i in 0..n {
            let j = (i + 1) % n;
            let chord = distance(points.row(i), points.row(j));
            if chord <= 0.0 {
                return Err(Error::NotImmersed(format!(
                    "samples {i} and {j} coincide"
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(
                "rows of unequal length".to_string(),
            ));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let points = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(points)
    }

    /// Samples `f(θ)` at `θ_i = 2πi/N`.
    pub fn from_parametric<F>(n: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| f(2.0 * PI * i as f64 / n as f64))
            .collect();
        Self::from_rows(&rows)
    }

    /// Samples a `2π`-periodic parametrization at `n` points lying exactly on
    /// the curve and separated by equal chords, starting at `f(0)`.
    pub fn from_parametric_equal_chords<F>(n: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        if n < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                min: MIN_SAMPLES,
                got: n,
            });
        }
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        // Inscribed polygon length; at 4n points its n-th part exceeds every
        // equal chord of the closed-up walk.
        let fine = 4 * n;
        let dtheta = 2.0 * PI / fine as f64;
        let total: f64 = (0..fine)
            .map(|k| dist(&f(k as f64 * dtheta), &f((k + 1) as f64 * dtheta)))
            .sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NotImmersed("degenerate parametrization".into()));
        }
        // Walks n chords of length ell; returns the parameters and the
        // unwrapped parameter reached by the last step.
        let walk = |ell: f64| -> Option<(Vec<f64>, f64)> {
            let mut thetas = Vec::with_capacity(n + 1);
            let mut theta = 0.0;
            thetas.push(theta);
            let mut step = 2.0 * PI / n as f64;
            for _ in 0..n {
                let p = f(theta);
                let g = |t: f64| dist(&f(t), &p) - ell;
                // Secant from the previous step, which is nearly right.
                let mut t0 = theta + step;
                let mut g0 = g(t0);
                let mut t1 = theta + step * (1.0 - 1e-3);
                let mut g1 = g(t1);
                let mut found = None;
                for _ in 0..8 {
                    if g1.abs() <= 1e-15 * ell {
                        found = Some(t1);
                        break;
                    }
                    let t2 = t1 - g1 * (t1 - t0) / (g1 - g0);
                    if !(t2.is_finite() && t2 > theta && t2 < theta + 4.0 * step) {
                        break;
                    }
                    t0 = t1;
                    g0 = g1;
                    t1 = t2;
                    g1 = g(t1);
                    if (t1 - t0).abs() <= 1e-15 * (1.0 + t1.abs()) {
                        found = Some(t1);
                        break;
                    }
                }
                if let Some(t) = found {
                    step = t - theta;
                    theta = t;
                    thetas.push(theta);
                    continue;
                }
                let mut lo = theta;
                let mut g_lo = -ell;
                let mut hi = theta + 1.25 * step;
                let mut g_hi = g(hi);
                let mut tries = 0;
                while g_hi < 0.0 {
                    lo = hi;
                    g_lo = g_hi;
                    hi += 0.25 * step.max(dtheta);
                    g_hi = g(hi);
                    tries += 1;
                    if tries > 8 * fine {
                        return None;
                    }
                }
                let mut side = 0i32;
                let mut t = hi;
                for _ in 0..100 {
                    let mid = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
                    t = if mid.is_finite() && mid > lo && mid < hi { mid } else { 0.5 * (lo + hi) };
                    let v = g(t);
                    if v.abs() <= 1e-15 * ell || hi - lo <= 1e-15 * (1.0 + t.abs()) {
                        break;
                    }
                    if v > 0.0 {
                        hi = t;
                        g_hi = v;
                        if side == 1 {
                            g_lo *= 0.5;
                        }
                        side = 1;
                    } else {
                        lo = t;
                        g_lo = v;
                        if side == -1 {
                            g_hi *= 0.5;
                        }
                        side = -1;
                    }
                }
                step = t - theta;
                theta = t;
                thetas.push(theta);
            }
            let end = thetas.pop()?;
            Some((thetas, end - 2.0 * PI))
        };
        let mut hi = total / n as f64;
        let mut lo = 0.9 * hi;
        let (mut best, mut r_hi) = walk(hi).ok_or_else(|| Error::NotImmersed("walk failed".into()))?;
        let (lo_pos, mut r_lo) = walk(lo).ok_or_else(|| Error::NotImmersed("walk failed".into()))?;
        if r_lo > 0.0 || r_hi < 0.0 {
            return Err(Error::NotImmersed("cannot bracket chord length".into()));
        }
        if r_lo.abs() < r_hi.abs() {
            best = lo_pos;
        }
        let mut side = 0i32;
        for _ in 0..200 {
            let mid = (lo * r_hi - hi * r_lo) / (r_hi - r_lo);
            let mid = if mid.is_finite() && mid > lo && mid < hi {
                mid
            } else {
                0.5 * (lo + hi)
            };
            let (pos, r) = walk(mid).ok_or_else(|| Error::NotImmersed("walk failed".into()))?;
            best = pos;
            if r.abs() <= 1e-14 || hi - lo < 1e-16 * total {
                break;
            }
            if r > 0.0 {
                hi = mid;
                r_hi = r;
                if side == 1 {
                    r_lo *= 0.5;
                }
                side = 1;
            } else {
                lo = mid;
                r_lo = r;
                if side == -1 {
                    r_hi *= 0.5;
                }
                side = -1;
            }
        }
        let rows: Vec<Vec<f64>> = best.iter().map(|&t| f(t)).collect();
        Self::from_rows(&rows)
    }

    pub fn samples(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn into_points(self) -> Array2<f64> {
        self.points
    }

    /// Point `i`, with cyclic indexing.
    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i % self.samples())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points.outer_iter().map(|r| r.to_vec()).collect()
    }

    /// Chord lengths `ℓ_i = |p_{i+1} - p_i|`.
    pub fn chords(&self) -> Vec<f64> {
        let n = self.samples();
        (0..n)
            .map(|i| distance(self.points.row(i), self.points.row((i + 1) % n)))
            .collect()
    }

    pub fn length(&self) -> f64 {
        self.chords().iter().sum()
    }

    /// Trapezoidal arc weights `w_i = (ℓ_{i-1} + ℓ_i)/2`.
    pub fn arc_weights(&self) -> Vec<f64> {
        let chords = self.chords();
        let n = chords.len();
        (0..n)
            .map(|i| 0.5 * (chords[(i + n - 1) % n] + chords[i]))
            .collect()
    }

    pub fn arc_table(&self) -> ArcTable {
        let chords = self.chords();
        let n = chords.len();
        let mut cumulative_length = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cumulative_length.push(0.0);
        for c in &chords {
            acc += c;
            cumulative_length.push(acc);
        }
        let dtheta = 2.0 * PI / n as f64;
        let speeds = (0..n)
            .map(|i| 0.5 * (chords[(i + n - 1) % n] + chords[i]) / dtheta)
            .collect();
        ArcTable {
            cumulative_length,
            speeds,
        }
    }

    /// Largest relative deviation of a chord from the mean chord `L/N`.
    pub fn arc_uniformity(&self) -> f64 {
        let chords = self.chords();
        let mean = chords.iter().sum::<f64>() / chords.len() as f64;
        chords
            .iter()
            .map(|c| ((c - mean) / mean).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_arc_uniform(&self, tol: f64) -> bool {
        self.arc_uniformity() < tol
    }

    /// Arc-weighted barycenter `(1/L) Σ w_i p_i`.
    pub fn barycenter(&self) -> Vec<f64> {
        mean_field(&DeformationField::position(self), self)
    }

    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "translation of length {} for a curve in R^{}",
                v.len(),
                self.dim()
            )));
        }
        let mut points = self.points.clone();
        for mut row in points.outer_iter_mut() {
            for (x, d) in row.iter_mut().zip(v) {
                *x += d;
            }
        }
        Self::new(points)
    }

    /// Uniform scaling about the origin.
    pub fn scaled(&self, rho: f64) -> Result<Self> {
        Self::new(&self.points * rho)
    }

    /// Planar rotation about the origin.
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        if self.dim() != 2 {
            return Err(Error::PlanarOnly(self.dim()));
        }
        let (s, c) = angle.sin_cos();
        let mut points = self.points.clone();
        for mut row in points.outer_iter_mut() {
            let (x, y) = (row[0], row[1]);
            row[0] = c * x - s * y;
            row[1] = s * x + c * y;
        }
        Self::new(points)
    }

    /// The curve `c + t·h`.
    pub fn displaced(&self, h: &DeformationField, t: f64) -> Result<Self> {
        h.check_aligned(self)?;
        Self::new(&self.points + &(&h.vectors * t))
    }

    /// Cyclic relabeling: sample `i` of the result is sample `i + shift`.
    pub fn shifted(&self, shift: usize) -> Self {
        let n = self.samples();
        let mut points = Array2::zeros(self.points.dim());
        for i in 0..n {
            points.row_mut(i).assign(&self.points.row((i + shift) % n));
        }
        Self { points }
    }

    /// Orientation reversal keeping the first sample.
    pub fn reversed(&self) -> Self {
        let n = self.samples();
        let mut points = Array2::zeros(self.points.dim());
        for i in 0..n {
            points.row_mut(i).assign(&self.points.row((n - i) % n));
        }
        Self { points }
    }
}

impl DeformationField {
    pub fn new(vectors: Array2<f64>) -> Result<Self> {
        check_finite(&vectors)?;
        Ok(Self { vectors })
    }

    pub fn zeros(samples: usize, dim: usize) -> Self {
        Self {
            vectors: Array2::zeros((samples, dim)),
        }
    }

    /// The same vector at every sample.
    pub fn constant(samples: usize, v: &[f64]) -> Self {
        let mut vectors = Array2::zeros((samples, v.len()));
        for mut row in vectors.outer_iter_mut() {
            for (x, y) in row.iter_mut().zip(v) {
                *x = *y;
            }
        }
        Self { vectors }
    }

    /// The position field `h_i = p_i`.
    pub fn position(c: &Curve) -> Self {
        Self {
            vectors: c.points.clone(),
        }
    }

    /// Builds a field from a per-sample closure `f(i, p_i)`.
    pub fn from_fn<F>(c: &Curve, f: F) -> Result<Self>
    where
        F: Fn(usize, ArrayView1<f64>) -> Vec<f64>,
    {
        let rows: Vec<f64> = (0..c.samples())
            .flat_map(|i| {
                let v = f(i, c.point(i));
                assert_eq!(v.len(), c.dim(), "field vector has wrong dimension");
                v
            })
            .collect();
        let vectors = Array2::from_shape_vec((c.samples(), c.dim()), rows)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(vectors)
    }

    pub fn samples(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn into_vectors(self) -> Array2<f64> {
        self.vectors
    }

    pub fn vector(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i % self.samples())
    }

    pub fn check_aligned(&self, c: &Curve) -> Result<()> {
        if self.vectors.dim() != c.points.dim() {
            return Err(Error::DimensionMismatch(format!(
                "field is {:?} but curve is {:?}",
                self.vectors.dim(),
                c.points.dim()
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            vectors: &self.vectors * a,
        }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        if self.vectors.dim() != other.vectors.dim() {
            return Err(Error::DimensionMismatch("field shapes differ".into()));
        }
        Ok(Self {
            vectors: &self.vectors + &(&other.vectors * a),
        })
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        self.vectors
            .outer_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Curve length by the chord rule.
pub fn length(c: &Curve) -> f64 {
    c.length()
}

/// Arc-weighted mean `(1/L) Σ w_i h_i`.
pub fn mean_field(h: &DeformationField, c: &Curve) -> Vec<f64> {
    // Accumulate deviations from the first sample so constants are exact.
    let w = c.arc_weights();
    let total: f64 = w.iter().sum();
    let base = h.vectors.row(0).to_vec();
    let mut acc = vec![0.0; h.dim()];
    for (row, wi) in h.vectors.outer_iter().zip(&w) {
        for ((m, x), b) in acc.iter_mut().zip(row.iter()).zip(&base) {
            *m += wi * (x - b);
        }
    }
    base.iter().zip(&acc).map(|(b, a)| b + a / total).collect()
}

/// Iterated centered arc-length derivative
/// `(D_s h)_i = (h_{i+1} - h_{i-1}) / (2 w_i)`.
pub fn ds_derivative(h: &DeformationField, c: &Curve, order: usize) -> Result<DeformationField> {
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidParameter(format!(
            "derivative order must be in 1..=4, got {order}"
        )));
    }
    h.check_aligned(c)?;
    let w = c.arc_weights();
    let n = c.samples();
    let mut current = h.vectors.clone();
    for _ in 0..order {
        let mut next = Array2::zeros(current.dim());
        for i in 0..n {
            let fwd = current.row((i + 1) % n);
            let bwd = current.row((i + n - 1) % n);
            let mut out = next.row_mut(i);
            for k in 0..out.len() {
                out[k] = (fwd[k] - bwd[k]) / (2.0 * w[i]);
            }
        }
        current = next;
    }
    DeformationField::new(current)
}

/// Unit tangent from the centered difference, normalized per sample.
pub fn unit_tangent(c: &Curve) -> DeformationField {
    let n = c.samples();
    let mut t = Array2::zeros(c.points.dim());
    for i in 0..n {
        let d = &c.point(i + 1) - &c.point(i + n - 1);
        let norm = d.dot(&d).sqrt();
        t.row_mut(i).assign(&(d / norm));
    }
    DeformationField { vectors: t }
}

/// Unit chord directions `(p_{i+1} - p_i)/ℓ_i`.
pub(crate) fn chord_directions(c: &Curve) -> (Array2<f64>, Vec<f64>) {
    let n = c.samples();
    let chords = c.chords();
    let mut t = Array2::zeros(c.points.dim());
    for i in 0..n {
        let d = &c.point(i + 1) - &c.point(i);
        t.row_mut(i).assign(&(d / chords[i]));
    }
    (t, chords)
}

/// Curvature vector `D_s² c` from the compact stencil
/// `(T_{i+1/2} - T_{i-1/2}) / w_i` over chord directions.
pub fn curvature_vector(c: &Curve) -> DeformationField {
    let n = c.samples();
    let (t, chords) = chord_directions(c);
    let mut k = Array2::zeros(c.points.dim());
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let w = 0.5 * (chords[prev] + chords[i]);
        k.row_mut(i).assign(&((&t.row(i) - &t.row(prev)) / w));
    }
    DeformationField { vectors: k }
}

/// Tangent, normal, curvature vector and scalar curvature of a planar curve.
#[derive(Debug, Clone)]
pub struct PlanarFrame {
    pub tangent: DeformationField,
    /// Tangent rotated by +90°.
    pub normal: DeformationField,
    pub curvature_vector: DeformationField,
    /// `κ = ⟨D_s² c, N⟩`.
    pub curvature: Vec<f64>,
}

pub fn tangent_normal_curvature(c: &Curve) -> Result<PlanarFrame> {
    if c.dim() != 2 {
        return Err(Error::PlanarOnly(c.dim()));
    }
    let tangent = unit_tangent(c);
    let mut normal = Array2::zeros(c.points.dim());
    for (i, t) in tangent.vectors.outer_iter().enumerate() {
        normal[[i, 0]] = -t[1];
        normal[[i, 1]] = t[0];
    }
    let curvature_vector = curvature_vector(c);
    let curvature = curvature_vector
        .vectors
        .outer_iter()
        .zip(normal.outer_iter())
        .map(|(k, nn)| k.dot(&nn))
        .collect();
    Ok(PlanarFrame {
        tangent,
        normal: DeformationField { vectors: normal },
        curvature_vector,
        curvature,
    })
}

/// Location of a resampled point on the source polyline: segment index and
/// fraction along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylinePosition {
    pub segment: usize,
    pub fraction: f64,
}

/// Result of arc-length resampling, keeping the map back to the source.
#[derive(Debug, Clone)]
pub struct ArcResampling {
    pub curve: Curve,
    pub positions: Vec<PolylinePosition>,
    /// Source arc length at each new sample.
    pub source_arc: Vec<f64>,
    source_length: f64,
}

impl ArcResampling {
    /// Linear interpolation of a field given on the source curve.
    pub fn interpolate(&self, h: &DeformationField) -> DeformationField {
        let n_src = h.samples();
        let mut out = Array2::zeros((self.positions.len(), h.dim()));
        for (k, pos) in self.positions.iter().enumerate() {
            let a = h.vectors.row(pos.segment % n_src);
            let b = h.vectors.row((pos.segment + 1) % n_src);
            let u = pos.fraction;
            out.row_mut(k).assign(&(&a * (1.0 - u) + &b * u));
        }
        DeformationField { vectors: out }
    }

    /// Arc parameter of the resampled curve (in `[0, L')`) corresponding to
    /// the given source arc position.
    pub fn resampled_arc_of(&self, source_s: f64) -> f64 {
        let m = self.source_arc.len();
        let spacing = self.curve.length() / m as f64;
        let s = source_s.rem_euclid(self.source_length);
        let k = match self
            .source_arc
            .binary_search_by(|v| v.partial_cmp(&s).unwrap())
        {
            Ok(k) => return k as f64 * spacing,
            Err(k) => k.saturating_sub(1),
        };
        let lo = self.source_arc[k];
        let hi = if k + 1 < m {
            self.source_arc[k + 1]
        } else {
            self.source_length
        };
        (k as f64 + (s - lo) / (hi - lo)) * spacing
    }
}

struct Walker<'a> {
    pts: &'a Array2<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

impl<'a> Walker<'a> {
    fn point_at(&self, seg: usize, u: f64) -> Vec<f64> {
        let n = self.pts.nrows();
        let a = self.pts.row(seg % n);
        let b = self.pts.row((seg + 1) % n);
        a.iter().zip(b.iter()).map(|(x, y)| x + u * (y - x)).collect()
    }

    fn arc(&self, seg: usize, u: f64) -> f64 {
        let n = self.pts.nrows();
        let lap = (seg / n) as f64 * self.total;
        let s = seg % n;
        lap + self.cumulative[s] + u * (self.cumulative[s + 1] - self.cumulative[s])
    }

    /// Walks `m` equal chords of length `ell` from sample 0; returns the
    /// positions and the unwrapped arc reached after the last step.
    fn walk(&self, m: usize, ell: f64) -> Option<(Vec<(usize, f64)>, f64)> {
        let mut positions = Vec::with_capacity(m);
        let (mut seg, mut u) = (0usize, 0.0f64);
        positions.push((0, 0.0));
        let mut q = self.point_at(0, 0.0);
        for _ in 0..m {
            let (s2, u2) = self.next_exit(&q, seg, u, ell)?;
            seg = s2;
            u = u2;
            q = self.point_at(seg, u);
            positions.push((seg, u));
        }
        let end = positions.pop().map(|(s, u)| self.arc(s, u))?;
        Some((positions, end))
    }

    fn next_exit(&self, q: &[f64], seg: usize, u: f64, ell: f64) -> Option<(usize, f64)> {
        // The current point is inside the ball, so the exit is the larger root
        // on the first segment that leaves it.
        let n = self.pts.nrows();
        let limit = seg + 2 * n + 2;
        let mut s = seg;
        let mut u0 = u;
        while s < limit {
            let a = self.pts.row(s % n);
            let b = self.pts.row((s + 1) % n);
            let mut dd = 0.0;
            let mut ad = 0.0;
            let mut aa = 0.0;
            for k in 0..q.len() {
                let d = b[k] - a[k];
                let aq = a[k] - q[k];
                dd += d * d;
                ad += aq * d;
                aa += aq * aq;
            }
            let c0 = aa - ell * ell;
            if s != seg && c0 >= 0.0 {
                return Some((s, 0.0));
            }
            let disc = (ad * ad - dd * c0).max(0.0);
            let root = (-ad + disc.sqrt()) / dd;
            if root >= u0 && root <= 1.0 {
                return Some((s, root));
            }
            s += 1;
            u0 = 0.0;
        }
        None
    }
}

/// Resamples to `m` points with equal spacing along the polyline.
///
/// Points are placed by linear interpolation along cumulative chord length;
/// a refinement pass then adjusts the common spacing so that all `m` chords of
/// the output polygon are equal.
pub fn resample_arclength(c: &Curve, m: usize) -> Result<Curve> {
    Ok(arc_resampling(c, m)?.curve)
}

pub fn arc_resampling(c: &Curve, m: usize) -> Result<ArcResampling> {
    if m < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            min: MIN_SAMPLES,
            got: m,
        });
    }
    let table = c.arc_table();
    let total = table.total_length();
    if !(total > 0.0) {
        return Err(Error::NotImmersed("zero-length curve".into()));
    }
    let walker = Walker {
        pts: &c.points,
        cumulative: table.cumulative_length.clone(),
        total,
    };
    let tol = 1e-13 * total;
    let residual = |ell: f64| walker.walk(m, ell).map(|(pos, end)| (pos, end - total));

    let mut hi = total / m as f64;
    let (mut best, mut r_hi) = residual(hi)
        .ok_or_else(|| Error::NotImmersed("resampling walk failed".into()))?;
    if r_hi.abs() > tol {
        let mut lo = 0.5 * hi;
        let mut r_lo = f64::NAN;
        for _ in 0..40 {
            match residual(lo) {
                Some((_, r)) if r < 0.0 => {
                    r_lo = r;
                    break;
                }
                _ => lo *= 0.5,
            }
        }
        if !r_lo.is_finite() {
            return Err(Error::NotImmersed("cannot bracket resampling spacing".into()));
        }
        // Illinois variant of regula falsi.
        let mut side = 0i32;
        for _ in 0..200 {
            let mid = (lo * r_hi - hi * r_lo) / (r_hi - r_lo);
            let mid = if mid.is_finite() && mid > lo && mid < hi {
                mid
            } else {
                0.5 * (lo + hi)
            };
            let (pos, r) = residual(mid)
                .ok_or_else(|| Error::NotImmersed("resampling walk failed".into()))?;
            if r.abs() <= tol || (hi - lo) < 1e-16 * total {
                best = pos;
                break;
            }
            if r > 0.0 {
                hi = mid;
                r_hi = r;
                best = pos;
                if side == 1 {
                    r_lo *= 0.5;
                }
                side = 1;
            } else {
                lo = mid;
                r_lo = r;
                if side == -1 {
                    r_hi *= 0.5;
                }
                side = -1;
            }
        }
    }

    let n = c.samples();
    let dim = c.dim();
    let mut points = Array2::zeros((m, dim));
    let mut positions = Vec::with_capacity(m);
    let mut source_arc = Vec::with_capacity(m);
    for (k, &(seg, u)) in best.iter().enumerate() {
        let p = walker.point_at(seg, u);
        for d in 0..dim {
            points[[k, d]] = p[d];
        }
        positions.push(PolylinePosition {
            segment: seg % n,
            fraction: u,
        });
        source_arc.push(walker.arc(seg, u));
    }
    Ok(ArcResampling {
        curve: Curve::new(points)?,
        positions,
        source_arc,
        source_length: total,
    })
}
