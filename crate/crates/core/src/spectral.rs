//! Discrete Fourier representation of fields on arc-uniform curves.
//!
//! Coefficients are normalized so that `ĥ(0)` is the mean of the field:
//! `ĥ(l) = (1/N) Σ_i h_i exp(-2πi l i / N)` for `l = -N/2 .. N/2 - 1`.

use std::cell::RefCell;
use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::curve::{Curve, DeformationField};
use crate::error::{Error, Result};

/// Relative chord deviation below which a curve counts as arc-uniform.
pub const ARC_UNIFORM_TOL: f64 = 1e-6;

const HERMITIAN_TOL: f64 = 1e-10;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform_columns(data: &mut Array2<Complex64>, inverse: bool) {
    let n = data.nrows();
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for mut col in data.columns_mut() {
        for (b, x) in buf.iter_mut().zip(col.iter()) {
            *b = *x;
        }
        fft.process(&mut buf);
        for (x, b) in col.iter_mut().zip(&buf) {
            *x = *b;
        }
    }
}

/// Normalized forward transform of each column; rows in FFT order.
pub fn forward(values: ArrayView2<f64>) -> Array2<Complex64> {
    let n = values.nrows();
    let mut data = values.mapv(|x| Complex64::new(x, 0.0));
    transform_columns(&mut data, false);
    data.mapv_inplace(|z| z / n as f64);
    data
}

/// Inverse of [`forward`], complex-valued.
pub fn inverse(coeffs: ArrayView2<Complex64>) -> Array2<Complex64> {
    let mut data = coeffs.to_owned();
    transform_columns(&mut data, true);
    data
}

/// Signed frequency of FFT row `k` in `-N/2 .. N/2 - 1`.
pub fn frequency(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Applies a per-frequency multiplier to real periodic samples (columns).
pub fn apply_multiplier<F>(values: ArrayView2<f64>, m: F) -> Array2<f64>
where
    F: Fn(i64) -> Complex64,
{
    let n = values.nrows();
    let mut c = forward(values);
    for (k, mut row) in c.rows_mut().into_iter().enumerate() {
        let f = m(frequency(k, n));
        row.mapv_inplace(|z| z * f);
    }
    inverse(c.view()).mapv(|z| z.re)
}

/// Derivative of order `k` with respect to a uniform parameter on `[0, 2π)`.
/// For odd orders the Nyquist mode is dropped.
pub fn periodic_derivative(values: ArrayView2<f64>, order: u32) -> Array2<f64> {
    let n = values.nrows() as i64;
    apply_multiplier(values, |l| {
        if order % 2 == 1 && n % 2 == 0 && l == -n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, l as f64).powu(order)
        }
    })
}

/// Fourier coefficients of a field sampled on an arc-uniform curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Array2<Complex64>,
    length: f64,
}

impl SpectralField {
    /// `coeffs` is `N × n` in FFT order (row `k` holds frequency
    /// [`frequency`]`(k, N)`).
    pub fn from_coeffs(coeffs: Array2<Complex64>, length: f64) -> Result<Self> {
        let n = coeffs.nrows();
        if n % 2 == 1 {
            return Err(Error::OddSampleCount(n));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::NotImmersed("host length must be positive".into()));
        }
        Ok(Self { coeffs, length })
    }

    pub fn samples(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    fn row_of(&self, l: i64) -> usize {
        let n = self.samples() as i64;
        assert!(
            (-n / 2..n / 2).contains(&l),
            "frequency {l} outside -N/2..N/2"
        );
        l.rem_euclid(n) as usize
    }

    /// Coefficient vector `ĥ(l)`.
    pub fn coeff(&self, l: i64) -> ArrayView1<'_, Complex64> {
        self.coeffs.row(self.row_of(l))
    }

    pub fn set_coeff(&mut self, l: i64, v: &[Complex64]) {
        let r = self.row_of(l);
        for (x, y) in self.coeffs.row_mut(r).iter_mut().zip(v) {
            *x = *y;
        }
    }

    /// Iterates `(l, ĥ(l))` over all frequencies.
    pub fn modes(&self) -> impl Iterator<Item = (i64, ArrayView1<'_, Complex64>)> {
        let n = self.samples();
        self.coeffs
            .outer_iter()
            .enumerate()
            .map(move |(k, r)| (frequency(k, n), r))
    }

    /// `|ĥ(l)|²` summed over components.
    pub fn mode_energy(&self, l: i64) -> f64 {
        self.coeff(l).iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Σ_l |ĥ(l)|²`, equal to `(1/L)∫|h|² ds` by Parseval.
    pub fn power(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Spectral mass beyond `|l| > band`.
    pub fn tail_power(&self, band: usize) -> f64 {
        self.modes()
            .filter(|(l, _)| l.unsigned_abs() as usize > band)
            .map(|(_, r)| r.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// The mean `h̄ = ĥ(0)`.
    pub fn mean(&self) -> Vec<f64> {
        self.coeff(0).iter().map(|z| z.re).collect()
    }

    /// Largest violation of `ĥ(-l) = conj ĥ(l)`; the Nyquist row must be real.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.samples();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let j = (n - k) % n;
            for (a, b) in self.coeffs.row(k).iter().zip(self.coeffs.row(j).iter()) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }

    /// Multiplies `ĥ(l)` by `m(l)`.
    pub fn map_multiplier<F: Fn(i64) -> f64>(&self, m: F) -> Self {
        let n = self.samples();
        let mut coeffs = self.coeffs.clone();
        for (k, mut row) in coeffs.outer_iter_mut().enumerate() {
            let f = m(frequency(k, n));
            row.mapv_inplace(|z| z * f);
        }
        Self {
            coeffs,
            length: self.length,
        }
    }

    /// Trigonometric interpolant at arc position `s`, with the Nyquist mode
    /// split symmetrically so the result is real for real fields.
    pub fn eval_at(&self, s: f64) -> Vec<f64> {
        let n = self.samples();
        let x = 2.0 * PI * s / self.length;
        let mut out = vec![0.0; self.dim()];
        for (l, row) in self.modes() {
            let w = if l == -(n as i64) / 2 {
                Complex64::new((l as f64 * x).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, l as f64 * x)
            };
            for (o, z) in out.iter_mut().zip(row.iter()) {
                *o += (z * w).re;
            }
        }
        out
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.coeffs.dim() != other.coeffs.dim() {
            return Err(Error::DimensionMismatch(format!(
                "spectra of shape {:?} and {:?}",
                self.coeffs.dim(),
                other.coeffs.dim()
            )));
        }
        let rel = (self.length - other.length).abs() / self.length.max(other.length);
        if rel > 1e-12 {
            return Err(Error::DimensionMismatch(format!(
                "host lengths differ: {} vs {}",
                self.length, other.length
            )));
        }
        Ok(())
    }

    /// `Σ_l m(l) Re(ĥ(l)·conj k̂(l))`.
    pub fn weighted_pairing<F: Fn(i64) -> f64>(&self, other: &Self, m: F) -> Result<f64> {
        self.check_compatible(other)?;
        let n = self.samples();
        let mut acc = 0.0;
        for (k, (a, b)) in self
            .coeffs
            .outer_iter()
            .zip(other.coeffs.outer_iter())
            .enumerate()
        {
            let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum();
            if dot != 0.0 {
                acc += m(frequency(k, n)) * dot;
            }
        }
        Ok(acc)
    }
}

/// Requires an even sample count and arc-uniform spacing.
pub fn check_arc_uniform(c: &Curve) -> Result<()> {
    if c.samples() % 2 == 1 {
        return Err(Error::OddSampleCount(c.samples()));
    }
    let dev = c.arc_uniformity();
    if dev >= ARC_UNIFORM_TOL {
        return Err(Error::NotArcUniform(dev));
    }
    Ok(())
}

pub fn analyze(h: &DeformationField, c: &Curve) -> Result<SpectralField> {
    h.check_aligned(c)?;
    check_arc_uniform(c)?;
    SpectralField::from_coeffs(forward(h.vectors().view()), c.length())
}

/// Inverse transform to a real field. Fails if the spectrum is not Hermitian.
pub fn synthesize(spec: &SpectralField) -> Result<DeformationField> {
    let out = inverse(spec.coeffs.view());
    let scale = out.iter().map(|z| z.re.abs()).fold(1.0, f64::max);
    let residue = out.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(spec.hermitian_defect()));
    }
    DeformationField::new(out.mapv(|z| z.re))
}

/// `(2π|l|)^{2α}`.
pub fn frac_weight(l: i64, alpha: f64) -> f64 {
    if l == 0 {
        0.0
    } else {
        (2.0 * PI * l.unsigned_abs() as f64).powf(2.0 * alpha)
    }
}

/// Fractional Sobolev seminorm pairing `Σ_l (2πl)^{2α} Re(ĥ(l) conj k̂(l))`.
pub fn frac_inner(a: &SpectralField, b: &SpectralField, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "order must be positive, got {alpha}"
        )));
    }
    a.weighted_pairing(b, |l| frac_weight(l, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TransferVariant {
    /// Multiplier `1 + λ(2πl)^{2α}`.
    H,
    /// Multiplier `λ(2πl)^{2α}` for `l ≠ 0`; the mean passes through.
    HTilde,
}

/// Frequency multiplier of the metric whose gradient [`sobolev_transfer`]
/// produces.
pub fn transfer_multiplier(l: i64, lambda: f64, alpha: f64, variant: TransferVariant) -> f64 {
    match variant {
        TransferVariant::H => 1.0 + lambda * frac_weight(l, alpha),
        TransferVariant::HTilde => {
            if l == 0 {
                1.0
            } else {
                lambda * frac_weight(l, alpha)
            }
        }
    }
}

/// Converts an `H⁰` gradient spectrum into the Sobolev gradient spectrum.
pub fn sobolev_transfer(
    g0: &SpectralField,
    lambda: f64,
    alpha: f64,
    variant: TransferVariant,
) -> Result<SpectralField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "order must be positive, got {alpha}"
        )));
    }
    Ok(g0.map_multiplier(|l| 1.0 / transfer_multiplier(l, lambda, alpha, variant)))
}

/// Arc-length derivative of order `k`: multiplier `(2πi l / L)^k`, with the
/// Nyquist mode dropped for odd orders.
pub fn arc_derivative(spec: &SpectralField, order: u32) -> SpectralField {
    let n = spec.samples() as i64;
    let mut coeffs = spec.coeffs.clone();
    for (k, mut row) in coeffs.outer_iter_mut().enumerate() {
        let l = frequency(k, n as usize);
        let f = if order % 2 == 1 && l == -n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * l as f64 / spec.length).powu(order)
        };
        row.mapv_inplace(|z| z * f);
    }
    SpectralField {
        coeffs,
        length: spec.length,
    }
}

/// Spectrum of samples assumed equally spaced in arc length on a curve of
/// length `length` (no uniformity check).
pub fn analyze_uniform(h: &DeformationField, length: f64) -> Result<SpectralField> {
    SpectralField::from_coeffs(forward(h.vectors().view()), length)
}

/// An arc-uniform representation of a curve with fields carried along.
#[derive(Debug, Clone)]
pub struct ArcUniform {
    pub curve: Curve,
    pub fields: Vec<DeformationField>,
    /// Arc length of the representation.
    pub length: f64,
    /// Arc position, in the representation, of each input sample.
    pub source_arc: Vec<f64>,
    /// Whether the input was reparametrized.
    pub reparametrized: bool,
}

impl ArcUniform {
    pub fn spectrum(&self, k: usize) -> Result<SpectralField> {
        analyze_uniform(&self.fields[k], self.length)
    }
}

/// Sum of `coeffs[l] e^{ilθ}` over FFT-ordered rows, with the Nyquist row
/// taken as a cosine. Writes one value per column into `out`.
fn trig_eval_into(coeffs: &Array2<Complex64>, basis: &[Complex64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (row, b) in coeffs.outer_iter().zip(basis) {
        for (o, z) in out.iter_mut().zip(row.iter()) {
            *o += (z * b).re;
        }
    }
}

fn trig_basis(n: usize, theta: f64, basis: &mut Vec<Complex64>) {
    basis.clear();
    basis.resize(n, Complex64::new(0.0, 0.0));
    let w = Complex64::from_polar(1.0, theta);
    let mut z = Complex64::new(1.0, 0.0);
    for l in 0..=n / 2 {
        if l > 0 && l % 64 == 0 {
            // Re-anchor the recurrence to bound rounding growth.
            z = Complex64::from_polar(1.0, l as f64 * theta);
        }
        if l == 0 {
            basis[0] = z;
        } else if 2 * l == n {
            basis[l] = Complex64::new(z.re, 0.0);
        } else {
            basis[l] = z;
            basis[n - l] = z.conj();
        }
        z *= w;
    }
}

/// Resamples to `m` points with equal chords placed on the trigonometric
/// interpolant of the samples, starting at the first sample. Falls back to
/// [`crate::curve::resample_arclength`] for odd `N` or a non-positive
/// interpolated speed. Curves already uniform to 1e-12 are returned as is.
pub fn resample_smooth(c: &Curve, m: usize) -> Result<Curve> {
    let n = c.samples();
    if m == n && c.arc_uniformity() <= 1e-12 {
        return Ok(c.clone());
    }
    if n % 2 == 1 {
        return crate::curve::resample_arclength(c, m);
    }
    let deriv = periodic_derivative(c.points().view(), 1);
    let coeffs = forward(c.points().view());
    let dcoeffs = forward(deriv.view());
    let mut basis = Vec::with_capacity(n);
    let mut v = vec![0.0; c.dim()];
    let mut mean_speed = 0.0;
    let mut min_speed = f64::INFINITY;
    for i in 0..4 * n {
        trig_basis(n, 2.0 * PI * (i as f64 + 0.5) / (4 * n) as f64, &mut basis);
        trig_eval_into(&dcoeffs, &basis, &mut v);
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        mean_speed += s / (4 * n) as f64;
        min_speed = min_speed.min(s);
    }
    if !(min_speed > 0.05 * mean_speed) {
        return crate::curve::resample_arclength(c, m);
    }
    let basis = std::cell::RefCell::new(basis);
    Curve::from_parametric_equal_chords(m, |theta| {
        let mut b = basis.borrow_mut();
        trig_basis(n, theta, &mut b);
        let mut out = vec![0.0; coeffs.ncols()];
        trig_eval_into(&coeffs, &b, &mut out);
        out
    })
}

/// Brings `(c, fields)` to arc-uniform samples.
///
/// An arc-uniform input with even `N` is returned unchanged. Otherwise the
/// curve and fields are treated as trigonometric interpolants in the sample
/// parameter, the arc length function is integrated spectrally, and
/// everything is re-evaluated at equal arc-length spacing. When the
/// interpolated speed is not positive (rough input) the linear
/// [`crate::curve::arc_resampling`] is used instead.
pub fn to_arc_uniform(c: &Curve, fields: &[&DeformationField]) -> Result<ArcUniform> {
    for h in fields {
        h.check_aligned(c)?;
    }
    let n = c.samples();
    if check_arc_uniform(c).is_ok() {
        let length = c.length();
        return Ok(ArcUniform {
            curve: c.clone(),
            fields: fields.iter().map(|h| (*h).clone()).collect(),
            length,
            source_arc: (0..n).map(|i| length * i as f64 / n as f64).collect(),
            reparametrized: false,
        });
    }
    match smooth_reparametrize(c, fields)? {
        Some(v) => Ok(v),
        None => linear_reparametrize(c, fields),
    }
}

fn linear_reparametrize(c: &Curve, fields: &[&DeformationField]) -> Result<ArcUniform> {
    let m = c.samples() + c.samples() % 2;
    let r = crate::curve::arc_resampling(c, m)?;
    let table = c.arc_table();
    let source_arc = table.cumulative_length[..c.samples()]
        .iter()
        .map(|s| r.resampled_arc_of(*s))
        .collect();
    Ok(ArcUniform {
        length: r.curve.length(),
        fields: fields.iter().map(|h| r.interpolate(h)).collect(),
        curve: r.curve,
        source_arc,
        reparametrized: true,
    })
}

fn smooth_reparametrize(c: &Curve, fields: &[&DeformationField]) -> Result<Option<ArcUniform>> {
    let n = c.samples();
    let m = n + n % 2;
    let dtheta = 2.0 * PI / n as f64;
    let deriv = periodic_derivative(c.points().view(), 1);
    let speed: Vec<f64> = deriv.outer_iter().map(|r| r.dot(&r).sqrt()).collect();
    let speed_arr = Array2::from_shape_vec((n, 1), speed).expect("shape");
    let sc = forward(speed_arr.view());
    let mean_speed = sc[[0, 0]].re;
    // Antiderivative coefficients, Nyquist dropped.
    let mut anti = Array2::<Complex64>::zeros((n, 1));
    let mut offset = 0.0;
    for k in 1..n {
        let l = frequency(k, n);
        if n % 2 == 0 && l == -(n as i64) / 2 {
            continue;
        }
        let a = sc[[k, 0]] / Complex64::new(0.0, l as f64);
        anti[[k, 0]] = a;
        offset += a.re;
    }
    let length = 2.0 * PI * mean_speed;
    let arc_at = |theta: f64, basis: &mut Vec<Complex64>| {
        trig_basis(n, theta, basis);
        let mut v = [0.0];
        trig_eval_into(&anti, basis, &mut v);
        mean_speed * theta + v[0] - offset
    };
    let speed_at = |theta: f64, basis: &mut Vec<Complex64>| {
        trig_basis(n, theta, basis);
        let mut v = [0.0];
        trig_eval_into(&sc, basis, &mut v);
        v[0]
    };
    let grid: Vec<f64> = inverse(anti.view())
        .column(0)
        .iter()
        .enumerate()
        .map(|(i, z)| mean_speed * dtheta * i as f64 + z.re - offset)
        .collect();
    // Monotone arc function with a positive speed is required.
    let mut basis = Vec::with_capacity(n);
    let mut min_speed = f64::INFINITY;
    for i in 0..4 * n {
        min_speed = min_speed.min(speed_at(2.0 * PI * (i as f64 + 0.5) / (4 * n) as f64, &mut basis));
    }
    if !(min_speed > 0.05 * mean_speed) || grid.windows(2).any(|w| w[1] <= w[0]) || grid[n - 1] >= length {
        return Ok(None);
    }

    let point_coeffs = forward(c.points().view());
    let field_coeffs: Vec<Array2<Complex64>> = fields.iter().map(|h| forward(h.vectors().view())).collect();
    let dim = c.dim();
    let mut points = Array2::zeros((m, dim));
    let mut new_fields: Vec<Array2<f64>> = fields.iter().map(|h| Array2::zeros((m, h.dim()))).collect();
    let mut seg = 0usize;
    let mut buf = vec![0.0; dim.max(fields.iter().map(|h| h.dim()).max().unwrap_or(0))];
    for k in 0..m {
        let target = length * k as f64 / m as f64;
        while seg + 1 < n && grid[seg + 1] <= target {
            seg += 1;
        }
        let (mut lo, mut hi) = (dtheta * seg as f64, dtheta * (seg + 1) as f64);
        let (s_lo, s_hi) = (grid[seg], if seg + 1 < n { grid[seg + 1] } else { length });
        let mut theta = lo + (target - s_lo) / (s_hi - s_lo) * (hi - lo);
        for _ in 0..60 {
            let f = arc_at(theta, &mut basis) - target;
            if f.abs() <= 1e-14 * length {
                break;
            }
            if f > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let step = theta - f / speed_at(theta, &mut basis);
            theta = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        }
        trig_basis(n, theta, &mut basis);
        trig_eval_into(&point_coeffs, &basis, &mut buf[..dim]);
        for d in 0..dim {
            points[[k, d]] = buf[d];
        }
        for (fc, out) in field_coeffs.iter().zip(new_fields.iter_mut()) {
            let fd = fc.ncols();
            trig_eval_into(fc, &basis, &mut buf[..fd]);
            for d in 0..fd {
                out[[k, d]] = buf[d];
            }
        }
    }
    Ok(Some(ArcUniform {
        curve: Curve::new(points)?,
        fields: new_fields
            .into_iter()
            .map(DeformationField::new)
            .collect::<Result<Vec<_>>>()?,
        length,
        source_arc: grid,
        reparametrized: true,
    }))
}
