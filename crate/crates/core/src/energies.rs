//! Energies on curves and their gradients.
//!
//! [`grad_h0`] returns the Riesz representative, in the `H⁰` inner product
//! `(1/L)Σ w_i⟨G_i, h_i⟩`, of the derivative of the *discrete* energy that
//! [`evaluate`] computes. Pairing it with any field therefore reproduces the
//! directional derivative of [`evaluate`] up to rounding. The continuum
//! normal-form expressions are available from [`formula_gradient`].

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::curve::{chord_directions, curvature_vector, mean_field, tangent_normal_curvature, Curve, DeformationField};
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;
use crate::spectral::{
    self, periodic_derivative, sobolev_transfer, synthesize, to_arc_uniform, ArcUniform, SpectralField,
};

type ScalarFn = dyn Fn(ArrayView1<f64>) -> f64 + Send + Sync;
type GradFn = dyn Fn(ArrayView1<f64>) -> Vec<f64> + Send + Sync;

/// A scalar function on the ambient space together with its gradient.
#[derive(Clone)]
pub struct AvgFunction {
    pub name: String,
    value: Arc<ScalarFn>,
    gradient: Arc<GradFn>,
}

impl AvgFunction {
    pub fn new<F, G>(name: impl Into<String>, value: F, gradient: G) -> Self
    where
        F: Fn(ArrayView1<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(ArrayView1<f64>) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: ArrayView1<f64>) -> Vec<f64> {
        (self.gradient)(x)
    }
}

impl fmt::Debug for AvgFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AvgFunction({})", self.name)
    }
}

/// Built-in averaged functions, selectable from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "g", rename_all = "snake_case")]
pub enum GFunction {
    /// `|x - center|²`
    SquaredDistance { center: Vec<f64> },
    /// `a·x`
    Linear { a: Vec<f64> },
    /// `exp(-|x - center|² / (2 width²))`
    Gaussian { center: Vec<f64>, width: f64 },
}

impl GFunction {
    pub fn build(&self) -> AvgFunction {
        match self.clone() {
            GFunction::SquaredDistance { center } => {
                let c2 = center.clone();
                AvgFunction::new(
                    "squared_distance",
                    move |x| x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum(),
                    move |x| x.iter().zip(&c2).map(|(a, b)| 2.0 * (a - b)).collect(),
                )
            }
            GFunction::Linear { a } => {
                let a2 = a.clone();
                AvgFunction::new(
                    "linear",
                    move |x| x.iter().zip(&a).map(|(p, q)| p * q).sum(),
                    move |_| a2.clone(),
                )
            }
            GFunction::Gaussian { center, width } => {
                let c2 = center.clone();
                let v = move |x: ArrayView1<f64>, c: &[f64]| {
                    let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-d2 / (2.0 * width * width)).exp()
                };
                AvgFunction::new(
                    "gaussian",
                    move |x| v(x, &center),
                    move |x| {
                        let e = v(x, &c2);
                        x.iter()
                            .zip(&c2)
                            .map(|(a, b)| -e * (a - b) / (width * width))
                            .collect()
                    },
                )
            }
        }
    }
}

/// Energy functional selector.
#[derive(Debug, Clone)]
pub enum EnergyKind {
    /// `len(c)`
    Length,
    /// `∫|D_s²c|² ds`
    Elastic,
    /// `½|c̄ - v|²`
    CenterOfMass { target: Vec<f64> },
    /// `⟨|c - c̄|²⟩`
    StdDev,
    /// `(1/L)∫ g(c(s)) ds`
    AvgG(AvgFunction),
}

/// Serializable energy selection, e.g. `{"energy": "center_of_mass", "target": [0, 0]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "energy", rename_all = "snake_case")]
pub enum EnergyConfig {
    Length,
    Elastic,
    CenterOfMass { target: Vec<f64> },
    StdDev,
    AvgG {
        #[serde(flatten)]
        g: GFunction,
    },
}

impl EnergyConfig {
    pub fn build(&self) -> EnergyKind {
        match self {
            EnergyConfig::Length => EnergyKind::Length,
            EnergyConfig::Elastic => EnergyKind::Elastic,
            EnergyConfig::CenterOfMass { target } => EnergyKind::CenterOfMass {
                target: target.clone(),
            },
            EnergyConfig::StdDev => EnergyKind::StdDev,
            EnergyConfig::AvgG { g } => EnergyKind::AvgG(g.build()),
        }
    }
}

impl EnergyKind {
    pub fn name(&self) -> String {
        match self {
            EnergyKind::Length => "length".into(),
            EnergyKind::Elastic => "elastic".into(),
            EnergyKind::CenterOfMass { .. } => "center_of_mass".into(),
            EnergyKind::StdDev => "std_dev".into(),
            EnergyKind::AvgG(g) => format!("avg_g({})", g.name),
        }
    }
}

/// Minimum sample count for the elastic gradient.
pub const ELASTIC_MIN_SAMPLES: usize = 32;

fn check_target(target: &[f64], c: &Curve) -> Result<()> {
    if target.len() != c.dim() {
        return Err(Error::DimensionMismatch(format!(
            "target has {} coordinates, curve lives in R^{}",
            target.len(),
            c.dim()
        )));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("target must be finite".into()));
    }
    Ok(())
}

/// First and second derivatives in the uniform parameter `θ ∈ [0, 2π)`.
fn theta_derivatives(c: &Curve) -> (Array2<f64>, Array2<f64>) {
    (
        periodic_derivative(c.points().view(), 1),
        periodic_derivative(c.points().view(), 2),
    )
}

/// Bending density `|a|²|b|² - (a·b)²) / |a|⁵ = |κ|²|ċ|`.
fn bending_density(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let aa = a.dot(&a);
    let bb = b.dot(&b);
    let ab = a.dot(&b);
    (aa * bb - ab * ab).max(0.0) / aa.powf(2.5)
}

fn elastic_energy(c: &Curve) -> f64 {
    let (d1, d2) = theta_derivatives(c);
    let dtheta = 2.0 * std::f64::consts::PI / c.samples() as f64;
    d1.outer_iter()
        .zip(d2.outer_iter())
        .map(|(a, b)| bending_density(a, b))
        .sum::<f64>()
        * dtheta
}

pub fn evaluate(kind: &EnergyKind, c: &Curve) -> Result<f64> {
    Ok(match kind {
        EnergyKind::Length => c.length(),
        EnergyKind::Elastic => elastic_energy(c),
        EnergyKind::CenterOfMass { target } => {
            check_target(target, c)?;
            let m = c.barycenter();
            0.5 * m.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        }
        EnergyKind::StdDev => {
            let m = c.barycenter();
            let g: Vec<f64> = c
                .points()
                .outer_iter()
                .map(|p| p.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect();
            average(c, &g)
        }
        EnergyKind::AvgG(g) => {
            let v: Vec<f64> = c.points().outer_iter().map(|p| g.value(p)).collect();
            average(c, &v)
        }
    })
}

fn average(c: &Curve, values: &[f64]) -> f64 {
    let w = c.arc_weights();
    let l: f64 = w.iter().sum();
    w.iter().zip(values).map(|(a, b)| a * b).sum::<f64>() / l
}

/// Euclidean gradient, with respect to the sample positions, of
/// `y·A` where `A = (1/L) Σ_i w_i a_i` is an arc-weighted average.
///
/// `proj[i] = J_iᵀ y` is the pointwise gradient of `y·a(p_i)` and `b[i] = y·a_i`.
fn average_gradient(c: &Curve, proj: &Array2<f64>, b: &[f64]) -> Array2<f64> {
    let n = c.samples();
    let w = c.arc_weights();
    let l: f64 = w.iter().sum();
    let mean = w.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / l;
    let (t, _) = chord_directions(c);
    let mut g = Array2::zeros(c.points().dim());
    for j in 0..n {
        let mut row = g.row_mut(j);
        row.scaled_add(w[j] / l, &proj.row(j));
    }
    for i in 0..n {
        let next = (i + 1) % n;
        // dℓ_i = ⟨T_i, dp_{i+1} - dp_i⟩ and ∂A/∂ℓ_i = ((b_i + b_{i+1})/2 - A)/L
        let beta = (0.5 * (b[i] + b[next]) - mean) / l;
        let ti = t.row(i).to_owned();
        g.row_mut(next).scaled_add(beta, &ti);
        g.row_mut(i).scaled_add(-beta, &ti);
    }
    g
}

/// Euclidean gradient of the discrete energy with respect to sample positions.
pub fn euclidean_gradient(kind: &EnergyKind, c: &Curve) -> Result<Array2<f64>> {
    let n = c.samples();
    let dim = c.dim();
    Ok(match kind {
        EnergyKind::Length => {
            let (t, _) = chord_directions(c);
            let mut g = Array2::zeros((n, dim));
            for j in 0..n {
                let prev = (j + n - 1) % n;
                g.row_mut(j).assign(&(&t.row(prev) - &t.row(j)));
            }
            g
        }
        EnergyKind::CenterOfMass { target } => {
            check_target(target, c)?;
            let m = c.barycenter();
            let y: Array1<f64> = m.iter().zip(target).map(|(a, b)| a - b).collect();
            let mut proj = Array2::zeros((n, dim));
            for mut row in proj.outer_iter_mut() {
                row.assign(&y);
            }
            let b: Vec<f64> = c.points().outer_iter().map(|p| p.dot(&y)).collect();
            average_gradient(c, &proj, &b)
        }
        EnergyKind::StdDev => {
            // ⟨|x|²⟩ - |c̄|²
            let m = Array1::from(c.barycenter());
            let proj_sq = c.points() * 2.0;
            let b_sq: Vec<f64> = c.points().outer_iter().map(|p| p.dot(&p)).collect();
            let g_sq = average_gradient(c, &proj_sq, &b_sq);
            let y = &m * 2.0;
            let mut proj = Array2::zeros((n, dim));
            for mut row in proj.outer_iter_mut() {
                row.assign(&y);
            }
            let b: Vec<f64> = c.points().outer_iter().map(|p| p.dot(&y)).collect();
            g_sq - average_gradient(c, &proj, &b)
        }
        EnergyKind::AvgG(g) => {
            let mut proj = Array2::zeros((n, dim));
            let mut b = Vec::with_capacity(n);
            for (i, p) in c.points().outer_iter().enumerate() {
                let grad = g.gradient(p);
                if grad.len() != dim {
                    return Err(Error::DimensionMismatch(
                        "gradient of g has the wrong dimension".into(),
                    ));
                }
                for d in 0..dim {
                    proj[[i, d]] = grad[d];
                }
                b.push(g.value(p));
            }
            average_gradient(c, &proj, &b)
        }
        EnergyKind::Elastic => {
            let (d1, d2) = theta_derivatives(c);
            let dtheta = 2.0 * std::f64::consts::PI / n as f64;
            let mut fa = Array2::zeros((n, dim));
            let mut fb = Array2::zeros((n, dim));
            for i in 0..n {
                let a = d1.row(i);
                let b = d2.row(i);
                let aa = a.dot(&a);
                let bb = b.dot(&b);
                let ab = a.dot(&b);
                let a5 = aa.powf(2.5);
                let cross = aa * bb - ab * ab;
                let ga = (&a * (2.0 * bb) - &b * (2.0 * ab)) / a5 - &a * (5.0 * cross / (a5 * aa));
                let gb = (&b * (2.0 * aa) - &a * (2.0 * ab)) / a5;
                fa.row_mut(i).assign(&ga);
                fb.row_mut(i).assign(&gb);
            }
            // D1 is antisymmetric and D2 symmetric as matrices.
            let t1 = periodic_derivative(fa.view(), 1);
            let t2 = periodic_derivative(fb.view(), 2);
            (t2 - t1) * dtheta
        }
    })
}

/// `H⁰` gradient: `G_j = L·(∂E/∂p_j)/w_j`.
pub fn grad_h0(kind: &EnergyKind, c: &Curve) -> Result<DeformationField> {
    if let EnergyKind::Elastic = kind {
        if c.samples() < ELASTIC_MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                min: ELASTIC_MIN_SAMPLES,
                got: c.samples(),
            });
        }
    }
    let mut g = euclidean_gradient(kind, c)?;
    let w = c.arc_weights();
    let l: f64 = w.iter().sum();
    for (mut row, wi) in g.outer_iter_mut().zip(&w) {
        row.mapv_inplace(|x| x * l / wi);
    }
    DeformationField::new(g)
}

/// Sobolev gradient by spectral transfer of the `H⁰` gradient.
///
/// Supported for `Hj`, `HjTilde`, `HAlpha`, `HAlphaTilde`. On curves that are
/// not arc-uniform the transfer happens on the arc-uniform view and the
/// result is evaluated back at the input samples.
pub fn grad_sobolev(kind: &EnergyKind, c: &Curve, spec: &MetricSpec) -> Result<DeformationField> {
    spec.validate()?;
    let (lambda, alpha, variant) = spec.transfer()?;
    let g0 = grad_h0(kind, c)?;
    transfer_field(&g0, c, lambda, alpha, variant)
}

/// Applies the Sobolev transfer to an arbitrary `H⁰` gradient field.
pub fn transfer_field(
    g0: &DeformationField,
    c: &Curve,
    lambda: f64,
    alpha: f64,
    variant: spectral::TransferVariant,
) -> Result<DeformationField> {
    let view = to_arc_uniform(c, &[g0])?;
    let t = sobolev_transfer(&view.spectrum(0)?, lambda, alpha, variant)?;
    back_to_samples(&view, &t, c)
}

/// Divides the spectrum of `g0`, taken on the arc-uniform view of `c`, by
/// `m(l, L)` and brings the result back to the samples of `c`.
fn transfer_with<M: Fn(i64, f64) -> f64>(g0: &DeformationField, c: &Curve, m: M) -> Result<DeformationField> {
    let view = to_arc_uniform(c, &[g0])?;
    let length = view.length;
    let t = view.spectrum(0)?.map_multiplier(|l| 1.0 / m(l, length));
    back_to_samples(&view, &t, c)
}

fn back_to_samples(view: &ArcUniform, t: &SpectralField, c: &Curve) -> Result<DeformationField> {
    if !view.reparametrized {
        return synthesize(t);
    }
    let mut out = Array2::zeros((c.samples(), c.dim()));
    for (i, s) in view.source_arc.iter().enumerate() {
        let v = t.eval_at(*s);
        for d in 0..c.dim() {
            out[[i, d]] = v[d];
        }
    }
    DeformationField::new(out)
}

/// Riesz representative of `dE` under any inner-product metric.
///
/// Spectral metrics divide by their frequency multiplier, `ConformalH0`
/// rescales by `1/L²` and `MM_HA` divides pointwise by `L(1 + Aκ²)`.
pub fn metric_gradient(kind: &EnergyKind, c: &Curve, spec: &MetricSpec) -> Result<DeformationField> {
    spec.validate()?;
    let g0 = grad_h0(kind, c)?;
    let l = c.length();
    match spec {
        MetricSpec::H0 => Ok(g0),
        MetricSpec::ConformalH0 => Ok(g0.scaled(1.0 / (l * l))),
        MetricSpec::MmHa { a } => {
            let frame = tangent_normal_curvature(c)?;
            let mut v = g0.into_vectors();
            for (mut row, k) in v.outer_iter_mut().zip(&frame.curvature) {
                let f = 1.0 / (l * (1.0 + a * k * k));
                row.mapv_inplace(|x| x * f);
            }
            DeformationField::new(v)
        }
        MetricSpec::LinfFinsler => Err(Error::NotAnInnerProduct(spec.name().into())),
        _ => transfer_with(&g0, c, |l, length| {
            spec.spectral_multiplier(l, length).expect("spectral metric")
        }),
    }
}

/// Continuum normal-form gradient evaluated with finite-difference geometry.
///
/// Length: `-L·D_s²c`. Elastic: `L·D_s(2D_s³c + 3|D_s²c|²D_s c)` with spectral
/// derivatives. Center of mass: `⟨c̄-v, N⟩N - κ⟨c̄-v, c-c̄⟩N`. StdDev:
/// `(2⟨c-c̄, N⟩ - κ(g - ḡ))N` with `g = |c-c̄|²`. AvgG: `(⟨∇g, N⟩ - κ(g - ḡ))N`.
/// The last three are planar.
pub fn formula_gradient(kind: &EnergyKind, c: &Curve) -> Result<DeformationField> {
    let n = c.samples();
    match kind {
        EnergyKind::Length => Ok(curvature_vector(c).scaled(-c.length())),
        EnergyKind::Elastic => {
            let pts = c.points().view();
            let d1 = periodic_derivative(pts, 1);
            let speed: Vec<f64> = d1.outer_iter().map(|r| r.dot(&r).sqrt()).collect();
            let ds = |f: &Array2<f64>| -> Array2<f64> {
                let mut d = periodic_derivative(f.view(), 1);
                for (mut row, s) in d.outer_iter_mut().zip(&speed) {
                    row.mapv_inplace(|x| x / s);
                }
                d
            };
            let t = ds(&c.points().to_owned());
            let k = ds(&t);
            let k3 = ds(&k);
            let mut inner = Array2::zeros(t.dim());
            for i in 0..n {
                let kk = k.row(i).dot(&k.row(i));
                let row = &k3.row(i) * 2.0 + &t.row(i) * (3.0 * kk);
                inner.row_mut(i).assign(&row);
            }
            DeformationField::new(ds(&inner) * c.length())
        }
        EnergyKind::CenterOfMass { target } => {
            check_target(target, c)?;
            let f = tangent_normal_curvature(c)?;
            let m = c.barycenter();
            let y: Vec<f64> = m.iter().zip(target).map(|(a, b)| a - b).collect();
            let coef: Vec<f64> = (0..n)
                .map(|i| {
                    let nn = f.normal.vector(i);
                    let p = c.point(i);
                    let yn = y[0] * nn[0] + y[1] * nn[1];
                    let yc = y[0] * (p[0] - m[0]) + y[1] * (p[1] - m[1]);
                    yn - f.curvature[i] * yc
                })
                .collect();
            normal_field(&f.normal, &coef)
        }
        EnergyKind::StdDev => {
            let f = tangent_normal_curvature(c)?;
            let m = c.barycenter();
            let g: Vec<f64> = c
                .points()
                .outer_iter()
                .map(|p| (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2))
                .collect();
            let gbar = average(c, &g);
            let coef: Vec<f64> = (0..n)
                .map(|i| {
                    let nn = f.normal.vector(i);
                    let p = c.point(i);
                    2.0 * ((p[0] - m[0]) * nn[0] + (p[1] - m[1]) * nn[1]) - f.curvature[i] * (g[i] - gbar)
                })
                .collect();
            normal_field(&f.normal, &coef)
        }
        EnergyKind::AvgG(func) => {
            let f = tangent_normal_curvature(c)?;
            let g: Vec<f64> = c.points().outer_iter().map(|p| func.value(p)).collect();
            let gbar = average(c, &g);
            let coef: Vec<f64> = (0..n)
                .map(|i| {
                    let grad = func.gradient(c.point(i));
                    let nn = f.normal.vector(i);
                    grad[0] * nn[0] + grad[1] * nn[1] - f.curvature[i] * (g[i] - gbar)
                })
                .collect();
            normal_field(&f.normal, &coef)
        }
    }
}

fn normal_field(normal: &DeformationField, coef: &[f64]) -> Result<DeformationField> {
    let mut v = normal.vectors().clone();
    for (mut row, a) in v.outer_iter_mut().zip(coef) {
        row.mapv_inplace(|x| x * a);
    }
    DeformationField::new(v)
}

/// `dE(c)[h]` by central differences with step `eps`.
pub fn finite_difference(kind: &EnergyKind, c: &Curve, h: &DeformationField, eps: f64) -> Result<f64> {
    let plus = evaluate(kind, &c.displaced(h, eps)?)?;
    let minus = evaluate(kind, &c.displaced(h, -eps)?)?;
    Ok((plus - minus) / (2.0 * eps))
}

/// Arc-weighted mean of the H⁰ gradient; zero for translation-invariant energies.
pub fn gradient_mean(kind: &EnergyKind, c: &Curve) -> Result<Vec<f64>> {
    Ok(mean_field(&grad_h0(kind, c)?, c))
}
