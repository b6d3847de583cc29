//! Inner products, norms and the Finsler norm on deformation fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curve::{ds_derivative, tangent_normal_curvature, unit_tangent, Curve, DeformationField};
use crate::error::{Error, Result};
use crate::spectral::{self, frac_weight, to_arc_uniform, SpectralField, TransferVariant};

/// Which inner product (or norm) to use.
///
/// Serialized with a `variant` tag, e.g. `{"variant": "Hj", "j": 1, "lambda": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum MetricSpec {
    /// `(1/L)∫⟨h,k⟩ds`.
    H0,
    /// `H0 + λL^{2j}(1/L)∫⟨D_s^j h, D_s^j k⟩ds`.
    Hj { j: u32, lambda: f64 },
    /// `h̄·k̄ + λL^{2j}(1/L)∫⟨D_s^j h, D_s^j k⟩ds`.
    HjTilde { j: u32, lambda: f64 },
    /// `Σ_l (1 + λ(2πl)^{2α}) Re(ĥ(l)·conj k̂(l))`.
    HAlpha { alpha: f64, lambda: f64 },
    /// `ĥ(0)·k̂(0) + Σ_l λ(2πl)^{2α} Re(ĥ(l)·conj k̂(l))`.
    HAlphaTilde { alpha: f64, lambda: f64 },
    /// `ā₀ h̄·k̄ + Σ_i a_i L^{2i-1}∫⟨h⁽ⁱ⁾,k⁽ⁱ⁾⟩ds`, with `a = [a₀, …, a_j]`.
    GeneralFamily { a_bar0: f64, a: Vec<f64> },
    /// `∫Σ_{i=0}^n ⟨D_s^i h, D_s^i k⟩ds`, not scale invariant.
    MMGn { n: u32 },
    /// `L∫⟨h,k⟩ds`.
    ConformalH0,
    /// `∫(1 + Aκ²)⟨h,k⟩ds`, planar curves only.
    #[serde(rename = "MM_HA")]
    MmHa {
        #[serde(rename = "A")]
        a: f64,
    },
    /// `max |π_N h|`, a Finsler norm without inner product.
    LinfFinsler,
}

impl MetricSpec {
    pub fn hj(j: u32, lambda: f64) -> Self {
        MetricSpec::Hj { j, lambda }
    }

    pub fn hj_tilde(j: u32, lambda: f64) -> Self {
        MetricSpec::HjTilde { j, lambda }
    }

    /// Short name for reports.
    pub fn name(&self) -> &'static str {
        match self {
            MetricSpec::H0 => "H0",
            MetricSpec::Hj { .. } => "Hj",
            MetricSpec::HjTilde { .. } => "HjTilde",
            MetricSpec::HAlpha { .. } => "HAlpha",
            MetricSpec::HAlphaTilde { .. } => "HAlphaTilde",
            MetricSpec::GeneralFamily { .. } => "GeneralFamily",
            MetricSpec::MMGn { .. } => "MMGn",
            MetricSpec::ConformalH0 => "ConformalH0",
            MetricSpec::MmHa { .. } => "MM_HA",
            MetricSpec::LinfFinsler => "LinfFinsler",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            MetricSpec::Hj { j, lambda } | MetricSpec::HjTilde { j, lambda } => {
                if *j == 0 {
                    return Err(Error::InvalidParameter("j must be at least 1".into()));
                }
                pos("lambda", *lambda)
            }
            MetricSpec::HAlpha { alpha, lambda } | MetricSpec::HAlphaTilde { alpha, lambda } => {
                pos("alpha", *alpha)?;
                pos("lambda", *lambda)
            }
            MetricSpec::GeneralFamily { a_bar0, a } => {
                let bad = |v: f64| !(v >= 0.0 && v.is_finite());
                if a.is_empty() || bad(*a_bar0) || a.iter().any(|v| bad(*v)) {
                    return Err(Error::InvalidParameter(
                        "general family needs finite nonnegative coefficients".into(),
                    ));
                }
                if a[0] + a_bar0 <= 0.0 {
                    return Err(Error::InvalidParameter("need a_0 + a_bar0 > 0".into()));
                }
                if *a.last().unwrap() <= 0.0 {
                    return Err(Error::InvalidParameter("need a_j > 0".into()));
                }
                Ok(())
            }
            MetricSpec::MmHa { a } => pos("A", *a),
            _ => Ok(()),
        }
    }

    /// Frequency multiplier `m(l)` of spectral variants on a curve of length
    /// `L`: the form equals `Σ_l m(l) Re(ĥ(l)·conj k̂(l))`.
    pub fn spectral_multiplier(&self, l: i64, length: f64) -> Option<f64> {
        let w = |p: f64| frac_weight(l, p);
        Some(match self {
            MetricSpec::H0 => 1.0,
            MetricSpec::Hj { j, lambda } => 1.0 + lambda * w(*j as f64),
            MetricSpec::HAlpha { alpha, lambda } => 1.0 + lambda * w(*alpha),
            MetricSpec::HjTilde { j, lambda } => {
                if l == 0 {
                    1.0
                } else {
                    lambda * w(*j as f64)
                }
            }
            MetricSpec::HAlphaTilde { alpha, lambda } => {
                if l == 0 {
                    1.0
                } else {
                    lambda * w(*alpha)
                }
            }
            MetricSpec::GeneralFamily { a_bar0, a } => {
                let mut m = a[0] + if l == 0 { *a_bar0 } else { 0.0 };
                for (i, ai) in a.iter().enumerate().skip(1) {
                    m += ai * w(i as f64);
                }
                m
            }
            MetricSpec::MMGn { n } => {
                let x = 2.0 * PI * l as f64 / length;
                length * (0..=*n).map(|i| x.powi(2 * i as i32)).sum::<f64>()
            }
            _ => return None,
        })
    }

    /// Parameters of the gradient transfer, for the metrics that have one.
    pub fn transfer(&self) -> Result<(f64, f64, TransferVariant)> {
        match self {
            MetricSpec::Hj { j, lambda } => Ok((*lambda, *j as f64, TransferVariant::H)),
            MetricSpec::HjTilde { j, lambda } => Ok((*lambda, *j as f64, TransferVariant::HTilde)),
            MetricSpec::HAlpha { alpha, lambda } => Ok((*lambda, *alpha, TransferVariant::H)),
            MetricSpec::HAlphaTilde { alpha, lambda } => {
                Ok((*lambda, *alpha, TransferVariant::HTilde))
            }
            other => Err(Error::UnsupportedTransfer(other.name().to_string())),
        }
    }

    /// Integer derivative weights `(c̄, [c_0, …, c_j])` of the form
    /// `c̄ h̄·k̄ + Σ_i c_i L^{2i-1}∫⟨h⁽ⁱ⁾,k⁽ⁱ⁾⟩ds`, for the variants that are
    /// local differential forms.
    fn local_weights(&self, length: f64) -> Option<(f64, Vec<f64>)> {
        match self {
            MetricSpec::H0 => Some((0.0, vec![1.0])),
            MetricSpec::Hj { j, lambda } => {
                let mut c = vec![0.0; *j as usize + 1];
                c[0] = 1.0;
                c[*j as usize] += lambda;
                Some((0.0, c))
            }
            MetricSpec::HjTilde { j, lambda } => {
                let mut c = vec![0.0; *j as usize + 1];
                c[*j as usize] = *lambda;
                Some((1.0, c))
            }
            MetricSpec::HAlpha { alpha, lambda } if alpha.fract() == 0.0 => {
                MetricSpec::hj(*alpha as u32, *lambda).local_weights(length)
            }
            MetricSpec::HAlphaTilde { alpha, lambda } if alpha.fract() == 0.0 => {
                MetricSpec::hj_tilde(*alpha as u32, *lambda).local_weights(length)
            }
            MetricSpec::GeneralFamily { a_bar0, a } => Some((*a_bar0, a.clone())),
            MetricSpec::MMGn { n } => Some((
                0.0,
                (0..=*n)
                    .map(|i| length.powi(1 - 2 * i as i32))
                    .collect(),
            )),
            _ => None,
        }
    }
}

fn dot_rows(h: &DeformationField, k: &DeformationField) -> Vec<f64> {
    h.vectors()
        .outer_iter()
        .zip(k.vectors().outer_iter())
        .map(|(a, b)| a.dot(&b))
        .collect()
}

fn check_pair(c: &Curve, h: &DeformationField, k: &DeformationField) -> Result<()> {
    h.check_aligned(c)?;
    k.check_aligned(c)
}

/// `∫ f ds` by the trapezoidal arc weights.
fn integrate(c: &Curve, f: &[f64]) -> f64 {
    c.arc_weights().iter().zip(f).map(|(w, v)| w * v).sum()
}

/// Spectra of `h` and `k` on an arc-uniform representation of `c`.
pub fn arc_spectra(
    c: &Curve,
    h: &DeformationField,
    k: &DeformationField,
) -> Result<(SpectralField, SpectralField)> {
    let view = to_arc_uniform(c, &[h, k])?;
    Ok((view.spectrum(0)?, view.spectrum(1)?))
}

/// The bilinear form of `spec` at `c`.
///
/// `H0`, `ConformalH0` and `MM_HA` are evaluated by quadrature on the given
/// samples. The Sobolev variants are evaluated in the frequency domain on an
/// arc-uniform representation of `(c, h, k)` (resampled internally when
/// needed).
pub fn inner(spec: &MetricSpec, c: &Curve, h: &DeformationField, k: &DeformationField) -> Result<f64> {
    spec.validate()?;
    check_pair(c, h, k)?;
    let l = c.length();
    match spec {
        MetricSpec::H0 => Ok(integrate(c, &dot_rows(h, k)) / l),
        MetricSpec::ConformalH0 => Ok(l * integrate(c, &dot_rows(h, k))),
        MetricSpec::MmHa { a } => {
            let frame = tangent_normal_curvature(c)?;
            let f: Vec<f64> = dot_rows(h, k)
                .iter()
                .zip(&frame.curvature)
                .map(|(d, kappa)| (1.0 + a * kappa * kappa) * d)
                .collect();
            Ok(integrate(c, &f))
        }
        MetricSpec::LinfFinsler => Err(Error::NotAnInnerProduct(spec.name().into())),
        _ => {
            let (hh, kk) = arc_spectra(c, h, k)?;
            let length = hh.length();
            hh.weighted_pairing(&kk, |l| spec.spectral_multiplier(l, length).unwrap())
        }
    }
}

/// Norm induced by `spec`; for `LinfFinsler` this is [`linf_finsler`].
pub fn norm(spec: &MetricSpec, c: &Curve, h: &DeformationField) -> Result<f64> {
    if let MetricSpec::LinfFinsler = spec {
        h.check_aligned(c)?;
        return Ok(linf_finsler(c, h));
    }
    let v = inner(spec, c, h, h)?;
    let scale = h.vectors().iter().map(|x| x * x).sum::<f64>().max(1.0);
    if v < -1e-12 * scale {
        return Err(Error::NegativeSquaredNorm(v));
    }
    Ok(v.max(0.0).sqrt())
}

/// `c̄ h̄·k̄ + Σ_i c_i L^{2i-1} Σ_q w_q ⟨D^i h, D^i k⟩_q` for arc weights `w`.
fn weighted_form(
    arc_weights: &[f64],
    length: f64,
    derivs: &[(DeformationField, DeformationField)],
    coefs: &[f64],
    mean_weight: f64,
) -> f64 {
    let quad = |f: Vec<f64>| -> f64 { arc_weights.iter().zip(&f).map(|(w, v)| w * v).sum() };
    let mut total = 0.0;
    for (i, ((dh, dk), ci)) in derivs.iter().zip(coefs).enumerate() {
        if *ci != 0.0 {
            total += ci * length.powi(2 * i as i32 - 1) * quad(dot_rows(dh, dk));
        }
    }
    if mean_weight != 0.0 {
        let (h, k) = &derivs[0];
        let dim = h.dim();
        for d in 0..dim {
            let a: f64 = quad(h.vectors().column(d).to_vec()) / length;
            let b: f64 = quad(k.vectors().column(d).to_vec()) / length;
            total += mean_weight * a * b;
        }
    }
    total
}

/// Integer-order forms evaluated as `∫⟨D_s^i h, D_s^i k⟩ds` by the trapezoidal
/// rule, with spectral arc derivatives on an arc-uniform representation.
/// Agrees with [`inner`] for fields without Nyquist content.
pub fn inner_quadrature(spec: &MetricSpec, c: &Curve, h: &DeformationField, k: &DeformationField) -> Result<f64> {
    spec.validate()?;
    check_pair(c, h, k)?;
    let view = to_arc_uniform(c, &[h, k])?;
    let cu = &view.curve;
    let (weight_bar, weights) = match spec.local_weights(cu.length()) {
        Some(w) => w,
        None => return inner(spec, c, h, k),
    };
    let hs = view.spectrum(0)?;
    let ks = view.spectrum(1)?;
    let derivs = (0..weights.len())
        .map(|i| {
            Ok((
                spectral::synthesize(&spectral::arc_derivative(&hs, i as u32))?,
                spectral::synthesize(&spectral::arc_derivative(&ks, i as u32))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = cu.samples();
    let w = vec![view.length / n as f64; n];
    Ok(weighted_form(&w, view.length, &derivs, &weights, weight_bar))
}

/// Integer-order forms with centered finite-difference arc derivatives on
/// the given samples; second-order accurate.
pub fn inner_local(spec: &MetricSpec, c: &Curve, h: &DeformationField, k: &DeformationField) -> Result<f64> {
    spec.validate()?;
    check_pair(c, h, k)?;
    let (weight_bar, weights) = match spec.local_weights(c.length()) {
        Some(w) => w,
        None => {
            return Err(Error::InvalidParameter(format!(
                "{} has no local form",
                spec.name()
            )))
        }
    };
    if weights.len() > 5 {
        return Err(Error::InvalidParameter("local form supports order <= 4".into()));
    }
    let derivs = (0..weights.len())
        .map(|i| {
            if i == 0 {
                Ok((h.clone(), k.clone()))
            } else {
                Ok((ds_derivative(h, c, i)?, ds_derivative(k, c, i)?))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(weighted_form(&c.arc_weights(), c.length(), &derivs, &weights, weight_bar))
}

/// Per-sample normal projection `π_N h = h - ⟨h,T⟩T`.
pub fn normal_projection(c: &Curve, h: &DeformationField) -> DeformationField {
    let t = unit_tangent(c);
    let mut v = h.vectors().clone();
    for (mut row, tr) in v.outer_iter_mut().zip(t.vectors().outer_iter()) {
        let d = row.dot(&tr);
        row.scaled_add(-d, &tr);
    }
    DeformationField::new(v).expect("finite projection of finite field")
}

/// `max_i |π_N h_i|`.
pub fn linf_finsler(c: &Curve, h: &DeformationField) -> f64 {
    normal_projection(c, h).max_norm()
}

/// `(1, sqrt((1 + (2π)^{2j}λ) / ((2π)^{2j}λ)))`: the constants with
/// `‖h‖_{H̃ʲ} ≤ ‖h‖_{Hʲ} ≤ upper·‖h‖_{H̃ʲ}`.
pub fn equivalence_bounds(j: u32, lambda: f64) -> Result<(f64, f64)> {
    if j == 0 {
        return Err(Error::InvalidParameter("j must be at least 1".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let p = (2.0 * PI).powi(2 * j as i32) * lambda;
    Ok((1.0, ((1.0 + p) / p).sqrt()))
}
