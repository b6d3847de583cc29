//! Randomized and extremal checks of the Poincaré-type inequalities that
//! relate the metrics.
//!
//! Every check compares two sides `lhs ≤ rhs` and records the relative margin
//! `(rhs - lhs) / max(lhs, rhs)`; a check passes when no margin falls below
//! `-slack` and its extremal family behaves as expected.
//!
//! The discrete forms are chosen so the inequalities hold exactly (up to
//! rounding) rather than up to a discretization error:
//!
//! * the sup bound is applied to the piecewise-linear interpolant, whose mean
//!   is the trapezoidal mean and whose `∫|h'|ds` is `Σ|h_{i+1} - h_i|`;
//! * the `L²` bounds are evaluated in the frequency domain on an arc-uniform
//!   representation;
//! * the fundamental `H¹` bound pairs the spectral norm with the total
//!   variation of the samples, which never exceeds that of the interpolant.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{mean_field, Curve, DeformationField};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricSpec};
use crate::random;
use crate::shapes;
use crate::spectral::{self, arc_derivative, SpectralField};

/// Outcome of one inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    /// Number of random draws.
    pub samples: usize,
    /// Smallest relative margin `(rhs - lhs) / max(lhs, rhs)` seen.
    pub worst_margin: f64,
    /// How far the extremal family is from attaining the constant, when the
    /// check has one.
    pub extremizer_error: Option<f64>,
    pub violations: usize,
    pub slack: f64,
    /// Named auxiliary values (deterministic cases, sweep ratios).
    pub details: BTreeMap<String, f64>,
    pub passed: bool,
}

/// Settings shared by the checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckConfig {
    pub seed: u64,
    /// Draws for the randomized part of each check.
    pub draws: usize,
    /// Draws for the norm sandwich.
    pub sandwich_draws: usize,
    /// Samples per random curve.
    pub n: usize,
    /// Tolerated relative violation. Setting it negative demands a strictly
    /// positive margin, which makes every check fail; this is how the harness
    /// tests itself.
    pub slack: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            draws: 1000,
            sandwich_draws: 10_000,
            n: 256,
            slack: 1e-8,
        }
    }
}

/// Tolerance on equality for the spectral extremizers.
pub const EXTREMIZER_TOL: f64 = 1e-6;
/// Required sup ratio at `ε = L/100`.
pub const SUP_RATIO_MIN: f64 = 0.45;
const POOL: usize = 32;
const LAMBDAS: [f64; 4] = [0.01, 0.25, 1.0, 4.0];

fn margin(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (rhs - lhs) / scale
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn draw_seed(seed: u64, tag: u64, i: usize) -> u64 {
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn curve_pool(cfg: &CheckConfig, tag: u64) -> Result<Vec<Curve>> {
    (0..POOL)
        .into_par_iter()
        .map(|i| {
            let mut rng = random::seeded(draw_seed(cfg.seed, tag, i));
            random::smooth_curve(&mut rng, cfg.n, 6)
        })
        .collect()
}

struct Tally {
    worst: f64,
    violations: usize,
}

/// Runs `draw(i)` for every draw and tallies the margins it returns.
fn tally<F>(draws: usize, slack: f64, draw: F) -> Result<Tally>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    let margins: Vec<Vec<f64>> = (0..draws).into_par_iter().map(draw).collect::<Result<_>>()?;
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for m in margins.iter().flatten() {
        worst = worst.min(*m);
        if *m < -slack {
            violations += 1;
        }
    }
    Ok(Tally { worst, violations })
}

fn check_draws(samples: usize, min: usize) -> Result<()> {
    if samples < min {
        return Err(Error::InvalidParameter(format!(
            "need at least {min} samples, got {samples}"
        )));
    }
    Ok(())
}

fn total_variation(h: &DeformationField) -> f64 {
    let n = h.samples();
    (0..n)
        .map(|i| {
            let a = h.vector(i);
            let b = h.vector((i + 1) % n);
            a.iter().zip(b.iter()).map(|(x, y)| (y - x).powi(2)).sum::<f64>().sqrt()
        })
        .sum()
}

/// `(sup|h - h̄|, ½Σ|h_{i+1} - h_i|)` with the trapezoidal mean.
pub fn sup_sides(c: &Curve, h: &DeformationField) -> Result<(f64, f64)> {
    h.check_aligned(c)?;
    let mean = mean_field(h, c);
    let sup = h
        .vectors()
        .outer_iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok((sup, 0.5 * total_variation(h)))
}

/// Two-step extremal profile on a circle of length `L` with `n` samples:
/// the tent with slopes `±1` on `[0, 2ε)`, mollified by a cosine bump of
/// half-width `ε/4`. Returns `sup|h - h̄| / ∫|h'|ds`.
pub fn two_step_ratio(n: usize, eps_frac: f64) -> Result<f64> {
    if !(eps_frac > 0.0 && eps_frac < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, L/2), got {eps_frac}·L"
        )));
    }
    let c = shapes::circle(n, 1.0)?;
    let length = c.length();
    let eps = eps_frac * length;
    let ds = length / n as f64;
    let tent = |s: f64| {
        if s < eps {
            s
        } else if s < 2.0 * eps {
            2.0 * eps - s
        } else {
            0.0
        }
    };
    let raw: Vec<f64> = (0..n).map(|i| tent(i as f64 * ds)).collect();
    let half = ((eps / 4.0) / ds).round().max(1.0) as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| 1.0 + (PI * k as f64 / (half + 1) as f64).cos())
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let mut v = Array2::zeros((n, 2));
    for i in 0..n {
        let mut acc = 0.0;
        for (k, w) in (-half..=half).zip(&kernel) {
            acc += w * raw[(i as isize + k).rem_euclid(n as isize) as usize];
        }
        v[[i, 0]] = acc / ksum;
    }
    let h = DeformationField::new(v)?;
    let (sup, half_tv) = sup_sides(&c, &h)?;
    Ok(sup / (2.0 * half_tv))
}

/// Sup-norm Poincaré bound `sup|h - h̄| ≤ ½∫|h'|ds` on random fields, plus
/// the two-step family whose ratio tends to `1/2`.
pub fn check_poincare_sup(cfg: &CheckConfig, samples: usize) -> Result<InequalityReport> {
    check_draws(samples, 100)?;
    let pool = curve_pool(cfg, 1)?;
    let t = tally(samples, cfg.slack, |i| {
        let mut rng = random::seeded(draw_seed(cfg.seed, 2, i));
        let c = &pool[i % POOL];
        let h = random::field(&mut rng, c);
        let (lhs, rhs) = sup_sides(c, &h)?;
        Ok(vec![margin(lhs, rhs)])
    })?;

    let mut details = BTreeMap::new();
    let c = &pool[0];
    let (lhs, rhs) = sup_sides(c, &DeformationField::constant(c.samples(), &[0.7, -1.3]))?;
    details.insert("constant_lhs".into(), lhs);
    details.insert("constant_rhs".into(), rhs);

    let sweep = [0.16, 0.08, 0.04, 0.02, 0.01];
    let ratios: Vec<f64> = sweep
        .par_iter()
        .map(|e| two_step_ratio(16_384, *e))
        .collect::<Result<_>>()?;
    for (e, r) in sweep.iter().zip(&ratios) {
        details.insert(format!("ratio_eps_{e}"), *r);
    }
    let monotone = ratios.windows(2).all(|w| w[1] > w[0]);
    let last = *ratios.last().unwrap();
    let extremal_ok = monotone && last >= SUP_RATIO_MIN && last <= 0.5 + cfg.slack;
    Ok(InequalityReport {
        name: "poincare_sup".into(),
        samples,
        worst_margin: t.worst,
        extremizer_error: Some(0.5 - last),
        violations: t.violations,
        slack: cfg.slack,
        details,
        passed: t.violations == 0 && lhs == 0.0 && rhs == 0.0 && extremal_ok,
    })
}

fn spectrum(c: &Curve, h: &DeformationField) -> Result<SpectralField> {
    spectral::to_arc_uniform(c, &[h])?.spectrum(0)
}

/// `∫|h⁽ⁱ⁾ - mean|² ds`, the mean subtracted only for `i = 0`.
fn derivative_energy(spec: &SpectralField, i: u32) -> f64 {
    let d = arc_derivative(spec, i);
    spec.length() * (d.power() - if i == 0 { d.mode_energy(0) } else { 0.0 })
}

/// `(∫|h⁽ⁱ⁾ - mean|², (L/2π)^{2(j-i)} ∫|h⁽ʲ⁾|²)`.
pub fn l2_sides(c: &Curve, h: &DeformationField, i: u32, j: u32) -> Result<(f64, f64)> {
    h.check_aligned(c)?;
    if i >= j {
        return Err(Error::InvalidParameter(format!("need i < j, got i={i}, j={j}")));
    }
    let s = spectrum(c, h)?;
    let factor = (s.length() / (2.0 * PI)).powi(2 * (j - i) as i32);
    Ok((derivative_energy(&s, i), factor * derivative_energy(&s, j)))
}

fn arc_field<F: Fn(f64) -> [f64; 2]>(c: &Curve, f: F) -> Result<DeformationField> {
    let n = c.samples();
    let mut v = Array2::zeros((n, 2));
    for i in 0..n {
        let [a, b] = f(2.0 * PI * i as f64 / n as f64);
        v[[i, 0]] = a;
        v[[i, 1]] = b;
    }
    DeformationField::new(v)
}

/// `L²` Poincaré bound of order `j ∈ {1, 2}` on random fields, its chain
/// form `i < j`, and equality for `a sin(2πs/L)` and the rotation field
/// `(cos, sin)(2πs/L)`.
pub fn check_poincare_l2(cfg: &CheckConfig, j: u32, samples: usize) -> Result<InequalityReport> {
    if !(j == 1 || j == 2) {
        return Err(Error::InvalidParameter(format!("j must be 1 or 2, got {j}")));
    }
    check_draws(samples, 1)?;
    let pool = curve_pool(cfg, 3)?;
    let t = tally(samples, cfg.slack, |k| {
        let mut rng = random::seeded(draw_seed(cfg.seed, 4 + j as u64, k));
        let c = &pool[k % POOL];
        let h = random::field(&mut rng, c);
        (0..j)
            .map(|i| l2_sides(c, &h, i, j).map(|(a, b)| margin(a, b)))
            .collect()
    })?;

    // Equal-chord smooth curves are arc-uniform, so sample index i sits at
    // s = iL/N and these are the exact extremizers.
    let c = &pool[0];
    let sine = arc_field(c, |x| [2.5 * x.sin(), 0.0])?;
    let rotation = arc_field(c, |x| [x.cos(), x.sin()])?;
    let mut details = BTreeMap::new();
    let mut ext: f64 = 0.0;
    for (name, h) in [("sine", &sine), ("rotation", &rotation)] {
        for i in 0..j {
            let (a, b) = l2_sides(c, h, i, j)?;
            let e = rel_err(a, b);
            details.insert(format!("{name}_i{i}_rel_err"), e);
            ext = ext.max(e);
        }
    }
    Ok(InequalityReport {
        name: format!("poincare_l2_j{j}"),
        samples,
        worst_margin: t.worst,
        extremizer_error: Some(ext),
        violations: t.violations,
        slack: cfg.slack,
        details,
        passed: t.violations == 0 && ext <= EXTREMIZER_TOL,
    })
}

/// `(‖h‖_{H¹}, √λ Σ|h_{i+1} - h_i|)`.
pub fn fundamental_sides(c: &Curve, h: &DeformationField, lambda: f64) -> Result<(f64, f64)> {
    let lhs = metrics::norm(&MetricSpec::hj(1, lambda), c, h)?;
    Ok((lhs, lambda.sqrt() * total_variation(h)))
}

/// `‖h‖_{H¹} ≥ √λ∫|D_s h|ds` on random fields for several `λ`.
pub fn check_fundamental_h1(cfg: &CheckConfig, samples: usize) -> Result<InequalityReport> {
    check_draws(samples, 1)?;
    let pool = curve_pool(cfg, 7)?;
    let t = tally(samples, cfg.slack, |k| {
        let mut rng = random::seeded(draw_seed(cfg.seed, 8, k));
        let c = &pool[k % POOL];
        let h = random::field(&mut rng, c);
        let (a, b) = fundamental_sides(c, &h, LAMBDAS[k % LAMBDAS.len()])?;
        Ok(vec![margin(b, a)])
    })?;

    let mut details = BTreeMap::new();
    let circle = shapes::circle(cfg.n, 1.0)?;
    let (a, b) = fundamental_sides(&circle, &DeformationField::constant(cfg.n, &[1.0, 2.0]), 1.0)?;
    details.insert("constant_lhs".into(), a);
    details.insert("constant_rhs".into(), b);
    let constant_ok = b == 0.0;
    let sine = arc_field(&circle, |x| [x.sin(), 0.0])?;
    let (a, b) = fundamental_sides(&circle, &sine, 1.0)?;
    details.insert("circle_sine_lhs".into(), a);
    details.insert("circle_sine_rhs".into(), b);
    let sine_margin = margin(b, a);
    details.insert("circle_sine_margin".into(), sine_margin);
    Ok(InequalityReport {
        name: "fundamental_h1".into(),
        samples,
        worst_margin: t.worst,
        extremizer_error: None,
        violations: t.violations,
        slack: cfg.slack,
        details,
        passed: t.violations == 0 && constant_ok && sine_margin > 0.0,
    })
}

/// `‖h‖_{H̃ʲ} ≤ ‖h‖_{Hʲ} ≤ C‖h‖_{H̃ʲ}` for `j ∈ {1, 2}` and several `λ`; both
/// constants are attained, by constants and by the first mode.
pub fn check_sandwich(cfg: &CheckConfig, samples: usize) -> Result<InequalityReport> {
    check_draws(samples, 1)?;
    let pool = curve_pool(cfg, 9)?;
    let case = |k: usize| ((k / LAMBDAS.len()) % 2 + 1, LAMBDAS[k % LAMBDAS.len()]);
    let sides = |c: &Curve, h: &DeformationField, j: u32, lambda: f64| -> Result<(f64, f64, f64)> {
        let full = metrics::norm(&MetricSpec::hj(j, lambda), c, h)?;
        let tilde = metrics::norm(&MetricSpec::hj_tilde(j, lambda), c, h)?;
        let (_, upper) = metrics::equivalence_bounds(j, lambda)?;
        Ok((tilde, full, upper * tilde))
    };
    let t = tally(samples, cfg.slack, |k| {
        let mut rng = random::seeded(draw_seed(cfg.seed, 10, k));
        let c = &pool[k % POOL];
        let h = random::field(&mut rng, c);
        let (j, lambda) = case(k);
        let (lo, mid, hi) = sides(c, &h, j as u32, lambda)?;
        Ok(vec![margin(lo, mid), margin(mid, hi)])
    })?;

    let c = &pool[0];
    let constant = DeformationField::constant(c.samples(), &[0.3, 1.1]);
    let mode = arc_field(c, |x| [x.cos(), 0.5 * x.sin()])?;
    let mut details = BTreeMap::new();
    let mut ext: f64 = 0.0;
    for j in 1..=2u32 {
        for lambda in LAMBDAS {
            let (lo, mid, _) = sides(c, &constant, j, lambda)?;
            let (_, mid1, hi1) = sides(c, &mode, j, lambda)?;
            let e = rel_err(lo, mid).max(rel_err(mid1, hi1));
            details.insert(format!("j{j}_lambda_{lambda}_rel_err"), e);
            ext = ext.max(e);
        }
    }
    Ok(InequalityReport {
        name: "norm_sandwich".into(),
        samples,
        worst_margin: t.worst,
        extremizer_error: Some(ext),
        violations: t.violations,
        slack: cfg.slack,
        details,
        passed: t.violations == 0 && ext <= EXTREMIZER_TOL,
    })
}

/// `max|π_N h| ≤ √2‖h‖_{H̃¹}` at `λ = 1/4`.
pub fn check_linf_bound(cfg: &CheckConfig, samples: usize) -> Result<InequalityReport> {
    check_draws(samples, 1)?;
    let pool = curve_pool(cfg, 11)?;
    let spec = MetricSpec::hj_tilde(1, 0.25);
    let sides = |c: &Curve, h: &DeformationField| -> Result<(f64, f64)> {
        Ok((metrics::linf_finsler(c, h), 2f64.sqrt() * metrics::norm(&spec, c, h)?))
    };
    let t = tally(samples, cfg.slack, |k| {
        let mut rng = random::seeded(draw_seed(cfg.seed, 12, k));
        let c = &pool[k % POOL];
        let h = random::field(&mut rng, c);
        let (a, b) = sides(c, &h)?;
        Ok(vec![margin(a, b)])
    })?;
    let mut details = BTreeMap::new();
    let circle = shapes::circle(cfg.n, 1.0)?;
    let radial = DeformationField::position(&circle);
    let (a, b) = sides(&circle, &radial)?;
    details.insert("circle_radial_ratio".into(), a / b);
    Ok(InequalityReport {
        name: "linf_bound".into(),
        samples,
        worst_margin: t.worst,
        extremizer_error: None,
        violations: t.violations,
        slack: cfg.slack,
        details,
        passed: t.violations == 0,
    })
}

/// Every check with the draw counts of `cfg`.
pub fn check_all(cfg: &CheckConfig) -> Result<Vec<InequalityReport>> {
    Ok(vec![
        check_poincare_sup(cfg, cfg.draws.max(100))?,
        check_poincare_l2(cfg, 1, cfg.draws)?,
        check_poincare_l2(cfg, 2, cfg.draws)?,
        check_fundamental_h1(cfg, cfg.draws)?,
        check_sandwich(cfg, cfg.sandwich_draws)?,
        check_linf_bound(cfg, cfg.draws)?,
    ])
}

pub fn all_passed(reports: &[InequalityReport]) -> bool {
    reports.iter().all(|r| r.passed)
}
