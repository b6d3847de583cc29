//! Smoothing constructions: direction-function smoothing with closure
//! projection, Fourier-decay smoothing homotopies, and the local Lipschitz
//! behavior of the elastic energy.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{distance, Curve, DeformationField};
use crate::energies::{evaluate, EnergyKind, ELASTIC_MIN_SAMPLES};
use crate::error::{Error, Result};
use crate::metrics::{norm, MetricSpec};
use crate::paths::{geodesic_distance, path_action, path_length, GeodesicOptions, Homotopy};
use crate::spectral::{
    analyze_uniform, arc_derivative, forward, frequency, inverse, periodic_derivative,
    resample_smooth, synthesize, to_arc_uniform,
};

/// Tolerance of the flatness test on unit chord directions.
pub const FLAT_TOL: f64 = 1e-8;
/// Closure defect accepted by [`project_closure`].
pub const CLOSURE_TOL: f64 = 1e-10;
/// Largest input defect [`project_closure`] attempts to remove.
pub const PROJECTION_RADIUS: f64 = 0.5;
const NEWTON_MAX_ITER: usize = 50;

fn require_planar(c: &Curve) -> Result<()> {
    if c.dim() != 2 {
        return Err(Error::PlanarOnly(c.dim()));
    }
    Ok(())
}

fn unit_chords(c: &Curve) -> Vec<[f64; 2]> {
    let n = c.samples();
    (0..n)
        .map(|i| {
            let (a, b) = (c.point(i), c.point((i + 1) % n));
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let r = dx.hypot(dy);
            [dx / r, dy / r]
        })
        .collect()
}

/// Whether every chord direction is `±` the first one within `tol`.
pub fn is_flat(c: &Curve, tol: f64) -> bool {
    if c.dim() != 2 {
        return false;
    }
    let t = unit_chords(c);
    let t0 = t[0];
    t.iter().all(|d| (d[0] * t0[1] - d[1] * t0[0]).abs() <= tol)
}

/// The angle of the unit tangent of a curve rescaled to length `2π`.
///
/// `tau[k]` is the direction of chord `k` of an equal-chord representation,
/// attached to the arc position `(k + ½)·2π/N`. Angles are unwrapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionFunction {
    pub tau: Vec<f64>,
    /// First sample of the represented curve.
    pub basepoint: [f64; 2],
    /// Length of the represented curve divided by `2π`.
    pub scale: f64,
}

impl DirectionFunction {
    pub fn samples(&self) -> usize {
        self.tau.len()
    }

    fn step(&self) -> f64 {
        2.0 * PI / self.tau.len() as f64
    }

    /// `(∫cos τ, ∫sin τ)` over `[0, 2π)`.
    pub fn closure(&self) -> [f64; 2] {
        closure_of(&self.tau)
    }

    pub fn closure_defect(&self) -> f64 {
        let [a, b] = self.closure();
        a.hypot(b)
    }

    /// `c(0) + scale·∫_0^s (cos τ, sin τ)` at the sample positions.
    pub fn reconstruct(&self) -> Result<Curve> {
        let h = self.step() * self.scale;
        let n = self.samples();
        let mut points = Array2::zeros((n, 2));
        let mut p = self.basepoint;
        for (i, t) in self.tau.iter().enumerate() {
            points[[i, 0]] = p[0];
            points[[i, 1]] = p[1];
            p[0] += h * t.cos();
            p[1] += h * t.sin();
        }
        Curve::new(points)
    }

    /// The same curve data with other angles.
    pub fn with_tau(&self, tau: Vec<f64>) -> Self {
        Self {
            tau,
            basepoint: self.basepoint,
            scale: self.scale,
        }
    }

    /// Turning number `(τ_N − τ_0)/2π` of the closed polygon.
    pub fn rotation_index(&self) -> i64 {
        let n = self.samples();
        let wrap = wrap_angle(self.tau[0] - self.tau[n - 1]);
        ((self.tau[n - 1] + wrap - self.tau[0]) / (2.0 * PI)).round() as i64
    }
}

fn closure_of(tau: &[f64]) -> [f64; 2] {
    let h = 2.0 * PI / tau.len() as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for t in tau {
        a += t.cos();
        b += t.sin();
    }
    [h * a, h * b]
}

fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Direction function of a planar, non-flat curve. Curves whose chords are
/// not equal to 1e-12 are first placed with equal chords on their
/// trigonometric interpolant.
pub fn direction_function(c: &Curve) -> Result<DirectionFunction> {
    require_planar(c)?;
    if is_flat(c, FLAT_TOL) {
        return Err(Error::FlatCurve);
    }
    let c = if c.arc_uniformity() > 1e-12 {
        resample_smooth(c, c.samples())?
    } else {
        c.clone()
    };
    let chords = unit_chords(&c);
    let mut tau = Vec::with_capacity(chords.len());
    let mut prev = chords[0][1].atan2(chords[0][0]);
    tau.push(prev);
    for d in &chords[1..] {
        let a = d[1].atan2(d[0]);
        prev += wrap_angle(a - prev);
        tau.push(prev);
    }
    Ok(DirectionFunction {
        tau,
        basepoint: [c.point(0)[0], c.point(0)[1]],
        scale: c.length() / (2.0 * PI),
    })
}

/// Projects angles onto the closure constraint `∫cos τ = ∫sin τ = 0` by
/// Gauss–Newton steps along the constraint gradients `−sin τ`, `cos τ`.
/// Input that already closes within [`CLOSURE_TOL`] is returned unchanged.
pub fn project_closure(f: &DirectionFunction) -> Result<DirectionFunction> {
    let defect = f.closure_defect();
    if defect <= CLOSURE_TOL {
        return Ok(f.clone());
    }
    if !(defect < PROJECTION_RADIUS) {
        return Err(Error::ProjectionFailed(format!(
            "closure defect {defect:.3e} exceeds {PROJECTION_RADIUS}"
        )));
    }
    let h = 2.0 * PI / f.samples() as f64;
    let mut tau = f.tau.clone();
    for _ in 0..NEWTON_MAX_ITER {
        let [p1, p2] = closure_of(&tau);
        if p1.hypot(p2) <= CLOSURE_TOL {
            return Ok(f.with_tau(tau));
        }
        let (mut ss, mut sc, mut cc) = (0.0, 0.0, 0.0);
        for t in &tau {
            let (s, c) = t.sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
        }
        // Gram matrix of the gradients (−sin τ, cos τ) in L².
        let (j11, j12, j22) = (h * ss, -h * sc, h * cc);
        let det = j11 * j22 - j12 * j12;
        if !(det.abs() > 1e-14) {
            break;
        }
        let a1 = (-p1 * j22 + p2 * j12) / det;
        let a2 = (-p2 * j11 + p1 * j12) / det;
        for t in tau.iter_mut() {
            let (s, c) = t.sin_cos();
            *t += -a1 * s + a2 * c;
        }
    }
    Err(Error::ProjectionFailed(format!(
        "Newton did not close the curve in {NEWTON_MAX_ITER} iterations"
    )))
}

/// Keeps the Fourier modes `|l| <= cutoff` of the periodic part
/// `τ − r·s` of the angles (`r` the rotation index).
pub fn truncate_direction(f: &DirectionFunction, cutoff: usize) -> DirectionFunction {
    let n = f.samples();
    let h = f.step();
    let r = f.rotation_index() as f64;
    let ramp = |k: usize| r * (k as f64 + 0.5) * h;
    let periodic = Array2::from_shape_fn((n, 1), |(k, _)| f.tau[k] - ramp(k));
    let mut coeffs = forward(periodic.view());
    for (k, mut row) in coeffs.outer_iter_mut().enumerate() {
        let l = frequency(k, n).unsigned_abs() as usize;
        if l > cutoff {
            row.fill(Complex64::new(0.0, 0.0));
        }
    }
    let back = inverse(coeffs.view());
    f.with_tau((0..n).map(|k| back[[k, 0]].re + ramp(k)).collect())
}

/// A direction-function smoothing path and its `H¹` action.
#[derive(Debug, Clone)]
pub struct H1Smoothing {
    /// Row 0 is the input (as reconstructed), row `K` the smooth curve.
    pub homotopy: Homotopy,
    pub action: f64,
    pub length: f64,
    /// Largest closure defect over the rows.
    pub max_defect: f64,
    /// The projected truncation `g = π(truncate(τ))`.
    pub smooth: DirectionFunction,
}

/// Builds `G(·,v) = π((1 − v)τ + v g)` with `g` the projected Fourier
/// truncation of `τ` at `cutoff`, reconstructs the curves and measures the
/// path under `H¹` with the given `λ`.
pub fn h1_smoothing_path(c: &Curve, cutoff: usize, k: usize, lambda: f64) -> Result<H1Smoothing> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let tau = project_closure(&direction_function(c)?)?;
    let g = project_closure(&truncate_direction(&tau, cutoff))?;
    let rows: Vec<DirectionFunction> = (0..=k)
        .into_par_iter()
        .map(|v| {
            let t = v as f64 / k as f64;
            let mix: Vec<f64> = tau.tau.iter().zip(&g.tau).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            project_closure(&tau.with_tau(mix))
                .map_err(|e| Error::ProjectionFailed(format!("at t = {t}: {e}")))
        })
        .collect::<Result<_>>()?;
    let max_defect = rows.iter().map(|r| r.closure_defect()).fold(0.0, f64::max);
    let homotopy = Homotopy::new(rows.iter().map(|r| r.reconstruct()).collect::<Result<_>>()?)?;
    let spec = MetricSpec::hj(1, lambda);
    Ok(H1Smoothing {
        action: path_action(&homotopy, &spec)?,
        length: path_length(&homotopy, &spec)?,
        homotopy,
        max_defect,
        smooth: g,
    })
}

/// The lift `C(θ,t) = (c₁(θ), t·f(θ))` of a flat curve, with `f` a cubic
/// smoothstep bump supported in `[1, 3]`, `f(2) = 1`.
#[derive(Debug, Clone)]
pub struct FlatLift {
    pub homotopy: Homotopy,
    /// `H¹` (λ = 1) path length.
    pub length: f64,
}

/// The bump used by [`flat_lift`].
pub fn bump(theta: f64) -> f64 {
    let s = |x: f64| x * x * (3.0 - 2.0 * x);
    match theta {
        x if (1.0..=2.0).contains(&x) => s(x - 1.0),
        x if (2.0..=3.0).contains(&x) => s(3.0 - x),
        _ => 0.0,
    }
}

/// Lifts a flat curve off its line over `t ∈ [0, t_max]` in `k` steps. The
/// curve is measured in its own line frame, rescaled to length `2π`; the
/// result is mapped back to the original frame.
pub fn flat_lift(c: &Curve, t_max: f64, k: usize) -> Result<FlatLift> {
    require_planar(c)?;
    if !is_flat(c, FLAT_TOL) {
        return Err(Error::NotFlat);
    }
    if !(t_max > 0.0 && t_max.is_finite()) || k == 0 {
        return Err(Error::InvalidParameter("t_max must be positive and K at least 1".into()));
    }
    let n = c.samples();
    let dir = unit_chords(c)[0];
    let normal = [-dir[1], dir[0]];
    let scale = c.length() / (2.0 * PI);
    let rows = (0..=k)
        .map(|v| {
            let t = t_max * v as f64 / k as f64;
            let mut p = c.points().clone();
            for i in 0..n {
                let lift = scale * t * bump(2.0 * PI * i as f64 / n as f64);
                p[[i, 0]] += lift * normal[0];
                p[[i, 1]] += lift * normal[1];
            }
            Curve::new(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let homotopy = Homotopy::new(rows)?;
    Ok(FlatLift {
        length: path_length(&homotopy, &MetricSpec::hj(1, 1.0))?,
        homotopy,
    })
}

/// Decay exponent `f(n)` of the Fourier smoothing.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    /// `f(n) = |n|`.
    Abs,
    /// `f(n) = (log(|n| + 2))²`.
    LogSquared,
    #[serde(skip)]
    Custom(fn(i64) -> f64),
}

impl Decay {
    pub fn eval(&self, n: i64) -> f64 {
        match self {
            Decay::Abs => n.unsigned_abs() as f64,
            Decay::LogSquared => ((n.unsigned_abs() as f64) + 2.0).ln().powi(2),
            Decay::Custom(f) => f(n),
        }
    }
}

/// Decay function and the times `t₁ > t₂ > … > 0` at which to smooth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothingSchedule {
    pub decay: Decay,
    pub times: Vec<f64>,
}

impl SmoothingSchedule {
    pub fn new(decay: Decay, times: Vec<f64>) -> Self {
        Self { decay, times }
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() || self.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter("schedule times must be positive".into()));
        }
        if self.times.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("schedule times must decrease".into()));
        }
        Ok(())
    }
}

/// One time of a Fourier smoothing run.
#[derive(Debug, Clone)]
pub struct FourierStep {
    pub t: f64,
    /// `C(·,t)` in the original frame.
    pub curve: Curve,
    /// `∫_0^1 (∫|∂_τC̃|²ds + λL⁴∫|D_s²∂_τC̃|²ds) dτ` for the interpolation
    /// `C̃ = (1−τ)c + τC(·,t)` in the unit-speed frame.
    pub delta: f64,
    /// Extremes of `|∂_u C̃|` over `u` and the `τ` grid.
    pub min_speed: f64,
    pub max_speed: f64,
    /// Spectral power beyond `N/4` of `C(·,t)` relative to that of `c`.
    pub tail_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct FourierSmoothing {
    pub steps: Vec<FourierStep>,
    /// Elastic energy of the unit-speed input.
    pub elastic_energy: f64,
    /// Set when the elastic energy exceeds [`HIGH_ENERGY`].
    pub warning: Option<String>,
}

pub const HIGH_ENERGY: f64 = 1e6;
/// Simpson nodes of the `τ` integral.
pub const TAU_NODES: usize = 17;

/// Smooths `c` by the multipliers `exp(−f(n)t)` on its Fourier coefficients
/// in the unit-speed frame (length `2π`), and measures the `H²` action
/// `delta(t)` of the straight interpolation back to `c`.
pub fn fourier_smoothing_homotopy(
    c: &Curve,
    sched: &SmoothingSchedule,
    lambda: f64,
) -> Result<FourierSmoothing> {
    sched.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let n = c.samples();
    if n < ELASTIC_MIN_SAMPLES || n % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "Fourier smoothing needs an even N >= {ELASTIC_MIN_SAMPLES}, got {n}"
        )));
    }
    let uniform = if c.arc_uniformity() > 1e-12 {
        resample_smooth(c, n)?
    } else {
        c.clone()
    };
    let scale = uniform.length() / (2.0 * PI);
    let unit = uniform.scaled(1.0 / scale)?;
    let elastic_energy = evaluate(&EnergyKind::Elastic, &unit)?;
    let warning = (elastic_energy > HIGH_ENERGY)
        .then(|| format!("elastic energy {elastic_energy:.3e} above {HIGH_ENERGY:e}"));
    let coeffs = forward(unit.points().view());
    let tail = |co: &Array2<Complex64>| -> f64 {
        co.outer_iter()
            .enumerate()
            .filter(|(k, _)| frequency(*k, n).unsigned_abs() as usize > n / 4)
            .map(|(_, r)| r.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    };
    let tail0 = tail(&coeffs);
    let spec = MetricSpec::hj(2, lambda);

    let steps = sched
        .times
        .par_iter()
        .map(|&t| -> Result<FourierStep> {
            let mut smoothed = coeffs.clone();
            for (k, mut row) in smoothed.outer_iter_mut().enumerate() {
                let m = (-sched.decay.eval(frequency(k, n)) * t).exp();
                row.mapv_inplace(|z| z * m);
            }
            let tail_ratio = if tail0 > 0.0 { tail(&smoothed) / tail0 } else { 0.0 };
            let target = inverse(smoothed.view()).mapv(|z| z.re);
            let field = DeformationField::new(&target - unit.points())?;
            let mut delta = 0.0;
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for j in 0..TAU_NODES {
                let tau = j as f64 / (TAU_NODES - 1) as f64;
                let row = Curve::new(unit.points() + &(field.vectors() * tau))?;
                let d = periodic_derivative(row.points().view(), 1);
                for r in d.outer_iter() {
                    let s = r[0].hypot(r[1]);
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                let value = if field.max_norm() == 0.0 {
                    0.0
                } else {
                    row.length() * norm(&spec, &row, &field)?.powi(2)
                };
                let w = if j == 0 || j == TAU_NODES - 1 {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                delta += w * value;
            }
            delta /= 3.0 * (TAU_NODES - 1) as f64;
            Ok(FourierStep {
                t,
                curve: Curve::new(target * scale)?,
                delta,
                min_speed: lo,
                max_speed: hi,
                tail_ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FourierSmoothing {
        steps,
        elastic_energy,
        warning,
    })
}

/// Spectral `D_s` of samples on a curve with speeds `speed = |∂_θc|`.
fn ds(values: &Array2<f64>, speed: &[f64]) -> Array2<f64> {
    let mut d = periodic_derivative(values.view(), 1);
    for (mut row, s) in d.outer_iter_mut().zip(speed) {
        row.mapv_inplace(|x| x / s);
    }
    d
}

fn speeds(c: &Array2<f64>) -> Vec<f64> {
    periodic_derivative(c.view(), 1)
        .outer_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect()
}

fn dots(a: &Array2<f64>, b: &Array2<f64>) -> Vec<f64> {
    a.outer_iter().zip(b.outer_iter()).map(|(x, y)| x.dot(&y)).collect()
}

/// Largest deviation, relative to the size of the left side, between the
/// central difference `∂_t D_s²C` along `C = c + t h` and the expansion
/// `D_s²h − ⟨D_s²h, T⟩T − ⟨D_s h, D_s²c⟩T − 2⟨D_s h, T⟩D_s²c`, all with
/// spectral `D_s`.
pub fn commutator_residual(c: &Curve, h: &DeformationField, eps: f64) -> Result<f64> {
    h.check_aligned(c)?;
    let d2 = |p: &Array2<f64>| {
        let sp = speeds(p);
        ds(&ds(p, &sp), &sp)
    };
    let plus = c.points() + &(h.vectors() * eps);
    let minus = c.points() - &(h.vectors() * eps);
    let lhs = (d2(&plus) - d2(&minus)) / (2.0 * eps);

    let sp = speeds(c.points());
    let t = ds(c.points(), &sp);
    let k = ds(&t, &sp);
    let dh = ds(h.vectors(), &sp);
    let d2h = ds(&dh, &sp);
    let a = dots(&d2h, &t);
    let b = dots(&dh, &k);
    let g = dots(&dh, &t);
    let mut rhs = d2h.clone();
    for i in 0..c.samples() {
        for d in 0..c.dim() {
            rhs[[i, d]] -= (a[i] + b[i]) * t[[i, d]] + 2.0 * g[i] * k[[i, d]];
        }
    }
    let scale = lhs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    Ok((lhs - rhs).iter().fold(0.0f64, |m, x| m.max(x.abs())) / scale)
}

/// Per step of a homotopy: `√L·N − sup|D_s ∂_tC|`, with
/// `N = (∫|D_s²∂_tC|²ds)^{1/2}` and `∂_tC = K·ΔC`, at the midpoint curve.
pub fn supporting_poincare_margins(c: &Homotopy) -> Result<Vec<f64>> {
    let k = c.k() as f64;
    (0..c.k())
        .map(|v| {
            let host = c.midpoint(v)?;
            let dt = c.step(v).scaled(k);
            let view = to_arc_uniform(&host, &[&dt])?;
            let spec = analyze_uniform(&view.fields[0], view.length)?;
            let d1 = synthesize(&arc_derivative(&spec, 1))?;
            let d2 = arc_derivative(&spec, 2);
            let big_n = (view.length * d2.power()).sqrt();
            let sup = d1.max_norm();
            Ok(view.length.sqrt() * big_n - sup)
        })
        .collect()
}

/// Elastic energy change against an `H²` distance estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElasticLipschitzReport {
    pub energy0: f64,
    pub energy1: f64,
    pub delta_energy: f64,
    /// Geodesic upper bound on the `H²` distance.
    pub distance: f64,
    /// `|ΔE| / distance`; `None` when the distance is zero.
    pub ratio: Option<f64>,
    /// `len(c0)/8`.
    pub neighborhood: f64,
    pub within_neighborhood: bool,
}

/// Compares `|E(c1) − E(c0)|` with the `H²` distance estimate. `spec` must be
/// `H²` or `H̃²`. Pairs farther apart than `len(c0)/8` are reported as outside
/// the Lipschitz neighborhood, not rejected.
pub fn elastic_lipschitz_check(
    c0: &Curve,
    c1: &Curve,
    spec: &MetricSpec,
    opts: &GeodesicOptions,
) -> Result<ElasticLipschitzReport> {
    match spec {
        MetricSpec::Hj { j: 2, .. } | MetricSpec::HjTilde { j: 2, .. } => {}
        other => {
            return Err(Error::InvalidParameter(format!(
                "elastic Lipschitz check needs H2 or H2~, got {}",
                other.name()
            )))
        }
    }
    let energy0 = evaluate(&EnergyKind::Elastic, c0)?;
    let energy1 = evaluate(&EnergyKind::Elastic, c1)?;
    let same = c0.samples() == c1.samples()
        && (0..c0.samples()).all(|i| distance(c0.point(i), c1.point(i)) == 0.0);
    let distance = if same {
        0.0
    } else {
        geodesic_distance(c0, c1, spec, opts)?.distance
    };
    let delta_energy = (energy1 - energy0).abs();
    let neighborhood = c0.length() / 8.0;
    Ok(ElasticLipschitzReport {
        energy0,
        energy1,
        delta_energy,
        distance,
        ratio: (distance > 0.0).then(|| delta_energy / distance),
        neighborhood,
        within_neighborhood: distance < neighborhood,
    })
}
