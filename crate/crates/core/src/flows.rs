//! Explicit Euler gradient flows and a linear stability probe.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{chord_directions, tangent_normal_curvature, Curve, DeformationField};
use crate::energies::{evaluate, metric_gradient, EnergyKind};
use crate::error::{Error, Result};
use crate::metrics::{norm, normal_projection, MetricSpec};
use crate::spectral::{analyze_uniform, resample_smooth};

/// Time-step policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum TimeStep {
    /// Every step uses `dt`; energy increases are recorded, not corrected.
    Fixed { dt: f64 },
    /// Steps start at `min(dt_max, stability bound)` and are halved while the
    /// energy increases.
    Adaptive { dt_max: f64 },
}

/// Default fold-back threshold, `2π/3`.
pub const DEFAULT_MAX_TURNING: f64 = 2.0 * PI / 3.0;

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub energy: EnergyKind,
    pub metric: MetricSpec,
    pub time_step: TimeStep,
    pub steps: usize,
    /// Multiply the velocity by `1/len(c)`.
    pub conformal: bool,
    /// Drop the tangential part of the velocity.
    pub project_normal: bool,
    /// Resample at equal arc length every `k` steps; 0 disables.
    pub resample_every: usize,
    pub max_halvings: usize,
    /// A turning angle between consecutive chords above this value counts
    /// as a fold-back and ends the flow.
    pub max_turning: f64,
    /// Stop at this time; the last step is shortened to land on it and
    /// `steps` becomes an upper bound.
    pub until: Option<f64>,
}

impl FlowConfig {
    pub fn new(energy: EnergyKind, metric: MetricSpec, time_step: TimeStep, steps: usize) -> Self {
        Self {
            energy,
            metric,
            time_step,
            steps,
            conformal: false,
            project_normal: false,
            resample_every: 10,
            max_halvings: 30,
            max_turning: DEFAULT_MAX_TURNING,
            until: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        let dt = match self.time_step {
            TimeStep::Fixed { dt } => dt,
            TimeStep::Adaptive { dt_max } => dt_max,
        };
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if let Some(t) = self.until {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("stop time must be positive, got {t}")));
            }
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        if let MetricSpec::LinfFinsler = self.metric {
            return Err(Error::NotAnInnerProduct(self.metric.name().into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub step: usize,
    pub time: f64,
    pub curve: Curve,
    pub energy: f64,
    pub length: f64,
    /// Metric norm of the displacement taken in this step.
    pub step_norm: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub records: Vec<FlowRecord>,
    /// Set when the flow stopped early, e.g. "flow degenerate at step 12: ...".
    pub failure: Option<String>,
}

impl FlowTrajectory {
    pub fn last(&self) -> &FlowRecord {
        self.records.last().expect("trajectory holds the initial record")
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }
}

/// Descent velocity `-(1/L)^conformal · grad`, optionally normal-projected.
pub fn velocity(c: &Curve, cfg: &FlowConfig) -> Result<DeformationField> {
    let g = metric_gradient(&cfg.energy, c, &cfg.metric)?;
    let scale = if cfg.conformal { -1.0 / c.length() } else { -1.0 };
    let v = g.scaled(scale);
    Ok(if cfg.project_normal {
        normal_projection(c, &v)
    } else {
        v
    })
}

/// Explicit stability bound for local metrics; `None` for spectral metrics,
/// whose gradients are already smoothing.
///
/// Second-order energies use `0.25·ℓ_min²/D` with `D` the effective
/// diffusivity of the length term; the elastic energy uses
/// `ℓ_min⁴/(4π⁴D)` for the spectral fourth derivative.
pub fn stability_bound(c: &Curve, cfg: &FlowConfig) -> Option<f64> {
    let l = c.length();
    let conf = if cfg.conformal { 1.0 / l } else { 1.0 };
    let d = match cfg.metric {
        MetricSpec::H0 => l * conf,
        MetricSpec::ConformalH0 => conf / l,
        MetricSpec::MmHa { .. } => conf,
        _ => return None,
    };
    let h = c.chords().into_iter().fold(f64::INFINITY, f64::min);
    match cfg.energy {
        EnergyKind::Length => Some(0.25 * h * h / d),
        EnergyKind::Elastic => Some(h.powi(4) / (4.0 * PI.powi(4) * d)),
        _ => None,
    }
}

/// Largest turning angle between consecutive chords and its vertex.
pub fn max_turning_angle(c: &Curve) -> (f64, usize) {
    let (t, _) = chord_directions(c);
    let n = c.samples();
    let mut worst = (0.0, 0);
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let cos = t.row(prev).dot(&t.row(i)).clamp(-1.0, 1.0);
        let angle = cos.acos();
        if angle > worst.0 {
            worst = (angle, i);
        }
    }
    worst
}

fn energy_tolerance(e: f64) -> f64 {
    1e-12 * e.abs().max(1.0)
}

fn take_step(
    c: &Curve,
    v: &DeformationField,
    energy: f64,
    cfg: &FlowConfig,
    remaining: f64,
) -> std::result::Result<(Curve, f64, f64), String> {
    match cfg.time_step {
        TimeStep::Fixed { dt } => {
            let dt = dt.min(remaining);
            let next = c.displaced(v, dt).map_err(|e| e.to_string())?;
            let e = evaluate(&cfg.energy, &next).map_err(|e| e.to_string())?;
            if !e.is_finite() {
                return Err("non-finite energy".into());
            }
            Ok((next, e, dt))
        }
        TimeStep::Adaptive { dt_max } => {
            let mut dt = match stability_bound(c, cfg) {
                Some(b) => dt_max.min(b),
                None => dt_max,
            }
            .min(remaining);
            for _ in 0..=cfg.max_halvings {
                if let Ok(next) = c.displaced(v, dt) {
                    if let Ok(e) = evaluate(&cfg.energy, &next) {
                        if e.is_finite() && e <= energy + energy_tolerance(energy) {
                            return Ok((next, e, dt));
                        }
                    }
                }
                dt *= 0.5;
            }
            Err(format!("energy increase persists after {} halvings", cfg.max_halvings))
        }
    }
}

/// Runs the flow `c ← c + dt·v(c)`.
///
/// Invalid configurations are errors. Everything that goes wrong once the
/// flow is running (non-immersed iterate, unresolved energy increase,
/// non-finite values) ends the trajectory with a recorded failure.
pub fn run_flow(c0: &Curve, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    cfg.validate()?;
    let n = c0.samples();
    let e0 = evaluate(&cfg.energy, c0)?;
    velocity(c0, cfg)?;
    let mut records = vec![FlowRecord {
        step: 0,
        time: 0.0,
        curve: c0.clone(),
        energy: e0,
        length: c0.length(),
        step_norm: 0.0,
        dt: 0.0,
    }];
    let mut c = c0.clone();
    let mut energy = e0;
    let mut time = 0.0;
    let mut failure = None;

    for step in 1..=cfg.steps {
        let remaining = cfg.until.map_or(f64::INFINITY, |t| t - time);
        if remaining <= 1e-14 * cfg.until.unwrap_or(1.0) {
            break;
        }
        let v = match velocity(&c, cfg) {
            Ok(v) => v,
            Err(err) => {
                failure = Some(format!("flow degenerate at step {step}: {err}"));
                break;
            }
        };
        let (next, e, dt) = match take_step(&c, &v, energy, cfg, remaining) {
            Ok(r) => r,
            Err(msg) => {
                failure = Some(format!("flow degenerate at step {step}: {msg}"));
                break;
            }
        };
        let step_norm = dt * norm(&cfg.metric, &c, &v).unwrap_or(f64::NAN);
        let (angle, at) = max_turning_angle(&next);
        if angle > cfg.max_turning {
            failure = Some(format!(
                "flow degenerate at step {step}: fold-back at sample {at} (turning angle {angle:.3})"
            ));
            break;
        }
        c = next;
        energy = e;
        if cfg.resample_every > 0 && step % cfg.resample_every == 0 {
            match resample_smooth(&c, n) {
                Ok(r) => {
                    c = r;
                    energy = match evaluate(&cfg.energy, &c) {
                        Ok(e) => e,
                        Err(err) => {
                            failure = Some(format!("flow degenerate at step {step}: {err}"));
                            break;
                        }
                    };
                }
                Err(err) => {
                    failure = Some(format!("flow degenerate at step {step}: {err}"));
                    break;
                }
            }
        }
        time += dt;
        records.push(FlowRecord {
            step,
            time,
            curve: c.clone(),
            energy,
            length: c.length(),
            step_norm,
            dt,
        });
    }
    Ok(FlowTrajectory { records, failure })
}

/// Growth of one perturbation frequency along a short flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrowth {
    pub k: usize,
    /// `a_{m+1}/a_m` for the frequency-`k` amplitude of the difference
    /// between perturbed and unperturbed flows.
    pub ratios: Vec<f64>,
    /// `(a_M/a_0)^{1/M}`.
    pub mean_ratio: f64,
    pub max_ratio: f64,
    /// `ln(mean_ratio)/dt`.
    pub exponent: f64,
    /// Per-arc `(|d|_M / |d|_0)^{1/M}` over equal index arcs.
    pub arc_growth: Vec<f64>,
    /// The perturbed or unperturbed flow degenerated.
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationReport {
    pub energy: String,
    pub metric: MetricSpec,
    pub dt: f64,
    pub steps: usize,
    pub eps: f64,
    pub modes: Vec<ModeGrowth>,
    /// Mean ratios strictly increase with `k`.
    pub increasing_with_k: bool,
    pub max_ratio: f64,
}

/// Number of arcs used for the per-arc growth.
pub const PROBE_ARCS: usize = 8;

/// Frequency-`k` amplitude of the normal component of `b - a` along `a`.
fn normal_difference(a: &Curve, b: &Curve) -> Result<DeformationField> {
    let frame = tangent_normal_curvature(a)?;
    let d = b.points() - a.points();
    let normal: Vec<f64> = d
        .outer_iter()
        .zip(frame.normal.vectors().outer_iter())
        .map(|(x, nn)| x.dot(&nn))
        .collect();
    DeformationField::new(ndarray::Array2::from_shape_vec((normal.len(), 1), normal).expect("shape"))
}

fn mode_amplitude(d: &DeformationField, k: usize) -> f64 {
    let spec = analyze_uniform(d, 1.0).expect("even sample count checked by caller");
    let kk = k as i64;
    (spec.mode_energy(kk) + if 2 * k == d.samples() { 0.0 } else { spec.mode_energy(-kk) }).sqrt()
}

fn arc_norms(d: &DeformationField) -> Vec<f64> {
    let n = d.samples();
    (0..PROBE_ARCS)
        .map(|a| {
            (a * n / PROBE_ARCS..(a + 1) * n / PROBE_ARCS)
                .map(|i| d.vector(i).dot(&d.vector(i)).sqrt())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Perturbs the planar curve `c0` by `eps·cos(2πk s/L)·N`, runs the flow of `cfg` with a
/// fixed step and no resampling from both initial curves, and measures how
/// the frequency-`k` part of their difference evolves.
///
/// `eps` defaults to `1e-3·L`. The step is `dt` of a fixed policy or
/// `dt_max` of an adaptive one.
pub fn stability_probe(c0: &Curve, cfg: &FlowConfig, mode_k: usize, eps: Option<f64>) -> Result<ModeGrowth> {
    cfg.validate()?;
    let n = c0.samples();
    if mode_k < 2 || 2 * mode_k > n {
        return Err(Error::InvalidParameter(format!(
            "mode must lie in [2, N/2], got {mode_k}"
        )));
    }
    if n % 2 == 1 {
        return Err(Error::OddSampleCount(n));
    }
    let l = c0.length();
    let eps = eps.unwrap_or(1e-3 * l);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let dt = match cfg.time_step {
        TimeStep::Fixed { dt } => dt,
        TimeStep::Adaptive { dt_max } => dt_max,
    };
    let mut run_cfg = cfg.clone();
    run_cfg.time_step = TimeStep::Fixed { dt };
    run_cfg.resample_every = 0;

    let table = c0.arc_table();
    let mut pert = tangent_normal_curvature(c0)?.normal.into_vectors();
    for (i, mut row) in pert.outer_iter_mut().enumerate() {
        let s = table.cumulative_length[i];
        row.mapv_inplace(|x| x * eps * (2.0 * PI * mode_k as f64 * s / l).cos());
    }
    let pert = DeformationField::new(pert)?;
    let c1 = c0.displaced(&pert, 1.0)?;

    let (base, moved) = rayon::join(|| run_flow(c0, &run_cfg), || run_flow(&c1, &run_cfg));
    let (base, moved) = (base?, moved?);
    let steps = base.records.len().min(moved.records.len());
    let diverged = !base.completed() || !moved.completed();

    let mut amps = Vec::with_capacity(steps);
    let mut first_arcs = Vec::new();
    let mut last_arcs = Vec::new();
    for m in 0..steps {
        let d = match normal_difference(&base.records[m].curve, &moved.records[m].curve) {
            Ok(d) => d,
            Err(_) => break,
        };
        amps.push(mode_amplitude(&d, mode_k));
        let arcs = arc_norms(&d);
        if m == 0 {
            first_arcs = arcs;
        } else {
            last_arcs = arcs;
        }
    }
    let ratios: Vec<f64> = amps.windows(2).map(|w| w[1] / w[0]).collect();
    let m = ratios.len().max(1) as f64;
    let mean_ratio = if ratios.is_empty() {
        f64::NAN
    } else {
        (amps[amps.len() - 1] / amps[0]).powf(1.0 / m)
    };
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let arc_growth = first_arcs
        .iter()
        .zip(&last_arcs)
        .map(|(a, b)| (b / a).powf(1.0 / m))
        .collect();
    Ok(ModeGrowth {
        k: mode_k,
        ratios,
        mean_ratio,
        max_ratio,
        exponent: mean_ratio.ln() / dt,
        arc_growth,
        diverged: diverged || !mean_ratio.is_finite(),
    })
}

/// [`stability_probe`] over several frequencies, in parallel.
pub fn stability_sweep(c0: &Curve, cfg: &FlowConfig, modes: &[usize], eps: Option<f64>) -> Result<AmplificationReport> {
    let results: Vec<ModeGrowth> = modes
        .par_iter()
        .map(|&k| stability_probe(c0, cfg, k, eps))
        .collect::<Result<_>>()?;
    let increasing_with_k = results.windows(2).all(|w| w[1].mean_ratio > w[0].mean_ratio);
    let max_ratio = results.iter().map(|r| r.max_ratio).fold(f64::NEG_INFINITY, f64::max);
    let dt = match cfg.time_step {
        TimeStep::Fixed { dt } => dt,
        TimeStep::Adaptive { dt_max } => dt_max,
    };
    Ok(AmplificationReport {
        energy: cfg.energy.name(),
        metric: cfg.metric.clone(),
        dt,
        steps: cfg.steps,
        eps: eps.unwrap_or(1e-3 * c0.length()),
        modes: results,
        increasing_with_k,
        max_ratio,
    })
}
