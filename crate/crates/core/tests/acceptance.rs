//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails or exceeds its time limit.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use curveflow::energies::{finite_difference, grad_h0, grad_sobolev, EnergyKind, GFunction};
use curveflow::flows::{run_flow, stability_sweep, FlowConfig, TimeStep};
use curveflow::inequalities::{
    check_linf_bound, check_poincare_l2, check_poincare_sup, CheckConfig,
};
use curveflow::metrics::{equivalence_bounds, inner, norm, MetricSpec};
use curveflow::paths::{
    dinf_report, frechet_distance, geodesic_distance, length_lipschitz_check, GeodesicOptions,
    Homotopy, Orientation, PathResult,
};
use curveflow::smoothing::{
    direction_function, elastic_lipschitz_check, fourier_smoothing_homotopy, h1_smoothing_path,
    project_closure, truncate_direction, Decay, SmoothingSchedule,
};
use curveflow::{random, shapes, Curve};
use rayon::prelude::*;

type Outcome = Result<(bool, String), String>;

struct Harness {
    failures: usize,
}

impl Harness {
    fn run(&mut self, id: usize, name: &str, tol: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let over = limit.is_some_and(|l| took > l);
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && !over, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            self.failures += 1;
        }
        let limit = limit.map_or("none".to_string(), |l| format!("{}s", l.as_secs()));
        println!(
            "[{}] {id:>2} {name}: {detail} (tol {tol}; {:.2}s, limit {limit}{})",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            if over { ", TIME EXCEEDED" } else { "" }
        );
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn norm_sandwich() -> Outcome {
    let n = 256;
    let curves: Vec<Curve> = (0..100)
        .into_par_iter()
        .map(|i| random::smooth_curve(&mut random::seeded(10_000 + i), n, 6))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let cases = [(1u32, 0.25), (1, 1.0), (2, 0.25), (2, 1.0)];
    let margins: Vec<(f64, f64)> = (0..10_000usize)
        .into_par_iter()
        .map(|i| {
            let mut rng = random::seeded(20_000 + i as u64);
            let c = &curves[i % curves.len()];
            let h = random::field(&mut rng, c);
            let (j, lambda) = cases[i % cases.len()];
            let full = norm(&MetricSpec::hj(j, lambda), c, &h)?;
            let tilde = norm(&MetricSpec::hj_tilde(j, lambda), c, &h)?;
            let (_, upper) = equivalence_bounds(j, lambda)?;
            Ok(((full - tilde) / full, (upper * tilde - full) / full))
        })
        .collect::<curveflow::Result<_>>()
        .map_err(err)?;
    let lo = margins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
    let hi = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    Ok((
        lo >= -1e-8 && hi >= -1e-8,
        format!("10000 pairs, worst lower margin {lo:.2e}, worst upper margin {hi:.2e}"),
    ))
}

fn poincare_constants() -> Outcome {
    let cfg = CheckConfig::default();
    let l2 = check_poincare_l2(&cfg, 1, 1000).map_err(err)?;
    let l2b = check_poincare_l2(&cfg, 2, 1000).map_err(err)?;
    let sup = check_poincare_sup(&cfg, 1000).map_err(err)?;
    let sine = l2.details["sine_i0_rel_err"];
    let ratio = sup.details["ratio_eps_0.01"];
    let random_ok = l2.violations + l2b.violations + sup.violations == 0;
    Ok((
        sine <= 1e-8 && ratio >= 0.45 && random_ok && l2.passed && l2b.passed && sup.passed,
        format!(
            "sine equality rel err {sine:.1e}, two-step ratio {ratio:.4} at eps=L/100, random violations {}",
            l2.violations + l2b.violations + sup.violations
        ),
    ))
}

fn energies() -> Vec<EnergyKind> {
    vec![
        EnergyKind::Length,
        EnergyKind::Elastic,
        EnergyKind::CenterOfMass { target: vec![0.3, -0.2] },
        EnergyKind::StdDev,
        EnergyKind::AvgG(
            GFunction::Gaussian {
                center: vec![0.2, 0.1],
                width: 0.8,
            }
            .build(),
        ),
    ]
}

fn gradients() -> Outcome {
    let mut rng = random::seeded(303);
    let c = random::smooth_curve(&mut rng, 128, 5).map_err(err)?;
    let specs = [MetricSpec::hj(1, 1.0), MetricSpec::hj(1, 0.1), MetricSpec::hj_tilde(1, 1.0)];
    let mut worst_fd: f64 = 0.0;
    let mut worst_dual: f64 = 0.0;
    for kind in energies() {
        let g0 = grad_h0(&kind, &c).map_err(err)?;
        let gs: Vec<_> = specs
            .iter()
            .map(|s| grad_sobolev(&kind, &c, s))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        for _ in 0..20 {
            let h = random::smooth_field(&mut rng, &c, 8, 1.0);
            let fd = finite_difference(&kind, &c, &h, 1e-5).map_err(err)?;
            let an = inner(&MetricSpec::H0, &c, &g0, &h).map_err(err)?;
            worst_fd = worst_fd.max((fd - an).abs() / fd.abs().max(1e-3));
            let k = random::field(&mut rng, &c);
            let rhs = inner(&MetricSpec::H0, &c, &g0, &k).map_err(err)?;
            for (s, g) in specs.iter().zip(&gs) {
                let lhs = inner(s, &c, g, &k).map_err(err)?;
                worst_dual = worst_dual.max((lhs - rhs).abs() / rhs.abs().max(1.0));
            }
        }
    }
    Ok((
        worst_fd < 1e-4 && worst_dual < 1e-8,
        format!("5 energies x 20 directions at N=128: fd rel err {worst_fd:.2e}, duality rel err {worst_dual:.2e}"),
    ))
}

fn heat_flow() -> Outcome {
    let c = shapes::circle(256, 1.0).map_err(err)?;
    let mut cfg = FlowConfig::new(EnergyKind::Length, MetricSpec::H0, TimeStep::Adaptive { dt_max: 1e-3 }, 1_000_000);
    cfg.conformal = true;
    cfg.until = Some(0.25);
    let tr = run_flow(&c, &cfg).map_err(err)?;
    let worst = tr
        .records
        .iter()
        .map(|r| (r.length / (2.0 * PI) / (1.0 - 2.0 * r.time).sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    let end = tr.last().time;
    Ok((
        tr.completed() && (end - 0.25).abs() < 1e-12 && worst < 0.01,
        format!("{} steps to t={end}, worst radius rel err {worst:.2e}", tr.records.len() - 1),
    ))
}

fn ill_posedness() -> Outcome {
    let c = shapes::circle(256, 1.0).map_err(err)?;
    let energy = EnergyKind::CenterOfMass { target: vec![3.0, 0.0] };
    let modes = [4, 8, 16, 32];
    let h0 = FlowConfig::new(energy.clone(), MetricSpec::H0, TimeStep::Fixed { dt: 5e-5 }, 5);
    let r0 = stability_sweep(&c, &h0, &modes, None).map_err(err)?;
    let h1 = FlowConfig::new(energy, MetricSpec::hj(1, 1.0), TimeStep::Fixed { dt: 1e-3 }, 5);
    let r1 = stability_sweep(&c, &h1, &modes, None).map_err(err)?;
    let growth: Vec<String> = r0.modes.iter().map(|m| format!("{:.4}", m.mean_ratio)).collect();
    Ok((
        r0.increasing_with_k && r1.max_ratio <= 1.05,
        format!(
            "H0 ratios k=4,8,16,32: [{}], H1 max ratio {:.4}",
            growth.join(", "),
            r1.max_ratio
        ),
    ))
}

fn random_pair(seed: u64, n: usize) -> curveflow::Result<(Curve, Curve)> {
    let mut rng = random::seeded(seed);
    Ok((random::smooth_curve(&mut rng, n, 5)?, random::smooth_curve(&mut rng, n, 5)?))
}

fn frechet_vs_dinf() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let (a, b) = random_pair(600 + i, 256).map_err(err)?;
        let df = frechet_distance(&a, &b, Orientation::Preserving).map_err(err)?;
        let di = dinf_report(&a, &b, Orientation::Preserving, 16).map_err(err)?.distance;
        worst = worst.max((df - di).abs() / df);
    }
    Ok((worst <= 0.02, format!("20 pairs at N=256, worst |d_f - d_inf|/d_f = {worst:.2e}")))
}

/// Geodesic estimates at N = 64 shared by criteria 7 and 8.
fn geodesics() -> curveflow::Result<Vec<(Curve, Curve, PathResult)>> {
    let spec = MetricSpec::hj_tilde(1, 0.25);
    let opts = GeodesicOptions {
        k: 8,
        max_iter: 8,
        band: 2,
        shift_candidates: 1,
        ..GeodesicOptions::default()
    };
    let mut pairs = vec![(shapes::circle(64, 1.0)?, shapes::circle(64, 2.0)?)];
    for i in 0..3 {
        pairs.push(random_pair(700 + i, 64)?);
    }
    pairs
        .into_iter()
        .map(|(a, b)| {
            let r = geodesic_distance(&a, &b, &spec, &opts)?;
            Ok((a, b, r))
        })
        .collect()
}

fn linf_domination(paths: &[(Curve, Curve, PathResult)]) -> Outcome {
    let cfg = CheckConfig {
        slack: 1e-9,
        ..CheckConfig::default()
    };
    let rep = check_linf_bound(&cfg, 1000).map_err(err)?;
    let mut worst = f64::INFINITY;
    for (a, b, r) in paths {
        let df = frechet_distance(a, b, Orientation::Preserving).map_err(err)?;
        worst = worst.min(r.distance - df / 2f64.sqrt());
    }
    Ok((
        rep.passed && worst >= -1e-3,
        format!(
            "1000 pairs worst margin {:.2e} ({} violations); {} geodesics, worst d - d_f/sqrt2 = {worst:.4}",
            rep.worst_margin,
            rep.violations,
            paths.len()
        ),
    ))
}

fn length_lipschitz(paths: &[(Curve, Curve, PathResult)]) -> Outcome {
    let spec = MetricSpec::hj_tilde(1, 0.25);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..100u64 {
        let mut rng = random::seeded(5000 + seed);
        let a = random::smooth_curve(&mut rng, 64, 4).map_err(err)?;
        let b = random::smooth_curve(&mut rng, 64, 4).map_err(err)?;
        let bump = random::smooth_field(&mut rng, &a, 4, 0.2);
        let h = Homotopy::from_fn(4, |v| {
            Curve::new(a.points() * (1.0 - v) + b.points() * v + bump.vectors() * (PI * v).sin())
        })
        .map_err(err)?;
        for s in [MetricSpec::hj(1, 1.0), spec.clone()] {
            let r = length_lipschitz_check(&h, &s, 1e-6).map_err(err)?;
            worst = worst.min(r.margin);
            failures += usize::from(!r.holds);
        }
    }
    for (_, _, p) in paths {
        let r = length_lipschitz_check(&p.homotopy, &spec, 1e-6).map_err(err)?;
        worst = worst.min(r.margin);
        failures += usize::from(!r.holds);
    }
    Ok((
        failures == 0,
        format!(
            "100 random homotopies x 2 metrics + {} optimizer paths, {failures} failures, worst margin {worst:.3e}",
            paths.len()
        ),
    ))
}

fn h2_smoothing() -> Outcome {
    let c = shapes::rounded_square(256, 1.0, 0.5).map_err(err)?;
    let sched = SmoothingSchedule::new(Decay::Abs, vec![0.1, 0.05, 0.02, 0.01]);
    let fs = fourier_smoothing_homotopy(&c, &sched, 1.0).map_err(err)?;
    let d: Vec<f64> = fs.steps.iter().map(|s| s.delta).collect();
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let ratio = d[3] / d[0];
    let lo = fs.steps.iter().map(|s| s.min_speed).fold(f64::INFINITY, f64::min);
    let hi = fs.steps.iter().map(|s| s.max_speed).fold(0.0, f64::max);
    Ok((
        decreasing && ratio < 0.05 && lo >= 0.5 && hi <= 1.5,
        format!("delta(0.01)/delta(0.1) = {ratio:.4}, strictly decreasing {decreasing}, speeds in [{lo:.4}, {hi:.4}]"),
    ))
}

fn elastic_locality() -> Outcome {
    let c0 = shapes::circle(64, 1.0).map_err(err)?;
    let spec = MetricSpec::hj(2, 0.01);
    let opts = GeodesicOptions {
        k: 4,
        max_iter: 5,
        band: 2,
        shift_candidates: 1,
        ..GeodesicOptions::default()
    };
    let mut ratios = Vec::new();
    let mut worst_closed: f64 = 0.0;
    let mut inside = true;
    for eps in [0.1, 0.05, 0.01] {
        let c1 = shapes::circle(64, 1.0 + eps).map_err(err)?;
        let r = elastic_lipschitz_check(&c0, &c1, &spec, &opts).map_err(err)?;
        let exact = 2.0 * PI * (1.0 - 1.0 / (1.0 + eps));
        worst_closed = worst_closed.max(rel(r.delta_energy, exact));
        inside &= r.within_neighborhood;
        ratios.push(r.ratio.ok_or("zero distance")?);
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((
        max / min <= 3.0 && worst_closed <= 0.02 && inside,
        format!(
            "ratios {:.3}/{:.3}/{:.3}, max/min {:.3}, closed-form dE rel err {worst_closed:.2e}",
            ratios[0],
            ratios[1],
            ratios[2],
            max / min
        ),
    ))
}

fn direction_pipeline() -> Outcome {
    let mut round_trip: f64 = 0.0;
    let mut rng = random::seeded(1100);
    for _ in 0..5 {
        let c = random::smooth_curve(&mut rng, 256, 5).map_err(err)?;
        let back = direction_function(&c).and_then(|f| f.reconstruct()).map_err(err)?;
        let e = (c.points() - back.points()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        round_trip = round_trip.max(e);
    }
    let square = shapes::rounded_square(256, 1.0, 0.5).map_err(err)?;
    let f = direction_function(&square).map_err(err)?;
    let mut defect: f64 = 0.0;
    let mut actions = Vec::new();
    for cutoff in [8, 16, 32, 64] {
        defect = defect.max(project_closure(&truncate_direction(&f, cutoff)).map_err(err)?.closure_defect());
        actions.push(h1_smoothing_path(&square, cutoff, 16, 1.0).map_err(err)?.action);
    }
    let decreasing = actions.windows(2).all(|w| w[1] < w[0]);
    Ok((
        round_trip < 1e-6 && defect < 1e-10 && decreasing,
        format!(
            "round trip {round_trip:.1e}, projection defect {defect:.1e}, actions over cutoffs 8/16/32/64: {:.3e} {:.3e} {:.3e} {:.3e}",
            actions[0], actions[1], actions[2], actions[3]
        ),
    ))
}

fn main() -> ExitCode {
    let mut h = Harness { failures: 0 };
    h.run(1, "norm sandwich", "1e-8", secs(30), norm_sandwich);
    h.run(2, "Poincare optimal constants", "1e-8 / ratio >= 0.45", secs(10), poincare_constants);
    h.run(3, "gradient correctness", "fd 1e-4, duality 1e-8", secs(60), gradients);
    h.run(4, "heat-flow oracle", "1%", secs(10), heat_flow);
    h.run(5, "ill-posedness contrast", "H1 max ratio <= 1.05", secs(60), ill_posedness);
    h.run(6, "Frechet equals d_inf", "2%", secs(120), frechet_vs_dinf);

    let start = Instant::now();
    let paths = geodesics();
    println!("     (geodesic estimates for 7 and 8: {:.2}s)", start.elapsed().as_secs_f64());
    match paths {
        Ok(paths) => {
            h.run(7, "L-inf domination and Frechet lower bound", "1e-9 / 1e-3", None, || linf_domination(&paths));
            h.run(8, "length Lipschitz", "1e-6", None, || length_lipschitz(&paths));
        }
        Err(e) => {
            let msg = e.to_string();
            h.run(7, "L-inf domination and Frechet lower bound", "1e-9 / 1e-3", None, || Err(msg.clone()));
            h.run(8, "length Lipschitz", "1e-6", None, || Err(msg));
        }
    }
    h.run(9, "H2 smoothing", "ratio < 0.05, speeds in [1/2, 3/2]", secs(60), h2_smoothing);
    h.run(10, "elastic Lipschitz locality", "max/min <= 3, closed form 2%", None, elastic_locality);
    h.run(11, "direction-function pipeline", "1e-6 / 1e-10", secs(30), direction_pipeline);

    println!("{} of 11 criteria failed", h.failures);
    if h.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
