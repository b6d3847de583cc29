use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use curveflow::energies::{evaluate, grad_h0, metric_gradient};
use curveflow::flows::{run_flow, FlowConfig, TimeStep};
use curveflow::inequalities::{all_passed, check_all, CheckConfig};
use curveflow::io::{self as cio, CurveFile};
use curveflow::metrics::{inner, norm, MetricSpec};
use curveflow::paths::{
    dinf_report, frechet_coupling, geodesic_distance, length_lipschitz_check, GeodesicOptions,
    Orientation,
};
use curveflow::smoothing::{
    fourier_smoothing_homotopy, h1_smoothing_path, Decay, SmoothingSchedule,
};
use curveflow::spectral::resample_smooth;
use curveflow::{random, shapes, Curve, DeformationField, Error};
use serde::Serialize;
use serde_json::{json, Value};

use super::*;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed inputs.
    Usage(String),
    /// The computation ran and failed.
    Failure { kind: String, message: String },
}

impl CliError {
    fn failure(kind: &str, message: impl Into<String>) -> Self {
        CliError::Failure {
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn report(self) -> ExitCode {
        match self {
            CliError::Usage(msg) => {
                eprintln!("error: {msg}\n\nFor more information, try '--help'.");
                ExitCode::from(2)
            }
            CliError::Failure { kind, message } => {
                eprintln!("{}", json!({ "error": kind, "message": message }));
                ExitCode::from(1)
            }
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::TooFewSamples { .. }
            | Error::DimensionMismatch(_)
            | Error::AmbientDimension(_)
            | Error::OddSampleCount(_)
            | Error::PlanarOnly(_)
            | Error::InvalidParameter(_)
            | Error::OpenCurve
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => CliError::Usage(e.to_string()),
            other => CliError::failure("numerical", other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// What was run, written next to every result.
#[derive(Debug, Serialize)]
struct RunConfig {
    command: &'static str,
    inputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<MetricSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy: Option<String>,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

fn check_resolution(n: usize) -> Result<()> {
    if n < 8 || n % 2 == 1 {
        return Err(CliError::Usage(format!("--n must be even and at least 8, got {n}")));
    }
    Ok(())
}

fn load(path: &Path, n: Option<usize>) -> Result<Curve> {
    let c = cio::read_curve(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    match n {
        Some(n) => {
            check_resolution(n)?;
            Ok(resample_smooth(&c, n)?)
        }
        None => Ok(c),
    }
}

/// Loads two curves; the second is resampled to the first's sample count
/// when they differ.
fn load_pair(a: &Path, b: &Path, n: Option<usize>) -> Result<(Curve, Curve)> {
    let c0 = load(a, n)?;
    let mut c1 = load(b, n)?;
    if c1.samples() != c0.samples() {
        c1 = resample_smooth(&c1, c0.samples())?;
    }
    Ok((c0, c1))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn write_rows(path: &Path, rows: &[Curve]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for c in rows {
        serde_json::to_writer(&mut w, &CurveFile::from_curve(c))?;
        writeln!(w)?;
    }
    Ok(())
}

fn field_rows(h: &DeformationField) -> Vec<Vec<f64>> {
    h.vectors().outer_iter().map(|r| r.to_vec()).collect()
}

pub fn gen(a: GenArgs) -> Result<()> {
    check_resolution(a.n)?;
    let c = match a.shape {
        Shape::Random => random::smooth_curve(&mut random::seeded(a.seed), a.n, a.modes)?,
        s => {
            let name = serde_json::to_value(s)?;
            shapes::by_name(name.as_str().unwrap_or_default(), a.n, a.size)?
        }
    };
    let c = match &a.center {
        Some(v) => c.translated(v)?,
        None => c,
    };
    let summary = format!(
        "# gen shape={:?} n={} size={} length={:.10}",
        a.shape,
        c.samples(),
        a.size,
        c.length()
    );
    match &a.out {
        Some(path) => {
            cio::write_curve(path, &c)?;
            println!("{summary}");
            println!("wrote {}", path.display());
        }
        None => {
            println!("{}", cio::curve_to_json_string(&c)?);
            eprintln!("{summary}");
        }
    }
    Ok(())
}

pub fn dist(a: DistArgs) -> Result<()> {
    let (c0, c1) = load_pair(&a.first, &a.second, a.n)?;
    let spec = a.metric.spec();
    let opts = GeodesicOptions {
        k: a.k_rows,
        max_iter: a.max_iter,
        tol: a.tol,
        band: a.band,
        shift_candidates: a.shifts,
        allow_reversal: a.allow_reversal,
        seed: a.seed,
        jitter: a.jitter,
    };
    let r = geodesic_distance(&c0, &c1, &spec, &opts)?;
    let orientation = if a.allow_reversal { Orientation::Both } else { Orientation::Preserving };
    let frechet = frechet_coupling(&c0, &c1, orientation)?.distance;
    let lipschitz = match spec {
        MetricSpec::Hj { j: 1, .. } | MetricSpec::HjTilde { j: 1, .. } => {
            Some(length_lipschitz_check(&r.homotopy, &spec, 1e-6)?)
        }
        _ => None,
    };
    println!("# dist {} k={} n={}", a.metric.header(), a.k_rows, c0.samples());
    println!("distance {:.10}", r.distance);
    println!("linear_length {:.10}", r.linear_length);
    println!("frechet {:.10}", frechet);
    println!("iterations {} converged {}", r.iterations, r.converged);
    if let Some(l) = &lipschitz {
        println!("length_lipschitz margin {:.3e} holds {}", l.margin, l.holds);
    }
    if let Some(path) = &a.path_out {
        write_rows(path, r.homotopy.rows())?;
    }
    if let Some(path) = &a.report {
        let report = json!({
            "run": RunConfig {
                command: "dist",
                inputs: vec![a.first.clone(), a.second.clone()],
                metric: Some(spec.clone()),
                energy: None,
                n: c0.samples(),
                seed: Some(a.seed),
                out: Some(path.clone()),
            },
            "options": opts,
            "j": a.metric.j,
            "lambda": a.metric.lambda,
            "distance": r.distance,
            "action": r.action,
            "linear_length": r.linear_length,
            "frechet": frechet,
            "frechet_margin": r.distance - frechet / 2f64.sqrt(),
            "shift": r.shift,
            "reversed": r.reversed,
            "iterations": r.iterations,
            "converged": r.converged,
            "history": r.history,
            "lipschitz": lipschitz,
        });
        write_json(path, &report)?;
    }
    Ok(())
}

pub fn frechet(a: FrechetArgs) -> Result<()> {
    let (c0, c1) = load_pair(&a.first, &a.second, a.n)?;
    let orientation = if a.both { Orientation::Both } else { Orientation::Preserving };
    let cp = frechet_coupling(&c0, &c1, orientation)?;
    let dinf = if a.dinf {
        Some(dinf_report(&c0, &c1, orientation, 16)?)
    } else {
        None
    };
    println!(
        "# frechet orientation={} n={}",
        if a.both { "both" } else { "preserving" },
        c0.samples()
    );
    println!("distance {:.10}", cp.distance);
    println!("shift {} reversed {}", cp.shift, cp.reversed);
    if let Some(d) = &dinf {
        println!("dinf {:.10}", d.distance);
    }
    if let Some(path) = &a.report {
        let report = json!({
            "run": RunConfig {
                command: "frechet",
                inputs: vec![a.first.clone(), a.second.clone()],
                metric: None,
                energy: None,
                n: c0.samples(),
                seed: None,
                out: Some(path.clone()),
            },
            "orientation": orientation,
            "distance": cp.distance,
            "coupling": cp,
            "dinf": dinf,
        });
        write_json(path, &report)?;
    }
    Ok(())
}

pub fn flow(a: FlowArgs) -> Result<()> {
    let c = load(&a.curve, a.n)?;
    let kind = a.energy.kind(c.dim());
    let spec = a.metric.spec();
    let conformal = match a.conformal {
        Toggle::Auto => a.metric.metric == MetricKind::H0,
        Toggle::On => true,
        Toggle::Off => false,
    };
    let time_step = if a.fixed {
        TimeStep::Fixed { dt: a.dt }
    } else {
        TimeStep::Adaptive { dt_max: a.dt }
    };
    let mut cfg = FlowConfig::new(kind.clone(), spec.clone(), time_step, a.steps);
    cfg.conformal = conformal;
    cfg.project_normal = a.normal;
    cfg.resample_every = a.resample_every;
    cfg.until = a.until;
    let tr = run_flow(&c, &cfg)?;

    fs::create_dir_all(&a.out)?;
    let mut w = csv::Writer::from_path(a.out.join("flow.csv"))?;
    w.write_record(["step", "t", "length", "energy", "step_norm"])?;
    for r in &tr.records {
        w.serialize((r.step, r.time, r.length, r.energy, r.step_norm))?;
    }
    w.flush()?;
    let mut jl = BufWriter::new(File::create(a.out.join("trajectory.jsonl"))?);
    for r in &tr.records {
        let line = json!({
            "step": r.step,
            "t": r.time,
            "dt": r.dt,
            "length": r.length,
            "energy": r.energy,
            "step_norm": r.step_norm,
            "points": r.curve.to_rows(),
        });
        serde_json::to_writer(&mut jl, &line)?;
        writeln!(jl)?;
    }
    jl.flush()?;
    let last = tr.last();
    cio::write_curve_json(a.out.join("final.json"), &last.curve)?;
    write_json(
        &a.out.join("run.json"),
        &json!({
            "run": RunConfig {
                command: "flow",
                inputs: vec![a.curve.clone()],
                metric: Some(spec),
                energy: Some(kind.name()),
                n: c.samples(),
                seed: None,
                out: Some(a.out.clone()),
            },
            "time_step": time_step,
            "conformal": conformal,
            "project_normal": a.normal,
            "resample_every": a.resample_every,
            "until": a.until,
            "steps_taken": last.step,
            "failure": tr.failure,
        }),
    )?;

    println!(
        "# flow energy={} {} conformal={} n={}",
        kind.name(),
        a.metric.header(),
        conformal,
        c.samples()
    );
    println!(
        "steps {} t {:.6e} length {:.10} energy {:.10}",
        last.step, last.time, last.length, last.energy
    );
    println!("wrote {}", a.out.join("flow.csv").display());
    match tr.failure {
        Some(msg) => Err(CliError::failure("flow_failed", msg)),
        None => Ok(()),
    }
}

pub fn grad(a: GradArgs) -> Result<()> {
    let c = load(&a.curve, a.n)?;
    let kind = a.energy.kind(c.dim());
    let spec = a.metric.spec();
    let value = evaluate(&kind, &c)?;
    let g0 = grad_h0(&kind, &c)?;
    let g = metric_gradient(&kind, &c, &spec)?;
    // Both gradients represent the same differential: test on h = grad_h0.
    let lhs = inner(&spec, &c, &g, &g0)?;
    let rhs = inner(&MetricSpec::H0, &c, &g0, &g0)?;
    let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    let report = json!({
        "run": RunConfig {
            command: "grad",
            inputs: vec![a.curve.clone()],
            metric: Some(spec.clone()),
            energy: Some(kind.name()),
            n: c.samples(),
            seed: None,
            out: a.out.clone(),
        },
        "j": a.metric.j,
        "lambda": a.metric.lambda,
        "value": value,
        "h0_norm": norm(&MetricSpec::H0, &c, &g0)?,
        "metric_norm": norm(&spec, &c, &g)?,
        "duality": { "metric_pairing": lhs, "h0_pairing": rhs, "rel_err": rel },
        "grad_h0": field_rows(&g0),
        "gradient": field_rows(&g),
    });
    let summary = format!(
        "# grad energy={} {} n={}\nvalue {:.10}\nduality_rel_err {:.3e}",
        kind.name(),
        a.metric.header(),
        c.samples(),
        value,
        rel
    );
    match &a.out {
        Some(path) => {
            write_json(path, &report)?;
            println!("{summary}");
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            eprintln!("{summary}");
        }
    }
    Ok(())
}

pub fn smooth(a: SmoothArgs) -> Result<()> {
    let c = load(&a.curve, a.n)?;
    fs::create_dir_all(&a.out)?;
    let run = RunConfig {
        command: "smooth",
        inputs: vec![a.curve.clone()],
        metric: Some(MetricSpec::hj(if matches!(a.method, SmoothMethod::Direction) { 1 } else { 2 }, a.lambda)),
        energy: None,
        n: c.samples(),
        seed: None,
        out: Some(a.out.clone()),
    };
    match a.method {
        SmoothMethod::Direction => {
            let r = h1_smoothing_path(&c, a.cutoff, a.k_rows, a.lambda)?;
            cio::write_curve_json(a.out.join("smooth.json"), r.homotopy.last())?;
            write_rows(&a.out.join("path.jsonl"), r.homotopy.rows())?;
            write_json(
                &a.out.join("summary.json"),
                &json!({
                    "run": run,
                    "method": "direction",
                    "j": 1,
                    "lambda": a.lambda,
                    "cutoff": a.cutoff,
                    "k": a.k_rows,
                    "action": r.action,
                    "length": r.length,
                    "max_defect": r.max_defect,
                    "rotation_index": r.smooth.rotation_index(),
                }),
            )?;
            println!("# smooth method=direction j=1 lambda={} cutoff={} k={}", a.lambda, a.cutoff, a.k_rows);
            println!("action {:.10e} length {:.10e} max_defect {:.3e}", r.action, r.length, r.max_defect);
        }
        SmoothMethod::Fourier => {
            let decay = match a.decay {
                DecayName::Abs => Decay::Abs,
                DecayName::Log2 => Decay::LogSquared,
            };
            let sched = SmoothingSchedule::new(decay, a.schedule.clone());
            let fs = fourier_smoothing_homotopy(&c, &sched, a.lambda)?;
            let mut w = csv::Writer::from_path(a.out.join("delta.csv"))?;
            w.write_record(["t", "delta", "tail_mass"])?;
            let mut steps = Vec::new();
            for (i, s) in fs.steps.iter().enumerate() {
                w.serialize((s.t, s.delta, s.tail_ratio))?;
                cio::write_curve_json(a.out.join(format!("curve_{i}.json")), &s.curve)?;
                steps.push(json!({
                    "t": s.t,
                    "delta": s.delta,
                    "min_speed": s.min_speed,
                    "max_speed": s.max_speed,
                    "tail_mass": s.tail_ratio,
                    "curve": format!("curve_{i}.json"),
                }));
            }
            w.flush()?;
            write_json(
                &a.out.join("summary.json"),
                &json!({
                    "run": run,
                    "method": "fourier",
                    "j": 2,
                    "lambda": a.lambda,
                    "schedule": sched,
                    "elastic_energy": fs.elastic_energy,
                    "warning": fs.warning,
                    "steps": steps,
                }),
            )?;
            println!("# smooth method=fourier j=2 lambda={} decay={:?}", a.lambda, a.decay);
            for s in &fs.steps {
                println!("t {:.6e} delta {:.10e}", s.t, s.delta);
            }
            if let Some(w) = &fs.warning {
                eprintln!("warning: {w}");
            }
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn verify(a: VerifyArgs) -> Result<()> {
    check_resolution(a.n)?;
    let cfg = CheckConfig {
        seed: a.seed,
        draws: a.draws,
        sandwich_draws: a.sandwich_draws,
        n: a.n,
        slack: a.slack,
    };
    let reports = check_all(&cfg)?;
    let passed = all_passed(&reports);
    let doc: Value = json!({ "config": cfg, "passed": passed, "reports": reports });
    let mut lines = vec![format!("# verify seed={} n={} slack={:e}", a.seed, a.n, a.slack)];
    for r in &reports {
        lines.push(format!(
            "[{}] {} samples={} worst_margin={:.3e} violations={}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.samples,
            r.worst_margin,
            r.violations
        ));
    }
    match &a.out {
        Some(path) => {
            write_json(path, &doc)?;
            lines.iter().for_each(|l| println!("{l}"));
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&doc)?);
            lines.iter().for_each(|l| eprintln!("{l}"));
        }
    }
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
        Err(CliError::failure("verification_failed", failed.join(",")))
    }
}
