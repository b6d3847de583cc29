//! Homotopies between curves, their lengths and actions, geodesic distance
//! estimates and the Fréchet distance.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{distance, Curve, DeformationField};
use crate::error::{Error, Result};
use crate::metrics::{norm, MetricSpec};
use crate::random;

/// A discrete homotopy: rows `0..=K`, row `v` at time `v/K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Homotopy {
    rows: Vec<Curve>,
}

impl Homotopy {
    pub fn new(rows: Vec<Curve>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a homotopy needs K >= 1, got {} rows",
                rows.len()
            )));
        }
        let (n, d) = (rows[0].samples(), rows[0].dim());
        if rows.iter().any(|r| r.samples() != n || r.dim() != d) {
            return Err(Error::DimensionMismatch(
                "homotopy rows must share N and n".into(),
            ));
        }
        Ok(Self { rows })
    }

    /// `C(·, v) = (1 − v)c0 + v c1`.
    pub fn linear(c0: &Curve, c1: &Curve, k: usize) -> Result<Self> {
        check_same_shape(c0, c1)?;
        Self::from_fn(k, |v| {
            Curve::new(c0.points() * (1.0 - v) + c1.points() * v)
        })
    }

    pub fn constant(c: &Curve, k: usize) -> Result<Self> {
        Self::from_fn(k, |_| Ok(c.clone()))
    }

    /// `C(·, v) = c + v w`.
    pub fn translation(c: &Curve, w: &[f64], k: usize) -> Result<Self> {
        Self::from_fn(k, |v| {
            let shift: Vec<f64> = w.iter().map(|x| v * x).collect();
            c.translated(&shift)
        })
    }

    /// Samples `f` at `v = 0, 1/K, …, 1`.
    pub fn from_fn<F>(k: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<Curve>,
    {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        Self::new((0..=k).map(|v| f(v as f64 / k as f64)).collect::<Result<_>>()?)
    }

    pub fn k(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn samples(&self) -> usize {
        self.rows[0].samples()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn rows(&self) -> &[Curve] {
        &self.rows
    }

    pub fn row(&self, v: usize) -> &Curve {
        &self.rows[v]
    }

    pub fn first(&self) -> &Curve {
        &self.rows[0]
    }

    pub fn last(&self) -> &Curve {
        &self.rows[self.k()]
    }

    /// `C(·, v+1) − C(·, v)`.
    pub fn step(&self, v: usize) -> DeformationField {
        DeformationField::new(self.rows[v + 1].points() - self.rows[v].points())
            .expect("difference of finite rows")
    }

    /// The curve halfway between rows `v` and `v+1`.
    pub fn midpoint(&self, v: usize) -> Result<Curve> {
        Curve::new((self.rows[v].points() + self.rows[v + 1].points()) * 0.5)
    }

    /// Doubles `K` by inserting the row averages.
    pub fn refined(&self) -> Result<Self> {
        let mut rows = Vec::with_capacity(2 * self.k() + 1);
        for v in 0..self.k() {
            rows.push(self.rows[v].clone());
            rows.push(self.midpoint(v)?);
        }
        rows.push(self.last().clone());
        Self::new(rows)
    }

    /// Evaluates the piecewise-linear path at `t ∈ [0, 1]`.
    pub fn at(&self, t: f64) -> Result<Curve> {
        let k = self.k();
        let x = t.clamp(0.0, 1.0) * k as f64;
        let v = (x.floor() as usize).min(k - 1);
        let a = x - v as f64;
        if a == 0.0 {
            return Ok(self.rows[v].clone());
        }
        Curve::new(self.rows[v].points() * (1.0 - a) + self.rows[v + 1].points() * a)
    }
}

fn check_same_shape(c0: &Curve, c1: &Curve) -> Result<()> {
    if c0.samples() != c1.samples() || c0.dim() != c1.dim() {
        return Err(Error::DimensionMismatch(format!(
            "curves have shapes {}x{} and {}x{}",
            c0.samples(),
            c0.dim(),
            c1.samples(),
            c1.dim()
        )));
    }
    Ok(())
}

/// `‖b − a‖_spec` at the midpoint curve.
fn segment_norm(spec: &MetricSpec, a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    let h = DeformationField::new(b - a)?;
    if h.max_norm() == 0.0 {
        return Ok(0.0);
    }
    let mid = Curve::new((a + b) * 0.5)?;
    norm(spec, &mid, &h)
}

/// Metric speeds `‖C(·,v+1) − C(·,v)‖_spec` of every step.
pub fn step_norms(c: &Homotopy, spec: &MetricSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    (0..c.k())
        .into_par_iter()
        .map(|v| segment_norm(spec, c.rows[v].points(), c.rows[v + 1].points()))
        .collect()
}

/// `Σ_v ‖C(·,v+1) − C(·,v)‖_spec`, each step measured at its midpoint curve.
pub fn path_length(c: &Homotopy, spec: &MetricSpec) -> Result<f64> {
    Ok(step_norms(c, spec)?.iter().sum())
}

/// `Σ_v K ‖C(·,v+1) − C(·,v)‖²_spec`.
pub fn path_action(c: &Homotopy, spec: &MetricSpec) -> Result<f64> {
    let k = c.k() as f64;
    Ok(step_norms(c, spec)?.iter().map(|s| k * s * s).sum())
}

/// Moves the rows along the piecewise-linear path so that all steps have
/// the same metric speed. Iterates until the relative speed spread is below
/// `tol` or `max_iter` rounds are used.
pub fn constant_speed(
    c: &Homotopy,
    spec: &MetricSpec,
    tol: f64,
    max_iter: usize,
) -> Result<Homotopy> {
    let k = c.k();
    let mut t: Vec<f64> = (0..=k).map(|v| v as f64 / k as f64).collect();
    let mut current = c.clone();
    for _ in 0..max_iter {
        let speeds = step_norms(&current, spec)?;
        let total: f64 = speeds.iter().sum();
        if total == 0.0 {
            break;
        }
        let mean = total / k as f64;
        let spread = speeds.iter().fold(0.0f64, |m, s| m.max((s - mean).abs())) / mean;
        if spread <= tol {
            break;
        }
        // Invert the cumulative length, linear in t on each step.
        let mut cum = vec![0.0; k + 1];
        for v in 0..k {
            cum[v + 1] = cum[v] + speeds[v];
        }
        let mut next = t.clone();
        let mut seg = 0;
        for (v, nt) in next.iter_mut().enumerate().take(k).skip(1) {
            let target = total * v as f64 / k as f64;
            while cum[seg + 1] < target {
                seg += 1;
            }
            let a = if speeds[seg] > 0.0 {
                (target - cum[seg]) / speeds[seg]
            } else {
                0.0
            };
            *nt = t[seg] + a * (t[seg + 1] - t[seg]);
        }
        t = next;
        current = Homotopy::new(t.iter().map(|tv| c.at(*tv)).collect::<Result<_>>()?)?;
    }
    Ok(current)
}

/// Options for [`geodesic_distance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicOptions {
    /// Number of steps `K`.
    pub k: usize,
    pub max_iter: usize,
    /// Stop when one iteration lowers the action by less than this fraction.
    pub tol: f64,
    /// Interior rows move within Fourier modes `0..=band` per coordinate.
    pub band: usize,
    /// Number of best-aligned cyclic shifts of `c1` that are optimized.
    pub shift_candidates: usize,
    /// Also try the reversed target (quotient by all diffeomorphisms).
    pub allow_reversal: bool,
    pub seed: u64,
    /// Amplitude of a seeded random perturbation of the initial interior rows,
    /// relative to the length of `c0`.
    pub jitter: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            k: 16,
            max_iter: 40,
            tol: 1e-6,
            band: 3,
            shift_candidates: 3,
            allow_reversal: false,
            seed: 0,
            jitter: 0.0,
        }
    }
}

/// Outcome of [`geodesic_distance`].
#[derive(Debug, Clone)]
pub struct PathResult {
    /// Path length of `homotopy`: an upper bound on the geometric distance.
    pub distance: f64,
    pub action: f64,
    pub homotopy: Homotopy,
    /// Action after every accepted iteration, starting with the initial path.
    pub history: Vec<f64>,
    /// Length of the initial linear path for the chosen alignment.
    pub linear_length: f64,
    /// The target is `c1` reversed (if `reversed`) and then shifted by `shift`.
    pub shift: usize,
    pub reversed: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Aligned copy of the target: reversed first, then cyclically shifted.
pub fn aligned_target(c1: &Curve, shift: usize, reversed: bool) -> Curve {
    if reversed {
        c1.reversed().shifted(shift)
    } else {
        c1.shifted(shift)
    }
}

/// `(shift, reversed)` pairs ranked by `Σ_i |c1(i+s) − c0(i)|²`, ties by the
/// smaller shift.
fn ranked_alignments(c0: &Curve, c1: &Curve, allow_reversal: bool) -> Vec<(usize, bool, f64)> {
    let n = c0.samples();
    let mut out = Vec::new();
    for reversed in [false, true] {
        if reversed && !allow_reversal {
            continue;
        }
        let target = if reversed { c1.reversed() } else { c1.clone() };
        for s in 0..n {
            let cost: f64 = (0..n)
                .map(|i| distance(c0.point(i), target.point((i + s) % n)).powi(2))
                .sum();
            out.push((s, reversed, cost));
        }
    }
    out.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
    out
}

/// Estimates the geometric distance between `c0` and `c1` by minimizing the
/// discrete action over the interior rows of a homotopy, for the best-aligned
/// cyclic shifts of `c1`.
///
/// The interior rows move in a basis of low Fourier modes; the action gradient
/// in that basis is taken by central differences. Steps are accepted by
/// backtracking, so the action history never increases. The returned distance
/// is the smaller of the optimized and the initial path lengths.
pub fn geodesic_distance(
    c0: &Curve,
    c1: &Curve,
    spec: &MetricSpec,
    opts: &GeodesicOptions,
) -> Result<PathResult> {
    check_same_shape(c0, c1)?;
    spec.validate()?;
    if opts.k == 0 || opts.shift_candidates == 0 || opts.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "k, shift_candidates and max_iter must be positive".into(),
        ));
    }
    let ranked = ranked_alignments(c0, c1, opts.allow_reversal);
    let results: Vec<Result<PathResult>> = ranked
        .into_iter()
        .take(opts.shift_candidates)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(s, rev, _)| optimize_path(c0, &aligned_target(c1, s, rev), s, rev, spec, opts))
        .collect();
    let mut best: Option<PathResult> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.distance < b.distance) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one alignment"))
}

struct Basis {
    n: usize,
    band: usize,
    dim: usize,
}

impl Basis {
    fn per_row(&self) -> usize {
        self.dim * (2 * self.band + 1)
    }

    /// `(coordinate, mode, sine?)` of parameter `p` within a row.
    fn index(&self, p: usize) -> (usize, usize, bool) {
        let per = 2 * self.band + 1;
        let (d, q) = (p / per, p % per);
        if q == 0 {
            (d, 0, false)
        } else {
            (d, q.div_ceil(2), q % 2 == 0)
        }
    }

    fn value(&self, mode: usize, sine: bool, i: usize) -> f64 {
        let x = 2.0 * std::f64::consts::PI * (mode * i) as f64 / self.n as f64;
        if sine {
            x.sin()
        } else {
            x.cos()
        }
    }

    fn add_to(&self, row: &mut Array2<f64>, p: usize, a: f64) {
        let (d, mode, sine) = self.index(p);
        for i in 0..self.n {
            row[[i, d]] += a * self.value(mode, sine, i);
        }
    }
}

fn action_of(spec: &MetricSpec, rows: &[Array2<f64>]) -> f64 {
    let k = (rows.len() - 1) as f64;
    let parts: Vec<f64> = (0..rows.len() - 1)
        .into_par_iter()
        .map(|v| match segment_norm(spec, &rows[v], &rows[v + 1]) {
            Ok(s) => k * s * s,
            Err(_) => f64::INFINITY,
        })
        .collect();
    parts.iter().sum()
}

fn optimize_path(
    c0: &Curve,
    target: &Curve,
    shift: usize,
    reversed: bool,
    spec: &MetricSpec,
    opts: &GeodesicOptions,
) -> Result<PathResult> {
    let k = opts.k;
    let initial = Homotopy::linear(c0, target, k)?;
    let linear_length = path_length(&initial, spec)?;
    let mut rows: Vec<Array2<f64>> = initial.rows().iter().map(|r| r.points().clone()).collect();
    let basis = Basis {
        n: c0.samples(),
        band: opts.band.min(c0.samples() / 2 - 1),
        dim: c0.dim(),
    };
    let scale = c0.length().max(target.length()) / (2.0 * std::f64::consts::PI);
    if opts.jitter > 0.0 && k > 1 {
        let mut rng = random::seeded(opts.seed);
        for row in rows.iter_mut().take(k).skip(1) {
            for p in 0..basis.per_row() {
                let a: f64 = rng.random_range(-1.0..1.0);
                basis.add_to(row, p, a * opts.jitter * scale);
            }
        }
    }
    let mut action = action_of(spec, &rows);
    if !action.is_finite() {
        rows = initial.rows().iter().map(|r| r.points().clone()).collect();
        action = action_of(spec, &rows);
    }
    let mut history = vec![action];
    let mut iterations = 0;
    let mut converged = k == 1 || action == 0.0;
    let h = 1e-5 * scale;
    let kf = k as f64;
    let mut alpha = 1.0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let params: Vec<(usize, usize)> = (1..k)
            .flat_map(|v| (0..basis.per_row()).map(move |p| (v, p)))
            .collect();
        let local = |v: usize, row: &Array2<f64>| -> f64 {
            let a = segment_norm(spec, &rows[v - 1], row);
            let b = segment_norm(spec, row, &rows[v + 1]);
            match (a, b) {
                (Ok(a), Ok(b)) => kf * (a * a + b * b),
                _ => f64::NAN,
            }
        };
        let grad: Vec<f64> = params
            .par_iter()
            .map(|&(v, p)| {
                let mut plus = rows[v].clone();
                basis.add_to(&mut plus, p, h);
                let mut minus = rows[v].clone();
                basis.add_to(&mut minus, p, -h);
                (local(v, &plus) - local(v, &minus)) / (2.0 * h)
            })
            .collect();
        if grad.iter().any(|g| !g.is_finite()) {
            break;
        }
        // Diagonal preconditioner: higher modes are stiffer.
        let dir: Vec<f64> = params
            .iter()
            .zip(&grad)
            .map(|(&(_, p), g)| {
                let (_, mode, _) = basis.index(p);
                -g / (1.0 + (mode * mode) as f64)
            })
            .collect();
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if slope >= 0.0 || slope.abs() <= 1e-14 * action.max(1e-300) {
            converged = true;
            break;
        }
        let mut accepted = None;
        for _ in 0..50 {
            let mut trial = rows.clone();
            for (&(v, p), d) in params.iter().zip(&dir) {
                basis.add_to(&mut trial[v], p, alpha * d);
            }
            let a = action_of(spec, &trial);
            if a.is_finite() && a <= action + 1e-4 * alpha * slope {
                accepted = Some((trial, a));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, a)) => {
                let decrease = (action - a) / action;
                rows = trial;
                action = a;
                history.push(a);
                alpha *= 2.0;
                if decrease < opts.tol {
                    converged = true;
                }
            }
            None => {
                converged = true;
            }
        }
    }

    let optimized = Homotopy::new(rows.into_iter().map(Curve::new).collect::<Result<_>>()?)?;
    let opt_length = path_length(&optimized, spec)?;
    let (homotopy, distance) = if opt_length <= linear_length {
        (optimized, opt_length)
    } else {
        (initial, linear_length)
    };
    Ok(PathResult {
        distance,
        action,
        homotopy,
        history,
        linear_length,
        shift,
        reversed,
        iterations,
        converged,
    })
}

/// Orientation class of the correspondences in the Fréchet distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Preserving,
    Both,
}

/// A monotone cyclic correspondence and its cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coupling {
    pub distance: f64,
    pub shift: usize,
    pub reversed: bool,
    /// Matched sample pairs `(i, j)`: `i` indexes `c0`, `j` the original `c1`.
    /// Starts and ends at the same pair.
    pub pairs: Vec<(usize, usize)>,
}

fn distance_matrix(c0: &Curve, c1: &Curve) -> Vec<f64> {
    let n = c0.samples();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, x) in row.iter_mut().enumerate() {
            *x = distance(c0.point(i), c1.point(j));
        }
    });
    d
}

/// Standard monotone DP between `c0[0..=N]` and `c1[s..=s+N]` (indices mod N).
fn frechet_shift(d: &[f64], n: usize, s: usize, bound: f64) -> f64 {
    let at = |i: usize, j: usize| d[(i % n) * n + (s + j) % n];
    if at(0, 0) >= bound {
        return f64::INFINITY;
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur = vec![0.0; n + 1];
    prev[0] = at(0, 0);
    for j in 1..=n {
        prev[j] = prev[j - 1].max(at(0, j));
    }
    for i in 1..=n {
        cur[0] = prev[0].max(at(i, 0));
        let mut row_min = cur[0];
        for j in 1..=n {
            let m = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = m.max(at(i, j));
            row_min = row_min.min(cur[j]);
        }
        if row_min >= bound {
            return f64::INFINITY;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n]
}

fn frechet_table(d: &[f64], n: usize, s: usize) -> Vec<f64> {
    let at = |i: usize, j: usize| d[(i % n) * n + (s + j) % n];
    let w = n + 1;
    let mut f = vec![0.0; w * w];
    for i in 0..=n {
        for j in 0..=n {
            let here = at(i, j);
            f[i * w + j] = match (i, j) {
                (0, 0) => here,
                (0, _) => f[j - 1].max(here),
                (_, 0) => f[(i - 1) * w].max(here),
                _ => f[(i - 1) * w + j]
                    .min(f[i * w + j - 1])
                    .min(f[(i - 1) * w + j - 1])
                    .max(here),
            };
        }
    }
    f
}

fn original_index(j: usize, n: usize, shift: usize, reversed: bool) -> usize {
    let k = (j + shift) % n;
    if reversed {
        (n - k) % n
    } else {
        k
    }
}

fn orientations(orientation: Orientation) -> &'static [bool] {
    match orientation {
        Orientation::Preserving => &[false],
        Orientation::Both => &[false, true],
    }
}

/// Discrete Fréchet distance with its optimal correspondence. Ties between
/// shifts go to the smallest shift, preserving orientation first.
pub fn frechet_coupling(c0: &Curve, c1: &Curve, orientation: Orientation) -> Result<Coupling> {
    check_same_shape(c0, c1)?;
    let n = c0.samples();
    let mut best = (f64::INFINITY, 0usize, false);
    for &reversed in orientations(orientation) {
        let target = if reversed { c1.reversed() } else { c1.clone() };
        let d = distance_matrix(c0, &target);
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|s| frechet_shift(&d, n, s, f64::INFINITY))
            .collect();
        for (s, v) in values.into_iter().enumerate() {
            if v < best.0 {
                best = (v, s, reversed);
            }
        }
    }
    let (distance, shift, reversed) = best;
    let target = if reversed { c1.reversed() } else { c1.clone() };
    let d = distance_matrix(c0, &target);
    let f = frechet_table(&d, n, shift);
    let w = n + 1;
    let (mut i, mut j) = (n, n);
    let mut pairs = vec![(i, j)];
    while (i, j) != (0, 0) {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = f[(i - 1) * w + j - 1];
            let up = f[(i - 1) * w + j];
            let left = f[i * w + j - 1];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        pairs.push((i, j));
    }
    pairs.reverse();
    let pairs = pairs
        .into_iter()
        .map(|(i, j)| (i % n, original_index(j, n, shift, reversed)))
        .collect();
    Ok(Coupling {
        distance,
        shift,
        reversed,
        pairs,
    })
}

/// Discrete Fréchet distance over monotone cyclic correspondences.
pub fn frechet_distance(c0: &Curve, c1: &Curve, orientation: Orientation) -> Result<f64> {
    Ok(frechet_coupling(c0, c1, orientation)?.distance)
}

/// Whether some shift admits a monotone correspondence with all matched
/// distances `<= delta`; returns the smallest such shift.
fn feasible_shift(d: &[f64], n: usize, delta: f64) -> Option<usize> {
    (0..n).into_par_iter().find_first(|&s| {
        let at = |i: usize, j: usize| d[(i % n) * n + (s + j) % n] <= delta;
        if !at(0, 0) {
            return false;
        }
        let mut prev = vec![false; n + 1];
        let mut cur = vec![false; n + 1];
        prev[0] = true;
        for j in 1..=n {
            prev[j] = prev[j - 1] && at(0, j);
        }
        for i in 1..=n {
            cur[0] = prev[0] && at(i, 0);
            let mut any = cur[0];
            for j in 1..=n {
                cur[j] = (prev[j] || cur[j - 1] || prev[j - 1]) && at(i, j);
                any |= cur[j];
            }
            if !any {
                return false;
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        prev[n]
    })
}

/// The sup-distance characterization, computed independently of the
/// Fréchet DP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DinfReport {
    /// `Len_∞` of the linear homotopy over the optimal correspondence.
    pub distance: f64,
    /// Smallest threshold admitting a correspondence.
    pub threshold: f64,
    pub shift: usize,
    pub reversed: bool,
    /// Per-row `sup_u |∂_v C|·(1/K)` of the linear homotopy.
    pub row_sups: Vec<f64>,
}

/// Bisects over the sorted pairwise distances for the smallest threshold
/// admitting a monotone cyclic correspondence (free-space reachability),
/// then measures `Len_∞ = Σ_v sup_u |C(u,v+1) − C(u,v)|` of the linear
/// homotopy `C(u,v) = (1−v)c0(u) + v c1(φ(u))` along it with `K` rows.
pub fn dinf_report(c0: &Curve, c1: &Curve, orientation: Orientation, k: usize) -> Result<DinfReport> {
    check_same_shape(c0, c1)?;
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let n = c0.samples();
    let mut best: Option<(f64, usize, bool, Vec<f64>)> = None;
    for &reversed in orientations(orientation) {
        let target = if reversed { c1.reversed() } else { c1.clone() };
        let d = distance_matrix(c0, &target);
        let mut values = d.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        // Feasible at the largest value: the diagonal coupling fits.
        let (mut lo, mut hi) = (0usize, values.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if feasible_shift(&d, n, values[mid]).is_some() {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let threshold = values[lo];
        let shift = feasible_shift(&d, n, threshold).expect("feasible threshold");
        if best.as_ref().is_none_or(|b| threshold < b.0) {
            best = Some((threshold, shift, reversed, d));
        }
    }
    let (threshold, shift, reversed, d) = best.expect("at least one orientation");
    let coupling = reachable_coupling(&d, n, shift, threshold);
    let target = aligned_target(c1, shift, reversed);
    let rows: Vec<Array2<f64>> = (0..=k)
        .map(|v| {
            let t = v as f64 / k as f64;
            let mut row = Array2::zeros((coupling.len(), c0.dim()));
            for (q, &(i, j)) in coupling.iter().enumerate() {
                let (a, b) = (c0.point(i % n), target.point(j % n));
                let p = &a + &((&b - &a) * t);
                row.row_mut(q).assign(&p);
            }
            row
        })
        .collect();
    let row_sups: Vec<f64> = rows
        .windows(2)
        .map(|w| {
            w[0].outer_iter()
                .zip(w[1].outer_iter())
                .map(|(a, b)| distance(a, b))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(DinfReport {
        distance: row_sups.iter().sum(),
        threshold,
        shift,
        reversed,
        row_sups,
    })
}

/// Monotone path through the free space `{d <= delta}` for shift `s`.
fn reachable_coupling(d: &[f64], n: usize, s: usize, delta: f64) -> Vec<(usize, usize)> {
    let at = |i: usize, j: usize| d[(i % n) * n + (s + j) % n] <= delta;
    let w = n + 1;
    let mut r = vec![false; w * w];
    for i in 0..=n {
        for j in 0..=n {
            r[i * w + j] = at(i, j)
                && match (i, j) {
                    (0, 0) => true,
                    (0, _) => r[j - 1],
                    (_, 0) => r[(i - 1) * w],
                    _ => r[(i - 1) * w + j - 1] || r[(i - 1) * w + j] || r[i * w + j - 1],
                };
        }
    }
    let (mut i, mut j) = (n, n);
    let mut path = vec![(i, j)];
    while (i, j) != (0, 0) {
        (i, j) = if i > 0 && j > 0 && r[(i - 1) * w + j - 1] {
            (i - 1, j - 1)
        } else if i > 0 && r[(i - 1) * w + j] {
            (i - 1, j)
        } else {
            (i, j - 1)
        };
        path.push((i, j));
    }
    path.reverse();
    path
}

/// Sup-distance form of the Fréchet distance, orientation preserving.
pub fn dinf_distance(c0: &Curve, c1: &Curve) -> Result<f64> {
    Ok(dinf_report(c0, c1, Orientation::Preserving, 16)?.distance)
}

/// Margins of the length-Lipschitz estimate along a homotopy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub lambda: f64,
    pub delta_length: f64,
    pub path_length: f64,
    /// `path_length / √λ`.
    pub bound: f64,
    /// `bound − |delta_length|`.
    pub margin: f64,
    /// Per step: `‖ΔC‖ − √λ Σ_i |ΔC_{i+1} − ΔC_i|`.
    pub row_margins: Vec<f64>,
    /// `min_v len(C(·,v)) − (len(C(·,0)) − path_length/√λ)`.
    pub completion_margin: f64,
    pub slack: f64,
    pub violations: usize,
    pub holds: bool,
}

fn first_order_lambda(spec: &MetricSpec) -> Result<f64> {
    match spec {
        MetricSpec::Hj { j: 1, lambda } | MetricSpec::HjTilde { j: 1, lambda } => Ok(*lambda),
        other => Err(Error::InvalidParameter(format!(
            "length-Lipschitz check needs H1 or H1~, got {}",
            other.name()
        ))),
    }
}

/// Checks `|len(C(·,1)) − len(C(·,0))| <= Len(C)/√λ` and, for every step,
/// `‖ΔC‖ >= √λ Σ_i |ΔC_{i+1} − ΔC_i|`. Violations are counted beyond
/// `slack` relative to the compared quantities.
pub fn length_lipschitz_check(c: &Homotopy, spec: &MetricSpec, slack: f64) -> Result<LipschitzReport> {
    spec.validate()?;
    let lambda = first_order_lambda(spec)?;
    let sq = lambda.sqrt();
    let norms = step_norms(c, spec)?;
    let n = c.samples();
    let row_margins: Vec<f64> = (0..c.k())
        .map(|v| {
            let h = c.step(v);
            let tv: f64 = (0..n)
                .map(|i| distance(h.vector((i + 1) % n), h.vector(i)))
                .sum();
            norms[v] - sq * tv
        })
        .collect();
    let total: f64 = norms.iter().sum();
    let delta_length = c.last().length() - c.first().length();
    let bound = total / sq;
    let margin = bound - delta_length.abs();
    let min_len = c.rows().iter().map(|r| r.length()).fold(f64::INFINITY, f64::min);
    let completion_margin = min_len - (c.first().length() - bound);
    let mut violations = row_margins
        .iter()
        .zip(&norms)
        .filter(|(m, s)| **m < -slack * s.max(1e-300))
        .count();
    if margin < -slack * bound.max(1e-300) {
        violations += 1;
    }
    if completion_margin < -slack * bound.max(c.first().length()) {
        violations += 1;
    }
    Ok(LipschitzReport {
        lambda,
        delta_length,
        path_length: total,
        bound,
        margin,
        row_margins,
        completion_margin,
        slack,
        violations,
        holds: violations == 0,
    })
}
