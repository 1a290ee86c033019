//! Likelihood ratio of the target path law against the reference law.
//!
//! For a reference trajectory `x̂` in which the vertices of `W` jump at unit
//! rate per jump type, the weight at time `t` is
//!
//! ```text
//! L_t = Π_{τ_k ≤ t} r^{v_k}_{j_k}(τ_k) · exp(-Σ_{(j,v) ∈ J×W} ∫_0^t (r^v_j(s) - 1) ds)
//! ```
//!
//! with the product over the jump characteristics of `x̂` on `W` and every rate
//! being the *target* rate evaluated on the left-limit history of `x̂`. The
//! weight is carried in log space and split into one term per vertex of `W`;
//! each term only reads marks and paths on that vertex's closure.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, Mark, VertexId, VertexSet};
use crate::model::{eval_rate, LocalView, RateKind, RateModel};
use crate::sim::{simulate_replicate, MarkSource, Trajectory, VertexPath};
use crate::stats::MeanEstimate;

/// Log-weight contribution of a single vertex of `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexWeight {
    pub vertex: VertexId,
    /// Sum of log target rates at this vertex's jumps.
    pub log_jump_term: f64,
    /// `Σ_j ∫ (r^v_j(s) - 1) ds` over the interval.
    pub compensator: f64,
    pub jumps: usize,
    /// Some jump of this vertex had target rate exactly 0.
    pub is_zero: bool,
}

impl VertexWeight {
    pub fn log_value(&self) -> f64 {
        if self.is_zero {
            f64::NEG_INFINITY
        } else {
            self.log_jump_term - self.compensator
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodWeight {
    pub t: f64,
    pub open_interval: bool,
    pub log_jump_term: f64,
    pub compensator: f64,
    pub weight_is_zero: bool,
    pub per_vertex: Vec<VertexWeight>,
    /// Accumulated quadrature error estimate of the compensator (0 for
    /// piecewise-constant models).
    pub quadrature_error: f64,
}

impl LikelihoodWeight {
    pub fn log_value(&self) -> f64 {
        if self.weight_is_zero {
            f64::NEG_INFINITY
        } else {
            self.log_jump_term - self.compensator
        }
    }

    pub fn value(&self) -> f64 {
        if self.weight_is_zero {
            0.0
        } else {
            libm::exp(self.log_value())
        }
    }
}

/// Weight of `xhat` at time `t` for the reference set `w`, over `(0, t]`
/// (or `(0, t)` when `open_interval`).
pub fn weight<M: RateModel + ?Sized>(
    model: &M,
    graph: &Graph,
    marks: &[Mark],
    xhat: &Trajectory,
    w: &VertexSet,
    t: f64,
    open_interval: bool,
) -> Result<LikelihoodWeight> {
    if !(t >= 0.0) || t > xhat.horizon() {
        return Err(Error::input(alloc::format!(
            "weight time {t} outside [0, {}]",
            xhat.horizon()
        )));
    }
    if xhat.vertex_count() != graph.len() || marks.len() != graph.len() {
        return Err(Error::input("trajectory, marks and graph disagree on the vertex count"));
    }
    if let Some(v) = w.iter().find(|&v| v >= graph.len()) {
        return Err(Error::UnknownVertex(v));
    }
    let paths = xhat.paths();
    let mut out = LikelihoodWeight {
        t,
        open_interval,
        log_jump_term: 0.0,
        compensator: 0.0,
        weight_is_zero: false,
        per_vertex: Vec::with_capacity(w.len()),
        quadrature_error: 0.0,
    };
    for v in w.iter() {
        let (term, err) = vertex_weight(model, graph, marks, &paths, v, t, open_interval, xhat.horizon())?;
        out.log_jump_term += term.log_jump_term;
        out.compensator += term.compensator;
        out.weight_is_zero |= term.is_zero;
        out.quadrature_error += err;
        out.per_vertex.push(term);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn vertex_weight<M: RateModel + ?Sized>(
    model: &M,
    graph: &Graph,
    marks: &[Mark],
    paths: &[VertexPath],
    v: VertexId,
    t: f64,
    open_interval: bool,
    horizon: f64,
) -> Result<(VertexWeight, f64)> {
    let closure = graph.closure_of(v);
    let mut term = VertexWeight {
        vertex: v,
        log_jump_term: 0.0,
        compensator: 0.0,
        jumps: 0,
        is_zero: false,
    };

    let mut previous = paths[v].initial();
    for (tau, state) in paths[v].events() {
        let inside = if open_interval { tau < t } else { tau <= t };
        if !inside {
            break;
        }
        let j = state - previous;
        previous = state;
        let view = LocalView::of_paths(tau, closure, marks, paths);
        let rate = eval_rate(model, j, &view, horizon)?;
        term.jumps += 1;
        if rate == 0.0 {
            term.is_zero = true;
        } else {
            term.log_jump_term += libm::log(rate);
        }
    }

    // rates on cl(v) can only change at local events (or continuously, for
    // time-varying models), so integrate piece by piece between them
    let mut cuts: Vec<f64> = closure
        .iter()
        .flat_map(|&u| paths[u].times().iter().copied())
        .filter(|&s| s > 0.0 && s < t)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let total_rate = |s: f64| -> Result<f64> {
        let view = LocalView::of_paths(s, closure, marks, paths);
        model
            .jump_set()
            .iter()
            .try_fold(0.0, |acc, j| Ok(acc + eval_rate(model, j, &view, horizon)?))
    };

    let mut integral = 0.0;
    let mut error = 0.0;
    let mut a = 0.0;
    for b in cuts.into_iter().chain(core::iter::once(t)) {
        if b > a {
            match model.rate_kind() {
                RateKind::PiecewiseConstant => {
                    integral += total_rate(0.5 * (a + b))? * (b - a);
                }
                RateKind::TimeVarying { tolerance } => {
                    let tol = tolerance * (b - a) / t.max(f64::MIN_POSITIVE);
                    let (value, err) = adaptive_simpson(&total_rate, a, b, tol)?;
                    integral += value;
                    error += err;
                }
            }
        }
        a = b;
    }
    term.compensator = integral - model.jump_set().len() as f64 * t;
    Ok((term, error))
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
/// Returns the integral and the accumulated Richardson error estimate.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let fa = f(a.max(f64::MIN_POSITIVE).max(a + (b - a) * 1e-15))?;
    let fm = f(0.5 * (a + b))?;
    let fb = f(b)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol.max(1e-15), 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m))?;
    let frm = f(0.5 * (m + b))?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok((left + right + delta / 15.0, delta.abs() / 15.0));
    }
    let (l, el) = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let (r, er) = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok((l + r, el + er))
}

/// One importance-sampling draw: replicate `k` of the reference process with
/// `frozen = w`, returning `L_{t-} · f(marks, x̂[t))` at `t = horizon`.
#[allow(clippy::too_many_arguments)]
pub fn importance_sample<M, F>(
    model: &M,
    graph: &Graph,
    marks: &MarkSource,
    w: &VertexSet,
    horizon: f64,
    f: &F,
    seed: u64,
    k: u64,
) -> Result<f64>
where
    M: RateModel + ?Sized,
    F: Fn(&[Mark], &Trajectory) -> f64 + ?Sized,
{
    let rep = simulate_replicate(graph, marks, model, horizon, w, seed, k)?;
    let lw = weight(model, graph, &rep.marks, &rep.trajectory, w, horizon, true)?;
    if lw.weight_is_zero {
        return Ok(0.0);
    }
    let value = f(&rep.marks, &rep.trajectory.truncated_before(horizon));
    Ok(lw.value() * value)
}

/// Monte Carlo estimate of `E_target[f]` as `E_ref[L · f]` over `n_reps` replicates.
#[allow(clippy::too_many_arguments)]
pub fn importance_estimate<M, F>(
    model: &M,
    graph: &Graph,
    marks: &MarkSource,
    w: &VertexSet,
    horizon: f64,
    f: &F,
    n_reps: usize,
    seed: u64,
) -> Result<MeanEstimate>
where
    M: RateModel + ?Sized,
    F: Fn(&[Mark], &Trajectory) -> f64 + ?Sized,
{
    if n_reps < 2 {
        return Err(Error::input("importance sampling needs at least 2 replicates"));
    }
    let samples = (0..n_reps as u64)
        .map(|k| importance_sample(model, graph, marks, w, horizon, f, seed, k))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MeanEstimate::from_samples(&samples))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingalePoint {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    /// `|mean - 1| > 4 · std_error`.
    pub flagged: bool,
}

/// Closed-interval weights `L_t` of replicate `k` at every grid time.
pub fn martingale_sample<M: RateModel + ?Sized>(
    model: &M,
    graph: &Graph,
    marks: &MarkSource,
    w: &VertexSet,
    grid: &[f64],
    seed: u64,
    k: u64,
) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let horizon = grid.last().copied().unwrap_or(0.0);
    if horizon == 0.0 {
        return Ok(alloc::vec![1.0; grid.len()]);
    }
    let rep = simulate_replicate(graph, marks, model, horizon, w, seed, k)?;
    grid.iter()
        .map(|&t| Ok(weight(model, graph, &rep.marks, &rep.trajectory, w, t, false)?.value()))
        .collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::input("time grid must be finite, nonnegative and increasing"));
    }
    Ok(())
}

/// Per-time mean and standard error of per-replicate weight vectors.
pub fn summarize_martingale(grid: &[f64], samples: &[Vec<f64>]) -> Vec<MartingalePoint> {
    grid.iter()
        .enumerate()
        .map(|(i, &t)| {
            let column: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            let est = MeanEstimate::from_samples(&column);
            MartingalePoint {
                t,
                mean: est.mean,
                std_error: est.std_error,
                flagged: (est.mean - 1.0).abs() > 4.0 * est.std_error,
            }
        })
        .collect()
}

pub fn martingale_diagnostic<M: RateModel + ?Sized>(
    model: &M,
    graph: &Graph,
    marks: &MarkSource,
    w: &VertexSet,
    grid: &[f64],
    n_reps: usize,
    seed: u64,
) -> Result<Vec<MartingalePoint>> {
    let samples = (0..n_reps as u64)
        .map(|k| martingale_sample(model, graph, marks, w, grid, seed, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_martingale(grid, &samples))
}
