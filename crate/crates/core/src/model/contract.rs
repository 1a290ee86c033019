//! Randomized checks of the rate contract.
//!
//! Histories are random walks inside the state space with uniform jump times.
//! For each sampled `(vertex, time)` the checker evaluates every jump rate and
//! records a violation when a rate is negative, non-finite or above the bound,
//! when it is positive for a jump that leaves the state space, when it changes
//! under a perturbation of the history at or after the evaluation time, or (for
//! piecewise-constant models) when it differs at two times with no local event
//! between them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::graph::{Graph, Mark, VertexId};
use crate::model::{eval_rate, LocalView, RateKind, RateModel, State};
use crate::rng::{self, StreamRng};
use crate::sim::VertexPath;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContractReport {
    pub evaluations: usize,
    pub violations: Vec<String>,
}

impl ContractReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_path<M: RateModel + ?Sized>(
    model: &M,
    initial: State,
    horizon: f64,
    max_events: usize,
    rng: &mut StreamRng,
) -> VertexPath {
    use rand::Rng;
    let n_events = rng.random_range(0..=max_events);
    let mut times: Vec<f64> = (0..n_events).map(|_| horizon * rng::uniform_open_closed(rng)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let jumps = model.jump_set().as_slice();
    let mut path = VertexPath::new(initial);
    let mut state = initial;
    for t in times {
        let j = jumps[rng::index(rng, jumps.len())];
        if model.state_space().contains(state + j) {
            state += j;
            path.push(t, state);
        }
    }
    path
}

fn local_events(paths: &[VertexPath], closure: &[VertexId]) -> Vec<f64> {
    let mut times: Vec<f64> = closure.iter().flat_map(|&u| paths[u].times().iter().copied()).collect();
    times.sort_by(f64::total_cmp);
    times
}

/// Runs `trials` random rate evaluations of `model` on `graph`.
pub fn validate<M: RateModel + ?Sized>(
    model: &M,
    graph: &Graph,
    marks: &[Mark],
    horizon: f64,
    trials: usize,
    seed: u64,
) -> Result<ContractReport> {
    let mut report = ContractReport::default();
    let initial: Vec<State> = marks.iter().map(|&m| model.initial_state(m)).collect::<Result<_>>()?;
    check_bound_monotone(model, graph, horizon, &mut report);
    let mut rng = rng::stream(seed);
    for trial in 0..trials {
        if report.violations.len() >= 20 {
            break;
        }
        let paths: Vec<VertexPath> = initial
            .iter()
            .map(|&x| random_path(model, x, horizon, 6, &mut rng))
            .collect();
        let v = rng::index(&mut rng, graph.len());
        let t = horizon * rng::uniform_open_closed(&mut rng);
        let closure = graph.closure_of(v);
        let view = LocalView::of_paths(t, closure, marks, &paths);

        // history perturbed on [t, t + eps): truncate and append fresh events
        let eps = 1e-3 * horizon;
        let perturbed: Vec<VertexPath> = paths
            .iter()
            .map(|p| {
                let mut q = p.truncated_before(t);
                let mut x = q.state_before(f64::INFINITY);
                let shift = model.jump_set().as_slice()[rng::index(&mut rng, model.jump_set().len())];
                x += shift;
                q.push(t, x);
                q.push(t + 0.5 * eps, x - shift);
                q
            })
            .collect();
        let perturbed_view = LocalView::of_paths(t, closure, marks, &perturbed);

        let events = local_events(&paths, closure);
        let lo = events.iter().rev().find(|&&s| s < t).copied().unwrap_or(0.0);
        let hi = events.iter().find(|&&s| s >= t).copied().unwrap_or(horizon);
        let t2 = lo + (hi - lo) * rng::uniform_open_closed(&mut rng);
        let other_view = LocalView::of_paths(t2, closure, marks, &paths);

        for j in model.jump_set().iter() {
            report.evaluations += 1;
            let rate = match eval_rate(model, j, &view, horizon) {
                Ok(r) => r,
                Err(e) => {
                    report.violations.push(format!("trial {trial}: {e}"));
                    continue;
                }
            };
            let x = view.center_state();
            if rate > 0.0 && !model.state_space().contains(x + j) {
                report.violations.push(format!(
                    "trial {trial}: vertex {v} in state {x} has rate {rate} for jump {j} leaving the state space"
                ));
            }
            let again = model.rate(j, &perturbed_view);
            if again != rate {
                report.violations.push(format!(
                    "trial {trial}: rate at vertex {v}, t = {t} reads history at or after t ({rate} vs {again})"
                ));
            }
            if model.rate_kind() == RateKind::PiecewiseConstant {
                let later = model.rate(j, &other_view);
                if later != rate {
                    report.violations.push(format!(
                        "trial {trial}: piecewise-constant rate at vertex {v} changed between local events ({rate} at {t} vs {later} at {t2})"
                    ));
                }
            }
        }
    }
    Ok(report)
}

fn check_bound_monotone<M: RateModel + ?Sized>(model: &M, graph: &Graph, horizon: f64, report: &mut ContractReport) {
    let max_d = graph.vertices().map(|v| graph.degree(v) + 1).max().unwrap_or(1) + 1;
    let times = [0.0, 0.25 * horizon, 0.5 * horizon, horizon];
    for d in 1..=max_d {
        for w in times.windows(2) {
            let (a, b) = (model.rate_bound(d, w[0]), model.rate_bound(d, w[1]));
            if !(a <= b) {
                report
                    .violations
                    .push(format!("rate bound decreases in time at d = {d}: {a} then {b}"));
            }
        }
        let (a, b) = (model.rate_bound(d, horizon), model.rate_bound(d + 1, horizon));
        if !(a <= b) {
            report
                .violations
                .push(format!("rate bound decreases in closure size at d = {d}: {a} then {b}"));
        }
    }
}
