//! Exact event-driven simulation by Poisson thinning.
//!
//! Each vertex reads candidates `(s, u, j)` from its own driving stream
//! ([`PoissonStreams`]). A binary heap merges the per-vertex streams in time
//! order, with ties broken by `(vertex, draw index)`. A candidate at a
//! non-frozen vertex is accepted iff `u <= r^v_j(s)`, where the rate is
//! evaluated against the left-limit history on `cl(v)`. A candidate at a
//! frozen vertex is accepted iff `u <= 1`, which gives the unit-rate
//! reference dynamics.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::{Graph, Mark, VertexId, VertexSet};
use crate::model::{eval_rate, LocalView, RateModel, State};
use crate::rng;

mod marks;
mod streams;
mod trajectory;

pub use marks::{MarkDistribution, MarkSource};
pub use streams::{Candidate, Candidates, PoissonStreams};
pub use trajectory::{
    dual, jump_characteristics, DualPointProcess, Event, JumpCharacteristics, JumpTriple, Trajectory, VertexPath,
};

#[derive(Debug, Clone, Copy)]
struct Pending {
    vertex: VertexId,
    candidate: Candidate,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed: BinaryHeap is a max-heap and we want the earliest candidate
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .candidate
            .time
            .total_cmp(&self.candidate.time)
            .then_with(|| other.vertex.cmp(&self.vertex))
            .then_with(|| other.candidate.draw.cmp(&self.candidate.draw))
    }
}

/// Initial states `χ(ξ_v)` for every vertex.
pub fn initial_states<M: RateModel + ?Sized>(model: &M, marks: &[Mark]) -> Result<Vec<State>> {
    marks.iter().map(|&m| model.initial_state(m)).collect()
}

/// Simulates the process on `[0, horizon]` with vertices in `frozen` jumping at
/// unit rate per jump type. `frozen = ∅` gives the target process.
pub fn simulate<M: RateModel + ?Sized>(
    graph: &Graph,
    marks: &[Mark],
    model: &M,
    streams: &PoissonStreams,
    horizon: f64,
    frozen: &VertexSet,
) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::input(format!("horizon must be positive, got {horizon}")));
    }
    if marks.len() != graph.len() || streams.len() != graph.len() {
        return Err(Error::input(format!(
            "graph has {} vertices but {} marks and {} streams were given",
            graph.len(),
            marks.len(),
            streams.len()
        )));
    }
    if let Some(v) = frozen.iter().find(|&v| v >= graph.len()) {
        return Err(Error::UnknownVertex(v));
    }
    let initial = initial_states(model, marks)?;
    let jumps = model.jump_set();
    let space = model.state_space();
    let mut paths: Vec<VertexPath> = initial.iter().map(|&x| VertexPath::new(x)).collect();
    let mut events = Vec::new();

    let mut sources: Vec<Candidates<'_>> = graph
        .vertices()
        .map(|v| streams.candidates(v, jumps, horizon))
        .collect();
    let mut heap = BinaryHeap::with_capacity(graph.len());
    for (v, source) in sources.iter_mut().enumerate() {
        if let Some(candidate) = source.next() {
            heap.push(Pending { vertex: v, candidate });
        }
    }

    let mut last_time = 0.0;
    while let Some(Pending { vertex: v, candidate }) = heap.pop() {
        let Candidate { time, level, jump, .. } = candidate;
        let accept = if frozen.contains(v) {
            level <= 1.0
        } else {
            let view = LocalView::of_paths(time, graph.closure_of(v), marks, &paths);
            let rate = eval_rate(model, jump, &view, horizon)?;
            if rate > streams.bound(v) {
                return Err(Error::contract(format!(
                    "rate {rate} at vertex {v} exceeds its stream bound {}",
                    streams.bound(v)
                )));
            }
            level <= rate
        };
        if accept {
            if time == last_time {
                let first = events.last().map_or(v, |e: &Event| e.vertex);
                return Err(Error::NotProper { time, first, second: v });
            }
            let state = paths[v].state_before(f64::INFINITY) + jump;
            if !frozen.contains(v) && !space.contains(state) {
                return Err(Error::contract(format!(
                    "vertex {v} jumped by {jump} to state {state} outside the state space at t = {time}"
                )));
            }
            paths[v].push(time, state);
            events.push(Event {
                time,
                vertex: v,
                jump,
                state,
            });
            last_time = time;
        }
        if let Some(candidate) = sources[v].next() {
            heap.push(Pending { vertex: v, candidate });
        }
    }
    Ok(Trajectory::from_sorted(horizon, initial, events))
}

/// One replicate of an ensemble: the replicate seed, its marks and its path.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub seed: u64,
    pub marks: Vec<Mark>,
    pub trajectory: Trajectory,
}

/// Seed of replicate `k` under `master_seed`.
pub fn replicate_seed(master_seed: u64, k: u64) -> u64 {
    rng::split_seed(master_seed, k)
}

/// Replicate `k`: marks drawn from `split(seed_k, MARKS_KEY)` and driving
/// streams from `split(seed_k, STREAMS_KEY)`, where `seed_k = split(master, k)`.
pub fn simulate_replicate<M: RateModel + ?Sized>(
    graph: &Graph,
    marks: &MarkSource,
    model: &M,
    horizon: f64,
    frozen: &VertexSet,
    master_seed: u64,
    k: u64,
) -> Result<Replicate> {
    let seed = replicate_seed(master_seed, k);
    simulate_seeded(graph, marks, model, horizon, frozen, seed)
}

/// Same as [`simulate_replicate`] but from an explicit replicate seed.
pub fn simulate_seeded<M: RateModel + ?Sized>(
    graph: &Graph,
    marks: &MarkSource,
    model: &M,
    horizon: f64,
    frozen: &VertexSet,
    seed: u64,
) -> Result<Replicate> {
    if marks.len() != graph.len() {
        return Err(Error::input(format!(
            "mark source covers {} vertices, graph has {}",
            marks.len(),
            graph.len()
        )));
    }
    let mut mark_rng = rng::stream(rng::split_seed(seed, rng::MARKS_KEY));
    let sampled = marks.sample(&mut mark_rng);
    let streams = PoissonStreams::for_model(rng::split_seed(seed, rng::STREAMS_KEY), graph, model, horizon)?;
    let trajectory = simulate(graph, &sampled, model, &streams, horizon, frozen)?;
    Ok(Replicate {
        seed,
        marks: sampled,
        trajectory,
    })
}

/// `n_reps` independent replicates, computed sequentially.
pub fn replicate<M: RateModel + ?Sized>(
    graph: &Graph,
    marks: &MarkSource,
    model: &M,
    horizon: f64,
    frozen: &VertexSet,
    n_reps: usize,
    master_seed: u64,
) -> Result<Vec<Replicate>> {
    if n_reps == 0 {
        return Err(Error::input("n_reps must be at least 1"));
    }
    (0..n_reps as u64)
        .map(|k| simulate_replicate(graph, marks, model, horizon, frozen, master_seed, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_counterexample_model, BirthDeath, Contact};
    use alloc::vec;

    #[test]
    fn absorbing_birth_death_jumps_at_most_once() {
        let g = Graph::path(1);
        let m = BirthDeath::new(1.0, 0.0).unwrap();
        for seed in 0..200 {
            let streams = PoissonStreams::for_model(seed, &g, &m, 5.0).unwrap();
            let x = simulate(&g, &[Mark(0)], &m, &streams, 5.0, &VertexSet::new()).unwrap();
            assert!(x.events().len() <= 1);
            if let Some(e) = x.events().first() {
                assert_eq!((e.jump, e.state), (1, 1));
            }
        }
    }

    #[test]
    fn counterexample_jumps_only_in_the_middle() {
        let g = Graph::path(3);
        let m = make_counterexample_model();
        let marks = [Mark(1), Mark(0), Mark(0)];
        let mut jumped = 0;
        for seed in 0..500 {
            let streams = PoissonStreams::for_model(seed, &g, &m, 1.0).unwrap();
            let x = simulate(&g, &marks, &m, &streams, 1.0, &VertexSet::new()).unwrap();
            assert!(x.events().len() <= 1);
            for e in x.events() {
                assert_eq!(e.vertex, 1);
                jumped += 1;
            }
        }
        // P(jump by t = 1) = 1 - e^-1 ≈ 0.632
        let p = jumped as f64 / 500.0;
        assert!((p - 0.632).abs() < 0.09, "{p}");

        let equal = [Mark(1), Mark(0), Mark(1)];
        let streams = PoissonStreams::for_model(3, &g, &m, 10.0).unwrap();
        let x = simulate(&g, &equal, &m, &streams, 10.0, &VertexSet::new()).unwrap();
        assert!(x.events().is_empty());
    }

    #[test]
    fn deterministic_given_streams() {
        let g = Graph::path(5);
        let m = Contact::new(1.5, 1.0).unwrap();
        let marks = vec![Mark(1); 5];
        let streams = PoissonStreams::for_model(42, &g, &m, 2.0).unwrap();
        let a = simulate(&g, &marks, &m, &streams, 2.0, &VertexSet::from([2])).unwrap();
        let b = simulate(&g, &marks, &m, &streams, 2.0, &VertexSet::from([2])).unwrap();
        assert_eq!(a, b);
        let other = PoissonStreams::for_model(43, &g, &m, 2.0).unwrap();
        let c = simulate(&g, &marks, &m, &other, 2.0, &VertexSet::from([2])).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trajectories_are_valid_logs() {
        let g = Graph::grid(3, 3);
        let m = Contact::new(1.5, 1.0).unwrap();
        let src = MarkSource::Independent(vec![MarkDistribution::bernoulli(0.5).unwrap(); 9]);
        for rep in replicate(&g, &src, &m, 2.0, &VertexSet::from([4]), 50, 1).unwrap() {
            let x = rep.trajectory;
            let rebuilt = Trajectory::new(x.horizon(), x.initial().to_vec(), x.events().to_vec());
            assert_eq!(rebuilt.unwrap(), x);
            x.check_state_space(m.state_space(), &VertexSet::from([4])).unwrap();
        }
    }

    #[test]
    fn input_errors() {
        let g = Graph::path(2);
        let m = Contact::new(1.0, 1.0).unwrap();
        let s = PoissonStreams::for_model(0, &g, &m, 1.0).unwrap();
        let marks = [Mark(0), Mark(0)];
        assert!(simulate(&g, &marks, &m, &s, 0.0, &VertexSet::new()).is_err());
        assert!(simulate(&g, &marks, &m, &s, 1.0, &VertexSet::from([5])).is_err());
        assert!(simulate(&g, &marks[..1], &m, &s, 1.0, &VertexSet::new()).is_err());
        assert!(simulate(&g, &[Mark(0), Mark(7)], &m, &s, 1.0, &VertexSet::new()).is_err());
        let src = MarkSource::Fixed(marks.to_vec());
        assert!(replicate(&g, &src, &m, 1.0, &VertexSet::new(), 0, 0).is_err());
    }

    #[test]
    fn undersized_stream_bound_is_a_contract_error() {
        let g = Graph::path(1);
        let m = BirthDeath::new(5.0, 5.0).unwrap();
        let s = PoissonStreams::from_parts(0, vec![0], vec![1.0]).unwrap();
        let mut hit = false;
        for seed in 0..20 {
            let s = PoissonStreams::from_parts(seed, vec![0], vec![1.0]).unwrap();
            if let Err(Error::ModelContract(_)) = simulate(&g, &[Mark(0)], &m, &s, 5.0, &VertexSet::new()) {
                hit = true;
            }
        }
        assert!(hit);
        assert_eq!(s.bound(0), 1.0);
    }
}
