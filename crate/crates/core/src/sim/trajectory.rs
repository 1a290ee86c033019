use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{VertexId, VertexSet};
use crate::model::{Jump, State, StateSpace};

/// One vertex's càdlàg step path: an initial state and its jump times with
/// the state entered at each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VertexPath {
    initial: State,
    times: Vec<f64>,
    states: Vec<State>,
}

impl VertexPath {
    pub fn new(initial: State) -> Self {
        VertexPath {
            initial,
            times: Vec::new(),
            states: Vec::new(),
        }
    }

    /// Appends a jump; times must be strictly increasing.
    pub fn push(&mut self, time: f64, state: State) {
        debug_assert!(self.times.last().is_none_or(|&last| last < time));
        self.times.push(time);
        self.states.push(state);
    }

    pub fn initial(&self) -> State {
        self.initial
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn events(&self) -> impl Iterator<Item = (f64, State)> + '_ {
        self.times.iter().copied().zip(self.states.iter().copied())
    }

    /// Number of jumps strictly before `t`.
    pub fn count_before(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    /// Left limit `x(t-)`.
    pub fn state_before(&self, t: f64) -> State {
        match self.count_before(t) {
            0 => self.initial,
            k => self.states[k - 1],
        }
    }

    /// Right-continuous value `x(s)`.
    pub fn state_at(&self, s: f64) -> State {
        match self.times.partition_point(|&u| u <= s) {
            0 => self.initial,
            k => self.states[k - 1],
        }
    }

    pub fn last_jump_before(&self, t: f64) -> Option<f64> {
        match self.count_before(t) {
            0 => None,
            k => Some(self.times[k - 1]),
        }
    }

    /// The path with every jump at or after `t` removed.
    pub fn truncated_before(&self, t: f64) -> VertexPath {
        let k = self.count_before(t);
        VertexPath {
            initial: self.initial,
            times: self.times[..k].to_vec(),
            states: self.states[..k].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub vertex: VertexId,
    pub jump: Jump,
    /// State of `vertex` right after the jump.
    pub state: State,
}

/// A multi-vertex path on `[0, horizon]`: initial states plus globally
/// time-ordered jump events.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    horizon: f64,
    initial: Vec<State>,
    events: Vec<Event>,
}

impl Trajectory {
    /// Validates properness, time range and state consistency of an event log.
    pub fn new(horizon: f64, initial: Vec<State>, events: Vec<Event>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::input(format!("horizon must be positive, got {horizon}")));
        }
        let mut current = initial.clone();
        let mut last: Option<&Event> = None;
        for e in &events {
            if e.vertex >= initial.len() {
                return Err(Error::UnknownVertex(e.vertex));
            }
            if !(e.time > 0.0 && e.time <= horizon) {
                return Err(Error::input(format!("event time {} outside (0, {horizon}]", e.time)));
            }
            if e.jump == 0 {
                return Err(Error::input(format!("zero jump at t = {}", e.time)));
            }
            if let Some(prev) = last {
                if e.time == prev.time {
                    return Err(Error::NotProper {
                        time: e.time,
                        first: prev.vertex,
                        second: e.vertex,
                    });
                }
                if e.time < prev.time {
                    return Err(Error::input(format!(
                        "events out of order at t = {} after t = {}",
                        e.time, prev.time
                    )));
                }
            }
            let expected = current[e.vertex] + e.jump;
            if e.state != expected {
                return Err(Error::input(format!(
                    "event at t = {} records state {} for vertex {} but {} + {} = {expected}",
                    e.time, e.state, e.vertex, current[e.vertex], e.jump
                )));
            }
            current[e.vertex] = expected;
            last = Some(e);
        }
        Ok(Trajectory {
            horizon,
            initial,
            events,
        })
    }

    /// Event log already known to be proper and consistent (built by the simulator).
    pub(crate) fn from_sorted(horizon: f64, initial: Vec<State>, events: Vec<Event>) -> Self {
        Trajectory {
            horizon,
            initial,
            events,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial(&self) -> &[State] {
        &self.initial
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn vertex_count(&self) -> usize {
        self.initial.len()
    }

    pub fn paths(&self) -> Vec<VertexPath> {
        let mut paths: Vec<VertexPath> = self.initial.iter().map(|&x| VertexPath::new(x)).collect();
        for e in &self.events {
            paths[e.vertex].push(e.time, e.state);
        }
        paths
    }

    pub fn vertex_path(&self, v: VertexId) -> VertexPath {
        let mut path = VertexPath::new(self.initial[v]);
        for e in self.events.iter().filter(|e| e.vertex == v) {
            path.push(e.time, e.state);
        }
        path
    }

    /// `x_v(t-)`.
    pub fn state_before(&self, v: VertexId, t: f64) -> State {
        self.events
            .iter()
            .take_while(|e| e.time < t)
            .filter(|e| e.vertex == v)
            .last()
            .map_or(self.initial[v], |e| e.state)
    }

    /// Configuration `x(t-)` of every vertex.
    pub fn configuration_before(&self, t: f64) -> Vec<State> {
        let mut x = self.initial.clone();
        for e in self.events.iter().take_while(|e| e.time < t) {
            x[e.vertex] = e.state;
        }
        x
    }

    /// The trajectory on `[0, t)`: events strictly before `t`, horizon `t`.
    pub fn truncated_before(&self, t: f64) -> Trajectory {
        let k = self.events.partition_point(|e| e.time < t);
        Trajectory {
            horizon: t.min(self.horizon),
            initial: self.initial.clone(),
            events: self.events[..k].to_vec(),
        }
    }

    /// Checks that every state visited by the vertices outside `frozen` lies in `space`.
    pub fn check_state_space(&self, space: &StateSpace, frozen: &VertexSet) -> Result<()> {
        let bad = self
            .initial
            .iter()
            .enumerate()
            .map(|(v, &x)| (v, x, 0.0))
            .chain(self.events.iter().map(|e| (e.vertex, e.state, e.time)))
            .find(|&(v, x, _)| !frozen.contains(v) && !space.contains(x));
        match bad {
            Some((v, x, t)) => Err(Error::contract(format!(
                "vertex {v} in state {x} at t = {t}, outside the state space"
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpTriple {
    pub time: f64,
    pub jump: Jump,
    pub vertex: VertexId,
}

/// Time-ordered `(time, jump, vertex)` triples of a proper trajectory on a vertex set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JumpCharacteristics {
    pub triples: Vec<JumpTriple>,
}

impl JumpCharacteristics {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

/// Jump characteristics of `x` restricted to the vertices in `u`.
pub fn jump_characteristics(x: &Trajectory, u: &VertexSet) -> Result<JumpCharacteristics> {
    if let Some(v) = u.iter().find(|&v| v >= x.vertex_count()) {
        return Err(Error::UnknownVertex(v));
    }
    let mut triples: Vec<JumpTriple> = Vec::new();
    for e in x.events.iter().filter(|e| u.contains(e.vertex)) {
        if let Some(prev) = triples.last() {
            if !(prev.time < e.time) {
                return Err(Error::NotProper {
                    time: e.time,
                    first: prev.vertex,
                    second: e.vertex,
                });
            }
        }
        triples.push(JumpTriple {
            time: e.time,
            jump: e.jump,
            vertex: e.vertex,
        });
    }
    Ok(JumpCharacteristics { triples })
}

/// Simple marked point process on `(0, T] × J × U` whose atoms are the jump
/// characteristics of a trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualPointProcess {
    points: Vec<JumpTriple>,
}

impl DualPointProcess {
    pub fn points(&self) -> &[JumpTriple] {
        &self.points
    }

    pub fn total_mass(&self) -> usize {
        self.points.len()
    }

    /// Mass of `(t0, t1] × {jumps matching} × {vertices matching}`.
    pub fn count(&self, t0: f64, t1: f64, jump: Option<Jump>, vertex: Option<VertexId>) -> usize {
        self.points
            .iter()
            .filter(|p| p.time > t0 && p.time <= t1)
            .filter(|p| jump.is_none_or(|j| p.jump == j))
            .filter(|p| vertex.is_none_or(|v| p.vertex == v))
            .count()
    }

    pub fn restrict(&self, u: &VertexSet) -> DualPointProcess {
        DualPointProcess {
            points: self.points.iter().filter(|p| u.contains(p.vertex)).copied().collect(),
        }
    }
}

pub fn dual(x: &Trajectory, u: &VertexSet) -> Result<DualPointProcess> {
    Ok(DualPointProcess {
        points: jump_characteristics(x, u)?.triples,
    })
}
