//! Jump rate functions and the contract they must satisfy.
//!
//! A model never sees the whole configuration. Rates are evaluated against a
//! [`LocalView`], which exposes marks and paths of the closure `cl(v)` only,
//! and only strictly before the evaluation time. Locality and predictability
//! therefore hold by construction; the remaining obligations (non-negativity,
//! the degree/time bound, staying inside the state space) are checked by
//! [`eval_rate`] and fuzzed by [`contract::validate`].

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::graph::{Mark, VertexId};
use crate::sim::VertexPath;

mod builtin;
pub mod contract;

pub use builtin::{
    make_builtin, make_counterexample_model, BirthDeath, Contact, Counterexample, DelayedSir, GlauberIsing,
    ModelParams, Sir, Voter, BUILTIN_NAMES,
};

pub type State = i64;
pub type Jump = i64;

/// Finite, nonempty, sorted set of nonzero jump sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JumpSet(Vec<Jump>);

impl JumpSet {
    pub fn new(jumps: impl IntoIterator<Item = Jump>) -> Result<Self> {
        let mut jumps: Vec<Jump> = jumps.into_iter().collect();
        jumps.sort_unstable();
        jumps.dedup();
        if jumps.is_empty() {
            return Err(Error::input("jump set must be nonempty"));
        }
        if jumps.contains(&0) {
            return Err(Error::input("0 is not a jump"));
        }
        Ok(JumpSet(jumps))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, j: Jump) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn as_slice(&self) -> &[Jump] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Jump> + '_ {
        self.0.iter().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateSpace {
    /// Explicit sorted set of states.
    Finite(Vec<State>),
    Integers,
}

impl StateSpace {
    pub fn finite(states: impl IntoIterator<Item = State>) -> Self {
        let mut states: Vec<State> = states.into_iter().collect();
        states.sort_unstable();
        states.dedup();
        StateSpace::Finite(states)
    }

    pub fn contains(&self, x: State) -> bool {
        match self {
            StateSpace::Finite(states) => states.binary_search(&x).is_ok(),
            StateSpace::Integers => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateKind {
    /// Rates only change when the local history jumps, so compensators are exact sums.
    PiecewiseConstant,
    /// Rates vary between local events; compensators use adaptive quadrature
    /// to the given absolute tolerance.
    TimeVarying { tolerance: f64 },
}

/// A family of jump rate functions `r^v_j` with its bound `C(d, t)`.
pub trait RateModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn jump_set(&self) -> &JumpSet;

    fn state_space(&self) -> &StateSpace;

    fn rate_kind(&self) -> RateKind;

    /// True when rates depend on the closure's marks and current states only
    /// (initial states count, since they are functions of the marks).
    fn is_markov(&self) -> bool;

    /// The initial condition map from a vertex mark to its starting state.
    fn initial_state(&self, mark: Mark) -> Result<State>;

    /// Upper bound on every rate at a vertex with `closure_size` closure vertices
    /// up to time `horizon`. Non-decreasing in both arguments.
    fn rate_bound(&self, closure_size: usize, horizon: f64) -> f64;

    /// Rate of jump `j` at the view's center vertex and time.
    fn rate(&self, j: Jump, view: &LocalView<'_>) -> f64;
}

impl<M: RateModel + ?Sized> RateModel for Box<M> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn jump_set(&self) -> &JumpSet {
        (**self).jump_set()
    }
    fn state_space(&self) -> &StateSpace {
        (**self).state_space()
    }
    fn rate_kind(&self) -> RateKind {
        (**self).rate_kind()
    }
    fn is_markov(&self) -> bool {
        (**self).is_markov()
    }
    fn initial_state(&self, mark: Mark) -> Result<State> {
        (**self).initial_state(mark)
    }
    fn rate_bound(&self, closure_size: usize, horizon: f64) -> f64 {
        (**self).rate_bound(closure_size, horizon)
    }
    fn rate(&self, j: Jump, view: &LocalView<'_>) -> f64 {
        (**self).rate(j, view)
    }
}

#[derive(Debug, Clone, Copy)]
enum Source<'a> {
    Paths(&'a [VertexPath]),
    Snapshot { initial: &'a [State], current: &'a [State] },
}

/// What a rate function may read: marks and paths on `cl(v)` strictly before `t`.
///
/// Positions are closure indices: `0` is the center vertex, `1..size()` its
/// neighbors in ascending id order.
#[derive(Debug, Clone, Copy)]
pub struct LocalView<'a> {
    t: f64,
    closure: &'a [VertexId],
    marks: &'a [Mark],
    source: Source<'a>,
}

impl<'a> LocalView<'a> {
    /// View of full paths cut at `t`; events at or after `t` are invisible.
    pub fn of_paths(t: f64, closure: &'a [VertexId], marks: &'a [Mark], paths: &'a [VertexPath]) -> Self {
        LocalView {
            t,
            closure,
            marks,
            source: Source::Paths(paths),
        }
    }

    /// View of a configuration with no recorded history. Only meaningful for
    /// Markov models; asking it for jump times panics.
    pub fn of_configuration(
        t: f64,
        closure: &'a [VertexId],
        marks: &'a [Mark],
        initial: &'a [State],
        current: &'a [State],
    ) -> Self {
        LocalView {
            t,
            closure,
            marks,
            source: Source::Snapshot { initial, current },
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn center(&self) -> VertexId {
        self.closure[0]
    }

    pub fn size(&self) -> usize {
        self.closure.len()
    }

    pub fn vertex(&self, k: usize) -> VertexId {
        self.closure[k]
    }

    pub fn mark(&self, k: usize) -> Mark {
        self.marks[self.closure[k]]
    }

    pub fn initial(&self, k: usize) -> State {
        match self.source {
            Source::Paths(paths) => paths[self.closure[k]].initial(),
            Source::Snapshot { initial, .. } => initial[self.closure[k]],
        }
    }

    /// Left limit `x_k(t-)`.
    pub fn state(&self, k: usize) -> State {
        match self.source {
            Source::Paths(paths) => paths[self.closure[k]].state_before(self.t),
            Source::Snapshot { current, .. } => current[self.closure[k]],
        }
    }

    pub fn center_state(&self) -> State {
        self.state(0)
    }

    pub fn neighbor_states(&self) -> impl Iterator<Item = State> + '_ {
        (1..self.size()).map(move |k| self.state(k))
    }

    /// Time of the last jump of position `k` strictly before `t`.
    pub fn last_jump_time(&self, k: usize) -> Option<f64> {
        match self.source {
            Source::Paths(paths) => paths[self.closure[k]].last_jump_before(self.t),
            Source::Snapshot { .. } => {
                panic!("configuration views carry no jump times; the model must not be Markov")
            }
        }
    }

    /// `x_k(s)` for `s < t`. Times at or after `t` are clamped to the left limit at `t`.
    pub fn state_at(&self, k: usize, s: f64) -> State {
        match self.source {
            Source::Paths(paths) => {
                let path = &paths[self.closure[k]];
                if s < self.t {
                    path.state_at(s)
                } else {
                    path.state_before(self.t)
                }
            }
            Source::Snapshot { .. } => {
                panic!("configuration views carry no history; the model must not be Markov")
            }
        }
    }
}

/// Evaluates a rate and checks it against the model's contract.
pub fn eval_rate<M: RateModel + ?Sized>(model: &M, j: Jump, view: &LocalView<'_>, horizon: f64) -> Result<f64> {
    if !model.jump_set().contains(j) {
        return Err(Error::input(format!("jump {j} not in the model's jump set")));
    }
    let rate = model.rate(j, view);
    if !rate.is_finite() {
        return Err(Error::Numeric(format!(
            "rate of jump {j} at vertex {} and t = {} is {rate}",
            view.center(),
            view.time()
        )));
    }
    if rate < 0.0 {
        return Err(Error::contract(format!(
            "negative rate {rate} for jump {j} at vertex {}",
            view.center()
        )));
    }
    let bound = model.rate_bound(view.size(), horizon.max(view.time()));
    if rate > bound {
        return Err(Error::contract(format!(
            "rate {rate} for jump {j} at vertex {} exceeds bound {bound}",
            view.center()
        )));
    }
    Ok(rate)
}
