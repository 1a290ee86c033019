//! Exact desk-scale ground truth for Markov models.
//!
//! The chain state is a vertex-mark vector followed by a configuration, so
//! models whose rates read initial states (functions of the marks) are still
//! Markov on this augmented space. Transient laws come from uniformization:
//!
//! ```text
//! π(t) = Σ_k Poisson(k; Λt) · π(0) Pᵏ,   P = I + Q/Λ,   Λ = max exit rate
//! ```
//!
//! truncated once the Poisson tail is below [`TRUNCATION`].

use alloc::collections::{btree_map, BTreeMap};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexSet};
use crate::model::{eval_rate, LocalView, RateKind, RateModel, State};
use crate::sim::MarkSource;
use crate::stats::ln_poisson_pmf;

/// Poisson tail mass left out by uniformization.
pub const TRUNCATION: f64 = 1e-13;
pub const DEFAULT_STATE_CAP: usize = 10_000;
pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

/// Finite probability mass function over integer tuples, sorted by atom.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePmf {
    atoms: Vec<(Vec<i64>, f64)>,
}

impl FinitePmf {
    /// Merges duplicate atoms and checks the total mass is 1 within 1e-12.
    pub fn new(atoms: impl IntoIterator<Item = (Vec<i64>, f64)>) -> Result<Self> {
        let pmf = Self::collect(atoms)?;
        let total = pmf.total_mass();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("probabilities sum to {total}, not 1")));
        }
        Ok(pmf)
    }

    /// Merges duplicates and rescales nonnegative weights to total mass 1.
    pub fn normalized(atoms: impl IntoIterator<Item = (Vec<i64>, f64)>) -> Result<Self> {
        let mut pmf = Self::collect(atoms)?;
        let total = pmf.total_mass();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::input(format!("cannot normalize total mass {total}")));
        }
        for a in &mut pmf.atoms {
            a.1 /= total;
        }
        Ok(pmf)
    }

    fn collect(atoms: impl IntoIterator<Item = (Vec<i64>, f64)>) -> Result<Self> {
        let mut map: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        let mut width = None;
        for (atom, p) in atoms {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::input(format!("invalid probability {p}")));
            }
            if *width.get_or_insert(atom.len()) != atom.len() {
                return Err(Error::input("atoms of different lengths"));
            }
            *map.entry(atom).or_insert(0.0) += p;
        }
        Ok(FinitePmf {
            atoms: map.into_iter().filter(|a| a.1 > 0.0).collect(),
        })
    }

    pub fn point(atom: Vec<i64>) -> Self {
        FinitePmf {
            atoms: vec![(atom, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(Vec<i64>, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Number of coordinates per atom.
    pub fn width(&self) -> usize {
        self.atoms.first().map_or(0, |a| a.0.len())
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn prob(&self, atom: &[i64]) -> f64 {
        self.atoms
            .binary_search_by(|a| a.0.as_slice().cmp(atom))
            .map_or(0.0, |i| self.atoms[i].1)
    }

    /// Law of the listed coordinates.
    pub fn marginal(&self, coords: &[usize]) -> FinitePmf {
        let mut map: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for (atom, p) in &self.atoms {
            let key: Vec<i64> = coords.iter().map(|&c| atom[c]).collect();
            *map.entry(key).or_insert(0.0) += p;
        }
        FinitePmf {
            atoms: map.into_iter().collect(),
        }
    }

    /// Largest absolute probability difference over the union of supports.
    pub fn max_abs_diff(&self, other: &FinitePmf) -> f64 {
        let mut diff: f64 = 0.0;
        for (atom, p) in &self.atoms {
            diff = diff.max((p - other.prob(atom)).abs());
        }
        for (atom, q) in &other.atoms {
            diff = diff.max((q - self.prob(atom)).abs());
        }
        diff
    }
}

/// Augmented states `[marks..., states...]` and the sparse generator between them.
#[derive(Debug, Clone)]
pub struct ConfigurationChain {
    n_vertices: usize,
    states: Vec<Vec<i64>>,
    index: BTreeMap<Vec<i64>, usize>,
    /// Off-diagonal rates out of each state, in target order.
    transitions: Vec<Vec<(usize, f64)>>,
    exit_rates: Vec<f64>,
}

/// Exact law of the marks paired with their initial configuration.
pub fn initial_law<M: RateModel + ?Sized>(model: &M, marks: &MarkSource) -> Result<FinitePmf> {
    let atoms = marks
        .joint()
        .into_iter()
        .map(|(m, p)| {
            let mut atom: Vec<i64> = m.iter().map(|x| x.0).collect();
            for &mark in &m {
                atom.push(model.initial_state(mark)?);
            }
            Ok((atom, p))
        })
        .collect::<Result<Vec<_>>>()?;
    FinitePmf::normalized(atoms)
}

impl ConfigurationChain {
    /// Enumerates every augmented state reachable from the support of
    /// `initial`, failing once more than `cap` states are found.
    pub fn build<M: RateModel + ?Sized>(model: &M, graph: &Graph, initial: &FinitePmf, cap: usize) -> Result<Self> {
        if !model.is_markov() || matches!(model.rate_kind(), RateKind::TimeVarying { .. }) {
            return Err(Error::Unsupported(format!(
                "model {} is not a time-homogeneous Markov model",
                model.name()
            )));
        }
        let n = graph.len();
        if initial.width() != 2 * n {
            return Err(Error::input(format!(
                "initial atoms have {} coordinates, expected {} (marks then states)",
                initial.width(),
                2 * n
            )));
        }
        let mut chain = ConfigurationChain {
            n_vertices: n,
            states: Vec::new(),
            index: BTreeMap::new(),
            transitions: Vec::new(),
            exit_rates: Vec::new(),
        };
        for (atom, _) in initial.atoms() {
            chain.intern(atom.clone(), cap)?;
        }
        let marks_of =
            |s: &[i64]| -> Vec<crate::graph::Mark> { s[..n].iter().map(|&m| crate::graph::Mark(m)).collect() };
        let mut next = 0;
        while next < chain.states.len() {
            let state = chain.states[next].clone();
            let marks = marks_of(&state);
            let start: Vec<State> = marks.iter().map(|&m| model.initial_state(m)).collect::<Result<_>>()?;
            let current = &state[n..];
            let mut row: BTreeMap<usize, f64> = BTreeMap::new();
            for v in graph.vertices() {
                let view = LocalView::of_configuration(1.0, graph.closure_of(v), &marks, &start, current);
                for j in model.jump_set().iter() {
                    let rate = eval_rate(model, j, &view, 1.0)?;
                    if rate == 0.0 {
                        continue;
                    }
                    let target_state = current[v] + j;
                    if !model.state_space().contains(target_state) {
                        return Err(Error::contract(format!(
                            "positive rate for jump {j} at vertex {v} leaves the state space"
                        )));
                    }
                    let mut target = state.clone();
                    target[n + v] = target_state;
                    let idx = chain.intern(target, cap)?;
                    *row.entry(idx).or_insert(0.0) += rate;
                }
            }
            chain.exit_rates.push(row.values().sum());
            chain.transitions.push(row.into_iter().collect());
            next += 1;
        }
        Ok(chain)
    }

    fn intern(&mut self, state: Vec<i64>, cap: usize) -> Result<usize> {
        if let Some(&i) = self.index.get(&state) {
            return Ok(i);
        }
        if self.states.len() >= cap {
            return Err(Error::Capacity {
                what: "reachable configurations",
                count: self.states.len() + 1,
                cap,
            });
        }
        let i = self.states.len();
        self.index.insert(state.clone(), i);
        self.states.push(state);
        Ok(i)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.n_vertices
    }

    pub fn state(&self, i: usize) -> &[i64] {
        &self.states[i]
    }

    pub fn index_of(&self, state: &[i64]) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Generator row `i` including its diagonal entry.
    pub fn generator_row(&self, i: usize) -> Vec<(usize, f64)> {
        let mut row = self.transitions[i].clone();
        row.push((i, -self.exit_rates[i]));
        row.sort_by_key(|e| e.0);
        row
    }

    fn uniformization_rate(&self) -> f64 {
        self.exit_rates.iter().copied().fold(0.0, f64::max)
    }

    fn dense(&self, pmf: &FinitePmf) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.len()];
        for (atom, p) in pmf.atoms() {
            let i = self
                .index_of(atom)
                .ok_or_else(|| Error::input("initial atom is not a state of the chain"))?;
            v[i] += p;
        }
        Ok(v)
    }

    /// `π(0) e^{tQ}` as a dense vector over chain states.
    pub fn propagate(&self, start: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::input(format!("time {t} must be finite and >= 0")));
        }
        let lambda = self.uniformization_rate();
        if t == 0.0 || lambda == 0.0 {
            return Ok(start.to_vec());
        }
        let mean = lambda * t;
        let mut out = vec![0.0; self.len()];
        let mut term = start.to_vec();
        let mut next = vec![0.0; self.len()];
        let mut covered = 0.0;
        let mut k: u64 = 0;
        loop {
            let w = libm::exp(ln_poisson_pmf(k, mean));
            for (o, x) in out.iter_mut().zip(&term) {
                *o += w * x;
            }
            covered += w;
            if (k as f64 > mean && 1.0 - covered < TRUNCATION) || k > 100_000 + 20 * mean as u64 {
                break;
            }
            next.iter_mut().for_each(|x| *x = 0.0);
            for (i, &mass) in term.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                next[i] += mass * (1.0 - self.exit_rates[i] / lambda);
                for &(j, rate) in &self.transitions[i] {
                    next[j] += mass * rate / lambda;
                }
            }
            core::mem::swap(&mut term, &mut next);
            k += 1;
        }
        Ok(out)
    }

    fn to_pmf(&self, dense: &[f64]) -> Result<FinitePmf> {
        FinitePmf::normalized(
            dense
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(i, &p)| (self.states[i].clone(), p)),
        )
    }
}

/// Law at time `t` of the augmented state, started from `initial`.
pub fn transient_distribution(chain: &ConfigurationChain, initial: &FinitePmf, t: f64) -> Result<FinitePmf> {
    if t == 0.0 {
        return Ok(initial.clone());
    }
    let start = chain.dense(initial)?;
    chain.to_pmf(&chain.propagate(&start, t)?)
}

/// Coordinates of atoms produced by [`grid_path_law`]: marks first, then one
/// configuration block per grid time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLayout {
    pub vertices: usize,
    pub times: usize,
}

impl GridLayout {
    pub fn mark(&self, v: usize) -> usize {
        v
    }

    pub fn state(&self, v: usize, time_index: usize) -> usize {
        self.vertices * (1 + time_index) + v
    }

    /// The mark and every grid state of each vertex in `set`.
    pub fn block(&self, set: &VertexSet) -> Vec<usize> {
        set.iter()
            .flat_map(|v| core::iter::once(self.mark(v)).chain((0..self.times).map(move |i| self.state(v, i))))
            .collect()
    }
}

/// Joint law of `(marks, x(t_0), ..., x(t_m))`.
pub fn grid_path_law(
    chain: &ConfigurationChain,
    initial: &FinitePmf,
    grid: &[f64],
    support_cap: usize,
) -> Result<(FinitePmf, GridLayout)> {
    if grid.is_empty() || grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::input("grid must be nonempty, nonnegative and increasing"));
    }
    let n = chain.vertex_count();
    let layout = GridLayout {
        vertices: n,
        times: grid.len(),
    };
    let first = chain.propagate(&chain.dense(initial)?, grid[0])?;
    let mut paths: Vec<(Vec<usize>, f64)> = first
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (vec![i], p))
        .collect();
    let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for step in grid.windows(2) {
        let dt = step[1] - step[0];
        rows.clear();
        let mut extended = Vec::new();
        for (path, p) in paths {
            let last = *path.last().unwrap();
            if let btree_map::Entry::Vacant(slot) = rows.entry(last) {
                let mut start = vec![0.0; chain.len()];
                start[last] = 1.0;
                let row = chain.propagate(&start, dt)?;
                slot.insert(row.into_iter().enumerate().filter(|(_, q)| *q > 0.0).collect());
            }
            for &(next, q) in &rows[&last] {
                let mut longer = path.clone();
                longer.push(next);
                extended.push((longer, p * q));
            }
            if extended.len() > support_cap {
                return Err(Error::Capacity {
                    what: "grid path atoms",
                    count: extended.len(),
                    cap: support_cap,
                });
            }
        }
        paths = extended;
    }
    let atoms = paths.into_iter().map(|(path, p)| {
        let mut atom: Vec<i64> = chain.state(path[0])[..n].to_vec();
        for &i in &path {
            atom.extend_from_slice(&chain.state(i)[n..]);
        }
        (atom, p)
    });
    Ok((FinitePmf::normalized(atoms)?, layout))
}

/// `I(A; B | S)` in nats for coordinate blocks of a joint pmf.
pub fn conditional_mutual_information(joint: &FinitePmf, a: &[usize], b: &[usize], s: &[usize]) -> f64 {
    let key = |atom: &[i64], coords: &[usize]| -> Vec<i64> { coords.iter().map(|&c| atom[c]).collect() };
    let mut p_abs: BTreeMap<[Vec<i64>; 3], f64> = BTreeMap::new();
    let mut p_as: BTreeMap<(Vec<i64>, Vec<i64>), f64> = BTreeMap::new();
    let mut p_bs: BTreeMap<(Vec<i64>, Vec<i64>), f64> = BTreeMap::new();
    let mut p_s: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (atom, p) in joint.atoms() {
        let (ka, kb, ks) = (key(atom, a), key(atom, b), key(atom, s));
        *p_as.entry((ka.clone(), ks.clone())).or_insert(0.0) += p;
        *p_bs.entry((kb.clone(), ks.clone())).or_insert(0.0) += p;
        *p_s.entry(ks.clone()).or_insert(0.0) += p;
        *p_abs.entry([ka, kb, ks]).or_insert(0.0) += p;
    }
    let mut total = 0.0;
    for ([ka, kb, ks], p) in &p_abs {
        if *p == 0.0 {
            continue;
        }
        let pas = p_as[&(ka.clone(), ks.clone())];
        let pbs = p_bs[&(kb.clone(), ks.clone())];
        let ps = p_s[ks];
        total += p * libm::log(p * ps / (pas * pbs));
    }
    total.max(0.0)
}

/// Reweights `p` by `rho(atom)` and renormalizes.
pub fn tilt<F: Fn(&[i64]) -> f64>(p: &FinitePmf, rho: F) -> Result<FinitePmf> {
    let mut atoms = Vec::with_capacity(p.len());
    for (atom, q) in p.atoms() {
        let r = rho(atom);
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::input(format!("tilt must be finite and nonnegative, got {r}")));
        }
        atoms.push((atom.clone(), q * r));
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if total <= 0.0 {
        return Err(Error::input("tilted measure has zero mass"));
    }
    FinitePmf::normalized(atoms)
}

/// Checks that a tilt `ρ = ρ1(z1, z3) · ρ2(z2, z3)` preserves `Z1 ⊥ Z2 | Z3`.
///
/// `p0` must be a pmf over triples that already satisfies the conditional
/// independence (CMI below 1e-10). Returns the CMI before and after tilting.
pub fn check_factorization_ci<F1, F2>(p0: &FinitePmf, rho1: F1, rho2: F2) -> Result<(f64, f64)>
where
    F1: Fn(i64, i64) -> f64,
    F2: Fn(i64, i64) -> f64,
{
    if p0.width() != 3 {
        return Err(Error::input("factorization check needs a pmf over triples"));
    }
    let before = conditional_mutual_information(p0, &[0], &[1], &[2]);
    if before >= 1e-10 {
        return Err(Error::Precondition(format!(
            "base pmf is not conditionally independent (CMI = {before:e})"
        )));
    }
    let p1 = tilt(p0, |z| rho1(z[0], z[2]) * rho2(z[1], z[2]))?;
    Ok((before, conditional_mutual_information(&p1, &[0], &[1], &[2])))
}
