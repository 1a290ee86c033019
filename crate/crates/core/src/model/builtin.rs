use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::graph::Mark;
use crate::model::{Jump, JumpSet, LocalView, RateKind, RateModel, State, StateSpace};

pub type ModelParams = BTreeMap<String, f64>;

pub const BUILTIN_NAMES: &[&str] = &[
    "counterexample",
    "contact",
    "sir",
    "delayed_sir",
    "glauber_ising",
    "voter_rate",
    "constant_birth_death",
];

fn binary_initial(mark: Mark) -> Result<State> {
    match mark.0 {
        0 | 1 => Ok(mark.0),
        m => Err(Error::input(format!("mark {m} is not a state in {{0, 1}}"))),
    }
}

fn count_equal(view: &LocalView<'_>, state: State) -> usize {
    view.neighbor_states().filter(|&x| x == state).count()
}

/// Three-vertex path model whose trajectories are not a 1-MRF.
///
/// A vertex with exactly two neighbors jumps `0 -> 1` at rate 1 while its
/// neighbors started in different states; every other vertex is frozen.
#[derive(Debug, Clone)]
pub struct Counterexample {
    jumps: JumpSet,
    states: StateSpace,
}

impl Default for Counterexample {
    fn default() -> Self {
        Counterexample {
            jumps: JumpSet::new([1]).unwrap(),
            states: StateSpace::finite([0, 1]),
        }
    }
}

pub fn make_counterexample_model() -> Counterexample {
    Counterexample::default()
}

impl RateModel for Counterexample {
    fn name(&self) -> &str {
        "counterexample"
    }
    fn jump_set(&self) -> &JumpSet {
        &self.jumps
    }
    fn state_space(&self) -> &StateSpace {
        &self.states
    }
    fn rate_kind(&self) -> RateKind {
        RateKind::PiecewiseConstant
    }
    fn is_markov(&self) -> bool {
        true
    }
    fn initial_state(&self, mark: Mark) -> Result<State> {
        binary_initial(mark)
    }
    fn rate_bound(&self, _closure_size: usize, _horizon: f64) -> f64 {
        1.0
    }
    fn rate(&self, j: Jump, view: &LocalView<'_>) -> f64 {
        if j != 1 || view.size() != 3 {
            return 0.0;
        }
        let split = view.initial(1) != view.initial(2);
        if split && view.center_state() == 0 {
            1.0
        } else {
            0.0
        }
    }
}

/// Contact process: `0 -> 1` at `lambda` per infected neighbor, `1 -> 0` at `mu`.
#[derive(Debug, Clone)]
pub struct Contact {
    pub lambda: f64,
    pub mu: f64,
    jumps: JumpSet,
    states: StateSpace,
}

impl Contact {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        nonnegative("lambda", lambda)?;
        nonnegative("mu", mu)?;
        Ok(Contact {
            lambda,
            mu,
            jumps: JumpSet::new([-1, 1])?,
            states: StateSpace::finite([0, 1]),
        })
    }
}

impl RateModel for Contact {
    fn name(&self) -> &str {
        "contact"
    }
    fn jump_set(&self) -> &JumpSet {
        &self.jumps
    }
    fn state_space(&self) -> &StateSpace {
        &self.states
    }
    fn rate_kind(&self) -> RateKind {
        RateKind::PiecewiseConstant
    }
    fn is_markov(&self) -> bool {
        true
    }
    fn initial_state(&self, mark: Mark) -> Result<State> {
        binary_initial(mark)
    }
    fn rate_bound(&self, closure_size: usize, _horizon: f64) -> f64 {
        (self.lambda * closure_size.saturating_sub(1) as f64).max(self.mu)
    }
    fn rate(&self, j: Jump, view: &LocalView<'_>) -> f64 {
        match (view.center_state(), j) {
            (0, 1) => self.lambda * count_equal(view, 1) as f64,
            (1, -1) => self.mu,
            _ => 0.0,
        }
    }
}

/// SIR epidemic on states `0 = S, 1 = I, 2 = R` with single `+1` jumps.
#[derive(Debug, Clone)]
pub struct Sir {
    pub beta: f64,
    pub gamma: f64,
    jumps: JumpSet,
    states: StateSpace,
}

impl Sir {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        nonnegative("beta", beta)?;
        nonnegative("gamma", gamma)?;
        Ok(Sir {
            beta,
            gamma,
            jumps: JumpSet::new([1])?,
            states: StateSpace::finite([0, 1, 2]),
        })
    }
}

fn sir_initial(mark: Mark) -> Result<State> {
    match mark.0 {
        0..=2 => Ok(mark.0),
        m => Err(Error::input(format!("mark {m} is not an SIR state"))),
    }
}

impl RateModel for Sir {
    fn name(&self) -> &str {
        "sir"
    }
    fn jump_set(&self) -> &JumpSet {
        &self.jumps
    }
    fn state_space(&self) -> &StateSpace {
        &self.states
    }
    fn rate_kind(&self) -> RateKind {
        RateKind::PiecewiseConstant
    }
    fn is_markov(&self) -> bool {
        true
    }
    fn initial_state(&self, mark: Mark) -> Result<State> {
        sir_initial(mark)
    }
    fn rate_bound(&self, closure_size: usize, _horizon: f64) -> f64 {
        (self.beta * closure_size.saturating_sub(1) as f64).max(self.gamma)
    }
    fn rate(&self, j: Jump, view: &LocalView<'_>) -> f64 {
        match (view.center_state(), j) {
            (0, 1) => self.beta * count_equal(view, 1) as f64,
            (1, 1) => self.gamma,
            _ => 0.0,
        }
    }
}

/// SIR whose recovery hazard ramps up with time since infection:
/// `gamma * (1 - exp(-(t - t_inf) / delay))`. Non-Markov and time-varying.
#[derive(Debug, Clone)]
pub struct DelayedSir {
    pub beta: f64,
    pub gamma: f64,
    pub delay: f64,
    pub tolerance: f64,
    jumps: JumpSet,
    states: StateSpace,
}

impl DelayedSir {
    pub fn new(beta: f64, gamma: f64, delay: f64) -> Result<Self> {
        nonnegative("beta", beta)?;
        nonnegative("gamma", gamma)?;
        if !(delay > 0.0 && delay.is_finite()) {
            return Err(Error::input("delay must be positive"));
        }
        Ok(DelayedSir {
            beta,
            gamma,
            delay,
            tolerance: 1e-10,
            jumps: JumpSet::new([1])?,
            states: StateSpace::finite([0, 1, 2]),
        })
    }
}

impl RateModel for DelayedSir {
    fn name(&self) -> &str {
        "delayed_sir"
    }
    fn jump_set(&self) -> &JumpSet {
        &self.jumps
    }
    fn state_space(&self) -> &StateSpace {
        &self.states
    }
    fn rate_kind(&self) -> RateKind {
        RateKind::TimeVarying {
            tolerance: self.tolerance,
        }
    }
    fn is_markov(&self) -> bool {
        false
    }
    fn initial_state(&self, mark: Mark) -> Result<State> {
        sir_initial(mark)
    }
    fn rate_bound(&self, closure_size: usize, _horizon: f64) -> f64 {
        (self.beta * closure_size.saturating_sub(1) as f64).max(self.gamma)
    }
    fn rate(&self, j: Jump, view: &LocalView<'_>) -> f64 {
        match (view.center_state(), j) {
            (0, 1) => self.beta * count_equal(view, 1) as f64,
            (1, 1) => {
                let infected_at = view.last_jump_time(0).unwrap_or(0.0);
                let age = view.time() - infected_at;
                self.gamma * (1.0 - libm::exp(-age / self.delay))
            }
            _ => 0.0,
        }
    }
}

/// Heat-bath Glauber dynamics for the Ising model on spins `±1` (jumps `±2`).
///
/// Marks map to spins as `1 -> +1` and `0, -1 -> -1`.
#[derive(Debug, Clone)]
pub struct GlauberIsing {
    pub beta: f64,
    pub field: f64,
    jumps: JumpSet,
    states: StateSpace,
}

impl GlauberIsing {
    pub fn new(beta: f64, field: f64) -> Result<Self> {
        if !beta.is_finite() || !field.is_finite() {
            return Err(Error::input("beta and h must be finite"));
        }
        Ok(GlauberIsing {
            beta,
            field,
            jumps: JumpSet::new([-2, 2])?,
            states: StateSpace::finite([-1, 1]),
        })
    }
}

impl RateModel for GlauberIsing {
    fn name(&self) -> &str {
        "glauber_ising"
    }
    fn jump_set(&self) -> &JumpSet {
        &self.jumps
    }
    fn state_space(&self) -> &StateSpace {
        &self.states
    }
    fn rate_kind(&self) -> RateKind {
        RateKind::PiecewiseConstant
    }
    fn is_markov(&self) -> bool {
        true
    }
    fn initial_state(&self, mark: Mark) -> Result<State> {
        match mark.0 {
            1 => Ok(1),
            0 | -1 => Ok(-1),
            m => Err(Error::input(format!("mark {m} is not a spin"))),
        }
    }
    fn rate_bound(&self, _closure_size: usize, _horizon: f64) -> f64 {
        1.0
    }
    fn rate(&self, j: Jump, view: &LocalView<'_>) -> f64 {
        let local_field = self.field + view.neighbor_states().sum::<State>() as f64;
        match (view.center_state(), j) {
            (-1, 2) => 1.0 / (1.0 + libm::exp(-2.0 * self.beta * local_field)),
            (1, -2) => 1.0 / (1.0 + libm::exp(2.0 * self.beta * local_field)),
            _ => 0.0,
        }
    }
}

/// Voter model: adopt the other opinion at `nu` times the fraction of
/// disagreeing neighbors.
#[derive(Debug, Clone)]
pub struct Voter {
    pub nu: f64,
    jumps: JumpSet,
    states: StateSpace,
}

impl Voter {
    pub fn new(nu: f64) -> Result<Self> {
        nonnegative("nu", nu)?;
        Ok(Voter {
            nu,
            jumps: JumpSet::new([-1, 1])?,
            states: StateSpace::finite([0, 1]),
        })
    }
}

impl RateModel for Voter {
    fn name(&self) -> &str {
        "voter_rate"
    }
    fn jump_set(&self) -> &JumpSet {
        &self.jumps
    }
    fn state_space(&self) -> &StateSpace {
        &self.states
    }
    fn rate_kind(&self) -> RateKind {
        RateKind::PiecewiseConstant
    }
    fn is_markov(&self) -> bool {
        true
    }
    fn initial_state(&self, mark: Mark) -> Result<State> {
        binary_initial(mark)
    }
    fn rate_bound(&self, _closure_size: usize, _horizon: f64) -> f64 {
        self.nu
    }
    fn rate(&self, j: Jump, view: &LocalView<'_>) -> f64 {
        let degree = view.size() - 1;
        if degree == 0 {
            return 0.0;
        }
        let other = match (view.center_state(), j) {
            (0, 1) => 1,
            (1, -1) => 0,
            _ => return 0.0,
        };
        self.nu * count_equal(view, other) as f64 / degree as f64
    }
}

/// Two-state chain with rate `a` for `0 -> 1` and `b` for `1 -> 0`, no interaction.
#[derive(Debug, Clone)]
pub struct BirthDeath {
    pub a: f64,
    pub b: f64,
    jumps: JumpSet,
    states: StateSpace,
}

impl BirthDeath {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        nonnegative("a", a)?;
        nonnegative("b", b)?;
        Ok(BirthDeath {
            a,
            b,
            jumps: JumpSet::new([-1, 1])?,
            states: StateSpace::finite([0, 1]),
        })
    }
}

impl RateModel for BirthDeath {
    fn name(&self) -> &str {
        "constant_birth_death"
    }
    fn jump_set(&self) -> &JumpSet {
        &self.jumps
    }
    fn state_space(&self) -> &StateSpace {
        &self.states
    }
    fn rate_kind(&self) -> RateKind {
        RateKind::PiecewiseConstant
    }
    fn is_markov(&self) -> bool {
        true
    }
    fn initial_state(&self, mark: Mark) -> Result<State> {
        binary_initial(mark)
    }
    fn rate_bound(&self, _closure_size: usize, _horizon: f64) -> f64 {
        self.a.max(self.b)
    }
    fn rate(&self, j: Jump, view: &LocalView<'_>) -> f64 {
        match (view.center_state(), j) {
            (0, 1) => self.a,
            (1, -1) => self.b,
            _ => 0.0,
        }
    }
}

fn nonnegative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!(
            "parameter {name} must be finite and >= 0, got {value}"
        )))
    }
}

fn param(params: &ModelParams, model: &str, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::input(format!("model {model} needs parameter \"{key}\"")))
}

/// Builds a built-in model from its name and parameters.
pub fn make_builtin(name: &str, params: &ModelParams) -> Result<Box<dyn RateModel>> {
    let p = |key| param(params, name, key);
    Ok(match name {
        "counterexample" => Box::new(make_counterexample_model()),
        "contact" => Box::new(Contact::new(p("lambda")?, p("mu")?)?),
        "sir" => Box::new(Sir::new(p("beta")?, p("gamma")?)?),
        "delayed_sir" => Box::new(DelayedSir::new(p("beta")?, p("gamma")?, p("delay")?)?),
        "glauber_ising" => Box::new(GlauberIsing::new(p("beta")?, params.get("h").copied().unwrap_or(0.0))?),
        "voter_rate" => Box::new(Voter::new(p("nu")?)?),
        "constant_birth_death" => Box::new(BirthDeath::new(p("a")?, p("b")?)?),
        other => return Err(Error::input(format!("unknown model \"{other}\""))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::sim::VertexPath;
    use alloc::vec;
    use alloc::vec::Vec;

    fn paths(initial: &[State]) -> Vec<VertexPath> {
        initial.iter().map(|&x| VertexPath::new(x)).collect()
    }

    #[test]
    fn counterexample_rates() {
        let m = make_counterexample_model();
        let g = Graph::path(3);
        let marks = [Mark(1), Mark(0), Mark(0)];
        let p = paths(&[1, 0, 0]);
        let at = |v| LocalView::of_paths(0.5, g.closure_of(v), &marks, &p);
        assert_eq!(m.rate(1, &at(1)), 1.0);
        assert_eq!(m.rate(1, &at(0)), 0.0);
        assert_eq!(m.rate(1, &at(2)), 0.0);

        let same = paths(&[1, 0, 1]);
        let view = LocalView::of_paths(0.5, g.closure_of(1), &marks, &same);
        assert_eq!(m.rate(1, &view), 0.0);

        // absorbed once vertex 2 has jumped
        let mut jumped = paths(&[1, 0, 0]);
        jumped[1].push(0.3, 1);
        let view = LocalView::of_paths(0.5, g.closure_of(1), &marks, &jumped);
        assert_eq!(m.rate(1, &view), 0.0);
        assert_eq!(m.rate_bound(3, 10.0), 1.0);
    }

    #[test]
    fn contact_rates_and_bound() {
        let m = Contact::new(1.5, 1.0).unwrap();
        let g = Graph::path(3);
        let marks = [Mark(0); 3];
        let none = paths(&[0, 0, 0]);
        let view = LocalView::of_paths(1.0, g.closure_of(1), &marks, &none);
        assert_eq!(m.rate(1, &view), 0.0);
        let both = paths(&[1, 0, 1]);
        let view = LocalView::of_paths(1.0, g.closure_of(1), &marks, &both);
        assert_eq!(m.rate(1, &view), 3.0);
        assert_eq!(m.rate(1, &view), m.rate_bound(3, 1.0));
        assert_eq!(m.rate(-1, &view), 0.0);
    }

    #[test]
    fn birth_death_is_definitional() {
        let m = BirthDeath::new(2.0, 3.0).unwrap();
        let g = Graph::path(1);
        let marks = [Mark(0)];
        let zero = paths(&[0]);
        let one = paths(&[1]);
        let v0 = LocalView::of_paths(0.1, g.closure_of(0), &marks, &zero);
        let v1 = LocalView::of_paths(0.1, g.closure_of(0), &marks, &one);
        assert_eq!((m.rate(1, &v0), m.rate(-1, &v0)), (2.0, 0.0));
        assert_eq!((m.rate(1, &v1), m.rate(-1, &v1)), (0.0, 3.0));
    }

    #[test]
    fn delayed_sir_recovery_ramps() {
        let m = DelayedSir::new(1.0, 2.0, 0.5).unwrap();
        let g = Graph::path(1);
        let marks = [Mark(0)];
        let mut p = vec![VertexPath::new(0)];
        p[0].push(1.0, 1);
        let at = |t| m.rate(1, &LocalView::of_paths(t, g.closure_of(0), &marks, &p));
        assert_eq!(at(1.0), 0.0);
        let expected = 2.0 * (1.0 - libm::exp(-1.0));
        assert!((at(1.5) - expected).abs() < 1e-15);
    }

    #[test]
    fn glauber_rates_sum_to_one_for_opposite_spins() {
        let m = GlauberIsing::new(0.7, 0.2).unwrap();
        let g = Graph::path(3);
        let marks = [Mark(0); 3];
        let up = paths(&[1, 1, -1]);
        let down = paths(&[1, -1, -1]);
        let r_down = m.rate(-2, &LocalView::of_paths(1.0, g.closure_of(1), &marks, &up));
        let r_up = m.rate(2, &LocalView::of_paths(1.0, g.closure_of(1), &marks, &down));
        assert!((r_up + r_down - 1.0).abs() < 1e-15);
    }

    #[test]
    fn builtin_catalog() {
        let mut params = ModelParams::new();
        params.insert("lambda".into(), 1.5);
        params.insert("mu".into(), 1.0);
        assert_eq!(make_builtin("contact", &params).unwrap().name(), "contact");
        assert!(make_builtin("sir", &params).is_err());
        assert!(make_builtin("nope", &params).is_err());
        assert_eq!(
            make_builtin("counterexample", &ModelParams::new()).unwrap().name(),
            "counterexample"
        );
        params.insert("mu".into(), -1.0);
        assert!(make_builtin("contact", &params).is_err());
    }
}
