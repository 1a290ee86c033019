//! Ready-made experiments shared by the command line and the acceptance suite.

use ips_core::model::make_counterexample_model;
use ips_core::mrftest::{SuiteConfig, SuiteReport};
use ips_core::sim::{MarkDistribution, MarkSource};
use ips_core::{Graph, Mark, Result, VertexSet};
use serde::Serialize;

use crate::parallel;

/// The three-vertex path of the counterexample with its mark law: the end
/// marks are fair coins and the middle mark is 0.
pub fn counterexample_setup() -> (Graph, MarkSource) {
    let coin = MarkDistribution::bernoulli(0.5).expect("valid probability");
    (
        Graph::path(3),
        MarkSource::Independent(vec![coin.clone(), MarkDistribution::point(Mark(0)), coin]),
    )
}

/// Conditional frequencies of the counterexample given `X_2(t-) = 1`
/// (vertex ids 0, 1, 2 in code).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleEstimate {
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    /// Replicates with the middle vertex infected just before `t`.
    pub conditioned: usize,
    /// Among those, replicates with the left vertex starting at 1.
    pub left_ones: usize,
    pub estimate: f64,
    /// `sqrt(p(1-p)/n)` at `p = 1/2`.
    pub binomial_std_error: f64,
    /// Conditioned replicates violating `X_left(0) = 1 - X_right(0)`.
    pub identity_violations: usize,
    /// `P(X_left(0) = 1 | X_mid(t-) = 1, X_right(0) = r)` for `r = 0, 1`;
    /// `None` when no replicate falls in the cell.
    pub given_right: [Option<f64>; 2],
}

pub fn counterexample_estimate(samples: usize, t: f64, seed: u64) -> Result<CounterexampleEstimate> {
    let (graph, marks) = counterexample_setup();
    let model = make_counterexample_model();
    let reps = parallel::replicate(&graph, &marks, &model, t, &VertexSet::new(), samples, seed)?;
    let mut conditioned = 0;
    let mut left_ones = 0;
    let mut identity_violations = 0;
    let mut cells = [(0usize, 0usize); 2];
    for rep in &reps {
        let x = &rep.trajectory;
        if x.state_before(1, t) != 1 {
            continue;
        }
        let left = x.initial()[0];
        let right = x.initial()[2];
        conditioned += 1;
        left_ones += usize::from(left == 1);
        identity_violations += usize::from(left != 1 - right);
        let cell = &mut cells[right as usize];
        cell.0 += 1;
        cell.1 += usize::from(left == 1);
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(CounterexampleEstimate {
        t,
        samples,
        seed,
        conditioned,
        left_ones,
        estimate: ratio(left_ones, conditioned).unwrap_or(f64::NAN),
        binomial_std_error: (0.25 / conditioned.max(1) as f64).sqrt(),
        identity_violations,
        given_right: [ratio(cells[0].1, cells[0].0), ratio(cells[1].1, cells[1].0)],
    })
}

/// The alpha = 1 suite on the counterexample.
pub fn counterexample_suite(samples: usize, t: f64, n_permutations: usize, seed: u64) -> Result<SuiteReport> {
    let (graph, marks) = counterexample_setup();
    let mut config = SuiteConfig::new(1, t, samples, seed);
    config.n_permutations = n_permutations;
    parallel::mrf_suite(&graph, &make_counterexample_model(), &marks, &config)
}
