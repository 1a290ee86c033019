//! Conditional independence tests of vertex-block trajectories on simulated
//! ensembles.
//!
//! Each block variable is the marks of its vertices together with a discrete
//! summary of their paths on `[0, t)`. The statistic is the plug-in
//! conditional mutual information; its null law comes from shuffling the
//! A-codes within each S-stratum.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId, VertexSet};
use crate::model::RateModel;
use crate::rng;
use crate::sim::{self, MarkSource, Replicate, Trajectory};

pub const DEFAULT_PERMUTATIONS: usize = 999;
/// Strata with fewer samples are pooled into one "other" stratum.
pub const MIN_STRATUM: usize = 5;
pub const MIN_SAMPLES: usize = 10;
const ENSEMBLE_KEY: u64 = u64::MAX - 2;

/// How a single vertex path on `[0, t)` is reduced to a discrete code.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    /// States at the listed times. A time equal to `t` reads the left limit `x(t-)`.
    GridStates(Vec<f64>),
    /// `(bin, jump)` for each of the first `max_jumps` jumps before `t`,
    /// padded with `(0, 0)`. Bin `i` (1-based) is `(edges[i-2], edges[i-1]]`
    /// with an implicit leading edge at 0.
    JumpSignature { max_jumps: usize, edges: Vec<f64> },
}

impl Scheme {
    /// Three grid points: `0`, `t/2` and `t-`.
    pub fn default_grid(t: f64) -> Self {
        Scheme::GridStates(vec![0.0, t / 2.0, t])
    }

    fn validate(&self, t: f64) -> Result<()> {
        match self {
            Scheme::GridStates(grid) => {
                if grid.is_empty() {
                    return Err(Error::input("summary grid is empty"));
                }
                if let Some(g) = grid.iter().find(|g| !(**g >= 0.0 && **g <= t)) {
                    return Err(Error::input(format!("grid time {g} outside [0, {t}]")));
                }
            }
            Scheme::JumpSignature { max_jumps, edges } => {
                if *max_jumps == 0 {
                    return Err(Error::input("max_jumps must be at least 1"));
                }
                let increasing = edges.windows(2).all(|w| w[0] < w[1]);
                if edges.is_empty() || !increasing || edges[0] <= 0.0 || *edges.last().unwrap() < t {
                    return Err(Error::input(format!(
                        "bin edges must be positive, increasing and reach t = {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Discrete code of vertex `v`'s path on `[0, t)`.
pub fn summarize(x: &Trajectory, v: VertexId, scheme: &Scheme, t: f64) -> Result<Vec<i64>> {
    if v >= x.vertex_count() {
        return Err(Error::UnknownVertex(v));
    }
    if !(t > 0.0 && t <= x.horizon()) {
        return Err(Error::input(format!(
            "summary time {t} must lie in (0, {}]",
            x.horizon()
        )));
    }
    scheme.validate(t)?;
    let path = x.vertex_path(v);
    Ok(match scheme {
        Scheme::GridStates(grid) => grid
            .iter()
            .map(|&g| if g < t { path.state_at(g) } else { path.state_before(t) })
            .collect(),
        Scheme::JumpSignature { max_jumps, edges } => {
            let mut code = Vec::with_capacity(2 * max_jumps);
            let mut previous = path.initial();
            for (time, state) in path.events().take_while(|e| e.0 < t).take(*max_jumps) {
                let bin = edges.iter().position(|&e| time <= e).unwrap() + 1;
                code.push(bin as i64);
                code.push(state - previous);
                previous = state;
            }
            code.resize(2 * max_jumps, 0);
            code
        }
    })
}

/// Disjoint vertex blocks of a conditional independence statement `A ⊥ B | S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blocks {
    pub a: VertexSet,
    pub b: VertexSet,
    pub s: VertexSet,
}

impl Blocks {
    pub fn new(a: VertexSet, b: VertexSet, s: VertexSet) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::input("blocks A and B must be nonempty"));
        }
        if !a.is_disjoint(&b) || !a.is_disjoint(&s) || !b.is_disjoint(&s) {
            return Err(Error::input("blocks A, B and S must be disjoint"));
        }
        Ok(Blocks { a, b, s })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiTestReport {
    pub blocks: Blocks,
    pub alpha: Option<usize>,
    /// Plug-in conditional mutual information in nats.
    pub statistic: f64,
    pub p_value: f64,
    pub n_samples: usize,
    pub n_permutations: usize,
    pub n_strata: usize,
    pub level: f64,
    pub reject: bool,
}

/// Encoded data of one test: everything needed to evaluate the statistic
/// under permutation `k` independently of the others.
#[derive(Debug, Clone)]
pub struct CiTestPlan {
    blocks: Blocks,
    seed: u64,
    n_permutations: usize,
    /// Stratum boundaries into the grouped code arrays.
    offsets: Vec<usize>,
    a_codes: Vec<u32>,
    b_codes: Vec<u32>,
    n_a: usize,
    n_b: usize,
    fixed_term: f64,
    observed_joint: f64,
}

fn block_code(rep: &Replicate, block: &VertexSet, scheme: &Scheme, t: f64) -> Result<Vec<i64>> {
    let mut code = Vec::new();
    for v in block.iter() {
        let mark = rep.marks.get(v).ok_or(Error::UnknownVertex(v))?;
        code.push(mark.0);
        code.extend(summarize(&rep.trajectory, v, scheme, t)?);
    }
    Ok(code)
}

fn dense_codes(codes: Vec<Vec<i64>>) -> (Vec<u32>, usize) {
    let mut dictionary: BTreeMap<Vec<i64>, u32> = BTreeMap::new();
    for c in &codes {
        dictionary.entry(c.clone()).or_insert(0);
    }
    for (i, value) in dictionary.values_mut().enumerate() {
        *value = i as u32;
    }
    let dense = codes.iter().map(|c| dictionary[c]).collect();
    (dense, dictionary.len())
}

fn x_ln_x(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * libm::log(n as f64)
    }
}

fn sum_x_ln_x(counts: impl Iterator<Item = usize>) -> f64 {
    counts.map(x_ln_x).sum()
}

impl CiTestPlan {
    pub fn new(
        ensemble: &[Replicate],
        blocks: Blocks,
        scheme: &Scheme,
        t: f64,
        n_permutations: usize,
        seed: u64,
    ) -> Result<Self> {
        let n = ensemble.len();
        if n < MIN_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "{n} samples, need at least {MIN_SAMPLES}"
            )));
        }
        if n_permutations == 0 {
            return Err(Error::input("n_permutations must be at least 1"));
        }
        let mut a_raw = Vec::with_capacity(n);
        let mut b_raw = Vec::with_capacity(n);
        let mut s_raw = Vec::with_capacity(n);
        for rep in ensemble {
            a_raw.push(block_code(rep, &blocks.a, scheme, t)?);
            b_raw.push(block_code(rep, &blocks.b, scheme, t)?);
            s_raw.push(block_code(rep, &blocks.s, scheme, t)?);
        }
        let (a_dense, n_a) = dense_codes(a_raw);
        let (b_dense, n_b) = dense_codes(b_raw);
        let (s_dense, n_s) = dense_codes(s_raw);

        let mut sizes = vec![0usize; n_s];
        for &s in &s_dense {
            sizes[s as usize] += 1;
        }
        // Small strata share the last slot.
        let mut remap = vec![0usize; n_s];
        let mut kept = 0;
        for (s, &size) in sizes.iter().enumerate() {
            if size >= MIN_STRATUM {
                remap[s] = kept;
                kept += 1;
            } else {
                remap[s] = usize::MAX;
            }
        }
        let pooled = sizes.iter().any(|&size| size < MIN_STRATUM);
        let n_strata = kept + usize::from(pooled);
        for r in remap.iter_mut().filter(|r| **r == usize::MAX) {
            *r = kept;
        }
        let strata: Vec<usize> = s_dense.iter().map(|&s| remap[s as usize]).collect();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (strata[i], i));
        let mut offsets = vec![0usize];
        for (pos, w) in order.windows(2).enumerate() {
            if strata[w[0]] != strata[w[1]] {
                offsets.push(pos + 1);
            }
        }
        offsets.push(n);
        debug_assert_eq!(offsets.len(), n_strata + 1);

        let a_codes: Vec<u32> = order.iter().map(|&i| a_dense[i]).collect();
        let b_codes: Vec<u32> = order.iter().map(|&i| b_dense[i]).collect();

        let mut plan = CiTestPlan {
            blocks,
            seed,
            n_permutations,
            offsets,
            a_codes,
            b_codes,
            n_a,
            n_b,
            fixed_term: 0.0,
            observed_joint: 0.0,
        };
        plan.fixed_term = plan.marginal_terms();
        plan.observed_joint = plan.joint_term(&plan.a_codes);
        Ok(plan)
    }

    pub fn n_samples(&self) -> usize {
        self.a_codes.len()
    }

    pub fn n_strata(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_permutations(&self) -> usize {
        self.n_permutations
    }

    fn segments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.offsets.windows(2).map(|w| (w[0], w[1]))
    }

    /// `Σ n_s ln n_s - Σ n_as ln n_as - Σ n_bs ln n_bs`, invariant under the shuffles.
    fn marginal_terms(&self) -> f64 {
        let mut total = 0.0;
        for (lo, hi) in self.segments() {
            total += x_ln_x(hi - lo);
            for (codes, width) in [(&self.a_codes, self.n_a), (&self.b_codes, self.n_b)] {
                let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
                for &c in &codes[lo..hi] {
                    *counts.entry(c).or_insert(0) += 1;
                }
                debug_assert!(counts.len() <= width);
                total -= sum_x_ln_x(counts.into_values());
            }
        }
        total
    }

    /// `Σ n_abs ln n_abs` for the given arrangement of A-codes.
    fn joint_term(&self, a_codes: &[u32]) -> f64 {
        const DENSE_CELLS: usize = 1 << 12;
        let mut total = 0.0;
        if self.n_a * self.n_b <= DENSE_CELLS {
            let mut counts = vec![0usize; self.n_a * self.n_b];
            for (lo, hi) in self.segments() {
                counts.iter_mut().for_each(|c| *c = 0);
                for (&a, &b) in a_codes[lo..hi].iter().zip(&self.b_codes[lo..hi]) {
                    counts[a as usize * self.n_b + b as usize] += 1;
                }
                total += sum_x_ln_x(counts.iter().copied());
            }
            return total;
        }
        let mut keys: Vec<u64> = Vec::new();
        for (lo, hi) in self.segments() {
            keys.clear();
            keys.extend(
                a_codes[lo..hi]
                    .iter()
                    .zip(&self.b_codes[lo..hi])
                    .map(|(&a, &b)| (u64::from(a) << 32) | u64::from(b)),
            );
            keys.sort_unstable();
            let mut run = 1;
            for w in keys.windows(2) {
                if w[0] == w[1] {
                    run += 1;
                } else {
                    total += x_ln_x(run);
                    run = 1;
                }
            }
            if !keys.is_empty() {
                total += x_ln_x(run);
            }
        }
        total
    }

    fn statistic_from_joint(&self, joint: f64) -> f64 {
        ((joint + self.fixed_term) / self.n_samples() as f64).max(0.0)
    }

    pub fn observed(&self) -> f64 {
        self.statistic_from_joint(self.observed_joint)
    }

    /// Statistic after shuffle `k`, drawn from `split(seed, k)`.
    pub fn permuted(&self, k: usize) -> f64 {
        let mut rng = rng::stream(rng::split_seed(self.seed, k as u64));
        let mut shuffled = self.a_codes.clone();
        for (lo, hi) in self.segments() {
            let segment = &mut shuffled[lo..hi];
            if segment.iter().all(|&a| a == segment[0]) {
                continue;
            }
            for i in (1..segment.len()).rev() {
                segment.swap(i, rng::index(&mut rng, i + 1));
            }
        }
        self.statistic_from_joint(self.joint_term(&shuffled))
    }

    /// Combines the permutation statistics (in index order) into a report.
    pub fn finish(&self, permuted: &[f64], level: f64, alpha: Option<usize>) -> Result<CiTestReport> {
        if permuted.len() != self.n_permutations {
            return Err(Error::input(format!(
                "expected {} permutation statistics, got {}",
                self.n_permutations,
                permuted.len()
            )));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::input(format!("level {level} outside (0, 1)")));
        }
        let observed = self.observed();
        let slack = 1e-12 * observed.abs().max(1.0);
        let extreme = permuted.iter().filter(|&&p| p >= observed - slack).count();
        let p_value = (1 + extreme) as f64 / (1 + self.n_permutations) as f64;
        Ok(CiTestReport {
            blocks: self.blocks.clone(),
            alpha,
            statistic: observed,
            p_value,
            n_samples: self.n_samples(),
            n_permutations: self.n_permutations,
            n_strata: self.n_strata(),
            level,
            reject: p_value < level,
        })
    }
}

/// Permutation test of `(ξ_A, X_A) ⊥ (ξ_B, X_B) | (ξ_S, X_S)` on summaries.
pub fn ci_test(
    ensemble: &[Replicate],
    blocks: Blocks,
    scheme: &Scheme,
    t: f64,
    level: f64,
    n_permutations: usize,
    seed: u64,
) -> Result<CiTestReport> {
    let plan = CiTestPlan::new(ensemble, blocks, scheme, t, n_permutations, seed)?;
    let permuted: Vec<f64> = (0..n_permutations).map(|k| plan.permuted(k)).collect();
    plan.finish(&permuted, level, None)
}

/// Every connected `A` with `|A| <= 2`, `S = N^alpha(A)` and nonempty `B = V \ (A ∪ S)`.
pub fn suite_partitions(graph: &Graph, alpha: usize) -> Result<Vec<Blocks>> {
    let mut candidates: Vec<VertexSet> = graph.vertices().map(|v| VertexSet::from([v])).collect();
    candidates.extend(graph.edges().map(|(u, v)| VertexSet::from([u, v])));
    let all = graph.all_vertices();
    let mut out = Vec::new();
    for a in candidates {
        let s = graph.neighborhood(&a, alpha)?;
        let b = all.difference(&a.union(&s));
        if !b.is_empty() {
            out.push(Blocks::new(a, b, s)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub reports: Vec<CiTestReport>,
    pub level: f64,
    /// `level / reports.len()`.
    pub adjusted_level: f64,
    pub reject: bool,
}

impl SuiteReport {
    pub fn from_reports(reports: Vec<CiTestReport>, level: f64) -> Self {
        let adjusted_level = level / reports.len().max(1) as f64;
        let reject = reports.iter().any(|r| r.reject);
        SuiteReport {
            reports,
            level,
            adjusted_level,
            reject,
        }
    }
}

/// Settings shared by every test of a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub alpha: usize,
    pub t: f64,
    pub n_samples: usize,
    pub n_permutations: usize,
    pub level: f64,
    pub scheme: Scheme,
    pub seed: u64,
}

impl SuiteConfig {
    pub fn new(alpha: usize, t: f64, n_samples: usize, seed: u64) -> Self {
        SuiteConfig {
            alpha,
            t,
            n_samples,
            n_permutations: DEFAULT_PERMUTATIONS,
            level: 0.01,
            scheme: Scheme::default_grid(t),
            seed,
        }
    }

    /// Master seed of the simulated ensemble.
    pub fn ensemble_seed(&self) -> u64 {
        rng::split_seed(self.seed, ENSEMBLE_KEY)
    }

    /// Permutation seed of test `i`.
    pub fn test_seed(&self, i: usize) -> u64 {
        rng::split_seed(self.seed, i as u64)
    }
}

pub fn check_product_marks(marks: &MarkSource) -> Result<()> {
    match marks {
        MarkSource::Fixed(_) | MarkSource::Independent(_) => Ok(()),
    }
}

/// Simulates one ensemble and tests every partition of [`suite_partitions`]
/// at the Bonferroni-adjusted level.
pub fn mrf_suite<M: RateModel + ?Sized>(
    graph: &Graph,
    model: &M,
    marks: &MarkSource,
    config: &SuiteConfig,
) -> Result<SuiteReport> {
    check_product_marks(marks)?;
    let partitions = suite_partitions(graph, config.alpha)?;
    if partitions.is_empty() {
        return Ok(SuiteReport::from_reports(Vec::new(), config.level));
    }
    let ensemble = sim::replicate(
        graph,
        marks,
        model,
        config.t,
        &VertexSet::new(),
        config.n_samples,
        config.ensemble_seed(),
    )?;
    let adjusted = config.level / partitions.len() as f64;
    let reports = partitions
        .into_iter()
        .enumerate()
        .map(|(i, blocks)| {
            let plan = CiTestPlan::new(
                &ensemble,
                blocks,
                &config.scheme,
                config.t,
                config.n_permutations,
                config.test_seed(i),
            )?;
            let permuted: Vec<f64> = (0..config.n_permutations).map(|k| plan.permuted(k)).collect();
            plan.finish(&permuted, adjusted, Some(config.alpha))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::from_reports(reports, config.level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Mark;
    use crate::model::{make_counterexample_model, BirthDeath};
    use crate::sim::{Event, MarkDistribution};

    fn one_jump(at: f64) -> Trajectory {
        Trajectory::new(
            1.0,
            vec![0, 0, 0],
            vec![Event {
                time: at,
                vertex: 1,
                jump: 1,
                state: 1,
            }],
        )
        .unwrap()
    }

    #[test]
    fn grid_summaries() {
        let quiet = Trajectory::new(2.0, vec![4], vec![]).unwrap();
        assert_eq!(
            summarize(&quiet, 0, &Scheme::GridStates(vec![0.0, 1.0]), 2.0).unwrap(),
            vec![4, 4]
        );
        let x = one_jump(0.3);
        assert_eq!(
            summarize(&x, 1, &Scheme::GridStates(vec![0.0, 1.0]), 1.0).unwrap(),
            vec![0, 1]
        );
        assert!(summarize(&x, 1, &Scheme::GridStates(vec![0.0, 1.5]), 1.0).is_err());
        assert!(summarize(&x, 1, &Scheme::GridStates(vec![0.0]), 1.5).is_err());
    }

    #[test]
    fn jump_at_t_is_not_seen() {
        let x = one_jump(1.0);
        assert_eq!(
            summarize(&x, 1, &Scheme::GridStates(vec![0.0, 1.0]), 1.0).unwrap(),
            vec![0, 0]
        );
    }

    #[test]
    fn jump_signatures() {
        let scheme = Scheme::JumpSignature {
            max_jumps: 1,
            edges: vec![0.5, 1.0],
        };
        assert_eq!(summarize(&one_jump(0.3), 1, &scheme, 1.0).unwrap(), vec![1, 1]);
        assert_eq!(summarize(&one_jump(0.7), 1, &scheme, 1.0).unwrap(), vec![2, 1]);
        assert_eq!(summarize(&one_jump(0.7), 0, &scheme, 1.0).unwrap(), vec![0, 0]);
        let two = Scheme::JumpSignature {
            max_jumps: 2,
            edges: vec![1.0],
        };
        assert_eq!(summarize(&one_jump(0.7), 1, &two, 1.0).unwrap(), vec![1, 1, 0, 0]);
    }

    #[test]
    fn partitions_of_small_graphs() {
        let parts = suite_partitions(&Graph::path(5), 2).unwrap();
        assert!(parts
            .contains(&Blocks::new(VertexSet::from([0]), VertexSet::from([3, 4]), VertexSet::from([1, 2])).unwrap()));
        assert!(suite_partitions(&Graph::path(5), 4).unwrap().is_empty());
        let p3 = suite_partitions(&Graph::path(3), 1).unwrap();
        assert_eq!(p3.len(), 2);
    }

    #[test]
    fn too_few_samples() {
        let g = Graph::path(2);
        let m = BirthDeath::new(1.0, 1.0).unwrap();
        let ens = sim::replicate(
            &g,
            &MarkSource::Fixed(vec![Mark(0); 2]),
            &m,
            1.0,
            &VertexSet::new(),
            9,
            1,
        )
        .unwrap();
        let blocks = Blocks::new(VertexSet::from([0]), VertexSet::from([1]), VertexSet::new()).unwrap();
        assert!(matches!(
            ci_test(&ens, blocks, &Scheme::default_grid(1.0), 1.0, 0.05, 19, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn p_value_bounds_and_determinism() {
        let g = Graph::new(2, []).unwrap();
        let m = BirthDeath::new(1.0, 2.0).unwrap();
        let marks = MarkSource::Independent(vec![MarkDistribution::bernoulli(0.5).unwrap(); 2]);
        let ens = sim::replicate(&g, &marks, &m, 1.0, &VertexSet::new(), 300, 4).unwrap();
        let blocks = Blocks::new(VertexSet::from([0]), VertexSet::from([1]), VertexSet::new()).unwrap();
        let r1 = ci_test(&ens, blocks.clone(), &Scheme::default_grid(1.0), 1.0, 0.05, 99, 7).unwrap();
        let r2 = ci_test(&ens, blocks, &Scheme::default_grid(1.0), 1.0, 0.05, 99, 7).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.p_value > 0.0 && r1.p_value <= 1.0);
        assert_eq!(r1.reject, r1.p_value < 0.05);
    }

    #[test]
    fn counterexample_is_rejected() {
        let g = Graph::path(3);
        let m = make_counterexample_model();
        let marks = MarkSource::Independent(vec![
            MarkDistribution::bernoulli(0.5).unwrap(),
            MarkDistribution::point(Mark(0)),
            MarkDistribution::bernoulli(0.5).unwrap(),
        ]);
        let mut config = SuiteConfig::new(1, 1.0, 5_000, 11);
        config.n_permutations = 499;
        let suite = mrf_suite(&g, &m, &marks, &config).unwrap();
        assert_eq!(suite.reports.len(), 2);
        assert!(suite.reject);
    }

    #[test]
    fn statistic_matches_direct_plug_in() {
        let g = Graph::path(3);
        let m = make_counterexample_model();
        let marks = MarkSource::Independent(vec![
            MarkDistribution::bernoulli(0.5).unwrap(),
            MarkDistribution::point(Mark(0)),
            MarkDistribution::bernoulli(0.5).unwrap(),
        ]);
        let ens = sim::replicate(&g, &marks, &m, 1.0, &VertexSet::new(), 2_000, 3).unwrap();
        let scheme = Scheme::GridStates(vec![1.0]);
        let blocks = Blocks::new(VertexSet::from([0]), VertexSet::from([2]), VertexSet::from([1])).unwrap();
        let plan = CiTestPlan::new(&ens, blocks.clone(), &scheme, 1.0, 1, 0).unwrap();
        let empirical = crate::oracle::FinitePmf::normalized(ens.iter().map(|r| {
            let mut atom = block_code(r, &blocks.a, &scheme, 1.0).unwrap();
            atom.extend(block_code(r, &blocks.b, &scheme, 1.0).unwrap());
            atom.extend(block_code(r, &blocks.s, &scheme, 1.0).unwrap());
            (atom, 1.0)
        }))
        .unwrap();
        let direct = crate::oracle::conditional_mutual_information(&empirical, &[0, 1], &[2, 3], &[4, 5]);
        assert!((plan.observed() - direct).abs() < 1e-12);
    }
}
