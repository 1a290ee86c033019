//! Rayon drivers over the per-index work units of `ips-core`.
//!
//! Every driver maps indices to results and collects them in index order, so
//! outputs do not depend on the number of threads.

use ips_core::girsanov::{importance_sample, martingale_sample, summarize_martingale, MartingalePoint};
use ips_core::mrftest::{suite_partitions, CiTestPlan, CiTestReport, SuiteConfig, SuiteReport};
use ips_core::sim::{simulate_replicate, MarkSource, Replicate};
use ips_core::stats::MeanEstimate;
use ips_core::{Error, Graph, Mark, RateModel, Result, Trajectory, VertexSet};
use rayon::prelude::*;

/// Runs `f` on a pool of `threads` workers, or rayon's default when `None`.
pub fn install<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .expect("thread pool");
    pool.install(f)
}

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
        return Err(Error::Input("n_reps must be at least 1".into()));
    }
    (0..n_reps as u64)
        .into_par_iter()
        .map(|k| simulate_replicate(graph, marks, model, horizon, frozen, master_seed, k))
        .collect()
}

/// Plain Monte Carlo mean of `f` over target-process replicates on `[0, horizon)`.
pub fn direct_estimate<M, F>(
    graph: &Graph,
    marks: &MarkSource,
    model: &M,
    horizon: f64,
    f: &F,
    n_reps: usize,
    master_seed: u64,
) -> Result<MeanEstimate>
where
    M: RateModel + ?Sized,
    F: Fn(&[Mark], &Trajectory) -> f64 + Sync + ?Sized,
{
    let values: Vec<f64> = (0..n_reps as u64)
        .into_par_iter()
        .map(|k| {
            let rep = simulate_replicate(graph, marks, model, horizon, &VertexSet::new(), master_seed, k)?;
            Ok(f(&rep.marks, &rep.trajectory.truncated_before(horizon)))
        })
        .collect::<Result<_>>()?;
    Ok(MeanEstimate::from_samples(&values))
}

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
    F: Fn(&[Mark], &Trajectory) -> f64 + Sync + ?Sized,
{
    if n_reps < 2 {
        return Err(Error::Input("importance sampling needs at least 2 replicates".into()));
    }
    let values: Vec<f64> = (0..n_reps as u64)
        .into_par_iter()
        .map(|k| importance_sample(model, graph, marks, w, horizon, f, seed, k))
        .collect::<Result<_>>()?;
    Ok(MeanEstimate::from_samples(&values))
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
    let samples: Vec<Vec<f64>> = (0..n_reps as u64)
        .into_par_iter()
        .map(|k| martingale_sample(model, graph, marks, w, grid, seed, k))
        .collect::<Result<_>>()?;
    Ok(summarize_martingale(grid, &samples))
}

pub fn run_plan(plan: &CiTestPlan, level: f64, alpha: Option<usize>) -> Result<CiTestReport> {
    let permuted: Vec<f64> = (0..plan.n_permutations())
        .into_par_iter()
        .map(|k| plan.permuted(k))
        .collect();
    plan.finish(&permuted, level, alpha)
}

/// Same report as [`ips_core::mrftest::mrf_suite`], computed in parallel.
pub fn mrf_suite<M: RateModel + ?Sized>(
    graph: &Graph,
    model: &M,
    marks: &MarkSource,
    config: &SuiteConfig,
) -> Result<SuiteReport> {
    ips_core::mrftest::check_product_marks(marks)?;
    let partitions = suite_partitions(graph, config.alpha)?;
    if partitions.is_empty() {
        return Ok(SuiteReport::from_reports(Vec::new(), config.level));
    }
    let ensemble = replicate(
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
            run_plan(&plan, adjusted, Some(config.alpha))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::from_reports(reports, config.level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ips_core::model::{make_counterexample_model, Contact};
    use ips_core::sim::MarkDistribution;

    #[test]
    fn replicates_match_sequential() {
        let g = Graph::path(4);
        let m = Contact::new(1.5, 1.0).unwrap();
        let marks = MarkSource::Independent(vec![MarkDistribution::bernoulli(0.5).unwrap(); 4]);
        let seq = ips_core::sim::replicate(&g, &marks, &m, 1.0, &VertexSet::new(), 50, 3).unwrap();
        for threads in [1, 3] {
            let par = install(Some(threads), || {
                replicate(&g, &marks, &m, 1.0, &VertexSet::new(), 50, 3)
            })
            .unwrap();
            assert_eq!(par, seq);
        }
    }

    #[test]
    fn suite_matches_sequential() {
        let g = Graph::path(3);
        let m = make_counterexample_model();
        let marks = MarkSource::Independent(vec![
            MarkDistribution::bernoulli(0.5).unwrap(),
            MarkDistribution::point(Mark(0)),
            MarkDistribution::bernoulli(0.5).unwrap(),
        ]);
        let mut config = SuiteConfig::new(1, 1.0, 500, 9);
        config.n_permutations = 49;
        let seq = ips_core::mrftest::mrf_suite(&g, &m, &marks, &config).unwrap();
        let par = install(Some(4), || mrf_suite(&g, &m, &marks, &config)).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn importance_matches_sequential() {
        let g = Graph::path(3);
        let m = Contact::new(1.5, 1.0).unwrap();
        let marks = MarkSource::Fixed(vec![Mark(1), Mark(0), Mark(0)]);
        let w = VertexSet::from([1]);
        let f = |_: &[Mark], x: &Trajectory| f64::from(x.state_before(1, 1.0) == 1);
        let seq = ips_core::girsanov::importance_estimate(&m, &g, &marks, &w, 1.0, &f, 200, 5).unwrap();
        let par = install(Some(2), || importance_estimate(&m, &g, &marks, &w, 1.0, &f, 200, 5)).unwrap();
        assert_eq!(par, seq);
    }
}
