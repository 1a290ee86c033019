use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Mark;
use crate::rng::StreamRng;

/// Finite distribution of a single vertex mark.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkDistribution {
    atoms: Vec<(Mark, f64)>,
}

impl MarkDistribution {
    pub fn new(atoms: Vec<(Mark, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::input("a mark distribution needs at least one atom"));
        }
        if atoms.iter().any(|&(_, p)| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::input("mark probabilities must be finite and nonnegative"));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("mark probabilities sum to {total}, not 1")));
        }
        Ok(MarkDistribution { atoms })
    }

    pub fn point(mark: Mark) -> Self {
        MarkDistribution {
            atoms: vec![(mark, 1.0)],
        }
    }

    /// Mark 1 with probability `p`, mark 0 otherwise.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::input(format!("Bernoulli parameter {p} outside [0, 1]")));
        }
        Self::new(vec![(Mark(0), 1.0 - p), (Mark(1), p)])
    }

    pub fn atoms(&self) -> &[(Mark, f64)] {
        &self.atoms
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Mark {
        use rand::Rng;
        if self.atoms.len() == 1 {
            return self.atoms[0].0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(m, p) in &self.atoms {
            acc += p;
            if u < acc {
                return m;
            }
        }
        self.atoms.last().unwrap().0
    }
}

/// Where the marks of a replicate come from: fixed, or an independent product.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkSource {
    Fixed(Vec<Mark>),
    Independent(Vec<MarkDistribution>),
}

impl MarkSource {
    pub fn len(&self) -> usize {
        match self {
            MarkSource::Fixed(m) => m.len(),
            MarkSource::Independent(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Vec<Mark> {
        match self {
            MarkSource::Fixed(m) => m.clone(),
            MarkSource::Independent(d) => d.iter().map(|dist| dist.sample(rng)).collect(),
        }
    }

    /// Exact joint law of the marks as `(marks, probability)` pairs.
    /// Atoms with zero probability are dropped.
    pub fn joint(&self) -> Vec<(Vec<Mark>, f64)> {
        match self {
            MarkSource::Fixed(m) => vec![(m.clone(), 1.0)],
            MarkSource::Independent(dists) => {
                let mut out: Vec<(Vec<Mark>, f64)> = vec![(Vec::new(), 1.0)];
                for d in dists {
                    out = out
                        .into_iter()
                        .flat_map(|(prefix, p)| {
                            d.atoms().iter().filter(|a| a.1 > 0.0).map(move |&(m, q)| {
                                let mut next = prefix.clone();
                                next.push(m);
                                (next, p * q)
                            })
                        })
                        .collect();
                }
                out
            }
        }
    }
}
