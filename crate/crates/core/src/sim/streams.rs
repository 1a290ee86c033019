use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::model::{Jump, JumpSet, RateModel};
use crate::rng::{self, StreamRng};

/// Driving Poisson processes restricted to `(0, T] × (0, B_v] × J`.
///
/// Vertex `v` owns an independent ChaCha8 stream seeded by
/// `split_seed(seed, key_v)`. Candidates arrive at total rate `|J| · B_v`, each
/// with a uniform mark in `J` and a uniform thinning level in `(0, B_v]`.
/// Keys default to vertex ids, so induced subgraphs can reuse the parent's
/// streams by carrying the original ids along.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonStreams {
    seed: u64,
    keys: Vec<u64>,
    bounds: Vec<f64>,
}

impl PoissonStreams {
    /// `B_v = max(C(|cl v|, T), 1)`; the floor of 1 lets one set of streams
    /// drive both the target and any reference process.
    pub fn for_model<M: RateModel + ?Sized>(seed: u64, graph: &Graph, model: &M, horizon: f64) -> Result<Self> {
        let bounds = graph
            .vertices()
            .map(|v| {
                let c = model.rate_bound(graph.closure_of(v).len(), horizon);
                if c.is_finite() && c >= 0.0 {
                    Ok(c.max(1.0))
                } else {
                    Err(Error::contract(format!("rate bound at vertex {v} is {c}")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(PoissonStreams {
            seed,
            keys: graph.vertices().map(|v| v as u64).collect(),
            bounds,
        })
    }

    pub fn from_parts(seed: u64, keys: Vec<u64>, bounds: Vec<f64>) -> Result<Self> {
        if keys.len() != bounds.len() {
            return Err(Error::input("one bound per stream key is required"));
        }
        if let Some(b) = bounds.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::input(format!("invalid stream bound {b}")));
        }
        Ok(PoissonStreams { seed, keys, bounds })
    }

    /// Same streams with every thinning bound multiplied by `factor >= 1`.
    pub fn with_bound_factor(mut self, factor: f64) -> Self {
        assert!(factor >= 1.0);
        for b in &mut self.bounds {
            *b *= factor;
        }
        self
    }

    /// Streams for the induced subgraph whose vertex `i` was `originals[i]` here.
    pub fn restrict(&self, originals: &[VertexId]) -> Self {
        PoissonStreams {
            seed: self.seed,
            keys: originals.iter().map(|&v| self.keys[v]).collect(),
            bounds: originals.iter().map(|&v| self.bounds[v]).collect(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn bound(&self, v: VertexId) -> f64 {
        self.bounds[v]
    }

    pub fn candidates<'j>(&self, v: VertexId, jumps: &'j JumpSet, horizon: f64) -> Candidates<'j> {
        let bound = self.bounds[v];
        Candidates {
            rng: rng::stream(rng::split_seed(self.seed, self.keys[v])),
            jumps,
            bound,
            rate: bound * jumps.len() as f64,
            horizon,
            time: 0.0,
            draws: 0,
        }
    }
}

/// One candidate point of a driving process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub time: f64,
    /// Thinning level in `(0, B_v]`.
    pub level: f64,
    pub jump: Jump,
    /// Position of this point in its vertex stream.
    pub draw: u64,
}

/// Lazily generated candidates of one vertex, in increasing time, up to the horizon.
#[derive(Debug, Clone)]
pub struct Candidates<'j> {
    rng: StreamRng,
    jumps: &'j JumpSet,
    bound: f64,
    rate: f64,
    horizon: f64,
    time: f64,
    draws: u64,
}

impl Iterator for Candidates<'_> {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        if self.rate <= 0.0 || self.time > self.horizon {
            return None;
        }
        self.time += rng::exponential(&mut self.rng, self.rate);
        if self.time > self.horizon {
            return None;
        }
        let jumps = self.jumps.as_slice();
        let jump = jumps[rng::index(&mut self.rng, jumps.len())];
        let level = self.bound * rng::uniform_open_closed(&mut self.rng);
        let draw = self.draws;
        self.draws += 1;
        Some(Candidate {
            time: self.time,
            level,
            jump,
            draw,
        })
    }
}
