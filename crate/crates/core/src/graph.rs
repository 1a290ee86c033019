//! Finite simple graphs with per-vertex marks.
//!
//! Vertex ids are dense: a graph on `n` vertices has ids `0..n`. Adjacency
//! lists are kept sorted, and the closure of every vertex is precomputed in
//! the order `[v, neighbors of v ascending]`, which is the order models see
//! through [`crate::model::LocalView`].

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{Error, Result};

pub type VertexId = usize;

/// Opaque per-vertex initial data. Models interpret it; the graph only stores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mark(pub i64);

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Ordered set of vertex ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexSet(BTreeSet<VertexId>);

impl VertexSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.0.contains(&v)
    }

    pub fn insert(&mut self, v: VertexId) -> bool {
        self.0.insert(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = VertexId> + '_ {
        self.0.iter().copied()
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        self.0.union(&other.0).copied().collect()
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        self.0.difference(&other.0).copied().collect()
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn to_vec(&self) -> Vec<VertexId> {
        self.iter().collect()
    }
}

impl FromIterator<VertexId> for VertexSet {
    fn from_iter<I: IntoIterator<Item = VertexId>>(iter: I) -> Self {
        VertexSet(iter.into_iter().collect())
    }
}

impl<const N: usize> From<[VertexId; N]> for VertexSet {
    fn from(ids: [VertexId; N]) -> Self {
        ids.into_iter().collect()
    }
}

impl From<&[VertexId]> for VertexSet {
    fn from(ids: &[VertexId]) -> Self {
        ids.iter().copied().collect()
    }
}

/// Undirected simple graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<VertexId>>,
    closures: Vec<Vec<VertexId>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate edges and unknown endpoints.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (VertexId, VertexId)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for (a, b) in edges {
            if a >= n {
                return Err(Error::UnknownVertex(a));
            }
            if b >= n {
                return Err(Error::UnknownVertex(b));
            }
            if a == b {
                return Err(Error::input(alloc::format!("self-loop at vertex {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::input(alloc::format!("duplicate edge {{{a}, {b}}}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let closures = adjacency
            .iter()
            .enumerate()
            .map(|(v, nbrs)| {
                let mut c = Vec::with_capacity(nbrs.len() + 1);
                c.push(v);
                c.extend_from_slice(nbrs);
                c
            })
            .collect();
        Ok(Graph {
            adjacency,
            closures,
            edge_count: seen.len(),
        })
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|v| (v - 1, v))).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a simple cycle needs at least 3 vertices");
        Self::new(n, (0..n).map(|v| (v, (v + 1) % n))).expect("cycle edges are valid")
    }

    /// `width × height` grid, vertex `(x, y)` has id `y * width + x`.
    pub fn grid(width: usize, height: usize) -> Self {
        let mut edges = Vec::new();
        for y in 0..height {
            for x in 0..width {
                let v = y * width + x;
                if x + 1 < width {
                    edges.push((v, v + 1));
                }
                if y + 1 < height {
                    edges.push((v, v + width));
                }
            }
        }
        Self::new(width * height, edges).expect("grid edges are valid")
    }

    /// Complete `branching`-ary tree of the given depth, root 0, breadth-first ids.
    pub fn tree(branching: usize, depth: usize) -> Self {
        let mut edges = Vec::new();
        let mut frontier = vec![0usize];
        let mut next_id = 1;
        for _ in 0..depth {
            let mut next = Vec::new();
            for &parent in &frontier {
                for _ in 0..branching {
                    edges.push((parent, next_id));
                    next.push(next_id);
                    next_id += 1;
                }
            }
            frontier = next;
        }
        Self::new(next_id, edges).expect("tree edges are valid")
    }

    pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.random::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        Self::new(n, edges).expect("generated edges are valid")
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn vertices(&self) -> core::ops::Range<VertexId> {
        0..self.len()
    }

    pub fn all_vertices(&self) -> VertexSet {
        self.vertices().collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, nbrs)| nbrs.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v].len()
    }

    /// `[v, neighbors...]` for a single vertex.
    pub fn closure_of(&self, v: VertexId) -> &[VertexId] {
        &self.closures[v]
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        a < self.len() && self.adjacency[a].binary_search(&b).is_ok()
    }

    fn check(&self, set: &VertexSet) -> Result<()> {
        match set.iter().find(|&v| v >= self.len()) {
            Some(v) => Err(Error::UnknownVertex(v)),
            None => Ok(()),
        }
    }

    /// Multi-source BFS distances; `None` for unreachable vertices.
    pub fn distances_from(&self, sources: &VertexSet) -> Result<Vec<Option<usize>>> {
        self.check(sources)?;
        let mut dist = vec![None; self.len()];
        let mut queue = VecDeque::new();
        for v in sources.iter() {
            dist[v] = Some(0);
            queue.push_back(v);
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for &w in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    /// Vertices outside `u` within graph distance `alpha` of `u`.
    pub fn neighborhood(&self, u: &VertexSet, alpha: usize) -> Result<VertexSet> {
        if alpha == 0 {
            return Err(Error::input("alpha must be at least 1"));
        }
        let dist = self.distances_from(u)?;
        Ok(dist
            .iter()
            .enumerate()
            .filter(|(_, d)| matches!(d, Some(d) if *d >= 1 && *d <= alpha))
            .map(|(v, _)| v)
            .collect())
    }

    pub fn closure(&self, u: &VertexSet) -> Result<VertexSet> {
        Ok(u.union(&self.neighborhood(u, 1)?))
    }

    /// All vertices at distance at most `n` from `root`, root included.
    pub fn ball(&self, root: VertexId, n: usize) -> Result<VertexSet> {
        if root >= self.len() {
            return Err(Error::UnknownVertex(root));
        }
        let dist = self.distances_from(&VertexSet::from([root]))?;
        Ok(dist
            .iter()
            .enumerate()
            .filter(|(_, d)| matches!(d, Some(d) if *d <= n))
            .map(|(v, _)| v)
            .collect())
    }

    /// Largest finite distance between two vertices (0 for the empty graph).
    pub fn diameter(&self) -> usize {
        self.vertices()
            .map(|v| {
                self.distances_from(&VertexSet::from([v]))
                    .expect("vertex in range")
                    .into_iter()
                    .flatten()
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    /// Whether every simple path from `a` to `b` contains `alpha` consecutive
    /// vertices of `s`.
    ///
    /// A breadth-first search over `(vertex, current run in s)` first looks for any
    /// walk that avoids a run of length `alpha`. If none exists, no simple path
    /// does either. Otherwise the walk may only exist because it revisits a vertex
    /// to reset its run, so the answer is settled by an exact depth-first search
    /// over simple paths.
    pub fn alpha_separates(&self, s: &VertexSet, a: &VertexSet, b: &VertexSet, alpha: usize) -> Result<bool> {
        if alpha == 0 {
            return Err(Error::input("alpha must be at least 1"));
        }
        self.check(s)?;
        self.check(a)?;
        self.check(b)?;
        if !s.is_disjoint(a) || !s.is_disjoint(b) || !a.is_disjoint(b) {
            return Err(Error::input("separator and blocks must be pairwise disjoint"));
        }
        if !self.walk_escapes(s, a, b, alpha) {
            return Ok(true);
        }
        let mut on_path = vec![false; self.len()];
        for start in a.iter() {
            on_path[start] = true;
            let escaped = self.simple_path_escapes(start, 0, s, b, alpha, &mut on_path);
            on_path[start] = false;
            if escaped {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn walk_escapes(&self, s: &VertexSet, a: &VertexSet, b: &VertexSet, alpha: usize) -> bool {
        // run lengths stay in 0..alpha
        let mut seen = vec![false; self.len() * alpha];
        let mut queue = VecDeque::new();
        for v in a.iter() {
            seen[v * alpha] = true;
            queue.push_back((v, 0usize));
        }
        while let Some((v, run)) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if b.contains(w) {
                    return true;
                }
                let next = if s.contains(w) { run + 1 } else { 0 };
                if next >= alpha {
                    continue;
                }
                let idx = w * alpha + next;
                if !seen[idx] {
                    seen[idx] = true;
                    queue.push_back((w, next));
                }
            }
        }
        false
    }

    fn simple_path_escapes(
        &self,
        v: VertexId,
        run: usize,
        s: &VertexSet,
        b: &VertexSet,
        alpha: usize,
        on_path: &mut [bool],
    ) -> bool {
        for &w in &self.adjacency[v] {
            if on_path[w] {
                continue;
            }
            if b.contains(w) {
                return true;
            }
            let next = if s.contains(w) { run + 1 } else { 0 };
            if next >= alpha {
                continue;
            }
            on_path[w] = true;
            let escaped = self.simple_path_escapes(w, next, s, b, alpha, on_path);
            on_path[w] = false;
            if escaped {
                return true;
            }
        }
        false
    }

    /// Induced subgraph on `keep`, renumbered densely in ascending id order.
    /// Returns the subgraph and the original id of each new vertex.
    pub fn induced_subgraph(&self, keep: &VertexSet) -> Result<(Graph, Vec<VertexId>)> {
        self.check(keep)?;
        let originals = keep.to_vec();
        let mut new_id = vec![usize::MAX; self.len()];
        for (i, &v) in originals.iter().enumerate() {
            new_id[v] = i;
        }
        let edges = self
            .edges()
            .filter(|&(a, b)| keep.contains(a) && keep.contains(b))
            .map(|(a, b)| (new_id[a], new_id[b]));
        Ok((Graph::new(originals.len(), edges)?, originals))
    }

    /// Whether the induced subgraph on `set` is connected (false for the empty set).
    pub fn is_connected_set(&self, set: &VertexSet) -> bool {
        let Some(first) = set.iter().next() else {
            return false;
        };
        let mut seen = VertexSet::from([first]);
        let mut stack = vec![first];
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if set.contains(w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == set.len()
    }
}

/// A graph together with its per-vertex marks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedGraph {
    graph: Graph,
    marks: Vec<Mark>,
}

impl MarkedGraph {
    pub fn new(graph: Graph, marks: Vec<Mark>) -> Result<Self> {
        if marks.len() != graph.len() {
            return Err(Error::input(alloc::format!(
                "{} marks for {} vertices",
                marks.len(),
                graph.len()
            )));
        }
        Ok(MarkedGraph { graph, marks })
    }

    /// Every vertex gets the same mark.
    pub fn uniform(graph: Graph, mark: Mark) -> Self {
        let marks = vec![mark; graph.len()];
        MarkedGraph { graph, marks }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn mark(&self, v: VertexId) -> Mark {
        self.marks[v]
    }

    pub fn into_parts(self) -> (Graph, Vec<Mark>) {
        (self.graph, self.marks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn set(ids: &[usize]) -> VertexSet {
        VertexSet::from(ids)
    }

    /// Brute force: enumerate every simple path from a to b.
    fn separates_by_enumeration(g: &Graph, s: &VertexSet, a: &VertexSet, b: &VertexSet, alpha: usize) -> bool {
        fn walk(g: &Graph, path: &mut Vec<usize>, b: &VertexSet, out: &mut Vec<Vec<usize>>) {
            let v = *path.last().unwrap();
            if b.contains(v) {
                out.push(path.clone());
                return;
            }
            for &w in g.neighbors(v) {
                if !path.contains(&w) {
                    path.push(w);
                    walk(g, path, b, out);
                    path.pop();
                }
            }
        }
        let mut paths = Vec::new();
        for start in a.iter() {
            walk(g, &mut alloc::vec![start], b, &mut paths);
        }
        paths.iter().all(|p| {
            let mut run = 0;
            p.iter().any(|&v| {
                run = if s.contains(v) { run + 1 } else { 0 };
                run >= alpha
            })
        })
    }

    #[test]
    fn neighborhood_examples() {
        let g = Graph::path(5);
        assert_eq!(g.neighborhood(&set(&[0]), 1).unwrap(), set(&[1]));
        assert_eq!(g.neighborhood(&set(&[0]), 2).unwrap(), set(&[1, 2]));
        assert!(g.neighborhood(&g.all_vertices(), 3).unwrap().is_empty());
        assert_eq!(g.neighborhood(&set(&[7]), 1), Err(Error::UnknownVertex(7)));
        assert!(g.neighborhood(&set(&[0]), 0).is_err());
    }

    #[test]
    fn closure_examples() {
        assert_eq!(Graph::path(3).closure(&set(&[1])).unwrap(), set(&[0, 1, 2]));
        let isolated = Graph::new(2, []).unwrap();
        assert_eq!(isolated.closure(&set(&[1])).unwrap(), set(&[1]));
        assert_eq!(Graph::cycle(3).closure(&set(&[0])).unwrap(), set(&[0, 1, 2]));
        assert_eq!(Graph::path(3).closure_of(1), &[1, 0, 2]);
    }

    #[test]
    fn ball_examples() {
        let g = Graph::path(5);
        assert_eq!(g.ball(2, 0).unwrap(), set(&[2]));
        assert_eq!(g.ball(2, 1).unwrap(), set(&[1, 2, 3]));
        assert_eq!(g.ball(2, 10).unwrap(), g.all_vertices());
        let two_parts = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(two_parts.ball(0, 10).unwrap(), set(&[0, 1]));
        assert_eq!(g.ball(9, 1), Err(Error::UnknownVertex(9)));
    }

    #[test]
    fn alpha_separation_examples() {
        let p = Graph::path(5);
        assert!(p.alpha_separates(&set(&[1, 2]), &set(&[0]), &set(&[3, 4]), 2).unwrap());
        assert!(!p.alpha_separates(&set(&[2]), &set(&[0]), &set(&[4]), 2).unwrap());

        // cycle 1..6 relabelled 0..5: s = {2,6} -> {1,5}, a = {1} -> {0}, b = {4} -> {3}
        let c = Graph::cycle(6);
        let (s, a, b) = (set(&[1, 5]), set(&[0]), set(&[3]));
        assert!(separates_by_enumeration(&c, &s, &a, &b, 1));
        assert!(c.alpha_separates(&s, &a, &b, 1).unwrap());

        assert!(p.alpha_separates(&set(&[1]), &set(&[1]), &set(&[3]), 1).is_err());
    }

    #[test]
    fn walk_reset_does_not_fool_separation() {
        // a - s1 - w - s2 - b with a dead-end c hanging off w; all of s1, w, s2 in S.
        // A walk a,s1,w,c,w,s2,b dodges a run of 3 but no simple path does.
        let (a, s1, w, s2, b, c) = (0, 1, 2, 3, 4, 5);
        let g = Graph::new(6, [(a, s1), (s1, w), (w, s2), (s2, b), (w, c)]).unwrap();
        let s = set(&[s1, w, s2]);
        assert!(g.walk_escapes(&s, &set(&[a]), &set(&[b]), 3));
        assert!(g.alpha_separates(&s, &set(&[a]), &set(&[b]), 3).unwrap());
        assert!(separates_by_enumeration(&g, &s, &set(&[a]), &set(&[b]), 3));
    }

    #[test]
    fn induced_subgraph_renumbers() {
        let g = Graph::path(5);
        let (sub, orig) = g.induced_subgraph(&set(&[1, 2, 4])).unwrap();
        assert_eq!(orig, [1, 2, 4]);
        assert_eq!(sub.edges().collect::<Vec<_>>(), [(0, 1)]);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::new(3, [(0, 0)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
        assert_eq!(Graph::new(3, [(0, 3)]), Err(Error::UnknownVertex(3)));
    }

    #[test]
    fn builders() {
        assert_eq!(Graph::grid(3, 2).edge_count(), 7);
        assert_eq!(Graph::tree(2, 2).len(), 7);
        assert_eq!(Graph::cycle(6).diameter(), 3);
        let mut rng = crate::rng::stream(3);
        let er = Graph::erdos_renyi(10, 1.0, &mut rng);
        assert_eq!(er.edge_count(), 45);
    }

    fn small_graph() -> impl Strategy<Value = Graph> {
        (2usize..8).prop_flat_map(|n| {
            proptest::collection::vec(proptest::bool::weighted(0.35), n * (n - 1) / 2).prop_map(move |bits| {
                let mut edges = Vec::new();
                let mut k = 0;
                for a in 0..n {
                    for b in (a + 1)..n {
                        if bits[k] {
                            edges.push((a, b));
                        }
                        k += 1;
                    }
                }
                Graph::new(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn neighborhood_properties(g in small_graph(), seed in any::<u64>(), a1 in 1usize..4, a2 in 1usize..4) {
            let u: VertexSet = g.vertices().filter(|v| (seed >> v) & 1 == 1).collect();
            let (lo, hi) = (a1.min(a2), a1.max(a2));
            let n_lo = g.neighborhood(&u, lo).unwrap();
            let n_hi = g.neighborhood(&u, hi).unwrap();
            prop_assert!(n_lo.is_disjoint(&u));
            prop_assert!(n_lo.is_subset(&n_hi));
        }

        #[test]
        fn ball_recursion(g in small_graph(), n in 1usize..5) {
            let prev = g.ball(0, n - 1).unwrap();
            let grown = prev.union(&g.neighborhood(&prev, 1).unwrap());
            prop_assert_eq!(g.ball(0, n).unwrap(), grown);
        }

        #[test]
        fn neighborhood_separates_rest(g in small_graph(), seed in any::<u64>(), alpha in 1usize..4) {
            let a: VertexSet = g.vertices().filter(|v| (seed >> v) & 1 == 1).collect();
            prop_assume!(!a.is_empty());
            let s = g.neighborhood(&a, alpha).unwrap();
            let b = g.all_vertices().difference(&a.union(&s));
            prop_assert!(g.alpha_separates(&s, &a, &b, alpha).unwrap());
        }

        #[test]
        fn separation_matches_enumeration(g in small_graph(), seed in any::<u64>(), alpha in 1usize..4) {
            let n = g.len();
            // assign each vertex to a, b, s or nothing from two seed bits
            let role = |v: usize| (seed >> (2 * v)) & 3;
            let a: VertexSet = (0..n).filter(|&v| role(v) == 0).collect();
            let b: VertexSet = (0..n).filter(|&v| role(v) == 1).collect();
            let s: VertexSet = (0..n).filter(|&v| role(v) == 2).collect();
            prop_assert_eq!(
                g.alpha_separates(&s, &a, &b, alpha).unwrap(),
                separates_by_enumeration(&g, &s, &a, &b, alpha)
            );
        }
    }
}
