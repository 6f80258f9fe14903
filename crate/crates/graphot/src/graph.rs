//! Undirected connected graphs with a doubled oriented edge set, the
//! incidence operator `D`, hop distances, and probability distributions
//! over vertices.
//!
//! Undirected edge `i` (as listed in the input) yields two oriented edges
//! in a fixed canonical order: id `2i` is the forward orientation (as
//! stored) and `2i+1` its reverse. Flow files and flow vectors are always
//! indexed in this order, so outputs are bit-reproducible.

use crate::error::{GraphotError, Result};

/// Distributions whose total mass deviates from 1 by at most this much
/// are silently renormalized (with a warning); larger deviations error.
pub const MASS_RENORMALIZE_TOLERANCE: f64 = 1e-4;

/// An immutable undirected connected graph with unit edge lengths.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    oriented: Vec<(usize, usize)>,
    /// Oriented edge ids with tail `v`.
    out_edges: Vec<Vec<usize>>,
    /// Oriented edge ids with head `v`.
    in_edges: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds and validates a graph from an undirected edge list.
    ///
    /// Rejects self-loops, duplicate undirected edges, out-of-range
    /// endpoints, and disconnected graphs.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(GraphotError::Validation("graph needs at least one vertex".into()));
        }
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for &(u, v) in &edges {
            if u >= n {
                return Err(GraphotError::IndexOutOfRange { index: u, size: n });
            }
            if v >= n {
                return Err(GraphotError::IndexOutOfRange { index: v, size: n });
            }
            if u == v {
                return Err(GraphotError::Validation(format!("self-loop at vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(GraphotError::Validation(format!("duplicate edge ({u}, {v})")));
            }
        }

        let mut oriented = Vec::with_capacity(2 * edges.len());
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (i, &(u, v)) in edges.iter().enumerate() {
            oriented.push((u, v));
            oriented.push((v, u));
            out_edges[u].push(2 * i);
            in_edges[v].push(2 * i);
            out_edges[v].push(2 * i + 1);
            in_edges[u].push(2 * i + 1);
        }

        let g = Graph { n, edges, oriented, out_edges, in_edges };
        if let Some(v) = g.first_unreachable(0) {
            return Err(GraphotError::Disconnected(format!(
                "vertex {v} is not reachable from vertex 0"
            )));
        }
        Ok(g)
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of oriented edges, `2|E|`.
    pub fn num_oriented_edges(&self) -> usize {
        self.oriented.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Oriented edges in canonical order (edge index, forward then backward).
    pub fn oriented_edges(&self) -> &[(usize, usize)] {
        &self.oriented
    }

    /// The reverse of oriented edge `e` (pairs share an undirected edge).
    pub fn reverse_edge(&self, e: usize) -> usize {
        e ^ 1
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.out_edges[v].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    fn first_unreachable(&self, source: usize) -> Option<usize> {
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::new();
        seen[source] = true;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for &e in &self.out_edges[v] {
                let w = self.oriented[e].1;
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.iter().position(|&s| !s)
    }

    /// Hop distances from `source` to every vertex (breadth-first search).
    pub fn shortest_path_distances(&self, source: usize) -> Result<Vec<usize>> {
        if source >= self.n {
            return Err(GraphotError::IndexOutOfRange { index: source, size: self.n });
        }
        Ok(self.bfs_from(&[source]))
    }

    /// Hop distance to the nearest of `sources` for every vertex.
    /// Vertices with no source (impossible on a connected graph with a
    /// nonempty source set) would keep `usize::MAX`.
    pub fn multi_source_distances(&self, sources: &[usize]) -> Vec<usize> {
        self.bfs_from(sources)
    }

    fn bfs_from(&self, sources: &[usize]) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = std::collections::VecDeque::new();
        for &s in sources {
            if dist[s] != 0 {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &e in &self.out_edges[v] {
                let w = self.oriented[e].1;
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// All-pairs hop distances via one BFS per source.
    pub fn all_pairs_distances(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|v| self.bfs_from(&[v])).collect()
    }

    /// Applies the transposed incidence operator: `(DᵀJ)(v)` is the net
    /// inflow of `J` at `v`. Entries of the result sum to zero.
    pub fn apply_divergence(&self, flow: &FlowField) -> Result<Vec<f64>> {
        if flow.len() != self.oriented.len() {
            return Err(GraphotError::ShapeMismatch {
                expected: self.oriented.len(),
                actual: flow.len(),
            });
        }
        Ok(self.divergence_raw(flow.values()))
    }

    /// `DᵀJ` for a raw (possibly signed) oriented-edge vector.
    pub fn divergence_raw(&self, j: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (e, &(v, w)) in self.oriented.iter().enumerate() {
            out[v] -= j[e];
            out[w] += j[e];
        }
        out
    }

    /// `Dp` for a raw vertex vector: `(Dp)(v→w) = p(w) − p(v)`.
    pub fn gradient_raw(&self, p: &[f64]) -> Vec<f64> {
        self.oriented.iter().map(|&(v, w)| p[w] - p[v]).collect()
    }
}

/// The sparse linear map `D` from vertex vectors to oriented-edge vectors;
/// the row for `(v→w)` has `−1` at `v` and `+1` at `w`.
#[derive(Debug, Clone, Copy)]
pub struct IncidenceOperator<'g> {
    graph: &'g Graph,
}

impl<'g> IncidenceOperator<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        IncidenceOperator { graph }
    }

    /// `Dp`, indexed by the canonical oriented-edge order.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.graph.n {
            return Err(GraphotError::ShapeMismatch { expected: self.graph.n, actual: p.len() });
        }
        Ok(self.graph.gradient_raw(p))
    }

    /// `DᵀJ`, indexed by vertex.
    pub fn apply_transpose(&self, j: &[f64]) -> Result<Vec<f64>> {
        let m2 = self.graph.oriented.len();
        if j.len() != m2 {
            return Err(GraphotError::ShapeMismatch { expected: m2, actual: j.len() });
        }
        Ok(self.graph.divergence_raw(j))
    }
}

/// A probability distribution over the vertices of a graph: nonnegative
/// entries with unit total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexDistribution {
    values: Vec<f64>,
}

impl VertexDistribution {
    /// Validates nonnegativity and total mass. Mass within
    /// [`MASS_RENORMALIZE_TOLERANCE`] of 1 is renormalized with a warning;
    /// anything further off is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(GraphotError::Validation("empty distribution".into()));
        }
        for (v, &x) in values.iter().enumerate() {
            if !x.is_finite() {
                return Err(GraphotError::Validation(format!("non-finite mass at vertex {v}")));
            }
            if x < 0.0 {
                return Err(GraphotError::Validation(format!(
                    "negative mass {x} at vertex {v}"
                )));
            }
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > MASS_RENORMALIZE_TOLERANCE {
            return Err(GraphotError::Validation(format!(
                "total mass {total} is not 1 (deviation exceeds {MASS_RENORMALIZE_TOLERANCE})"
            )));
        }
        let mut values = values;
        if (total - 1.0).abs() > 1e-9 {
            log::warn!("renormalizing distribution with total mass {total}");
            for x in &mut values {
                *x /= total;
            }
        }
        Ok(VertexDistribution { values })
    }

    /// The point mass at `v`.
    pub fn indicator(n: usize, v: usize) -> Result<Self> {
        if v >= n {
            return Err(GraphotError::IndexOutOfRange { index: v, size: n });
        }
        let mut values = vec![0.0; n];
        values[v] = 1.0;
        Ok(VertexDistribution { values })
    }

    pub fn uniform(n: usize) -> Self {
        VertexDistribution { values: vec![1.0 / n as f64; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Vertices carrying strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(v, _)| v)
            .collect()
    }

    /// Shannon entropy in nats, with `0·ln 0 := 0`.
    pub fn entropy(&self) -> f64 {
        self.values
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| -x * x.ln())
            .sum()
    }
}

/// A nonnegative value per oriented edge (a momentum `J` or velocity `U`),
/// indexed in canonical oriented-edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    values: Vec<f64>,
}

impl FlowField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (e, &x) in values.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(GraphotError::Validation(format!(
                    "flow value {x} at oriented edge {e} must be finite and nonnegative"
                )));
            }
        }
        Ok(FlowField { values })
    }

    pub fn zeros(len: usize) -> Self {
        FlowField { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
