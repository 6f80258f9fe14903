//! Variable-count reduction for the staggered solve: keep only edges
//! near the support of an optimal W1 flow between the endpoints.
//!
//! The W1 optimum is a basic network-flow solution, so "used" edges are
//! crisp up to float dust; a hop-radius halo hedges against the
//! continuous-flow optimum straying off the W1 support. Pruning is a
//! heuristic: it shrinks the feasible set, so pruned distances can only
//! overestimate.

use crate::baselines;
use crate::error::{GraphotError, Result};
use crate::graph::{Graph, VertexDistribution};

/// Flow threshold below which a W1 edge counts as unused (float dust on
/// top of an exact basic solution).
pub const FLOW_SUPPORT_THRESHOLD: f64 = 1e-10;

/// A vertex-induced subgraph with index maps back to the parent graph.
#[derive(Debug, Clone)]
pub struct PrunedGraph {
    pub graph: Graph,
    /// `old_to_new[v] = Some(v')` for kept vertices.
    pub old_to_new: Vec<Option<usize>>,
    /// `new_to_old[v'] = v`, sorted ascending.
    pub new_to_old: Vec<usize>,
}

impl PrunedGraph {
    /// Restricts a distribution supported on kept vertices to the subgraph.
    pub fn restrict(&self, p: &VertexDistribution) -> Result<VertexDistribution> {
        let mut values = vec![0.0; self.new_to_old.len()];
        for (v, &x) in p.values().iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            match self.old_to_new[v] {
                Some(nv) => values[nv] = x,
                None => {
                    return Err(GraphotError::Validation(format!(
                        "distribution has mass {x} on pruned vertex {v}"
                    )))
                }
            }
        }
        VertexDistribution::new(values)
    }

    /// Lifts a subgraph distribution back to the parent vertex set.
    pub fn lift(&self, p: &VertexDistribution) -> Result<VertexDistribution> {
        let mut values = vec![0.0; self.old_to_new.len()];
        for (nv, &x) in p.values().iter().enumerate() {
            values[self.new_to_old[nv]] = x;
        }
        VertexDistribution::new(values)
    }
}

/// Keeps edges used by an optimal W1 flow between `p0` and `p1`, all
/// edges within `hop_radius` hops of those (or of the endpoint supports),
/// and the supports themselves; reconnects stray components through
/// shortest paths so the result is always a valid connected graph.
pub fn prune_by_w1(
    g: &Graph,
    p0: &VertexDistribution,
    p1: &VertexDistribution,
    hop_radius: usize,
) -> Result<PrunedGraph> {
    let n = g.num_vertices();
    let sol = baselines::w1(g, p0, p1)?;

    let mut core: Vec<usize> = Vec::new();
    let mut in_core = vec![false; n];
    let mark = |v: usize, core: &mut Vec<usize>, in_core: &mut Vec<bool>| {
        if !in_core[v] {
            in_core[v] = true;
            core.push(v);
        }
    };
    for (e, &(v, w)) in g.oriented_edges().iter().enumerate() {
        if sol.flow.values()[e] > FLOW_SUPPORT_THRESHOLD {
            mark(v, &mut core, &mut in_core);
            mark(w, &mut core, &mut in_core);
        }
    }
    for v in p0.support().into_iter().chain(p1.support()) {
        mark(v, &mut core, &mut in_core);
    }

    let dist = g.multi_source_distances(&core);
    let mut keep: Vec<bool> = dist.iter().map(|&d| d <= hop_radius).collect();

    // Reconnect: while the kept set splits into components, add the
    // shortest path between the first component and the nearest other one.
    loop {
        let comps = components(g, &keep);
        if comps.len() <= 1 {
            break;
        }
        let path = shortest_bridge(g, &keep, &comps)?;
        for v in path {
            keep[v] = true;
        }
    }

    let mut old_to_new = vec![None; n];
    let mut new_to_old = Vec::new();
    for v in 0..n {
        if keep[v] {
            old_to_new[v] = Some(new_to_old.len());
            new_to_old.push(v);
        }
    }
    let mut edges = Vec::new();
    for &(u, v) in g.edges() {
        if let (Some(a), Some(b)) = (old_to_new[u], old_to_new[v]) {
            edges.push((a, b));
        }
    }
    let graph = Graph::new(new_to_old.len(), edges)?;
    Ok(PrunedGraph { graph, old_to_new, new_to_old })
}

fn components(g: &Graph, keep: &[bool]) -> Vec<Vec<usize>> {
    let n = g.num_vertices();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if !keep[start] || seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &e in g.out_edges(v) {
                let w = g.oriented_edges()[e].1;
                if keep[w] && !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Shortest path (in the full graph) from the first component to any
/// vertex of another component; returns the vertices along it.
fn shortest_bridge(g: &Graph, keep: &[bool], comps: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = g.num_vertices();
    let mut owner = vec![usize::MAX; n];
    for (c, comp) in comps.iter().enumerate() {
        for &v in comp {
            owner[v] = c;
        }
    }
    let mut pred = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    for &v in &comps[0] {
        seen[v] = true;
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        if owner[v] != usize::MAX && owner[v] != 0 {
            let mut path = Vec::new();
            let mut node = v;
            while node != usize::MAX {
                if !keep[node] {
                    path.push(node);
                }
                node = pred[node];
            }
            return Ok(path);
        }
        for &e in g.out_edges(v) {
            let w = g.oriented_edges()[e].1;
            if !seen[w] {
                seen[w] = true;
                pred[w] = v;
                queue.push_back(w);
            }
        }
    }
    Err(GraphotError::Disconnected("parent graph cannot reconnect pruned components".into()))
}
