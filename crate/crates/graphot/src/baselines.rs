//! Classical reference distances: 1-Wasserstein in Beckmann (flow) form
//! and the full quadratic transportation LP, kept as a desk-scale oracle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{GraphotError, Result};
use crate::graph::{FlowField, Graph, VertexDistribution};

/// Default vertex-count guard for the n² transportation LP.
pub const W_FULL_DEFAULT_GUARD: usize = 2000;

/// Optimal Beckmann flow: nonnegative `J` on the oriented edge set with
/// `DᵀJ = p1 − p0` and minimal total magnitude `Σ J(e)`.
#[derive(Debug, Clone)]
pub struct BeckmannFlow {
    pub cost: f64,
    pub flow: FlowField,
}

/// A nonnegative coupling with row sums `p0` and column sums `p1`,
/// stored dense row-major.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub n: usize,
    pub entries: Vec<f64>,
}

impl TransportPlan {
    pub fn get(&self, v: usize, w: usize) -> f64 {
        self.entries[v * self.n + w]
    }

    /// Nonzero entries as `(v, w, mass)` triplets, above the given floor.
    pub fn triplets(&self, floor: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for v in 0..self.n {
            for w in 0..self.n {
                let t = self.get(v, w);
                if t > floor {
                    out.push((v, w, t));
                }
            }
        }
        out
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance; ties broken by vertex id for determinism.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 1-Wasserstein distance with shortest-path ground metric, computed as an
/// uncapacitated minimum-cost flow with unit edge costs (successive
/// shortest paths with Johnson potentials). Exact up to float summation of
/// the transported amounts.
pub fn w1(g: &Graph, p0: &VertexDistribution, p1: &VertexDistribution) -> Result<BeckmannFlow> {
    let n = g.num_vertices();
    if p0.len() != n {
        return Err(GraphotError::ShapeMismatch { expected: n, actual: p0.len() });
    }
    if p1.len() != n {
        return Err(GraphotError::ShapeMismatch { expected: n, actual: p1.len() });
    }

    // excess > 0: vertex must ship mass out; excess < 0: vertex absorbs.
    let mut excess: Vec<f64> = p0.values().iter().zip(p1.values()).map(|(a, b)| a - b).collect();
    // Signed net flow per undirected edge, positive along stored orientation.
    let mut net = vec![0.0f64; g.num_edges()];
    let mut potential = vec![0.0f64; n];

    let mut dist = vec![f64::INFINITY; n];
    // Predecessor: (vertex, undirected edge, sign of traversal, cancelled).
    let mut pred: Vec<Option<(usize, usize, f64, bool)>> = vec![None; n];
    // Augmentations either exhaust an excess or zero one edge's net flow,
    // so this cap is generous; hitting it means a logic error.
    let mut budget = 8 * (n + 1) * (g.num_edges() + 1);

    // Excesses below this are rounding dust of p0 − p1; routing them would
    // change the cost by far less than any comparison tolerance.
    const EXCESS_DUST: f64 = 1e-13;

    loop {
        let Some(source) = (0..n).find(|&v| excess[v] > EXCESS_DUST) else {
            break;
        };
        budget -= 1;
        if budget == 0 {
            return Err(GraphotError::NonConvergence {
                iterations: 8 * (n + 1) * (g.num_edges() + 1),
                primal: 0.0,
                dual: 0.0,
                history: Vec::new(),
            });
        }

        // Dijkstra over residual arcs with reduced costs. Traversing an
        // undirected edge against its current net flow costs −1 up to the
        // cancelable amount; pushing further (or with the flow) costs +1.
        dist.fill(f64::INFINITY);
        pred.fill(None);
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry { dist: 0.0, vertex: source });
        while let Some(HeapEntry { dist: d, vertex: v }) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &oe in g.out_edges(v) {
                let w = g.oriented_edges()[oe].1;
                let edge = oe / 2;
                let forward = oe % 2 == 0;
                let sign = if forward { 1.0 } else { -1.0 };
                let cancels = if forward { net[edge] < 0.0 } else { net[edge] > 0.0 };
                let cost = if cancels { -1.0 } else { 1.0 };
                let reduced = cost + potential[v] - potential[w];
                debug_assert!(reduced > -1e-9, "negative reduced cost {reduced}");
                let cand = d + reduced.max(0.0);
                if cand < dist[w] {
                    dist[w] = cand;
                    pred[w] = Some((v, edge, sign, cancels));
                    heap.push(HeapEntry { dist: cand, vertex: w });
                }
            }
        }

        // Nearest vertex that still absorbs mass, lowest id on ties.
        let sink = (0..n)
            .filter(|&v| excess[v] < -EXCESS_DUST)
            .min_by(|&a, &b| {
                dist[a].partial_cmp(&dist[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
            })
            .ok_or_else(|| {
                GraphotError::Validation("supplies and demands do not balance".into())
            })?;

        // Bottleneck: cancellation arcs cap the amount so net flows never
        // cross zero in one step (keeping the potentials consistent).
        let mut amount = excess[source].min(-excess[sink]);
        let mut v = sink;
        while v != source {
            let (prev, edge, _, cancels) = pred[v].expect("path back to source");
            if cancels {
                amount = amount.min(net[edge].abs());
            }
            v = prev;
        }
        excess[source] -= amount;
        excess[sink] += amount;
        let mut v = sink;
        while v != source {
            let (prev, edge, sign, _) = pred[v].expect("path back to source");
            net[edge] += sign * amount;
            v = prev;
        }
        for v in 0..n {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }
    }

    let mut j = vec![0.0; g.num_oriented_edges()];
    let mut cost = 0.0;
    for (edge, &x) in net.iter().enumerate() {
        cost += x.abs();
        if x > 0.0 {
            j[2 * edge] = x;
        } else if x < 0.0 {
            j[2 * edge + 1] = -x;
        }
    }
    Ok(BeckmannFlow { cost, flow: FlowField::new(j)? })
}

/// Result of the quadratic transportation LP: `distance² = min Σ d(v,w)²·T`.
#[derive(Debug, Clone)]
pub struct QuadraticTransport {
    pub distance: f64,
    pub plan: TransportPlan,
}

/// Solves the quadratic transportation LP exactly with a transportation
/// simplex (Bland's rule for anti-cycling) over precomputed all-pairs hop
/// distances. Guarded to `n ≤ 2000`.
pub fn w_full(
    g: &Graph,
    p0: &VertexDistribution,
    p1: &VertexDistribution,
) -> Result<QuadraticTransport> {
    w_full_with_guard(g, p0, p1, W_FULL_DEFAULT_GUARD)
}

/// As [`w_full`] with a caller-chosen vertex-count guard.
pub fn w_full_with_guard(
    g: &Graph,
    p0: &VertexDistribution,
    p1: &VertexDistribution,
    max_vertices: usize,
) -> Result<QuadraticTransport> {
    let n = g.num_vertices();
    if p0.len() != n {
        return Err(GraphotError::ShapeMismatch { expected: n, actual: p0.len() });
    }
    if p1.len() != n {
        return Err(GraphotError::ShapeMismatch { expected: n, actual: p1.len() });
    }
    if n > max_vertices {
        return Err(GraphotError::SizeGuard(format!(
            "{n} vertices exceed the n² LP guard of {max_vertices}; use the flow-based distance"
        )));
    }

    let sources = p0.support();
    let sinks = p1.support();
    let supplies: Vec<f64> = sources.iter().map(|&v| p0.values()[v]).collect();
    let mut demands: Vec<f64> = sinks.iter().map(|&w| p1.values()[w]).collect();
    // Absorb float dust so total supply equals total demand exactly.
    let balance: f64 = supplies.iter().sum::<f64>() - demands.iter().sum::<f64>();
    if let Some(last) = demands.last_mut() {
        *last += balance;
    }

    let dists = g.all_pairs_distances();
    let costs: Vec<Vec<f64>> = sources
        .iter()
        .map(|&v| sinks.iter().map(|&w| (dists[v][w] * dists[v][w]) as f64).collect())
        .collect();

    let solution = transportation_simplex(&supplies, &demands, &costs);

    let mut entries = vec![0.0; n * n];
    let mut objective = 0.0;
    for (si, &v) in sources.iter().enumerate() {
        for (ti, &w) in sinks.iter().enumerate() {
            let t = solution[si][ti];
            if t != 0.0 {
                entries[v * n + w] = t;
                objective += costs[si][ti] * t;
            }
        }
    }
    Ok(QuadraticTransport {
        distance: objective.max(0.0).sqrt(),
        plan: TransportPlan { n, entries },
    })
}

/// Transportation simplex on dense cost data. `supplies` and `demands`
/// must balance; returns the optimal coupling.
fn transportation_simplex(supplies: &[f64], demands: &[f64], costs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows = supplies.len();
    let cols = demands.len();
    let mut x = vec![vec![0.0f64; cols]; rows];
    let mut basic = vec![vec![false; cols]; rows];

    // Northwest-corner initial basis: exactly rows+cols−1 basic cells,
    // advancing one direction at a time so degenerate zeros stay basic.
    {
        let mut a: Vec<f64> = supplies.to_vec();
        let mut b: Vec<f64> = demands.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let amount = a[i].min(b[j]);
            x[i][j] = amount;
            basic[i][j] = true;
            a[i] -= amount;
            b[j] -= amount;
            if i + 1 == rows && j + 1 == cols {
                break;
            }
            if (a[i] <= b[j] && i + 1 < rows) || j + 1 == cols {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let mut u = vec![0.0f64; rows];
    let mut w = vec![0.0f64; cols];
    loop {
        // Duals from the basis tree: u[i] + w[j] = c[i][j] on basic cells.
        let mut have_u = vec![false; rows];
        let mut have_w = vec![false; cols];
        have_u[0] = true;
        u[0] = 0.0;
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..rows {
                for j in 0..cols {
                    if !basic[i][j] {
                        continue;
                    }
                    if have_u[i] && !have_w[j] {
                        w[j] = costs[i][j] - u[i];
                        have_w[j] = true;
                        changed = true;
                    } else if have_w[j] && !have_u[i] {
                        u[i] = costs[i][j] - w[j];
                        have_u[i] = true;
                        changed = true;
                    }
                }
            }
        }

        // Entering variable: Bland's rule (lexicographically first cell
        // with negative reduced cost).
        let mut entering = None;
        'scan: for i in 0..rows {
            for j in 0..cols {
                if !basic[i][j] && costs[i][j] - u[i] - w[j] < -1e-12 {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break;
        };

        // Unique alternating cycle through the basis tree containing the
        // entering cell: path from row ei to column ej in the bipartite
        // basis graph.
        let cycle = basis_cycle(&basic, rows, cols, ei, ej);

        // θ = min over cells losing mass (odd positions); ties leave the
        // lexicographically smallest cell, Bland-style.
        let mut theta = f64::INFINITY;
        let mut leaving = None;
        for (pos, &(i, j)) in cycle.iter().enumerate() {
            if pos % 2 == 1 && (x[i][j] < theta || (x[i][j] == theta && Some((i, j)) < leaving)) {
                theta = x[i][j];
                leaving = Some((i, j));
            }
        }
        let (li, lj) = leaving.expect("cycle has a leaving cell");
        for (pos, &(i, j)) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                x[i][j] += theta;
            } else {
                x[i][j] -= theta;
            }
        }
        x[li][lj] = 0.0;
        basic[li][lj] = false;
        basic[ei][ej] = true;
    }
    x
}

/// The alternating cycle created by adding cell `(ei, ej)` to the basis:
/// `(ei,ej)` followed by the unique basis path from row `ei` to column
/// `ej`, alternating column/row moves.
fn basis_cycle(
    basic: &[Vec<bool>],
    rows: usize,
    cols: usize,
    ei: usize,
    ej: usize,
) -> Vec<(usize, usize)> {
    // Bipartite node ids: rows 0..rows, cols rows..rows+cols.
    let total = rows + cols;
    let mut prev: Vec<Option<(usize, (usize, usize))>> = vec![None; total];
    let mut seen = vec![false; total];
    let mut queue = std::collections::VecDeque::new();
    seen[ei] = true;
    queue.push_back(ei);
    while let Some(node) = queue.pop_front() {
        if node == rows + ej {
            break;
        }
        if node < rows {
            let i = node;
            for j in 0..cols {
                if basic[i][j] && !seen[rows + j] {
                    seen[rows + j] = true;
                    prev[rows + j] = Some((node, (i, j)));
                    queue.push_back(rows + j);
                }
            }
        } else {
            let j = node - rows;
            for i in 0..rows {
                if basic[i][j] && !seen[i] {
                    seen[i] = true;
                    prev[i] = Some((node, (i, j)));
                    queue.push_back(i);
                }
            }
        }
    }

    // Walk back from ej's side so the cell after the entering one shares
    // its column, making signs alternate +,−,+,−,... around the cycle.
    let mut cycle = vec![(ei, ej)];
    let mut node = rows + ej;
    while let Some((parent, cell)) = prev[node] {
        cycle.push(cell);
        node = parent;
    }
    cycle
}

/// `(Σ_v |p0(v) − p1(v)|^order)^(1/order)`.
pub fn lp_norm_distance(
    p0: &VertexDistribution,
    p1: &VertexDistribution,
    order: u32,
) -> Result<f64> {
    if p0.len() != p1.len() {
        return Err(GraphotError::ShapeMismatch { expected: p0.len(), actual: p1.len() });
    }
    if order == 0 {
        return Err(GraphotError::Validation("norm order must be at least 1".into()));
    }
    let acc: f64 = p0
        .values()
        .iter()
        .zip(p1.values())
        .map(|(a, b)| (a - b).abs().powi(order as i32))
        .sum();
    Ok(if order == 1 { acc } else { acc.powf(1.0 / order as f64) })
}
