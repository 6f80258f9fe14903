//! Deterministic graph generators for the experiments.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graphot::error::Result;
use graphot::Graph;

pub fn line_graph(n: usize) -> Graph {
    Graph::new(n, (0..n - 1).map(|i| (i, i + 1)).collect()).expect("line graph is valid")
}

/// Two radial fans joined by a line: line vertices `0..line_len`, then
/// `spokes` leaves on each end hub. A tree with `|V| = line_len + 2·spokes`
/// and `|E| = |V| − 1`.
#[derive(Debug, Clone)]
pub struct FanLine {
    pub graph: Graph,
    pub line: Vec<usize>,
    pub left_leaves: Vec<usize>,
    pub right_leaves: Vec<usize>,
}

pub fn fan_line_graph(spokes: usize, line_len: usize) -> FanLine {
    assert!(spokes >= 1 && line_len >= 1);
    let mut edges: Vec<(usize, usize)> = (0..line_len - 1).map(|i| (i, i + 1)).collect();
    let left_hub = 0;
    let right_hub = line_len - 1;
    let mut left_leaves = Vec::with_capacity(spokes);
    let mut right_leaves = Vec::with_capacity(spokes);
    for s in 0..spokes {
        let leaf = line_len + s;
        edges.push((left_hub, leaf));
        left_leaves.push(leaf);
    }
    for s in 0..spokes {
        let leaf = line_len + spokes + s;
        edges.push((right_hub, leaf));
        right_leaves.push(leaf);
    }
    let graph = Graph::new(line_len + 2 * spokes, edges).expect("fan-line tree is valid");
    FanLine { graph, line: (0..line_len).collect(), left_leaves, right_leaves }
}

/// Random planar-style geometric graph: `n` uniform points in the unit
/// square joined below a connection radius chosen to hit roughly
/// `target_edges`; any leftover components are stitched through their
/// closest point pairs.
pub struct GeometricGraph {
    pub graph: Graph,
    pub points: Vec<[f64; 2]>,
}

pub fn geometric_graph(n: usize, target_edges: usize, seed: u64) -> Result<GeometricGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    // E[edges] ≈ n²·π r²/2 for uniform points away from the border.
    let radius =
        (2.0 * target_edges as f64 / (std::f64::consts::PI * (n * n) as f64)).sqrt();
    let r2 = radius * radius;
    let dist2 = |a: [f64; 2], b: [f64; 2]| {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        dx * dx + dy * dy
    };

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if dist2(points[i], points[j]) <= r2 {
                edges.push((i, j));
            }
        }
    }

    // Union-find over the radius edges, then stitch components together.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &(a, b) in &edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    loop {
        let root0 = find(&mut parent, 0);
        let stray: Vec<usize> = (0..n).filter(|&v| find(&mut parent, v) != root0).collect();
        if stray.is_empty() {
            break;
        }
        let mut best = (f64::INFINITY, 0, 0);
        for &v in &stray {
            for u in 0..n {
                if find(&mut parent, u) == root0 {
                    let d = dist2(points[v], points[u]);
                    if d < best.0 {
                        best = (d, u, v);
                    }
                }
            }
        }
        edges.push((best.1.min(best.2), best.1.max(best.2)));
        let (ra, rb) = (find(&mut parent, best.1), find(&mut parent, best.2));
        parent[ra] = rb;
    }

    Ok(GeometricGraph { graph: Graph::new(n, edges)?, points })
}

/// Random spanning tree plus extra edges; used by property tests and the
/// metric-axiom experiments.
pub fn random_connected_graph(n: usize, extra_edge_prob: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    let mut present = std::collections::HashSet::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v));
        present.insert((u, v));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if !present.contains(&(u, v)) && rng.gen_bool(extra_edge_prob) {
                edges.push((u, v));
                present.insert((u, v));
            }
        }
    }
    Graph::new(n, edges).expect("spanning tree keeps the graph connected")
}
