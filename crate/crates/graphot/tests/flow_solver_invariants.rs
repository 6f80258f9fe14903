//! Metric-structure and optimality invariants of the staggered solver.

mod support;

use graphot::prune::prune_by_w1;
use graphot::solver::{objective, solve, SolverConfig};
use graphot::{Graph, VertexDistribution};
use rand::Rng;
use support::*;

#[test]
fn symmetry_on_random_pairs() {
    let mut rng = rng(21);
    let cfg = SolverConfig::default();
    for trial in 0..6 {
        let n = rng.gen_range(4..=15);
        let g = random_connected_graph(n, 0.3, &mut rng);
        let p0 = random_positive_distribution(n, &mut rng);
        let p1 = random_positive_distribution(n, &mut rng);
        let fwd = solve(&g, &p0, &p1, 8, &cfg).unwrap().distance;
        let bwd = solve(&g, &p1, &p0, 8, &cfg).unwrap().distance;
        let gap = (fwd - bwd).abs();
        assert!(
            gap <= 1e-3 * fwd.max(1e-3),
            "trial {trial}: fwd {fwd} bwd {bwd} gap {gap}"
        );
    }
}

#[test]
fn triangle_inequality_on_random_triples() {
    let mut rng = rng(22);
    let cfg = SolverConfig::default();
    for trial in 0..10 {
        let n = rng.gen_range(4..=12);
        let g = random_connected_graph(n, 0.3, &mut rng);
        let p = random_positive_distribution(n, &mut rng);
        let q = random_positive_distribution(n, &mut rng);
        let r = random_positive_distribution(n, &mut rng);
        let dpq = solve(&g, &p, &q, 8, &cfg).unwrap().distance;
        let dqr = solve(&g, &q, &r, 8, &cfg).unwrap().distance;
        let dpr = solve(&g, &p, &r, 8, &cfg).unwrap().distance;
        assert!(
            dpr <= dpq + dqr + 1e-3,
            "trial {trial}: {dpr} > {dpq} + {dqr}"
        );
    }
}

#[test]
fn identity_of_indiscernibles() {
    let mut rng = rng(23);
    let cfg = SolverConfig::default();
    let g = random_connected_graph(9, 0.3, &mut rng);
    let p = random_positive_distribution(9, &mut rng);
    assert!(solve(&g, &p, &p, 8, &cfg).unwrap().distance <= 1e-4);

    // Adjacent indicators stay well separated.
    let (v, w) = g.edges()[0];
    let dv = VertexDistribution::indicator(9, v).unwrap();
    let dw = VertexDistribution::indicator(9, w).unwrap();
    assert!(solve(&g, &dv, &dw, 8, &cfg).unwrap().distance >= 0.5);
}

#[test]
fn refinement_is_monotone_in_k() {
    // Indicator endpoints at hop distance 2 on a line; refining the time
    // grid can only raise the optimal value.
    let g = path_graph(3);
    let a = VertexDistribution::indicator(3, 0).unwrap();
    let b = VertexDistribution::indicator(3, 2).unwrap();
    let cfg = SolverConfig::default();
    let mut prev = 0.0;
    for k in [2usize, 5, 10] {
        let d = solve(&g, &a, &b, k, &cfg).unwrap().distance;
        assert!(d >= prev - 1e-4, "k={k}: {d} < previous {prev}");
        prev = d;
    }
}

/// Dense solve of `(L + 𝟙𝟙ᵀ/n)φ = Δ`, then `J = relu(Dφ)`: a feasible
/// continuity flow for a given slice difference, built without touching
/// the solver's own initialization path.
fn feasible_flow_for(g: &Graph, delta: &[f64]) -> Vec<f64> {
    let n = g.num_vertices();
    let mut a = vec![vec![1.0 / n as f64; n]; n];
    for v in 0..n {
        a[v][v] += g.degree(v) as f64;
    }
    for &(u, v) in g.edges() {
        a[u][v] -= 1.0;
        a[v][u] -= 1.0;
    }
    let mut rhs = delta.to_vec();
    // Gaussian elimination with partial pivoting.
    let mut phi = vec![0.0; n];
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for j in col..n {
                a[row][j] -= f * a[col][j];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for j in col + 1..n {
            acc -= a[col][j] * phi[j];
        }
        phi[col] = acc / a[col][col];
    }
    g.oriented_edges().iter().map(|&(v, w)| (phi[w] - phi[v]).max(0.0)).collect()
}

#[test]
fn random_feasible_directions_never_beat_the_optimum() {
    let mut rng = rng(24);
    let cfg = SolverConfig::default();
    let n = 7;
    let k = 5;
    let g = random_connected_graph(n, 0.35, &mut rng);
    let p0 = random_positive_distribution(n, &mut rng);
    let p1 = random_positive_distribution(n, &mut rng);
    let best = solve(&g, &p0, &p1, k, &cfg).unwrap();

    for _ in 0..20 {
        // A random feasible competitor: positive interior slices plus a
        // matching continuity flow.
        let mut qs: Vec<Vec<f64>> = vec![p0.values().to_vec()];
        for _ in 1..k {
            qs.push(random_positive_distribution(n, &mut rng).values().to_vec());
        }
        qs.push(p1.values().to_vec());
        let js: Vec<Vec<f64>> = (1..=k)
            .map(|i| {
                let delta: Vec<f64> =
                    (0..n).map(|v| qs[i][v] - qs[i - 1][v]).collect();
                feasible_flow_for(&g, &delta)
            })
            .collect();

        for t in [0.05, 0.2] {
            let q_mix: Vec<Vec<f64>> = best
                .densities
                .iter()
                .zip(&qs)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect())
                .collect();
            let j_mix: Vec<Vec<f64>> = best
                .flows
                .iter()
                .zip(&js)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect())
                .collect();
            let value = objective(&g, &q_mix, &j_mix, k).unwrap_or(f64::INFINITY);
            assert!(
                value >= best.objective - 1e-5 * best.objective.max(1.0),
                "perturbed objective {value} beats optimum {}",
                best.objective
            );
        }
    }
}

#[test]
fn pruning_only_restricts() {
    let mut rng = rng(25);
    let cfg = SolverConfig::default();
    for trial in 0..8 {
        let n = rng.gen_range(6..=20);
        let g = random_connected_graph(n, 0.25, &mut rng);
        let p0 = random_sparse_distribution(n, &mut rng);
        let p1 = random_sparse_distribution(n, &mut rng);
        let full = solve(&g, &p0, &p1, 8, &cfg).unwrap().distance;
        let pruned = prune_by_w1(&g, &p0, &p1, 1).unwrap();
        let q0 = pruned.restrict(&p0).unwrap();
        let q1 = pruned.restrict(&p1).unwrap();
        let restricted = solve(&pruned.graph, &q0, &q1, 8, &cfg).unwrap().distance;
        assert!(
            restricted >= full - 1e-3,
            "trial {trial}: pruned {restricted} < full {full} − tol"
        );
    }
}

#[test]
fn pruned_path_instances_agree_with_full() {
    let cfg = SolverConfig::default();
    for d in [3usize, 5] {
        let g = path_graph(d + 1);
        let a = VertexDistribution::indicator(d + 1, 0).unwrap();
        let b = VertexDistribution::indicator(d + 1, d).unwrap();
        let full = solve(&g, &a, &b, d, &cfg).unwrap().distance;
        let pruned = prune_by_w1(&g, &a, &b, 0).unwrap();
        let restricted = solve(
            &pruned.graph,
            &pruned.restrict(&a).unwrap(),
            &pruned.restrict(&b).unwrap(),
            d,
            &cfg,
        )
        .unwrap()
        .distance;
        assert!(
            (restricted - full).abs() <= 0.005 * full,
            "d={d}: pruned {restricted} vs full {full}"
        );
    }
}
