//! Shared test oracles, independent of the library's solve paths.

#![allow(dead_code)]

pub mod lp;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graphot::{Graph, VertexDistribution};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn path_graph(n: usize) -> Graph {
    Graph::new(n, (0..n - 1).map(|i| (i, i + 1)).collect()).unwrap()
}

pub fn cycle_graph(n: usize) -> Graph {
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect()).unwrap()
}

/// Random connected graph: a random spanning tree plus extra edges.
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
    Graph::new(n, edges).unwrap()
}

/// Random strictly positive distribution.
pub fn random_positive_distribution(n: usize, rng: &mut ChaCha8Rng) -> VertexDistribution {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    VertexDistribution::new(raw.iter().map(|x| x / total).collect()).unwrap()
}

/// Random distribution that may carry exact zeros.
pub fn random_sparse_distribution(n: usize, rng: &mut ChaCha8Rng) -> VertexDistribution {
    loop {
        let raw: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(0.1..1.0) })
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return VertexDistribution::new(raw.iter().map(|x| x / total).collect()).unwrap();
        }
    }
}

/// Independent oracle for the two-node staggered problem.
///
/// With graph `a—b` and boundary conditions `δ_a → δ_b`, the only degrees
/// of freedom are the cumulative transferred masses `f_i = q^i(b)` (the
/// optimum moves mass one way only, so per-step flows are `f_i − f_{i−1}`
/// on the forward orientation). The chain objective
/// `k·Σ (Δf)²/2·(1/(1−f_{i−1}) + 1/f_i)` is minimized by damped Newton
/// with the analytic tridiagonal Hessian to gradient ∞-norm 1e-11.
pub struct TwoNodeOracle {
    pub k: usize,
    /// Cumulative transferred mass at each time slice.
    pub profile: Vec<f64>,
    pub objective: f64,
    pub distance: f64,
}

pub fn two_node_oracle(k: usize) -> TwoNodeOracle {
    let energy = |f: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 1..=k {
            let d = f[i] - f[i - 1];
            acc += 0.5 * d * d * (1.0 / (1.0 - f[i - 1]) + 1.0 / f[i]);
        }
        k as f64 * acc
    };

    let mut f: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    if k >= 2 {
        let mut grad = vec![0.0; k + 1];
        // Tridiagonal Hessian bands over the interior unknowns.
        let mut diag = vec![0.0; k + 1];
        let mut off = vec![0.0; k + 1]; // off[i] couples f_i and f_{i+1}
        for _ in 0..400 {
            grad.iter_mut().for_each(|x| *x = 0.0);
            diag.iter_mut().for_each(|x| *x = 0.0);
            off.iter_mut().for_each(|x| *x = 0.0);
            for s in 0..k {
                let (a, b) = (f[s], f[s + 1]);
                let d = b - a;
                let t = 1.0 - a;
                let h = b;
                let w = 1.0 / t + 1.0 / h;
                grad[s] += -d * w + 0.5 * d * d / (t * t);
                grad[s + 1] += d * w - 0.5 * d * d / (h * h);
                diag[s] += w - 2.0 * d / (t * t) + d * d / (t * t * t);
                diag[s + 1] += w - 2.0 * d / (h * h) + d * d / (h * h * h);
                off[s] += -w + d / (t * t) + d / (h * h);
            }
            let gmax = grad[1..k].iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            if gmax < 1e-11 {
                break;
            }
            // Thomas solve of H·step = g over f_1..f_{k-1}.
            let m = k - 1;
            let mut c = vec![0.0; m];
            let mut dvec = vec![0.0; m];
            for i in 0..m {
                c[i] = off[i + 1];
                dvec[i] = grad[i + 1];
            }
            let mut bb: Vec<f64> = (0..m).map(|i| diag[i + 1] + 1e-13).collect();
            for i in 1..m {
                let w = c[i - 1] / bb[i - 1];
                bb[i] -= w * c[i - 1];
                dvec[i] -= w * dvec[i - 1];
            }
            let mut step = vec![0.0; m];
            step[m - 1] = dvec[m - 1] / bb[m - 1];
            for i in (0..m - 1).rev() {
                step[i] = (dvec[i] - c[i] * step[i + 1]) / bb[i];
            }
            let base = energy(&f);
            let mut damping = 1.0;
            for _ in 0..60 {
                let mut trial = f.clone();
                for i in 0..m {
                    trial[i + 1] = f[i + 1] - damping * step[i];
                }
                let monotone = trial.windows(2).all(|w| w[1] > w[0]);
                if monotone && energy(&trial) <= base {
                    f = trial;
                    break;
                }
                damping *= 0.5;
            }
        }
    }

    let objective = energy(&f);
    TwoNodeOracle { k, profile: f, objective, distance: objective.sqrt() }
}

pub fn two_node_oracle_distance(k: usize) -> f64 {
    two_node_oracle(k).distance
}

/// Per-step speeds of an oracle profile, `sᵢ = k·√(mnsᵢ)`.
pub fn two_node_oracle_speeds(oracle: &TwoNodeOracle) -> Vec<f64> {
    let k = oracle.k;
    let f = &oracle.profile;
    (1..=k)
        .map(|i| {
            let d = f[i] - f[i - 1];
            let mns = 0.5 * d * d * (1.0 / (1.0 - f[i - 1]) + 1.0 / f[i]);
            (k as f64 * k as f64 * mns).sqrt()
        })
        .collect()
}
