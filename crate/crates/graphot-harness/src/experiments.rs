//! The reproduction experiments.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use graphot::baselines::{lp_norm_distance, w1};
use graphot::error::{GraphotError, Result};
use graphot::solver::{solve, SolverConfig, TransportPath};
use graphot::{Graph, VertexDistribution};

use crate::corpus::HistogramCorpus;
use crate::generators::{fan_line_graph, line_graph};
use crate::report::{Digest, ExperimentReport};

/// `W̄_k(δ_v, δ_w)` across a list of `k` values and vertex pairs; records
/// the approach of the discrete distance toward the hop distance.
pub fn convergence_indicator_experiment(
    g: &Graph,
    k_list: &[usize],
    pairs: &[(usize, usize)],
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("convergence_indicator");
    report.param("n", g.num_vertices());
    report.param("k_list", join(k_list));
    report.input_digest = Digest::new()
        .ints(&[g.num_vertices()])
        .ints(k_list)
        .ints(&pairs.iter().flat_map(|&(a, b)| [a, b]).collect::<Vec<_>>())
        .hex();
    report.columns =
        ["v", "w", "hop_distance", "k", "distance", "iterations"].map(String::from).to_vec();

    let n = g.num_vertices();
    for &(v, w) in pairs {
        let hop = g.shortest_path_distances(v)?[w];
        let dv = VertexDistribution::indicator(n, v)?;
        let dw = VertexDistribution::indicator(n, w)?;
        for &k in k_list {
            let (dist, iters) = if v == w {
                (0.0, 0)
            } else {
                match solve(g, &dv, &dw, k, cfg) {
                    Ok(path) => (path.distance, path.report.iterations),
                    // Mass cannot cross d hops in k < d steps.
                    Err(GraphotError::Infeasible(_)) => (f64::INFINITY, 0),
                    Err(e) => return Err(e),
                }
            };
            report.push_row(vec![
                v.to_string(),
                w.to_string(),
                hop.to_string(),
                k.to_string(),
                format!("{dist}"),
                iters.to_string(),
            ]);
        }
    }
    Ok(report)
}

/// One row of the entropy-convergence experiment.
#[derive(Debug, Clone)]
pub struct EntropyRatioRecord {
    pub noise: f64,
    pub mean_entropy: f64,
    pub k: usize,
    pub distance: f64,
    /// `W̄_k / W̄_ref`; infinite when the `k`-step problem is infeasible
    /// (mass would have to travel more than one hop per step).
    pub ratio: f64,
}

pub struct EntropyConvergence {
    pub records: Vec<EntropyRatioRecord>,
    pub reference_k: usize,
    pub report: ExperimentReport,
}

/// Fig-2-right style: perturb the indicators of the two farthest vertices
/// of a thirty-vertex line with uniform noise and track `W̄_k / W̄_30`.
pub fn convergence_entropy_experiment(
    k_list: &[usize],
    noise_levels: &[f64],
    seed: u64,
    cfg: &SolverConfig,
) -> Result<EntropyConvergence> {
    const LINE: usize = 30;
    let reference_k = LINE;
    let g = line_graph(LINE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut report = ExperimentReport::new("convergence_entropy");
    report.param("line_vertices", LINE);
    report.param("reference_k", reference_k);
    report.param("seed", seed);
    report.input_digest =
        Digest::new().ints(k_list).floats(noise_levels).ints(&[seed as usize]).hex();
    report.columns =
        ["noise", "mean_entropy", "k", "distance", "ratio_to_reference"].map(String::from).to_vec();

    let mut records = Vec::new();
    for &eps in noise_levels {
        let mut noised = |target: usize| -> VertexDistribution {
            let mut values = vec![0.0; LINE];
            values[target] = 1.0;
            if eps > 0.0 {
                for value in values.iter_mut() {
                    *value += rng.gen_range(0.0..eps);
                }
            }
            let total: f64 = values.iter().sum();
            VertexDistribution::new(values.iter().map(|x| x / total).collect()).unwrap()
        };
        let p0 = noised(0);
        let p1 = noised(LINE - 1);
        let mean_entropy = 0.5 * (p0.entropy() + p1.entropy());

        let reference = solve(&g, &p0, &p1, reference_k, cfg)?.distance;
        for &k in k_list {
            let distance = match solve(&g, &p0, &p1, k, cfg) {
                Ok(path) => path.distance,
                Err(GraphotError::Infeasible(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let ratio = distance / reference;
            records.push(EntropyRatioRecord { noise: eps, mean_entropy, k, distance, ratio });
            report.push_row(vec![
                format!("{eps}"),
                format!("{mean_entropy}"),
                k.to_string(),
                format!("{distance}"),
                format!("{ratio}"),
            ]);
        }
        // The reference row closes each noise level.
        records.push(EntropyRatioRecord {
            noise: eps,
            mean_entropy,
            k: reference_k,
            distance: reference,
            ratio: 1.0,
        });
        report.push_row(vec![
            format!("{eps}"),
            format!("{mean_entropy}"),
            reference_k.to_string(),
            format!("{reference}"),
            "1".to_string(),
        ]);
    }
    Ok(EntropyConvergence { records, reference_k, report })
}

/// Displacement interpolation: the trivial cross-fade next to the
/// solver's path, sampled on the same time grid.
pub struct Interpolation {
    pub trivial: Vec<Vec<f64>>,
    pub optimal: TransportPath,
}

pub fn interpolation_experiment(
    g: &Graph,
    p0: &VertexDistribution,
    p1: &VertexDistribution,
    k: usize,
    cfg: &SolverConfig,
) -> Result<Interpolation> {
    let optimal = solve(g, p0, p1, k, cfg)?;
    let n = g.num_vertices();
    let trivial = (0..=k)
        .map(|i| {
            let t = i as f64 / k as f64;
            (0..n).map(|v| (1.0 - t) * p0.values()[v] + t * p1.values()[v]).collect()
        })
        .collect();
    Ok(Interpolation { trivial, optimal })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FanLinePerturbation {
    Clean,
    /// Add iid `Uniform(0, ε)` to every leaf mass, then renormalize.
    LeafNoise(f64),
    /// Double one seeded random leaf's mass.
    SingleLeaf,
}

pub struct FanLineParams {
    pub spokes: usize,
    pub line_len: usize,
    pub k: usize,
    pub mode: FanLinePerturbation,
    pub seed: u64,
}

impl Default for FanLineParams {
    /// |V| = 120, |E| = 119, k = 20; the line kept short enough that the
    /// center stays reachable within k hops from every leaf.
    fn default() -> Self {
        FanLineParams {
            spokes: 45,
            line_len: 30,
            k: 20,
            mode: FanLinePerturbation::Clean,
            seed: 0,
        }
    }
}

pub struct FanLineOutcome {
    pub params_line: Vec<usize>,
    /// Per-vertex distances, infinite where the target is unreachable.
    pub l1: Vec<f64>,
    pub w1: Vec<f64>,
    pub wbar: Vec<f64>,
    pub report: ExperimentReport,
}

impl FanLineOutcome {
    /// Indices minimizing `values` up to an absolute tie tolerance.
    pub fn argmin_set(values: &[f64], tol: f64) -> Vec<usize> {
        let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return Vec::new();
        }
        values
            .iter()
            .enumerate()
            .filter(|(_, &x)| x <= best + tol)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Fig-4 style comparison: approximate a fan-supported distribution by a
/// single vertex under L1, W1 and the flow distance.
pub fn fan_line_experiment(params: &FanLineParams, cfg: &SolverConfig) -> Result<FanLineOutcome> {
    let fl = fan_line_graph(params.spokes, params.line_len);
    let g = &fl.graph;
    let n = g.num_vertices();
    let leaves: Vec<usize> =
        fl.left_leaves.iter().chain(&fl.right_leaves).copied().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut values = vec![0.0; n];
    let share = 1.0 / leaves.len() as f64;
    for &leaf in &leaves {
        values[leaf] = share;
    }
    match params.mode {
        FanLinePerturbation::Clean => {}
        FanLinePerturbation::LeafNoise(eps) => {
            for &leaf in &leaves {
                values[leaf] += rng.gen_range(0.0..eps) * share;
            }
        }
        FanLinePerturbation::SingleLeaf => {
            let leaf = leaves[rng.gen_range(0..leaves.len())];
            values[leaf] += share;
        }
    }
    let total: f64 = values.iter().sum();
    let p = VertexDistribution::new(values.iter().map(|x| x / total).collect())?;

    let evaluate = |v: usize| -> Result<(f64, f64, f64)> {
        let target = VertexDistribution::indicator(n, v)?;
        let l1 = lp_norm_distance(&p, &target, 1)?;
        let w1_cost = w1(g, &p, &target)?.cost;
        let wbar = match solve(g, &p, &target, params.k, cfg) {
            Ok(path) => path.distance,
            Err(GraphotError::Infeasible(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        Ok((l1, w1_cost, wbar))
    };
    let rows: Vec<Result<(f64, f64, f64)>> = (0..n).into_par_iter().map(evaluate).collect();

    let mut l1 = Vec::with_capacity(n);
    let mut w1_all = Vec::with_capacity(n);
    let mut wbar = Vec::with_capacity(n);
    for row in rows {
        let (a, b, c) = row?;
        l1.push(a);
        w1_all.push(b);
        wbar.push(c);
    }

    let mut report = ExperimentReport::new("fan_line");
    report.param("spokes", params.spokes);
    report.param("line_len", params.line_len);
    report.param("k", params.k);
    report.param("mode", format!("{:?}", params.mode));
    report.param("seed", params.seed);
    report.input_digest = Digest::new()
        .ints(&[params.spokes, params.line_len, params.k, params.seed as usize])
        .floats(p.values())
        .hex();
    report.columns = ["v", "on_line", "l1", "w1", "wbar"].map(String::from).to_vec();
    for v in 0..n {
        report.push_row(vec![
            v.to_string(),
            (v < params.line_len).to_string(),
            format!("{}", l1[v]),
            format!("{}", w1_all[v]),
            format!("{}", wbar[v]),
        ]);
    }

    Ok(FanLineOutcome { params_line: fl.line, l1, w1: w1_all, wbar, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    L1,
    W1,
    /// The flow-based distance with the given number of time steps.
    WBar(usize),
}

pub struct RetrievalOutcome {
    /// `(n, mean recall@n in percent)` rows.
    pub precision: Vec<(usize, f64)>,
    pub report: ExperimentReport,
}

/// Leave-one-out retrieval over the corpus: rank all other objects by the
/// chosen distance and average, per query, the percentage of its class
/// (capped at n) retrieved within the first n results. Singleton classes
/// are skipped with a warning.
pub fn retrieval_experiment(
    corpus: &HistogramCorpus,
    graph: &Graph,
    metric: DistanceKind,
    n_list: &[usize],
    cfg: &SolverConfig,
) -> Result<RetrievalOutcome> {
    let objects = corpus.num_objects();
    if graph.num_vertices() != corpus.num_centers() {
        return Err(GraphotError::ShapeMismatch {
            expected: corpus.num_centers(),
            actual: graph.num_vertices(),
        });
    }

    // Distance matrix over the upper triangle, in parallel.
    let pairs: Vec<(usize, usize)> =
        (0..objects).flat_map(|i| ((i + 1)..objects).map(move |j| (i, j))).collect();
    let distances: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<f64> {
            let a = &corpus.histograms[i];
            let b = &corpus.histograms[j];
            match metric {
                DistanceKind::L1 => lp_norm_distance(a, b, 1),
                DistanceKind::W1 => Ok(w1(graph, a, b)?.cost),
                DistanceKind::WBar(k) => Ok(solve(graph, a, b, k, cfg)?.distance),
            }
        })
        .collect();
    let mut matrix = vec![0.0; objects * objects];
    for (&(i, j), d) in pairs.iter().zip(distances) {
        let d = d?;
        matrix[i * objects + j] = d;
        matrix[j * objects + i] = d;
    }

    let mut precision = Vec::new();
    for &n in n_list {
        let mut total = 0.0;
        let mut queries = 0usize;
        for q in 0..objects {
            let class = &corpus.labels[q];
            let class_size = corpus.class_size(class);
            if class_size <= 1 {
                log::warn!("skipping singleton class '{class}' in retrieval");
                continue;
            }
            let mut order: Vec<usize> = (0..objects).filter(|&o| o != q).collect();
            order.sort_by(|&a, &b| {
                matrix[q * objects + a]
                    .partial_cmp(&matrix[q * objects + b])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let hits = order
                .iter()
                .take(n)
                .filter(|&&o| corpus.labels[o] == *class)
                .count();
            let denom = n.min(class_size - 1);
            total += 100.0 * hits as f64 / denom as f64;
            queries += 1;
        }
        precision.push((n, if queries == 0 { 0.0 } else { total / queries as f64 }));
    }

    let mut report = ExperimentReport::new("retrieval");
    report.param("objects", objects);
    report.param("metric", format!("{metric:?}"));
    // Recall@n = |same-class hits in top n| / min(n, class size − 1),
    // averaged over queries; stated here to pin down the denominator.
    report.param(
        "definition",
        "recall@n = 100*|same-class in top n|/min(n, class_size-1), mean over queries",
    );
    let mut digest = Digest::new();
    for h in &corpus.histograms {
        digest.floats(h.values());
    }
    report.input_digest = digest.ints(n_list).hex();
    report.columns = ["n", "mean_recall_percent"].map(String::from).to_vec();
    for &(n, p) in &precision {
        report.push_row(vec![n.to_string(), format!("{p}")]);
    }

    Ok(RetrievalOutcome { precision, report })
}

fn join(list: &[usize]) -> String {
    list.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}
