//! Bag-of-words histogram corpora over a cluster-center graph.
//!
//! Corpus file format: header `m d objects`, then `m` lines of `d`
//! coordinates (the cluster centers), then one line per object:
//! `label h₀ … h_{m−1}`.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graphot::error::{GraphotError, Result};
use graphot::{Graph, VertexDistribution};

#[derive(Debug, Clone)]
pub struct HistogramCorpus {
    pub centers: Vec<Vec<f64>>,
    pub histograms: Vec<VertexDistribution>,
    pub labels: Vec<String>,
}

impl HistogramCorpus {
    pub fn num_objects(&self) -> usize {
        self.histograms.len()
    }

    pub fn num_centers(&self) -> usize {
        self.centers.len()
    }

    pub fn class_size(&self, label: &str) -> usize {
        self.labels.iter().filter(|l| l.as_str() == label).count()
    }
}

/// Euclidean minimum spanning tree over the points (Prim), augmented with
/// each point's `knn` nearest neighbors (ties broken by lower index),
/// deduplicated. Connected by construction; duplicate points rejected.
pub fn build_emst_knn_graph(points: &[Vec<f64>], knn: usize) -> Result<Graph> {
    let m = points.len();
    if m < 2 {
        return Err(GraphotError::Validation("need at least two points".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(GraphotError::ShapeMismatch { expected: dim, actual: 0 });
    }
    let d2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    for i in 0..m {
        for j in (i + 1)..m {
            if d2(&points[i], &points[j]) == 0.0 {
                return Err(GraphotError::Validation(format!(
                    "duplicate points {i} and {j}"
                )));
            }
        }
    }

    let mut edges = std::collections::BTreeSet::new();

    // Prim's algorithm, dense.
    let mut in_tree = vec![false; m];
    let mut best = vec![(f64::INFINITY, 0usize); m];
    in_tree[0] = true;
    for j in 1..m {
        best[j] = (d2(&points[0], &points[j]), 0);
    }
    for _ in 1..m {
        let next = (0..m)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].0.partial_cmp(&best[b].0).unwrap().then(a.cmp(&b)))
            .expect("vertices remain");
        let anchor = best[next].1;
        edges.insert((anchor.min(next), anchor.max(next)));
        in_tree[next] = true;
        for j in 0..m {
            if !in_tree[j] {
                let d = d2(&points[next], &points[j]);
                if d < best[j].0 {
                    best[j] = (d, next);
                }
            }
        }
    }

    // kNN augmentation.
    for i in 0..m {
        let mut order: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            d2(&points[i], &points[a])
                .partial_cmp(&d2(&points[i], &points[b]))
                .unwrap()
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(knn) {
            edges.insert((i.min(j), i.max(j)));
        }
    }

    Graph::new(m, edges.into_iter().collect())
}

pub fn parse_corpus(text: &str) -> Result<HistogramCorpus> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.split('#').next().unwrap_or("").trim()))
        .filter(|(_, line)| !line.is_empty());
    let (lineno, header) =
        lines.next().ok_or(GraphotError::Parse { line: 1, msg: "empty corpus".into() })?;
    let mut parts = header.split_whitespace();
    let mut next_usize = |what: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GraphotError::Parse { line: lineno, msg: format!("bad {what}") })
    };
    let m = next_usize("center count")?;
    let d = next_usize("dimension")?;
    let objects = next_usize("object count")?;

    let mut centers = Vec::with_capacity(m);
    for _ in 0..m {
        let (lineno, line) = lines.next().ok_or(GraphotError::Parse {
            line: 0,
            msg: "missing center line".into(),
        })?;
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| GraphotError::Parse { line: lineno, msg: "bad coordinate".into() })?;
        if coords.len() != d {
            return Err(GraphotError::Parse { line: lineno, msg: "wrong dimension".into() });
        }
        centers.push(coords);
    }

    let mut histograms = Vec::with_capacity(objects);
    let mut labels = Vec::with_capacity(objects);
    for _ in 0..objects {
        let (lineno, line) = lines.next().ok_or(GraphotError::Parse {
            line: 0,
            msg: "missing object line".into(),
        })?;
        let mut toks = line.split_whitespace();
        let label = toks
            .next()
            .ok_or(GraphotError::Parse { line: lineno, msg: "missing label".into() })?;
        let values: Vec<f64> = toks
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| GraphotError::Parse { line: lineno, msg: "bad histogram value".into() })?;
        if values.len() != m {
            return Err(GraphotError::ShapeMismatch { expected: m, actual: values.len() });
        }
        histograms.push(VertexDistribution::new(values)?);
        labels.push(label.to_string());
    }
    Ok(HistogramCorpus { centers, histograms, labels })
}

pub fn write_corpus(corpus: &HistogramCorpus) -> String {
    let mut out = String::new();
    let d = corpus.centers.first().map_or(0, |c| c.len());
    let _ = writeln!(out, "{} {} {}", corpus.num_centers(), d, corpus.num_objects());
    for c in &corpus.centers {
        let strs: Vec<String> = c.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", strs.join(" "));
    }
    for (label, h) in corpus.labels.iter().zip(&corpus.histograms) {
        let strs: Vec<String> = h.values().iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{label} {}", strs.join(" "));
    }
    out
}

/// Seeded three-class corpus on a 50-center EMST+2NN graph, constructed so
/// that classes occupy distant graph regions while objects of one class
/// spread mass over differing nearby bins: bin overlap (L1) separates the
/// classes poorly, graph distance separates them well.
pub fn synthetic_three_class_corpus(
    seed: u64,
    objects_per_class: usize,
) -> (HistogramCorpus, Graph) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors = [[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]];
    let mut centers: Vec<Vec<f64>> = Vec::new();
    for anchor in &anchors {
        for _ in 0..16 {
            centers.push(vec![
                anchor[0] + rng.gen_range(-0.5..0.5),
                anchor[1] + rng.gen_range(-0.5..0.5),
            ]);
        }
    }
    // A couple of bridge centers so the regions join through short paths.
    centers.push(vec![2.0, 0.0]);
    centers.push(vec![1.0, 1.75]);
    let graph = build_emst_knn_graph(&centers, 2).expect("synthetic centers are distinct");
    let m = centers.len();

    let mut histograms = Vec::new();
    let mut labels = Vec::new();
    for (class, name) in ["a", "b", "c"].iter().enumerate() {
        let bins: Vec<usize> = (class * 16..(class + 1) * 16).collect();
        for _ in 0..objects_per_class {
            // Mass on a random half of the class bins, plus a uniform
            // background so every solve stays feasible at small k.
            let mut values = vec![0.02 / m as f64; m];
            let mut chosen: Vec<usize> = bins
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.5))
                .collect();
            if chosen.is_empty() {
                chosen.push(bins[rng.gen_range(0..bins.len())]);
            }
            for &b in &chosen {
                values[b] += rng.gen_range(0.5..1.0);
            }
            let total: f64 = values.iter().sum();
            for v in &mut values {
                *v /= total;
            }
            histograms.push(VertexDistribution::new(values).unwrap());
            labels.push(name.to_string());
        }
    }
    (HistogramCorpus { centers, histograms, labels }, graph)
}
