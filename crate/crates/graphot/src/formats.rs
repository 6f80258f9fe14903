//! Plain-text exchange formats.
//!
//! - Graph: `n m` header line, then `m` lines `u v` (0-based); `#` starts
//!   a comment line anywhere.
//! - Distribution: `n` lines, one decimal per line, graph vertex order.
//! - Flow: `2m` lines in canonical oriented-edge order.
//! - Trajectory: CSV with header `t,v0,...,v{n-1}`.
//! - Transport path: a directory holding `meta`, `q.csv` ((k+1)×n) and
//!   `J.csv` (k×2m).
//! - Transport plan: sparse `v,w,T(v,w)` triplets.
//! - Pruned graph sidecar: `old_id new_id` lines.

use std::fmt::Write as _;
use std::path::Path;

use crate::advection::AdvectionTrajectory;
use crate::baselines::TransportPlan;
use crate::error::{GraphotError, Result};
use crate::graph::{FlowField, Graph, VertexDistribution};
use crate::prune::PrunedGraph;
use crate::solver::TransportPath;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.split('#').next().unwrap_or("").trim()))
        .filter(|(_, line)| !line.is_empty())
}

fn parse_err(line: usize, msg: impl Into<String>) -> GraphotError {
    GraphotError::Parse { line, msg: msg.into() }
}

/// Parses the `n m` / edge-list format.
pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut lines = content_lines(text);
    let (lineno, header) = lines.next().ok_or_else(|| parse_err(1, "empty graph file"))?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(lineno, "header must be 'n m'"))?;
    let m: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(lineno, "header must be 'n m'"))?;
    if parts.next().is_some() {
        return Err(parse_err(lineno, "trailing tokens after 'n m' header"));
    }

    let mut edges = Vec::with_capacity(m);
    for (lineno, line) in lines {
        let mut parts = line.split_whitespace();
        let u: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(lineno, "edge line must be 'u v'"))?;
        let v: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(lineno, "edge line must be 'u v'"))?;
        if parts.next().is_some() {
            return Err(parse_err(lineno, "trailing tokens after edge"));
        }
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(GraphotError::Parse {
            line: text.lines().count(),
            msg: format!("header promised {m} edges, found {}", edges.len()),
        });
    }
    Graph::new(n, edges)
}

/// Canonical serialization; `parse_graph ∘ write_graph` is the identity.
pub fn write_graph(g: &Graph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", g.num_vertices(), g.num_edges());
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

pub fn parse_distribution(text: &str, n: usize) -> Result<VertexDistribution> {
    let mut values = Vec::with_capacity(n);
    for (lineno, line) in content_lines(text) {
        let x: f64 = line
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad mass value '{line}'")))?;
        values.push(x);
    }
    if values.len() != n {
        return Err(GraphotError::ShapeMismatch { expected: n, actual: values.len() });
    }
    VertexDistribution::new(values)
}

pub fn write_distribution(p: &VertexDistribution) -> String {
    let mut out = String::new();
    for x in p.values() {
        let _ = writeln!(out, "{x}");
    }
    out
}

pub fn parse_flow(text: &str, g: &Graph) -> Result<FlowField> {
    let m2 = g.num_oriented_edges();
    let mut values = Vec::with_capacity(m2);
    for (lineno, line) in content_lines(text) {
        let x: f64 = line
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad flow value '{line}'")))?;
        values.push(x);
    }
    if values.len() != m2 {
        return Err(GraphotError::ShapeMismatch { expected: m2, actual: values.len() });
    }
    FlowField::new(values)
}

pub fn write_flow(f: &FlowField) -> String {
    let mut out = String::new();
    for x in f.values() {
        let _ = writeln!(out, "{x}");
    }
    out
}

pub fn write_trajectory_csv(traj: &AdvectionTrajectory) -> String {
    let n = traj.samples.first().map_or(0, |s| s.len());
    let mut out = String::from("t");
    for v in 0..n {
        let _ = write!(out, ",v{v}");
    }
    out.push('\n');
    for (t, sample) in traj.times.iter().zip(&traj.samples) {
        let _ = write!(out, "{t}");
        for x in sample {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

fn matrix_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let mut first = true;
        for x in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{x}");
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Writes `meta`, `q.csv` and `J.csv` under `dir` (created if missing).
pub fn export_transport_path(path: &TransportPath, g: &Graph, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut meta = String::new();
    let _ = writeln!(meta, "n {}", g.num_vertices());
    let _ = writeln!(meta, "m {}", g.num_edges());
    let _ = writeln!(meta, "k {}", path.k);
    let _ = writeln!(meta, "objective {}", path.objective);
    let _ = writeln!(meta, "distance {}", path.distance);
    let _ = writeln!(meta, "iterations {}", path.report.iterations);
    let _ = writeln!(meta, "primal_residual {}", path.report.primal_residual);
    let _ = writeln!(meta, "dual_residual {}", path.report.dual_residual);
    let _ = writeln!(meta, "feasibility_residual {}", path.report.feasibility_residual);
    std::fs::write(dir.join("meta"), meta)?;
    std::fs::write(dir.join("q.csv"), matrix_csv(&path.densities))?;
    std::fs::write(dir.join("J.csv"), matrix_csv(&path.flows))?;
    Ok(())
}

/// Sparse triplet export, entries above `floor` (1e-12 by convention).
pub fn write_plan_triplets(plan: &TransportPlan, floor: f64) -> String {
    let mut out = String::from("v,w,mass\n");
    for (v, w, t) in plan.triplets(floor) {
        let _ = writeln!(out, "{v},{w},{t}");
    }
    out
}

/// `old_id new_id` sidecar for a pruned graph.
pub fn write_vertex_map(pruned: &PrunedGraph) -> String {
    let mut out = String::new();
    for (new_id, &old_id) in pruned.new_to_old.iter().enumerate() {
        let _ = writeln!(out, "{old_id} {new_id}");
    }
    out
}
