//! Staggered time discretization of the continuous-flow transportation
//! distance, solved by consensus proximal splitting.
//!
//! The convex program over densities `q⁰..q^k ≥ 0` and oriented flows
//! `J¹..J^k ≥ 0` is
//!
//! ```text
//! minimize  k · Σ_{i,e=(v→w)} J^i(e)²/2 · (1/q^{i−1}(v) + 1/q^i(w))
//! such that q⁰ = p0,  q^k = p1,  DᵀJ^i = q^i − q^{i−1}
//! ```
//!
//! Each energy term splits into two perspective pieces,
//! `k·J²/(2·q_tail) + k·J²/(2·q_head)`, each given a consensus copy of
//! its flow and density. One iteration alternates (a) the closed-form
//! perspective prox per copy (a cubic root, [`prox`]), (b) a weighted
//! average of the copies projected onto the continuity constraints (a
//! space-time CG solve, [`project`]), and (c) a dual update. The penalty
//! parameter is rescaled by residual balancing.

mod prox;
mod project;

use rayon::prelude::*;

use crate::advection::momentum_norm_squared;
use crate::error::{GraphotError, Result};
use crate::graph::{FlowField, Graph, VertexDistribution};
use project::{CgScratch, Projector};

/// Tolerances and limits for [`solve`]. Initialization is deterministic
/// and seed-free; identical inputs and config give identical output.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Bound on `‖DᵀJⁱ − (qⁱ − qⁱ⁻¹)‖∞` for the returned path.
    pub tol_feasibility: f64,
    /// Relative objective change over 50 iterations at convergence.
    pub tol_objective: f64,
    pub max_iterations: usize,
    /// Density floor used only inside iteration-time objective tracking;
    /// reported solutions keep exact zeros.
    pub epsilon_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_feasibility: 1e-6,
            tol_objective: 1e-6,
            max_iterations: 50_000,
            epsilon_floor: 1e-10,
        }
    }
}

/// Iteration diagnostics of a finished solve.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceReport {
    pub iterations: usize,
    /// Final consensus (primal) residual, ∞-norm.
    pub primal_residual: f64,
    /// Final iterate movement (dual residual / penalty), ∞-norm.
    pub dual_residual: f64,
    /// `max_i ‖DᵀJⁱ − (qⁱ − qⁱ⁻¹)‖∞` of the returned, cleaned path.
    pub feasibility_residual: f64,
    /// `max_i |𝟙ᵀqⁱ − 1|` of the returned path.
    pub max_mass_deviation: f64,
    /// Total conjugate-gradient iterations spent in projections.
    pub cg_iterations: usize,
}

/// A solved staggered transport path.
#[derive(Debug, Clone)]
pub struct TransportPath {
    pub k: usize,
    /// `k+1` density slices; slice 0 is `p0`, slice `k` is `p1`.
    pub densities: Vec<Vec<f64>>,
    /// `k` flow slices in canonical oriented-edge order.
    pub flows: Vec<Vec<f64>>,
    /// Optimal value of the discrete program (the squared distance).
    pub objective: f64,
    pub distance: f64,
    /// Discrete advective speed of each step; constant at an optimum.
    pub speeds: Vec<f64>,
    pub report: ConvergenceReport,
}

/// Forward and backward solves with the averaged distance.
#[derive(Debug, Clone)]
pub struct SymmetrizedPath {
    pub forward: TransportPath,
    pub backward: TransportPath,
    pub averaged_distance: f64,
}

/// The discrete objective `k·Σᵢ mnsⁱ` recomputed from raw slices.
/// Errors if any flow passes through zero density.
pub fn objective(
    g: &Graph,
    densities: &[Vec<f64>],
    flows: &[Vec<f64>],
    k: usize,
) -> Result<f64> {
    if densities.len() != k + 1 {
        return Err(GraphotError::ShapeMismatch { expected: k + 1, actual: densities.len() });
    }
    if flows.len() != k {
        return Err(GraphotError::ShapeMismatch { expected: k, actual: flows.len() });
    }
    let mut sum = 0.0;
    for i in 1..=k {
        let flow = FlowField::new(flows[i - 1].clone())?;
        sum += momentum_norm_squared(g, &densities[i - 1], &densities[i], &flow)?;
    }
    Ok(k as f64 * sum)
}

/// Discrete advective speed of each step, `sᵢ = k·√(mnsⁱ)`; equivalently
/// the square root of each step's contribution to the objective scaled by
/// `k`. At an optimum the speeds are equal and average to the distance.
pub fn per_step_speeds(g: &Graph, path: &TransportPath) -> Result<Vec<f64>> {
    let k = path.k;
    let mut speeds = Vec::with_capacity(k);
    for i in 1..=k {
        let flow = FlowField::new(path.flows[i - 1].clone())?;
        let mns = momentum_norm_squared(g, &path.densities[i - 1], &path.densities[i], &flow)?;
        speeds.push((k as f64 * k as f64 * mns).sqrt());
    }
    Ok(speeds)
}

/// Solves both orientations and averages the distances.
pub fn solve_symmetrized(
    g: &Graph,
    p0: &VertexDistribution,
    p1: &VertexDistribution,
    k: usize,
    cfg: &SolverConfig,
) -> Result<SymmetrizedPath> {
    let forward = solve(g, p0, p1, k, cfg)?;
    let backward = solve(g, p1, p0, k, cfg)?;
    let averaged_distance = 0.5 * (forward.distance + backward.distance);
    Ok(SymmetrizedPath { forward, backward, averaged_distance })
}

/// Per-step consensus copies and scaled duals: `(x, y)` pairs for the
/// tail term `k·x²/(2·q^{i−1}(tail))` and head term `k·x²/(2·q^i(head))`
/// of every oriented edge.
struct StepState {
    zt_x: Vec<f64>,
    zt_y: Vec<f64>,
    zh_x: Vec<f64>,
    zh_y: Vec<f64>,
    ut_x: Vec<f64>,
    ut_y: Vec<f64>,
    uh_x: Vec<f64>,
    uh_y: Vec<f64>,
}

impl StepState {
    fn new(m2: usize) -> Self {
        StepState {
            zt_x: vec![0.0; m2],
            zt_y: vec![0.0; m2],
            zh_x: vec![0.0; m2],
            zh_y: vec![0.0; m2],
            ut_x: vec![0.0; m2],
            ut_y: vec![0.0; m2],
            uh_x: vec![0.0; m2],
            uh_y: vec![0.0; m2],
        }
    }

}

/// Computes the discrete transportation distance `W̄_k(p0, p1)` and its
/// displacement path.
pub fn solve(
    g: &Graph,
    p0: &VertexDistribution,
    p1: &VertexDistribution,
    k: usize,
    cfg: &SolverConfig,
) -> Result<TransportPath> {
    let n = g.num_vertices();
    if p0.len() != n {
        return Err(GraphotError::ShapeMismatch { expected: n, actual: p0.len() });
    }
    if p1.len() != n {
        return Err(GraphotError::ShapeMismatch { expected: n, actual: p1.len() });
    }
    if k == 0 {
        return Err(GraphotError::Validation("k must be at least 1".into()));
    }
    if !(cfg.tol_feasibility > 0.0 && cfg.tol_objective > 0.0 && cfg.epsilon_floor > 0.0) {
        return Err(GraphotError::Validation("solver tolerances must be positive".into()));
    }

    if p0.values() == p1.values() {
        return Ok(zero_path(g, p0, k));
    }
    let need = required_steps(g, p0, p1);
    if need > k {
        return Err(GraphotError::Infeasible(format!(
            "support mass must travel {need} hops but only k = {k} time steps are available; \
             the discrete energy is infinite (use k ≥ {need})"
        )));
    }

    solve_laddered(g, p0, p1, k, cfg, need).map(|(path, _)| path)
}

/// Coarsest level of the time-grid continuation ladder.
const CONTINUATION_MIN_K: usize = 12;

/// Splitting converges much faster when warm-started from a coarser time
/// grid, so k is reached by repeated doubling from the coarsest feasible
/// level (deterministic throughout).
fn solve_laddered(
    g: &Graph,
    p0: &VertexDistribution,
    p1: &VertexDistribution,
    k: usize,
    cfg: &SolverConfig,
    need: usize,
) -> Result<(TransportPath, f64)> {
    let base = CONTINUATION_MIN_K.max(need);
    if k <= base {
        return Admm::new(g, p0.values(), p1.values(), k, cfg).run();
    }
    let coarse_k = k.div_ceil(2).max(base);
    let (coarse, rho) = solve_laddered(g, p0, p1, coarse_k, cfg, need)?;
    let (q, j) = interpolate_path(g, &coarse, k);
    let mut admm = Admm::new(g, p0.values(), p1.values(), k, cfg);
    admm.set_warm_start(q, j, rho);
    admm.run()
}

/// Resamples a coarse path onto a finer time grid: densities by linear
/// interpolation, flows by assigning each fine step the covering coarse
/// flow scaled by the grid ratio. The warm-start projection absorbs the
/// small continuity mismatch.
fn interpolate_path(g: &Graph, coarse: &TransportPath, k: usize) -> (Vec<f64>, Vec<f64>) {
    let n = g.num_vertices();
    let m2 = g.num_oriented_edges();
    let kc = coarse.k;
    let mut q = vec![0.0; (k + 1) * n];
    for i in 0..=k {
        let s = i as f64 / k as f64 * kc as f64;
        let lower = (s.floor() as usize).min(kc - 1);
        let frac = s - lower as f64;
        for v in 0..n {
            q[i * n + v] = (1.0 - frac) * coarse.densities[lower][v]
                + frac * coarse.densities[lower + 1][v];
        }
    }
    let scale = kc as f64 / k as f64;
    let mut j = vec![0.0; k * m2];
    for i in 1..=k {
        let c = ((i * kc).div_ceil(k)).clamp(1, kc);
        for e in 0..m2 {
            j[(i - 1) * m2 + e] = scale * coarse.flows[c - 1][e];
        }
    }
    (q, j)
}

/// Mass moves at most one hop per time step, so a finite-energy path
/// needs every target support vertex within `k` hops of the source
/// support and vice versa. (Necessary, not sufficient: the exact
/// condition is a bipartite flow feasibility check.)
fn required_steps(g: &Graph, p0: &VertexDistribution, p1: &VertexDistribution) -> usize {
    let s0 = p0.support();
    let s1 = p1.support();
    let d0 = g.multi_source_distances(&s0);
    let d1 = g.multi_source_distances(&s1);
    s1.iter().map(|&w| d0[w]).chain(s0.iter().map(|&v| d1[v])).max().unwrap_or(0)
}

fn zero_path(g: &Graph, p0: &VertexDistribution, k: usize) -> TransportPath {
    TransportPath {
        k,
        densities: vec![p0.values().to_vec(); k + 1],
        flows: vec![vec![0.0; g.num_oriented_edges()]; k],
        objective: 0.0,
        distance: 0.0,
        speeds: vec![0.0; k],
        report: ConvergenceReport::default(),
    }
}

/// Below this many consensus terms the rayon dispatch overhead dominates
/// the arithmetic; run the per-step loops sequentially.
const PAR_TERM_THRESHOLD: usize = 4096;

/// Over-relaxation factor for the consensus update.
const RELAXATION: f64 = 1.7;

/// Densities are floored at this value when matching per-term penalties
/// to the local curvature `2α/q`, capping the penalty spread.
const PENALTY_DENSITY_FLOOR: f64 = 1e-6;

struct Admm<'g> {
    g: &'g Graph,
    n: usize,
    m2: usize,
    k: usize,
    alpha: f64,
    cfg: SolverConfig,
    proj: Projector,
    /// Interior densities with no incident energy term (a phantom copy at
    /// the base penalty holds them near their previous value).
    phantom: Vec<bool>,
    q: Vec<f64>,
    j: Vec<f64>,
    steps: Vec<StepState>,
    /// Per-term penalties for the tail/head perspective copies, matched
    /// to the local curvature and refreshed alongside the global scale.
    rho_tail: Vec<f64>,
    rho_head: Vec<f64>,
    /// Global penalty multiplier driven by residual balancing.
    rho_scale: f64,
    lam: Vec<f64>,
    scratch: CgScratch,
    parallel: bool,
    warm: bool,
}

impl<'g> Admm<'g> {
    fn new(g: &'g Graph, p0: &[f64], p1: &[f64], k: usize, cfg: &SolverConfig) -> Self {
        let n = g.num_vertices();
        let m2 = g.num_oriented_edges();
        let proj = Projector::new(g, p0, p1, k);

        // Interior densities with no unmasked energy copy at all.
        let mut phantom = vec![false; k.saturating_sub(1) * n];
        for i in 1..k {
            for v in 0..n {
                let tails = g.out_edges(v).iter().filter(|&&e| !proj.is_masked(i + 1, e));
                let heads = g.in_edges(v).iter().filter(|&&e| !proj.is_masked(i, e));
                if tails.count() + heads.count() == 0 {
                    phantom[(i - 1) * n + v] = true;
                }
            }
        }

        let mut q = vec![0.0; (k + 1) * n];
        for i in 0..=k {
            let t = i as f64 / k as f64;
            for v in 0..n {
                q[i * n + v] = (1.0 - t) * p0[v] + t * p1[v];
            }
        }

        Admm {
            g,
            n,
            m2,
            k,
            alpha: k as f64 / 2.0,
            cfg: cfg.clone(),
            proj,
            phantom,
            q,
            j: vec![0.0; k * m2],
            steps: (0..k).map(|_| StepState::new(m2)).collect(),
            rho_tail: vec![k as f64; k * m2],
            rho_head: vec![k as f64; k * m2],
            rho_scale: 1.0,
            lam: vec![0.0; k * n],
            scratch: CgScratch::new(k * n),
            parallel: k * m2 >= PAR_TERM_THRESHOLD,
            warm: false,
        }
    }

    /// Replaces the trivial-path start with an interpolated coarse path
    /// and its final penalty scale (masked flows are re-zeroed by the
    /// initial projection).
    fn set_warm_start(&mut self, q: Vec<f64>, j: Vec<f64>, rho_scale: f64) {
        debug_assert_eq!(q.len(), self.q.len());
        debug_assert_eq!(j.len(), self.j.len());
        self.q = q;
        self.j = j;
        self.rho_scale = rho_scale.clamp(1e-8, 1e8);
        self.warm = true;
    }

    /// The base penalty: curvature of a term at a fully mixed density.
    fn base_rho(&self) -> f64 {
        self.rho_scale * self.k as f64
    }

    /// Matches every term's penalty to its current curvature `2α/q` and
    /// pushes the implied weights into the projector. Duals are rescaled
    /// so the underlying multipliers stay continuous.
    fn refresh_penalties(&mut self) {
        let (n, m2, k) = (self.n, self.m2, self.k);
        let scale = self.rho_scale;
        let alpha = self.alpha;
        for i in 1..=k {
            let s = i - 1;
            let q_tail = &self.q[s * n..(s + 1) * n];
            let q_head = &self.q[(s + 1) * n..(s + 2) * n];
            let st = &mut self.steps[s];
            for e in 0..m2 {
                let idx = s * m2 + e;
                if self.proj.is_masked(i, e) {
                    self.rho_tail[idx] = scale * k as f64;
                    self.rho_head[idx] = scale * k as f64;
                    continue;
                }
                let (a, b) = self.g.oriented_edges()[e];
                let new_t =
                    scale * 2.0 * alpha / q_tail[a].max(PENALTY_DENSITY_FLOOR).min(1.0);
                let new_h =
                    scale * 2.0 * alpha / q_head[b].max(PENALTY_DENSITY_FLOOR).min(1.0);
                let ratio_t = self.rho_tail[idx] / new_t;
                let ratio_h = self.rho_head[idx] / new_h;
                st.ut_x[e] *= ratio_t;
                st.ut_y[e] *= ratio_t;
                st.uh_x[e] *= ratio_h;
                st.uh_y[e] *= ratio_h;
                self.rho_tail[idx] = new_t;
                self.rho_head[idx] = new_h;
            }
        }

        let mut wj = vec![1.0; k * m2];
        for i in 1..=k {
            let s = i - 1;
            for e in 0..m2 {
                if !self.proj.is_masked(i, e) {
                    wj[s * m2 + e] = self.rho_tail[s * m2 + e] + self.rho_head[s * m2 + e];
                }
            }
        }
        let mut wq = vec![0.0; k.saturating_sub(1) * n];
        for i in 1..k {
            for v in 0..n {
                let idx = (i - 1) * n + v;
                if self.phantom[idx] {
                    wq[idx] = self.base_rho();
                    continue;
                }
                let mut acc = 0.0;
                for &e in self.g.out_edges(v) {
                    if !self.proj.is_masked(i + 1, e) {
                        acc += self.rho_tail[i * m2 + e];
                    }
                }
                for &e in self.g.in_edges(v) {
                    if !self.proj.is_masked(i, e) {
                        acc += self.rho_head[(i - 1) * m2 + e];
                    }
                }
                wq[idx] = acc;
            }
        }
        self.proj.set_weights(wq, wj);
    }

    /// Minimum-norm continuity flow through the graph Laplacian, with the
    /// negative part folded onto reversed orientations so the start point
    /// is nonnegative.
    fn init_flows(&mut self, p0: &[f64], p1: &[f64]) {
        let n = self.n;
        let delta: Vec<f64> =
            (0..n).map(|v| (p1[v] - p0[v]) / self.k as f64).collect();
        let phi = laplacian_solve(self.g, &delta);
        let per_step: Vec<f64> = self
            .g
            .oriented_edges()
            .iter()
            .map(|&(a, b)| (phi[b] - phi[a]).max(0.0))
            .collect();
        for i in 1..=self.k {
            let j_i = &mut self.j[(i - 1) * self.m2..i * self.m2];
            for e in 0..self.m2 {
                j_i[e] = if self.proj.is_masked(i, e) { 0.0 } else { per_step[e] };
            }
        }
    }

    fn run(mut self) -> Result<(TransportPath, f64)> {
        if !self.warm {
            let p0 = self.proj_p0();
            let p1 = self.proj_p1();
            self.init_flows(&p0, &p1);
        }
        self.refresh_penalties();
        let outcome = self.proj.project(
            &mut self.q,
            &mut self.j,
            &mut self.lam,
            &mut self.scratch,
            1e-10,
            4000,
        );
        let mut cg_total = outcome.iterations;

        // Local copies start on the global point, duals at zero.
        self.reset_copies();

        let mut history: Vec<(usize, f64, f64, f64)> = Vec::new();
        let mut obj_window: std::collections::VecDeque<f64> =
            std::collections::VecDeque::with_capacity(51);
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        let tol = self.cfg.tol_feasibility;

        let mut iter = 0;
        while iter < self.cfg.max_iterations {
            iter += 1;

            self.prox_step();

            let (q_prev, j_prev) = (self.q.clone(), self.j.clone());
            self.average_step();
            let cg_tol = (0.02 * primal).clamp(1e-10, 1e-4).min(0.1 * tol);
            let out =
                self.proj.project(&mut self.q, &mut self.j, &mut self.lam, &mut self.scratch, cg_tol, 300);
            cg_total += out.iterations;

            primal = self.dual_update();
            dual = max_abs_diff(&self.q, &q_prev).max(max_abs_diff(&self.j, &j_prev));

            let obj = self.tracked_objective();
            if obj_window.len() == 51 {
                obj_window.pop_front();
            }
            obj_window.push_back(obj);

            if iter % 100 == 0 {
                history.push((iter, primal, dual, obj));
                log::debug!(
                    "iter {iter}: scale {:.3e} primal {primal:.3e} dual {dual:.3e} obj {obj:.9}",
                    self.rho_scale
                );
            }

            let obj_settled = obj_window.len() == 51 && {
                let old = obj_window.front().copied().unwrap_or(obj);
                (obj - old).abs() <= self.cfg.tol_objective * obj.abs().max(1e-9)
            };
            if primal <= 0.5 * tol && dual <= 0.5 * tol && obj_settled {
                return self.finish(iter, primal, dual, cg_total);
            }

            if iter % 25 == 0 {
                self.rebalance(primal, dual);
                self.refresh_penalties();
            }
        }

        history.push((iter, primal, dual, self.tracked_objective()));
        Err(GraphotError::NonConvergence { iterations: iter, primal, dual, history })
    }

    fn proj_p0(&self) -> Vec<f64> {
        self.q[..self.n].to_vec()
    }

    fn proj_p1(&self) -> Vec<f64> {
        self.q[self.k * self.n..].to_vec()
    }

    fn reset_copies(&mut self) {
        let (n, m2) = (self.n, self.m2);
        let q = &self.q;
        let j = &self.j;
        let tails: Vec<usize> = self.g.oriented_edges().iter().map(|&(a, _)| a).collect();
        let heads: Vec<usize> = self.g.oriented_edges().iter().map(|&(_, b)| b).collect();
        for (s, st) in self.steps.iter_mut().enumerate() {
            let j_i = &j[s * m2..(s + 1) * m2];
            let q_tail = &q[s * n..(s + 1) * n];
            let q_head = &q[(s + 1) * n..(s + 2) * n];
            for e in 0..m2 {
                st.zt_x[e] = j_i[e];
                st.zh_x[e] = j_i[e];
                st.zt_y[e] = q_tail[tails[e]];
                st.zh_y[e] = q_head[heads[e]];
            }
        }
    }

    fn prox_step(&mut self) {
        let (n, m2) = (self.n, self.m2);
        let alpha = self.alpha;
        let q = &self.q;
        let j = &self.j;
        let proj = &self.proj;
        let rho_tail = &self.rho_tail;
        let rho_head = &self.rho_head;
        let oriented = self.g.oriented_edges();
        let body = |s: usize, st: &mut StepState| {
            let step = s + 1;
            let j_i = &j[s * m2..(s + 1) * m2];
            let q_tail = &q[s * n..(s + 1) * n];
            let q_head = &q[(s + 1) * n..(s + 2) * n];
            let mask = proj.step_mask(step);
            for e in 0..m2 {
                if mask.map_or(false, |m| m[e]) {
                    continue;
                }
                let idx = s * m2 + e;
                let (a, b) = oriented[e];
                let relax = |z: f64, x_old: f64| RELAXATION * z + (1.0 - RELAXATION) * x_old;
                let (zx, zy) = prox::perspective_prox(
                    j_i[e] - st.ut_x[e],
                    q_tail[a] - st.ut_y[e],
                    alpha,
                    rho_tail[idx],
                );
                st.zt_x[e] = relax(zx, j_i[e]);
                st.zt_y[e] = relax(zy, q_tail[a]);
                let (zx, zy) = prox::perspective_prox(
                    j_i[e] - st.uh_x[e],
                    q_head[b] - st.uh_y[e],
                    alpha,
                    rho_head[idx],
                );
                st.zh_x[e] = relax(zx, j_i[e]);
                st.zh_y[e] = relax(zy, q_head[b]);
            }
        };
        if self.parallel {
            self.steps.par_iter_mut().enumerate().for_each(|(s, st)| body(s, st));
        } else {
            self.steps.iter_mut().enumerate().for_each(|(s, st)| body(s, st));
        }
    }

    /// Writes the weighted average of copies-plus-duals into the global
    /// arrays (the pre-projection point `x̄`).
    fn average_step(&mut self) {
        let (n, m2, k) = (self.n, self.m2, self.k);
        let proj = &self.proj;
        let steps = &self.steps;
        let g = self.g;

        let rho_tail = &self.rho_tail;
        let rho_head = &self.rho_head;
        let j_avg = |idx: usize| {
            let (s, e) = (idx / m2, idx % m2);
            if proj.is_masked(s + 1, e) {
                0.0
            } else {
                let st = &steps[s];
                let (rt, rh) = (rho_tail[idx], rho_head[idx]);
                (rt * (st.zt_x[e] + st.ut_x[e]) + rh * (st.zh_x[e] + st.uh_x[e])) / (rt + rh)
            }
        };
        let j_new: Vec<f64> = if self.parallel {
            (0..k * m2).into_par_iter().map(j_avg).collect()
        } else {
            (0..k * m2).map(j_avg).collect()
        };
        self.j.copy_from_slice(&j_new);

        if k >= 2 {
            let q_old = &self.q;
            let phantom = &self.phantom;
            let q_avg = |idx: usize| {
                let (im1, v) = (idx / n, idx % n);
                let i = im1 + 1; // interior slice index 1..k-1
                if phantom[idx] {
                    return q_old[i * n + v];
                }
                let mut acc = 0.0;
                let mut weight = 0.0;
                // Tail copies live at step i+1 (state index i).
                let st_next = &steps[i];
                for &e in g.out_edges(v) {
                    if !proj.is_masked(i + 1, e) {
                        let rho = rho_tail[i * m2 + e];
                        acc += rho * (st_next.zt_y[e] + st_next.ut_y[e]);
                        weight += rho;
                    }
                }
                // Head copies live at step i (state index i−1).
                let st_here = &steps[i - 1];
                for &e in g.in_edges(v) {
                    if !proj.is_masked(i, e) {
                        let rho = rho_head[(i - 1) * m2 + e];
                        acc += rho * (st_here.zh_y[e] + st_here.uh_y[e]);
                        weight += rho;
                    }
                }
                acc / weight
            };
            let interior: Vec<f64> = if self.parallel {
                (0..(k - 1) * n).into_par_iter().map(q_avg).collect()
            } else {
                (0..(k - 1) * n).map(q_avg).collect()
            };
            self.q[n..k * n].copy_from_slice(&interior);
        }
    }

    /// Updates the scaled duals against the new global point; returns the
    /// consensus (primal) residual in the ∞-norm.
    fn dual_update(&mut self) -> f64 {
        let (n, m2) = (self.n, self.m2);
        let q = &self.q;
        let j = &self.j;
        let proj = &self.proj;
        let oriented = self.g.oriented_edges();
        let body = |s: usize, st: &mut StepState| -> f64 {
            let step = s + 1;
            let j_i = &j[s * m2..(s + 1) * m2];
            let q_tail = &q[s * n..(s + 1) * n];
            let q_head = &q[(s + 1) * n..(s + 2) * n];
            let mask = proj.step_mask(step);
            let mut worst: f64 = 0.0;
            for e in 0..m2 {
                if mask.map_or(false, |m| m[e]) {
                    continue;
                }
                let (a, b) = oriented[e];
                let rt_x = st.zt_x[e] - j_i[e];
                let rt_y = st.zt_y[e] - q_tail[a];
                let rh_x = st.zh_x[e] - j_i[e];
                let rh_y = st.zh_y[e] - q_head[b];
                st.ut_x[e] += rt_x;
                st.ut_y[e] += rt_y;
                st.uh_x[e] += rh_x;
                st.uh_y[e] += rh_y;
                worst = worst
                    .max(rt_x.abs())
                    .max(rt_y.abs())
                    .max(rh_x.abs())
                    .max(rh_y.abs());
            }
            worst
        };
        if self.parallel {
            self.steps
                .par_iter_mut()
                .enumerate()
                .map(|(s, st)| body(s, st))
                .reduce(|| 0.0, f64::max)
        } else {
            self.steps
                .iter_mut()
                .enumerate()
                .map(|(s, st)| body(s, st))
                .fold(0.0, f64::max)
        }
    }

    /// Residual balancing on the global penalty multiplier: keep the
    /// scaled dual residual within a decade of the primal one. The
    /// per-term refresh right after the scale change folds the new scale
    /// into the penalties and duals.
    fn rebalance(&mut self, primal: f64, dual: f64) {
        let s = self.base_rho() * dual;
        if primal > 10.0 * s && self.rho_scale * 2.0 <= 1e8 {
            self.rho_scale *= 2.0;
        } else if s > 10.0 * primal && self.rho_scale * 0.5 >= 1e-8 {
            self.rho_scale *= 0.5;
        }
    }

    /// Objective of the clamped global point with floored denominators;
    /// used only for the stopping rule, never reported.
    fn tracked_objective(&self) -> f64 {
        let (n, m2, k) = (self.n, self.m2, self.k);
        let floor = self.cfg.epsilon_floor;
        let q = &self.q;
        let j = &self.j;
        let oriented = self.g.oriented_edges();
        let step_sum = |s: usize| {
            let j_i = &j[s * m2..(s + 1) * m2];
            let q_tail = &q[s * n..(s + 1) * n];
            let q_head = &q[(s + 1) * n..(s + 2) * n];
            let mut acc = 0.0;
            for e in 0..m2 {
                let f = j_i[e].max(0.0);
                if f > 0.0 {
                    let (a, b) = oriented[e];
                    let ta = q_tail[a].max(floor);
                    let hb = q_head[b].max(floor);
                    acc += 0.5 * f * f * (1.0 / ta + 1.0 / hb);
                }
            }
            acc
        };
        let per_step: Vec<f64> = if self.parallel {
            (0..k).into_par_iter().map(step_sum).collect()
        } else {
            (0..k).map(step_sum).collect()
        };
        k as f64 * per_step.iter().sum::<f64>()
    }

    fn finish(
        mut self,
        iterations: usize,
        primal: f64,
        dual: f64,
        cg_before: usize,
    ) -> Result<(TransportPath, f64)> {
        let tol = self.cfg.tol_feasibility;
        let out = self.proj.project(
            &mut self.q,
            &mut self.j,
            &mut self.lam,
            &mut self.scratch,
            (1e-3 * tol).min(1e-10),
            50_000,
        );
        log::debug!("final projection: {} CG iterations, residual {:.3e}", out.iterations, out.residual_inf);
        let cg_total = cg_before + out.iterations;

        let (n, m2, k) = (self.n, self.m2, self.k);
        // Clamp projection noise; exact zeros stay exact.
        for x in self.q.iter_mut().chain(self.j.iter_mut()) {
            if *x < 0.0 && *x >= -10.0 * tol {
                *x = 0.0;
            }
        }
        // Dust removal. Flow at consensus-noise scale is zeroed outright
        // (a tiny flow through a tiny density would otherwise inflate the
        // exact objective arbitrarily), then densities at dust scale with
        // no remaining incident flow are zeroed too. The feasibility
        // residual is re-measured afterwards, so the budget spent here
        // stays visible.
        let dust = 0.1 * tol;
        for x in self.j.iter_mut() {
            if *x <= dust {
                *x = 0.0;
            }
        }
        for i in 1..k {
            for v in 0..n {
                let idx = i * n + v;
                if self.q[idx] == 0.0 || self.q[idx] > dust {
                    continue;
                }
                let inflow: f64 = self
                    .g
                    .in_edges(v)
                    .iter()
                    .map(|&e| self.j[(i - 1) * m2 + e])
                    .sum();
                let outflow: f64 = self
                    .g
                    .out_edges(v)
                    .iter()
                    .map(|&e| self.j[i * m2 + e])
                    .sum();
                if inflow == 0.0 && outflow == 0.0 {
                    self.q[idx] = 0.0;
                }
            }
        }

        let densities: Vec<Vec<f64>> =
            (0..=k).map(|i| self.q[i * n..(i + 1) * n].to_vec()).collect();
        let flows: Vec<Vec<f64>> =
            (0..k).map(|s| self.j[s * m2..(s + 1) * m2].to_vec()).collect();

        let mut feas: f64 = 0.0;
        for i in 1..=k {
            let div = self.g.divergence_raw(&flows[i - 1]);
            for v in 0..n {
                let target = densities[i][v] - densities[i - 1][v];
                feas = feas.max((div[v] - target).abs());
            }
        }
        let mass_dev = densities
            .iter()
            .map(|qi| (qi.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);

        let objective = objective(self.g, &densities, &flows, k)?;
        let distance = objective.sqrt();
        let mut path = TransportPath {
            k,
            densities,
            flows,
            objective,
            distance,
            speeds: Vec::new(),
            report: ConvergenceReport {
                iterations,
                primal_residual: primal,
                dual_residual: dual,
                feasibility_residual: feas,
                max_mass_deviation: mass_dev,
                cg_iterations: cg_total,
            },
        };
        path.speeds = per_step_speeds(self.g, &path)?;
        Ok((path, self.rho_scale))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Solves `L φ = rhs` (graph Laplacian, consistent singular system) with
/// Jacobi-preconditioned CG.
fn laplacian_solve(g: &Graph, rhs: &[f64]) -> Vec<f64> {
    let n = g.num_vertices();
    let apply = |x: &[f64], out: &mut [f64]| {
        for v in 0..n {
            out[v] = g.degree(v) as f64 * x[v];
        }
        for &(a, b) in g.edges() {
            out[a] -= x[b];
            out[b] -= x[a];
        }
    };
    let mut phi = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mean = r.iter().sum::<f64>() / n as f64;
    for x in &mut r {
        *x -= mean;
    }
    let mut z: Vec<f64> = (0..n).map(|v| r[v] / g.degree(v).max(1) as f64).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for _ in 0..20 * n.max(100) {
        if r.iter().fold(0.0f64, |m, &x| m.max(x.abs())) <= 1e-12 || rz <= 0.0 {
            break;
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for v in 0..n {
            phi[v] += alpha * p[v];
            r[v] -= alpha * ap[v];
        }
        let mut rz_next = 0.0;
        for v in 0..n {
            z[v] = r[v] / g.degree(v).max(1) as f64;
            rz_next += r[v] * z[v];
        }
        let beta = rz_next / rz;
        rz = rz_next;
        for v in 0..n {
            p[v] = z[v] + beta * p[v];
        }
    }
    phi
}
