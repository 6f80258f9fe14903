//! Weighted Euclidean projection onto the affine feasible set of the
//! staggered problem:
//!
//! ```text
//! q⁰ = p0,  q^k = p1,  DᵀJ^i = q^i − q^{i−1}  (i = 1..k)
//! ```
//!
//! Boundary densities are substituted as constants and flows known to be
//! zero (positive flow out of a zero-mass `p0` vertex at step 1, or into
//! a zero-mass `p1` vertex at step k) are eliminated. The KKT system of
//! the projection reduces to `A W⁻¹ Aᵀ λ = A x̄ − b`: one unknown per
//! (step, vertex), a sparse symmetric positive-semidefinite space-time
//! operator solved matrix-free by Jacobi-preconditioned conjugate
//! gradients. The CG residual is exactly the continuity violation of the
//! corrected point.

use rayon::prelude::*;

use crate::graph::Graph;

/// Minimum parallel batch: below this the rayon overhead dominates.
const PAR_STEP_THRESHOLD: usize = 8192;

pub struct Projector {
    pub n: usize,
    pub m2: usize,
    pub k: usize,
    tails: Vec<usize>,
    heads: Vec<usize>,
    /// `step_masks[i-1]`: per-oriented-edge "flow pinned to zero" flags
    /// for step `i`; `None` means no pinned flows at that step.
    step_masks: Vec<Option<Vec<bool>>>,
    /// Projection weights (total consensus penalty) of interior
    /// densities, laid out `(i-1)*n + v` for `i = 1..k-1`.
    pub wq: Vec<f64>,
    /// Projection weights of flows, laid out `(i-1)*m2 + e`.
    pub wj: Vec<f64>,
    precond: Vec<f64>,
    p0: Vec<f64>,
    p1: Vec<f64>,
}

pub struct CgOutcome {
    pub iterations: usize,
    pub residual_inf: f64,
}

impl Projector {
    /// Builds the projector and its flow masks. Interior density weights
    /// must be supplied through [`Projector::set_interior_weights`] (they
    /// are consensus copy counts, which depend on the masks) before the
    /// first projection.
    pub fn new(g: &Graph, p0: &[f64], p1: &[f64], k: usize) -> Self {
        let n = g.num_vertices();
        let m2 = g.num_oriented_edges();
        let tails: Vec<usize> = g.oriented_edges().iter().map(|&(v, _)| v).collect();
        let heads: Vec<usize> = g.oriented_edges().iter().map(|&(_, w)| w).collect();

        let first: Vec<bool> = (0..m2).map(|e| p0[tails[e]] == 0.0).collect();
        let last: Vec<bool> = (0..m2).map(|e| p1[heads[e]] == 0.0).collect();
        let mut step_masks: Vec<Option<Vec<bool>>> = vec![None; k];
        if k == 1 {
            step_masks[0] = Some((0..m2).map(|e| first[e] || last[e]).collect());
        } else {
            if first.iter().any(|&b| b) {
                step_masks[0] = Some(first);
            }
            if last.iter().any(|&b| b) {
                step_masks[k - 1] = Some(last);
            }
        }

        Projector {
            n,
            m2,
            k,
            tails,
            heads,
            step_masks,
            wq: Vec::new(),
            wj: Vec::new(),
            precond: vec![0.0; k * n],
            p0: p0.to_vec(),
            p1: p1.to_vec(),
        }
    }

    /// Sets the per-variable projection weights (interior densities and
    /// flows) and rebuilds the preconditioner.
    pub fn set_weights(&mut self, wq: Vec<f64>, wj: Vec<f64>) {
        debug_assert_eq!(wq.len(), self.k.saturating_sub(1) * self.n);
        debug_assert_eq!(wj.len(), self.k * self.m2);
        self.wq = wq;
        self.wj = wj;
        self.precond.fill(0.0);
        self.build_preconditioner();
    }

    pub fn is_masked(&self, step: usize, e: usize) -> bool {
        match &self.step_masks[step - 1] {
            Some(mask) => mask[e],
            None => false,
        }
    }

    pub fn step_mask(&self, step: usize) -> Option<&[bool]> {
        self.step_masks[step - 1].as_deref()
    }

    fn build_preconditioner(&mut self) {
        let (n, k) = (self.n, self.k);
        for i in 1..=k {
            let base = (i - 1) * n;
            for e in 0..self.m2 {
                if !self.is_masked(i, e) {
                    let w = 1.0 / self.wj[(i - 1) * self.m2 + e];
                    self.precond[base + self.tails[e]] += w;
                    self.precond[base + self.heads[e]] += w;
                }
            }
            for v in 0..n {
                if i <= k - 1 {
                    self.precond[base + v] += 1.0 / self.wq[(i - 1) * n + v];
                }
                if i >= 2 {
                    self.precond[base + v] += 1.0 / self.wq[(i - 2) * n + v];
                }
            }
        }
        for d in &mut self.precond {
            if *d == 0.0 {
                *d = 1.0;
            }
        }
    }

    /// `out[(i-1)*n + v] = (A W⁻¹ Aᵀ λ)` at constraint `(i, v)`.
    fn apply(&self, lam: &[f64], out: &mut [f64]) {
        let n = self.n;
        let k = self.k;
        let apply_block = |i: usize, out_i: &mut [f64]| {
            let lam_i = &lam[(i - 1) * n..i * n];
            let wj_i = &self.wj[(i - 1) * self.m2..i * self.m2];
            out_i.fill(0.0);
            // Each unmasked oriented edge (a→b) contributes its
            // weight-scaled potential difference to both endpoints, a
            // per-step weighted graph Laplacian.
            match self.step_mask(i) {
                None => {
                    for e in 0..self.m2 {
                        let (a, b) = (self.tails[e], self.heads[e]);
                        let d = (lam_i[a] - lam_i[b]) / wj_i[e];
                        out_i[a] += d;
                        out_i[b] -= d;
                    }
                }
                Some(mask) => {
                    for e in 0..self.m2 {
                        if !mask[e] {
                            let (a, b) = (self.tails[e], self.heads[e]);
                            let d = (lam_i[a] - lam_i[b]) / wj_i[e];
                            out_i[a] += d;
                            out_i[b] -= d;
                        }
                    }
                }
            }
            if i <= k - 1 {
                let next = &lam[i * n..(i + 1) * n];
                let w = &self.wq[(i - 1) * n..i * n];
                for v in 0..n {
                    out_i[v] += (lam_i[v] - next[v]) / w[v];
                }
            }
            if i >= 2 {
                let prevs = &lam[(i - 2) * n..(i - 1) * n];
                let w = &self.wq[(i - 2) * n..(i - 1) * n];
                for v in 0..n {
                    out_i[v] += (lam_i[v] - prevs[v]) / w[v];
                }
            }
        };
        if k * n >= PAR_STEP_THRESHOLD {
            out.par_chunks_mut(n)
                .enumerate()
                .for_each(|(idx, out_i)| apply_block(idx + 1, out_i));
        } else {
            for (idx, out_i) in out.chunks_mut(n).enumerate() {
                apply_block(idx + 1, out_i);
            }
        }
    }

    /// `out[(i-1)*n + v] = (DᵀJ^i)(v) − q^i(v) + q^{i−1}(v)`.
    fn residual_into(&self, q: &[f64], j: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 1..=self.k {
            let out_i = &mut out[(i - 1) * n..i * n];
            let q_new = &q[i * n..(i + 1) * n];
            let q_old = &q[(i - 1) * n..i * n];
            for v in 0..n {
                out_i[v] = q_old[v] - q_new[v];
            }
            let j_i = &j[(i - 1) * self.m2..i * self.m2];
            match self.step_mask(i) {
                None => {
                    for e in 0..self.m2 {
                        out_i[self.tails[e]] -= j_i[e];
                        out_i[self.heads[e]] += j_i[e];
                    }
                }
                Some(mask) => {
                    for e in 0..self.m2 {
                        if !mask[e] {
                            out_i[self.tails[e]] -= j_i[e];
                            out_i[self.heads[e]] += j_i[e];
                        }
                    }
                }
            }
        }
    }

    /// Projects `(q, j)` in place onto the constraint set in the
    /// `W`-weighted norm. Boundary slices of `q` are overwritten with the
    /// pinned distributions and masked flows with zero. `lam` carries the
    /// KKT multipliers across calls for warm starting.
    pub fn project(
        &self,
        q: &mut [f64],
        j: &mut [f64],
        lam: &mut [f64],
        scratch: &mut CgScratch,
        tol_inf: f64,
        max_iter: usize,
    ) -> CgOutcome {
        let n = self.n;
        let k = self.k;
        debug_assert_eq!(q.len(), (k + 1) * n);
        debug_assert_eq!(j.len(), k * self.m2);

        q[..n].copy_from_slice(&self.p0);
        q[k * n..].copy_from_slice(&self.p1);
        for i in 1..=k {
            if let Some(mask) = self.step_mask(i) {
                let j_i = &mut j[(i - 1) * self.m2..i * self.m2];
                for e in 0..self.m2 {
                    if mask[e] {
                        j_i[e] = 0.0;
                    }
                }
            }
        }

        self.residual_into(q, j, &mut scratch.rhs);
        // Continuity residual of the corrected point is exactly rhs − Mλ,
        // so the CG stopping rule is the feasibility tolerance itself.
        let outcome = self.pcg(lam, scratch, tol_inf, max_iter);

        for i in 1..=k {
            let lam_i = &lam[(i - 1) * n..i * n];
            let wj_i = &self.wj[(i - 1) * self.m2..i * self.m2];
            let j_i = &mut j[(i - 1) * self.m2..i * self.m2];
            match self.step_mask(i) {
                None => {
                    for e in 0..self.m2 {
                        j_i[e] -= (lam_i[self.heads[e]] - lam_i[self.tails[e]]) / wj_i[e];
                    }
                }
                Some(mask) => {
                    for e in 0..self.m2 {
                        if !mask[e] {
                            j_i[e] -= (lam_i[self.heads[e]] - lam_i[self.tails[e]]) / wj_i[e];
                        }
                    }
                }
            }
        }
        for i in 1..k {
            let base = i * n;
            let w = &self.wq[(i - 1) * n..i * n];
            for v in 0..n {
                let d = lam[i * n + v] - lam[(i - 1) * n + v];
                // λ_{i+1} − λ_i with λ indexed from step 1.
                q[base + v] -= d / w[v];
            }
        }
        outcome
    }

    fn pcg(&self, lam: &mut [f64], s: &mut CgScratch, tol_inf: f64, max_iter: usize) -> CgOutcome {
        let size = self.k * self.n;
        let r = &mut s.r;
        self.apply(lam, r);
        for (rv, &bv) in r.iter_mut().zip(s.rhs.iter()) {
            *rv = bv - *rv;
        }
        remove_mean(r);

        let mut rz = 0.0;
        for v in 0..size {
            s.z[v] = r[v] / self.precond[v];
            rz += r[v] * s.z[v];
        }
        s.p.copy_from_slice(&s.z);

        let mut res_inf = inf_norm(r);
        let mut iters = 0;
        while res_inf > tol_inf && iters < max_iter && rz > 0.0 {
            self.apply(&s.p, &mut s.ap);
            let pap: f64 = s.p.iter().zip(s.ap.iter()).map(|(a, b)| a * b).sum();
            if pap <= 0.0 || !pap.is_finite() {
                break;
            }
            let alpha = rz / pap;
            for v in 0..size {
                lam[v] += alpha * s.p[v];
                r[v] -= alpha * s.ap[v];
            }
            iters += 1;
            if iters % 64 == 0 {
                // Periodic true-residual refresh against drift.
                self.apply(lam, &mut s.ap);
                for v in 0..size {
                    r[v] = s.rhs[v] - s.ap[v];
                }
                remove_mean(r);
            }
            let mut rz_next = 0.0;
            for v in 0..size {
                s.z[v] = r[v] / self.precond[v];
                rz_next += r[v] * s.z[v];
            }
            let beta = rz_next / rz;
            rz = rz_next;
            for v in 0..size {
                s.p[v] = s.z[v] + beta * s.p[v];
            }
            res_inf = inf_norm(r);
        }
        CgOutcome { iterations: iters, residual_inf: res_inf }
    }
}

pub struct CgScratch {
    rhs: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl CgScratch {
    pub fn new(size: usize) -> Self {
        CgScratch {
            rhs: vec![0.0; size],
            r: vec![0.0; size],
            z: vec![0.0; size],
            p: vec![0.0; size],
            ap: vec![0.0; size],
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, &x| acc.max(x.abs()))
}

/// The all-ones vector spans the null space of the space-time operator;
/// keep residuals orthogonal to it.
fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v {
        *x -= mean;
    }
}
