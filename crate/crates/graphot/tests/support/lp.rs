//! A small dense two-phase simplex for equality-form LPs, used only as an
//! independent oracle against the library's flow and transportation
//! solvers. Deliberately naive: full tableau, Bland's rule.

/// Minimizes `c·x` subject to `A x = b`, `x ≥ 0`.
/// Returns `(objective, x)` or `None` if infeasible.
pub fn solve_equality_lp(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<(f64, Vec<f64>)> {
    let m = a.len();
    let n = c.len();
    assert!(a.iter().all(|row| row.len() == n));
    assert_eq!(b.len(), m);

    // Tableau over original + artificial variables, rows scaled so b ≥ 0.
    let total = n + m;
    let mut t = vec![vec![0.0f64; total + 1]; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][total] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..total).collect();

    let pivot = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, row: usize, col: usize| {
        let factor = t[row][col];
        for x in t[row].iter_mut() {
            *x /= factor;
        }
        for i in 0..t.len() {
            if i != row && t[i][col].abs() > 0.0 {
                let f = t[i][col];
                for j in 0..t[i].len() {
                    let v = t[row][j];
                    t[i][j] -= f * v;
                }
            }
        }
        basis[row] = col;
    };

    // One simplex phase: minimize `obj` over the allowed column set.
    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, obj: &[f64], allowed: usize| {
        for _ in 0..100_000 {
            // Reduced costs from the basic solution: r_j = obj_j − y·A_j.
            let mut y = vec![0.0f64; t.len()];
            for (i, &bi) in basis.iter().enumerate() {
                y[i] = obj[bi];
            }
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let mut r = obj[j];
                for i in 0..t.len() {
                    r -= y[i] * t[i][j];
                }
                if r < -1e-9 {
                    entering = Some(j); // Bland: first eligible index
                    break;
                }
            }
            let Some(col) = entering else {
                return;
            };
            let mut row = None;
            let mut best = f64::INFINITY;
            for i in 0..t.len() {
                if t[i][col] > 1e-12 {
                    let ratio = t[i][t[i].len() - 1] / t[i][col];
                    if ratio < best - 1e-15
                        || (ratio < best + 1e-15 && row.map_or(true, |r| basis[i] < basis[r]))
                    {
                        best = ratio;
                        row = Some(i);
                    }
                }
            }
            let Some(row) = row else {
                return; // unbounded; caller's problems are bounded
            };
            pivot(t, basis, row, col);
        }
    };

    // Phase 1: drive artificials to zero.
    let mut phase1 = vec![0.0; total];
    for x in phase1.iter_mut().skip(n) {
        *x = 1.0;
    }
    run(&mut t, &mut basis, &phase1, total);
    let artificial_value: f64 =
        basis.iter().enumerate().filter(|(_, &bi)| bi >= n).map(|(i, _)| t[i][total]).sum();
    if artificial_value > 1e-7 {
        return None;
    }
    // Pivot lingering zero-level artificials out where possible.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(col) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, col);
            }
        }
    }

    // Phase 2 over the original columns only.
    let mut phase2 = vec![0.0; total];
    phase2[..n].copy_from_slice(c);
    run(&mut t, &mut basis, &phase2, n);

    let mut x = vec![0.0; n];
    for (i, &bi) in basis.iter().enumerate() {
        if bi < n {
            x[bi] = t[i][total];
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Some((objective, x))
}

/// Transportation LP `min Σ cost(v,w)·T(v,w)` with marginals `p0`, `p1`,
/// solved through the generic simplex. One redundant marginal row is
/// dropped to keep the system full-rank-friendly.
pub fn transport_lp(cost: &dyn Fn(usize, usize) -> f64, p0: &[f64], p1: &[f64]) -> f64 {
    let n = p0.len();
    let nv = n * n;
    let c: Vec<f64> = (0..nv).map(|idx| cost(idx / n, idx % n)).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for v in 0..n {
        let mut row = vec![0.0; nv];
        for w in 0..n {
            row[v * n + w] = 1.0;
        }
        a.push(row);
        b.push(p0[v]);
    }
    for w in 0..n - 1 {
        let mut row = vec![0.0; nv];
        for v in 0..n {
            row[v * n + w] = 1.0;
        }
        a.push(row);
        b.push(p1[w]);
    }
    let (obj, _) = solve_equality_lp(&c, &a, &b).expect("transportation LP is feasible");
    obj
}
