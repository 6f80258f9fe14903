//! Proximal operator of the scaled perspective function
//! `f(x, y) = α·x²/y` restricted to `x ≥ 0, y ≥ 0` (with the closure
//! `f(0, 0) = 0`, `f(x > 0, 0) = +∞`).
//!
//! `prox_{f,ρ}(x₀, y₀) = argmin f(x,y) + ρ/2·[(x−x₀)² + (y−y₀)²]`.
//!
//! Eliminating `x` from the stationarity conditions leaves the scalar
//! cubic `G(y) = (y − y₀)(y + β)² − (β/2)x₀² = 0` with `β = 2α/ρ`,
//! which has a unique root right of `max(y₀, 0)`; `x` then recovers as
//! `x₀·y/(y + β)`.

/// Relative tolerance of the cubic root, per the solver contract.
const ROOT_TOL: f64 = 1e-12;

pub fn perspective_prox(x0: f64, y0: f64, alpha: f64, rho: f64) -> (f64, f64) {
    debug_assert!(alpha > 0.0 && rho > 0.0);
    if x0 <= 0.0 {
        // Optimal x clamps to 0 and y decouples.
        return (0.0, y0.max(0.0));
    }
    let beta = 2.0 * alpha / rho;
    let c = 0.5 * beta * x0 * x0;
    if c == 0.0 {
        // x₀² underflowed; indistinguishable from x₀ = 0.
        return (0.0, y0.max(0.0));
    }
    if !c.is_finite() {
        // Absurdly large input; the prox barely moves it.
        return (x0, y0.max(0.0));
    }

    // G(0) ≥ 0 means the stationary point sits at y ≤ 0: collapse to the
    // origin (only possible for y₀ < 0).
    if -y0 * beta * beta >= c {
        return (0.0, 0.0);
    }

    let g = |y: f64| (y - y0) * (y + beta) * (y + beta) - c;
    let mut lo = y0.max(0.0);
    // Analytic bound hi = lo + x₀²/(2β) brackets the root in exact
    // arithmetic; double defensively against rounding at the extremes.
    let mut hi = lo + 0.5 * x0 * x0 / beta;
    for _ in 0..64 {
        if g(hi) >= 0.0 {
            break;
        }
        lo = hi;
        hi = 2.0 * hi + 1.0;
    }

    // Bracketed Newton: bisect whenever the Newton step leaves [lo, hi].
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gy = g(y);
        if gy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let dg = (y + beta) * (3.0 * y + beta - 2.0 * y0);
        let newton = y - gy / dg;
        let next = if dg.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - y).abs() <= ROOT_TOL * next.abs().max(1e-300) {
            y = next;
            break;
        }
        y = next;
    }

    (x0 * y / (y + beta), y)
}
