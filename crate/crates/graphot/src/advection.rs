//! Graph advection and the inner products it induces on edge flows.
//!
//! Advection moves per-vertex mass along oriented edges at rates `U(e)`:
//!
//! ```text
//! dp/dt(v) = Σ_{e=(w→v)} U(e) p(w) − Σ_{e=(v→w)} U(e) p(v)
//! ```
//!
//! The generator's columns sum to zero, so every Runge–Kutta stage
//! conserves total mass exactly (up to rounding).

use crate::error::{GraphotError, Result};
use crate::graph::{FlowField, Graph, VertexDistribution};

/// A nonnegative rate per oriented edge, either constant in time or
/// sampled uniformly over the advection interval (piecewise constant
/// per integrator step).
#[derive(Debug, Clone)]
pub enum VelocityField {
    Constant(FlowField),
    Sampled(Vec<FlowField>),
}

impl VelocityField {
    fn validate(&self, g: &Graph) -> Result<()> {
        let m2 = g.num_oriented_edges();
        let check = |f: &FlowField| -> Result<()> {
            if f.len() != m2 {
                return Err(GraphotError::ShapeMismatch { expected: m2, actual: f.len() });
            }
            Ok(())
        };
        match self {
            VelocityField::Constant(f) => check(f),
            VelocityField::Sampled(fs) => {
                if fs.is_empty() {
                    return Err(GraphotError::Validation("empty velocity sample sequence".into()));
                }
                fs.iter().try_for_each(check)
            }
        }
    }

    fn max_rate(&self) -> f64 {
        let max_of = |f: &FlowField| f.values().iter().cloned().fold(0.0, f64::max);
        match self {
            VelocityField::Constant(f) => max_of(f),
            VelocityField::Sampled(fs) => fs.iter().map(|f| max_of(f)).fold(0.0, f64::max),
        }
    }

    /// The sample in effect for integrator step `step` out of `steps`.
    fn sample(&self, step: usize, steps: usize) -> &FlowField {
        match self {
            VelocityField::Constant(f) => f,
            VelocityField::Sampled(fs) => {
                let idx = (step * fs.len()) / steps;
                &fs[idx.min(fs.len() - 1)]
            }
        }
    }
}

/// Time-sampled solution of the advection ODE. Sample `i` is the state at
/// `t_i = i·duration/steps`; entries are clamped to 0 from above −1e-9.
#[derive(Debug, Clone)]
pub struct AdvectionTrajectory {
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl AdvectionTrajectory {
    pub fn final_state(&self) -> &[f64] {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

fn generator_apply(g: &Graph, u: &[f64], p: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (e, &(v, w)) in g.oriented_edges().iter().enumerate() {
        let flux = u[e] * p[v];
        out[v] -= flux;
        out[w] += flux;
    }
}

/// Integrates the advection ODE with classical fixed-step RK4.
///
/// The step-size guard requires `max_e U(e) · Δt · max_degree ≤ 0.5`;
/// violations return a stability error advising more steps.
pub fn advect(
    g: &Graph,
    p0: &VertexDistribution,
    u: &VelocityField,
    duration: f64,
    steps: usize,
) -> Result<AdvectionTrajectory> {
    if p0.len() != g.num_vertices() {
        return Err(GraphotError::ShapeMismatch { expected: g.num_vertices(), actual: p0.len() });
    }
    u.validate(g)?;
    if steps == 0 {
        return Err(GraphotError::Validation("steps must be at least 1".into()));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(GraphotError::Validation(format!("bad duration {duration}")));
    }
    let dt = duration / steps as f64;
    let guard = u.max_rate() * dt * g.max_degree() as f64;
    if guard > 0.5 {
        return Err(GraphotError::Stability(format!(
            "max rate · Δt · max degree = {guard:.3} exceeds 0.5; increase steps"
        )));
    }

    let n = g.num_vertices();
    let mut p = p0.values().to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut samples = Vec::with_capacity(steps + 1);
    times.push(0.0);
    samples.push(clamp_sample(&p));

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    for step in 0..steps {
        let rates = u.sample(step, steps).values();
        generator_apply(g, rates, &p, &mut k1);
        for v in 0..n {
            stage[v] = p[v] + 0.5 * dt * k1[v];
        }
        generator_apply(g, rates, &stage, &mut k2);
        for v in 0..n {
            stage[v] = p[v] + 0.5 * dt * k2[v];
        }
        generator_apply(g, rates, &stage, &mut k3);
        for v in 0..n {
            stage[v] = p[v] + dt * k3[v];
        }
        generator_apply(g, rates, &stage, &mut k4);
        for v in 0..n {
            p[v] += dt / 6.0 * (k1[v] + 2.0 * k2[v] + 2.0 * k3[v] + k4[v]);
        }
        times.push((step + 1) as f64 * dt);
        samples.push(clamp_sample(&p));
    }

    Ok(AdvectionTrajectory { times, samples })
}

fn clamp_sample(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&x| if x < 0.0 { 0.0 } else { x }).collect()
}

/// The advective inner product of two flows at a strictly positive `p`:
///
/// ```text
/// ⟨U,W⟩_p = Σ_{e=(v→w)} p(v)/p(w) · (p(v)+p(w))/2 · U(e)W(e)
/// ```
pub fn advective_inner_product(
    g: &Graph,
    p: &VertexDistribution,
    u: &FlowField,
    w: &FlowField,
) -> Result<f64> {
    let m2 = g.num_oriented_edges();
    if p.len() != g.num_vertices() {
        return Err(GraphotError::ShapeMismatch { expected: g.num_vertices(), actual: p.len() });
    }
    if u.len() != m2 {
        return Err(GraphotError::ShapeMismatch { expected: m2, actual: u.len() });
    }
    if w.len() != m2 {
        return Err(GraphotError::ShapeMismatch { expected: m2, actual: w.len() });
    }
    if let Some(v) = p.values().iter().position(|&x| x <= 0.0) {
        return Err(GraphotError::Domain(format!(
            "advective inner product requires p(v) > 0 everywhere; p({v}) = {}",
            p.values()[v]
        )));
    }
    let pv = p.values();
    let mut acc = 0.0;
    for (e, &(v, w_)) in g.oriented_edges().iter().enumerate() {
        let weight = pv[v] / pv[w_] * 0.5 * (pv[v] + pv[w_]);
        acc += weight * u.values()[e] * w.values()[e];
    }
    Ok(acc)
}

/// `‖U‖_p = √⟨U,U⟩_p`.
pub fn advective_norm(g: &Graph, p: &VertexDistribution, u: &FlowField) -> Result<f64> {
    advective_inner_product(g, p, u, u).map(f64::sqrt)
}

/// Kinetic energy of a momentum `J` between a tail density (old time) and
/// head density (new time):
///
/// ```text
/// Σ_{e=(v→w)} J(e)²/2 · (1/p_tail(v) + 1/p_head(w))
/// ```
///
/// with the convention `0²/0 := 0`. Positive flow through a zero density
/// is infeasible and reported as an error.
pub fn momentum_norm_squared(
    g: &Graph,
    p_tail: &[f64],
    p_head: &[f64],
    j: &FlowField,
) -> Result<f64> {
    let m2 = g.num_oriented_edges();
    let n = g.num_vertices();
    if p_tail.len() != n {
        return Err(GraphotError::ShapeMismatch { expected: n, actual: p_tail.len() });
    }
    if p_head.len() != n {
        return Err(GraphotError::ShapeMismatch { expected: n, actual: p_head.len() });
    }
    if j.len() != m2 {
        return Err(GraphotError::ShapeMismatch { expected: m2, actual: j.len() });
    }
    let mut acc = 0.0;
    for (e, &(v, w)) in g.oriented_edges().iter().enumerate() {
        let flow = j.values()[e];
        if flow == 0.0 {
            continue;
        }
        if p_tail[v] <= 0.0 || p_head[w] <= 0.0 {
            return Err(GraphotError::Infeasible(format!(
                "flow {flow} on oriented edge {e} ({v}→{w}) passes through zero mass"
            )));
        }
        acc += 0.5 * flow * flow * (1.0 / p_tail[v] + 1.0 / p_head[w]);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> Graph {
        Graph::new(2, vec![(0, 1)]).unwrap()
    }

    #[test]
    fn zero_velocity_is_stationary() {
        let g = two_node();
        let p0 = VertexDistribution::new(vec![0.3, 0.7]).unwrap();
        let u = VelocityField::Constant(FlowField::zeros(2));
        let traj = advect(&g, &p0, &u, 1.0, 10).unwrap();
        for s in &traj.samples {
            assert_eq!(s.as_slice(), p0.values());
        }
    }

    #[test]
    fn two_node_exponential_decay() {
        // dp_a/dt = −p_a with p_a(0) = 1 has the closed form p_a(t) = e^{−t}.
        let g = two_node();
        let p0 = VertexDistribution::indicator(2, 0).unwrap();
        let u = VelocityField::Constant(FlowField::new(vec![1.0, 0.0]).unwrap());
        let traj = advect(&g, &p0, &u, 1.0, 100).unwrap();
        let end = traj.final_state();
        assert!((end[0] - (-1.0f64).exp()).abs() < 1e-6);
        assert!((end[1] - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn detailed_balance_fixed_point() {
        let g = two_node();
        let p0 = VertexDistribution::new(vec![0.5, 0.5]).unwrap();
        let u = VelocityField::Constant(FlowField::new(vec![1.0, 1.0]).unwrap());
        let traj = advect(&g, &p0, &u, 2.0, 50).unwrap();
        let end = traj.final_state();
        assert!((end[0] - 0.5).abs() < 1e-12);
        assert!((end[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn step_guard_trips() {
        let g = two_node();
        let p0 = VertexDistribution::indicator(2, 0).unwrap();
        let u = VelocityField::Constant(FlowField::new(vec![10.0, 0.0]).unwrap());
        assert!(matches!(advect(&g, &p0, &u, 1.0, 2), Err(GraphotError::Stability(_))));
    }

    #[test]
    fn negative_velocity_rejected() {
        assert!(FlowField::new(vec![-0.1, 0.0]).is_err());
    }

    #[test]
    fn inner_product_hand_values() {
        let g = two_node();
        let u = FlowField::new(vec![1.0, 0.0]).unwrap();

        // Weight at p = (1/2, 1/2): (1/2)/(1/2) · (1/2+1/2)/2 = 1/2.
        let p = VertexDistribution::new(vec![0.5, 0.5]).unwrap();
        assert!((advective_inner_product(&g, &p, &u, &u).unwrap() - 0.5).abs() < 1e-15);
        assert!((advective_norm(&g, &p, &u).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);

        // Weight at p = (3/4, 1/4): 3 · 1/2 = 3/2.
        let p = VertexDistribution::new(vec![0.75, 0.25]).unwrap();
        assert!((advective_inner_product(&g, &p, &u, &u).unwrap() - 1.5).abs() < 1e-15);

        let zero = FlowField::zeros(2);
        assert_eq!(advective_inner_product(&g, &p, &zero, &u).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_requires_positive_density() {
        let g = two_node();
        let u = FlowField::new(vec![1.0, 0.0]).unwrap();
        let p = VertexDistribution::indicator(2, 0).unwrap();
        assert!(matches!(
            advective_inner_product(&g, &p, &u, &u),
            Err(GraphotError::Domain(_))
        ));
    }

    #[test]
    fn momentum_energy_hand_values() {
        let g = two_node();
        let j = FlowField::new(vec![1.0, 0.0]).unwrap();
        let delta_a = [1.0, 0.0];
        let delta_b = [0.0, 1.0];
        // Unit flow between two point masses: 1/2·(1/1 + 1/1) = 1.
        assert_eq!(momentum_norm_squared(&g, &delta_a, &delta_b, &j).unwrap(), 1.0);
        assert_eq!(momentum_norm_squared(&g, &delta_a, &delta_b, &FlowField::zeros(2)).unwrap(), 0.0);
        // Flow through zero mass is infeasible.
        assert!(matches!(
            momentum_norm_squared(&g, &delta_b, &delta_a, &j),
            Err(GraphotError::Infeasible(_))
        ));
    }
}
