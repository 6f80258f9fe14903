//! Transportation distances between probability distributions on graph
//! vertices, computed as geodesics of a flow-based metric rather than by
//! the quadratic-cost transportation linear program.
//!
//! The centerpiece is [`solver::solve`], which minimizes the staggered
//! time discretization of the kinetic-energy functional over densities
//! `q^0..q^k` and nonnegative oriented edge flows `J^1..J^k` subject to
//! the discrete continuity equation, via proximal splitting. Around it:
//!
//! - [`graph`]: immutable undirected graphs with a doubled oriented edge
//!   set, the incidence operator, BFS distances, and vertex distributions;
//! - [`advection`]: the graph advection ODE (RK4) and the advective inner
//!   product / momentum energy it induces;
//! - [`baselines`]: 1-Wasserstein via minimum-cost flow (Beckmann form)
//!   and the full quadratic transportation LP as a desk-scale oracle;
//! - [`prune`]: restriction of the solve to edges near the support of an
//!   optimal W1 flow;
//! - [`formats`]: the plain-text file formats used by the CLI.

pub mod advection;
pub mod baselines;
pub mod error;
pub mod formats;
pub mod graph;
pub mod prune;
pub mod solver;

pub use error::GraphotError;
pub use graph::{FlowField, Graph, IncidenceOperator, VertexDistribution};
pub use solver::{SolverConfig, TransportPath};
