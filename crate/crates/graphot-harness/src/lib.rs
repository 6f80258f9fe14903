//! Experiment harness: graph generators, histogram corpora, and the
//! reproducibility experiments around the flow-based transportation
//! distance (time-grid convergence, displacement interpolation, the
//! fan-line comparison against W1/L1, and histogram retrieval).
//!
//! Every experiment is deterministic under a fixed seed and emits a
//! CSV-serializable [`report::ExperimentReport`] carrying a digest of its
//! inputs.

pub mod corpus;
pub mod experiments;
pub mod generators;
pub mod report;

pub use corpus::{build_emst_knn_graph, HistogramCorpus};
pub use report::ExperimentReport;
