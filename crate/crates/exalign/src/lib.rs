//! Train a small graph convolutional network on synthetic graph benchmarks,
//! explain its predictions with perturbation masks, and evaluate the
//! explanations for faithfulness and consistency.
//!
//! The crate is organized around the pipeline stages:
//!
//! * [`graph`] — graph representation, benchmark generators, dataset files,
//!   k-hop subgraph extraction.
//! * [`gcn`] — a fixed three-layer GCN with a mask-aware forward pass,
//!   manual reverse-mode gradients, and a trainer.
//! * [`align`] — anchor fitting via density clustering and the two
//!   embedding-alignment losses (absolute and anchor-based).
//! * [`explain`] — mask-optimization explainers (per-instance and
//!   parameterized) plus a gradient saliency baseline.
//! * [`eval`] — AUROC, fidelity curves, structural Hamming distance,
//!   bias-exposure tables, and a mutual-information identity check.
//! * [`cli`] — experiment orchestration behind the `exalign` binary.
//!
//! Every stage is deterministic given its seed; see `examples/` for one
//! runnable program per capability.

pub mod align;
pub mod cli;
pub mod error;
pub mod eval;
pub mod explain;
pub mod gcn;
pub mod graph;
pub mod linalg;
pub mod seeding;

pub use error::{Error, Result};
