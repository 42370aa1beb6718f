//! Metrics: faithfulness (edge AUROC, fidelity-under-removal), consistency
//! (structural Hamming distance across seeds), bias exposure on the mixed
//! benchmark, and a numeric check of the information identity behind the
//! alignment argument.
//!
//! All metrics are pure functions of explanations, models and datasets.
//! Every ranking step breaks score ties by ascending edge index, so each
//! quantity is a deterministic function of its inputs.

mod auroc;
mod bias;
mod fidelity;
mod mi;
mod report;
mod shd;

pub use auroc::edge_auroc;
pub use bias::{bias_exposure, motif_auroc, BiasReport};
pub use fidelity::{curve_area, fidelity_curve, fidelity_points, FidelityCurve};
pub use mi::{mi_identity_check, three_way_information, DiscreteJoint};
pub use report::{MetricRow, MetricsReport};
pub use shd::{shd, shd_consistency, top_edges, ShdReport};
