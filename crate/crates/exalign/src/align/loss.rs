//! Alignment losses between an unmasked forward pass (the constant
//! target) and a masked one (the branch under optimization).
//!
//! Both losses compare per-layer embeddings. The absolute variant works
//! on raw coordinates; the distribution-aware variant first maps each
//! embedding to its vector of distances to the layer's anchors, which
//! makes it invariant to rigid motions of embedding space.

use crate::error::{Error, Result};
use crate::gcn::{ForwardTape, LayerSeeds};
use crate::graph::Task;
use crate::linalg::Matrix;

use super::anchors::{anchor_repr, AnchorSet, ANCHOR_LAYERS};

/// Distances below this are treated as exactly zero when dividing by
/// `ŝ_k`; the distance function is not differentiable at 0 and the
/// subgradient 0 is the stable choice.
const DIST_FLOOR: f64 = 1e-12;

/// A loss value plus its gradient with respect to the masked branch's
/// post-activation embeddings, packaged as injection seeds for the
/// backward pass. The unmasked branch is a constant target and receives
/// no gradient.
#[derive(Clone, Debug)]
pub struct AlignTerm {
    pub loss: f64,
    pub seeds: LayerSeeds,
}

impl AlignTerm {
    /// Scale the loss and every seed matrix, e.g. by the alignment
    /// weight λ before injecting into the backward pass.
    pub fn scaled(mut self, s: f64) -> AlignTerm {
        self.loss *= s;
        for m in self.seeds.h.iter_mut().flatten() {
            m.scale(s);
        }
        self
    }
}

/// `Σ_k (s_k − ŝ_k)²` for one layer, plus d/dĥ.
/// `s` is the unmasked representation's distances, `ĥ` the masked
/// embedding the gradient flows into.
fn anchor_term(h: &[f64], hp: &[f64], anchors: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let s = anchor_repr(h, anchors);
    let sp = anchor_repr(hp, anchors);
    let mut loss = 0.0;
    let mut grad = vec![0.0; hp.len()];
    for (k, a) in anchors.iter().enumerate() {
        let diff = s[k] - sp[k];
        loss += diff * diff;
        if sp[k] > DIST_FLOOR {
            // d/dĥ (s_k − ŝ_k)² = 2(ŝ_k − s_k)·(ĥ − a_k)/ŝ_k.
            let coeff = 2.0 * (sp[k] - s[k]) / sp[k];
            for (c, g) in grad.iter_mut().enumerate() {
                *g += coeff * (hp[c] - a[c]);
            }
        }
    }
    (loss, grad)
}

/// `∥h − ĥ∥²` for one pair of embeddings, plus d/dĥ = 2(ĥ − h).
fn absolute_term(h: &[f64], hp: &[f64]) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grad = vec![0.0; hp.len()];
    for c in 0..hp.len() {
        let d = hp[c] - h[c];
        loss += d * d;
        grad[c] = 2.0 * d;
    }
    (loss, grad)
}

fn check_tapes(tape_g: &ForwardTape, tape_gp: &ForwardTape, task: Task, center: Option<usize>) -> Result<usize> {
    let n = tape_gp.layers[0].rows();
    if tape_g.layers[0].rows() != n {
        return Err(Error::DimMismatch(
            "alignment needs the same node set on both branches".into(),
        ));
    }
    match task {
        Task::NodeClassification => {
            let c = center.ok_or_else(|| Error::Config("node alignment needs a center".into()))?;
            if c >= n {
                return Err(Error::Config(format!("center {c} out of range")));
            }
            Ok(c)
        }
        Task::GraphClassification => Ok(0),
    }
}

/// Distribution-aware loss: per layer, compare anchor-distance vectors
/// of the two branches — the center node's for node tasks, the
/// mean-pooled embedding's for graph tasks.
pub fn align_loss_anchor(
    tape_g: &ForwardTape,
    tape_gp: &ForwardTape,
    anchors: &AnchorSet,
    task: Task,
    center: Option<usize>,
) -> Result<AlignTerm> {
    if anchors.layers.len() != ANCHOR_LAYERS {
        return Err(Error::Config(format!(
            "anchor set has {} layers, expected {ANCHOR_LAYERS}",
            anchors.layers.len()
        )));
    }
    let c = check_tapes(tape_g, tape_gp, task, center)?;
    let n = tape_gp.layers[0].rows();
    let mut loss = 0.0;
    let mut seeds = LayerSeeds::none();
    for l in 0..ANCHOR_LAYERS {
        let hg = &tape_g.layers[l + 1];
        let hp = &tape_gp.layers[l + 1];
        let a = &anchors.layers[l].anchors;
        if a[0].len() != hp.cols() {
            return Err(Error::DimMismatch(format!(
                "layer {l} anchors have dim {}, embeddings {}",
                a[0].len(),
                hp.cols()
            )));
        }
        let (l_loss, grad, rows): (f64, Vec<f64>, Vec<usize>) = match task {
            Task::NodeClassification => {
                let (ll, g) = anchor_term(hg.row(c), hp.row(c), a);
                (ll, g, vec![c])
            }
            Task::GraphClassification => {
                let (ll, g) = anchor_term(&hg.mean_row(), &hp.mean_row(), a);
                (ll, g, (0..n).collect())
            }
        };
        loss += l_loss;
        let mut seed = Matrix::zeros(n, hp.cols());
        let share = 1.0 / rows.len() as f64;
        for v in rows {
            for (cidx, g) in grad.iter().enumerate() {
                seed.set(v, cidx, g * share);
            }
        }
        seeds.h[l] = Some(seed);
    }
    Ok(AlignTerm { loss, seeds })
}

/// Absolute loss: per layer, squared distance summed over every node for
/// node tasks, or between the mean-pooled embeddings for graph tasks.
pub fn align_loss_absolute(
    tape_g: &ForwardTape,
    tape_gp: &ForwardTape,
    task: Task,
    center: Option<usize>,
) -> Result<AlignTerm> {
    check_tapes(tape_g, tape_gp, task, center)?;
    let n = tape_gp.layers[0].rows();
    let mut loss = 0.0;
    let mut seeds = LayerSeeds::none();
    for l in 0..ANCHOR_LAYERS {
        let hg = &tape_g.layers[l + 1];
        let hp = &tape_gp.layers[l + 1];
        let mut seed = Matrix::zeros(n, hp.cols());
        match task {
            Task::NodeClassification => {
                for v in 0..n {
                    let (ll, g) = absolute_term(hg.row(v), hp.row(v));
                    loss += ll;
                    for (c, gv) in g.iter().enumerate() {
                        seed.set(v, c, *gv);
                    }
                }
            }
            Task::GraphClassification => {
                let (ll, g) = absolute_term(&hg.mean_row(), &hp.mean_row());
                loss += ll;
                for v in 0..n {
                    for (c, gv) in g.iter().enumerate() {
                        seed.set(v, c, gv / n as f64);
                    }
                }
            }
        }
        seeds.h[l] = Some(seed);
    }
    Ok(AlignTerm { loss, seeds })
}

/// The full masked objective: cross-entropy + mask regularizers + λ ·
/// alignment. Linear in each term.
pub fn combined_loss(ce: f64, reg: f64, align: f64, lambda: f64) -> f64 {
    ce + reg + lambda * align
}
