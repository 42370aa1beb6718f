//! Per-instance mask optimization.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::align::{align_loss_absolute, align_loss_anchor, AnchorSet};
use crate::error::{Error, Result};
use crate::gcn::{
    backward, forward, softmax_ce, Adam, FeatureMask, GcnModel, LayerSeeds, MaskSpec,
};
use crate::graph::{Graph, Task};
use crate::linalg::{argmax, sigmoid, Matrix};
use crate::seeding;

use super::{AlignMode, Explanation, ExplainerConfig, TraceRow};

/// Natural-log binary entropy of p ∈ [0,1].
fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    term(p) + term(1.0 - p)
}

/// Optimize sigmoid-parameterized edge (and optionally feature) mask
/// logits for one instance. `g` is the instance's computation subgraph;
/// `center` its target node for node tasks. The explained label is the
/// model's own prediction on the unmasked graph.
///
/// Masked passes run against the unmasked pass's degrees (see
/// [`crate::gcn::FrozenStats`]); with live degrees the renormalization
/// absorbs most of the mask's effect and the cross-entropy term carries
/// almost no signal about which edges matter. The standardization
/// statistics stay live so the masked activations remain calibrated.
pub fn gnnex_explain(
    model: &GcnModel,
    g: &Graph,
    center: Option<usize>,
    cfg: &ExplainerConfig,
    anchors: Option<&AnchorSet>,
) -> Result<Explanation> {
    cfg.validate()?;
    if cfg.align == AlignMode::Anchor && anchors.is_none() {
        return Err(Error::Config("anchor alignment needs a fitted anchor set".into()));
    }
    let mut rng = seeding::rng(seeding::derive_seed(cfg.seed, "gnnex", 0));
    let target = forward(model, g, &MaskSpec::none())?;
    let frozen = target.frozen_stats().without_bn();
    let row = match model.task {
        Task::NodeClassification => {
            center.ok_or_else(|| Error::Config("node explanation needs a center".into()))?
        }
        Task::GraphClassification => 0,
    };
    let label = argmax(target.logits.row(row));

    let init = Normal::new(0.0, 0.1).expect("valid stddev");
    let mut theta: Vec<f64> = (0..g.n_edges()).map(|_| init.sample(&mut rng)).collect();
    let mut theta_f: Option<Vec<f64>> = cfg
        .feature_mask
        .then(|| (0..g.features.cols()).map(|_| init.sample(&mut rng)).collect());

    let sizes = match &theta_f {
        Some(f) => vec![theta.len(), f.len()],
        None => vec![theta.len()],
    };
    let mut opt = Adam::new(&sizes, cfg.learning_rate, 0.0);
    let no_decay = vec![false; sizes.len()];
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let w: Vec<f64> = theta.iter().map(|&t| sigmoid(t)).collect();
        let fmask = theta_f.as_ref().map(|tf| {
            // Baseline Z resampled per epoch from the per-dimension
            // empirical marginal of this graph's node attributes.
            let baseline = Matrix::from_fn(g.n_nodes, g.features.cols(), |_, c| {
                g.features.get(rng.gen_range(0..g.n_nodes), c)
            });
            FeatureMask {
                mask: tf.iter().map(|&t| sigmoid(t)).collect(),
                baseline,
            }
        });
        let masks = MaskSpec {
            edge_weights: Some(w.clone()),
            feature: fmask,
            frozen: Some(frozen.clone()),
        };
        let tape = forward(model, g, &masks)?;

        let (ce, dl) = softmax_ce(tape.logits.row(row), label);
        let mut d_logits = Matrix::zeros(tape.logits.rows(), tape.logits.cols());
        for (c, x) in dl.iter().enumerate() {
            d_logits.set(row, c, *x);
        }

        let (align_contrib, seeds) = match cfg.align {
            AlignMode::None => (0.0, LayerSeeds::none()),
            AlignMode::Absolute => {
                let term = align_loss_absolute(&target, &tape, model.task, center)?
                    .scaled(cfg.lambda);
                (term.loss, term.seeds)
            }
            AlignMode::Anchor => {
                let term =
                    align_loss_anchor(&target, &tape, anchors.unwrap(), model.task, center)?
                        .scaled(cfg.lambda);
                (term.loss, term.seeds)
            }
        };

        let mask_values = || {
            w.iter().chain(
                masks
                    .feature
                    .as_ref()
                    .map(|f| f.mask.as_slice())
                    .unwrap_or(&[])
                    .iter(),
            )
        };
        let size: f64 = cfg.size_coeff * mask_values().sum::<f64>();
        let ent: f64 = cfg.entropy_coeff * mask_values().map(|&p| binary_entropy(p)).sum::<f64>();
        let total = ce + size + ent + align_contrib;
        if !total.is_finite() {
            return Err(Error::Diverged { step: epoch, loss: total });
        }
        trace.push(TraceRow { epoch, ce, size, ent, align: align_contrib });

        let grads = backward(model, g, &masks, &tape, &d_logits, &seeds);
        // d/dθ σ(θ) = w(1−w); dH_b(σ(θ))/dθ = −θ·w(1−w).
        let gtheta: Vec<f64> = (0..theta.len())
            .map(|e| {
                let dw = grads.edge_weights[e] + cfg.size_coeff - cfg.entropy_coeff * theta[e];
                dw * w[e] * (1.0 - w[e])
            })
            .collect();
        match (&mut theta_f, &grads.feature_mask) {
            (Some(tf), Some(gf)) => {
                let gtf: Vec<f64> = (0..tf.len())
                    .map(|c| {
                        let p = sigmoid(tf[c]);
                        let dw = gf[c] + cfg.size_coeff - cfg.entropy_coeff * tf[c];
                        dw * p * (1.0 - p)
                    })
                    .collect();
                opt.step(
                    &mut [theta.as_mut_slice(), tf.as_mut_slice()],
                    &[gtheta.as_slice(), gtf.as_slice()],
                    &no_decay,
                );
            }
            _ => opt.step(&mut [theta.as_mut_slice()], &[gtheta.as_slice()], &no_decay),
        }
    }

    Ok(Explanation {
        instance: 0,
        method: "gnnex".into(),
        seed: cfg.seed,
        edge_importance: theta.iter().map(|&t| sigmoid(t)).collect(),
        feature_importance: theta_f.map(|tf| tf.iter().map(|&t| sigmoid(t)).collect()),
        trace,
        degenerate: false,
    })
}
