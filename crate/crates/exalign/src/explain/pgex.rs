//! Parameterized mask generator, trained once per (model, dataset).
//!
//! A two-layer perceptron maps an edge descriptor — the two endpoints'
//! final-layer embeddings, plus the target node's for node tasks — to an
//! edge logit ω. Training samples relaxed Bernoulli edge weights
//! `σ((ω + g)/τ)` with logistic noise `g` under an annealed temperature
//! and minimizes the masked objective summed over the training split.
//! Inference is a single deterministic pass: importance = σ(ω).

use rand::Rng;

use crate::align::{align_loss_absolute, align_loss_anchor, AnchorSet};
use crate::error::{Error, Result};
use crate::gcn::{
    backward, forward, softmax_ce, Adam, ForwardTape, GcnModel, LayerSeeds, MaskSpec,
};
use crate::graph::{Dataset, Graph, Task};
use crate::linalg::{argmax, sigmoid, Matrix};
use crate::seeding;

use super::{AlignMode, Explanation, ExplainerConfig};

const PGEX_HIDDEN: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct PgExplainer {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    /// Node tasks append the center node's embedding to each descriptor.
    pub uses_center: bool,
}

impl PgExplainer {
    fn new(in_dim: usize, uses_center: bool, seed: u64) -> Self {
        let mut rng = seeding::rng(seeding::derive_seed(seed, "pgex-init", 0));
        let limit1 = (6.0 / (in_dim + PGEX_HIDDEN) as f64).sqrt();
        let w1 = Matrix::from_fn(in_dim, PGEX_HIDDEN, |_, _| rng.gen_range(-limit1..limit1));
        let limit2 = (6.0 / (PGEX_HIDDEN + 1) as f64).sqrt();
        let w2 = Matrix::from_fn(PGEX_HIDDEN, 1, |_, _| rng.gen_range(-limit2..limit2));
        PgExplainer {
            w1,
            b1: vec![0.0; PGEX_HIDDEN],
            w2,
            b2: vec![0.0; 1],
            uses_center,
        }
    }

    fn in_dim(&self) -> usize {
        self.w1.rows()
    }

    /// Edge logit and the hidden activations (needed for backprop).
    fn logit(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let mut a = vec![0.0; PGEX_HIDDEN];
        for (k, ak) in a.iter_mut().enumerate() {
            let mut p = self.b1[k];
            for (j, zj) in z.iter().enumerate() {
                p += zj * self.w1.get(j, k);
            }
            *ak = p.max(0.0);
        }
        let mut omega = self.b2[0];
        for (k, ak) in a.iter().enumerate() {
            omega += ak * self.w2.get(k, 0);
        }
        (omega, a)
    }
}

/// Per-edge descriptors from an unmasked forward tape.
fn descriptors(tape: &ForwardTape, g: &Graph, center: Option<usize>) -> Vec<Vec<f64>> {
    let h3 = &tape.layers[3];
    g.edges
        .iter()
        .map(|&(u, v)| {
            let mut z = Vec::with_capacity(h3.cols() * 3);
            z.extend_from_slice(h3.row(u));
            z.extend_from_slice(h3.row(v));
            if let Some(c) = center {
                z.extend_from_slice(h3.row(c));
            }
            z
        })
        .collect()
}

/// Concrete (relaxed Bernoulli) sample: `σ((ω + noise)/τ)`.
fn concrete_sample(omega: f64, noise_logit: f64, tau: f64) -> f64 {
    sigmoid((omega + noise_logit) / tau)
}

struct InstanceCache {
    graph: Graph,
    center: Option<usize>,
    tape: ForwardTape,
    descriptors: Vec<Vec<f64>>,
    label: usize,
}

/// Train the generator over the dataset's training split. Deterministic
/// given `cfg.seed`.
pub fn pgex_train(
    model: &GcnModel,
    ds: &Dataset,
    cfg: &ExplainerConfig,
    anchors: Option<&AnchorSet>,
) -> Result<PgExplainer> {
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Err(Error::Config("generator training needs at least one epoch".into()));
    }
    if cfg.align == AlignMode::Anchor && anchors.is_none() {
        return Err(Error::Config("anchor alignment needs a fitted anchor set".into()));
    }
    let uses_center = model.task == Task::NodeClassification;
    let h = model.dims()[3];
    let in_dim = if uses_center { 3 * h } else { 2 * h };
    let mut gen = PgExplainer::new(in_dim, uses_center, cfg.seed);

    // Embeddings, descriptors and explained labels never change during
    // generator training; compute them once.
    let mut cache = Vec::with_capacity(ds.split.train.len());
    for &id in &ds.split.train {
        let inst = ds.instance(id)?;
        let tape = forward(model, &inst.graph, &MaskSpec::none())?;
        let row = match model.task {
            Task::NodeClassification => inst
                .center
                .ok_or_else(|| Error::Config("node instance lacks a center".into()))?,
            Task::GraphClassification => 0,
        };
        let label = argmax(tape.logits.row(row));
        cache.push(InstanceCache {
            descriptors: descriptors(&tape, &inst.graph, inst.center),
            graph: inst.graph,
            center: inst.center,
            tape,
            label,
        });
    }

    let sizes = [
        gen.w1.as_slice().len(),
        gen.b1.len(),
        gen.w2.as_slice().len(),
        gen.b2.len(),
    ];
    let mut opt = Adam::new(&sizes, cfg.learning_rate, 0.0);
    let no_decay = [false; 4];
    let mut rng = seeding::rng(seeding::derive_seed(cfg.seed, "pgex-train", 0));

    for epoch in 0..cfg.epochs {
        let tau = if cfg.epochs == 1 {
            cfg.temp_start
        } else {
            let frac = epoch as f64 / (cfg.epochs - 1) as f64;
            cfg.temp_start * (cfg.temp_end / cfg.temp_start).powf(frac)
        };

        let mut gw1 = Matrix::zeros(gen.w1.rows(), gen.w1.cols());
        let mut gb1 = vec![0.0; PGEX_HIDDEN];
        let mut gw2 = Matrix::zeros(PGEX_HIDDEN, 1);
        let mut gb2 = vec![0.0; 1];
        let mut epoch_loss = 0.0;

        for inst in &cache {
            let m = inst.graph.n_edges();
            let mut acts = Vec::with_capacity(m);
            let mut w_logits = Vec::with_capacity(m);
            let mut w = Vec::with_capacity(m);
            for z in &inst.descriptors {
                let (omega, a) = gen.logit(z);
                let u: f64 = rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12);
                let noise = u.ln() - (1.0 - u).ln();
                acts.push(a);
                w_logits.push((omega + noise) / tau);
                w.push(concrete_sample(omega, noise, tau));
            }

            // Masked passes run against the cached unmasked statistics,
            // for the same reason the per-instance mask optimizer does.
            let masks = MaskSpec {
                edge_weights: Some(w.clone()),
                feature: None,
                frozen: Some(inst.tape.frozen_stats().without_bn()),
            };
            let tape = forward(model, &inst.graph, &masks)?;
            let row = match model.task {
                Task::NodeClassification => inst.center.unwrap(),
                Task::GraphClassification => 0,
            };
            let (ce, dl) = softmax_ce(tape.logits.row(row), inst.label);
            let mut d_logits = Matrix::zeros(tape.logits.rows(), tape.logits.cols());
            for (c, x) in dl.iter().enumerate() {
                d_logits.set(row, c, *x);
            }
            let (align_contrib, seeds) = match cfg.align {
                AlignMode::None => (0.0, LayerSeeds::none()),
                AlignMode::Absolute => {
                    let t = align_loss_absolute(&inst.tape, &tape, model.task, inst.center)?
                        .scaled(cfg.lambda);
                    (t.loss, t.seeds)
                }
                AlignMode::Anchor => {
                    let t = align_loss_anchor(
                        &inst.tape,
                        &tape,
                        anchors.unwrap(),
                        model.task,
                        inst.center,
                    )?
                    .scaled(cfg.lambda);
                    (t.loss, t.seeds)
                }
            };
            epoch_loss += ce
                + align_contrib
                + cfg.size_coeff * w.iter().sum::<f64>()
                + cfg.entropy_coeff
                    * w
                        .iter()
                        .map(|&p| {
                            let t = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
                            t(p) + t(1.0 - p)
                        })
                        .sum::<f64>();

            let grads = backward(model, &inst.graph, &masks, &tape, &d_logits, &seeds);
            for e in 0..m {
                // dH_b(σ(x))/dx = −x·σ(x)(1−σ(x)), with x the sampled
                // weight's logit; the chain into ω divides by τ.
                let dw = grads.edge_weights[e]
                    + cfg.size_coeff
                    - cfg.entropy_coeff * w_logits[e];
                let domega = dw * w[e] * (1.0 - w[e]) / tau;
                gb2[0] += domega;
                let z = &inst.descriptors[e];
                for k in 0..PGEX_HIDDEN {
                    let a = acts[e][k];
                    gw2.add_at(k, 0, domega * a);
                    if a > 0.0 {
                        let da = domega * gen.w2.get(k, 0);
                        gb1[k] += da;
                        for (j, zj) in z.iter().enumerate() {
                            gw1.add_at(j, k, da * zj);
                        }
                    }
                }
            }
        }

        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { step: epoch, loss: epoch_loss });
        }
        opt.step(
            &mut [
                gen.w1.as_mut_slice(),
                gen.b1.as_mut_slice(),
                gen.w2.as_mut_slice(),
                gen.b2.as_mut_slice(),
            ],
            &[gw1.as_slice(), &gb1, gw2.as_slice(), &gb2],
            &no_decay,
        );
    }
    Ok(gen)
}

/// Apply a trained generator to one instance: deterministic, no sampling.
pub fn pgex_explain(
    gen: &PgExplainer,
    model: &GcnModel,
    g: &Graph,
    center: Option<usize>,
) -> Result<Explanation> {
    if gen.uses_center && center.is_none() {
        return Err(Error::Config("this generator needs a center node".into()));
    }
    let tape = forward(model, g, &MaskSpec::none())?;
    let descs = descriptors(&tape, g, gen.uses_center.then(|| center.unwrap()));
    if let Some(z) = descs.first() {
        if z.len() != gen.in_dim() {
            return Err(Error::DimMismatch(format!(
                "descriptor dim {} does not match generator input {}",
                z.len(),
                gen.in_dim()
            )));
        }
    }
    let edge_importance = descs.iter().map(|z| sigmoid(gen.logit(z).0)).collect();
    Ok(Explanation {
        instance: 0,
        method: "pgex".into(),
        seed: 0,
        edge_importance,
        feature_importance: None,
        trace: Vec::new(),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_mixmotif, GenConfig};

    fn tiny_dataset() -> Dataset {
        gen_mixmotif(&GenConfig {
            seed: 5,
            n_graphs: 24,
            mix_gamma: 0.0,
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn temperature_limit_hardens_samples() {
        // As τ → 0 the relaxed sample snaps to the sign of ω + noise.
        assert!(concrete_sample(2.0, -1.0, 1e-6) > 1.0 - 1e-9);
        assert!(concrete_sample(-2.0, 1.0, 1e-6) < 1e-9);
        // At moderate temperature it stays strictly inside (0,1).
        let s = concrete_sample(0.5, 0.3, 1.0);
        assert!(s > 0.0 && s < 1.0);
    }

    #[test]
    fn training_is_deterministic_and_inference_is_stable() {
        let ds = tiny_dataset();
        let model = GcnModel::new(Task::GraphClassification, 10, 3, 3);
        let cfg = ExplainerConfig { epochs: 3, ..ExplainerConfig::pgex() };
        let g1 = pgex_train(&model, &ds, &cfg, None).unwrap();
        let g2 = pgex_train(&model, &ds, &cfg, None).unwrap();
        assert_eq!(g1, g2);

        let inst = ds.instance(1).unwrap();
        let a = pgex_explain(&g1, &model, &inst.graph, None).unwrap();
        let b = pgex_explain(&g1, &model, &inst.graph, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.edge_importance.len(), inst.graph.n_edges());
        a.validate().unwrap();
    }

    #[test]
    fn single_edge_graph_gets_single_importance() {
        let ds = tiny_dataset();
        let model = GcnModel::new(Task::GraphClassification, 10, 3, 3);
        let cfg = ExplainerConfig { epochs: 2, ..ExplainerConfig::pgex() };
        let gen = pgex_train(&model, &ds, &cfg, None).unwrap();
        let g = Graph::new(2, vec![(0, 1)], Matrix::from_fn(2, 10, |_, _| 1.0)).unwrap();
        let e = pgex_explain(&gen, &model, &g, None).unwrap();
        assert_eq!(e.edge_importance.len(), 1);
    }

    #[test]
    fn zero_epochs_is_rejected() {
        let ds = tiny_dataset();
        let model = GcnModel::new(Task::GraphClassification, 10, 3, 3);
        let cfg = ExplainerConfig { epochs: 0, ..ExplainerConfig::pgex() };
        assert!(pgex_train(&model, &ds, &cfg, None).is_err());
    }
}
