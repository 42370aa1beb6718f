//! Masked forward pass, recording the tape needed for reverse mode.

use crate::error::{Error, Result};
use crate::graph::{Graph, Task};
use crate::linalg::Matrix;

use super::{GcnModel, BN_EPS};

/// Feature perturbation `F̂ = Z + (F − Z) ⊙ m`, with one mask value per
/// feature dimension broadcast over nodes.
#[derive(Clone, Debug)]
pub struct FeatureMask {
    pub mask: Vec<f64>,
    pub baseline: Matrix,
}

/// Per-layer standardization constants (column means and scales).
#[derive(Clone, Debug)]
pub struct BnConstants {
    pub mean: [Vec<f64>; 3],
    pub sigma: [Vec<f64>; 3],
}

/// Normalization constants captured from a reference forward pass (see
/// [`ForwardTape::frozen_stats`]): the weighted degrees behind
/// `D̃^{-1/2}(A_w+I)D̃^{-1/2}`, and optionally the per-layer
/// standardization statistics.
///
/// When the degrees are computed live, down-weighting edges shrinks them,
/// which re-inflates the surviving entries of Ã; a near-uniform mask can
/// drift far from all-ones while barely moving the logits, starving a
/// mask optimizer of signal. Freezing the degrees at their unmasked
/// values makes a masked message attenuate instead of redistributing, so
/// the pass measures what the masked edges contribute. Plain prediction
/// keeps the live semantics (where a zero weight is exactly an edge
/// deletion).
///
/// The standardization statistics can be frozen too (`bn = Some(..)`),
/// but beware: clean-pass column spreads can be tiny, and standardizing a
/// perturbed pass against them amplifies the perturbation enough to
/// saturate the softmax. The mask optimizers keep them live.
#[derive(Clone, Debug)]
pub struct FrozenStats {
    pub deg: Vec<f64>,
    pub bn: Option<BnConstants>,
}

impl FrozenStats {
    /// Drop the standardization constants, keeping only the degrees.
    pub fn without_bn(mut self) -> Self {
        self.bn = None;
        self
    }
}

/// Which masks to apply during a forward pass. `None` fields mean
/// "identity": all-ones edge weights / raw features / live normalization.
#[derive(Clone, Debug, Default)]
pub struct MaskSpec {
    pub edge_weights: Option<Vec<f64>>,
    pub feature: Option<FeatureMask>,
    pub frozen: Option<FrozenStats>,
}

impl MaskSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn edges(w: Vec<f64>) -> Self {
        MaskSpec {
            edge_weights: Some(w),
            ..Self::default()
        }
    }
}

/// `Ã = D̃^{-1/2}(A_w + I)D̃^{-1/2}` in sparse form. Self-loops keep
/// weight 1; `deg` is the weighted degree including the self-loop, so it
/// is always ≥ 1 and every division below is safe.
#[derive(Clone, Debug)]
pub struct NormalizedAdjacency {
    pub edges: Vec<(usize, usize)>,
    pub edge_weights: Vec<f64>,
    pub deg: Vec<f64>,
    /// Diagonal entries `1 / D̃_v`.
    pub self_norm: Vec<f64>,
    /// `(D̃_u D̃_v)^{-1/2}` per edge (the direct ∂Ã/∂w factor).
    pub pair_norm: Vec<f64>,
    /// Off-diagonal entries `w_e · (D̃_u D̃_v)^{-1/2}`.
    pub edge_norm: Vec<f64>,
}

pub fn normalize_adjacency(g: &Graph, edge_weights: &[f64]) -> NormalizedAdjacency {
    let mut deg = vec![1.0; g.n_nodes];
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        deg[u] += edge_weights[e];
        deg[v] += edge_weights[e];
    }
    normalize_with_degrees(g, edge_weights, deg)
}

/// Like [`normalize_adjacency`], but against caller-supplied (frozen)
/// degrees instead of the weights' own.
pub fn normalize_with_degrees(
    g: &Graph,
    edge_weights: &[f64],
    deg: Vec<f64>,
) -> NormalizedAdjacency {
    assert_eq!(edge_weights.len(), g.n_edges(), "one weight per edge");
    assert_eq!(deg.len(), g.n_nodes, "one degree per node");
    let self_norm: Vec<f64> = deg.iter().map(|d| 1.0 / d).collect();
    let pair_norm: Vec<f64> = g
        .edges
        .iter()
        .map(|&(u, v)| 1.0 / (deg[u] * deg[v]).sqrt())
        .collect();
    let edge_norm: Vec<f64> = pair_norm
        .iter()
        .zip(edge_weights)
        .map(|(p, w)| p * w)
        .collect();
    NormalizedAdjacency {
        edges: g.edges.clone(),
        edge_weights: edge_weights.to_vec(),
        deg,
        self_norm,
        pair_norm,
        edge_norm,
    }
}

impl NormalizedAdjacency {
    /// `Ã · h`. Ã is symmetric, so this is also the adjoint.
    pub fn apply(&self, h: &Matrix) -> Matrix {
        let cols = h.cols();
        let mut out = Matrix::zeros(h.rows(), h.cols());
        for v in 0..h.rows() {
            let s = self.self_norm[v];
            let src = h.row(v);
            let dst = out.row_mut(v);
            for c in 0..cols {
                dst[c] = s * src[c];
            }
        }
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            let w = self.edge_norm[e];
            if w == 0.0 {
                continue;
            }
            for c in 0..cols {
                let hu = h.get(u, c);
                let hv = h.get(v, c);
                out.add_at(u, c, w * hv);
                out.add_at(v, c, w * hu);
            }
        }
        out
    }
}

/// Everything the backward pass needs: post-activation embeddings
/// `layers[0..=3]`, the aggregated inputs `pre_agg[l] = Ã·H^l`, the
/// standardized pre-activations `bn_xhat[l]` with their per-column scales
/// `bn_sigma[l] = √(var+ε)`, the classifier input
/// `cls_input = [H^1‖H^2‖H^3]`, the pooled vector for graph tasks, and
/// the logits (`n×C` for node tasks, `1×C` for graph tasks).
#[derive(Clone, Debug)]
pub struct ForwardTape {
    pub layers: [Matrix; 4],
    pub pre_agg: [Matrix; 3],
    pub bn_xhat: [Matrix; 3],
    pub bn_mean: [Vec<f64>; 3],
    pub bn_sigma: [Vec<f64>; 3],
    /// True when the pass used [`MaskSpec::frozen`]; the backward pass
    /// then treats the degrees as constants.
    pub frozen: bool,
    /// True when the frozen statistics also pinned the standardization
    /// constants; the backward pass then drops the mean/variance
    /// correction terms as well.
    pub bn_frozen: bool,
    pub cls_input: Matrix,
    pub pooled: Option<Vec<f64>>,
    pub logits: Matrix,
    pub adj: NormalizedAdjacency,
}

impl ForwardTape {
    /// Capture this pass's normalization constants for reuse as frozen
    /// values in later masked passes.
    pub fn frozen_stats(&self) -> FrozenStats {
        FrozenStats {
            deg: self.adj.deg.clone(),
            bn: Some(BnConstants {
                mean: self.bn_mean.clone(),
                sigma: self.bn_sigma.clone(),
            }),
        }
    }
}

pub fn forward(model: &GcnModel, g: &Graph, masks: &MaskSpec) -> Result<ForwardTape> {
    if g.features.cols() != model.in_dim() {
        return Err(Error::DimMismatch(format!(
            "graph features have dim {}, model expects {}",
            g.features.cols(),
            model.in_dim()
        )));
    }
    let weights = match &masks.edge_weights {
        Some(w) => {
            if w.len() != g.n_edges() {
                return Err(Error::DimMismatch(format!(
                    "{} edge weights for {} edges",
                    w.len(),
                    g.n_edges()
                )));
            }
            w.clone()
        }
        None => vec![1.0; g.n_edges()],
    };
    let h0 = match &masks.feature {
        None => g.features.clone(),
        Some(fm) => {
            if fm.mask.len() != g.features.cols()
                || fm.baseline.rows() != g.features.rows()
                || fm.baseline.cols() != g.features.cols()
            {
                return Err(Error::DimMismatch("feature mask/baseline shape".into()));
            }
            Matrix::from_fn(g.n_nodes, g.features.cols(), |v, c| {
                let z = fm.baseline.get(v, c);
                z + (g.features.get(v, c) - z) * fm.mask[c]
            })
        }
    };

    let adj = match &masks.frozen {
        Some(fz) => {
            if fz.deg.len() != g.n_nodes {
                return Err(Error::DimMismatch(format!(
                    "{} frozen degrees for {} nodes",
                    fz.deg.len(),
                    g.n_nodes
                )));
            }
            if fz.deg.iter().any(|&d| !(d >= 1.0) || !d.is_finite()) {
                return Err(Error::InvalidGraph(
                    "frozen degrees must be finite and at least 1".into(),
                ));
            }
            normalize_with_degrees(g, &weights, fz.deg.clone())
        }
        None => normalize_adjacency(g, &weights),
    };
    let n = g.n_nodes;
    let mut layers = vec![h0];
    let mut pre_agg = Vec::with_capacity(3);
    let mut bn_xhat = Vec::with_capacity(3);
    let mut bn_mean = Vec::with_capacity(3);
    let mut bn_sigma = Vec::with_capacity(3);
    for l in 0..3 {
        let p = adj.apply(layers.last().unwrap());
        let mut m = p.matmul(&model.conv_w[l]);
        // Standardize each column — over this graph's nodes, or against
        // the caller's frozen statistics — then apply the learned affine
        // and the ReLU.
        let cols = m.cols();
        let frozen_bn = masks.frozen.as_ref().and_then(|fz| fz.bn.as_ref());
        if let Some(bn) = frozen_bn {
            if bn.mean[l].len() != cols || bn.sigma[l].len() != cols {
                return Err(Error::DimMismatch(format!(
                    "frozen statistics for layer {l} have {} columns, expected {cols}",
                    bn.mean[l].len()
                )));
            }
            if bn.sigma[l].iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "frozen statistics for layer {l} contain a non-positive scale"
                )));
            }
        }
        let mut mean_l = vec![0.0; cols];
        let mut sigma = vec![0.0; cols];
        for c in 0..cols {
            let (mean, sg) = match frozen_bn {
                Some(bn) => (bn.mean[l][c], bn.sigma[l][c]),
                None => {
                    let mean = (0..n).map(|v| m.get(v, c)).sum::<f64>() / n as f64;
                    let var =
                        (0..n).map(|v| (m.get(v, c) - mean).powi(2)).sum::<f64>() / n as f64;
                    (mean, (var + BN_EPS).sqrt())
                }
            };
            mean_l[c] = mean;
            sigma[c] = sg;
            for v in 0..n {
                m.set(v, c, (m.get(v, c) - mean) / sg);
            }
        }
        let h = Matrix::from_fn(n, cols, |v, c| {
            (model.bn_gamma[l][c] * m.get(v, c) + model.bn_beta[l][c]).max(0.0)
        });
        pre_agg.push(p);
        bn_xhat.push(m);
        bn_mean.push(mean_l);
        bn_sigma.push(sigma);
        layers.push(h);
    }

    // The classifier reads all three layers' embeddings side by side;
    // with constant input features the early layers carry the sharpest
    // local-structure signal, and skipping them straight to the
    // classifier is what makes the purely structural benchmarks
    // learnable.
    let cls_input = Matrix::from_fn(
        g.n_nodes,
        layers[1].cols() + layers[2].cols() + layers[3].cols(),
        |v, c| {
            let h = layers[1].cols();
            match c / h {
                0 => layers[1].get(v, c % h),
                1 => layers[2].get(v, c % h),
                _ => layers[3].get(v, c % h),
            }
        },
    );
    let (pooled, logits) = match model.task {
        Task::NodeClassification => {
            let mut logits = cls_input.matmul(&model.cls_w);
            for v in 0..logits.rows() {
                let row = logits.row_mut(v);
                for (c, b) in model.cls_b.iter().enumerate() {
                    row[c] += b;
                }
            }
            (None, logits)
        }
        Task::GraphClassification => {
            let pooled = cls_input.mean_row();
            let mut logits = Matrix::zeros(1, model.num_classes());
            for c in 0..model.num_classes() {
                let mut z = model.cls_b[c];
                for (j, p) in pooled.iter().enumerate() {
                    z += p * model.cls_w.get(j, c);
                }
                logits.set(0, c, z);
            }
            (Some(pooled), logits)
        }
    };
    if !logits.is_finite() {
        return Err(Error::Diverged {
            step: 0,
            loss: f64::NAN,
        });
    }

    let layers: [Matrix; 4] = layers.try_into().expect("exactly four layers");
    let pre_agg: [Matrix; 3] = pre_agg.try_into().expect("exactly three aggregations");
    let bn_xhat: [Matrix; 3] = bn_xhat.try_into().expect("exactly three layers");
    let bn_mean: [Vec<f64>; 3] = bn_mean.try_into().expect("exactly three layers");
    let bn_sigma: [Vec<f64>; 3] = bn_sigma.try_into().expect("exactly three layers");
    Ok(ForwardTape {
        layers,
        pre_agg,
        bn_xhat,
        bn_mean,
        bn_sigma,
        frozen: masks.frozen.is_some(),
        bn_frozen: masks.frozen.as_ref().is_some_and(|fz| fz.bn.is_some()),
        cls_input,
        pooled,
        logits,
        adj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_ba_shapes, GenConfig};
    use crate::linalg::softmax;

    fn toy_graph(n: usize, edges: Vec<(usize, usize)>, dim: usize) -> Graph {
        let feats = Matrix::from_fn(n, dim, |r, c| 0.3 + 0.1 * (r as f64) - 0.05 * (c as f64));
        Graph::new(n, edges, feats).unwrap()
    }

    #[test]
    fn two_node_normalization_is_all_half() {
        let g = toy_graph(2, vec![(0, 1)], 3);
        let adj = normalize_adjacency(&g, &[1.0]);
        assert_eq!(adj.deg, vec![2.0, 2.0]);
        assert!((adj.self_norm[0] - 0.5).abs() < 1e-15);
        assert!((adj.edge_norm[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_make_identity() {
        let g = toy_graph(4, vec![(0, 1), (1, 2), (2, 3)], 2);
        let adj = normalize_adjacency(&g, &[0.0; 3]);
        let h = Matrix::from_fn(4, 2, |r, c| (r * 2 + c) as f64);
        assert_eq!(adj.apply(&h), h);
    }

    /// Dense brute-force `D̃^{-1/2}(A_w + I)D̃^{-1/2}` oracle.
    fn dense_norm(g: &Graph, w: &[f64]) -> Vec<Vec<f64>> {
        let n = g.n_nodes;
        let mut a = vec![vec![0.0; n]; n];
        for v in 0..n {
            a[v][v] = 1.0;
        }
        for (e, &(u, v)) in g.edges.iter().enumerate() {
            a[u][v] = w[e];
            a[v][u] = w[e];
        }
        let deg: Vec<f64> = a.iter().map(|row| row.iter().sum::<f64>()).collect();
        let mut s = vec![vec![0.0; n]; n];
        for u in 0..n {
            for v in 0..n {
                s[u][v] = a[u][v] / (deg[u] * deg[v]).sqrt();
            }
        }
        s
    }

    #[test]
    fn sparse_matches_dense_oracle() {
        let ds = gen_ba_shapes(&GenConfig {
            n_base: 10,
            n_motifs: 0,
            ..GenConfig::default()
        })
        .unwrap();
        let g = &ds.graphs[0];
        let mut rng_state = ij32(1);
        let w: Vec<f64> = (0..g.n_edges())
            .map(|_| {
                rng_state = ij32(rng_state);
                (rng_state % 1000) as f64 / 1000.0
            })
            .collect();
        let adj = normalize_adjacency(g, &w);
        let dense = dense_norm(g, &w);
        for (e, &(u, v)) in g.edges.iter().enumerate() {
            assert!((adj.edge_norm[e] - dense[u][v]).abs() <= 1e-12);
        }
        for v in 0..g.n_nodes {
            assert!((adj.self_norm[v] - dense[v][v]).abs() <= 1e-12);
        }
        // And the operator agrees when applied to a matrix.
        let h = Matrix::from_fn(g.n_nodes, 3, |r, c| ((r + 1) * (c + 2)) as f64 * 0.1);
        let sparse = adj.apply(&h);
        for u in 0..g.n_nodes {
            for c in 0..3 {
                let want: f64 = (0..g.n_nodes).map(|v| dense[u][v] * h.get(v, c)).sum();
                assert!((sparse.get(u, c) - want).abs() <= 1e-12);
            }
        }
    }

    fn ij32(x: u64) -> u64 {
        x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407)
    }

    #[test]
    fn zero_features_give_zero_logits_and_uniform_softmax() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)], Matrix::zeros(3, 4)).unwrap();
        let model = GcnModel::new(Task::NodeClassification, 4, 3, 0);
        let tape = forward(&model, &g, &MaskSpec::none()).unwrap();
        assert!(tape.logits.as_slice().iter().all(|&x| x == 0.0));
        let p = softmax(tape.logits.row(0));
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn all_ones_mask_equals_no_mask_bitwise() {
        let g = toy_graph(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)], 6);
        let model = GcnModel::new(Task::GraphClassification, 6, 2, 3);
        let bare = forward(&model, &g, &MaskSpec::none()).unwrap();
        let masked = forward(
            &model,
            &g,
            &MaskSpec {
                edge_weights: Some(vec![1.0; g.n_edges()]),
                feature: Some(FeatureMask {
                    mask: vec![1.0; 6],
                    baseline: Matrix::zeros(5, 6),
                }),
                frozen: None,
            },
        )
        .unwrap();
        assert_eq!(bare.logits, masked.logits);
        assert_eq!(bare.layers[3], masked.layers[3]);
    }

    #[test]
    fn frozen_stats_at_all_ones_match_the_live_pass_bitwise() {
        let g = toy_graph(7, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (1, 5)], 4);
        let model = GcnModel::new(Task::NodeClassification, 4, 3, 2);
        let live = forward(&model, &g, &MaskSpec::none()).unwrap();
        assert!(!live.frozen && !live.bn_frozen);

        // At all-ones the frozen constants are exactly what a live pass
        // would recompute, so both frozen modes reproduce it bitwise.
        for stats in [live.frozen_stats(), live.frozen_stats().without_bn()] {
            let expect_bn = stats.bn.is_some();
            let frozen = forward(
                &model,
                &g,
                &MaskSpec {
                    edge_weights: Some(vec![1.0; g.n_edges()]),
                    feature: None,
                    frozen: Some(stats),
                },
            )
            .unwrap();
            assert!(frozen.frozen);
            assert_eq!(frozen.bn_frozen, expect_bn);
            assert_eq!(live.logits, frozen.logits);
            assert_eq!(live.layers[3], frozen.layers[3]);
        }

        // Away from all-ones the frozen pass must not renormalize, so it
        // diverges from the live pass (which recomputes its degrees).
        let half = vec![0.5; g.n_edges()];
        let frozen_half = forward(
            &model,
            &g,
            &MaskSpec {
                edge_weights: Some(half.clone()),
                feature: None,
                frozen: Some(live.frozen_stats().without_bn()),
            },
        )
        .unwrap();
        let live_half = forward(&model, &g, &MaskSpec::edges(half)).unwrap();
        assert!(frozen_half.logits.is_finite());
        assert_ne!(frozen_half.logits, live_half.logits);

        // Mismatched statistics are rejected.
        let mut bad = live.frozen_stats();
        bad.bn.as_mut().unwrap().mean[1].pop();
        let err = forward(
            &model,
            &g,
            &MaskSpec { edge_weights: None, feature: None, frozen: Some(bad) },
        );
        assert!(err.is_err());
        let mut bad_deg = live.frozen_stats();
        bad_deg.deg[0] = 0.0;
        let err = forward(
            &model,
            &g,
            &MaskSpec { edge_weights: None, feature: None, frozen: Some(bad_deg) },
        );
        assert!(err.is_err());
    }

    /// Fully dense re-implementation of the forward pass.
    fn dense_forward(model: &GcnModel, g: &Graph, w: &[f64]) -> Vec<f64> {
        let s = dense_norm(g, w);
        let n = g.n_nodes;
        let mut h: Vec<Vec<f64>> = (0..n).map(|v| g.features.row(v).to_vec()).collect();
        let mut cat: Vec<Vec<f64>> = vec![Vec::new(); n];
        for l in 0..3 {
            let wm = &model.conv_w[l];
            let mut pre = vec![vec![0.0; wm.cols()]; n];
            for v in 0..n {
                let mut agg = vec![0.0; h[0].len()];
                for u in 0..n {
                    for (c, a) in agg.iter_mut().enumerate() {
                        *a += s[v][u] * h[u][c];
                    }
                }
                for c in 0..wm.cols() {
                    pre[v][c] = (0..agg.len()).map(|j| agg[j] * wm.get(j, c)).sum();
                }
            }
            let mut next = vec![vec![0.0; wm.cols()]; n];
            for c in 0..wm.cols() {
                let mean = (0..n).map(|v| pre[v][c]).sum::<f64>() / n as f64;
                let var = (0..n).map(|v| (pre[v][c] - mean).powi(2)).sum::<f64>() / n as f64;
                let sigma = (var + super::BN_EPS).sqrt();
                for v in 0..n {
                    let xhat = (pre[v][c] - mean) / sigma;
                    next[v][c] = (model.bn_gamma[l][c] * xhat + model.bn_beta[l][c]).max(0.0);
                }
            }
            for v in 0..n {
                cat[v].extend_from_slice(&next[v]);
            }
            h = next;
        }
        match model.task {
            Task::NodeClassification => {
                let mut out = Vec::new();
                for v in 0..n {
                    for c in 0..model.num_classes() {
                        let mut z = model.cls_b[c];
                        for j in 0..cat[v].len() {
                            z += cat[v][j] * model.cls_w.get(j, c);
                        }
                        out.push(z);
                    }
                }
                out
            }
            Task::GraphClassification => {
                let mut pooled = vec![0.0; cat[0].len()];
                for row in &cat {
                    for (c, p) in pooled.iter_mut().enumerate() {
                        *p += row[c] / n as f64;
                    }
                }
                (0..model.num_classes())
                    .map(|c| {
                        model.cls_b[c]
                            + pooled
                                .iter()
                                .enumerate()
                                .map(|(j, p)| p * model.cls_w.get(j, c))
                                .sum::<f64>()
                    })
                    .collect()
            }
        }
    }

    #[test]
    fn path_graph_matches_dense_oracle() {
        let g = toy_graph(4, vec![(0, 1), (1, 2), (2, 3)], 5);
        for task in [Task::NodeClassification, Task::GraphClassification] {
            let mut model = GcnModel::new(task, 5, 3, 11);
            // Non-neutral normalization parameters so the oracle
            // exercises them.
            for l in 0..3 {
                for c in 0..20 {
                    model.bn_gamma[l][c] = 1.0 + 0.03 * (c as f64) - 0.2 * (l as f64);
                    model.bn_beta[l][c] = 0.01 * (c as f64 + 1.0) * (l as f64 - 1.0);
                }
            }
            model.cls_b = vec![0.2, -0.1, 0.05];
            let w = vec![0.9, 0.4, 0.7];
            let tape = forward(&model, &g, &MaskSpec::edges(w.clone())).unwrap();
            let oracle = dense_forward(&model, &g, &w);
            for (i, &want) in oracle.iter().enumerate() {
                let got = tape.logits.as_slice()[i];
                assert!((got - want).abs() <= 1e-10, "logit {i}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let g = toy_graph(6, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)], 4);
        let model = GcnModel::new(Task::GraphClassification, 4, 3, 5);
        let tape = forward(&model, &g, &MaskSpec::none()).unwrap();

        // Relabel nodes by the permutation p (new id of old v = p[v]).
        let p = [3usize, 0, 4, 1, 5, 2];
        let edges: Vec<(usize, usize)> = g
            .edges
            .iter()
            .map(|&(u, v)| (p[u].min(p[v]), p[u].max(p[v])))
            .collect();
        let feats = Matrix::from_fn(6, 4, |r, c| {
            let old = p.iter().position(|&x| x == r).unwrap();
            g.features.get(old, c)
        });
        let pg = Graph::new(6, edges, feats).unwrap();
        let ptape = forward(&model, &pg, &MaskSpec::none()).unwrap();

        for v in 0..6 {
            for c in 0..20 {
                let a = tape.layers[3].get(v, c);
                let b = ptape.layers[3].get(p[v], c);
                assert!((a - b).abs() <= 1e-10);
            }
        }
        for c in 0..3 {
            assert!((tape.logits.get(0, c) - ptape.logits.get(0, c)).abs() <= 1e-10);
        }
    }

    #[test]
    fn zero_weight_equals_deleted_edge() {
        let g = toy_graph(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)], 3);
        let model = GcnModel::new(Task::NodeClassification, 3, 2, 9);
        let mut w = vec![1.0; 5];
        w[4] = 0.0;
        let masked = forward(&model, &g, &MaskSpec::edges(w)).unwrap();

        let mut edges = g.edges.clone();
        edges.remove(4);
        let deleted = Graph::new(5, edges, g.features.clone()).unwrap();
        let bare = forward(&model, &deleted, &MaskSpec::none()).unwrap();
        for i in 0..masked.logits.as_slice().len() {
            let d = (masked.logits.as_slice()[i] - bare.logits.as_slice()[i]).abs();
            assert!(d <= 1e-12);
        }
    }
}
