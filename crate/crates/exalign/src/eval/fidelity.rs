//! Fidelity under edge removal: delete the highest-importance edges one
//! at a time and track whether the model still makes its original
//! prediction. Faithful importance scores make the prediction flip early,
//! so lower curves (smaller area) are better.
//!
//! Removal zeroes the edge's weight but keeps every node, so layer
//! statistics stay defined and step r = m genuinely equals an edgeless
//! forward pass.

use crate::error::{Error, Result};
use crate::explain::Explanation;
use crate::gcn::{predict, GcnModel, MaskSpec};
use crate::graph::{Dataset, Graph};

/// Agreement with the unperturbed prediction after removing the top-r
/// edges, for r = 0..=r_max. Entry 0 is true by definition.
pub fn fidelity_points(
    model: &GcnModel,
    g: &Graph,
    center: Option<usize>,
    importance: &[f64],
    r_max: usize,
) -> Result<Vec<bool>> {
    if importance.len() != g.n_edges() {
        return Err(Error::DimMismatch(format!(
            "{} importance scores for {} edges",
            importance.len(),
            g.n_edges()
        )));
    }
    if r_max > g.n_edges() {
        return Err(Error::Config(format!(
            "cannot remove {r_max} of {} edges",
            g.n_edges()
        )));
    }
    let baseline = predict(model, g, &MaskSpec::none(), center)?.class;
    let ranked: Vec<usize> = {
        let mut order: Vec<usize> = (0..importance.len()).collect();
        order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
        order
    };
    let mut agree = Vec::with_capacity(r_max + 1);
    agree.push(true);
    let mut weights = vec![1.0; g.n_edges()];
    for r in 1..=r_max {
        weights[ranked[r - 1]] = 0.0;
        let pred = predict(model, g, &MaskSpec::edges(weights.clone()), center)?;
        agree.push(pred.class == baseline);
    }
    Ok(agree)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityCurve {
    /// Fraction of instances still predicting their original class after
    /// removing r edges, for r = 0..=r_max.
    pub accuracy: Vec<f64>,
    pub r_max: usize,
    pub n_instances: usize,
}

/// Aggregate the per-instance agreement indicators into an accuracy per
/// removal count over all explained instances.
pub fn fidelity_curve(
    model: &GcnModel,
    ds: &Dataset,
    explanations: &[Explanation],
    r_max: usize,
) -> Result<FidelityCurve> {
    if explanations.is_empty() {
        return Err(Error::Config("no explanations to evaluate".into()));
    }
    let mut hits = vec![0usize; r_max + 1];
    for e in explanations {
        let inst = ds.instance(e.instance)?;
        let points = fidelity_points(model, &inst.graph, inst.center, &e.edge_importance, r_max)?;
        for (h, ok) in hits.iter_mut().zip(&points) {
            *h += *ok as usize;
        }
    }
    let n = explanations.len();
    Ok(FidelityCurve {
        accuracy: hits.iter().map(|&h| h as f64 / n as f64).collect(),
        r_max,
        n_instances: n,
    })
}

/// Mean height of the curve; the comparison statistic between importance
/// rankings (lower = the ranking found edges the model truly relies on).
pub fn curve_area(accuracy: &[f64]) -> f64 {
    accuracy.iter().sum::<f64>() / accuracy.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::forward;
    use crate::graph::{gen_tree_grid, GenConfig, Task};
    use crate::linalg::Matrix;

    fn small_setup() -> (GcnModel, Dataset) {
        let ds = gen_tree_grid(&GenConfig {
            seed: 3,
            n_base: 31,
            n_motifs: 4,
            ..GenConfig::default()
        })
        .unwrap();
        let model = GcnModel::new(Task::NodeClassification, ds.feature_dim(), ds.num_classes, 7);
        (model, ds)
    }

    #[test]
    fn zero_removals_always_agree() {
        let (model, ds) = small_setup();
        let inst = ds.instance(ds.instances_with_ground_truth()[0]).unwrap();
        let imp: Vec<f64> = (0..inst.graph.n_edges()).map(|e| e as f64).collect();
        let pts = fidelity_points(&model, &inst.graph, inst.center, &imp, 5).unwrap();
        assert!(pts[0]);
        assert_eq!(pts.len(), 6);
    }

    #[test]
    fn removing_every_edge_matches_the_edgeless_oracle() {
        let (model, ds) = small_setup();
        let inst = ds.instance(ds.instances_with_ground_truth()[1]).unwrap();
        let g = &inst.graph;
        let m = g.n_edges();
        let imp = vec![0.5; m];
        let pts = fidelity_points(&model, g, inst.center, &imp, m).unwrap();

        // Independent oracle: a graph with the same nodes and features but
        // no edges at all, so aggregation is exactly the identity.
        let bare = Graph::new(
            g.n_nodes,
            Vec::new(),
            Matrix::from_fn(g.n_nodes, g.features.cols(), |r, c| g.features.get(r, c)),
        )
        .unwrap();
        let masked = {
            let w = vec![0.0; m];
            forward(&model, g, &MaskSpec::edges(w)).unwrap()
        };
        let bare_tape = forward(&model, &bare, &MaskSpec::none()).unwrap();
        assert_eq!(masked.logits, bare_tape.logits);

        let baseline = predict(&model, g, &MaskSpec::none(), inst.center).unwrap().class;
        let bare_pred = predict(&model, &bare, &MaskSpec::none(), inst.center).unwrap().class;
        assert_eq!(*pts.last().unwrap(), bare_pred == baseline);
    }

    #[test]
    fn curve_is_reproducible_and_in_range() {
        let (model, ds) = small_setup();
        let ids = ds.instances_with_ground_truth();
        let expls: Vec<Explanation> = ids[..4]
            .iter()
            .map(|&id| {
                let inst = ds.instance(id).unwrap();
                let m = inst.graph.n_edges();
                Explanation {
                    instance: id,
                    method: "test".into(),
                    seed: 0,
                    edge_importance: (0..m).map(|e| (e * 37 % 11) as f64 / 10.0).collect(),
                    feature_importance: None,
                    trace: Vec::new(),
                    degenerate: false,
                }
            })
            .collect();
        let a = fidelity_curve(&model, &ds, &expls, 8).unwrap();
        let b = fidelity_curve(&model, &ds, &expls, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.accuracy[0], 1.0);
        assert!(a.accuracy.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.accuracy.len(), 9);
        let area = curve_area(&a.accuracy);
        assert!((0.0..=1.0).contains(&area));
    }

    #[test]
    fn oversized_horizon_is_rejected() {
        let (model, ds) = small_setup();
        let inst = ds.instance(ds.instances_with_ground_truth()[0]).unwrap();
        let m = inst.graph.n_edges();
        let imp = vec![0.5; m];
        assert!(fidelity_points(&model, &inst.graph, inst.center, &imp, m + 1).is_err());
        assert!(fidelity_points(&model, &inst.graph, inst.center, &imp[..m - 1], 1).is_err());
    }

    #[test]
    fn hand_checked_aggregation_over_two_instances() {
        // Build two fake "instances" from the same dataset and verify the
        // aggregate equals the mean of per-instance indicator vectors.
        let (model, ds) = small_setup();
        let ids = ds.instances_with_ground_truth();
        let expls: Vec<Explanation> = ids[2..4]
            .iter()
            .map(|&id| {
                let inst = ds.instance(id).unwrap();
                Explanation {
                    instance: id,
                    method: "test".into(),
                    seed: 0,
                    edge_importance: (0..inst.graph.n_edges())
                        .map(|e| 1.0 / (1.0 + e as f64))
                        .collect(),
                    feature_importance: None,
                    trace: Vec::new(),
                    degenerate: false,
                }
            })
            .collect();
        let curve = fidelity_curve(&model, &ds, &expls, 6).unwrap();
        let mut expect = vec![0.0; 7];
        for e in &expls {
            let inst = ds.instance(e.instance).unwrap();
            let pts =
                fidelity_points(&model, &inst.graph, inst.center, &e.edge_importance, 6).unwrap();
            for (x, ok) in expect.iter_mut().zip(&pts) {
                *x += *ok as usize as f64 / 2.0;
            }
        }
        assert_eq!(curve.accuracy, expect);
    }
}
