//! Consistency across repeated explanation runs: the structural Hamming
//! distance between top-k edge sets, averaged over instances and unordered
//! run pairs.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::explain::Explanation;

/// Indices of the `k` highest-importance edges; score ties break toward
/// the smaller edge index, so the selection is deterministic.
pub fn top_edges(importance: &[f64], k: usize) -> BTreeSet<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.into_iter().collect()
}

/// Size of the symmetric difference between two edge sets.
pub fn shd(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> usize {
    a.symmetric_difference(b).count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShdReport {
    /// Mean pairwise SHD over all instances and unordered run pairs.
    pub mean: f64,
    pub top_k: usize,
    pub n_instances: usize,
    pub n_pairs: usize,
    /// True when some instance had fewer than `top_k` edges, forcing a
    /// clamp to that instance's edge count.
    pub clamped: bool,
}

/// Average pairwise SHD across `runs`, each run being the same instances
/// explained under a different seed.
pub fn shd_consistency(runs: &[Vec<Explanation>], top_k: usize) -> Result<ShdReport> {
    if runs.len() < 2 {
        return Err(Error::Config("consistency needs at least two runs".into()));
    }
    if top_k == 0 {
        return Err(Error::Config("top_k must be positive".into()));
    }
    let n_instances = runs[0].len();
    if n_instances == 0 {
        return Err(Error::Config("runs contain no explanations".into()));
    }
    for run in runs {
        if run.len() != n_instances {
            return Err(Error::Config("runs explain different instance counts".into()));
        }
        for (e, first) in run.iter().zip(&runs[0]) {
            if e.instance != first.instance {
                return Err(Error::Config(format!(
                    "runs disagree on instance order ({} vs {})",
                    e.instance, first.instance
                )));
            }
            if e.edge_importance.len() != first.edge_importance.len() {
                return Err(Error::Config(format!(
                    "instance {}: edge counts differ between runs",
                    e.instance
                )));
            }
        }
    }

    let mut total = 0usize;
    let mut pairs = 0usize;
    let mut clamped = false;
    for i in 0..n_instances {
        let m = runs[0][i].edge_importance.len();
        let k = if top_k > m {
            clamped = true;
            m
        } else {
            top_k
        };
        let sets: Vec<BTreeSet<usize>> = runs
            .iter()
            .map(|run| top_edges(&run[i].edge_importance, k))
            .collect();
        for a in 0..sets.len() {
            for b in a + 1..sets.len() {
                total += shd(&sets[a], &sets[b]);
                pairs += 1;
            }
        }
    }
    Ok(ShdReport {
        mean: total as f64 / pairs as f64,
        top_k,
        n_instances,
        n_pairs: pairs,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use rand::Rng;

    fn expl(instance: usize, importance: Vec<f64>) -> Explanation {
        Explanation {
            instance,
            method: "test".into(),
            seed: 0,
            edge_importance: importance,
            feature_importance: None,
            trace: Vec::new(),
            degenerate: false,
        }
    }

    #[test]
    fn top_edges_breaks_ties_by_index() {
        let sel = top_edges(&[0.5, 0.9, 0.5, 0.1], 2);
        assert_eq!(sel, [0, 1].into_iter().collect());
        // k larger than the vector just returns everything.
        assert_eq!(top_edges(&[0.3, 0.1], 10).len(), 2);
    }

    #[test]
    fn identical_runs_have_zero_distance() {
        let run: Vec<Explanation> = vec![expl(0, vec![0.9, 0.1, 0.5])];
        let rep = shd_consistency(&[run.clone(), run.clone(), run], 2).unwrap();
        assert_eq!(rep.mean, 0.0);
        assert_eq!(rep.n_pairs, 3);
        assert!(!rep.clamped);
    }

    #[test]
    fn disjoint_top_k_sets_score_twice_k() {
        // Six edges; run A ranks the first three highest, run B the last three.
        let a = vec![expl(0, vec![0.9, 0.8, 0.7, 0.1, 0.2, 0.3])];
        let b = vec![expl(0, vec![0.1, 0.2, 0.3, 0.9, 0.8, 0.7])];
        for k in 1..=3 {
            let rep = shd_consistency(&[a.clone(), b.clone()], k).unwrap();
            assert_eq!(rep.mean, (2 * k) as f64);
        }
    }

    #[test]
    fn oversized_k_clamps_and_flags() {
        let a = vec![expl(0, vec![0.9, 0.1])];
        let b = vec![expl(0, vec![0.1, 0.9])];
        let rep = shd_consistency(&[a, b], 6).unwrap();
        // Clamped to k=2: both sets are {0,1}.
        assert_eq!(rep.mean, 0.0);
        assert!(rep.clamped);
    }

    #[test]
    fn mismatched_runs_are_rejected() {
        let a = vec![expl(0, vec![0.9])];
        let b = vec![expl(1, vec![0.9])];
        assert!(shd_consistency(&[a.clone(), b], 1).is_err());
        assert!(shd_consistency(&[a.clone()], 1).is_err());
        let c = vec![expl(0, vec![0.9, 0.2])];
        assert!(shd_consistency(&[a.clone(), c], 1).is_err());
        assert!(shd_consistency(&[a.clone(), a], 0).is_err());
    }

    #[test]
    fn shd_satisfies_metric_axioms_on_random_sets() {
        let mut rng = seeding::rng(2718);
        let random_set = |rng: &mut rand_chacha::ChaCha8Rng| -> BTreeSet<usize> {
            let size = rng.gen_range(0..=12);
            (0..size).map(|_| rng.gen_range(0..40)).collect()
        };
        for _ in 0..10_000 {
            let a = random_set(&mut rng);
            let b = random_set(&mut rng);
            let c = random_set(&mut rng);
            // Identity of indiscernibles, both directions.
            assert_eq!(shd(&a, &a), 0);
            if shd(&a, &b) == 0 {
                assert_eq!(a, b);
            }
            // Symmetry and triangle inequality.
            assert_eq!(shd(&a, &b), shd(&b, &a));
            assert!(shd(&a, &c) <= shd(&a, &b) + shd(&b, &c));
        }
    }
}
