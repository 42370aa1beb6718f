//! Ranking quality of an edge-importance vector against a ground-truth
//! edge set, in the Mann–Whitney form: the probability that a uniformly
//! random (positive, negative) pair is ordered correctly, ties worth 0.5.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// AUROC of `importance` for separating `positives` (edge indices) from
/// the remaining edges. Errors when the split is degenerate: no positives,
/// or nothing but positives.
pub fn edge_auroc(importance: &[f64], positives: &BTreeSet<usize>) -> Result<f64> {
    let n = importance.len();
    if let Some(&bad) = positives.iter().find(|&&e| e >= n) {
        return Err(Error::Config(format!(
            "ground-truth edge {bad} out of range for {n} edges"
        )));
    }
    let n_pos = positives.len();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateMetric(
            "AUROC is undefined when every edge (or no edge) is ground truth".into(),
        ));
    }
    if importance.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("importance scores must be finite".into()));
    }

    // Rank-sum with midranks for ties: sort by score, give each tie group
    // the average of the ranks it spans, then sum positive ranks.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| importance[a].total_cmp(&importance[b]).then(a.cmp(&b)));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && importance[order[j]] == importance[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j share the midrank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &e in &order[i..j] {
            if positives.contains(&e) {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}
