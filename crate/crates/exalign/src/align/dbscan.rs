//! Deterministic density-based clustering.

use std::collections::VecDeque;

use crate::linalg::euclidean;

/// Cluster id per point, `None` for noise. Standard density-based
/// clustering under Euclidean distance: a point is *core* when its
/// closed eps-neighborhood (including itself) holds at least `min_pts`
/// points; clusters are the density-reachable sets around core points.
/// Points are visited in ascending index order and neighbor queues are
/// expanded in ascending order too, so the labeling is a pure function
/// of the input order.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");
    let n = points.len();
    let neighbors = |p: usize| -> Vec<usize> {
        (0..n)
            .filter(|&q| euclidean(&points[p], &points[q]) <= eps)
            .collect()
    };

    // Tri-state: u32::MAX = unvisited, u32::MAX-1 = noise, else cluster.
    const UNVISITED: u32 = u32::MAX;
    const NOISE: u32 = u32::MAX - 1;
    let mut labels = vec![UNVISITED; n];
    let mut cluster: u32 = 0;
    for p in 0..n {
        if labels[p] != UNVISITED {
            continue;
        }
        let nbrs = neighbors(p);
        if nbrs.len() < min_pts {
            labels[p] = NOISE;
            continue;
        }
        labels[p] = cluster;
        let mut queue: VecDeque<usize> = nbrs.into_iter().filter(|&q| q != p).collect();
        while let Some(q) = queue.pop_front() {
            if labels[q] == NOISE {
                labels[q] = cluster; // border point
            }
            if labels[q] != UNVISITED {
                continue;
            }
            labels[q] = cluster;
            let qn = neighbors(q);
            if qn.len() >= min_pts {
                queue.extend(qn);
            }
        }
        cluster += 1;
    }
    labels
        .into_iter()
        .map(|l| (l != NOISE).then_some(l as usize))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use rand::Rng;

    /// Independent reference: core points via neighborhood counting,
    /// clusters as union-find components of eps-close core pairs
    /// (numbered by smallest core index), border points joining the
    /// earliest-numbered component with a core neighbor.
    fn reference_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
        let n = points.len();
        let d = |a: usize, b: usize| euclidean(&points[a], &points[b]);
        let core: Vec<bool> = (0..n)
            .map(|p| (0..n).filter(|&q| d(p, q) <= eps).count() >= min_pts)
            .collect();

        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let r = find(parent, parent[x]);
                parent[x] = r;
            }
            parent[x]
        }
        for a in 0..n {
            for b in a + 1..n {
                if core[a] && core[b] && d(a, b) <= eps {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        // Components in order of their minimal core member.
        let mut order: Vec<usize> = Vec::new();
        let mut labels = vec![None; n];
        for p in 0..n {
            if core[p] {
                let root = find(&mut parent, p);
                let id = match order.iter().position(|&r| r == root) {
                    Some(i) => i,
                    None => {
                        order.push(root);
                        order.len() - 1
                    }
                };
                labels[p] = Some(id);
            }
        }
        for p in 0..n {
            if core[p] || labels[p].is_some() {
                continue;
            }
            labels[p] = (0..n)
                .filter(|&q| core[q] && d(p, q) <= eps)
                .map(|q| labels[q].unwrap())
                .min();
        }
        labels
    }

    #[test]
    fn two_separated_blobs_form_two_clusters() {
        let mut points = Vec::new();
        for i in 0..8 {
            points.push(vec![0.01 * i as f64, 0.0]);
            points.push(vec![10.0 + 0.01 * i as f64, 0.0]);
        }
        let labels = dbscan(&points, 0.5, 3);
        assert!(labels.iter().all(|l| l.is_some()));
        let k = labels.iter().map(|l| l.unwrap()).max().unwrap() + 1;
        assert_eq!(k, 2);
        // Blob membership is consistent.
        assert_eq!(labels[0], labels[2]);
        assert_ne!(labels[0], labels[1]);
    }

    #[test]
    fn tiny_eps_makes_everything_noise() {
        let points: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels = dbscan(&points, 0.25, 2);
        assert!(labels.iter().all(|l| l.is_none()));
    }

    #[test]
    fn matches_brute_force_reference_on_random_points() {
        let mut rng = seeding::rng(42);
        for trial in 0..8 {
            let n = 200;
            let dim = 2 + trial % 3;
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let eps = rng.gen_range(0.08..0.45);
            let min_pts = 2 + trial % 5;
            assert_eq!(
                dbscan(&points, eps, min_pts),
                reference_dbscan(&points, eps, min_pts),
                "trial {trial} eps {eps} min_pts {min_pts}"
            );
        }
    }
}
