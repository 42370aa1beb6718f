//! k-hop computation subgraphs.
//!
//! A 3-layer GCN's prediction for a node depends only on its 3-hop
//! neighborhood, so node-level explanations are optimized on that
//! subgraph. Node and edge order are preserved (kept nodes renumbered in
//! ascending original id, kept edges in original list order) so repeated
//! extraction is stable.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::linalg::Matrix;

use super::Graph;

#[derive(Clone, Debug)]
pub struct SubgraphMap {
    /// New node id -> original node id (ascending).
    pub orig_of_new: Vec<usize>,
    /// Original node id -> new node id.
    pub new_of_orig: BTreeMap<usize, usize>,
    /// Original edge index -> new edge index.
    pub edge_map: BTreeMap<usize, usize>,
    /// The extraction center in new ids.
    pub center_new: usize,
}

pub fn k_hop_subgraph(g: &Graph, center: usize, k: usize) -> (Graph, SubgraphMap) {
    assert!(center < g.n_nodes, "center {center} out of range");
    let adj = g.adjacency();
    let mut dist = vec![usize::MAX; g.n_nodes];
    dist[center] = 0;
    let mut q = VecDeque::from([center]);
    while let Some(u) = q.pop_front() {
        if dist[u] == k {
            continue;
        }
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }

    let orig_of_new: Vec<usize> = (0..g.n_nodes).filter(|&v| dist[v] <= k).collect();
    let new_of_orig: BTreeMap<usize, usize> = orig_of_new
        .iter()
        .enumerate()
        .map(|(new, &orig)| (orig, new))
        .collect();

    let mut edges = Vec::new();
    let mut edge_map = BTreeMap::new();
    for (ei, &(u, v)) in g.edges.iter().enumerate() {
        if let (Some(&nu), Some(&nv)) = (new_of_orig.get(&u), new_of_orig.get(&v)) {
            edge_map.insert(ei, edges.len());
            edges.push((nu.min(nv), nu.max(nv)));
        }
    }

    let features = Matrix::from_fn(orig_of_new.len(), g.features.cols(), |r, c| {
        g.features.get(orig_of_new[r], c)
    });
    let node_labels = g
        .node_labels
        .as_ref()
        .map(|ls| orig_of_new.iter().map(|&v| ls[v]).collect());
    let remap_set = |gt: &BTreeSet<usize>| -> BTreeSet<usize> {
        gt.iter().filter_map(|e| edge_map.get(e).copied()).collect()
    };
    let gt_edge_mask = g
        .gt_edge_mask
        .as_ref()
        .map(|gt| remap_set(gt))
        .filter(|gt| !gt.is_empty());
    let node_gt = g
        .node_gt
        .iter()
        .filter_map(|(v, gt)| {
            let new_v = *new_of_orig.get(v)?;
            let mapped = remap_set(gt);
            (!mapped.is_empty()).then_some((new_v, mapped))
        })
        .collect();

    let sub = Graph {
        n_nodes: orig_of_new.len(),
        edges,
        features,
        graph_label: g.graph_label,
        node_labels,
        gt_edge_mask,
        node_gt,
    };
    debug_assert!(sub.validate().is_ok());
    let center_new = new_of_orig[&center];
    (
        sub,
        SubgraphMap {
            orig_of_new,
            new_of_orig,
            edge_map,
            center_new,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::super::{gen_ba_shapes, GenConfig};
    use super::*;

    fn path_graph(n: usize) -> Graph {
        let edges = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::new(n, edges, Matrix::zeros(n, 1)).unwrap()
    }

    #[test]
    fn path_graph_truncates_at_k() {
        let g = path_graph(6);
        let (sub, map) = k_hop_subgraph(&g, 0, 3);
        assert_eq!(map.orig_of_new, vec![0, 1, 2, 3]);
        assert_eq!(sub.edges, vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(map.center_new, 0);

        let (sub, map) = k_hop_subgraph(&g, 3, 2);
        assert_eq!(map.orig_of_new, vec![1, 2, 3, 4, 5]);
        assert_eq!(map.center_new, 2);
        assert_eq!(sub.n_edges(), 4);
    }

    #[test]
    fn extraction_is_idempotent() {
        let cfg = GenConfig { n_base: 40, n_motifs: 6, ..GenConfig::default() };
        let ds = gen_ba_shapes(&cfg).unwrap();
        let g = &ds.graphs[0];
        for center in [0, 40, 47, 63] {
            let (sub, map) = k_hop_subgraph(g, center, 3);
            let (sub2, map2) = k_hop_subgraph(&sub, map.center_new, 3);
            assert_eq!(sub, sub2);
            assert_eq!(map2.orig_of_new, (0..sub.n_nodes).collect::<Vec<_>>());
        }
    }

    #[test]
    fn motif_ground_truth_survives_extraction() {
        let ds = gen_ba_shapes(&GenConfig::default()).unwrap();
        let g = &ds.graphs[0];
        // A house has diameter 2, so every motif edge stays within 3 hops
        // of any motif node.
        for &center in g.node_gt.keys().take(25) {
            let (sub, map) = k_hop_subgraph(g, center, 3);
            let gt = sub.node_gt.get(&map.center_new).unwrap();
            assert_eq!(gt.len(), 6);
            // Remapped edges connect the same original node pairs.
            let orig_gt = &g.node_gt[&center];
            let orig_pairs: BTreeSet<(usize, usize)> =
                orig_gt.iter().map(|&e| g.edges[e]).collect();
            let new_pairs: BTreeSet<(usize, usize)> = gt
                .iter()
                .map(|&e| {
                    let (u, v) = sub.edges[e];
                    let (a, b) = (map.orig_of_new[u], map.orig_of_new[v]);
                    (a.min(b), a.max(b))
                })
                .collect();
            assert_eq!(orig_pairs, new_pairs);
        }
    }

    #[test]
    fn kept_nodes_match_bfs_distances() {
        let ds = gen_ba_shapes(&GenConfig { n_base: 60, n_motifs: 5, ..GenConfig::default() })
            .unwrap();
        let g = &ds.graphs[0];
        let adj = g.adjacency();
        for center in [0usize, 10, 61] {
            // Independent BFS oracle.
            let mut dist = vec![usize::MAX; g.n_nodes];
            dist[center] = 0;
            let mut q = std::collections::VecDeque::from([center]);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            let expected: Vec<usize> = (0..g.n_nodes).filter(|&v| dist[v] <= 3).collect();
            let (_, map) = k_hop_subgraph(g, center, 3);
            assert_eq!(map.orig_of_new, expected);
        }
    }
}
