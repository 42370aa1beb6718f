//! Synthetic benchmark generators and the fixed molecule fixture.
//!
//! All generators are deterministic in `GenConfig::seed`: the RNG call
//! order is part of the format, so changing it changes every dataset.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::seeding;

use super::{Dataset, GenConfig, Graph, Task, SYNTHETIC_FEATURE_DIM};

fn push_edge(edges: &mut Vec<(usize, usize)>, u: usize, v: usize) -> usize {
    edges.push((u.min(v), u.max(v)));
    edges.len() - 1
}

fn ones_features(n: usize) -> Matrix {
    Matrix::from_fn(n, SYNTHETIC_FEATURE_DIM, |_, _| 1.0)
}

/// Barabási–Albert preferential attachment with one edge per new node:
/// node `i` attaches to an endpoint drawn uniformly from the multiset of
/// all prior edge endpoints (degree-proportional sampling).
fn ba_tree(n: usize, edges: &mut Vec<(usize, usize)>, rng: &mut impl Rng) {
    let mut endpoints = Vec::with_capacity(2 * n);
    if n >= 2 {
        push_edge(edges, 0, 1);
        endpoints.extend([0, 1]);
    }
    for i in 2..n {
        let target = endpoints[rng.gen_range(0..endpoints.len())];
        push_edge(edges, target, i);
        endpoints.extend([target, i]);
    }
}

/// House motif on nodes `o..o+5`: top `o`, middle `o+1, o+2`,
/// bottom `o+3, o+4`; six edges (roof pair, crossbar, two walls, floor).
/// Returns the motif's edge indices.
fn house(o: usize, edges: &mut Vec<(usize, usize)>) -> Vec<usize> {
    [
        (o, o + 1),
        (o, o + 2),
        (o + 1, o + 2),
        (o + 1, o + 3),
        (o + 2, o + 4),
        (o + 3, o + 4),
    ]
    .iter()
    .map(|&(u, v)| push_edge(edges, u, v))
    .collect()
}

/// 3x3 grid motif on nodes `o..o+9` (row-major); twelve edges.
fn grid3(o: usize, edges: &mut Vec<(usize, usize)>) -> Vec<usize> {
    let mut idx = Vec::with_capacity(12);
    for r in 0..3 {
        for c in 0..3 {
            let a = o + 3 * r + c;
            if c + 1 < 3 {
                idx.push(push_edge(edges, a, a + 1));
            }
            if r + 1 < 3 {
                idx.push(push_edge(edges, a, a + 3));
            }
        }
    }
    idx
}

/// Six-node cycle on `o..o+6`.
fn cycle6(o: usize, edges: &mut Vec<(usize, usize)>) -> Vec<usize> {
    (0..6)
        .map(|i| push_edge(edges, o + i, o + (i + 1) % 6))
        .collect()
}

/// BA-Shapes: a BA base graph with house motifs bridged onto random base
/// nodes. Node labels: 0 base, 1 top, 2 middle, 3 bottom. Per-node ground
/// truth for every motif node is its house's six edges.
pub fn gen_ba_shapes(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = seeding::rng(seeding::derive_seed(cfg.seed, "ba-shapes", 0));
    let n = cfg.n_base + 5 * cfg.n_motifs;
    let mut edges = Vec::new();
    ba_tree(cfg.n_base, &mut edges, &mut rng);

    let mut labels = vec![0usize; n];
    let mut node_gt = BTreeMap::new();
    let mut union = BTreeSet::new();
    for m in 0..cfg.n_motifs {
        let o = cfg.n_base + 5 * m;
        let motif_edges = house(o, &mut edges);
        let anchor = o + rng.gen_range(0..5);
        let base = rng.gen_range(0..cfg.n_base);
        push_edge(&mut edges, anchor, base);
        labels[o] = 1;
        labels[o + 1] = 2;
        labels[o + 2] = 2;
        labels[o + 3] = 3;
        labels[o + 4] = 3;
        let gt: BTreeSet<usize> = motif_edges.iter().copied().collect();
        union.extend(&gt);
        for v in o..o + 5 {
            node_gt.insert(v, gt.clone());
        }
    }

    let mut g = Graph::new(n, edges, ones_features(n))?;
    g.node_labels = Some(labels);
    g.gt_edge_mask = (!union.is_empty()).then_some(union);
    g.node_gt = node_gt;
    Dataset::new(vec![g], Task::NodeClassification, 4)
}

/// Tree-Grid: a balanced binary tree of eight node layers (255 nodes)
/// with 3x3 grid motifs bridged onto random tree nodes. Labels: 0 tree,
/// 1 grid; ground truth per grid node is its grid's twelve edges.
pub fn gen_tree_grid(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = seeding::rng(seeding::derive_seed(cfg.seed, "tree-grid", 0));
    let tree_n = 255;
    let n = tree_n + 9 * cfg.n_motifs;
    let mut edges = Vec::new();
    for i in 0..(tree_n - 1) / 2 {
        push_edge(&mut edges, i, 2 * i + 1);
        push_edge(&mut edges, i, 2 * i + 2);
    }

    let mut labels = vec![0usize; n];
    let mut node_gt = BTreeMap::new();
    let mut union = BTreeSet::new();
    for m in 0..cfg.n_motifs {
        let o = tree_n + 9 * m;
        let motif_edges = grid3(o, &mut edges);
        let anchor = o + rng.gen_range(0..9);
        let base = rng.gen_range(0..tree_n);
        push_edge(&mut edges, anchor, base);
        let gt: BTreeSet<usize> = motif_edges.iter().copied().collect();
        union.extend(&gt);
        for v in o..o + 9 {
            labels[v] = 1;
            node_gt.insert(v, gt.clone());
        }
    }

    let mut g = Graph::new(n, edges, ones_features(n))?;
    g.node_labels = Some(labels);
    g.gt_edge_mask = (!union.is_empty()).then_some(union);
    g.node_gt = node_gt;
    Dataset::new(vec![g], Task::NodeClassification, 2)
}

/// Infection: an Erdős–Rényi graph where a random subset of nodes starts
/// infected. A node's label is its hop distance to the nearest infected
/// node, capped at 4 (unreachable counts as 4). Features carry the
/// infection indicator in column 0 so the class is learnable; remaining
/// columns are constant 1. Ground truth for a node at distance 1..=3 is
/// its unique tie-broken shortest path (smallest-id predecessor).
pub fn gen_infection(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = seeding::rng(seeding::derive_seed(cfg.seed, "infection", 0));
    let n = cfg.er_n;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < cfg.er_p {
                push_edge(&mut edges, u, v);
            }
        }
    }

    let n_infected = ((n as f64 * cfg.infected_frac).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut infected: Vec<usize> = order.into_iter().take(n_infected).collect();
    infected.sort_unstable();

    // Multi-source BFS for distances.
    let adj = {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    };
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &s in &infected {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }

    let labels: Vec<usize> = dist.iter().map(|&d| d.min(4)).collect();

    let edge_of = {
        let mut m = HashMap::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            m.insert((u, v), i);
        }
        m
    };
    let mut node_gt = BTreeMap::new();
    let mut union = BTreeSet::new();
    for v in 0..n {
        if !(1..=3).contains(&dist[v]) {
            continue;
        }
        let mut path = BTreeSet::new();
        let mut cur = v;
        while dist[cur] > 0 {
            let pred = adj[cur]
                .iter()
                .copied()
                .filter(|&u| dist[u] + 1 == dist[cur])
                .min()
                .expect("BFS-reached node has a predecessor");
            path.insert(edge_of[&(cur.min(pred), cur.max(pred))]);
            cur = pred;
        }
        union.extend(&path);
        node_gt.insert(v, path);
    }

    let features = Matrix::from_fn(n, SYNTHETIC_FEATURE_DIM, |r, c| {
        if c == 0 {
            if dist[r] == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            1.0
        }
    });

    let mut g = Graph::new(n, edges, features)?;
    g.node_labels = Some(labels);
    g.gt_edge_mask = (!union.is_empty()).then_some(union);
    g.node_gt = node_gt;
    Dataset::new(vec![g], Task::NodeClassification, 5)
}

/// Depth-four balanced binary tree: 15 nodes, 14 edges.
fn base_tree(edges: &mut Vec<(usize, usize)>) -> usize {
    for i in 0..7 {
        push_edge(edges, i, 2 * i + 1);
        push_edge(edges, i, 2 * i + 2);
    }
    15
}

/// 2x8 ladder: 16 nodes, two rails of 7 edges each plus 8 rungs.
fn base_ladder(edges: &mut Vec<(usize, usize)>) -> usize {
    for c in 0..8 {
        if c + 1 < 8 {
            push_edge(edges, c, c + 1);
            push_edge(edges, 8 + c, 8 + c + 1);
        }
        push_edge(edges, c, 8 + c);
    }
    16
}

/// Wheel: hub 0 with 15 spokes and a 15-node rim cycle.
fn base_wheel(edges: &mut Vec<(usize, usize)>) -> usize {
    for i in 1..16 {
        push_edge(edges, 0, i);
    }
    for i in 1..16 {
        let next = if i == 15 { 1 } else { i + 1 };
        push_edge(edges, i, next);
    }
    16
}

pub const MIXMOTIF_MOTIFS: [&str; 3] = ["cycle", "house", "grid"];
pub const MIXMOTIF_BASES: [&str; 3] = ["tree", "ladder", "wheel"];

/// MixMotif: graph classification by attached motif (0 cycle, 1 house,
/// 2 grid), where the base graph is a confounder. With probability
/// `mix_gamma` a motif lands on its preferred base (cycle->tree,
/// house->ladder, grid->wheel); otherwise the base is uniform. At
/// `mix_gamma = 0` every (motif, base) pair is equally likely; at 1 the
/// base alone predicts the label. Motif classes are exactly balanced.
pub fn gen_mixmotif(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = seeding::rng(seeding::derive_seed(cfg.seed, "mixmotif", 0));
    let mut graphs = Vec::with_capacity(cfg.n_graphs);
    for gi in 0..cfg.n_graphs {
        let motif = gi % 3;
        let base = if rng.gen::<f64>() < cfg.mix_gamma {
            motif
        } else {
            rng.gen_range(0..3)
        };
        let mut edges = Vec::new();
        let base_n = match base {
            0 => base_tree(&mut edges),
            1 => base_ladder(&mut edges),
            _ => base_wheel(&mut edges),
        };
        let (motif_n, motif_edges) = match motif {
            0 => (6, cycle6(base_n, &mut edges)),
            1 => (5, house(base_n, &mut edges)),
            _ => (9, grid3(base_n, &mut edges)),
        };
        let anchor = base_n + rng.gen_range(0..motif_n);
        let attach = rng.gen_range(0..base_n);
        push_edge(&mut edges, anchor, attach);

        let n = base_n + motif_n;
        let mut g = Graph::new(n, edges, ones_features(n))?;
        g.graph_label = Some(motif);
        g.gt_edge_mask = Some(motif_edges.into_iter().collect());
        graphs.push(g);
    }
    Dataset::new(graphs, Task::GraphClassification, 3)
}

/// Fixed 60-graph molecule-style fixture (internally seeded, so every
/// call returns the same dataset). Positive graphs carry a nitro/amine
/// style group: an N bonded to a ring carbon plus two O or two H; the
/// two N-O / N-H bonds are the ground truth. Negative graphs have plain
/// carbon/oxygen/hydrogen decorations and no nitrogen. Features are a
/// one-hot atom type (C, N, O, H) padded to the synthetic width.
pub fn mutag_fixture() -> Dataset {
    let mut rng = seeding::rng(seeding::derive_seed(0x4D_55_54_41_47, "mutag", 0));
    let mut graphs = Vec::with_capacity(60);
    for gi in 0..60 {
        let positive = gi % 2 == 1;
        let ring_len = rng.gen_range(5..8);
        // Atom types: 0 C, 1 N, 2 O, 3 H.
        let mut atoms = vec![0usize; ring_len];
        let mut edges = Vec::new();
        for i in 0..ring_len {
            push_edge(&mut edges, i, (i + 1) % ring_len);
        }
        let mut gt = BTreeSet::new();
        if positive {
            let n_id = atoms.len();
            atoms.push(1);
            push_edge(&mut edges, rng.gen_range(0..ring_len), n_id);
            let partner = if rng.gen_bool(0.5) { 2 } else { 3 };
            for _ in 0..2 {
                let x = atoms.len();
                atoms.push(partner);
                gt.insert(push_edge(&mut edges, n_id, x));
            }
        } else {
            match rng.gen_range(0..3) {
                0 => {
                    // Short carbon chain off the ring.
                    let mut prev = rng.gen_range(0..ring_len);
                    for _ in 0..rng.gen_range(1..3) {
                        let c = atoms.len();
                        atoms.push(0);
                        push_edge(&mut edges, prev, c);
                        prev = c;
                    }
                }
                1 => {
                    let o = atoms.len();
                    atoms.push(2);
                    push_edge(&mut edges, rng.gen_range(0..ring_len), o);
                }
                _ => {
                    let h = atoms.len();
                    atoms.push(3);
                    push_edge(&mut edges, rng.gen_range(0..ring_len), h);
                    let o = atoms.len();
                    atoms.push(2);
                    push_edge(&mut edges, rng.gen_range(0..ring_len), o);
                }
            }
        }
        if rng.gen_bool(0.5) {
            let c = atoms.len();
            atoms.push(0);
            push_edge(&mut edges, rng.gen_range(0..ring_len), c);
        }

        let features = Matrix::from_fn(atoms.len(), SYNTHETIC_FEATURE_DIM, |r, c| {
            if c == atoms[r] {
                1.0
            } else {
                0.0
            }
        });
        let mut g = Graph::new(atoms.len(), edges, features).expect("fixture graph is valid");
        g.graph_label = Some(positive as usize);
        if positive {
            g.gt_edge_mask = Some(gt);
        }
        graphs.push(g);
    }
    Dataset::new(graphs, Task::GraphClassification, 2).expect("fixture dataset is valid")
}
