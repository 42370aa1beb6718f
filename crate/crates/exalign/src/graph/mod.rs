//! Graph representation, benchmark generators, dataset files, and k-hop
//! subgraph extraction.

mod generators;
mod io;
mod subgraph;

pub use generators::{
    gen_ba_shapes, gen_infection, gen_mixmotif, gen_tree_grid, mutag_fixture, MIXMOTIF_BASES,
    MIXMOTIF_MOTIFS,
};
pub use io::{read_dataset, write_dataset};
pub use subgraph::{k_hop_subgraph, SubgraphMap};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seeding;

use rand::seq::SliceRandom;

/// Receptive field of the fixed three-layer GCN; node-level instances are
/// explained on the subgraph within this many hops of the target node.
pub const COMPUTATION_HOPS: usize = 3;

/// Feature width used by the synthetic generators.
pub const SYNTHETIC_FEATURE_DIM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    NodeClassification,
    GraphClassification,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::NodeClassification => "node",
            Task::GraphClassification => "graph",
        }
    }
}

/// Sparse undirected graph. Edges are stored once, as `(u, v)` with
/// `u < v`; masks and importances index into this edge list.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub features: Matrix,
    pub graph_label: Option<usize>,
    pub node_labels: Option<Vec<usize>>,
    /// Graph-level ground-truth explanation edges (graph tasks; union of
    /// the per-node sets on node tasks).
    pub gt_edge_mask: Option<BTreeSet<usize>>,
    /// Per-node ground-truth explanation edges (node tasks). Nodes without
    /// a ground truth are simply absent.
    pub node_gt: BTreeMap<usize, BTreeSet<usize>>,
}

impl Graph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize)>, features: Matrix) -> Result<Self> {
        let g = Graph {
            n_nodes,
            edges,
            features,
            graph_label: None,
            node_labels: None,
            gt_edge_mask: None,
            node_gt: BTreeMap::new(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.rows() != self.n_nodes {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows for {} nodes",
                self.features.rows(),
                self.n_nodes
            )));
        }
        let mut seen = BTreeSet::new();
        for &(u, v) in &self.edges {
            if u >= self.n_nodes || v >= self.n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {} nodes",
                    self.n_nodes
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
        }
        if let Some(gt) = &self.gt_edge_mask {
            if let Some(&e) = gt.iter().next_back() {
                if e >= self.edges.len() {
                    return Err(Error::InvalidGraph(format!(
                        "ground-truth edge index {e} out of range"
                    )));
                }
            }
        }
        for (node, gt) in &self.node_gt {
            if *node >= self.n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "ground-truth entry for missing node {node}"
                )));
            }
            if let Some(&e) = gt.iter().next_back() {
                if e >= self.edges.len() {
                    return Err(Error::InvalidGraph(format!(
                        "ground-truth edge index {e} out of range for node {node}"
                    )));
                }
            }
        }
        if let Some(labels) = &self.node_labels {
            if labels.len() != self.n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "{} node labels for {} nodes",
                    labels.len(),
                    self.n_nodes
                )));
            }
        }
        Ok(())
    }

    /// Neighbor lists, ascending by construction order of the edge list.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Map from a normalized `(min, max)` node pair to its edge index.
    pub fn edge_index_map(&self) -> HashMap<(usize, usize), usize> {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| ((u.min(v), u.max(v)), i))
            .collect()
    }
}

/// Train/test split over instance indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// 80/20 split derived deterministically from the instance count alone,
/// so a dataset loaded from disk reproduces the split it was generated
/// with.
pub fn derived_split(count: usize) -> Split {
    let mut ids: Vec<usize> = (0..count).collect();
    let mut rng = seeding::rng(seeding::derive_seed(0x51_EED, "split", count as u64));
    ids.shuffle(&mut rng);
    let n_train = count * 4 / 5;
    let test = ids.split_off(n_train);
    Split { train: ids, test }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub task: Task,
    pub num_classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(graphs: Vec<Graph>, task: Task, num_classes: usize) -> Result<Self> {
        let count = match task {
            Task::NodeClassification => graphs.first().map_or(0, |g| g.n_nodes),
            Task::GraphClassification => graphs.len(),
        };
        let ds = Dataset {
            graphs,
            task,
            num_classes,
            split: derived_split(count),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.task == Task::NodeClassification && self.graphs.len() != 1 {
            return Err(Error::InvalidGraph(
                "node-classification datasets hold exactly one graph".into(),
            ));
        }
        for g in &self.graphs {
            g.validate()?;
            if let Some(y) = g.graph_label {
                if y >= self.num_classes {
                    return Err(Error::InvalidGraph(format!(
                        "graph label {y} >= {} classes",
                        self.num_classes
                    )));
                }
            }
            if let Some(labels) = &g.node_labels {
                if let Some(&y) = labels.iter().max() {
                    if y >= self.num_classes {
                        return Err(Error::InvalidGraph(format!(
                            "node label {y} >= {} classes",
                            self.num_classes
                        )));
                    }
                }
            }
        }
        let count = self.instance_count();
        let mut seen = vec![false; count];
        for &i in self.split.train.iter().chain(&self.split.test) {
            if i >= count || seen[i] {
                return Err(Error::InvalidGraph("split is not a partition".into()));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidGraph("split does not cover all instances".into()));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, |g| g.features.cols())
    }

    /// Instances are nodes for node classification and whole graphs for
    /// graph classification.
    pub fn instance_count(&self) -> usize {
        match self.task {
            Task::NodeClassification => self.graphs.first().map_or(0, |g| g.n_nodes),
            Task::GraphClassification => self.graphs.len(),
        }
    }

    /// Materialize the instance to explain: the 3-hop computation subgraph
    /// around a node, or the graph itself.
    pub fn instance(&self, id: usize) -> Result<Instance> {
        match self.task {
            Task::NodeClassification => {
                let g = &self.graphs[0];
                if id >= g.n_nodes {
                    return Err(Error::InvalidGraph(format!("instance {id} out of range")));
                }
                let (sub, map) = k_hop_subgraph(g, id, COMPUTATION_HOPS);
                Ok(Instance {
                    id,
                    center: Some(map.center_new),
                    orig_ids: map.orig_of_new,
                    graph: sub,
                })
            }
            Task::GraphClassification => {
                let g = self
                    .graphs
                    .get(id)
                    .ok_or_else(|| Error::InvalidGraph(format!("instance {id} out of range")))?;
                Ok(Instance {
                    id,
                    center: None,
                    orig_ids: (0..g.n_nodes).collect(),
                    graph: g.clone(),
                })
            }
        }
    }

    /// Instance ids that carry a non-empty ground-truth explanation.
    pub fn instances_with_ground_truth(&self) -> Vec<usize> {
        match self.task {
            Task::NodeClassification => self.graphs[0]
                .node_gt
                .iter()
                .filter(|(_, gt)| !gt.is_empty())
                .map(|(&v, _)| v)
                .collect(),
            Task::GraphClassification => (0..self.graphs.len())
                .filter(|&i| {
                    self.graphs[i]
                        .gt_edge_mask
                        .as_ref()
                        .is_some_and(|gt| !gt.is_empty())
                })
                .collect(),
        }
    }

    pub fn label_of_instance(&self, id: usize) -> Option<usize> {
        match self.task {
            Task::NodeClassification => self.graphs[0].node_labels.as_ref().map(|l| l[id]),
            Task::GraphClassification => self.graphs[id].graph_label,
        }
    }
}

/// One unit of explanation work: a graph together with the node being
/// explained (node tasks only) and the mapping back to dataset node ids.
#[derive(Clone, Debug)]
pub struct Instance {
    pub id: usize,
    pub graph: Graph,
    pub center: Option<usize>,
    pub orig_ids: Vec<usize>,
}

impl Instance {
    /// Ground-truth edge set in this instance's local edge indexing.
    pub fn ground_truth(&self) -> Option<&BTreeSet<usize>> {
        match self.center {
            Some(c) => self.graph.node_gt.get(&c),
            None => self.graph.gt_edge_mask.as_ref(),
        }
    }
}

/// Generator parameters. Each generator reads the fields it needs.
#[derive(Clone, Debug)]
pub struct GenConfig {
    pub seed: u64,
    /// BA-Shapes: base graph size.
    pub n_base: usize,
    /// BA-Shapes / Tree-Grid / MixMotif: number of attached motifs.
    pub n_motifs: usize,
    /// Infection: Erdős–Rényi node count.
    pub er_n: usize,
    /// Infection: Erdős–Rényi edge probability.
    pub er_p: f64,
    /// Infection: fraction of initially infected nodes.
    pub infected_frac: f64,
    /// MixMotif: probability that a motif lands on its preferred base.
    pub mix_gamma: f64,
    /// MixMotif: number of graphs.
    pub n_graphs: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            n_base: 300,
            n_motifs: 80,
            er_n: 1000,
            er_p: 0.004,
            infected_frac: 0.05,
            mix_gamma: 0.0,
            n_graphs: 900,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.er_p) {
            return Err(Error::Config(format!("er_p = {} not in [0,1]", self.er_p)));
        }
        if !(0.0..=1.0).contains(&self.infected_frac) {
            return Err(Error::Config(format!(
                "infected_frac = {} not in [0,1]",
                self.infected_frac
            )));
        }
        if !(0.0..=1.0).contains(&self.mix_gamma) {
            return Err(Error::Config(format!(
                "mix_gamma = {} not in [0,1]",
                self.mix_gamma
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_rejects_bad_edges() {
        let feats = Matrix::zeros(3, 2);
        assert!(Graph::new(3, vec![(0, 3)], feats.clone()).is_err());
        assert!(Graph::new(3, vec![(1, 1)], feats.clone()).is_err());
        assert!(Graph::new(3, vec![(0, 1), (1, 0)], feats.clone()).is_err());
        assert!(Graph::new(3, vec![(0, 1), (1, 2)], feats).is_ok());
    }

    #[test]
    fn split_partitions_and_is_deterministic() {
        for count in [1usize, 2, 5, 700] {
            let s = derived_split(count);
            assert_eq!(s.train.len() + s.test.len(), count);
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..count).collect::<Vec<_>>());
            assert_eq!(derived_split(count), s);
        }
        let s = derived_split(700);
        assert_eq!(s.train.len(), 560);
    }
}
