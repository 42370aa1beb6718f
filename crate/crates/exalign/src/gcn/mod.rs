//! Three-layer GCN with masked message passing.
//!
//! The target model under explanation:
//! `h^{l+1} = ReLU(BN_l(Ã h^l W_l))` with
//! `Ã = D̃^{-1/2}(A_w + I)D̃^{-1/2}`, where `A_w` carries per-edge weights
//! in `[0,1]` (the explanation mask) and self-loops stay at weight 1. The
//! linear classifier reads the concatenated per-layer embeddings
//! `[H^1‖H^2‖H^3]` — per node for node tasks, mean-pooled for graph
//! tasks.
//!
//! Two choices need justifying, both forced by the constant all-ones
//! input features of the structural benchmarks. Without the affine
//! normalization, every node embedding is (recursively) a nonnegative
//! multiple of one shared vector, so all nodes share an argmax and
//! nothing is learnable; the normalization shift breaks the collinearity,
//! and its variance rescaling keeps long training runs from
//! destabilizing. And the early layers carry the sharpest local-structure
//! signal, so the classifier reads all three layers rather than only the
//! last. `BN_l` always standardizes over the nodes of the graph in hand —
//! there are no running statistics, so a forward pass is a deterministic
//! function of its inputs and explanations differentiate through the
//! statistics exactly.

mod backward;
mod forward;
mod train;

pub use backward::{backward, Gradients, LayerSeeds};
pub use forward::{
    forward, normalize_adjacency, normalize_with_degrees, BnConstants, FeatureMask, ForwardTape,
    FrozenStats, MaskSpec, NormalizedAdjacency,
};
pub(crate) use train::Adam;
pub use train::{accuracy, predict, softmax_ce, train, Prediction, TrainConfig, TrainHistory};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Task;
use crate::linalg::Matrix;
use crate::seeding;

pub const HIDDEN_DIM: usize = 20;

/// Numerical floor added to the per-column variance before the square
/// root, so standardizing a constant column yields zeros instead of NaN.
pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel {
    pub task: Task,
    /// Convolution weights: `in×h`, `h×h`, `h×h`.
    pub conv_w: [Matrix; 3],
    /// Per-layer normalization scale (init 1) and shift (init 0).
    pub bn_gamma: [Vec<f64>; 3],
    pub bn_beta: [Vec<f64>; 3],
    /// Classifier `3h×C` on the concatenated (pooled) per-layer
    /// embeddings `[H^1‖H^2‖H^3]`.
    pub cls_w: Matrix,
    pub cls_b: Vec<f64>,
}

fn xavier_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-limit..limit))
}

impl GcnModel {
    pub fn new(task: Task, in_dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = seeding::rng(seeding::derive_seed(seed, "gcn-init", 0));
        let h = HIDDEN_DIM;
        GcnModel {
            task,
            conv_w: [
                xavier_uniform(in_dim, h, &mut rng),
                xavier_uniform(h, h, &mut rng),
                xavier_uniform(h, h, &mut rng),
            ],
            bn_gamma: [vec![1.0; h], vec![1.0; h], vec![1.0; h]],
            bn_beta: [vec![0.0; h], vec![0.0; h], vec![0.0; h]],
            cls_w: xavier_uniform(3 * h, num_classes, &mut rng),
            cls_b: vec![0.0; num_classes],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.conv_w[0].rows()
    }

    pub fn num_classes(&self) -> usize {
        self.cls_w.cols()
    }

    /// `[in, h, h, h, C]`.
    pub fn dims(&self) -> [usize; 5] {
        [
            self.in_dim(),
            self.conv_w[0].cols(),
            self.conv_w[1].cols(),
            self.conv_w[2].cols(),
            self.num_classes(),
        ]
    }
}

fn write_f64s(out: &mut String, vals: &[f64]) {
    for v in vals {
        // 17 significant digits round-trip f64 exactly.
        let _ = write!(out, " {v:.16e}");
    }
    out.push('\n');
}

pub fn write_model(m: &GcnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let d = m.dims();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "#gcnmodel v1 dims={},{},{},{},{} task={}",
        d[0],
        d[1],
        d[2],
        d[3],
        d[4],
        m.task.as_str()
    );
    for l in 0..3 {
        for r in 0..m.conv_w[l].rows() {
            let _ = write!(out, "w{l} r{r}");
            write_f64s(&mut out, m.conv_w[l].row(r));
        }
        let _ = write!(out, "g{l}");
        write_f64s(&mut out, &m.bn_gamma[l]);
        let _ = write!(out, "b{l}");
        write_f64s(&mut out, &m.bn_beta[l]);
    }
    for r in 0..m.cls_w.rows() {
        let _ = write!(out, "wc r{r}");
        write_f64s(&mut out, m.cls_w.row(r));
    }
    let _ = write!(out, "bc");
    write_f64s(&mut out, &m.cls_b);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<GcnModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("#gcnmodel") {
        return Err(Error::parse(path, hline, "expected #gcnmodel header"));
    }
    if toks.next() != Some("v1") {
        return Err(Error::parse(path, hline, "unsupported model version"));
    }
    let dims_tok = toks
        .next()
        .and_then(|t| t.strip_prefix("dims="))
        .ok_or_else(|| Error::parse(path, hline, "expected dims=..."))?;
    let dims: Vec<usize> = dims_tok
        .split(',')
        .map(|t| {
            t.parse()
                .map_err(|_| Error::parse(path, hline, format!("bad dim {t:?}")))
        })
        .collect::<Result<_>>()?;
    if dims.len() != 5 {
        return Err(Error::parse(path, hline, "dims must list 5 sizes"));
    }
    let task = match toks.next().and_then(|t| t.strip_prefix("task=")) {
        Some("node") => Task::NodeClassification,
        Some("graph") => Task::GraphClassification,
        _ => return Err(Error::parse(path, hline, "expected task=node|graph")),
    };

    let shape = |name: &str| -> (usize, usize) {
        match name {
            "w0" => (dims[0], dims[1]),
            "w1" => (dims[1], dims[2]),
            "w2" => (dims[2], dims[3]),
            // The classifier reads the concatenated layer embeddings.
            "wc" => (dims[1] + dims[2] + dims[3], dims[4]),
            _ => unreachable!(),
        }
    };
    let mut mats: std::collections::BTreeMap<&str, Vec<Option<Vec<f64>>>> = ["w0", "w1", "w2", "wc"]
        .into_iter()
        .map(|n| (n, vec![None; shape(n).0]))
        .collect();
    let mut vecs: std::collections::BTreeMap<&str, Option<Vec<f64>>> = [
        "g0", "g1", "g2", "b0", "b1", "b2", "bc",
    ]
    .into_iter()
    .map(|n| (n, None))
    .collect();

    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let name = toks.next().unwrap();
        let parse_vals = |toks: std::str::SplitWhitespace, want: usize| -> Result<Vec<f64>> {
            let vals: Vec<f64> = toks
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::parse(path, ln, format!("bad float {t:?}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != want {
                return Err(Error::parse(
                    path,
                    ln,
                    format!("expected {want} values, got {}", vals.len()),
                ));
            }
            Ok(vals)
        };
        if let Some(rows) = mats.get_mut(name) {
            let (nr, nc) = shape(name);
            let r: usize = toks
                .next()
                .and_then(|t| t.strip_prefix('r'))
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(path, ln, "expected r<row>"))?;
            if r >= nr {
                return Err(Error::parse(path, ln, format!("row {r} out of range")));
            }
            if rows[r].replace(parse_vals(toks, nc)?).is_some() {
                return Err(Error::parse(path, ln, format!("duplicate row {name} r{r}")));
            }
        } else if let Some(slot) = vecs.get_mut(name) {
            let want = match name {
                "g0" | "b0" => dims[1],
                "g1" | "b1" => dims[2],
                "g2" | "b2" => dims[3],
                _ => dims[4],
            };
            if slot.replace(parse_vals(toks, want)?).is_some() {
                return Err(Error::parse(path, ln, format!("duplicate {name}")));
            }
        } else {
            return Err(Error::parse(path, ln, format!("unknown row tag {name:?}")));
        }
    }

    let take_mat = |name: &str| -> Result<Matrix> {
        let rows = &mats[name];
        let mut data = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            match row {
                Some(v) => data.push(v.clone()),
                None => return Err(Error::parse(path, 0, format!("missing row {name} r{r}"))),
            }
        }
        Ok(Matrix::from_rows(&data))
    };
    let take_vec = |name: &str| -> Result<Vec<f64>> {
        vecs[name]
            .clone()
            .ok_or_else(|| Error::parse(path, 0, format!("missing {name}")))
    };
    Ok(GcnModel {
        task,
        conv_w: [take_mat("w0")?, take_mat("w1")?, take_mat("w2")?],
        bn_gamma: [take_vec("g0")?, take_vec("g1")?, take_vec("g2")?],
        bn_beta: [take_vec("b0")?, take_vec("b1")?, take_vec("b2")?],
        cls_w: take_mat("wc")?,
        cls_b: take_vec("bc")?,
    })
}
