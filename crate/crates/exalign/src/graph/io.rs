//! Plain-text dataset container.
//!
//! ```text
//! #dataset v1 task=node classes=4 dim=10
//! graph 0 nodes=5 label=-
//! feat 0 1 1 1 1 1 1 1 1 1 1
//! edge 0 1 gt
//! nodelabel 0 2
//! nodegt 3 0 4 5
//! end
//! ```
//!
//! One `graph` block per graph, closed by `end`. `label=-` means no
//! graph-level label; a trailing `gt` on an `edge` line marks it as part
//! of the graph-level ground truth; `nodegt` lists a node's ground-truth
//! edge indices. Floats round-trip exactly (shortest representation).
//! Lines starting with `#` after the header are comments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::{Dataset, Graph, Task};

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "#dataset v1 task={} classes={} dim={}",
        ds.task.as_str(),
        ds.num_classes,
        ds.feature_dim()
    );
    for (gi, g) in ds.graphs.iter().enumerate() {
        let label = g
            .graph_label
            .map_or_else(|| "-".to_string(), |y| y.to_string());
        let _ = writeln!(out, "graph {gi} nodes={} label={label}", g.n_nodes);
        for v in 0..g.n_nodes {
            let _ = write!(out, "feat {v}");
            for c in 0..g.features.cols() {
                let _ = write!(out, " {}", g.features.get(v, c));
            }
            out.push('\n');
        }
        let gt = g.gt_edge_mask.as_ref();
        for (ei, &(u, v)) in g.edges.iter().enumerate() {
            let mark = if gt.is_some_and(|s| s.contains(&ei)) {
                " gt"
            } else {
                ""
            };
            let _ = writeln!(out, "edge {u} {v}{mark}");
        }
        if let Some(labels) = &g.node_labels {
            for (v, y) in labels.iter().enumerate() {
                let _ = writeln!(out, "nodelabel {v} {y}");
            }
        }
        for (v, gt) in &g.node_gt {
            let _ = write!(out, "nodegt {v}");
            for e in gt {
                let _ = write!(out, " {e}");
            }
            out.push('\n');
        }
        out.push_str("end\n");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Pending {
    n: usize,
    label: Option<usize>,
    feats: Vec<Option<Vec<f64>>>,
    edges: Vec<(usize, usize)>,
    gt: BTreeSet<usize>,
    node_labels: Vec<Option<usize>>,
    // (line, node, edge indices) — indices checked once the block closes.
    node_gt: Vec<(usize, usize, Vec<usize>)>,
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(path, line, format!("bad {what}: {tok:?}")))
}

fn expect_kv<'a>(path: &Path, line: usize, tok: Option<&'a str>, key: &str) -> Result<&'a str> {
    match tok.and_then(|t| t.strip_prefix(key).and_then(|t| t.strip_prefix('='))) {
        Some(v) => Ok(v),
        None => Err(Error::parse(path, line, format!("expected {key}=..."))),
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (hline, header) = loop {
        match lines.next() {
            Some((i, l)) if !l.trim().is_empty() => break (i, l),
            Some(_) => continue,
            None => return Err(Error::parse(path, 1, "empty file")),
        }
    };
    let mut toks = header.split_whitespace();
    if toks.next() != Some("#dataset") {
        return Err(Error::parse(path, hline, "expected #dataset header"));
    }
    match toks.next() {
        Some("v1") => {}
        other => {
            return Err(Error::parse(
                path,
                hline,
                format!("unsupported dataset version {other:?}"),
            ))
        }
    }
    let task = match expect_kv(path, hline, toks.next(), "task")? {
        "node" => Task::NodeClassification,
        "graph" => Task::GraphClassification,
        other => return Err(Error::parse(path, hline, format!("unknown task {other:?}"))),
    };
    let classes: usize = parse_num(path, hline, expect_kv(path, hline, toks.next(), "classes")?, "classes")?;
    let dim: usize = parse_num(path, hline, expect_kv(path, hline, toks.next(), "dim")?, "dim")?;

    let mut graphs: Vec<Graph> = Vec::new();
    let mut cur: Option<Pending> = None;

    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let directive = toks.next().unwrap();
        match (directive, &mut cur) {
            ("graph", slot @ None) => {
                let id: usize = parse_num(path, ln, toks.next().unwrap_or(""), "graph id")?;
                if id != graphs.len() {
                    return Err(Error::parse(
                        path,
                        ln,
                        format!("graph id {id} out of order (expected {})", graphs.len()),
                    ));
                }
                let n: usize = parse_num(path, ln, expect_kv(path, ln, toks.next(), "nodes")?, "nodes")?;
                let label_tok = expect_kv(path, ln, toks.next(), "label")?;
                let label = if label_tok == "-" {
                    None
                } else {
                    Some(parse_num(path, ln, label_tok, "label")?)
                };
                *slot = Some(Pending {
                    n,
                    label,
                    feats: vec![None; n],
                    edges: Vec::new(),
                    gt: BTreeSet::new(),
                    node_labels: vec![None; n],
                    node_gt: Vec::new(),
                });
            }
            ("graph", Some(_)) => {
                return Err(Error::parse(path, ln, "graph block not closed with end"));
            }
            ("feat", Some(p)) => {
                let v: usize = parse_num(path, ln, toks.next().unwrap_or(""), "node id")?;
                if v >= p.n {
                    return Err(Error::parse(path, ln, format!("node {v} out of range")));
                }
                let vals: Vec<f64> = toks
                    .map(|t| parse_num(path, ln, t, "feature value"))
                    .collect::<Result<_>>()?;
                if vals.len() != dim {
                    return Err(Error::parse(
                        path,
                        ln,
                        format!("expected {dim} feature values, got {}", vals.len()),
                    ));
                }
                if p.feats[v].replace(vals).is_some() {
                    return Err(Error::parse(path, ln, format!("duplicate feat line for node {v}")));
                }
            }
            ("edge", Some(p)) => {
                let u: usize = parse_num(path, ln, toks.next().unwrap_or(""), "node id")?;
                let v: usize = parse_num(path, ln, toks.next().unwrap_or(""), "node id")?;
                if u >= p.n || v >= p.n {
                    return Err(Error::parse(path, ln, format!("edge ({u}, {v}) out of range")));
                }
                match toks.next() {
                    None => {}
                    Some("gt") => {
                        p.gt.insert(p.edges.len());
                    }
                    Some(other) => {
                        return Err(Error::parse(path, ln, format!("unexpected token {other:?}")));
                    }
                }
                p.edges.push((u.min(v), u.max(v)));
            }
            ("nodelabel", Some(p)) => {
                let v: usize = parse_num(path, ln, toks.next().unwrap_or(""), "node id")?;
                let y: usize = parse_num(path, ln, toks.next().unwrap_or(""), "label")?;
                if v >= p.n {
                    return Err(Error::parse(path, ln, format!("node {v} out of range")));
                }
                if p.node_labels[v].replace(y).is_some() {
                    return Err(Error::parse(path, ln, format!("duplicate label for node {v}")));
                }
            }
            ("nodegt", Some(p)) => {
                let v: usize = parse_num(path, ln, toks.next().unwrap_or(""), "node id")?;
                if v >= p.n {
                    return Err(Error::parse(path, ln, format!("node {v} out of range")));
                }
                let idx: Vec<usize> = toks
                    .map(|t| parse_num(path, ln, t, "edge index"))
                    .collect::<Result<_>>()?;
                p.node_gt.push((ln, v, idx));
            }
            ("end", slot @ Some(_)) => {
                let p = slot.take().unwrap();
                let mut feats = Matrix::zeros(p.n, dim);
                for (v, row) in p.feats.iter().enumerate() {
                    match row {
                        Some(vals) => feats.row_mut(v).copy_from_slice(vals),
                        None => {
                            return Err(Error::parse(
                                path,
                                ln,
                                format!("graph {} missing feat line for node {v}", graphs.len()),
                            ))
                        }
                    }
                }
                let n_labeled = p.node_labels.iter().filter(|l| l.is_some()).count();
                let node_labels = if n_labeled == 0 {
                    None
                } else if n_labeled == p.n {
                    Some(p.node_labels.iter().map(|l| l.unwrap()).collect())
                } else {
                    return Err(Error::parse(
                        path,
                        ln,
                        format!("graph {} labels only {n_labeled} of {} nodes", graphs.len(), p.n),
                    ));
                };
                let mut node_gt = BTreeMap::new();
                for (gln, v, idx) in p.node_gt {
                    for &e in &idx {
                        if e >= p.edges.len() {
                            return Err(Error::parse(
                                path,
                                gln,
                                format!("ground-truth edge index {e} out of range"),
                            ));
                        }
                    }
                    if node_gt.insert(v, idx.into_iter().collect()).is_some() {
                        return Err(Error::parse(path, gln, format!("duplicate nodegt for node {v}")));
                    }
                }
                let mut g = Graph::new(p.n, p.edges, feats)
                    .map_err(|e| Error::parse(path, ln, e.to_string()))?;
                g.graph_label = p.label;
                g.node_labels = node_labels;
                g.gt_edge_mask = if p.gt.is_empty() { None } else { Some(p.gt) };
                g.node_gt = node_gt;
                graphs.push(g);
            }
            ("end", None) => return Err(Error::parse(path, ln, "end outside a graph block")),
            (other, _) => {
                return Err(Error::parse(path, ln, format!("unknown directive {other:?}")));
            }
        }
    }
    if cur.is_some() {
        return Err(Error::parse(path, text.lines().count(), "unexpected EOF inside graph block"));
    }
    Dataset::new(graphs, task, classes)
        .map_err(|e| Error::parse(path, 0, format!("invalid dataset: {e}")))
}
