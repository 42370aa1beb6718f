//! Anchor fitting: per-layer reference points in embedding space.
//!
//! Anchors summarize where a trained model places the dataset in each
//! hidden layer. Explanations are later scored by how far a masked
//! instance drifts from the unmasked one *relative to these anchors*,
//! which is what makes the distribution-aware loss insensitive to rigid
//! motions of embedding space.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gcn::{forward, GcnModel, MaskSpec};
use crate::graph::{Dataset, Task};
use crate::linalg::euclidean;

use super::dbscan;

/// Hidden layers whose embeddings we anchor.
pub const ANCHOR_LAYERS: usize = 3;
/// Fixed density threshold for the clustering.
pub const ANCHOR_MIN_PTS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerAnchors {
    /// `K_l` cluster centers, each of that layer's embedding dimension.
    pub anchors: Vec<Vec<f64>>,
    /// Neighborhood radius the bisection settled on.
    pub eps: f64,
    /// Whether `anchors.len()` landed inside the target window.
    pub in_window: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorSet {
    pub layers: Vec<LayerAnchors>,
    pub min_pts: usize,
    pub target_k: usize,
}

impl AnchorSet {
    /// True when every layer attained a cluster count in the window.
    pub fn all_in_window(&self) -> bool {
        self.layers.iter().all(|l| l.in_window)
    }
}

/// One embedding per instance per hidden layer. Node tasks contribute
/// the center node's row from a forward pass over the instance's
/// computation subgraph; graph tasks contribute the layer's mean-pooled
/// row. The collections therefore live in exactly the space the
/// explainers operate in.
pub fn collect_embeddings(
    model: &GcnModel,
    ds: &Dataset,
) -> Result<[Vec<Vec<f64>>; ANCHOR_LAYERS]> {
    let mut out: [Vec<Vec<f64>>; ANCHOR_LAYERS] = Default::default();
    for id in 0..ds.instance_count() {
        let inst = ds.instance(id)?;
        let tape = forward(model, &inst.graph, &MaskSpec::none())?;
        for l in 0..ANCHOR_LAYERS {
            let h = &tape.layers[l + 1];
            let v = match ds.task {
                Task::NodeClassification => {
                    let c = inst
                        .center
                        .ok_or_else(|| Error::Config("node instance lacks a center".into()))?;
                    h.row(c).to_vec()
                }
                Task::GraphClassification => h.mean_row(),
            };
            out[l].push(v);
        }
    }
    Ok(out)
}

/// Distance from one embedding to every anchor of a layer.
pub fn anchor_repr(h: &[f64], anchors: &[Vec<f64>]) -> Vec<f64> {
    anchors.iter().map(|a| euclidean(h, a)).collect()
}

/// Window the bisection aims for, centered on `target_k`.
fn window(target_k: usize) -> (usize, usize) {
    (target_k - target_k / 4, target_k + target_k / 4)
}

fn cluster_count(labels: &[Option<usize>]) -> usize {
    labels.iter().flatten().max().map_or(0, |&m| m + 1)
}

/// Distance of a cluster count from the target window; all-noise
/// clusterings rank worst.
fn window_gap(k: usize, lo: usize, hi: usize) -> usize {
    if k == 0 {
        usize::MAX
    } else {
        lo.saturating_sub(k).max(k.saturating_sub(hi))
    }
}

fn fit_layer(points: &[Vec<f64>], target_k: usize) -> Result<LayerAnchors> {
    if points.len() < ANCHOR_MIN_PTS {
        return Err(Error::Config(format!(
            "need at least {ANCHOR_MIN_PTS} embeddings to fit anchors, got {}",
            points.len()
        )));
    }
    let (win_lo, win_hi) = window(target_k);
    let max_dist = points
        .iter()
        .enumerate()
        .flat_map(|(i, a)| points[i + 1..].iter().map(move |b| euclidean(a, b)))
        .fold(0.0f64, f64::max);

    // Cluster count falls (after an initial all-noise regime) as eps
    // grows, so bisect: too many clusters or all noise → grow eps, too
    // few → shrink. Track the closest miss in case the window is
    // unreachable.
    let mut lo = 1e-4;
    let mut hi = max_dist.max(2.0 * lo);
    let mut best: Option<(usize, f64, Vec<Option<usize>>)> = None;
    let consider = |eps: f64, best: &mut Option<(usize, f64, Vec<Option<usize>>)>| {
        let labels = dbscan(points, eps, ANCHOR_MIN_PTS);
        let k = cluster_count(&labels);
        let gap = window_gap(k, win_lo, win_hi);
        if best
            .as_ref()
            .is_none_or(|(bk, _, _)| gap < window_gap(*bk, win_lo, win_hi))
        {
            *best = Some((k, eps, labels));
        }
        k
    };
    consider(hi, &mut best);
    for _ in 0..40 {
        let eps = 0.5 * (lo + hi);
        let k = consider(eps, &mut best);
        if (win_lo..=win_hi).contains(&k) {
            break;
        }
        if k == 0 || k > win_hi {
            lo = eps;
        } else {
            hi = eps;
        }
    }
    let (k, eps, labels) = best.expect("at least one clustering evaluated");
    if k == 0 {
        return Err(Error::Config(
            "clustering found no dense region at any radius".into(),
        ));
    }

    // Provisional centers from cluster members, then absorb noise into
    // its nearest center so the final anchors summarize all mass.
    let dim = points[0].len();
    let mean_of = |members: &[usize]| -> Vec<f64> {
        let mut m = vec![0.0; dim];
        for &p in members {
            for (c, x) in points[p].iter().enumerate() {
                m[c] += x;
            }
        }
        m.iter_mut().for_each(|x| *x /= members.len() as f64);
        m
    };
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (p, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            members[*c].push(p);
        }
    }
    let provisional: Vec<Vec<f64>> = members.iter().map(|m| mean_of(m)).collect();
    for (p, l) in labels.iter().enumerate() {
        if l.is_none() {
            let nearest = (0..k)
                .min_by(|&a, &b| {
                    euclidean(&points[p], &provisional[a])
                        .total_cmp(&euclidean(&points[p], &provisional[b]))
                })
                .unwrap();
            members[nearest].push(p);
        }
    }
    Ok(LayerAnchors {
        anchors: members.iter().map(|m| mean_of(m)).collect(),
        eps,
        in_window: (win_lo..=win_hi).contains(&k),
    })
}

/// Fit anchors for every hidden layer of a trained model over a dataset.
/// Deterministic given `(model, dataset, target_k)`.
pub fn fit_anchors(model: &GcnModel, ds: &Dataset, target_k: usize) -> Result<AnchorSet> {
    if target_k < 4 {
        return Err(Error::Config("target_k must be at least 4".into()));
    }
    let collections = collect_embeddings(model, ds)?;
    let layers = collections
        .iter()
        .map(|points| fit_layer(points, target_k))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnchorSet {
        layers,
        min_pts: ANCHOR_MIN_PTS,
        target_k,
    })
}

pub fn write_anchors(set: &AnchorSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "#anchors v1 layers={}", set.layers.len());
    let _ = writeln!(out, "#meta min_pts={} target_k={}", set.min_pts, set.target_k);
    for (l, layer) in set.layers.iter().enumerate() {
        let _ = writeln!(
            out,
            "#meta layer={} eps={:.16e} in_window={}",
            l, layer.eps, layer.in_window
        );
        for (k, a) in layer.anchors.iter().enumerate() {
            let _ = write!(out, "a {l} {k}");
            for v in a {
                let _ = write!(out, " {v:.16e}");
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_anchors(path: impl AsRef<Path>) -> Result<AnchorSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("#anchors") {
        return Err(Error::parse(path, hline, "expected #anchors header"));
    }
    if toks.next() != Some("v1") {
        return Err(Error::parse(path, hline, "unsupported anchors version"));
    }
    let n_layers: usize = toks
        .next()
        .and_then(|t| t.strip_prefix("layers="))
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, hline, "expected layers=<L>"))?;

    let mut set = AnchorSet {
        layers: vec![
            LayerAnchors {
                anchors: Vec::new(),
                eps: 0.0,
                in_window: false,
            };
            n_layers
        ],
        min_pts: ANCHOR_MIN_PTS,
        target_k: 0,
    };
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix("#meta ") {
            let mut layer: Option<usize> = None;
            let mut eps: Option<f64> = None;
            let mut in_window: Option<bool> = None;
            for kv in meta.split_whitespace() {
                let Some((key, val)) = kv.split_once('=') else {
                    continue;
                };
                match key {
                    "layer" => layer = val.parse().ok(),
                    "eps" => eps = val.parse().ok(),
                    "in_window" => in_window = val.parse().ok(),
                    "min_pts" => set.min_pts = val.parse().map_err(|_| {
                        Error::parse(path, ln, format!("bad min_pts {val:?}"))
                    })?,
                    "target_k" => set.target_k = val.parse().map_err(|_| {
                        Error::parse(path, ln, format!("bad target_k {val:?}"))
                    })?,
                    _ => {}
                }
            }
            if let Some(l) = layer {
                if l >= n_layers {
                    return Err(Error::parse(path, ln, format!("layer {l} out of range")));
                }
                if let Some(e) = eps {
                    set.layers[l].eps = e;
                }
                if let Some(w) = in_window {
                    set.layers[l].in_window = w;
                }
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        if toks.next() != Some("a") {
            return Err(Error::parse(path, ln, "expected an `a` row"));
        }
        let l: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(path, ln, "bad layer index"))?;
        if l >= n_layers {
            return Err(Error::parse(path, ln, format!("layer {l} out of range")));
        }
        let k: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(path, ln, "bad anchor index"))?;
        if k != set.layers[l].anchors.len() {
            return Err(Error::parse(
                path,
                ln,
                format!("anchor indices must be consecutive, got {k}"),
            ));
        }
        let vals: Vec<f64> = toks
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::parse(path, ln, format!("bad float {t:?}")))
            })
            .collect::<Result<_>>()?;
        if vals.is_empty() {
            return Err(Error::parse(path, ln, "anchor row has no values"));
        }
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(Error::parse(path, ln, "anchor values must be finite"));
        }
        set.layers[l].anchors.push(vals);
    }
    for (l, layer) in set.layers.iter().enumerate() {
        if layer.anchors.is_empty() {
            return Err(Error::parse(path, 0, format!("layer {l} has no anchors")));
        }
    }
    Ok(set)
}
