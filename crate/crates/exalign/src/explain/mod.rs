//! Post-hoc instance explanation via learned masks.
//!
//! Three methods share one contract — emit a per-edge importance in
//! `[0,1]` for a (sub)graph:
//!
//! * [`gnnex_explain`]: per-instance optimization of sigmoid edge (and
//!   optionally feature) mask logits against the masked cross-entropy
//!   plus size/entropy budgets, optionally augmented with an alignment
//!   loss.
//! * [`pgex_train`] / [`pgex_explain`]: a shared two-layer generator
//!   mapping endpoint embeddings to edge logits, trained once over the
//!   training split with concrete-relaxed sampling, then applied to any
//!   instance deterministically.
//! * [`grad_baseline`]: saliency — the absolute gradient of the
//!   predicted-class logit with respect to each edge weight.

mod gnnex;
mod grad;
mod pgex;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::align::AnchorSet;
use crate::error::{Error, Result};
use crate::gcn::GcnModel;
use crate::graph::Dataset;
use crate::seeding;

pub use gnnex::gnnex_explain;
pub use grad::grad_baseline;
pub use pgex::{pgex_explain, pgex_train, PgExplainer};

/// Which alignment term, if any, to add to the masked objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignMode {
    None,
    Absolute,
    Anchor,
}

impl AlignMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlignMode::None => "none",
            AlignMode::Absolute => "absolute",
            AlignMode::Anchor => "anchor",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AlignMode::None),
            "absolute" => Ok(AlignMode::Absolute),
            "anchor" => Ok(AlignMode::Anchor),
            _ => Err(Error::Config(format!(
                "unknown alignment mode {s:?} (expected none|absolute|anchor)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExplainerConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of the alignment term (λ).
    pub lambda: f64,
    pub size_coeff: f64,
    pub entropy_coeff: f64,
    pub align: AlignMode,
    /// Concrete-relaxation temperature schedule (generator training).
    pub temp_start: f64,
    pub temp_end: f64,
    /// Learn a per-dimension feature mask alongside the edge mask.
    pub feature_mask: bool,
}

impl ExplainerConfig {
    /// Defaults for per-instance mask optimization.
    pub fn gnnex() -> Self {
        ExplainerConfig {
            learning_rate: 0.01,
            epochs: 100,
            seed: 0,
            lambda: 0.0,
            size_coeff: 0.005,
            entropy_coeff: 0.1,
            align: AlignMode::None,
            temp_start: 5.0,
            temp_end: 1.0,
            feature_mask: false,
        }
    }

    /// Defaults for generator training.
    pub fn pgex() -> Self {
        ExplainerConfig {
            learning_rate: 0.003,
            epochs: 30,
            ..Self::gnnex()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be nonnegative".into()));
        }
        if self.align != AlignMode::None && self.lambda == 0.0 {
            return Err(Error::Config(
                "alignment mode set but lambda is 0; pass lambda > 0".into(),
            ));
        }
        if !(self.temp_start > 0.0 && self.temp_end > 0.0) {
            return Err(Error::Config("temperatures must be positive".into()));
        }
        Ok(())
    }
}

/// One epoch's objective terms, recorded for the trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub ce: f64,
    pub size: f64,
    pub ent: f64,
    pub align: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub instance: usize,
    pub method: String,
    pub seed: u64,
    /// One importance per edge of the explained (sub)graph, in [0,1].
    pub edge_importance: Vec<f64>,
    pub feature_importance: Option<Vec<f64>>,
    pub trace: Vec<TraceRow>,
    /// Set when the method could not rank edges (e.g. an all-zero
    /// saliency) and fell back to a uniform importance.
    pub degenerate: bool,
}

impl Explanation {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: &[f64]| v.iter().all(|&x| (0.0..=1.0).contains(&x) && x.is_finite());
        if !ok(&self.edge_importance) {
            return Err(Error::Config(format!(
                "instance {}: edge importance out of [0,1]",
                self.instance
            )));
        }
        if let Some(f) = &self.feature_importance {
            if !ok(f) {
                return Err(Error::Config(format!(
                    "instance {}: feature importance out of [0,1]",
                    self.instance
                )));
            }
        }
        Ok(())
    }
}

pub fn write_explanation(e: &Explanation, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "#explanation v1 instance={} method={} seed={}",
        e.instance, e.method, e.seed
    );
    if e.degenerate {
        let _ = writeln!(out, "#degenerate");
    }
    for (i, imp) in e.edge_importance.iter().enumerate() {
        let _ = writeln!(out, "e {i} {imp:.16e}");
    }
    if let Some(f) = &e.feature_importance {
        for (i, imp) in f.iter().enumerate() {
            let _ = writeln!(out, "f {i} {imp:.16e}");
        }
    }
    for t in &e.trace {
        let _ = writeln!(
            out,
            "#trace {} {:.16e} {:.16e} {:.16e} {:.16e}",
            t.epoch, t.ce, t.size, t.ent, t.align
        );
    }
    fs::write(path, out).map_err(|err| Error::io(path, err))
}

pub fn read_explanation(path: impl AsRef<Path>) -> Result<Explanation> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("#explanation") {
        return Err(Error::parse(path, hline, "expected #explanation header"));
    }
    if toks.next() != Some("v1") {
        return Err(Error::parse(path, hline, "unsupported explanation version"));
    }
    let mut instance = None;
    let mut method = None;
    let mut seed = None;
    for t in toks {
        if let Some(v) = t.strip_prefix("instance=") {
            instance = v.parse().ok();
        } else if let Some(v) = t.strip_prefix("method=") {
            method = Some(v.to_string());
        } else if let Some(v) = t.strip_prefix("seed=") {
            seed = v.parse().ok();
        }
    }
    let (Some(instance), Some(method), Some(seed)) = (instance, method, seed) else {
        return Err(Error::parse(path, hline, "header needs instance=, method=, seed="));
    };

    let mut e = Explanation {
        instance,
        method,
        seed,
        edge_importance: Vec::new(),
        feature_importance: None,
        trace: Vec::new(),
        degenerate: false,
    };
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "#degenerate" {
            e.degenerate = true;
            continue;
        }
        if let Some(rest) = line.strip_prefix("#trace ") {
            let vals: Vec<&str> = rest.split_whitespace().collect();
            if vals.len() != 5 {
                return Err(Error::parse(path, ln, "trace rows have 5 fields"));
            }
            let epoch = vals[0]
                .parse()
                .map_err(|_| Error::parse(path, ln, "bad trace epoch"))?;
            let f = |i: usize| -> Result<f64> {
                vals[i]
                    .parse()
                    .map_err(|_| Error::parse(path, ln, format!("bad trace value {:?}", vals[i])))
            };
            e.trace.push(TraceRow {
                epoch,
                ce: f(1)?,
                size: f(2)?,
                ent: f(3)?,
                align: f(4)?,
            });
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let tag = toks.next().unwrap();
        let idx: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(path, ln, "bad index"))?;
        let val: f64 = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(path, ln, "bad importance"))?;
        match tag {
            "e" => {
                if idx != e.edge_importance.len() {
                    return Err(Error::parse(path, ln, "edge indices must be consecutive"));
                }
                e.edge_importance.push(val);
            }
            "f" => {
                let f = e.feature_importance.get_or_insert_with(Vec::new);
                if idx != f.len() {
                    return Err(Error::parse(path, ln, "feature indices must be consecutive"));
                }
                f.push(val);
            }
            _ => return Err(Error::parse(path, ln, format!("unknown row tag {tag:?}"))),
        }
    }
    e.validate()?;
    Ok(e)
}

/// Explanation method selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    GnnEx,
    PgEx,
    Grad,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::GnnEx => "gnnex",
            Method::PgEx => "pgex",
            Method::Grad => "grad",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gnnex" => Ok(Method::GnnEx),
            "pgex" => Ok(Method::PgEx),
            "grad" => Ok(Method::Grad),
            _ => Err(Error::Config(format!(
                "unknown method {s:?} (expected gnnex|pgex|grad)"
            ))),
        }
    }
}

/// Explain a batch of instances in parallel against one shared model.
/// Each instance gets an independent seed derived from `cfg.seed` and its
/// id, so the result is independent of thread scheduling and batch
/// composition. PGExplainer's generator is trained once up front
/// (single-threaded), then applied in parallel.
pub fn explain_instances(
    model: &GcnModel,
    ds: &Dataset,
    ids: &[usize],
    method: Method,
    cfg: &ExplainerConfig,
    anchors: Option<&AnchorSet>,
) -> Result<Vec<Explanation>> {
    cfg.validate()?;
    if cfg.align == AlignMode::Anchor && anchors.is_none() {
        return Err(Error::Config("anchor alignment needs a fitted anchor set".into()));
    }
    let generator = match method {
        Method::PgEx => Some(pgex_train(model, ds, cfg, anchors)?),
        _ => None,
    };
    ids.par_iter()
        .map(|&id| {
            let inst = ds.instance(id)?;
            let mut sub_cfg = cfg.clone();
            sub_cfg.seed = seeding::derive_seed(cfg.seed, "explain", id as u64);
            let mut e = match method {
                Method::GnnEx => {
                    gnnex_explain(model, &inst.graph, inst.center, &sub_cfg, anchors)?
                }
                Method::PgEx => {
                    pgex_explain(generator.as_ref().unwrap(), model, &inst.graph, inst.center)?
                }
                Method::Grad => grad_baseline(model, &inst.graph, inst.center)?,
            };
            e.instance = id;
            e.seed = cfg.seed;
            e.validate()?;
            Ok(e)
        })
        .collect()
}
