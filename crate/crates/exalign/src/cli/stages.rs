//! The five pipeline stages behind the subcommands: generate a dataset,
//! train a model, fit anchors, explain instances, evaluate explanations.
//! Each stage reads its predecessors' files, writes its own artifact plus
//! a `.manifest` with the resolved configuration, and prints a one-line
//! summary.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::align::{fit_anchors, read_anchors, write_anchors, AnchorSet};
use crate::error::{Error, Result};
use crate::eval::{edge_auroc, fidelity_curve, shd_consistency, MetricsReport};
use crate::explain::{
    explain_instances, read_explanation, write_explanation, AlignMode, ExplainerConfig,
    Explanation, Method,
};
use crate::gcn::{accuracy, read_model, train, write_model, GcnModel, TrainConfig};
use crate::graph::{
    gen_ba_shapes, gen_infection, gen_mixmotif, gen_tree_grid, mutag_fixture, read_dataset,
    write_dataset, Dataset, GenConfig,
};

use super::config::{Manifest, RunConfig};

pub const DATASET_NAMES: [&str; 5] =
    ["ba-shapes", "tree-grid", "infection", "mixmotif", "mutag"];

/// Dispatch a generator by dataset name.
pub fn generate(name: &str, cfg: &GenConfig) -> Result<Dataset> {
    match name {
        "ba-shapes" => gen_ba_shapes(cfg),
        "tree-grid" => gen_tree_grid(cfg),
        "infection" => gen_infection(cfg),
        "mixmotif" => gen_mixmotif(cfg),
        "mutag" => Ok(mutag_fixture()),
        other => Err(Error::Config(format!(
            "unknown dataset {other:?}; expected one of {}",
            DATASET_NAMES.join(", ")
        ))),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "artifact".into())
}

/// `gen <dataset>`: write `<out>/<name>.dataset` and its manifest.
pub fn cmd_gen(name: &str, gen_cfg: &GenConfig, out: &Path) -> Result<PathBuf> {
    let ds = generate(name, gen_cfg)?;
    ensure_dir(out)?;
    let path = out.join(format!("{name}.dataset"));
    write_dataset(&ds, &path)?;

    let mut m = Manifest::new("gen");
    m.set("dataset", name);
    m.set("seed", gen_cfg.seed);
    match name {
        "ba-shapes" => {
            m.set("n-base", gen_cfg.n_base);
            m.set("n-motifs", gen_cfg.n_motifs);
        }
        "tree-grid" => m.set("n-motifs", gen_cfg.n_motifs),
        "infection" => {
            m.set("er-n", gen_cfg.er_n);
            m.set("er-p", gen_cfg.er_p);
            m.set("infected-frac", gen_cfg.infected_frac);
        }
        "mixmotif" => {
            m.set("gamma", gen_cfg.mix_gamma);
            m.set("n-graphs", gen_cfg.n_graphs);
        }
        _ => {}
    }
    let nodes: usize = ds.graphs.iter().map(|g| g.n_nodes).sum();
    let edges: usize = ds.graphs.iter().map(|g| g.n_edges()).sum();
    m.comment(format!(
        "result: graphs={} nodes={} edges={} classes={} instances={} with-gt={}",
        ds.graphs.len(),
        nodes,
        edges,
        ds.num_classes,
        ds.instance_count(),
        ds.instances_with_ground_truth().len()
    ));
    m.write(&out.join(format!("gen-{name}.manifest")))?;
    println!(
        "gen {name}: graphs={} nodes={nodes} edges={edges} classes={} instances={} -> {}",
        ds.graphs.len(),
        ds.num_classes,
        ds.instance_count(),
        path.display()
    );
    Ok(path)
}

/// `train <dataset-file>`: write `<out>/<stem>.model` and its manifest.
pub fn cmd_train(dataset: &Path, cfg: &TrainConfig, out: &Path) -> Result<PathBuf> {
    let ds = read_dataset(dataset)?;
    let mut model = GcnModel::new(ds.task, ds.feature_dim(), ds.num_classes, cfg.seed);
    let history = train(&mut model, &ds, cfg)?;
    ensure_dir(out)?;
    let stem = file_stem(dataset);
    let path = out.join(format!("{stem}.model"));
    write_model(&model, &path)?;

    let train_acc = accuracy(&model, &ds, &ds.split.train)?;
    let test_acc = accuracy(&model, &ds, &ds.split.test)?;
    let mut m = Manifest::new("train");
    m.set("dataset", dataset.display());
    m.set("seed", cfg.seed);
    m.set("epochs", cfg.epochs);
    m.set("learning-rate", cfg.learning_rate);
    m.set("weight-decay", cfg.weight_decay);
    m.comment(format!(
        "result: train-acc={train_acc:.4} test-acc={test_acc:.4} final-loss={:.6}",
        history.loss.last().copied().unwrap_or(f64::NAN)
    ));
    m.write(&out.join(format!("train-{stem}.manifest")))?;
    println!(
        "train {stem}: train-acc={train_acc:.4} test-acc={test_acc:.4} -> {}",
        path.display()
    );
    Ok(path)
}

/// `anchors <dataset-file> <model-file>`: write `<out>/<stem>.anchors`.
pub fn cmd_anchors(dataset: &Path, model: &Path, target_k: usize, out: &Path) -> Result<PathBuf> {
    let ds = read_dataset(dataset)?;
    let gcn = read_model(model)?;
    let set = fit_anchors(&gcn, &ds, target_k)?;
    ensure_dir(out)?;
    let stem = file_stem(dataset);
    let path = out.join(format!("{stem}.anchors"));
    write_anchors(&set, &path)?;

    let mut m = Manifest::new("anchors");
    m.set("dataset", dataset.display());
    m.set("model", model.display());
    m.set("target-k", target_k);
    let ks: Vec<String> = set.layers.iter().map(|l| l.anchors.len().to_string()).collect();
    m.comment(format!(
        "result: per-layer-k={} all-in-window={}",
        ks.join(","),
        set.all_in_window()
    ));
    m.write(&out.join(format!("anchors-{stem}.manifest")))?;
    println!(
        "anchors {stem}: per-layer k = {} -> {}",
        ks.join(","),
        path.display()
    );
    Ok(path)
}

/// Which split explanation instances come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitChoice {
    Train,
    Test,
}

impl SplitChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitChoice::Train),
            "test" => Ok(SplitChoice::Test),
            other => Err(Error::Config(format!("unknown split {other:?} (train|test)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SplitChoice::Train => "train",
            SplitChoice::Test => "test",
        }
    }
}

/// Deterministic instance pool: the chosen split, restricted to instances
/// with non-degenerate ground truth when any exist, capped at `max`.
pub fn pick_instances(ds: &Dataset, split: SplitChoice, max: usize) -> Vec<usize> {
    let pool = match split {
        SplitChoice::Train => &ds.split.train,
        SplitChoice::Test => &ds.split.test,
    };
    let with_gt: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|&id| {
            ds.instance(id)
                .ok()
                .and_then(|i| {
                    i.ground_truth()
                        .map(|gt| !gt.is_empty() && gt.len() < i.graph.n_edges())
                })
                .unwrap_or(false)
        })
        .collect();
    let chosen = if with_gt.is_empty() { pool.clone() } else { with_gt };
    chosen.into_iter().take(max).collect()
}

pub struct ExplainArgs {
    pub method: Method,
    pub cfg: ExplainerConfig,
    pub runs: usize,
    pub split: SplitChoice,
    pub max_instances: usize,
    pub anchors: Option<PathBuf>,
}

/// `explain <dataset> <model>`: one directory per run,
/// `<out>/run-<seed>/inst-<id>.expl`, plus a manifest at `<out>`.
pub fn cmd_explain(dataset: &Path, model: &Path, args: &ExplainArgs, out: &Path) -> Result<Vec<PathBuf>> {
    if args.runs == 0 {
        return Err(Error::Config("need at least one run".into()));
    }
    let ds = read_dataset(dataset)?;
    let gcn = read_model(model)?;
    let anchors: Option<AnchorSet> = match &args.anchors {
        Some(p) => Some(read_anchors(p)?),
        None => None,
    };
    if args.cfg.align == AlignMode::Anchor && anchors.is_none() {
        return Err(Error::Config("--align anchor requires --anchors <file>".into()));
    }
    let ids = pick_instances(&ds, args.split, args.max_instances);
    if ids.is_empty() {
        return Err(Error::Config("no instances to explain in the chosen split".into()));
    }
    ensure_dir(out)?;

    let mut run_dirs = Vec::with_capacity(args.runs);
    for r in 0..args.runs {
        let seed = args.cfg.seed + r as u64;
        let cfg = ExplainerConfig { seed, ..args.cfg.clone() };
        let expls = explain_instances(&gcn, &ds, &ids, args.method, &cfg, anchors.as_ref())?;
        let dir = out.join(format!("run-{seed}"));
        ensure_dir(&dir)?;
        for e in &expls {
            write_explanation(e, dir.join(format!("inst-{}.expl", e.instance)))?;
        }
        run_dirs.push(dir);
    }

    let mut m = Manifest::new("explain");
    m.set("dataset", dataset.display());
    m.set("model", model.display());
    m.set("method", args.method.as_str());
    m.set("align", args.cfg.align.as_str());
    m.set("lambda", args.cfg.lambda);
    m.set("seed", args.cfg.seed);
    m.set("runs", args.runs);
    m.set("split", args.split.as_str());
    m.set("max-instances", args.max_instances);
    m.set("epochs", args.cfg.epochs);
    m.set("learning-rate", args.cfg.learning_rate);
    if let Some(a) = &args.anchors {
        m.set("anchors", a.display());
    }
    if args.cfg.feature_mask {
        m.set("features", true);
    }
    m.comment(format!("result: instances={} runs={}", ids.len(), args.runs));
    m.write(&out.join("explain.manifest"))?;
    println!(
        "explain {} ({}, align={}): {} instances x {} runs -> {}",
        file_stem(dataset),
        args.method.as_str(),
        args.cfg.align.as_str(),
        ids.len(),
        args.runs,
        out.display()
    );
    Ok(run_dirs)
}

/// Load one run directory of `inst-<id>.expl` files, ascending by id.
pub fn read_run_dir(dir: &Path) -> Result<Vec<Explanation>> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_prefix("inst-").and_then(|s| s.strip_suffix(".expl")) {
            let id: usize = id
                .parse()
                .map_err(|_| Error::Config(format!("bad explanation file name {name:?}")))?;
            found.push((id, entry.path()));
        }
    }
    if found.is_empty() {
        return Err(Error::Config(format!("no inst-*.expl files in {}", dir.display())));
    }
    found.sort_by_key(|&(id, _)| id);
    found.into_iter().map(|(_, p)| read_explanation(p)).collect()
}

/// Discover run directories: `run-*` children sorted by seed, or the
/// directory itself if it directly contains explanation files.
pub fn discover_runs(dir: &Path) -> Result<Vec<Vec<Explanation>>> {
    let mut children: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(seed) = name.strip_prefix("run-") {
            let seed: u64 = seed
                .parse()
                .map_err(|_| Error::Config(format!("bad run directory name {name:?}")))?;
            children.push((seed, entry.path()));
        }
    }
    if children.is_empty() {
        return Ok(vec![read_run_dir(dir)?]);
    }
    children.sort_by_key(|&(seed, _)| seed);
    children.into_iter().map(|(_, p)| read_run_dir(&p)).collect()
}

pub struct EvalArgs {
    /// Explanation directories (each holding run-* subdirectories or
    /// inst-*.expl files directly).
    pub expl: Vec<PathBuf>,
    /// Top-k depths for the consistency table.
    pub topk: Vec<usize>,
    /// Fidelity removal horizon (clamped to the smallest edge count).
    pub removals: usize,
    pub dataset_name: String,
}

/// `eval`: AUROC per run (when ground truth exists), fidelity curve per
/// run, SHD per top-k across runs. Writes `<out>/metrics.csv`.
pub fn cmd_eval(dataset: &Path, model: &Path, args: &EvalArgs, out: &Path) -> Result<PathBuf> {
    if args.expl.is_empty() {
        return Err(Error::Config("need at least one --expl directory".into()));
    }
    let ds = read_dataset(dataset)?;
    let gcn = read_model(model)?;
    let mut report = MetricsReport::new();
    report.note("stage", "eval");
    report.note("dataset", dataset.display());
    report.note("model", model.display());

    let mut all_runs: Vec<(String, Vec<Explanation>)> = Vec::new(); // (method, run)
    for dir in &args.expl {
        for run in discover_runs(dir)? {
            let method = run[0].method.clone();
            all_runs.push((method, run));
        }
    }

    // Smallest edge count over everything we will perturb bounds R.
    let mut min_edges = usize::MAX;
    for (_, run) in &all_runs {
        for e in run {
            min_edges = min_edges.min(ds.instance(e.instance)?.graph.n_edges());
        }
    }
    let r_max = args.removals.min(min_edges);
    report.note("removals", r_max);

    for (method, run) in &all_runs {
        let seed = run[0].seed;
        // Faithfulness vs ground truth, where defined.
        let mut aurocs = Vec::new();
        for e in run {
            let inst = ds.instance(e.instance)?;
            let Some(gt) = inst.ground_truth() else { continue };
            if gt.is_empty() || gt.len() == inst.graph.n_edges() {
                continue;
            }
            let v = edge_auroc(&e.edge_importance, gt)?;
            report.push("auroc-inst", &args.dataset_name, method, seed, Some(e.instance), v);
            aurocs.push(v);
        }
        if !aurocs.is_empty() {
            let mean = aurocs.iter().sum::<f64>() / aurocs.len() as f64;
            report.push("auroc", &args.dataset_name, method, seed, None, mean);
        }
        // Fidelity under removal.
        let curve = fidelity_curve(&gcn, &ds, run, r_max)?;
        for (r, acc) in curve.accuracy.iter().enumerate() {
            report.push("fidelity", &args.dataset_name, method, seed, Some(r), *acc);
        }
        report.push(
            "fidelity-area",
            &args.dataset_name,
            method,
            seed,
            None,
            crate::eval::curve_area(&curve.accuracy),
        );
    }

    // Consistency across runs of the same method.
    let methods: BTreeSet<String> = all_runs.iter().map(|(m, _)| m.clone()).collect();
    for method in &methods {
        let runs: Vec<Vec<Explanation>> = all_runs
            .iter()
            .filter(|(m, _)| m == method)
            .map(|(_, r)| r.clone())
            .collect();
        if runs.len() < 2 {
            continue;
        }
        let seed = runs[0][0].seed;
        for &k in &args.topk {
            let rep = shd_consistency(&runs, k)?;
            report.push("shd", &args.dataset_name, method, seed, Some(k), rep.mean);
        }
    }

    ensure_dir(out)?;
    let path = out.join("metrics.csv");
    report.write_csv(&path)?;
    println!(
        "eval {}: {} runs, {} rows -> {}",
        args.dataset_name,
        all_runs.len(),
        report.rows.len(),
        path.display()
    );
    Ok(path)
}

/// Shared resolution of explainer settings from flags + config file.
pub struct ExplainFlags {
    pub method: Option<String>,
    pub align: Option<String>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub split: Option<String>,
    pub max_instances: Option<usize>,
    pub features: bool,
    pub anchors: Option<PathBuf>,
}

pub fn resolve_explain_args(flags: ExplainFlags, cfg: &mut RunConfig) -> Result<ExplainArgs> {
    use super::config::resolve;
    let method = Method::parse(&resolve(flags.method, cfg, "method", "gnnex".into())?)?;
    let align = AlignMode::parse(&resolve(flags.align, cfg, "align", "none".into())?)?;
    let mut ecfg = match method {
        Method::PgEx => ExplainerConfig::pgex(),
        _ => ExplainerConfig::gnnex(),
    };
    ecfg.align = align;
    ecfg.lambda = resolve(flags.lambda, cfg, "lambda", if align == AlignMode::None { 0.0 } else { 1.0 })?;
    ecfg.seed = resolve(flags.seed, cfg, "seed", 0)?;
    ecfg.epochs = resolve(flags.epochs, cfg, "epochs", ecfg.epochs)?;
    ecfg.learning_rate = resolve(flags.learning_rate, cfg, "learning-rate", ecfg.learning_rate)?;
    ecfg.feature_mask = flags.features || cfg.take_parse::<bool>("features")?.unwrap_or(false);
    let runs = resolve(flags.runs, cfg, "runs", 1)?;
    let split = SplitChoice::parse(&resolve(flags.split, cfg, "split", "test".into())?)?;
    let max_instances = resolve(flags.max_instances, cfg, "max-instances", usize::MAX)?;
    let anchors = match flags.anchors {
        Some(p) => Some(p),
        None => cfg.take("anchors").map(PathBuf::from),
    };
    Ok(ExplainArgs { method, cfg: ecfg, runs, split, max_instances, anchors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_gen() -> GenConfig {
        GenConfig { seed: 2, n_base: 40, n_motifs: 6, ..GenConfig::default() }
    }

    #[test]
    fn gen_is_deterministic_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let a = cmd_gen("ba-shapes", &tiny_gen(), &dir.path().join("a")).unwrap();
        let b = cmd_gen("ba-shapes", &tiny_gen(), &dir.path().join("b")).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert!(generate("no-such-set", &tiny_gen()).is_err());
    }

    #[test]
    fn full_pipeline_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        let ds_path = cmd_gen("tree-grid", &GenConfig { seed: 4, n_motifs: 6, ..GenConfig::default() }, out).unwrap();
        let model_path = cmd_train(
            &ds_path,
            &TrainConfig { epochs: 30, ..TrainConfig::default() },
            out,
        )
        .unwrap();
        let anchors_path = cmd_anchors(&ds_path, &model_path, 8, out).unwrap();
        assert!(anchors_path.exists());

        let args = ExplainArgs {
            method: Method::Grad,
            cfg: ExplainerConfig::gnnex(),
            runs: 2,
            split: SplitChoice::Test,
            max_instances: 3,
            anchors: None,
        };
        let expl_out = out.join("expl");
        let run_dirs = cmd_explain(&ds_path, &model_path, &args, &expl_out).unwrap();
        assert_eq!(run_dirs.len(), 2);

        let eval_args = EvalArgs {
            expl: vec![expl_out.clone()],
            topk: vec![2, 4],
            removals: 5,
            dataset_name: "tree-grid".into(),
        };
        let csv = cmd_eval(&ds_path, &model_path, &eval_args, &out.join("metrics")).unwrap();
        let text = fs::read_to_string(&csv).unwrap();
        assert!(text.contains("auroc,tree-grid,grad"));
        assert!(text.contains("fidelity,tree-grid,grad"));
        assert!(text.contains("shd,tree-grid,grad"));
        // GRAD is deterministic, so two runs agree and SHD is zero.
        for line in text.lines().filter(|l| l.starts_with("shd,")) {
            assert!(line.ends_with("0.0000000000e0"), "{line}");
        }
    }

    #[test]
    fn explain_requires_anchors_for_anchor_mode() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        let ds_path = cmd_gen("tree-grid", &GenConfig { seed: 4, n_motifs: 6, ..GenConfig::default() }, out).unwrap();
        let model_path = cmd_train(
            &ds_path,
            &TrainConfig { epochs: 2, ..TrainConfig::default() },
            out,
        )
        .unwrap();
        let args = ExplainArgs {
            method: Method::GnnEx,
            cfg: ExplainerConfig { align: AlignMode::Anchor, lambda: 1.0, ..ExplainerConfig::gnnex() },
            runs: 1,
            split: SplitChoice::Test,
            max_instances: 1,
            anchors: None,
        };
        assert!(cmd_explain(&ds_path, &model_path, &args, &out.join("x")).is_err());
    }

    #[test]
    fn resolver_precedence_and_unknown_keys() {
        let mut cfg = RunConfig::parse("method = pgex\nlambda = 2.5\nmystery = 1\n", "t").unwrap();
        let flags = ExplainFlags {
            method: None,
            align: Some("absolute".into()),
            lambda: None,
            seed: None,
            runs: None,
            epochs: Some(9),
            learning_rate: None,
            split: None,
            max_instances: None,
            features: false,
            anchors: None,
        };
        let args = resolve_explain_args(flags, &mut cfg).unwrap();
        assert_eq!(args.method, Method::PgEx);
        assert_eq!(args.cfg.align, AlignMode::Absolute);
        assert_eq!(args.cfg.lambda, 2.5);
        assert_eq!(args.cfg.epochs, 9);
        assert!(cfg.finish().is_err()); // `mystery` was never consumed
    }
}
