//! Experiment orchestration behind the `exalign` binary: dataset
//! generation, training, anchor fitting, explanation, evaluation, scripted
//! reproduction recipes, and SVG plots.
//!
//! Flags override `--config <file>` entries (line-oriented `key = value`,
//! `#` comments, unknown keys rejected), which override defaults. Every
//! stage writes a `.manifest` with its resolved configuration; a manifest
//! feeds back in as a config file, which is what "re-run this stage
//! bit-identically" means in practice.

mod config;
mod plot;
mod reproduce;
mod stages;

pub use config::{resolve, Manifest, RunConfig};
pub use plot::{Chart, Series};
pub use reproduce::{cmd_reproduce, LAMBDA_GRID};
pub use stages::{
    cmd_anchors, cmd_eval, cmd_explain, cmd_gen, cmd_train, discover_runs, generate,
    pick_instances, read_run_dir, EvalArgs, ExplainArgs, SplitChoice, DATASET_NAMES,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::gcn::TrainConfig;
use crate::graph::GenConfig;

#[derive(Parser, Debug)]
#[command(
    name = "exalign",
    version,
    about = "Train a small GCN on graph benchmarks, explain it with perturbation masks, and score the explanations."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a benchmark dataset file.
    Gen {
        /// One of: ba-shapes, tree-grid, infection, mixmotif, mutag.
        dataset: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Motif/base-type correlation for mixmotif (0 = unbiased).
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        n_base: Option<usize>,
        #[arg(long)]
        n_motifs: Option<usize>,
        #[arg(long)]
        n_graphs: Option<usize>,
        #[arg(long)]
        er_n: Option<usize>,
        #[arg(long)]
        er_p: Option<f64>,
        #[arg(long)]
        infected_frac: Option<f64>,
    },
    /// Train the three-layer GCN on a dataset file.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        weight_decay: Option<f64>,
    },
    /// Fit per-layer anchors from a trained model's embeddings.
    Anchors {
        dataset: PathBuf,
        model: PathBuf,
        #[arg(long)]
        target_k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Explain instances; repeat with --runs for consistency studies.
    Explain {
        dataset: PathBuf,
        model: PathBuf,
        /// gnnex | pgex | grad
        #[arg(long)]
        method: Option<String>,
        /// none | absolute | anchor
        #[arg(long)]
        align: Option<String>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Repeat explanation with seeds seed..seed+N-1.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// train | test (which split the instances come from)
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        max_instances: Option<usize>,
        /// Also optimize a feature mask (mask explainer only).
        #[arg(long)]
        features: bool,
        /// Anchor file (required for --align anchor).
        #[arg(long)]
        anchors: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score explanation runs: AUROC, fidelity, SHD.
    Eval {
        dataset: PathBuf,
        model: PathBuf,
        /// Explanation directory (repeatable); each holds run-* subdirs.
        #[arg(long, required = true)]
        expl: Vec<PathBuf>,
        /// Comma-separated top-k list for the consistency table.
        #[arg(long)]
        topk: Option<String>,
        /// Fidelity removal horizon.
        #[arg(long)]
        removals: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a scripted desk-scale experiment: t1|t2|t3|t4|fig4|fig5.
    Reproduce {
        id: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Draw an SVG chart from a metrics CSV.
    Plot {
        csv: PathBuf,
        /// fidelity | lambda
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::empty()),
    }
}

fn out_or(flag: Option<PathBuf>, cfg: &mut RunConfig) -> PathBuf {
    flag.or_else(|| cfg.take("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Parse a comma-separated top-k list.
fn parse_topk(raw: &str) -> Result<Vec<usize>> {
    let ks: Vec<usize> = raw
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad top-k entry {t:?}")))
        })
        .collect::<Result<_>>()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("top-k values must be positive".into()));
    }
    Ok(ks)
}

/// Execute a parsed command line. Returns only after every requested
/// artifact has been written.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            dataset,
            seed,
            out,
            config,
            gamma,
            n_base,
            n_motifs,
            n_graphs,
            er_n,
            er_p,
            infected_frac,
        } => {
            let mut cfg = load_config(&config)?;
            let d = GenConfig::default();
            let gen_cfg = GenConfig {
                seed: resolve(seed, &mut cfg, "seed", d.seed)?,
                n_base: resolve(n_base, &mut cfg, "n-base", d.n_base)?,
                n_motifs: resolve(n_motifs, &mut cfg, "n-motifs", d.n_motifs)?,
                er_n: resolve(er_n, &mut cfg, "er-n", d.er_n)?,
                er_p: resolve(er_p, &mut cfg, "er-p", d.er_p)?,
                infected_frac: resolve(infected_frac, &mut cfg, "infected-frac", d.infected_frac)?,
                mix_gamma: resolve(gamma, &mut cfg, "gamma", d.mix_gamma)?,
                n_graphs: resolve(n_graphs, &mut cfg, "n-graphs", d.n_graphs)?,
            };
            cfg.take("dataset"); // recorded in manifests; the positional wins
            let out = out_or(out, &mut cfg);
            cfg.finish()?;
            cmd_gen(&dataset, &gen_cfg, &out)?;
        }
        Command::Train { dataset, seed, out, config, epochs, learning_rate, weight_decay } => {
            let mut cfg = load_config(&config)?;
            let d = TrainConfig::default();
            let tcfg = TrainConfig {
                seed: resolve(seed, &mut cfg, "seed", d.seed)?,
                epochs: resolve(epochs, &mut cfg, "epochs", d.epochs)?,
                learning_rate: resolve(learning_rate, &mut cfg, "learning-rate", d.learning_rate)?,
                weight_decay: resolve(weight_decay, &mut cfg, "weight-decay", d.weight_decay)?,
            };
            cfg.take("dataset");
            let out = out_or(out, &mut cfg);
            cfg.finish()?;
            cmd_train(&dataset, &tcfg, &out)?;
        }
        Command::Anchors { dataset, model, target_k, out, config } => {
            let mut cfg = load_config(&config)?;
            let k = resolve(target_k, &mut cfg, "target-k", 20usize)?;
            cfg.take("dataset");
            cfg.take("model");
            let out = out_or(out, &mut cfg);
            cfg.finish()?;
            cmd_anchors(&dataset, &model, k, &out)?;
        }
        Command::Explain {
            dataset,
            model,
            method,
            align,
            lambda,
            seed,
            runs,
            epochs,
            learning_rate,
            split,
            max_instances,
            features,
            anchors,
            out,
            config,
        } => {
            let mut cfg = load_config(&config)?;
            let flags = stages::ExplainFlags {
                method,
                align,
                lambda,
                seed,
                runs,
                epochs,
                learning_rate,
                split,
                max_instances,
                features,
                anchors,
            };
            let args = stages::resolve_explain_args(flags, &mut cfg)?;
            cfg.take("dataset");
            cfg.take("model");
            let out = out_or(out, &mut cfg);
            cfg.finish()?;
            cmd_explain(&dataset, &model, &args, &out)?;
        }
        Command::Eval { dataset, model, expl, topk, removals, out, config } => {
            let mut cfg = load_config(&config)?;
            let topk_raw = resolve(topk, &mut cfg, "topk", "6".to_string())?;
            let args = EvalArgs {
                expl,
                topk: parse_topk(&topk_raw)?,
                removals: resolve(removals, &mut cfg, "removals", 10usize)?,
                dataset_name: dataset
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into()),
            };
            cfg.take("dataset");
            cfg.take("model");
            let out = out_or(out, &mut cfg);
            cfg.finish()?;
            cmd_eval(&dataset, &model, &args, &out)?;
        }
        Command::Reproduce { id, seed, out, config } => {
            let mut cfg = load_config(&config)?;
            let master = resolve(seed, &mut cfg, "seed", 0u64)?;
            cfg.take("id");
            let out = out_or(out, &mut cfg);
            cfg.finish()?;
            cmd_reproduce(&id, master, &out)?;
        }
        Command::Plot { csv, kind, out } => {
            let out = out.unwrap_or_else(|| {
                csv.parent().unwrap_or(Path::new(".")).join(format!("{kind}.svg"))
            });
            cmd_plot(&csv, &kind, &out)?;
        }
    }
    Ok(())
}

/// `plot`: re-draw a chart from a previously written metrics CSV.
pub fn cmd_plot(csv: &Path, kind: &str, out: &Path) -> Result<PathBuf> {
    let report = MetricsReport::read_csv(csv)?;
    let chart = match kind {
        "fidelity" => {
            // metric == "fidelity": mean accuracy per (method, r).
            let mut acc: BTreeMap<String, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
            for row in report.rows.iter().filter(|r| r.metric == "fidelity") {
                let Some(k) = row.k else { continue };
                let cell = acc.entry(row.method.clone()).or_default().entry(k).or_insert((0.0, 0));
                cell.0 += row.value;
                cell.1 += 1;
            }
            if acc.is_empty() {
                return Err(Error::Config(format!("{} has no fidelity rows", csv.display())));
            }
            Chart {
                title: "Fidelity under edge removal".into(),
                x_label: "edges removed".into(),
                y_label: "agreement with original prediction".into(),
                x_tick_labels: Vec::new(),
                series: acc
                    .into_iter()
                    .map(|(label, cells)| Series {
                        label,
                        points: cells
                            .into_iter()
                            .map(|(k, (sum, n))| (k as f64, sum / n as f64))
                            .collect(),
                    })
                    .collect(),
            }
        }
        "lambda" => {
            let mut per_seed: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
            for row in report.rows.iter().filter(|r| r.metric == "auroc-lambda") {
                let Some(k) = row.k else { continue };
                per_seed.entry(row.seed).or_default().push((k as f64, row.value));
            }
            if per_seed.is_empty() {
                return Err(Error::Config(format!(
                    "{} has no auroc-lambda rows",
                    csv.display()
                )));
            }
            let ticks: Vec<(f64, String)> = report
                .manifest
                .iter()
                .find(|(k, _)| k == "lambda-grid")
                .map(|(_, v)| {
                    v.split(';')
                        .enumerate()
                        .map(|(i, l)| (i as f64, l.to_string()))
                        .collect()
                })
                .unwrap_or_default();
            Chart {
                title: "Edge AUROC vs alignment strength".into(),
                x_label: "lambda".into(),
                y_label: "edge AUROC".into(),
                x_tick_labels: ticks,
                series: per_seed
                    .into_iter()
                    .map(|(seed, mut points)| {
                        points.sort_by(|a, b| a.0.total_cmp(&b.0));
                        Series { label: format!("seed {seed}"), points }
                    })
                    .collect(),
            }
        }
        other => {
            return Err(Error::Config(format!("unknown plot kind {other:?} (fidelity|lambda)")))
        }
    };
    chart.write_svg(out)?;
    println!("plot {kind}: {} -> {}", csv.display(), out.display());
    Ok(out.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_parses() {
        let cli = Cli::try_parse_from([
            "exalign", "explain", "ds.dataset", "m.model", "--method", "pgex", "--align",
            "anchor", "--lambda", "0.5", "--runs", "3", "--anchors", "a.anchors",
        ])
        .unwrap();
        match cli.command {
            Command::Explain { method, align, lambda, runs, anchors, .. } => {
                assert_eq!(method.as_deref(), Some("pgex"));
                assert_eq!(align.as_deref(), Some("anchor"));
                assert_eq!(lambda, Some(0.5));
                assert_eq!(runs, Some(3));
                assert!(anchors.is_some());
            }
            other => panic!("parsed {other:?}"),
        }
        assert!(Cli::try_parse_from(["exalign", "frobnicate"]).is_err());
        assert!(Cli::try_parse_from(["exalign", "eval", "d", "m"]).is_err()); // --expl required
    }

    #[test]
    fn topk_parsing() {
        assert_eq!(parse_topk("4,6, 8").unwrap(), vec![4, 6, 8]);
        assert!(parse_topk("4,zero").is_err());
        assert!(parse_topk("0").is_err());
    }

    #[test]
    fn plot_from_synthetic_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut rep = MetricsReport::new();
        rep.note("lambda-grid", "0.001;0.01;0.1");
        for (s, bump) in [(0u64, 0.0), (1, 0.02)] {
            for k in 0..3usize {
                rep.push("auroc-lambda", "tree-grid", "gnnex+anchor", s, Some(k), 0.7 + 0.05 * k as f64 + bump);
                rep.push("fidelity", "tree-grid", "gnnex", s, Some(k), 1.0 - 0.1 * k as f64);
            }
        }
        let csv = dir.path().join("metrics.csv");
        rep.write_csv(&csv).unwrap();

        let svg_path = dir.path().join("lambda.svg");
        cmd_plot(&csv, "lambda", &svg_path).unwrap();
        let svg = std::fs::read_to_string(&svg_path).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2); // one per seed
        assert!(svg.contains("0.001"));

        let svg_path = dir.path().join("fid.svg");
        cmd_plot(&csv, "fidelity", &svg_path).unwrap();
        let svg = std::fs::read_to_string(&svg_path).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1); // one method, seeds averaged

        assert!(cmd_plot(&csv, "pie", &dir.path().join("x.svg")).is_err());
    }

    #[test]
    fn run_dispatches_gen_and_rejects_unknown_config_keys() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let cli = Cli::try_parse_from([
            "exalign",
            "gen",
            "mutag",
            "--out",
            out.to_str().unwrap(),
        ])
        .unwrap();
        run(cli).unwrap();
        assert!(out.join("mutag.dataset").exists());
        assert!(out.join("gen-mutag.manifest").exists());

        let cfg_path = dir.path().join("bad.cfg");
        std::fs::write(&cfg_path, "frobnicate = yes\n").unwrap();
        let cli = Cli::try_parse_from([
            "exalign",
            "gen",
            "mutag",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .unwrap();
        let err = run(cli).unwrap_err().to_string();
        assert!(err.contains("frobnicate"), "{err}");
    }
}
