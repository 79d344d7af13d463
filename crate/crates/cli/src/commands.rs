//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mmgnn_core::analysis::{
    attention_summary, complexity_measure, fisher_index, mutual_information, neighborhood_statistic, statistic_grid,
};
use mmgnn_core::autodiff::Tape;
use mmgnn_core::gradcheck::model_grad_check;
use mmgnn_core::graph::{make_split, SplitPolicy};
use mmgnn_core::io::Dataset;
use mmgnn_core::model::model_forward;
use mmgnn_core::moments::raw_moment_values;
use mmgnn_core::params::ParamStore;
use mmgnn_core::tensor::Matrix;
use mmgnn_core::train::{
    mean_std, repeat_runs, seeded, select_by_validation, train, with_pool, EpochMetrics, SplitSource, TrainConfig,
    TrainOutcome,
};
use mmgnn_core::{save_dataset, FusionMode, MmGnn, ModelConfig, MomentKind, SyntheticSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{fmt_value, write_csv, write_labelled_matrix, write_text};

pub const CONFIG_ECHO: &str = "config.json";
pub const CHECKPOINT: &str = "checkpoint.txt";
pub const METRICS: &str = "metrics.jsonl";
pub const SUMMARY: &str = "summary.csv";
pub const ATTENTION: &str = "attention.csv";
pub const ABLATION: &str = "ablation.csv";
pub const TIMING: &str = "timing.log";

/// Gradient check tolerance for `gradcheck`.
pub const GRADCHECK_TOL: f64 = 1e-3;

/// A failure that maps to the numeric exit code.
#[derive(Debug)]
pub struct NumericFailure(pub String);

impl std::fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericFailure {}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.output_dir()?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let text = serde_json::to_string_pretty(cfg)?;
    write_text(&out.join(CONFIG_ECHO), &(text + "\n"))?;
    Ok(out)
}

#[derive(Serialize)]
struct MetricsRecord<'a> {
    run: usize,
    seed: u64,
    #[serde(flatten)]
    epoch: &'a EpochMetrics,
}

/// Trains `n` seeded repetitions in parallel, returned in seed order.
fn train_repeats(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    data: &Dataset,
    split: &SplitSource,
) -> Result<Vec<TrainOutcome>> {
    let n = train_cfg.repeats;
    let runs = with_pool(|| {
        (0..n)
            .into_par_iter()
            .map(|r| {
                let (m, t) = seeded(model_cfg, train_cfg, r);
                let mask = split.mask(&data.labels, t.seed)?;
                train(&m, &t, data, &mask)
            })
            .collect::<mmgnn_core::Result<Vec<_>>>()
    })??;
    Ok(runs)
}

/// Mean attention per layer and order of `model` over the full graph.
pub fn attention_grid(model: &MmGnn, data: &Dataset) -> Result<Option<Matrix>> {
    if model.config.fusion != FusionMode::Attention {
        return Ok(None);
    }
    let mut tape = Tape::new();
    let x = tape.constant(data.features.values.clone())?;
    let out = model_forward(&mut tape, &data.graph, x, model, None)?;
    let att: Vec<Vec<Matrix>> = out
        .attention()
        .iter()
        .map(|layer| layer.iter().map(|v| tape.value(*v).clone()).collect())
        .collect();
    Ok(Some(attention_summary(&att)?))
}

fn order_labels(model: &ModelConfig) -> Vec<String> {
    model.orders().iter().map(|k| format!("M-{k}")).collect()
}

pub fn cmd_train(cfg: RunConfig) -> Result<()> {
    cfg.validate()?;
    let data = cfg.load_dataset()?;
    let out = prepare_out(&cfg)?;
    let split = cfg.split_source(&data);
    let mut timing = String::new();

    let mut model_cfg = cfg.model.clone();
    if !cfg.search_orders.is_empty() {
        let candidates: Vec<(ModelConfig, TrainConfig)> = cfg
            .search_orders
            .iter()
            .map(|&k| {
                (
                    ModelConfig {
                        max_order: k,
                        ..cfg.model.clone()
                    },
                    cfg.train.clone(),
                )
            })
            .collect();
        let (best, summaries) = select_by_validation(&candidates, &data, &split, cfg.train.repeats)?;
        let rows: Vec<Vec<String>> = cfg
            .search_orders
            .iter()
            .zip(&summaries)
            .map(|(k, s)| {
                vec![
                    k.to_string(),
                    fmt_value(s.mean_val_acc),
                    fmt_value(s.mean_test_acc),
                    fmt_value(s.std_test_acc),
                ]
            })
            .collect();
        let header = ["max_order", "mean_val_acc", "mean_test_acc", "std_test_acc"].map(String::from);
        write_csv(&out.join("search.csv"), &header, &rows)?;
        model_cfg = candidates[best].0.clone();
        log::info!("selected max_order = {}", model_cfg.max_order);
    }

    let runs = train_repeats(&model_cfg, &cfg.train, &data, &split)?;

    let mut jsonl = String::new();
    for (r, run) in runs.iter().enumerate() {
        for e in &run.metrics.epochs {
            let rec = MetricsRecord {
                run: r,
                seed: run.metrics.seed,
                epoch: e,
            };
            jsonl.push_str(&serde_json::to_string(&rec)?);
            jsonl.push('\n');
        }
        let _ = writeln!(
            timing,
            "run {r} seed {} wall_seconds {:.3}",
            run.metrics.seed, run.metrics.wall_seconds
        );
    }
    write_text(&out.join(METRICS), &jsonl)?;

    let header = [
        "run",
        "seed",
        "max_order",
        "best_epoch",
        "epochs_run",
        "best_val_acc",
        "test_acc",
    ]
    .map(String::from);
    let mut rows: Vec<Vec<String>> = runs
        .iter()
        .enumerate()
        .map(|(r, run)| {
            let m = &run.metrics;
            vec![
                r.to_string(),
                m.seed.to_string(),
                model_cfg.max_order.to_string(),
                m.best_epoch.to_string(),
                m.epochs.len().to_string(),
                fmt_value(m.best_val_acc),
                fmt_value(m.test_acc),
            ]
        })
        .collect();
    let test: Vec<f64> = runs.iter().map(|r| r.metrics.test_acc).collect();
    let val: Vec<f64> = runs.iter().map(|r| r.metrics.best_val_acc).collect();
    let (tm, ts) = mean_std(&test);
    let (vm, vs) = mean_std(&val);
    let blank = String::new;
    rows.push(vec![
        "mean".into(),
        blank(),
        blank(),
        blank(),
        blank(),
        fmt_value(vm),
        fmt_value(tm),
    ]);
    rows.push(vec![
        "std".into(),
        blank(),
        blank(),
        blank(),
        blank(),
        fmt_value(vs),
        fmt_value(ts),
    ]);
    write_csv(&out.join(SUMMARY), &header, &rows)?;

    let first = &runs[0].model;
    first.params.save(out.join(CHECKPOINT))?;
    if let Some(grid) = attention_grid(first, &data)? {
        let layers: Vec<String> = (0..grid.rows()).map(|l| l.to_string()).collect();
        write_labelled_matrix(&out.join(ATTENTION), "layer", &layers, &order_labels(&model_cfg), &grid)?;
    }
    write_text(&out.join(TIMING), &timing)?;
    println!("test accuracy {tm:.4} ± {ts:.4} over {} run(s)", runs.len());
    Ok(())
}

/// Γ of several representations: raw features, each moment order and,
/// when given, a trained model's logits.
fn gamma_report(cfg: &RunConfig, data: &Dataset, model: Option<&MmGnn>) -> Result<String> {
    let cc = &cfg.analysis.complexity;
    let mut text = String::new();
    let x = &data.features.values;
    let _ = writeln!(
        text,
        "features\t{}",
        fmt_value(complexity_measure(x, &data.labels, cc)?)
    );
    for k in 1..=cfg.model.max_order {
        let kind = cfg.model.kind.for_order(k);
        let m = raw_moment_values(&data.graph, x, k, kind, cfg.model.root_eps)?;
        let name = if k == 1 {
            "mean_aggregation".to_string()
        } else {
            format!("{}_moment_{k}", kind_name(kind))
        };
        let _ = writeln!(text, "{name}\t{}", fmt_value(complexity_measure(&m, &data.labels, cc)?));
    }
    if let Some(model) = model {
        let logits = mmgnn_core::model::predict(&data.graph, x, model)?;
        let _ = writeln!(
            text,
            "checkpoint\t{}",
            fmt_value(complexity_measure(&logits, &data.labels, cc)?)
        );
    }
    Ok(text)
}

fn kind_name(kind: MomentKind) -> &'static str {
    match kind {
        MomentKind::Origin => "origin",
        MomentKind::Central => "central",
    }
}

pub struct AnalyzeArgs {
    pub checkpoint: Option<PathBuf>,
}

pub fn cmd_analyze(cfg: RunConfig, args: AnalyzeArgs) -> Result<()> {
    cfg.validate()?;
    let data = cfg.load_dataset()?;
    let out = prepare_out(&cfg)?;
    let kinds = cfg.analysis.kinds()?;
    let names = data.features.names();
    let stat_names: Vec<String> = kinds.iter().map(|k| k.to_string()).collect();
    let x = &data.features.values;
    let graph = &data.graph;

    if cfg.analysis.node_statistics {
        let columns: Vec<Vec<f64>> = (0..x.cols())
            .into_par_iter()
            .flat_map_iter(|d| {
                kinds
                    .iter()
                    .map(move |&k| neighborhood_statistic(graph, x, d, k))
                    .collect::<Vec<_>>()
            })
            .collect::<mmgnn_core::Result<_>>()?;
        let mut header = vec!["node".to_string()];
        for n in &names {
            for s in &stat_names {
                header.push(format!("{n}:{s}"));
            }
        }
        let rows: Vec<Vec<String>> = (0..x.rows())
            .map(|v| {
                let mut row = vec![v.to_string()];
                row.extend(columns.iter().map(|c| fmt_value(c[v])));
                row
            })
            .collect();
        write_csv(&out.join("stats.csv"), &header, &rows)?;
    }

    let labels = &data.labels;
    let ordered = cfg.analysis.ordered_pairs;
    let fisher = statistic_grid(&data.graph, x, &kinds, |v| {
        Ok(fisher_index(v, labels, ordered).unwrap_or_else(|e| {
            log::warn!("fisher index unavailable: {e}");
            f64::NAN
        }))
    })?;
    write_labelled_matrix(&out.join("fisher.csv"), "statistic", &stat_names, &names, &fisher)?;
    let bins = cfg.analysis.bins;
    let mi = statistic_grid(&data.graph, x, &kinds, |v| {
        Ok(mutual_information(v, labels, bins).unwrap_or_else(|e| {
            log::warn!("mutual information unavailable: {e}");
            f64::NAN
        }))
    })?;
    write_labelled_matrix(&out.join("mi.csv"), "statistic", &stat_names, &names, &mi)?;

    let model = match &args.checkpoint {
        Some(path) => Some(load_checkpoint(path, &cfg.model, &data)?),
        None => None,
    };
    write_text(&out.join("gamma.txt"), &gamma_report(&cfg, &data, model.as_ref())?)?;
    if let Some(model) = &model {
        if let Some(grid) = attention_grid(model, &data)? {
            let layers: Vec<String> = (0..grid.rows()).map(|l| l.to_string()).collect();
            write_labelled_matrix(
                &out.join(ATTENTION),
                "layer",
                &layers,
                &order_labels(&model.config),
                &grid,
            )?;
        }
    }
    println!("analysis written to {}", out.display());
    Ok(())
}

/// Rebuilds a trained model. The model section comes from the
/// `config.json` stored beside the checkpoint when present.
fn load_checkpoint(path: &Path, fallback: &ModelConfig, data: &Dataset) -> Result<MmGnn> {
    let echo = path.with_file_name(CONFIG_ECHO);
    let model_cfg = if echo.exists() {
        RunConfig::load(&echo)?.model
    } else {
        fallback.clone()
    };
    let store = ParamStore::load(path)?;
    let orders = store
        .iter()
        .filter_map(|p| p.name.strip_prefix("layer0.moment").and_then(|k| k.parse::<u32>().ok()))
        .max();
    let model_cfg = match (orders, model_cfg.fusion) {
        (Some(k), FusionMode::Attention | FusionMode::Mlp | FusionMode::MeanEnsemble) => ModelConfig {
            max_order: k,
            ..model_cfg
        },
        _ => model_cfg,
    };
    let mut model = MmGnn::new(model_cfg, data.features.dim(), data.labels.num_classes())?;
    model
        .params
        .load_values_from(&store)
        .with_context(|| format!("checkpoint {} does not fit the model", path.display()))?;
    Ok(model)
}

pub struct SynthArgs {
    pub spec: SyntheticSpec,
    pub split: Option<SplitPolicy>,
    pub out: PathBuf,
}

pub fn cmd_synth(args: SynthArgs) -> Result<()> {
    args.spec.validate()?;
    let mut data = mmgnn_core::generate_dataset(&args.spec)?;
    if let Some(policy) = &args.split {
        data.split = Some(make_split(&data.labels, policy, args.spec.seed)?);
    }
    save_dataset(&args.out, &data)?;
    write_text(
        &args.out.join("spec.json"),
        &(serde_json::to_string_pretty(&args.spec)? + "\n"),
    )?;
    println!(
        "wrote {} nodes, {} edges to {}",
        data.graph.num_nodes(),
        data.graph.num_edges() / 2,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_gradcheck(seed: u64, coords: Option<usize>) -> Result<()> {
    let report = model_grad_check(seed, coords)?;
    let worst = report
        .worst
        .as_ref()
        .map(|(name, i, a, n)| format!(" worst {name}[{i}] analytic {a:e} numeric {n:e}"))
        .unwrap_or_default();
    println!(
        "gradcheck seed {seed}: max_rel_error {:e} over {} coordinates{worst}",
        report.max_rel_error, report.coords_checked
    );
    if report.max_rel_error.is_nan() || report.max_rel_error >= GRADCHECK_TOL {
        return Err(NumericFailure(format!(
            "max relative error {:e} is not below {GRADCHECK_TOL:e}",
            report.max_rel_error
        ))
        .into());
    }
    Ok(())
}

/// Fusion modes of the ablation in table order.
pub fn ablation_modes(k: u32) -> Vec<(String, FusionMode)> {
    let mut modes: Vec<(String, FusionMode)> = (1..=k)
        .map(|i| (format!("M-{i}"), FusionMode::SingleMoment(i)))
        .collect();
    modes.push(("Ensemble".into(), FusionMode::MeanEnsemble));
    modes.push(("MLP".into(), FusionMode::Mlp));
    modes.push(("Attention".into(), FusionMode::Attention));
    modes
}

pub fn cmd_ablate(cfg: RunConfig) -> Result<()> {
    cfg.validate()?;
    if !cfg.search_orders.is_empty() {
        bail!("ablate uses model.max_order; remove search_orders or pass --k");
    }
    let data = cfg.load_dataset()?;
    let out = prepare_out(&cfg)?;
    let split = cfg.split_source(&data);
    let mut rows = Vec::new();
    let mut timing = String::new();
    for (name, fusion) in ablation_modes(cfg.model.max_order) {
        let model_cfg = ModelConfig {
            fusion,
            ..cfg.model.clone()
        };
        let s = repeat_runs(&model_cfg, &cfg.train, &data, &split, cfg.train.repeats)?;
        log::info!("{name}: {:.4} ± {:.4}", s.mean_test_acc, s.std_test_acc);
        let secs: f64 = s.runs.iter().map(|r| r.wall_seconds).sum();
        let _ = writeln!(timing, "{name} wall_seconds {secs:.3}");
        rows.push(vec![
            name,
            fusion.to_string(),
            fmt_value(s.mean_test_acc),
            fmt_value(s.std_test_acc),
            fmt_value(s.mean_val_acc),
            s.runs.len().to_string(),
        ]);
    }
    let header = [
        "model",
        "fusion",
        "mean_test_acc",
        "std_test_acc",
        "mean_val_acc",
        "runs",
    ]
    .map(String::from);
    write_csv(&out.join(ABLATION), &header, &rows)?;
    write_text(&out.join(TIMING), &timing)?;
    for r in &rows {
        println!("{:<10} {} ± {}", r[0], r[2], r[3]);
    }
    Ok(())
}
