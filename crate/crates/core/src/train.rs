//! Adam optimisation with early stopping, evaluation and seeded repetition.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::graph::{make_split, LabelVector, Role, SplitMask, SplitPolicy};
use crate::io::Dataset;
use crate::model::{model_forward, predict, MmGnn, ModelConfig};
use crate::params::ParamStore;
use crate::rng::SeedTree;
use crate::tensor::Matrix;

/// Environment variable capping the number of concurrent runs.
pub const THREADS_ENV: &str = "MMGNN_THREADS";

fn default_lr() -> f64 {
    0.01
}
fn default_wd() -> f64 {
    5e-4
}
fn default_epochs() -> usize {
    200
}
fn default_patience() -> usize {
    50
}
fn default_repeats() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Seed for the split, dropout masks and any other sampling.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_lr(),
            weight_decay: default_wd(),
            max_epochs: default_epochs(),
            patience: default_patience(),
            seed: 0,
            repeats: default_repeats(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1e-4..=1e-1).contains(&self.learning_rate) {
            return Err(Error::Config(format!(
                "learning_rate {} outside [1e-4, 1e-1]",
                self.learning_rate
            )));
        }
        if !(1e-4..=1e-2).contains(&self.weight_decay) {
            return Err(Error::Config(format!(
                "weight_decay {} outside [1e-4, 1e-2]",
                self.weight_decay
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config("patience must not exceed max_epochs".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect()
        };
        Self {
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }
}

/// One Adam update of every parameter from its accumulated gradient, with
/// `weight_decay · θ` added to the gradient first.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if state.m.len() != store.len() || state.v.len() != store.len() {
        return Err(Error::shape("adam_step", "optimizer state does not match parameters"));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for ((p, m), v) in store.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        if m.shape() != p.value.shape() || v.shape() != p.value.shape() {
            return Err(Error::shape("adam_step", p.name.clone()));
        }
        let theta = p.value.as_mut_slice();
        let grad = p.grad.as_slice();
        for (((th, &g), mi), vi) in theta.iter_mut().zip(grad).zip(m.as_mut_slice()).zip(v.as_mut_slice()) {
            let g = g + cfg.weight_decay * *th;
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *th -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Fraction of `role` nodes whose argmax logit (lowest index on ties)
/// equals the label.
pub fn accuracy(logits: &Matrix, labels: &LabelVector, mask: &SplitMask, role: Role) -> Result<f64> {
    if logits.rows() != labels.len() || mask.len() != labels.len() {
        return Err(Error::shape(
            "accuracy",
            "logits, labels and mask disagree on node count",
        ));
    }
    let rows = mask.indices(role);
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!("no {role} nodes in mask")));
    }
    let pred = logits.argmax_rows();
    let hits = rows.iter().filter(|&&r| pred[r] == labels.get(r)).count();
    Ok(hits as f64 / rows.len() as f64)
}

/// Accuracy of `model` on the `role` nodes of `data`.
pub fn evaluate(model: &MmGnn, data: &Dataset, mask: &SplitMask, role: Role) -> Result<f64> {
    let logits = predict(&data.graph, &data.features.values, model)?;
    accuracy(&logits, &data.labels, mask, role)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
    pub wall_seconds: f64,
}

impl RunMetrics {
    /// Writes one JSON object per epoch.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        for e in &self.epochs {
            let line = serde_json::to_string(e).map_err(|e| Error::Config(e.to_string()))?;
            writeln!(w, "{line}").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }
}

/// A finished run with the best-validation parameters restored.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: RunMetrics,
    pub model: MmGnn,
}

/// Trains a fresh model, stopping once validation accuracy has not improved
/// for `patience` epochs. Metrics for an epoch come from the forward pass
/// that produced that epoch's gradients.
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    data: &Dataset,
    split: &SplitMask,
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    if split.len() != data.labels.len() {
        return Err(Error::Split(format!(
            "split covers {} nodes, dataset has {}",
            split.len(),
            data.labels.len()
        )));
    }
    let start = Instant::now();
    let mut model = MmGnn::new(model_cfg.clone(), data.features.dim(), data.labels.num_classes())?;
    let adam = train_cfg.adam();
    let mut state = AdamState::new(&model.params);
    let mut dropout_rng = SeedTree::new(train_cfg.seed).stream("dropout");
    let use_dropout = model_cfg.dropout > 0.0;

    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, Vec<Matrix>)> = None;
    for epoch in 1..=train_cfg.max_epochs {
        model.params.zero_grads();
        let mut tape = Tape::new();
        let x = tape.constant(data.features.values.clone())?;
        let rng = use_dropout.then_some(&mut dropout_rng);
        let out = model_forward(&mut tape, &data.graph, x, &model, rng).map_err(|e| diverged(e, epoch))?;
        let loss = tape
            .softmax_cross_entropy(out.logits, &data.labels, split, Role::Train)
            .map_err(|e| diverged(e, epoch))?;
        let train_loss = tape.value(loss).get(0, 0);
        if !train_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss is {train_loss} at epoch {epoch}"
            )));
        }
        tape.backward(loss, &mut model.params).map_err(|e| diverged(e, epoch))?;

        let logits = if use_dropout {
            predict(&data.graph, &data.features.values, &model)?
        } else {
            tape.value(out.logits).clone()
        };
        let metrics = EpochMetrics {
            epoch,
            train_loss,
            train_acc: accuracy(&logits, &data.labels, split, Role::Train)?,
            val_loss: masked_loss(&logits, &data.labels, split, Role::Val)?,
            val_acc: accuracy(&logits, &data.labels, split, Role::Val)?,
        };
        if best.as_ref().is_none_or(|(_, acc, _)| metrics.val_acc > *acc) {
            best = Some((epoch, metrics.val_acc, model.params.snapshot()));
        }
        epochs.push(metrics);
        drop(tape);

        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if epoch - best_epoch >= train_cfg.patience {
            log::debug!("early stop at epoch {epoch}, best {best_epoch}");
            break;
        }
        adam_step(&mut model.params, &mut state, &adam)?;
        if !model.params.iter().all(|p| p.value.all_finite()) {
            return Err(Error::Numeric(format!("parameters became non-finite at epoch {epoch}")));
        }
    }

    let (best_epoch, best_val_acc, snapshot) = best.expect("at least one epoch runs");
    model.params.restore(&snapshot)?;
    let test_acc = evaluate(&model, data, split, Role::Test)?;
    Ok(TrainOutcome {
        metrics: RunMetrics {
            seed: train_cfg.seed,
            epochs,
            best_epoch,
            best_val_acc,
            test_acc,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
        model,
    })
}

fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!("diverged at epoch {epoch}: {msg}")),
        other => other,
    }
}

fn masked_loss(logits: &Matrix, labels: &LabelVector, mask: &SplitMask, role: Role) -> Result<f64> {
    let mut tape = Tape::new();
    let z = tape.constant(logits.clone())?;
    let loss = tape.softmax_cross_entropy(z, labels, mask, role)?;
    Ok(tape.value(loss).get(0, 0))
}

/// Where each repetition gets its split from.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitSource {
    Fixed(SplitMask),
    /// Drawn per repetition from that repetition's seed.
    Policy(SplitPolicy),
}

impl SplitSource {
    pub fn mask(&self, labels: &LabelVector, seed: u64) -> Result<SplitMask> {
        match self {
            SplitSource::Fixed(m) => Ok(m.clone()),
            SplitSource::Policy(p) => make_split(labels, p, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatSummary {
    pub runs: Vec<RunMetrics>,
    pub mean_test_acc: f64,
    pub std_test_acc: f64,
    pub mean_val_acc: f64,
}

/// Sample mean and unbiased standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Number of worker threads from [`THREADS_ENV`], defaulting to rayon's choice.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` inside a pool capped by [`THREADS_ENV`].
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads_from_env() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Repetition `r` of a base seed: both the model and training seeds are
/// offset by `r`.
pub fn seeded(model_cfg: &ModelConfig, train_cfg: &TrainConfig, r: usize) -> (ModelConfig, TrainConfig) {
    let mut m = model_cfg.clone();
    let mut t = train_cfg.clone();
    m.seed = model_cfg.seed.wrapping_add(r as u64);
    t.seed = train_cfg.seed.wrapping_add(r as u64);
    (m, t)
}

/// `n` independent runs with seeds `seed + 0 .. seed + n - 1`, executed in
/// parallel and reported in seed order.
pub fn repeat_runs(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    data: &Dataset,
    split: &SplitSource,
    n: usize,
) -> Result<RepeatSummary> {
    if n == 0 {
        return Err(Error::Config("repeat count must be >= 1".into()));
    }
    let runs: Vec<RunMetrics> = with_pool(|| {
        (0..n)
            .into_par_iter()
            .map(|r| {
                let (m, t) = seeded(model_cfg, train_cfg, r);
                let mask = split.mask(&data.labels, t.seed)?;
                train(&m, &t, data, &mask).map(|o| o.metrics)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(summarize(runs))
}

pub fn summarize(runs: Vec<RunMetrics>) -> RepeatSummary {
    let test: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
    let val: Vec<f64> = runs.iter().map(|r| r.best_val_acc).collect();
    let (mean_test_acc, std_test_acc) = mean_std(&test);
    RepeatSummary {
        runs,
        mean_test_acc,
        std_test_acc,
        mean_val_acc: mean_std(&val).0,
    }
}

/// Runs every candidate `n` times and returns the index of the one with the
/// highest mean best-validation accuracy (first on ties) with all summaries.
pub fn select_by_validation(
    candidates: &[(ModelConfig, TrainConfig)],
    data: &Dataset,
    split: &SplitSource,
    n: usize,
) -> Result<(usize, Vec<RepeatSummary>)> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate configurations".into()));
    }
    let summaries = candidates
        .iter()
        .map(|(m, t)| repeat_runs(m, t, data, split, n))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, s) in summaries.iter().enumerate() {
        if s.mean_val_acc > summaries[best].mean_val_acc {
            best = i;
        }
    }
    Ok((best, summaries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{FeatureMatrix, SparseGraph};
    use rand::Rng;

    fn tiny_dataset(seed: u64) -> (Dataset, SplitMask) {
        let n = 12;
        let edges = (0..n).map(|i| (i, (i + 1) % n)).chain([(0, 6), (3, 9), (1, 7)]);
        let graph = SparseGraph::from_edges(n, edges).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= 6)).collect();
        let mut rng = SeedTree::new(seed).stream("x");
        let x = Matrix::from_fn(n, 3, |i, j| {
            let shift = if labels[i] == 1 { 1.0 } else { -1.0 };
            shift * (j as f64 + 1.0) * 0.5 + rng.random_range(-0.5..0.5)
        });
        let roles = (0..n)
            .map(|i| match i % 6 {
                0..=2 => Role::Train,
                3 => Role::Val,
                _ => Role::Test,
            })
            .collect();
        let data = Dataset {
            graph,
            features: FeatureMatrix::new(x, None).unwrap(),
            labels: LabelVector::from_labels(labels).unwrap(),
            split: None,
        };
        (data, SplitMask::new(roles).unwrap())
    }

    /// Scalar Adam written independently of `adam_step`.
    fn reference_adam(theta0: f64, grad: impl Fn(f64) -> f64, lr: f64, wd: f64, steps: usize) -> Vec<f64> {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut th, mut m, mut v) = (theta0, 0.0, 0.0);
        let mut trace = Vec::new();
        for t in 1..=steps {
            let g = grad(th) + wd * th;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            th -= lr * mh / (vh.sqrt() + eps);
            trace.push(th);
        }
        trace
    }

    #[test]
    fn adam_matches_reference_trace_on_quadratic() {
        let starts = [3.0, -1.5, 0.25];
        let mut store = ParamStore::new();
        let id = store.add("w", Matrix::from_vec(1, 3, starts.to_vec()).unwrap());
        let mut state = AdamState::new(&store);
        let cfg = AdamConfig {
            learning_rate: 0.05,
            weight_decay: 1e-3,
            ..AdamConfig::default()
        };
        let refs: Vec<Vec<f64>> = starts
            .iter()
            .map(|&s| reference_adam(s, |x| 2.0 * (x - 1.0), 0.05, 1e-3, 10))
            .collect();
        for step in 0..10 {
            let g = store.value(id).map(|x| 2.0 * (x - 1.0));
            store.get_mut(id).grad = g;
            adam_step(&mut store, &mut state, &cfg).unwrap();
            for (j, r) in refs.iter().enumerate() {
                assert!((store.value(id).as_slice()[j] - r[step]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adam_constant_gradient_steps_approach_lr() {
        let mut store = ParamStore::new();
        let id = store.add("w", Matrix::zeros(1, 1));
        let mut state = AdamState::new(&store);
        let cfg = AdamConfig {
            learning_rate: 0.01,
            ..AdamConfig::default()
        };
        let mut prev = 0.0;
        let mut last_step = 0.0;
        for _ in 0..500 {
            store.get_mut(id).grad = Matrix::filled(1, 1, 0.3);
            adam_step(&mut store, &mut state, &cfg).unwrap();
            let now = store.value(id).get(0, 0);
            last_step = prev - now;
            prev = now;
        }
        assert!((last_step - 0.01).abs() < 1e-6, "{last_step}");
    }

    #[test]
    fn adam_weight_decay_only_shrinks() {
        let mut store = ParamStore::new();
        let id = store.add("w", Matrix::from_vec(1, 3, vec![2.0, -3.0, 0.0]).unwrap());
        let mut state = AdamState::new(&store);
        let cfg = AdamConfig {
            learning_rate: 0.01,
            weight_decay: 1e-2,
            ..AdamConfig::default()
        };
        adam_step(&mut store, &mut state, &cfg).unwrap();
        let w = store.value(id).as_slice();
        assert!(w[0] < 2.0 && w[0] > 1.9);
        assert!(w[1] > -3.0 && w[1] < -2.9);
        assert_eq!(w[2], 0.0);

        let cfg0 = AdamConfig {
            weight_decay: 0.0,
            ..cfg
        };
        let before = store.value(id).clone();
        store.zero_grads();
        let mut fresh = AdamState::new(&store);
        adam_step(&mut store, &mut fresh, &cfg0).unwrap();
        assert_eq!(store.value(id), &before);
    }

    #[test]
    fn accuracy_ties_go_to_lowest_class() {
        let labels = LabelVector::from_labels(vec![0, 1, 0, 1]).unwrap();
        let mask = SplitMask::new(vec![Role::Train, Role::Val, Role::Test, Role::Test]).unwrap();
        let uniform = Matrix::zeros(4, 2);
        assert_eq!(accuracy(&uniform, &labels, &mask, Role::Test).unwrap(), 0.5);
        let perfect = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(accuracy(&perfect, &labels, &mask, Role::Test).unwrap(), 1.0);
    }

    #[test]
    fn config_ranges_enforced() {
        let ok = TrainConfig::default();
        ok.validate().unwrap();
        for bad in [
            TrainConfig {
                learning_rate: 0.5,
                ..ok.clone()
            },
            TrainConfig {
                weight_decay: 0.0,
                ..ok.clone()
            },
            TrainConfig {
                patience: 500,
                ..ok.clone()
            },
            TrainConfig {
                repeats: 0,
                ..ok.clone()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn training_loss_decreases_early() {
        let (data, split) = tiny_dataset(0);
        let tc = TrainConfig {
            learning_rate: 1e-2,
            max_epochs: 20,
            patience: 20,
            ..TrainConfig::default()
        };
        let out = train(&ModelConfig::default(), &tc, &data, &split).unwrap();
        let losses: Vec<f64> = out.metrics.epochs.iter().map(|e| e.train_loss).collect();
        assert_eq!(losses.len(), 20);
        let rises = losses.windows(2).filter(|w| w[1] >= w[0]).count();
        assert!(rises <= 2, "{losses:?}");
        assert!(losses[19] < losses[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let (data, split) = tiny_dataset(1);
        let tc = TrainConfig {
            max_epochs: 15,
            patience: 10,
            ..TrainConfig::default()
        };
        let mc = ModelConfig {
            hidden_dim: 8,
            dropout: 0.2,
            ..ModelConfig::default()
        };
        let a = train(&mc, &tc, &data, &split).unwrap().metrics;
        let b = train(&mc, &tc, &data, &split).unwrap().metrics;
        assert_eq!(a.epochs, b.epochs);
        assert_eq!(a.test_acc, b.test_acc);
    }

    #[test]
    fn best_epoch_parameters_are_restored() {
        let (data, split) = tiny_dataset(2);
        let tc = TrainConfig {
            max_epochs: 40,
            patience: 5,
            ..TrainConfig::default()
        };
        let mc = ModelConfig {
            hidden_dim: 8,
            ..ModelConfig::default()
        };
        let out = train(&mc, &tc, &data, &split).unwrap();
        let m = &out.metrics;
        assert!(m.best_epoch <= m.epochs.len());
        let best = &m.epochs[m.best_epoch - 1];
        assert_eq!(best.val_acc, m.best_val_acc);
        assert!(m.epochs.iter().all(|e| e.val_acc <= m.best_val_acc));
        assert_eq!(evaluate(&out.model, &data, &split, Role::Val).unwrap(), m.best_val_acc);
        assert_eq!(evaluate(&out.model, &data, &split, Role::Test).unwrap(), m.test_acc);
    }

    #[test]
    fn parallel_repeats_match_serial() {
        let (data, split) = tiny_dataset(3);
        let tc = TrainConfig {
            max_epochs: 10,
            patience: 10,
            seed: 4,
            ..TrainConfig::default()
        };
        let mc = ModelConfig {
            hidden_dim: 4,
            seed: 9,
            ..ModelConfig::default()
        };
        let source = SplitSource::Fixed(split.clone());
        let par = repeat_runs(&mc, &tc, &data, &source, 3).unwrap();
        for (r, run) in par.runs.iter().enumerate() {
            let (m, t) = seeded(&mc, &tc, r);
            let serial = train(&m, &t, &data, &split).unwrap().metrics;
            assert_eq!(run.epochs, serial.epochs);
            assert_eq!(run.seed, 4 + r as u64);
        }
    }

    #[test]
    fn mean_std_is_unbiased() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }
}
