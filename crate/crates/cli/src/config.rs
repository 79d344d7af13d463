//! JSON run configuration and command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mmgnn_core::analysis::{ComplexityConfig, StatisticKind};
use mmgnn_core::graph::SplitPolicy;
use mmgnn_core::io::Dataset;
use mmgnn_core::train::{SplitSource, TrainConfig};
use mmgnn_core::{generate_dataset, load_graph, FusionMode, ModelConfig, MomentKind, SyntheticSpec};
use serde::{Deserialize, Serialize};

/// Where the graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Directory holding `edges.tsv`, `features.csv`, `labels.tsv` and
    /// optionally `split.tsv`. Relative paths resolve against the config
    /// file's directory.
    Path(PathBuf),
    Synthetic(SyntheticSpec),
}

fn default_bins() -> usize {
    16
}

fn default_statistics() -> Vec<String> {
    ["mean", "variance", "skewness"].map(String::from).to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub complexity: ComplexityConfig,
    /// Statistic names such as `mean`, `variance`, `skewness`, `central4`.
    #[serde(default = "default_statistics")]
    pub statistics: Vec<String>,
    /// Sum Fisher terms over ordered rather than unordered class pairs.
    #[serde(default)]
    pub ordered_pairs: bool,
    /// Write per-node statistics (`stats.csv`).
    #[serde(default = "default_true")]
    pub node_statistics: bool,
}

fn default_true() -> bool {
    true
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            bins: default_bins(),
            complexity: ComplexityConfig::default(),
            statistics: default_statistics(),
            ordered_pairs: false,
            node_statistics: true,
        }
    }
}

impl AnalysisConfig {
    pub fn kinds(&self) -> Result<Vec<StatisticKind>> {
        self.statistics
            .iter()
            .map(|s| s.parse::<StatisticKind>().map_err(Into::into))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    /// Split to draw when the dataset has no `split.tsv`, or to replace it.
    #[serde(default)]
    pub split: Option<SplitPolicy>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Candidate values of `model.max_order`, chosen by mean validation
    /// accuracy. Empty means no search.
    #[serde(default)]
    pub search_orders: Vec<u32>,
    /// One seed for every random stream; overrides `model.seed` and
    /// `train.seed` when present.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Flags that override config-file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub k: Option<u32>,
    pub moment: Option<MomentKind>,
    pub fusion: Option<FusionMode>,
    pub bins: Option<usize>,
    pub p: Option<f64>,
}

impl RunConfig {
    /// Reads a config file; relative dataset paths become relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let DatasetSource::Path(p) = &mut cfg.dataset {
            if p.is_relative() {
                if let Some(parent) = path.parent() {
                    *p = parent.join(&*p);
                }
            }
            if let Ok(abs) = fs::canonicalize(&*p) {
                *p = abs;
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output_dir = Some(out.clone());
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(seed) = self.seed {
            self.model.seed = seed;
            self.train.seed = seed;
        }
        if let Some(r) = o.repeats {
            self.train.repeats = r;
        }
        if let Some(k) = o.k {
            self.model.max_order = k;
            self.search_orders.clear();
        }
        if let Some(m) = o.moment {
            self.model.kind = m;
        }
        if let Some(f) = o.fusion {
            self.model.fusion = f;
        }
        if let Some(b) = o.bins {
            self.analysis.bins = b;
        }
        if let Some(p) = o.p {
            self.analysis.complexity.p = p;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        if self.analysis.bins == 0 {
            bail!("analysis.bins must be >= 1");
        }
        if self.analysis.complexity.p.is_nan() || self.analysis.complexity.p < 1.0 {
            bail!("analysis.complexity.p must be >= 1");
        }
        self.analysis.kinds()?;
        for &k in &self.search_orders {
            let candidate = ModelConfig {
                max_order: k,
                ..self.model.clone()
            };
            candidate
                .validate()
                .with_context(|| format!("search_orders entry {k}"))?;
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<PathBuf> {
        self.output_dir
            .clone()
            .context("no output directory: pass --out or set output_dir")
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        Ok(match &self.dataset {
            DatasetSource::Path(p) => load_graph(p)?,
            DatasetSource::Synthetic(spec) => generate_dataset(spec)?,
        })
    }

    /// An explicit policy wins over the dataset's split file; without
    /// either a 60/20/20 ratio split is drawn per run.
    pub fn split_source(&self, data: &Dataset) -> SplitSource {
        match (&self.split, &data.split) {
            (Some(p), _) => SplitSource::Policy(p.clone()),
            (None, Some(mask)) => SplitSource::Fixed(mask.clone()),
            (None, None) => SplitSource::Policy(SplitPolicy::Ratio {
                train: 0.6,
                val: 0.2,
                test: 0.2,
            }),
        }
    }
}
