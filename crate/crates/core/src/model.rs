//! Attention-based moment adaptor and the stacked mix-moment GNN.
//!
//! Each layer computes moment signatures of the previous representation,
//! weights every signature element-wise with
//! `a_k = σ([h·W_query || M_k·W_key]·W_a)` and sums `a_k ⊙ M_k` over orders.
//! Hidden layers apply relu after fusion (and after the optional residual);
//! the last layer emits logits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::moments::{mme_forward, MomentKind, MomentLayerParams, MomentSignatures};
use crate::params::{glorot_uniform, ParamId, ParamStore};
use crate::rng::{SeedTree, StreamRng};
use crate::tensor::Matrix;

/// How the per-order signatures are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FusionMode {
    Attention,
    Mlp,
    MeanEnsemble,
    SingleMoment(u32),
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionMode::Attention => f.write_str("attention"),
            FusionMode::Mlp => f.write_str("mlp"),
            FusionMode::MeanEnsemble => f.write_str("mean"),
            FusionMode::SingleMoment(k) => write!(f, "single:{k}"),
        }
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(FusionMode::Attention),
            "mlp" => Ok(FusionMode::Mlp),
            "mean" => Ok(FusionMode::MeanEnsemble),
            _ => s
                .strip_prefix("single:")
                .and_then(|k| k.parse().ok())
                .map(FusionMode::SingleMoment)
                .ok_or_else(|| Error::Config(format!("unknown fusion mode `{s}`"))),
        }
    }
}

impl TryFrom<String> for FusionMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FusionMode> for String {
    fn from(f: FusionMode) -> String {
        f.to_string()
    }
}

/// Squashing applied to attention pre-activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionActivation {
    /// Independent sigmoid per entry; weights are not normalized across orders.
    #[default]
    Sigmoid,
    /// Softmax over orders, per node and hidden dimension.
    Softmax,
}

fn default_layers() -> usize {
    2
}
fn default_hidden() -> usize {
    64
}
fn default_order() -> u32 {
    3
}
fn default_kind() -> MomentKind {
    MomentKind::Central
}
fn default_fusion() -> FusionMode {
    FusionMode::Attention
}
fn default_true() -> bool {
    true
}
fn default_eps() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_layers")]
    pub num_layers: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    /// Largest moment order `K`.
    #[serde(default = "default_order")]
    pub max_order: u32,
    #[serde(default = "default_kind")]
    pub kind: MomentKind,
    #[serde(default = "default_fusion")]
    pub fusion: FusionMode,
    #[serde(default = "default_true")]
    pub residual: bool,
    #[serde(default = "default_eps")]
    pub root_eps: f64,
    #[serde(default)]
    pub attention_activation: AttentionActivation,
    /// Dropout on every layer input during training.
    #[serde(default)]
    pub dropout: f64,
    /// Seed for parameter initialisation.
    #[serde(default)]
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: default_layers(),
            hidden_dim: default_hidden(),
            max_order: default_order(),
            kind: default_kind(),
            fusion: default_fusion(),
            residual: true,
            root_eps: default_eps(),
            attention_activation: AttentionActivation::Sigmoid,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::Config("num_layers must be >= 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be >= 1".into()));
        }
        if self.max_order == 0 {
            return Err(Error::Config("max_order must be >= 1".into()));
        }
        if let FusionMode::SingleMoment(k) = self.fusion {
            if k == 0 || k > self.max_order {
                return Err(Error::Config(format!(
                    "single:{k} needs 1 <= k <= max_order ({})",
                    self.max_order
                )));
            }
        }
        if !(self.root_eps >= 0.0 && self.root_eps.is_finite()) {
            return Err(Error::Config("root_eps must be a finite value >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Moment orders whose signatures the layers compute.
    pub fn orders(&self) -> Vec<u32> {
        match self.fusion {
            FusionMode::SingleMoment(k) => vec![k],
            _ => (1..=self.max_order).collect(),
        }
    }
}

/// `W_query`, `W_key` and `W_a` of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaptorParams {
    pub query: ParamId,
    pub key: ParamId,
    pub attn: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerParams {
    pub input_dim: usize,
    pub output_dim: usize,
    pub moments: MomentLayerParams,
    pub adaptor: Option<AdaptorParams>,
    /// Weight and bias of the one-layer fusion map (MLP ablation).
    pub mlp: Option<(ParamId, ParamId)>,
    /// Projection for residuals across differing widths.
    pub residual_proj: Option<ParamId>,
}

/// A mix-moment GNN with its parameters.
#[derive(Debug, Clone)]
pub struct MmGnn {
    pub config: ModelConfig,
    pub input_dim: usize,
    pub num_classes: usize,
    pub layers: Vec<LayerParams>,
    pub params: ParamStore,
}

impl MmGnn {
    /// Glorot-uniform initialisation from `config.seed`.
    pub fn new(config: ModelConfig, input_dim: usize, num_classes: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 || num_classes == 0 {
            return Err(Error::Config("input_dim and num_classes must be >= 1".into()));
        }
        let mut rng = SeedTree::new(config.seed).stream("init");
        let mut params = ParamStore::new();
        let mut layers = Vec::with_capacity(config.num_layers);
        let orders = config.orders();
        for l in 0..config.num_layers {
            let d_in = if l == 0 { input_dim } else { config.hidden_dim };
            let d_out = if l + 1 == config.num_layers {
                num_classes
            } else {
                config.hidden_dim
            };
            let ids = orders
                .iter()
                .map(|&k| {
                    let w = glorot_uniform(d_in, d_out, &mut rng);
                    (k, params.add(format!("layer{l}.moment{k}"), w))
                })
                .collect();
            let moments = MomentLayerParams::new(ids, &params)?;
            let adaptor = match config.fusion {
                FusionMode::Attention => Some(AdaptorParams {
                    query: params.add(format!("layer{l}.query"), glorot_uniform(d_in, d_out, &mut rng)),
                    key: params.add(format!("layer{l}.key"), glorot_uniform(d_out, d_out, &mut rng)),
                    attn: params.add(format!("layer{l}.attn"), glorot_uniform(2 * d_out, d_out, &mut rng)),
                }),
                _ => None,
            };
            let mlp = match config.fusion {
                FusionMode::Mlp => Some((
                    params.add(
                        format!("layer{l}.mlp_weight"),
                        glorot_uniform(orders.len() * d_out, d_out, &mut rng),
                    ),
                    params.add(format!("layer{l}.mlp_bias"), Matrix::zeros(1, d_out)),
                )),
                _ => None,
            };
            let residual_proj = (config.residual && d_in != d_out)
                .then(|| params.add(format!("layer{l}.residual"), glorot_uniform(d_in, d_out, &mut rng)));
            layers.push(LayerParams {
                input_dim: d_in,
                output_dim: d_out,
                moments,
                adaptor,
                mlp,
                residual_proj,
            });
        }
        Ok(Self {
            config,
            input_dim,
            num_classes,
            layers,
            params,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }
}

/// Element-wise attention weights for every order of `sigs`.
pub fn attention<'g>(
    tape: &mut Tape<'g>,
    h_prev: Var,
    sigs: &MomentSignatures,
    store: &ParamStore,
    p: &AdaptorParams,
    activation: AttentionActivation,
) -> Result<Vec<Var>> {
    let wq = tape.param(store, p.query)?;
    let wk = tape.param(store, p.key)?;
    let wa = tape.param(store, p.attn)?;
    let query = tape.matmul(h_prev, wq)?;
    let mut pre = Vec::with_capacity(sigs.signatures.len());
    for &sig in &sigs.signatures {
        let key = tape.matmul(sig, wk)?;
        let joined = tape.concat_cols(&[query, key])?;
        pre.push(tape.matmul(joined, wa)?);
    }
    match activation {
        AttentionActivation::Sigmoid => pre.into_iter().map(|z| tape.sigmoid(z)).collect(),
        AttentionActivation::Softmax => (0..pre.len()).map(|k| tape.softmax_select(&pre, k)).collect(),
    }
}

/// Combines signatures according to `mode`. `att` is required for
/// attention fusion and `mlp` for the MLP ablation.
pub fn fuse<'g>(
    tape: &mut Tape<'g>,
    sigs: &MomentSignatures,
    att: Option<&[Var]>,
    mode: FusionMode,
    store: &ParamStore,
    mlp: Option<(ParamId, ParamId)>,
) -> Result<Var> {
    let mismatch = |what: &str| Error::Config(format!("{mode} fusion: {what}"));
    match mode {
        FusionMode::Attention => {
            let att = att.ok_or_else(|| mismatch("missing attention weights"))?;
            if att.len() != sigs.signatures.len() {
                return Err(mismatch("attention/signature order count differs"));
            }
            let mut acc: Option<Var> = None;
            for (&a, &s) in att.iter().zip(&sigs.signatures) {
                let term = tape.mul_elem(a, s)?;
                acc = Some(match acc {
                    None => term,
                    Some(prev) => tape.add(prev, term)?,
                });
            }
            acc.ok_or_else(|| mismatch("no orders"))
        }
        FusionMode::SingleMoment(k) => sigs.signature(k).ok_or_else(|| mismatch("order not computed")),
        FusionMode::MeanEnsemble => {
            let mut acc = *sigs.signatures.first().ok_or_else(|| mismatch("no orders"))?;
            for &s in &sigs.signatures[1..] {
                acc = tape.add(acc, s)?;
            }
            tape.scale(acc, 1.0 / sigs.signatures.len() as f64)
        }
        FusionMode::Mlp => {
            let (w, b) = mlp.ok_or_else(|| mismatch("missing fusion parameters"))?;
            let joined = tape.concat_cols(&sigs.signatures)?;
            let wv = tape.param(store, w)?;
            let bv = tape.param(store, b)?;
            let z = tape.matmul(joined, wv)?;
            tape.add_row(z, bv)
        }
    }
}

/// Intermediate values of one layer.
#[derive(Debug, Clone)]
pub struct LayerOutput {
    pub output: Var,
    pub signatures: MomentSignatures,
    pub attention: Vec<Var>,
}

/// One layer: moment signatures, fusion, optional residual, then relu
/// unless `is_last`.
#[allow(clippy::too_many_arguments)]
pub fn layer_forward<'g>(
    tape: &mut Tape<'g>,
    graph: &'g SparseGraph,
    h_prev: Var,
    store: &ParamStore,
    layer: &LayerParams,
    config: &ModelConfig,
    is_last: bool,
) -> Result<LayerOutput> {
    if tape.shape(h_prev).1 != layer.input_dim {
        return Err(Error::shape(
            "layer_forward",
            format!(
                "input has {} columns, layer expects {}",
                tape.shape(h_prev).1,
                layer.input_dim
            ),
        ));
    }
    let sigs = mme_forward(tape, graph, h_prev, store, &layer.moments, config.kind, config.root_eps)?;
    let att = match (&layer.adaptor, config.fusion) {
        (Some(p), FusionMode::Attention) => attention(tape, h_prev, &sigs, store, p, config.attention_activation)?,
        (None, FusionMode::Attention) => {
            return Err(Error::Config("attention fusion without adaptor parameters".into()))
        }
        _ => Vec::new(),
    };
    let mut out = fuse(tape, &sigs, Some(&att), config.fusion, store, layer.mlp)?;
    if config.residual {
        let skip = match layer.residual_proj {
            Some(p) => {
                let w = tape.param(store, p)?;
                tape.matmul(h_prev, w)?
            }
            None if layer.input_dim == layer.output_dim => h_prev,
            None => return Err(Error::Config("residual across widths needs a projection".into())),
        };
        out = tape.add(out, skip)?;
    }
    if !is_last {
        out = tape.relu(out)?;
    }
    Ok(LayerOutput {
        output: out,
        signatures: sigs,
        attention: att,
    })
}

/// Per-layer outputs of a full forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Var,
    pub layers: Vec<LayerOutput>,
}

impl ForwardOutput {
    /// Attention weights as `[layer][order]`.
    pub fn attention(&self) -> Vec<Vec<Var>> {
        self.layers.iter().map(|l| l.attention.clone()).collect()
    }
}

/// Stacked forward pass producing `n × num_classes` logits. `dropout_rng`
/// enables dropout when the config rate is positive.
pub fn model_forward<'g>(
    tape: &mut Tape<'g>,
    graph: &'g SparseGraph,
    x: Var,
    model: &MmGnn,
    mut dropout_rng: Option<&mut StreamRng>,
) -> Result<ForwardOutput> {
    let (n, d) = tape.shape(x);
    if d != model.input_dim {
        return Err(Error::Config(format!(
            "dataset has {d} features, model expects {}",
            model.input_dim
        )));
    }
    if n != graph.num_nodes() {
        return Err(Error::shape(
            "model_forward",
            format!("{n} rows for {} nodes", graph.num_nodes()),
        ));
    }
    let mut h = x;
    let mut layers = Vec::with_capacity(model.layers.len());
    for (l, layer) in model.layers.iter().enumerate() {
        if model.config.dropout > 0.0 {
            if let Some(rng) = dropout_rng.as_deref_mut() {
                h = dropout(tape, h, model.config.dropout, rng)?;
            }
        }
        let is_last = l + 1 == model.layers.len();
        let out = layer_forward(tape, graph, h, &model.params, layer, &model.config, is_last)?;
        h = out.output;
        layers.push(out);
    }
    Ok(ForwardOutput { logits: h, layers })
}

fn dropout<'g>(tape: &mut Tape<'g>, h: Var, rate: f64, rng: &mut StreamRng) -> Result<Var> {
    use rand::Rng;
    let (n, d) = tape.shape(h);
    let keep = 1.0 - rate;
    let mask = Matrix::from_fn(n, d, |_, _| if rng.random_bool(keep) { 1.0 / keep } else { 0.0 });
    let m = tape.constant(mask)?;
    tape.mul_elem(h, m)
}

/// Logits without recording gradients to any parameter of interest.
pub fn predict(graph: &SparseGraph, x: &Matrix, model: &MmGnn) -> Result<Matrix> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone())?;
    let out = model_forward(&mut tape, graph, xv, model, None)?;
    Ok(tape.value(out.logits).clone())
}
