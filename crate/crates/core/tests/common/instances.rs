//! Seeded random graphs, features and model configurations for tests.

#![allow(dead_code)]

use mmgnn_core::graph::SparseGraph;
use mmgnn_core::model::{AttentionActivation, FusionMode, MmGnn, ModelConfig};
use mmgnn_core::moments::MomentKind;
use mmgnn_core::rng::SeedTree;
use mmgnn_core::tensor::Matrix;
use rand::Rng;

pub struct Instance {
    pub graph: SparseGraph,
    pub features: Matrix,
    pub model: MmGnn,
}

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> SparseGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    SparseGraph::from_edges(n, edges).expect("valid edges")
}

/// A small random instance: at most 10 nodes and 4 feature columns, any
/// fusion mode, moment kind and depth.
pub fn small_instance(seed: u64) -> Instance {
    let mut rng = SeedTree::new(seed).stream("instance");
    let n = rng.random_range(2..=10);
    let d = rng.random_range(1..=4);
    let graph = random_graph(&mut rng, n, 0.4);
    let features = Matrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
    let max_order = rng.random_range(1..=3);
    let fusion = match rng.random_range(0..4) {
        0 => FusionMode::Mlp,
        1 => FusionMode::MeanEnsemble,
        2 => FusionMode::SingleMoment(rng.random_range(1..=max_order)),
        _ => FusionMode::Attention,
    };
    let config = ModelConfig {
        num_layers: rng.random_range(1..=2),
        hidden_dim: rng.random_range(1..=4),
        max_order,
        kind: if rng.random_bool(0.5) {
            MomentKind::Origin
        } else {
            MomentKind::Central
        },
        fusion,
        residual: rng.random_bool(0.5),
        root_eps: if rng.random_bool(0.5) { 1e-6 } else { 0.0 },
        attention_activation: if rng.random_bool(0.8) {
            AttentionActivation::Sigmoid
        } else {
            AttentionActivation::Softmax
        },
        dropout: 0.0,
        seed,
    };
    let classes = rng.random_range(2..=3);
    let model = MmGnn::new(config, d, classes).expect("valid config");
    Instance { graph, features, model }
}
