//! Mix-moment graph neural networks: graph storage, reverse-mode autodiff,
//! multi-order moment embeddings with an attention adaptor, training and
//! dataset analysis tools.

pub mod analysis;
pub mod autodiff;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod io;
pub mod model;
pub mod moments;
pub mod params;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use graph::{FeatureMatrix, LabelVector, Role, SparseGraph, SplitMask, SplitPolicy};
pub use io::{load_graph, save_dataset, Dataset};
pub use model::{AttentionActivation, FusionMode, MmGnn, ModelConfig};
pub use moments::MomentKind;
pub use params::ParamStore;
pub use synth::{generate_dataset, generate_theorem1_graph, SyntheticSpec};
pub use tensor::Matrix;
