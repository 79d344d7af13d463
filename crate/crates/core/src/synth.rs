//! Synthetic graphs whose classes share a neighborhood feature mean but
//! differ in covariance, the setting where any mean-only aggregator fails.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelVector, SparseGraph};
use crate::io::Dataset;
use crate::rng::SeedTree;
use crate::tensor::Matrix;

/// Class-conditional isotropic Gaussians `N(mean_c, scale_c * I)` wired into
/// same-class neighborhoods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub nodes_per_class: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    /// `num_classes` rows of length `feature_dim`.
    pub class_means: Vec<Vec<f64>>,
    /// Variance of every coordinate, per class.
    pub class_covariance_scales: Vec<f64>,
    pub neighbors_per_node: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// All classes centred at the origin.
    pub fn identical_means(
        nodes_per_class: usize,
        feature_dim: usize,
        scales: Vec<f64>,
        neighbors_per_node: usize,
        seed: u64,
    ) -> Self {
        let num_classes = scales.len();
        Self {
            nodes_per_class,
            num_classes,
            feature_dim,
            class_means: vec![vec![0.0; feature_dim]; num_classes],
            class_covariance_scales: scales,
            neighbors_per_node,
            seed,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_class * self.num_classes
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.feature_dim == 0 {
            return Err(Error::InvalidArgument("need at least one class and one feature".into()));
        }
        if self.class_means.len() != self.num_classes || self.class_means.iter().any(|m| m.len() != self.feature_dim) {
            return Err(Error::shape(
                "SyntheticSpec",
                format!("class_means must be {}x{}", self.num_classes, self.feature_dim),
            ));
        }
        if self.class_covariance_scales.len() != self.num_classes {
            return Err(Error::shape(
                "SyntheticSpec",
                format!(
                    "{} scales for {} classes",
                    self.class_covariance_scales.len(),
                    self.num_classes
                ),
            ));
        }
        if let Some(s) = self
            .class_covariance_scales
            .iter()
            .find(|s| !(s.is_finite() && **s > 0.0))
        {
            return Err(Error::InvalidArgument(format!("covariance scale {s} is not positive")));
        }
        // Neighbors are distinct same-class nodes other than the node itself.
        if self.nodes_per_class <= self.neighbors_per_node {
            return Err(Error::InvalidArgument(format!(
                "{} nodes per class cannot supply {} distinct neighbors",
                self.nodes_per_class, self.neighbors_per_node
            )));
        }
        Ok(())
    }
}

/// Generates the graph. Node ids are class-major: class `c` owns ids
/// `c*nodes_per_class .. (c+1)*nodes_per_class`.
pub fn generate_theorem1_graph(spec: &SyntheticSpec) -> Result<(SparseGraph, FeatureMatrix, LabelVector)> {
    spec.validate()?;
    let seeds = SeedTree::new(spec.seed).child("synthetic");
    let n = spec.num_nodes();
    let per = spec.nodes_per_class;

    let mut feat_rng = seeds.stream("features");
    let mut x = Matrix::zeros(n, spec.feature_dim);
    let mut labels = Vec::with_capacity(n);
    for c in 0..spec.num_classes {
        let sd = spec.class_covariance_scales[c].sqrt();
        for i in 0..per {
            let row = x.row_mut(c * per + i);
            for (d, slot) in row.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut feat_rng);
                *slot = spec.class_means[c][d] + sd * z;
            }
            labels.push(c);
        }
    }

    let mut edge_rng = seeds.stream("edges");
    let mut edges = Vec::with_capacity(n * spec.neighbors_per_node);
    for c in 0..spec.num_classes {
        let base = c * per;
        for i in 0..per {
            for j in index::sample(&mut edge_rng, per - 1, spec.neighbors_per_node) {
                let j = if j >= i { j + 1 } else { j };
                edges.push((base + i, base + j));
            }
        }
    }
    let graph = SparseGraph::from_edges(n, edges)?;
    let names = (0..spec.feature_dim).map(|d| format!("x{d}")).collect();
    Ok((
        graph,
        FeatureMatrix::new(x, Some(names))?,
        LabelVector::new(labels, spec.num_classes)?,
    ))
}

/// [`generate_theorem1_graph`] packaged as a [`Dataset`] without a split.
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    let (graph, features, labels) = generate_theorem1_graph(spec)?;
    Ok(Dataset {
        graph,
        features,
        labels,
        split: None,
    })
}
