//! Graph storage, node features, labels and train/val/test splits.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::tensor::Matrix;

/// Symmetric adjacency in CSR form.
///
/// Rows hold strictly increasing neighbor ids, no self-loops unless added
/// explicitly, and every edge is stored in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    pub(crate) num_nodes: usize,
    pub(crate) row_offsets: Vec<usize>,
    pub(crate) col_indices: Vec<usize>,
}

impl SparseGraph {
    /// Builds a symmetric graph from an undirected edge list. Self-loops and
    /// duplicates are dropped.
    pub fn from_edges(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::IndexOutOfRange(format!(
                    "edge ({u}, {v}) with {num_nodes} nodes"
                )));
            }
            if u != v {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        Ok(Self::from_directed_pairs(num_nodes, pairs))
    }

    fn from_directed_pairs(num_nodes: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_offsets = vec![0usize; num_nodes + 1];
        for &(u, _) in &pairs {
            row_offsets[u + 1] += 1;
        }
        for i in 0..num_nodes {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = pairs.into_iter().map(|(_, v)| v).collect();
        Self {
            num_nodes,
            row_offsets,
            col_indices,
        }
    }

    /// Validates raw CSR arrays against the storage invariants.
    pub fn from_csr(num_nodes: usize, row_offsets: Vec<usize>, col_indices: Vec<usize>) -> Result<Self> {
        let g = Self {
            num_nodes,
            row_offsets,
            col_indices,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        if self.row_offsets.len() != n + 1 || self.row_offsets[0] != 0 {
            return Err(Error::InvalidArgument(
                "row_offsets must have length n+1 and start at 0".into(),
            ));
        }
        if self.row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("row_offsets must be non-decreasing".into()));
        }
        if self.row_offsets[n] != self.col_indices.len() {
            return Err(Error::InvalidArgument(
                "row_offsets[n] must equal the edge count".into(),
            ));
        }
        for v in 0..n {
            let nb = self.neighbors(v);
            if nb.iter().any(|&u| u >= n) {
                return Err(Error::IndexOutOfRange(format!("neighbor of node {v}")));
            }
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "neighbors of node {v} are not strictly increasing"
                )));
            }
            for &u in nb {
                if self.neighbors(u).binary_search(&v).is_err() {
                    return Err(Error::InvalidArgument(format!("edge ({v}, {u}) has no reverse")));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored (directed) entries; each undirected edge counts twice.
    #[inline]
    pub fn num_edges(&self) -> usize {
        self.col_indices.len()
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.row_offsets[v + 1] - self.row_offsets[v]
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    /// Undirected edges with `u < v` (self-loops as `u == v`), in CSR order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| u <= v).map(move |&v| (u, v)))
    }

    /// Copy with a self-loop on every node.
    pub fn with_self_loops(&self) -> Self {
        let mut pairs: Vec<(usize, usize)> = (0..self.num_nodes)
            .flat_map(|u| self.neighbors(u).iter().map(move |&v| (u, v)))
            .collect();
        pairs.extend((0..self.num_nodes).map(|v| (v, v)));
        Self::from_directed_pairs(self.num_nodes, pairs)
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.num_nodes)?;
        let pairs = (0..self.num_nodes)
            .flat_map(|u| self.neighbors(u).iter().map(move |&v| (perm[u], perm[v])))
            .collect();
        Ok(Self::from_directed_pairs(self.num_nodes, pairs))
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidArgument("permutation length mismatch".into()));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
    }
    Ok(())
}

/// Node feature matrix `X` (one row per node).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub feature_names: Option<Vec<String>>,
}

impl FeatureMatrix {
    pub fn new(values: Matrix, feature_names: Option<Vec<String>>) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::InvalidArgument(
                "feature matrix needs at least one column".into(),
            ));
        }
        if !values.all_finite() {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        if let Some(names) = &feature_names {
            if names.len() != values.cols() {
                return Err(Error::shape(
                    "FeatureMatrix::new",
                    format!("{} names for {} columns", names.len(), values.cols()),
                ));
            }
        }
        Ok(Self { values, feature_names })
    }

    pub fn num_nodes(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn names(&self) -> Vec<String> {
        match &self.feature_names {
            Some(n) => n.clone(),
            None => (0..self.dim()).map(|d| format!("f{d}")).collect(),
        }
    }
}

/// Class label per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    /// Every class in `0..num_classes` must appear at least once.
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let mut counts = vec![0usize; num_classes];
        for (node, &l) in labels.iter().enumerate() {
            if l >= num_classes {
                return Err(Error::Label(format!(
                    "node {node} has label {l}, expected < {num_classes}"
                )));
            }
            counts[l] += 1;
        }
        if let Some(c) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Label(format!("class {c} has no nodes")));
        }
        Ok(Self { labels, num_classes })
    }

    /// Infers `num_classes` as `max + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        Self::new(labels, k)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, v: usize) -> usize {
        self.labels[v]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.len())?;
        let mut labels = vec![0; self.len()];
        for (v, &p) in perm.iter().enumerate() {
            labels[p] = self.labels[v];
        }
        Ok(Self {
            labels,
            num_classes: self.num_classes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
    Unused,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Val => "val",
            Role::Test => "test",
            Role::Unused => "unused",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "val" => Ok(Role::Val),
            "test" => Ok(Role::Test),
            "unused" => Ok(Role::Unused),
            other => Err(Error::Split(format!("unknown role `{other}`"))),
        }
    }
}

/// Role of every node. Train, val and test are all non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMask {
    roles: Vec<Role>,
}

impl SplitMask {
    pub fn new(roles: Vec<Role>) -> Result<Self> {
        for r in [Role::Train, Role::Val, Role::Test] {
            if !roles.contains(&r) {
                return Err(Error::Split(format!("no {r} nodes")));
            }
        }
        Ok(Self { roles })
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn role(&self, v: usize) -> Role {
        self.roles[v]
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn indices(&self, role: Role) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, role: Role) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }
}

/// How to assign split roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitPolicy {
    /// Fixed training nodes per class, then fixed-size val/test sets drawn
    /// from the remaining nodes.
    PerClass {
        train_per_class: usize,
        val_total: usize,
        test_total: usize,
    },
    /// Fractions of all nodes.
    Ratio { train: f64, val: f64, test: f64 },
}

/// Deterministic split under a fixed seed.
pub fn make_split(labels: &LabelVector, policy: &SplitPolicy, seed: u64) -> Result<SplitMask> {
    let mut rng = SeedTree::new(seed).stream("split");
    let n = labels.len();
    let mut roles = vec![Role::Unused; n];
    match *policy {
        SplitPolicy::PerClass {
            train_per_class,
            val_total,
            test_total,
        } => {
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.num_classes()];
            for (v, &l) in labels.as_slice().iter().enumerate() {
                by_class[l].push(v);
            }
            let mut rest = Vec::new();
            for (c, members) in by_class.iter_mut().enumerate() {
                if members.len() < train_per_class {
                    return Err(Error::Split(format!(
                        "class {c} has {} nodes, fewer than {train_per_class} requested",
                        members.len()
                    )));
                }
                members.shuffle(&mut rng);
                for &v in &members[..train_per_class] {
                    roles[v] = Role::Train;
                }
                rest.extend_from_slice(&members[train_per_class..]);
            }
            if rest.len() < val_total + test_total {
                return Err(Error::Split(format!(
                    "{} nodes left for {val_total} val + {test_total} test",
                    rest.len()
                )));
            }
            rest.sort_unstable();
            rest.shuffle(&mut rng);
            for &v in &rest[..val_total] {
                roles[v] = Role::Val;
            }
            for &v in &rest[val_total..val_total + test_total] {
                roles[v] = Role::Test;
            }
        }
        SplitPolicy::Ratio { train, val, test } => {
            if [train, val, test].iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(Error::Split("ratios must lie in [0, 1]".into()));
            }
            if train + val + test > 1.0 + 1e-9 {
                return Err(Error::Split(format!("ratios sum to {} > 1", train + val + test)));
            }
            let n_train = (train * n as f64).round() as usize;
            let n_val = ((val * n as f64).round() as usize).min(n - n_train);
            let n_test = ((test * n as f64).round() as usize).min(n - n_train - n_val);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for (i, &v) in order.iter().enumerate() {
                roles[v] = if i < n_train {
                    Role::Train
                } else if i < n_train + n_val {
                    Role::Val
                } else if i < n_train + n_val + n_test {
                    Role::Test
                } else {
                    Role::Unused
                };
            }
        }
    }
    SplitMask::new(roles)
}
