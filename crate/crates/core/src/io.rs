//! Plain-text dataset directories.
//!
//! Layout:
//! - `edges.tsv`: `u<TAB>v` per line, 0-based ids, `#` starts a comment.
//! - `features.csv`: a header of feature names, then one row per node in id order.
//! - `labels.tsv`: `node_id<TAB>class_id`.
//! - `split.tsv` (optional): `node_id<TAB>{train|val|test|unused}`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelVector, Role, SparseGraph, SplitMask};
use crate::tensor::Matrix;

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.tsv";
pub const SPLIT_FILE: &str = "split.tsv";

/// A loaded node-classification dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: SparseGraph,
    pub features: FeatureMatrix,
    pub labels: LabelVector,
    pub split: Option<SplitMask>,
}

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_pair<'a>(file: &str, lineno: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    let mut it = line.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(parse_err(file, lineno, format!("expected two fields, got `{line}`"))),
    }
}

fn parse_index(file: &str, lineno: usize, tok: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| parse_err(file, lineno, format!("`{tok}` is not a node index")))
}

/// Loads a dataset directory. The graph is symmetrized and stripped of
/// self-loops and duplicate edges.
pub fn load_graph(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let features = load_features(&dir.join(FEATURES_FILE))?;
    let n = features.num_nodes();
    let graph = load_edges(&dir.join(EDGES_FILE), n)?;
    let labels = load_labels(&dir.join(LABELS_FILE), n)?;
    let split_path = dir.join(SPLIT_FILE);
    let split = if split_path.exists() {
        Some(load_split(&split_path, n)?)
    } else {
        None
    };
    Ok(Dataset {
        graph,
        features,
        labels,
        split,
    })
}

fn load_features(path: &Path) -> Result<FeatureMatrix> {
    let text = read(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(FEATURES_FILE, 1, "empty file"))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let dim = names.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != dim {
            return Err(parse_err(
                FEATURES_FILE,
                i + 1,
                format!("{} cells, header has {dim}", cells.len()),
            ));
        }
        for cell in cells {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(FEATURES_FILE, i + 1, format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() {
                return Err(parse_err(FEATURES_FILE, i + 1, "non-finite value"));
            }
            data.push(v);
        }
        rows += 1;
    }
    FeatureMatrix::new(Matrix::from_vec(rows, dim, data)?, Some(names))
}

fn load_edges(path: &Path, n: usize) -> Result<SparseGraph> {
    let text = read(path)?;
    let mut edges = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let (a, b) = parse_pair(EDGES_FILE, lineno, line)?;
        let u = parse_index(EDGES_FILE, lineno, a)?;
        let v = parse_index(EDGES_FILE, lineno, b)?;
        if u >= n || v >= n {
            return Err(Error::IndexOutOfRange(format!(
                "{EDGES_FILE}:{lineno}: edge ({u}, {v}) but only {n} nodes"
            )));
        }
        edges.push((u, v));
    }
    SparseGraph::from_edges(n, edges)
}

fn load_labels(path: &Path, n: usize) -> Result<LabelVector> {
    let text = read(path)?;
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (lineno, line) in content_lines(&text) {
        let (a, b) = parse_pair(LABELS_FILE, lineno, line)?;
        let node = parse_index(LABELS_FILE, lineno, a)?;
        let class: usize = b
            .parse()
            .map_err(|_| parse_err(LABELS_FILE, lineno, format!("`{b}` is not a class id")))?;
        if node >= n {
            return Err(Error::IndexOutOfRange(format!(
                "{LABELS_FILE}:{lineno}: node {node} but only {n} nodes"
            )));
        }
        if labels[node].replace(class).is_some() {
            return Err(parse_err(
                LABELS_FILE,
                lineno,
                format!("duplicate label for node {node}"),
            ));
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(v, l)| l.ok_or_else(|| Error::Label(format!("node {v} has no label"))))
        .collect::<Result<Vec<_>>>()?;
    LabelVector::from_labels(labels)
}

fn load_split(path: &Path, n: usize) -> Result<SplitMask> {
    let text = read(path)?;
    let mut roles = vec![Role::Unused; n];
    for (lineno, line) in content_lines(&text) {
        let (a, b) = parse_pair(SPLIT_FILE, lineno, line)?;
        let node = parse_index(SPLIT_FILE, lineno, a)?;
        if node >= n {
            return Err(Error::IndexOutOfRange(format!(
                "{SPLIT_FILE}:{lineno}: node {node} but only {n} nodes"
            )));
        }
        roles[node] = b.parse()?;
    }
    SplitMask::new(roles)
}

fn create(path: PathBuf) -> Result<BufWriter<fs::File>> {
    fs::File::create(&path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io { path, source })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a dataset directory that [`load_graph`] reads back identically.
pub fn save_dataset(dir: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let path = dir.join(EDGES_FILE);
    let mut w = create(path.clone())?;
    (|| -> std::io::Result<()> {
        for (u, v) in data.graph.undirected_edges() {
            if u != v {
                writeln!(w, "{u}\t{v}")?;
            }
        }
        w.flush()
    })()
    .map_err(io_err(&path))?;

    let path = dir.join(FEATURES_FILE);
    let mut w = create(path.clone())?;
    (|| -> std::io::Result<()> {
        writeln!(w, "{}", data.features.names().join(","))?;
        let x = &data.features.values;
        for r in 0..x.rows() {
            let cells: Vec<String> = x.row(r).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    })()
    .map_err(io_err(&path))?;

    let path = dir.join(LABELS_FILE);
    let mut w = create(path.clone())?;
    (|| -> std::io::Result<()> {
        for (v, l) in data.labels.as_slice().iter().enumerate() {
            writeln!(w, "{v}\t{l}")?;
        }
        w.flush()
    })()
    .map_err(io_err(&path))?;

    if let Some(split) = &data.split {
        let path = dir.join(SPLIT_FILE);
        let mut w = create(path.clone())?;
        (|| -> std::io::Result<()> {
            for (v, r) in split.roles().iter().enumerate() {
                writeln!(w, "{v}\t{r}")?;
            }
            w.flush()
        })()
        .map_err(io_err(&path))?;
    }
    Ok(())
}
