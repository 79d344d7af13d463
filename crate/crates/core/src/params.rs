//! Learnable parameters and the plain-text checkpoint format.
//!
//! Checkpoint layout, one record per parameter:
//!
//! ```text
//! param <name> <rows> <cols>
//! <row 0 values, space separated>
//! ...
//! ```
//!
//! Values are written with 17 significant digits, so a save/load cycle is
//! bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }
}

/// Ordered collection of parameters. Ids index into insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.params.push(Parameter::new(name, value));
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].grad
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn snapshot(&self) -> Vec<Matrix> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Matrix]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::shape("ParamStore::restore", "parameter count mismatch"));
        }
        for (p, v) in self.params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(Error::shape("ParamStore::restore", p.name.clone()));
            }
            p.value = v.clone();
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.params {
            let _ = writeln!(out, "param {} {} {}", p.name, p.value.rows(), p.value.cols());
            for r in 0..p.value.rows() {
                let row: Vec<String> = p.value.row(r).iter().map(|v| format!("{v:.16e}")).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            file: "checkpoint".into(),
            line,
            message: msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut store = ParamStore::new();
        while let Some((i, header)) = lines.next() {
            let parts: Vec<&str> = header.split_whitespace().collect();
            let [tag, name, rows, cols] = parts.as_slice() else {
                return Err(err(i + 1, format!("bad header `{header}`")));
            };
            if *tag != "param" {
                return Err(err(i + 1, format!("expected `param`, got `{tag}`")));
            }
            let rows: usize = rows.parse().map_err(|_| err(i + 1, "bad row count".into()))?;
            let cols: usize = cols.parse().map_err(|_| err(i + 1, "bad column count".into()))?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (j, line) = lines
                    .next()
                    .ok_or_else(|| err(i + 1, format!("truncated parameter {name}")))?;
                let before = data.len();
                for tok in line.split_whitespace() {
                    data.push(
                        tok.parse::<f64>()
                            .map_err(|_| err(j + 1, format!("bad value `{tok}`")))?,
                    );
                }
                if data.len() - before != cols {
                    return Err(err(j + 1, format!("expected {cols} values")));
                }
            }
            store.add(*name, Matrix::from_vec(rows, cols, data)?);
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    /// Copies values from `other`, matching parameters by name and shape.
    pub fn load_values_from(&mut self, other: &ParamStore) -> Result<()> {
        for p in &mut self.params {
            let id = other
                .find(&p.name)
                .ok_or_else(|| Error::Config(format!("checkpoint lacks parameter {}", p.name)))?;
            let v = other.value(id);
            if v.shape() != p.value.shape() {
                return Err(Error::shape("load_values_from", p.name.clone()));
            }
            p.value = v.clone();
        }
        Ok(())
    }
}

/// Glorot/Xavier uniform initialisation: `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-a..a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn checkpoint_round_trip_is_bit_exact(vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 6)) {
            let mut s = ParamStore::new();
            s.add("w", Matrix::from_vec(2, 3, vals).unwrap());
            s.add("b", Matrix::from_vec(1, 1, vec![-0.0]).unwrap());
            let back = ParamStore::from_text(&s.to_text()).unwrap();
            for (a, b) in s.iter().zip(back.iter()) {
                prop_assert_eq!(&a.name, &b.name);
                let bits_a: Vec<u64> = a.value.as_slice().iter().map(|v| v.to_bits()).collect();
                let bits_b: Vec<u64> = b.value.as_slice().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(bits_a, bits_b);
            }
        }
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = SeedTree::new(1).stream("init");
        let w = glorot_uniform(10, 6, &mut rng);
        let a = (6.0f64 / 16.0).sqrt();
        assert!(w.as_slice().iter().all(|v| v.abs() < a));
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        assert!(ParamStore::from_text("param w 2 2\n1 2\n").is_err());
        assert!(ParamStore::from_text("param w 1 2\n1 2 3\n").is_err());
    }
}
