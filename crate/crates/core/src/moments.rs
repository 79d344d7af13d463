//! Multi-order moment embedding of neighborhoods.
//!
//! For order `k` and node `i` the raw moment is the element-wise `1/k`-th
//! signed root of either the origin moment `mean_j h_j^k` or the central
//! moment `mean_j (h_j - mu_i)^k`, with `mu_i` the neighborhood mean. Each
//! order then gets its own projection `W_k`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentKind {
    Origin,
    Central,
}

impl MomentKind {
    /// The first central moment is identically zero, so central models use
    /// the neighborhood mean at order 1.
    pub fn for_order(self, k: u32) -> MomentKind {
        if k == 1 {
            MomentKind::Origin
        } else {
            self
        }
    }
}

impl std::str::FromStr for MomentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "origin" => Ok(MomentKind::Origin),
            "central" => Ok(MomentKind::Central),
            other => Err(Error::Config(format!("unknown moment kind `{other}`"))),
        }
    }
}

/// Records the order-`k` raw moment of `h` over each neighborhood.
pub fn raw_moment<'g>(
    tape: &mut Tape<'g>,
    graph: &'g SparseGraph,
    h: Var,
    k: u32,
    kind: MomentKind,
    eps: f64,
) -> Result<Var> {
    raw_moment_with_mean(tape, graph, h, None, k, kind, eps)
}

fn raw_moment_with_mean<'g>(
    tape: &mut Tape<'g>,
    graph: &'g SparseGraph,
    h: Var,
    mean: Option<Var>,
    k: u32,
    kind: MomentKind,
    eps: f64,
) -> Result<Var> {
    if k == 0 {
        return Err(Error::InvalidArgument("moment order must be >= 1".into()));
    }
    let pre_root = match kind {
        MomentKind::Origin if k == 1 => match mean {
            Some(m) => m,
            None => tape.spmm_mean(graph, h)?,
        },
        MomentKind::Origin => {
            let p = tape.pow_elem(h, k)?;
            tape.spmm_mean(graph, p)?
        }
        MomentKind::Central if k == 1 => {
            return Err(Error::InvalidArgument(
                "the first central moment is identically zero".into(),
            ))
        }
        MomentKind::Central => {
            let mu = match mean {
                Some(m) => m,
                None => tape.spmm_mean(graph, h)?,
            };
            tape.central_power(graph, h, mu, k)?
        }
    };
    if k == 1 {
        return Ok(pre_root);
    }
    tape.signed_root(pre_root, k, eps)
}

/// Raw moment of a plain matrix, outside of any training graph.
pub fn raw_moment_values(graph: &SparseGraph, h: &Matrix, k: u32, kind: MomentKind, eps: f64) -> Result<Matrix> {
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone())?;
    let out = raw_moment(&mut tape, graph, hv, k, kind, eps)?;
    Ok(tape.value(out).clone())
}

/// Per-order projections `W_k` of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentLayerParams {
    pub orders: Vec<(u32, ParamId)>,
}

impl MomentLayerParams {
    pub fn new(orders: Vec<(u32, ParamId)>, store: &ParamStore) -> Result<Self> {
        let Some(&(_, first)) = orders.first() else {
            return Err(Error::Config("a moment layer needs at least one order".into()));
        };
        let shape = store.value(first).shape();
        if orders.iter().any(|&(_, id)| store.value(id).shape() != shape) {
            return Err(Error::Config("moment projections must share one shape".into()));
        }
        Ok(Self { orders })
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.value(self.orders[0].1).rows()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.value(self.orders[0].1).cols()
    }
}

/// Projected signatures and the pre-projection raw moments, one per order.
#[derive(Debug, Clone)]
pub struct MomentSignatures {
    pub orders: Vec<u32>,
    pub signatures: Vec<Var>,
    pub raw: Vec<Var>,
}

impl MomentSignatures {
    pub fn signature(&self, k: u32) -> Option<Var> {
        self.orders.iter().position(|&o| o == k).map(|i| self.signatures[i])
    }
}

/// `signature_k = raw_moment(h, k) · W_k` for every order of `params`.
pub fn mme_forward<'g>(
    tape: &mut Tape<'g>,
    graph: &'g SparseGraph,
    h: Var,
    store: &ParamStore,
    params: &MomentLayerParams,
    kind: MomentKind,
    eps: f64,
) -> Result<MomentSignatures> {
    let d_in = params.input_dim(store);
    if tape.shape(h).1 != d_in {
        return Err(Error::shape(
            "mme_forward",
            format!("input has {} columns, projections expect {d_in}", tape.shape(h).1),
        ));
    }
    let mean = tape.spmm_mean(graph, h)?;
    let mut out = MomentSignatures {
        orders: Vec::with_capacity(params.orders.len()),
        signatures: Vec::with_capacity(params.orders.len()),
        raw: Vec::with_capacity(params.orders.len()),
    };
    for &(k, w) in &params.orders {
        let raw = raw_moment_with_mean(tape, graph, h, Some(mean), k, kind.for_order(k), eps)?;
        let wv = tape.param(store, w)?;
        let sig = tape.matmul(raw, wv)?;
        out.orders.push(k);
        out.raw.push(raw);
        out.signatures.push(sig);
    }
    Ok(out)
}
