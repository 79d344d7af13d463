//! Straight-line loop implementations of the model's forward computations,
//! written against nested `Vec`s so they share no kernels with the library.

#![allow(dead_code)]

use mmgnn_core::graph::SparseGraph;
use mmgnn_core::model::{AttentionActivation, FusionMode, MmGnn};
use mmgnn_core::moments::MomentKind;
use mmgnn_core::params::{ParamId, ParamStore};
use mmgnn_core::tensor::Matrix;

pub type Rows = Vec<Vec<f64>>;

pub fn rows(m: &Matrix) -> Rows {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect())
        .collect()
}

pub fn param(store: &ParamStore, id: ParamId) -> Rows {
    rows(store.value(id))
}

pub fn matmul(a: &Rows, b: &Rows) -> Rows {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            assert_eq!(row.len(), inner);
            (0..cols).map(|j| (0..inner).map(|t| row[t] * b[t][j]).sum()).collect()
        })
        .collect()
}

fn root(x: f64, k: u32, eps: f64) -> f64 {
    if k == 1 || x == 0.0 {
        return x;
    }
    let p = 1.0 / k as f64;
    let mag = (x.abs() + eps).powf(p) - eps.powf(p);
    if x < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Order-`k` raw moment of every node and column.
pub fn raw_moment(g: &SparseGraph, h: &Rows, k: u32, kind: MomentKind, eps: f64) -> Rows {
    let d = h.first().map_or(0, Vec::len);
    (0..g.num_nodes())
        .map(|i| {
            let nb = g.neighbors(i);
            (0..d)
                .map(|c| {
                    if nb.is_empty() {
                        return 0.0;
                    }
                    let deg = nb.len() as f64;
                    let mu = nb.iter().map(|&j| h[j][c]).sum::<f64>() / deg;
                    if k == 1 {
                        return mu;
                    }
                    let centre = match kind {
                        MomentKind::Origin => 0.0,
                        MomentKind::Central => mu,
                    };
                    let m = nb.iter().map(|&j| (h[j][c] - centre).powi(k as i32)).sum::<f64>() / deg;
                    root(m, k, eps)
                })
                .collect()
        })
        .collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `a_k[i][j] = σ(Σ_t q_i[t]·W_a[t][j] + Σ_t key_k,i[t]·W_a[D+t][j])`.
pub fn attention(
    h: &Rows,
    sigs: &[Rows],
    wq: &Rows,
    wk: &Rows,
    wa: &Rows,
    activation: AttentionActivation,
) -> Vec<Rows> {
    let d = wk.len();
    let q = matmul(h, wq);
    let pre: Vec<Rows> = sigs
        .iter()
        .map(|s| {
            let key = matmul(s, wk);
            (0..h.len())
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let mut z = 0.0;
                            for t in 0..d {
                                z += q[i][t] * wa[t][j];
                            }
                            for t in 0..d {
                                z += key[i][t] * wa[d + t][j];
                            }
                            z
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    match activation {
        AttentionActivation::Sigmoid => pre
            .iter()
            .map(|p| p.iter().map(|r| r.iter().map(|&z| sigmoid(z)).collect()).collect())
            .collect(),
        AttentionActivation::Softmax => {
            let mut out = pre.clone();
            for i in 0..h.len() {
                for j in 0..d {
                    let m = pre.iter().map(|p| p[i][j]).fold(f64::NEG_INFINITY, f64::max);
                    let total: f64 = pre.iter().map(|p| (p[i][j] - m).exp()).sum();
                    for (o, p) in out.iter_mut().zip(&pre) {
                        o[i][j] = (p[i][j] - m).exp() / total;
                    }
                }
            }
            out
        }
    }
}

/// `Σ_k a_k ⊙ s_k`.
pub fn weighted_sum(att: &[Rows], sigs: &[Rows]) -> Rows {
    let n = sigs[0].len();
    let d = sigs[0][0].len();
    (0..n)
        .map(|i| {
            (0..d)
                .map(|j| att.iter().zip(sigs).map(|(a, s)| a[i][j] * s[i][j]).sum())
                .collect()
        })
        .collect()
}

/// Output of one layer of `model` and the attention weights it used.
pub fn layer(g: &SparseGraph, model: &MmGnn, l: usize, h: &Rows) -> (Rows, Vec<Rows>) {
    let cfg = &model.config;
    let lp = &model.layers[l];
    let store = &model.params;
    let sigs: Vec<Rows> = lp
        .moments
        .orders
        .iter()
        .map(|&(k, w)| matmul(&raw_moment(g, h, k, cfg.kind, cfg.root_eps), &param(store, w)))
        .collect();
    let n = h.len();
    let d = lp.output_dim;
    let mut att = Vec::new();
    let mut out = match cfg.fusion {
        FusionMode::Attention => {
            let p = lp.adaptor.expect("attention parameters");
            att = attention(
                h,
                &sigs,
                &param(store, p.query),
                &param(store, p.key),
                &param(store, p.attn),
                cfg.attention_activation,
            );
            weighted_sum(&att, &sigs)
        }
        FusionMode::SingleMoment(_) => sigs[0].clone(),
        FusionMode::MeanEnsemble => {
            let k = sigs.len() as f64;
            (0..n)
                .map(|i| (0..d).map(|j| sigs.iter().map(|s| s[i][j]).sum::<f64>() / k).collect())
                .collect()
        }
        FusionMode::Mlp => {
            let (w, b) = lp.mlp.expect("mlp parameters");
            let joined: Rows = (0..n)
                .map(|i| sigs.iter().flat_map(|s| s[i].iter().copied()).collect())
                .collect();
            let bias = param(store, b);
            matmul(&joined, &param(store, w))
                .into_iter()
                .map(|r| r.iter().zip(&bias[0]).map(|(a, c)| a + c).collect())
                .collect()
        }
    };
    if cfg.residual {
        let skip = match lp.residual_proj {
            Some(p) => matmul(h, &param(store, p)),
            None => h.clone(),
        };
        for (o, s) in out.iter_mut().zip(&skip) {
            for (a, b) in o.iter_mut().zip(s) {
                *a += b;
            }
        }
    }
    if l + 1 < model.layers.len() {
        for o in out.iter_mut().flatten() {
            *o = o.max(0.0);
        }
    }
    (out, att)
}

/// Logits of `model` on features `x`.
pub fn forward(g: &SparseGraph, model: &MmGnn, x: &Matrix) -> Rows {
    let mut h = rows(x);
    for l in 0..model.layers.len() {
        h = layer(g, model, l, &h).0;
    }
    h
}

pub fn max_abs_diff(a: &Matrix, b: &Rows) -> f64 {
    assert_eq!(a.rows(), b.len());
    let mut worst: f64 = 0.0;
    for (r, row) in b.iter().enumerate() {
        assert_eq!(a.cols(), row.len());
        for (c, &v) in row.iter().enumerate() {
            worst = worst.max((a.get(r, c) - v).abs());
        }
    }
    worst
}
