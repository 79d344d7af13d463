//! Central finite-difference check of tape gradients.

use rand::seq::index;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{LabelVector, Role, SparseGraph, SplitMask};
use crate::model::{model_forward, FusionMode, MmGnn, ModelConfig};
use crate::moments::MomentKind;
use crate::params::ParamStore;
use crate::rng::SeedTree;
use crate::tensor::Matrix;
use rand_distr::{Distribution, Exp1};

/// Gradients smaller than this in both routes compare as equal.
const TINY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// `(parameter, flat index, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// `|a - n| / max(|a|, |n|)`, zero when both are below [`TINY`].
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < TINY {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Compares tape gradients of the scalar built by `f` against central
/// differences with step `eps`. With `max_coords = Some(m)` a seeded sample
/// of `m` coordinates is checked, otherwise all of them.
pub fn grad_check<'g, F>(
    store: &mut ParamStore,
    eps: f64,
    max_coords: Option<usize>,
    seed: u64,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'g>, &ParamStore) -> Result<Var>,
{
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = f(&mut tape, store)?;
        if tape.shape(out) != (1, 1) {
            return Err(Error::shape("grad_check", "closure must return a scalar"));
        }
        Ok(tape.value(out).get(0, 0))
    };

    store.zero_grads();
    {
        let mut tape = Tape::new();
        let out = f(&mut tape, store)?;
        tape.backward(out, store)?;
    }

    let coords: Vec<(usize, usize)> = store
        .iter()
        .enumerate()
        .flat_map(|(p, param)| (0..param.value.len()).map(move |i| (p, i)))
        .collect();
    let chosen: Vec<(usize, usize)> = match max_coords {
        Some(m) if m < coords.len() => {
            let mut rng = SeedTree::new(seed).stream("gradcheck");
            let mut picks = index::sample(&mut rng, coords.len(), m).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| coords[i]).collect()
        }
        _ => coords,
    };

    let ids: Vec<_> = store.ids().collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: 0,
        worst: None,
    };
    for (p, i) in chosen {
        let id = ids[p];
        let analytic = store.grad(id).as_slice()[i];
        let orig = store.value(id).as_slice()[i];
        store.value_mut(id).as_mut_slice()[i] = orig + eps;
        let plus = eval(store);
        store.value_mut(id).as_mut_slice()[i] = orig - eps;
        let minus = eval(store);
        store.value_mut(id).as_mut_slice()[i] = orig;
        let numeric = (plus? - minus?) / (2.0 * eps);
        let err = relative_error(analytic, numeric);
        report.coords_checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            if err >= report.max_rel_error {
                report.worst = Some((store.get(id).name.clone(), i, analytic, numeric));
            }
        }
    }
    Ok(report)
}

/// The fixed 12-node instance used by the model-level gradient check.
#[derive(Debug, Clone)]
pub struct CannedInstance {
    pub graph: SparseGraph,
    pub features: Matrix,
    pub labels: LabelVector,
    pub split: SplitMask,
}

/// 12 nodes, 3 classes, 4 right-skewed features drawn from `seed`.
pub fn canned_instance(seed: u64) -> Result<CannedInstance> {
    let n = 12;
    let edges = (0..n)
        .map(|i| (i, (i + 1) % n))
        .chain([(0, 5), (2, 9), (3, 7), (4, 10), (6, 11), (1, 8), (0, 3)]);
    let graph = SparseGraph::from_edges(n, edges)?;
    let exp = Exp1;
    let mut rng = SeedTree::new(seed).stream("canned");
    let features = Matrix::from_fn(n, 4, |_, _| {
        let v: f64 = exp.sample(&mut rng);
        v - 0.5
    });
    let labels = LabelVector::from_labels((0..n).map(|i| i % 3).collect())?;
    let split = SplitMask::new(
        (0..n)
            .map(|i| match i {
                0..=5 => Role::Train,
                6..=8 => Role::Val,
                _ => Role::Test,
            })
            .collect(),
    )?;
    Ok(CannedInstance {
        graph,
        features,
        labels,
        split,
    })
}

/// Model configuration of the canned check: 2 layers, `K = 3`, central
/// moments, attention fusion and residuals.
pub fn canned_model_config(seed: u64) -> ModelConfig {
    ModelConfig {
        num_layers: 2,
        hidden_dim: 5,
        max_order: 3,
        kind: MomentKind::Central,
        fusion: FusionMode::Attention,
        residual: true,
        seed,
        ..ModelConfig::default()
    }
}

/// Gradient check of the training loss of the canned model with respect to
/// every parameter (or a sample of `max_coords`).
pub fn model_grad_check(seed: u64, max_coords: Option<usize>) -> Result<GradCheckReport> {
    let inst = canned_instance(seed)?;
    let mut model = MmGnn::new(canned_model_config(seed), 4, inst.labels.num_classes())?;
    let shell = MmGnn {
        params: ParamStore::new(),
        ..model.clone()
    };
    let inst_ref = &inst;
    let shell_ref = &shell;
    grad_check(&mut model.params, 1e-6, max_coords, seed, |tape, store| {
        let probe = MmGnn {
            params: store.clone(),
            ..shell_ref.clone()
        };
        let x = tape.constant(inst_ref.features.clone())?;
        let out = model_forward(tape, &inst_ref.graph, x, &probe, None)?;
        tape.softmax_cross_entropy(out.logits, &inst_ref.labels, &inst_ref.split, Role::Train)
    })
}
