mod common {
    pub mod instances;
    pub mod oracle;
}

use common::instances::small_instance;
use common::oracle::{self, max_abs_diff, rows};
use mmgnn_core::autodiff::{spmm_mean, Tape};
use mmgnn_core::model::{attention, fuse, model_forward, AttentionActivation, FusionMode};
use mmgnn_core::moments::{mme_forward, raw_moment, MomentKind};
use mmgnn_core::rng::SeedTree;
use mmgnn_core::tensor::Matrix;
use mmgnn_core::{MmGnn, ModelConfig};
use rand::Rng;

const TOL: f64 = 1e-10;

#[test]
fn first_layer_pieces_match_loop_oracle() {
    for seed in 0..100 {
        let inst = small_instance(seed);
        let cfg = &inst.model.config;
        let lp = &inst.model.layers[0];
        let store = &inst.model.params;
        let mut tape = Tape::new();
        let x = tape.constant(inst.features.clone()).unwrap();
        let sigs = mme_forward(&mut tape, &inst.graph, x, store, &lp.moments, cfg.kind, cfg.root_eps).unwrap();

        let h = rows(&inst.features);
        let expect_sigs: Vec<_> = lp
            .moments
            .orders
            .iter()
            .map(|&(k, w)| {
                oracle::matmul(
                    &oracle::raw_moment(&inst.graph, &h, k, cfg.kind, cfg.root_eps),
                    &oracle::param(store, w),
                )
            })
            .collect();
        for (s, e) in sigs.signatures.iter().zip(&expect_sigs) {
            assert!(max_abs_diff(tape.value(*s), e) < TOL, "seed {seed}: signature");
        }

        if let (Some(p), FusionMode::Attention) = (lp.adaptor, cfg.fusion) {
            let att = attention(&mut tape, x, &sigs, store, &p, cfg.attention_activation).unwrap();
            let expect = oracle::attention(
                &h,
                &expect_sigs,
                &oracle::param(store, p.query),
                &oracle::param(store, p.key),
                &oracle::param(store, p.attn),
                cfg.attention_activation,
            );
            for (a, e) in att.iter().zip(&expect) {
                assert!(max_abs_diff(tape.value(*a), e) < TOL, "seed {seed}: attention");
                let upper_ok = |v: f64| match cfg.attention_activation {
                    AttentionActivation::Sigmoid => v < 1.0,
                    AttentionActivation::Softmax => v <= 1.0,
                };
                assert!(tape.value(*a).as_slice().iter().all(|&v| v > 0.0 && upper_ok(v)));
            }
            let fused = fuse(&mut tape, &sigs, Some(&att), cfg.fusion, store, None).unwrap();
            let expect_fused = oracle::weighted_sum(&expect, &expect_sigs);
            assert!(
                max_abs_diff(tape.value(fused), &expect_fused) < TOL,
                "seed {seed}: fuse"
            );
        }

        let out = model_forward(&mut tape, &inst.graph, x, &inst.model, None).unwrap();
        let expect = oracle::forward(&inst.graph, &inst.model, &inst.features);
        assert!(
            max_abs_diff(tape.value(out.logits), &expect) < TOL,
            "seed {seed}: model"
        );
    }
}

#[test]
fn fuse_with_random_attention_matches_direct_sum() {
    for seed in 0..20 {
        let inst = small_instance(1000 + seed);
        let cfg = ModelConfig {
            max_order: 3,
            fusion: FusionMode::Attention,
            ..inst.model.config.clone()
        };
        let model = MmGnn::new(cfg.clone(), inst.features.cols(), 2).unwrap();
        let lp = &model.layers[0];
        let mut tape = Tape::new();
        let x = tape.constant(inst.features.clone()).unwrap();
        let sigs = mme_forward(
            &mut tape,
            &inst.graph,
            x,
            &model.params,
            &lp.moments,
            cfg.kind,
            cfg.root_eps,
        )
        .unwrap();
        let mut rng = SeedTree::new(seed).stream("att");
        let (n, d) = tape.shape(sigs.signatures[0]);
        let att_m: Vec<Matrix> = (0..3).map(|_| Matrix::from_fn(n, d, |_, _| rng.random())).collect();
        let att: Vec<_> = att_m.iter().map(|m| tape.constant(m.clone()).unwrap()).collect();
        let fused = fuse(&mut tape, &sigs, Some(&att), FusionMode::Attention, &model.params, None).unwrap();
        let s: Vec<_> = sigs.signatures.iter().map(|v| rows(tape.value(*v))).collect();
        let a: Vec<_> = att_m.iter().map(rows).collect();
        assert!(max_abs_diff(tape.value(fused), &oracle::weighted_sum(&a, &s)) < TOL);
    }
}

#[test]
fn two_layer_model_on_twelve_nodes_matches_straight_line_forward() {
    let inst = mmgnn_core::gradcheck::canned_instance(3).unwrap();
    for fusion in [
        FusionMode::Attention,
        FusionMode::Mlp,
        FusionMode::MeanEnsemble,
        FusionMode::SingleMoment(2),
    ] {
        let cfg = ModelConfig {
            num_layers: 2,
            hidden_dim: 6,
            fusion,
            seed: 11,
            ..ModelConfig::default()
        };
        let model = MmGnn::new(cfg, 4, 3).unwrap();
        let logits = mmgnn_core::model::predict(&inst.graph, &inst.features, &model).unwrap();
        let expect = oracle::forward(&inst.graph, &model, &inst.features);
        assert!(max_abs_diff(&logits, &expect) < TOL, "{fusion}");
    }
}

#[test]
fn first_origin_moment_is_bitwise_mean_aggregation() {
    for seed in 0..50 {
        let mut rng = SeedTree::new(seed).stream("mean");
        let n = rng.random_range(1..=40);
        let g = common::instances::random_graph(&mut rng, n, 0.15);
        let h = Matrix::from_fn(n, 3, |_, _| rng.random_range(-10.0..10.0));
        let mut tape = Tape::new();
        let hv = tape.constant(h.clone()).unwrap();
        let m = raw_moment(&mut tape, &g, hv, 1, MomentKind::Origin, 0.0).unwrap();
        let expect = spmm_mean(&g, &h).unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(tape.value(m)), bits(&expect));
    }
}
