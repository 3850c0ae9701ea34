mod common;

use common::{dense_params, fd_max_error, norm, oracle_y_hat, rel_err};
use greed::direction::{contrastive_loss, load_checkpoint, loss_grad, save_checkpoint};
use greed::graph::LabeledPair;
use greed::{DirectionModel, ModelConfig, EPS};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn small(embed_dim: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        input_dim: 5,
        hidden_dims: vec![7],
        embed_dim,
        rng_seed: seed,
        ..ModelConfig::default()
    }
}

fn pair(s: usize, t: usize, label: u8) -> LabeledPair {
    LabeledPair::new(s, t, label).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn reversed_predictions_sum_to_one(
        seed in any::<u64>(),
        n in 3usize..=5,
        depth in 1usize..=3,
        s in 0usize..8,
        t in 0usize..8,
    ) {
        let cfg = ModelConfig { hidden_dims: vec![6; depth], ..small(n, seed) };
        let model = DirectionModel::new(8, cfg).unwrap();
        let fwd = model.forward(s, t).unwrap();
        let back = model.predict(t, s).unwrap();
        if norm(&fwd.v_r) >= EPS {
            prop_assert!((fwd.y_hat + back - 1.0).abs() <= 1e-12);
        } else {
            prop_assert_eq!((fwd.y_hat, back), (0.5, 0.5));
        }
        if s == t {
            prop_assert_eq!(fwd.y_hat, 0.5);
        }
    }

    #[test]
    fn loss_is_non_negative(y in 0.0f64..=1.0, label in 0u8..2, margin in 0.01f64..0.49) {
        let l = contrastive_loss(y, label, margin);
        prop_assert!(l >= 0.0);
        if label == 0 && y <= margin {
            prop_assert_eq!(l, 0.0);
        }
        prop_assert_eq!(contrastive_loss(1.0, 1, margin), 0.0);
        let h = 1e-7;
        prop_assume!((y - margin).abs() > 2.0 * h && y > h && y < 1.0 - h);
        let numeric = (contrastive_loss(y + h, label, margin) - contrastive_loss(y - h, label, margin)) / (2.0 * h);
        prop_assert!((loss_grad(y, label, margin) - numeric).abs() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gradients_match_oracle_differences(
        seed in any::<u64>(),
        n in 3usize..=4,
        s in 0usize..6,
        t in 0usize..6,
        label in 0u8..2,
    ) {
        prop_assume!(s != t);
        let model = DirectionModel::new(6, small(n, seed)).unwrap();
        let p = pair(s, t, label);
        let (loss, grads) = model.pair_gradient(&p).unwrap();
        prop_assert!((loss - model.loss(&p).unwrap()).abs() <= 1e-15);
        let err = fd_max_error(&model, &p, &grads.to_dense(&model), 1e-6);
        prop_assert!(err < 1e-5, "relative error {err}");
    }

    /// The two branch terms of the shared-weight gradient each match a
    /// finite difference taken through one branch only, and sum to the total.
    #[test]
    fn siamese_gradient_splits_by_branch(seed in any::<u64>(), s in 0usize..6, t in 0usize..6) {
        prop_assume!(s != t);
        let model = DirectionModel::new(6, small(3, seed)).unwrap();
        let cache = model.forward(s, t).unwrap();
        prop_assume!(norm(&cache.v_r) > 1e-6);
        let [src, dst] = model.backward_parts(&cache, 1.0).unwrap();
        let total = model.backward(&cache, 1.0).unwrap();
        let (g_src, g_dst, g_all) = (src.to_dense(&model), dst.to_dense(&model), total.to_dense(&model));
        let base = dense_params(&model);
        let h = 1e-6;
        let w1 = &base[1];
        let mut touched = [false; 2];
        let mut moves = [false; 2];
        for i in 0..w1.len() {
            let bump = |d: f64| {
                let mut p = base.clone();
                p[1][i] += d;
                p
            };
            let (plus, minus) = (bump(h), bump(-h));
            let fd_src = (oracle_y_hat(&model, &plus, &base, s, t) - oracle_y_hat(&model, &minus, &base, s, t)) / (2.0 * h);
            let fd_dst = (oracle_y_hat(&model, &base, &plus, s, t) - oracle_y_hat(&model, &base, &minus, s, t)) / (2.0 * h);
            let fd_all = (oracle_y_hat(&model, &plus, &plus, s, t) - oracle_y_hat(&model, &minus, &minus, s, t)) / (2.0 * h);
            prop_assert!(rel_err(g_src[1][i], fd_src) < 1e-5);
            prop_assert!(rel_err(g_dst[1][i], fd_dst) < 1e-5);
            prop_assert!(rel_err(g_all[1][i], fd_all) < 1e-5);
            prop_assert!((g_src[1][i] + g_dst[1][i] - g_all[1][i]).abs() <= 1e-15);
            touched[0] |= g_src[1][i].abs() > 1e-8;
            touched[1] |= g_dst[1][i].abs() > 1e-8;
            moves[0] |= fd_src.abs() > 1e-6;
            moves[1] |= fd_dst.abs() > 1e-6;
        }
        // ŷ ignores the scale of v_s and v_t, so a branch whose active units
        // cannot turn v_r is legitimately flat; only check branches that move ŷ.
        prop_assume!(moves == [true, true]);
        prop_assert_eq!(touched, [true, true]);
    }

    #[test]
    fn batch_gradient_ignores_pair_order(seed in any::<u64>(), labels in prop::collection::vec(0u8..2, 60)) {
        let model = DirectionModel::new(12, small(4, seed)).unwrap();
        let mut batch: Vec<LabeledPair> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| pair(i % 12, (i * 5 + 1) % 12, l))
            .filter(|p| p.source != p.target)
            .collect();
        let (loss, grads) = model.batch_gradient(&batch).unwrap();
        batch.shuffle(&mut greed::seed::rng(seed));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let (loss2, grads2) = pool.install(|| model.batch_gradient(&batch)).unwrap();
        prop_assert!((loss - loss2).abs() <= 1e-10);
        for (a, b) in grads.to_dense(&model).iter().flatten().zip(grads2.to_dense(&model).iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn two_node_instance_converges() {
    let pairs = [pair(0, 1, 1), pair(1, 0, 0)];
    let mut model = DirectionModel::new(
        2,
        ModelConfig {
            epochs: 1,
            ..ModelConfig::default()
        },
    )
    .unwrap();
    let mut epochs = 0;
    while model.predict(0, 1).unwrap() <= 0.9 {
        assert!(
            epochs < 500,
            "y_hat(a, b) = {}",
            model.predict(0, 1).unwrap()
        );
        model.train(&pairs).unwrap();
        epochs += 1;
    }
    assert!(model.predict(1, 0).unwrap() < 0.1 + 1e-12);
}

#[test]
fn training_lowers_loss() {
    let g = common::layered_dag(40, 5, 2, 0.2, 3);
    let pairs = greed::graph::build_direction_pairs(&g, &greed::graph::WalkConfig::default());
    let cfg = ModelConfig {
        input_dim: 16,
        hidden_dims: vec![32],
        batch_size: 32,
        learning_rate: 0.1,
        ..small(3, 8)
    };
    let mut model = DirectionModel::new(40, cfg).unwrap();
    let before = model.mean_loss(&pairs).unwrap();
    let stats = model.train_epochs(&pairs, 15).unwrap();
    assert_eq!(stats.len(), 15);
    assert!(model.mean_loss(&pairs).unwrap() < 0.5 * before);
}

#[test]
fn resuming_matches_uninterrupted_run() {
    let pairs: Vec<LabeledPair> = (0..10)
        .flat_map(|i| [pair(i, (i + 1) % 10, 1), pair((i + 1) % 10, i, 0)])
        .collect();
    let cfg = ModelConfig {
        batch_size: 4,
        input_dim: 8,
        hidden_dims: vec![8],
        ..small(3, 21)
    };
    let mut straight = DirectionModel::new(10, cfg.clone()).unwrap();
    straight.train_epochs(&pairs, 4).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let mut first = DirectionModel::new(10, cfg).unwrap();
    first.train_epochs(&pairs, 2).unwrap();
    save_checkpoint(&first, None, &path).unwrap();
    let mut resumed = load_checkpoint(&path).unwrap().model;
    assert_eq!(resumed.epochs_trained(), 2);
    resumed.train_epochs(&pairs, 2).unwrap();
    assert_eq!(resumed, straight);
}
