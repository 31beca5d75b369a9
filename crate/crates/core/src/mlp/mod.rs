//! Fully connected ReLU network trained with Adam, with softmax (node) and
//! logistic (link) heads, plus evaluation metrics and checkpoints.

mod checkpoint;
mod metrics;
mod model;
mod train;

use ndarray::ArrayView2;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use metrics::{accuracy, auc, mean_std};
pub use model::{argmax, Gradients, Head, MlpModel, Standardizer, Targets};
pub use train::{
    link_scores, normalize_rows, pair_features, predict_classes, train_link_predictor, train_node_classifier,
    Adam, History, TrainConfig,
};

/// Starting finite-difference step used by [`gradient_check`].
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Smallest step tried when a probe keeps crossing a ReLU kink.
const GRAD_CHECK_MIN_STEP: f64 = 1e-9;

/// Largest relative disagreement between the analytic gradient and central
/// differences over every parameter, on prepared inputs `x`.
///
/// Relative error is `|a - n| / max(|a| + |n|, 1e-7)`. When a probe would
/// flip a hidden ReLU the step shrinks tenfold (down to 1e-9), since a
/// difference taken across a kink does not estimate the gradient.
pub fn gradient_check(model: &MlpModel, x: ArrayView2<'_, f64>, targets: Targets<'_>, l2: f64) -> f64 {
    let (_, grads) = model.loss_and_grad(x, targets, l2);
    let analytic: Vec<f64> = grads
        .weights
        .iter()
        .zip(&grads.biases)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
        .collect();
    let base = model.flat_params();
    let pattern = model.relu_pattern(x);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut params = base.clone();
    for (i, &a) in analytic.iter().enumerate() {
        let mut step = GRAD_CHECK_STEP;
        let numeric = loop {
            let mut eval = |p: f64| {
                params[i] = p;
                probe.set_flat_params(&params).expect("same layout");
                (probe.loss(x, targets, l2), probe.relu_pattern(x) == pattern)
            };
            let (up, up_ok) = eval(base[i] + step);
            let (down, down_ok) = eval(base[i] - step);
            if (up_ok && down_ok) || step / 10.0 < GRAD_CHECK_MIN_STEP {
                break (up - down) / (2.0 * step);
            }
            step /= 10.0;
        };
        params[i] = base[i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-7);
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::LinkSplit;
    use crate::rng::stage_rng;
    use crate::split::{Role, SplitAssignment};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn roles(n_train: usize, n_val: usize, n_test: usize) -> SplitAssignment {
        let mut roles = vec![Role::Train; n_train];
        roles.extend(vec![Role::Val; n_val]);
        roles.extend(vec![Role::Test; n_test]);
        SplitAssignment {
            roles,
            seed: 0,
            undersized_classes: vec![],
        }
    }

    fn small_model(seed: u64, widths: &[usize], head: Head) -> MlpModel {
        MlpModel::new(widths, head, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn random_x(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn gradient_check_steps_inside_relu_kinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut model = small_model(2, &[2, 3, 2], Head::Softmax);
        let x = random_x(&mut rng, 4, 2);
        let y = [0, 1, 1, 0];
        // Park hidden unit 0 of sample 0 three micro-units above its kink.
        let mut p = model.flat_params();
        let z = x[[0, 0]] * p[0] + x[[0, 1]] * p[3];
        p[6] = 3e-6 - z;
        model.set_flat_params(&p).unwrap();
        assert!(gradient_check(&model, x.view(), Targets::Classes(&y), 0.0) < 1e-4);
    }

    #[test]
    fn gradient_check_fresh_and_trained() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (widths, l2) in [(vec![5, 7, 3], 0.0), (vec![4, 6, 5, 3], 1e-2), (vec![6, 4], 1e-5)] {
            let mut model = small_model(1, &widths, Head::Softmax);
            let x = random_x(&mut rng, 9, widths[0]);
            let y: Vec<usize> = (0..9).map(|i| i % widths[widths.len() - 1]).collect();
            let err = gradient_check(&model, x.view(), Targets::Classes(&y), l2);
            assert!(err < 1e-4, "fresh {widths:?}: {err}");
            let cfg = TrainConfig { learning_rate: 1e-2, l2, ..TrainConfig::node_default(0) };
            let mut adam = Adam::new(&model, &cfg);
            for _ in 0..10 {
                let (_, g) = model.loss_and_grad(x.view(), Targets::Classes(&y), l2);
                adam.step(&mut model, &g);
            }
            let err = gradient_check(&model, x.view(), Targets::Classes(&y), l2);
            assert!(err < 1e-4, "trained {widths:?}: {err}");
        }
        let model = small_model(2, &[5, 16, 16, 1], Head::Logistic);
        let x = random_x(&mut rng, 12, 5);
        let y: Vec<f64> = (0..12).map(|i| f64::from(u8::from(i % 3 == 0))).collect();
        assert!(gradient_check(&model, x.view(), Targets::Binary(&y), 0.0) < 1e-4);
    }

    #[test]
    fn zero_input_bias_gradient_is_softmax_residual() {
        let model = small_model(3, &[4, 8, 3], Head::Softmax);
        let x = Array2::zeros((6, 4));
        let y = [0, 0, 0, 1, 2, 2];
        let (_, g) = model.loss_and_grad(x.view(), Targets::Classes(&y), 0.0);
        let counts = [3.0, 1.0, 2.0];
        for c in 0..3 {
            let expect = (6.0 * (1.0 / 3.0) - counts[c]) / 6.0;
            assert!((g.biases[1][c] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn l2_step_shrinks_every_weight() {
        let cfg = TrainConfig::node_default(0);
        let mut model = small_model(4, &[20, 700, 7], Head::Softmax);
        let before = model.clone();
        let mut adam = Adam::new(&model, &cfg);
        let grads = model.l2_gradient(cfg.l2);
        adam.step(&mut model, &grads);
        for (w0, w1) in before.weights.iter().zip(&model.weights) {
            for (a, b) in w0.iter().zip(w1.iter()) {
                if *a != 0.0 {
                    assert!(b.abs() < a.abs(), "{a} -> {b}");
                }
            }
        }
    }

    #[test]
    fn equal_logits_pick_class_zero() {
        let mut model = small_model(5, &[3, 4], Head::Softmax);
        model.weights[0].fill(0.0);
        let (pred, probs) = predict_classes(&model, Array2::from_elem((2, 3), 1.0).view());
        assert_eq!(pred, vec![0, 0]);
        assert!((probs.row(0).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_hot_logits_win() {
        let mut model = small_model(6, &[3, 3], Head::Softmax);
        model.weights[0] = Array2::eye(3) * 60.0;
        let (pred, probs) = predict_classes(&model, Array2::eye(3).view());
        assert_eq!(pred, vec![0, 1, 2]);
        for c in 0..3 {
            assert!(probs[[c, c]] > 1.0 - 1e-12);
        }
    }

    #[test]
    fn argmax_matches_direct_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = small_model(7, &[6, 9, 5], Head::Softmax);
        let x = random_x(&mut rng, 40, 6);
        let (pred, probs) = predict_classes(&model, x.view());
        for i in 0..40 {
            let mut hidden = vec![0.0; 9];
            for (h, slot) in hidden.iter_mut().enumerate() {
                let mut z = model.biases[0][h];
                for k in 0..6 {
                    z += x[[i, k]] * model.weights[0][[k, h]];
                }
                *slot = z.max(0.0);
            }
            let mut best = (0, f64::NEG_INFINITY);
            for c in 0..5 {
                let mut z = model.biases[1][c];
                for (h, &a) in hidden.iter().enumerate() {
                    z += a * model.weights[1][[h, c]];
                }
                if z > best.1 {
                    best = (c, z);
                }
            }
            assert_eq!(pred[i], best.0);
            assert!((probs.row(i).sum() - 1.0).abs() < 1e-6);
        }
    }

    fn blobs(seed: u64, n: usize, sep: f64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            let center = if labels[i] == 0 { -sep } else { sep };
            center + rng.random_range(-1.0..1.0)
        });
        (x, labels)
    }

    #[test]
    fn separable_blobs_fit_in_50_epochs() {
        let (x, y) = blobs(8, 200, 2.0);
        let split = roles(200, 0, 0);
        let cfg = TrainConfig { epochs: 50, ..TrainConfig::node_default(1) };
        let (model, _) = train_node_classifier(x.view(), &y, 2, &split, &cfg).unwrap();
        let (pred, _) = predict_classes(&model, x.view());
        assert_eq!(accuracy(&pred, &y), 1.0);
    }

    #[test]
    fn xor_is_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 400;
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let a = rng.random::<bool>();
            let b = rng.random::<bool>();
            x[[i, 0]] = if a { 1.0 } else { -1.0 } + rng.random_range(-0.3..0.3);
            x[[i, 1]] = if b { 1.0 } else { -1.0 } + rng.random_range(-0.3..0.3);
            y.push(usize::from(a ^ b));
        }
        let split = roles(240, 80, 80);
        let (model, _) = train_node_classifier(x.view(), &y, 2, &split, &TrainConfig::node_default(2)).unwrap();
        let (pred, _) = predict_classes(&model, x.view());
        let test: Vec<usize> = (320..400).collect();
        let acc = accuracy(&test.iter().map(|&i| pred[i]).collect::<Vec<_>>(), &test.iter().map(|&i| y[i]).collect::<Vec<_>>());
        assert!(acc > 0.95, "XOR accuracy {acc}");
    }

    #[test]
    fn training_is_bit_reproducible() {
        let (x, y) = blobs(10, 120, 0.5);
        let split = roles(60, 30, 30);
        let cfg = TrainConfig { epochs: 40, hidden: vec![32], batch_size: Some(16), ..TrainConfig::node_default(5) };
        let (a, ha) = train_node_classifier(x.view(), &y, 2, &split, &cfg).unwrap();
        let (b, hb) = train_node_classifier(x.view(), &y, 2, &split, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        let other = TrainConfig { seed: 6, ..cfg };
        let (c, _) = train_node_classifier(x.view(), &y, 2, &split, &other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn divergence_is_reported() {
        let x = ndarray::array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.0]];
        let y = vec![0, 1, 0, 1];
        let cfg = TrainConfig { learning_rate: 1e300, epochs: 5, ..TrainConfig::node_default(0) };
        let r = train_node_classifier(x.view(), &y, 2, &roles(4, 0, 0), &cfg);
        assert!(matches!(r, Err(crate::CcError::NonFinite { .. })), "{r:?}");
    }

    fn orthogonal_link_setup() -> (Array2<f64>, LinkSplit) {
        // 8 groups of 6 nodes; each group owns one coordinate.
        let groups = 8;
        let per = 6;
        let n = groups * per;
        let mut rng = stage_rng(1, "test");
        let emb = Array2::from_shape_fn((n, groups), |(i, j)| if i / per == j { rng.random_range(0.5..1.5) } else { 0.0 });
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if u / per == v / per {
                    pos.push((u, v));
                } else {
                    neg.push((u, v));
                }
            }
        }
        use rand::seq::SliceRandom;
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        neg.truncate(pos.len());
        let (a, b) = (pos.len() * 85 / 100, pos.len() * 90 / 100);
        let split = LinkSplit {
            train_pos: pos[..a].to_vec(),
            val_pos: pos[a..b].to_vec(),
            test_pos: pos[b..].to_vec(),
            train_neg: neg[..a].to_vec(),
            val_neg: neg[a..b].to_vec(),
            test_neg: neg[b..].to_vec(),
            seed: 1,
        };
        (emb, split)
    }

    #[test]
    fn orthogonal_embeddings_separate_links() {
        let (emb, split) = orthogonal_link_setup();
        let (model, _) = train_link_predictor(emb.view(), &split, &TrainConfig::link_default(3)).unwrap();
        let mut pairs = split.test_pos.clone();
        pairs.extend(&split.test_neg);
        let labels: Vec<bool> = (0..pairs.len()).map(|i| i < split.test_pos.len()).collect();
        let scores = link_scores(&model, emb.view(), &pairs);
        assert!(scores.iter().all(|&s| s > 0.0 && s < 1.0));
        assert!(auc(&scores, &labels).unwrap() > 0.99);
    }

    #[test]
    fn link_scores_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let emb = random_x(&mut rng, 30, 7);
        let model = small_model(13, &[7, 16, 16, 1], Head::Logistic);
        let pairs: Vec<(usize, usize)> = (0..29).map(|i| (i, i + 1)).collect();
        let flipped: Vec<(usize, usize)> = pairs.iter().map(|&(u, v)| (v, u)).collect();
        assert_eq!(link_scores(&model, emb.view(), &pairs), link_scores(&model, emb.view(), &flipped));
    }

    #[test]
    fn checkpoint_round_trip() {
        let (x, y) = blobs(14, 60, 1.0);
        let cfg = TrainConfig { epochs: 5, hidden: vec![8, 8], ..TrainConfig::node_default(1) };
        let (model, _) = train_node_classifier(x.view(), &y, 2, &roles(40, 20, 0), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &model, Some(&cfg)).unwrap();
        let (back, back_cfg) = load_checkpoint(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(back_cfg, Some(cfg));
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let x = ndarray::array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(x.view());
        assert_eq!(s.scale[1], 1.0);
        assert_eq!(s.apply(x.view()), ndarray::array![[-1.0, 0.0], [1.0, 0.0]]);
    }
}
