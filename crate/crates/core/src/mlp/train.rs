use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, auc};
use super::model::{argmax, Gradients, Head, MlpModel, Standardizer, Targets};
use crate::error::{CcError, Result};
use crate::io::LinkSplit;
use crate::rng::stage_rng;
use crate::split::{Role, SplitAssignment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Hidden layer widths; the input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Coefficient of `(l2 / 2) * sum ||W||^2`; biases are not penalized.
    pub l2: f64,
    /// `None` trains on the whole training set per step.
    pub batch_size: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Fit a per-column standardizer on training rows and store it in the model.
    pub standardize: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn node_default(seed: u64) -> Self {
        TrainConfig {
            hidden: vec![700],
            learning_rate: 1e-3,
            epochs: 500,
            l2: 1e-5,
            batch_size: None,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            standardize: true,
            seed,
        }
    }

    pub fn link_default(seed: u64) -> Self {
        TrainConfig {
            hidden: vec![16, 16],
            learning_rate: 1e-3,
            epochs: 100,
            l2: 0.0,
            batch_size: Some(128),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            standardize: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CcError::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be non-negative, got {}", self.l2));
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be at least 1".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("optimizer moments must lie in [0, 1) and epsilon be positive".into());
        }
        Ok(())
    }
}

/// Adam moment estimates for every parameter.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(model: &MlpModel, cfg: &TrainConfig) -> Self {
        let zeros = Gradients {
            weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        };
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for l in 0..model.layer_count() {
            ndarray::Zip::from(&mut model.weights[l])
                .and(&grads.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut model.biases[l])
                .and(&grads.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    /// Validation accuracy (node task) or AUC (link task); empty without validation rows.
    pub val_metric: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
}

enum Selector {
    Accuracy,
    Auc,
}

struct OwnedTargets {
    classes: Vec<usize>,
    binary: Vec<f64>,
}

impl OwnedTargets {
    fn view(&self) -> Targets<'_> {
        if self.binary.is_empty() {
            Targets::Classes(&self.classes)
        } else {
            Targets::Binary(&self.binary)
        }
    }

    fn select(&self, idx: &[usize]) -> OwnedTargets {
        if self.binary.is_empty() {
            OwnedTargets {
                classes: idx.iter().map(|&i| self.classes[i]).collect(),
                binary: Vec::new(),
            }
        } else {
            OwnedTargets {
                classes: Vec::new(),
                binary: idx.iter().map(|&i| self.binary[i]).collect(),
            }
        }
    }
}

fn val_metric(model: &MlpModel, x: ArrayView2<'_, f64>, targets: &OwnedTargets, selector: &Selector) -> Result<f64> {
    let probs = model.probabilities(x);
    match selector {
        Selector::Accuracy => {
            let pred: Vec<usize> = probs.rows().into_iter().map(argmax).collect();
            Ok(accuracy(&pred, &targets.classes))
        }
        Selector::Auc => {
            let labels: Vec<bool> = targets.binary.iter().map(|&y| y > 0.5).collect();
            auc(&probs.column(0).to_vec(), &labels)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn fit(
    x_train: ArrayView2<'_, f64>,
    y_train: OwnedTargets,
    x_val: ArrayView2<'_, f64>,
    y_val: OwnedTargets,
    head: Head,
    out_dim: usize,
    cfg: &TrainConfig,
    selector: Selector,
) -> Result<(MlpModel, History)> {
    cfg.validate()?;
    if x_train.nrows() == 0 {
        return Err(CcError::Data("no training rows".into()));
    }
    let mut widths = vec![x_train.ncols()];
    widths.extend(&cfg.hidden);
    widths.push(out_dim);
    let mut init_rng = stage_rng(cfg.seed, "mlp-init");
    let mut model = MlpModel::new(&widths, head, &mut init_rng)?;
    if cfg.standardize {
        model.standardizer = Some(Standardizer::fit(x_train));
    }
    let xt = model.prepare(x_train);
    let xv = model.prepare(x_val);
    let has_val = xv.nrows() > 0;

    let mut adam = Adam::new(&model, cfg);
    let mut batch_rng = stage_rng(cfg.seed, "mlp-batches");
    let mut order: Vec<usize> = (0..xt.nrows()).collect();
    let mut history = History {
        train_loss: Vec::with_capacity(cfg.epochs),
        val_metric: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: cfg.epochs - 1,
    };
    let mut best: Option<(f64, f64, MlpModel)> = None;

    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        match cfg.batch_size {
            Some(bs) if bs < xt.nrows() => {
                order.shuffle(&mut batch_rng);
                for chunk in order.chunks(bs) {
                    let xb = xt.select(Axis(0), chunk);
                    let yb = y_train.select(chunk);
                    let (loss, grads) = model.loss_and_grad(xb.view(), yb.view(), cfg.l2);
                    check_finite(&model, epoch, loss)?;
                    adam.step(&mut model, &grads);
                    epoch_loss += loss * chunk.len() as f64;
                }
                epoch_loss /= xt.nrows() as f64;
            }
            _ => {
                let (loss, grads) = model.loss_and_grad(xt.view(), y_train.view(), cfg.l2);
                check_finite(&model, epoch, loss)?;
                adam.step(&mut model, &grads);
                epoch_loss = loss;
            }
        }
        if !model.is_finite() {
            return Err(CcError::NonFinite {
                epoch,
                loss: epoch_loss,
                layer_norms: model.layer_norms(),
            });
        }
        history.train_loss.push(epoch_loss);
        if has_val {
            let metric = val_metric(&model, xv.view(), &y_val, &selector)?;
            let vloss = model.loss(xv.view(), y_val.view(), 0.0);
            history.val_metric.push(metric);
            history.val_loss.push(vloss);
            let improved = match &best {
                None => true,
                Some((bm, bl, _)) => metric > *bm || (metric == *bm && vloss < *bl),
            };
            if improved {
                best = Some((metric, vloss, model.clone()));
                history.best_epoch = epoch;
            }
        }
    }
    let model = best.map_or(model, |(_, _, m)| m);
    Ok((model, history))
}

fn check_finite(model: &MlpModel, epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(CcError::NonFinite {
            epoch,
            loss,
            layer_norms: model.layer_norms(),
        })
    }
}

/// Train a softmax classifier on Train rows; Val rows pick the kept epoch.
pub fn train_node_classifier(
    embeddings: ArrayView2<'_, f64>,
    labels: &[usize],
    class_count: usize,
    split: &SplitAssignment,
    cfg: &TrainConfig,
) -> Result<(MlpModel, History)> {
    if embeddings.nrows() != labels.len() || split.roles.len() != labels.len() {
        return Err(CcError::Argument(format!(
            "{} embedding rows, {} labels, {} split roles",
            embeddings.nrows(),
            labels.len(),
            split.roles.len()
        )));
    }
    let train = split.nodes_with(Role::Train);
    let val = split.nodes_with(Role::Val);
    let targets = |idx: &[usize]| OwnedTargets {
        classes: idx.iter().map(|&i| labels[i]).collect(),
        binary: Vec::new(),
    };
    fit(
        embeddings.select(Axis(0), &train).view(),
        targets(&train),
        embeddings.select(Axis(0), &val).view(),
        targets(&val),
        Head::Softmax,
        class_count,
        cfg,
        Selector::Accuracy,
    )
}

/// Predicted class (lowest index on ties) and probability row for every input row.
pub fn predict_classes(model: &MlpModel, embeddings: ArrayView2<'_, f64>) -> (Vec<usize>, Array2<f64>) {
    let x = model.prepare(embeddings);
    let probs = model.probabilities(x.view());
    let pred = probs.rows().into_iter().map(argmax).collect();
    (pred, probs)
}

/// Scale every row to unit Euclidean norm; zero rows stay zero.
pub fn normalize_rows(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

/// Element-wise products `e_u * e_v` for each pair.
pub fn pair_features(normalized: ArrayView2<'_, f64>, pairs: &[(usize, usize)]) -> Array2<f64> {
    let mut out = Array2::zeros((pairs.len(), normalized.ncols()));
    for (mut row, &(u, v)) in out.rows_mut().into_iter().zip(pairs) {
        row.assign(&(&normalized.row(u) * &normalized.row(v)));
    }
    out
}

fn labeled_pairs(pos: &[(usize, usize)], neg: &[(usize, usize)]) -> (Vec<(usize, usize)>, Vec<f64>) {
    let mut pairs = pos.to_vec();
    pairs.extend_from_slice(neg);
    let mut y = vec![1.0; pos.len()];
    y.resize(pos.len() + neg.len(), 0.0);
    (pairs, y)
}

/// Train the pair scorer on training positives and negatives; validation AUC picks the kept epoch.
pub fn train_link_predictor(
    embeddings: ArrayView2<'_, f64>,
    split: &LinkSplit,
    cfg: &TrainConfig,
) -> Result<(MlpModel, History)> {
    let normalized = normalize_rows(embeddings);
    let (train_pairs, train_y) = labeled_pairs(&split.train_pos, &split.train_neg);
    let (val_pairs, val_y) = labeled_pairs(&split.val_pos, &split.val_neg);
    let bin = |y: Vec<f64>| OwnedTargets {
        classes: Vec::new(),
        binary: y,
    };
    // An empty binary target vector would be read as class targets.
    if train_y.is_empty() {
        return Err(CcError::Data("link split has no training pairs".into()));
    }
    let has_val = val_y.contains(&1.0) && val_y.contains(&0.0);
    let (val_x, val_t) = if has_val {
        (pair_features(normalized.view(), &val_pairs), bin(val_y))
    } else {
        (Array2::zeros((0, embeddings.ncols())), bin(vec![0.0]))
    };
    fit(
        pair_features(normalized.view(), &train_pairs).view(),
        bin(train_y),
        val_x.view(),
        val_t,
        Head::Logistic,
        1,
        cfg,
        Selector::Auc,
    )
}

/// Link probability for each pair.
pub fn link_scores(model: &MlpModel, embeddings: ArrayView2<'_, f64>, pairs: &[(usize, usize)]) -> Vec<f64> {
    let normalized = normalize_rows(embeddings);
    let x = model.prepare(pair_features(normalized.view(), pairs).view());
    model.probabilities(x.view()).column(0).to_vec()
}
