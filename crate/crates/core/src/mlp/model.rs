use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};

/// Output nonlinearity and matching loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Softmax over classes, cross-entropy loss.
    Softmax,
    /// Single sigmoid unit, binary cross-entropy loss.
    Logistic,
}

/// Per-column affine input normalization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Zero-variance columns keep unit scale.
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let m = x.nrows().max(1) as f64;
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
        let scale = x
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(col, &mu)| {
                let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m;
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer {
            mean: mean.to_vec(),
            scale,
        }
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, mu), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - mu) / s;
            }
        }
        out
    }
}

/// Supervision for one batch.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes(&'a [usize]),
    Binary(&'a [f64]),
}

impl Targets<'_> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(t) => t.len(),
            Targets::Binary(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fully connected ReLU network. `weights[l]` is `fan_in x fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub widths: Vec<usize>,
    pub head: Head,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub standardizer: Option<Standardizer>,
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn relu_inplace(z: &mut Array2<f64>) {
    z.mapv_inplace(|v| v.max(0.0));
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases. `widths` runs input to output.
    pub fn new<R: Rng>(widths: &[usize], head: Head, rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(CcError::Argument(format!("invalid layer widths {widths:?}")));
        }
        let out = *widths.last().expect("len >= 2");
        match head {
            Head::Logistic if out != 1 => {
                return Err(CcError::Argument("logistic head needs a single output".into()))
            }
            Head::Softmax if out < 1 => unreachable!(),
            _ => {}
        }
        let mut weights = Vec::with_capacity(widths.len() - 1);
        let mut biases = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit)));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(MlpModel {
            widths: widths.to_vec(),
            head,
            weights,
            biases,
            standardizer: None,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn layer_norms(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// Apply the stored standardizer, if any.
    pub fn prepare(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match &self.standardizer {
            Some(s) => s.apply(x),
            None => x.to_owned(),
        }
    }

    /// Pre-activation of every layer plus post-activation inputs; `acts[0]` is the input.
    fn forward_cache(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layer_count() + 1);
        acts.push(x.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(w);
            z += b;
            if l + 1 < self.layer_count() {
                relu_inplace(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    /// Sign of every hidden pre-activation, flattened layer by layer.
    pub fn relu_pattern(&self, x: ArrayView2<'_, f64>) -> Vec<bool> {
        let mut a = x.to_owned();
        let mut pattern = Vec::new();
        for l in 0..self.layer_count() - 1 {
            let mut z = a.dot(&self.weights[l]) + &self.biases[l];
            pattern.extend(z.iter().map(|&v| v > 0.0));
            relu_inplace(&mut z);
            a = z;
        }
        pattern
    }

    /// Raw output-layer values for already prepared inputs.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = x.dot(&self.weights[0]) + &self.biases[0];
        for l in 1..self.layer_count() {
            relu_inplace(&mut a);
            a = a.dot(&self.weights[l]) + &self.biases[l];
        }
        a
    }

    /// Class probabilities (softmax) or positive-class probability column (logistic)
    /// for already prepared inputs.
    pub fn probabilities(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = self.logits(x);
        match self.head {
            Head::Softmax => softmax_rows(&mut z),
            Head::Logistic => z.mapv_inplace(sigmoid),
        }
        z
    }

    /// Mean data loss plus `(l2 / 2) * sum ||W||^2` over prepared inputs.
    pub fn loss(&self, x: ArrayView2<'_, f64>, targets: Targets<'_>, l2: f64) -> f64 {
        let z = self.logits(x);
        data_loss(&z, targets) + self.l2_penalty(l2)
    }

    fn l2_penalty(&self, l2: f64) -> f64 {
        if l2 == 0.0 {
            return 0.0;
        }
        0.5 * l2 * self.weights.iter().map(|w| w.iter().map(|x| x * x).sum::<f64>()).sum::<f64>()
    }

    /// Loss and gradient for one batch of prepared inputs.
    pub fn loss_and_grad(&self, x: ArrayView2<'_, f64>, targets: Targets<'_>, l2: f64) -> (f64, Gradients) {
        let acts = self.forward_cache(x);
        let logits = acts.last().expect("at least one layer");
        let loss = data_loss(logits, targets) + self.l2_penalty(l2);
        let batch = x.nrows().max(1) as f64;
        let mut delta = output_delta(logits, targets, self.head);
        delta /= batch;

        let layers = self.layer_count();
        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        for l in (0..layers).rev() {
            let mut w_grad = acts[l].t().dot(&delta);
            if l2 != 0.0 {
                w_grad.scaled_add(l2, &self.weights[l]);
            }
            gw[l] = w_grad;
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.weights[l].t());
                prev.zip_mut_with(&acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
        }
        (loss, Gradients { weights: gw, biases: gb })
    }

    /// Gradient of the L2 term alone.
    pub fn l2_gradient(&self, l2: f64) -> Gradients {
        Gradients {
            weights: self.weights.iter().map(|w| w * l2).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    /// Flatten parameters layer by layer: weights row-major, then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(CcError::Argument(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().expect("length checked"));
            b.iter_mut().for_each(|v| *v = it.next().expect("length checked"));
        }
        Ok(())
    }
}

fn data_loss(logits: &Array2<f64>, targets: Targets<'_>) -> f64 {
    let n = logits.nrows().max(1) as f64;
    match targets {
        Targets::Classes(t) => {
            let mut total = 0.0;
            for (row, &c) in logits.rows().into_iter().zip(t) {
                let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                total += lse - row[c];
            }
            total / n
        }
        Targets::Binary(t) => {
            logits
                .column(0)
                .iter()
                .zip(t)
                .map(|(&z, &y)| softplus(z) - y * z)
                .sum::<f64>()
                / n
        }
    }
}

/// d(loss)/d(logits) before dividing by the batch size.
fn output_delta(logits: &Array2<f64>, targets: Targets<'_>, head: Head) -> Array2<f64> {
    let mut delta = logits.clone();
    match (head, targets) {
        (Head::Softmax, Targets::Classes(t)) => {
            softmax_rows(&mut delta);
            for (mut row, &c) in delta.rows_mut().into_iter().zip(t) {
                row[c] -= 1.0;
            }
        }
        (Head::Logistic, Targets::Binary(t)) => {
            for (v, &y) in delta.column_mut(0).iter_mut().zip(t) {
                *v = sigmoid(*v) - y;
            }
        }
        _ => panic!("target kind does not match model head"),
    }
    delta
}

/// Argmax with ties resolved to the lowest index.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
