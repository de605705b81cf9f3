use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_dim, check_training_input, Matrix, ModelError};
use crate::dataset::{seeded_rng, RngStream};
use crate::features::{FeatureMatrix, SparseVector};

/// Below this the lazily applied weight scale is folded back into the weights.
const RESCALE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    pub l2_lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvcParams {
    fn default() -> Self {
        SvcParams {
            l2_lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

/// One-vs-rest linear SVM: row `k` scores class `k` against the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvcModel {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl LinearSvcModel {
    /// Signed margins `w_k . x + b_k`.
    pub fn scores(&self, x: &SparseVector) -> Result<Vec<f64>, ModelError> {
        check_dim(x, self.weights.cols)?;
        Ok((0..self.weights.rows)
            .map(|k| x.dot(self.weights.row(k)) + self.bias[k])
            .collect())
    }
}

/// Binary hinge model stored as `scale * (w, b)` so the per-step shrink
/// `(1 - eta * lambda)` costs O(1) instead of O(D).
struct ScaledHyperplane {
    w: Vec<f64>,
    b: f64,
    scale: f64,
}

impl ScaledHyperplane {
    fn new(dim: usize) -> Self {
        ScaledHyperplane {
            w: vec![0.0; dim],
            b: 0.0,
            scale: 1.0,
        }
    }

    fn margin(&self, x: &SparseVector) -> f64 {
        self.scale * (x.dot(&self.w) + self.b)
    }

    fn shrink(&mut self, factor: f64) {
        if factor == 0.0 {
            self.w.iter_mut().for_each(|v| *v = 0.0);
            self.b = 0.0;
            self.scale = 1.0;
            return;
        }
        self.scale *= factor;
        if self.scale < RESCALE_THRESHOLD {
            let s = self.scale;
            self.w.iter_mut().for_each(|v| *v *= s);
            self.b *= s;
            self.scale = 1.0;
        }
    }

    fn add(&mut self, x: &SparseVector, step: f64) {
        let step = step / self.scale;
        for (j, v) in x.iter() {
            self.w[j] += step * v;
        }
        self.b += step;
    }

    fn into_parts(self) -> (Vec<f64>, f64) {
        let s = self.scale;
        (self.w.into_iter().map(|v| v * s).collect(), self.b * s)
    }
}

/// Pegasos-style stochastic subgradient descent on the regularized hinge
/// loss, one binary problem per class.
///
/// Each epoch visits the samples in a seeded shuffled order; at global step
/// `t` the step size is `1 / (lambda * t)`. The bias is treated as the
/// weight of a constant feature equal to 1 and shrinks with the weights.
pub fn train_linear_svc(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    params: &SvcParams,
) -> Result<LinearSvcModel, ModelError> {
    if !(params.l2_lambda > 0.0 && params.l2_lambda.is_finite()) {
        return Err(ModelError::InvalidHyperparameter(format!(
            "l2_lambda must be positive, got {}",
            params.l2_lambda
        )));
    }
    if params.epochs == 0 {
        return Err(ModelError::InvalidHyperparameter("epochs must be at least 1".into()));
    }
    check_training_input(x, y, n_classes)?;

    let lambda = params.l2_lambda;
    let mut planes: Vec<ScaledHyperplane> = (0..n_classes).map(|_| ScaledHyperplane::new(x.cols)).collect();
    let mut rng = seeded_rng(params.seed, RngStream::SvcShuffle);
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    let mut t = 0u64;

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let shrink = 1.0 - 1.0 / t as f64;
            let row = &x.rows[i];
            for (k, plane) in planes.iter_mut().enumerate() {
                let target = if y[i] == k { 1.0 } else { -1.0 };
                let margin = target * plane.margin(row);
                plane.shrink(shrink);
                if margin < 1.0 {
                    plane.add(row, eta * target);
                }
            }
        }
    }

    let mut weights = Matrix::zeros(n_classes, x.cols);
    let mut bias = Vec::with_capacity(n_classes);
    for (k, plane) in planes.into_iter().enumerate() {
        let (w, b) = plane.into_parts();
        weights.row_mut(k).copy_from_slice(&w);
        bias.push(b);
    }

    Ok(LinearSvcModel {
        weights,
        bias,
        l2_lambda: lambda,
        epochs: params.epochs,
        seed: params.seed,
    })
}

/// Hinge term for one sample; zero (with zero data subgradient) once the
/// signed margin reaches 1.
pub fn hinge_loss(signed_margin: f64) -> f64 {
    (1.0 - signed_margin).max(0.0)
}
