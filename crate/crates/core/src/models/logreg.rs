use serde::{Deserialize, Serialize};

use super::{check_dim, check_training_input, log_sum_exp, softmax, Matrix, ModelError};
use crate::features::{FeatureMatrix, SparseVector};

/// Learning rates are halved after a rejected step; below this the search
/// is considered converged.
const MIN_LEARNING_RATE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Recorded for provenance; training starts from zeros and uses no randomness.
    pub seed: u64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            l2_lambda: 1e-3,
            learning_rate: 0.5,
            max_iters: 500,
            tol: 1e-7,
            seed: 0,
        }
    }
}

/// Softmax regression parameters: `K x D` weights and `K` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub l2_lambda: f64,
    pub iterations: usize,
    pub final_loss: f64,
    pub seed: u64,
}

impl LogRegModel {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        LogRegModel {
            weights: Matrix::zeros(n_classes, dim),
            bias: vec![0.0; n_classes],
            l2_lambda: 0.0,
            iterations: 0,
            final_loss: f64::NAN,
            seed: 0,
        }
    }

    pub fn scores(&self, x: &SparseVector) -> Result<Vec<f64>, ModelError> {
        check_dim(x, self.weights.cols)?;
        Ok(linear_scores(&self.weights, &self.bias, x))
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>, ModelError> {
        Ok(softmax(&self.scores(x)?))
    }
}

fn linear_scores(weights: &Matrix, bias: &[f64], x: &SparseVector) -> Vec<f64> {
    (0..weights.rows).map(|k| x.dot(weights.row(k)) + bias[k]).collect()
}

/// Value and gradient of the training objective at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub loss: f64,
    pub grad_weights: Matrix,
    pub grad_bias: Vec<f64>,
}

/// Mean softmax cross-entropy plus `(l2_lambda / 2) * ||W||^2`; the bias is
/// not penalized.
pub fn logreg_objective(
    weights: &Matrix,
    bias: &[f64],
    x: &FeatureMatrix,
    y: &[usize],
    l2_lambda: f64,
) -> ObjectiveEval {
    let n = x.n_rows() as f64;
    let k = weights.rows;
    let mut loss = 0.0;
    let mut grad_weights = Matrix::zeros(k, weights.cols);
    let mut grad_bias = vec![0.0; k];

    for (row, &label) in x.rows.iter().zip(y) {
        let scores = linear_scores(weights, bias, row);
        let lse = log_sum_exp(&scores);
        loss += lse - scores[label];
        for c in 0..k {
            let residual = (scores[c] - lse).exp() - if c == label { 1.0 } else { 0.0 };
            grad_bias[c] += residual;
            let g = grad_weights.row_mut(c);
            for (j, v) in row.iter() {
                g[j] += residual * v;
            }
        }
    }

    loss /= n;
    grad_bias.iter_mut().for_each(|g| *g /= n);
    let mut penalty = 0.0;
    for (g, &w) in grad_weights.values.iter_mut().zip(&weights.values) {
        *g = *g / n + l2_lambda * w;
        penalty += w * w;
    }
    loss += 0.5 * l2_lambda * penalty;

    ObjectiveEval {
        loss,
        grad_weights,
        grad_bias,
    }
}

/// Full-batch gradient descent from zero initialization.
///
/// A step that would raise the loss is rejected and the learning rate halved,
/// so the loss sequence over accepted steps never increases. Training stops
/// after `max_iters` attempts or once an accepted step improves the loss by
/// less than `tol`.
pub fn train_logreg(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    params: &LogRegParams,
) -> Result<LogRegModel, ModelError> {
    check_training_input(x, y, n_classes)?;
    if !(params.l2_lambda >= 0.0 && params.learning_rate > 0.0 && params.tol >= 0.0) {
        return Err(ModelError::InvalidHyperparameter(format!("{params:?}")));
    }

    let mut weights = Matrix::zeros(n_classes, x.cols);
    let mut bias = vec![0.0; n_classes];
    let mut current = logreg_objective(&weights, &bias, x, y, params.l2_lambda);
    if !current.loss.is_finite() {
        return Err(ModelError::NonFiniteLoss { iteration: 0 });
    }

    let mut lr = params.learning_rate;
    let mut accepted = 0usize;
    for iteration in 1..=params.max_iters {
        let cand_w = Matrix {
            rows: weights.rows,
            cols: weights.cols,
            values: weights
                .values
                .iter()
                .zip(&current.grad_weights.values)
                .map(|(w, g)| w - lr * g)
                .collect(),
        };
        let cand_b: Vec<f64> = bias.iter().zip(&current.grad_bias).map(|(b, g)| b - lr * g).collect();
        let next = logreg_objective(&cand_w, &cand_b, x, y, params.l2_lambda);
        if !next.loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { iteration });
        }
        if next.loss > current.loss {
            lr *= 0.5;
            if lr < MIN_LEARNING_RATE {
                break;
            }
            continue;
        }
        let improvement = current.loss - next.loss;
        weights = cand_w;
        bias = cand_b;
        current = next;
        accepted += 1;
        if improvement < params.tol {
            break;
        }
    }

    Ok(LogRegModel {
        weights,
        bias,
        l2_lambda: params.l2_lambda,
        iterations: accepted,
        final_loss: current.loss,
        seed: params.seed,
    })
}

/// Loss trace of the same descent, for tests of monotonicity.
#[cfg(test)]
pub(crate) fn loss_trace(x: &FeatureMatrix, y: &[usize], n_classes: usize, params: &LogRegParams) -> Vec<f64> {
    let mut trace = Vec::new();
    let mut p = *params;
    for iters in 0..=params.max_iters.min(60) {
        p.max_iters = iters;
        p.tol = 0.0;
        trace.push(train_logreg(x, y, n_classes, &p).unwrap().final_loss);
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::argmax;

    #[test]
    fn zero_model_is_uniform() {
        let m = LogRegModel::zeros(4, 3);
        let p = m.predict_proba(&SparseVector::from_dense(&[1.0, -2.0, 0.5])).unwrap();
        assert_eq!(p, vec![0.25; 4]);
        assert_eq!(argmax(&m.scores(&SparseVector::default()).unwrap()), 0);
    }

    #[test]
    fn separates_one_dimensional_points() {
        let x = FeatureMatrix::from_dense(&[vec![-1.0], vec![1.0]]);
        let y = [0, 1];
        let m = train_logreg(&x, &y, 2, &LogRegParams::default()).unwrap();
        for (row, &label) in x.rows.iter().zip(&y) {
            assert_eq!(argmax(&m.scores(row).unwrap()), label);
        }
        assert!(m.weights.get(1, 0) > m.weights.get(0, 0));
    }

    #[test]
    fn loss_never_increases() {
        let x = FeatureMatrix::from_dense(&[
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.5, -1.0],
            vec![-1.0, 2.0, 0.0],
            vec![3.0, -1.0, 1.0],
            vec![0.5, 0.5, 0.5],
        ]);
        let y = [0, 1, 2, 1, 0];
        let params = LogRegParams {
            learning_rate: 4.0,
            ..Default::default()
        };
        let trace = loss_trace(&x, &y, 3, &params);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "{trace:?}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = FeatureMatrix::from_dense(&[vec![1.0], vec![2.0]]);
        let p = LogRegParams::default();
        assert_eq!(train_logreg(&x, &[0, 0], 2, &p).unwrap_err(), ModelError::SingleClass);
        assert!(matches!(
            train_logreg(&x, &[0], 2, &p),
            Err(ModelError::LengthMismatch { .. })
        ));
        let m = train_logreg(&x, &[0, 1], 2, &p).unwrap();
        assert!(matches!(
            m.scores(&SparseVector::from_dense(&[1.0, 1.0])),
            Err(ModelError::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn huge_inputs_report_non_finite_loss() {
        let x = FeatureMatrix::from_dense(&[vec![f64::MAX], vec![-f64::MAX]]);
        let err = train_logreg(&x, &[0, 1], 2, &LogRegParams::default()).unwrap_err();
        assert!(matches!(err, ModelError::NonFiniteLoss { .. }));
    }
}
