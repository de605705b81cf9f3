use serde::{Deserialize, Serialize};

use super::{check_dim, check_training_input, log_sum_exp, softmax, Matrix, ModelError};
use crate::features::{FeatureMatrix, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    /// Additive (Laplace) smoothing.
    pub alpha: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        NaiveBayesParams { alpha: 1.0 }
    }
}

/// Multinomial naive Bayes over term counts, stored in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub log_prior: Vec<f64>,
    /// `K x V`; row `k` is `ln P(term | class k)`.
    pub log_likelihood: Matrix,
    pub alpha: f64,
}

impl NaiveBayesModel {
    /// `ln P(k) + sum_t count(t) * ln P(t | k)` for every class, i.e. the
    /// log-posterior up to the shared evidence term.
    pub fn log_joint(&self, x: &SparseVector) -> Result<Vec<f64>, ModelError> {
        check_dim(x, self.log_likelihood.cols)?;
        Ok(self
            .log_prior
            .iter()
            .enumerate()
            .map(|(k, &prior)| prior + x.dot(self.log_likelihood.row(k)))
            .collect())
    }

    /// Normalized log-posterior.
    pub fn log_posterior(&self, x: &SparseVector) -> Result<Vec<f64>, ModelError> {
        let joint = self.log_joint(x)?;
        let evidence = log_sum_exp(&joint);
        Ok(joint.into_iter().map(|j| j - evidence).collect())
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>, ModelError> {
        Ok(softmax(&self.log_joint(x)?))
    }
}

/// Closed-form fit:
/// `log_prior[k] = ln(n_k / n)`,
/// `log_likelihood[k][t] = ln((count(k, t) + alpha) / (total(k) + alpha * V))`.
pub fn train_naive_bayes(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    params: &NaiveBayesParams,
) -> Result<NaiveBayesModel, ModelError> {
    let alpha = params.alpha;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ModelError::InvalidHyperparameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    check_training_input(x, y, n_classes)?;

    let v = x.cols;
    let mut class_docs = vec![0usize; n_classes];
    let mut counts = Matrix::zeros(n_classes, v);
    for (r, (row, &label)) in x.rows.iter().zip(y).enumerate() {
        class_docs[label] += 1;
        let dst = counts.row_mut(label);
        for (col, value) in row.iter() {
            if value < 0.0 || !value.is_finite() {
                return Err(ModelError::NegativeCount { row: r, col, value });
            }
            dst[col] += value;
        }
    }
    if let Some(k) = class_docs.iter().position(|&n| n == 0) {
        return Err(ModelError::EmptyClass(k));
    }

    let n = y.len() as f64;
    let log_prior = class_docs.iter().map(|&c| (c as f64 / n).ln()).collect();
    let mut log_likelihood = Matrix::zeros(n_classes, v);
    for k in 0..n_classes {
        let total: f64 = counts.row(k).iter().sum();
        let denom = (total + alpha * v as f64).ln();
        for (dst, &c) in log_likelihood.row_mut(k).iter_mut().zip(counts.row(k)) {
            *dst = (c + alpha).ln() - denom;
        }
    }

    Ok(NaiveBayesModel {
        log_prior,
        log_likelihood,
        alpha,
    })
}
