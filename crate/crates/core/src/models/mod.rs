//! The three classical classifiers behind one train/predict contract.
//!
//! Every trainer is deterministic once its inputs and seed are fixed.
//! Prediction is an argmax over per-class scores with ties going to the
//! lowest class index.

mod logreg;
mod naive_bayes;
mod persist;
mod svc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabelScheme;
use crate::features::{FeatureError, FittedFeatures, SparseVector};
use crate::textmetrics::tokenize;

pub use logreg::{logreg_objective, train_logreg, LogRegModel, LogRegParams, ObjectiveEval};
pub use naive_bayes::{train_naive_bayes, NaiveBayesModel, NaiveBayesParams};
pub use persist::{load_model, read_model, save_model, write_model, PersistError, FORMAT_VERSION};
pub use svc::{hinge_loss, train_linear_svc, LinearSvcModel, SvcParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("training data holds fewer than 2 distinct classes")]
    SingleClass,
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("loss became non-finite at iteration {iteration} (learning rate too large?)")]
    NonFiniteLoss { iteration: usize },
    #[error("negative count {value} at row {row}, column {col}")]
    NegativeCount { row: usize, col: usize, value: f64 },
    #[error("class {0} has no training documents")]
    EmptyClass(usize),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

/// Dense row-major matrix with explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            values: rows.concat(),
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn shape_ok(&self) -> bool {
        self.rows.checked_mul(self.cols) == Some(self.values.len())
    }
}

/// Index of the largest score; the first one wins a tie.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// Shared input checks for all trainers.
pub(crate) fn check_training_input(
    x: &crate::features::FeatureMatrix,
    y: &[usize],
    n_classes: usize,
) -> Result<(), ModelError> {
    if x.n_rows() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if let Some(&label) = y.iter().find(|&&c| c >= n_classes) {
        return Err(ModelError::LabelOutOfRange {
            label,
            classes: n_classes,
        });
    }
    for row in &x.rows {
        if let Some(max) = row.max_index() {
            if max >= x.cols {
                return Err(ModelError::DimensionMismatch {
                    expected: x.cols,
                    found: max + 1,
                });
            }
        }
    }
    let mut seen = vec![false; n_classes];
    y.iter().for_each(|&c| seen[c] = true);
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

pub(crate) fn check_dim(x: &SparseVector, dim: usize) -> Result<(), ModelError> {
    match x.max_index() {
        Some(m) if m >= dim => Err(ModelError::DimensionMismatch {
            expected: dim,
            found: m + 1,
        }),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logreg,
    NaiveBayes,
    LinearSvc,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::LinearSvc => "linear_svc",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Logreg => "Multinomial Logistic Regression",
            ModelKind::NaiveBayes => "Naive Bayes",
            ModelKind::LinearSvc => "Linear SVC",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "logreg" => Ok(ModelKind::Logreg),
            "naive_bayes" | "nb" => Ok(ModelKind::NaiveBayes),
            "linear_svc" | "svc" => Ok(ModelKind::LinearSvc),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Logreg(LogRegModel),
    NaiveBayes(NaiveBayesModel),
    LinearSvc(LinearSvcModel),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Logreg(_) => ModelKind::Logreg,
            ModelParams::NaiveBayes(_) => ModelKind::NaiveBayes,
            ModelParams::LinearSvc(_) => ModelKind::LinearSvc,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            ModelParams::Logreg(m) => m.weights.rows,
            ModelParams::NaiveBayes(m) => m.log_prior.len(),
            ModelParams::LinearSvc(m) => m.weights.rows,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelParams::Logreg(m) => m.weights.cols,
            ModelParams::NaiveBayes(m) => m.log_likelihood.cols,
            ModelParams::LinearSvc(m) => m.weights.cols,
        }
    }

    pub fn scores(&self, x: &SparseVector) -> Result<Vec<f64>, ModelError> {
        match self {
            ModelParams::Logreg(m) => m.scores(x),
            ModelParams::NaiveBayes(m) => m.log_joint(x),
            ModelParams::LinearSvc(m) => m.scores(x),
        }
    }

    pub fn predict(&self, x: &SparseVector) -> Result<usize, ModelError> {
        Ok(argmax(&self.scores(x)?))
    }

    /// Class probabilities; `None` for the SVC, which has no calibrated ones.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<Option<Vec<f64>>, ModelError> {
        match self {
            ModelParams::Logreg(m) => m.predict_proba(x).map(Some),
            ModelParams::NaiveBayes(m) => m.predict_proba(x).map(Some),
            ModelParams::LinearSvc(_) => Ok(None),
        }
    }
}

/// A fitted classifier bound to its label scheme and feature pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub scheme: LabelScheme,
    pub features: FittedFeatures,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub class_name: &'static str,
    pub proba: Option<Vec<f64>>,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn class_names(&self) -> &'static [&'static str] {
        self.scheme.class_names()
    }

    pub fn predict_features(&self, x: &SparseVector) -> Result<Prediction, ModelError> {
        let scores = self.params.scores(x)?;
        let class = argmax(&scores);
        Ok(Prediction {
            class,
            class_name: self.class_names()[class],
            proba: self.params.predict_proba(x)?,
        })
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction, ModelError> {
        let tokens = tokenize(text).map_err(FeatureError::from)?;
        let x = self.features.transform(&tokens)?;
        self.predict_features(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[-1.0, -2.0]), 0);
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = softmax(&[0.0; 5]);
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        let p = softmax(&[1000.0, 0.0, -1000.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("naive-bayes".parse::<ModelKind>().unwrap(), ModelKind::NaiveBayes);
        assert_eq!("SVC".parse::<ModelKind>().unwrap(), ModelKind::LinearSvc);
        assert!("tree".parse::<ModelKind>().is_err());
    }
}
