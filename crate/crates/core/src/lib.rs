//! Classical classifiers for the cognitive level of exam questions.
//!
//! The crate covers the whole pipeline: readability and lexical metrics
//! ([`textmetrics`]), corpus handling and label schemes ([`dataset`]),
//! feature extraction ([`features`]), three linear-time classifiers with a
//! versioned file format ([`models`]), reporting and corpus statistics
//! ([`eval`]), a synthetic question generator ([`datagen`]) and the
//! experiment presets that tie them together ([`experiment`]).

pub mod datagen;
pub mod dataset;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod models;
pub mod textmetrics;

use thiserror::Error;

pub use datagen::{generate, Banks, DatagenError, Generated};
pub use dataset::{
    balance, class_distribution, load_corpus, stratified_split, BloomLevel, CorpusFormat, DatasetError, LabelScheme,
    QuestionRecord, SplitDataset,
};
pub use eval::{classification_report, confusion, ConfusionMatrix, EvalError, EvalReport, ReportFormat};
pub use experiment::{
    run_experiment, run_to_dir, ExperimentConfig, ExperimentName, OutputFormat, PipelineError, RunManifest, Stage,
};
pub use features::{FeatureConfig, FeatureError, FeatureMode, FittedFeatures, SparseVector};
pub use models::{ModelError, ModelKind, PersistError, Prediction, TrainedModel};
pub use textmetrics::{analyze_text, compute_metrics, tokenize, TextError, TextMetrics, TokenizedText};

/// Any error the library can raise, split into input problems (exit code 2
/// in the CLI) and internal faults (exit code 1).
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl Error {
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Text(_) | Error::Dataset(_) | Error::Datagen(_) => true,
            Error::Features(e) => !matches!(e, FeatureError::NoDocuments),
            Error::Model(e) => matches!(
                e,
                ModelError::DimensionMismatch { .. } | ModelError::Features(_) | ModelError::InvalidHyperparameter(_)
            ),
            Error::Persist(e) => !matches!(e, PersistError::InvalidModel(_)),
            Error::Eval(e) => matches!(e, EvalError::Json(_) | EvalError::InsufficientData(_)),
            Error::Pipeline(e) => e.is_input_error(),
        }
    }

    /// Short machine-readable category for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Text(_) => "text",
            Error::Dataset(_) => "dataset",
            Error::Features(_) => "features",
            Error::Model(_) => "model",
            Error::Persist(_) => "model_file",
            Error::Eval(_) => "eval",
            Error::Datagen(_) => "datagen",
            Error::Pipeline(_) => "pipeline",
        }
    }
}
