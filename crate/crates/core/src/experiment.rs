//! The five classical experiment presets and the pipeline that runs them:
//! balance (optional) → stratified split → feature fit on train → train →
//! evaluate on validation → write artifacts and a replayable manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{self, CorpusFormat, DatasetError, LabelScheme, QuestionRecord, RNG_ALGORITHM};
use crate::eval::{self, EvalError, EvalReport, ReportFormat, RunMetadata};
use crate::features::{FeatureConfig, FeatureError, FeatureMode, FittedFeatures};
use crate::models::{
    self, LogRegParams, ModelError, ModelKind, ModelParams, NaiveBayesParams, PersistError, SvcParams, TrainedModel,
};
use crate::textmetrics::{tokenize, TextError, TokenizedText};

pub const TOOL_NAME: &str = "bloomq";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SPLIT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    Exp5,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 5] = [
        ExperimentName::Exp1,
        ExperimentName::Exp2,
        ExperimentName::Exp3,
        ExperimentName::Exp4,
        ExperimentName::Exp5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentName::Exp1 => "exp1",
            ExperimentName::Exp2 => "exp2",
            ExperimentName::Exp3 => "exp3",
            ExperimentName::Exp4 => "exp4",
            ExperimentName::Exp5 => "exp5",
        }
    }

    /// (model, feature mode, label scheme, balance) for each preset.
    pub fn preset(self) -> (ModelKind, FeatureMode, LabelScheme, bool) {
        use ExperimentName::*;
        match self {
            Exp1 => (ModelKind::Logreg, FeatureMode::Metrics, LabelScheme::Full6, true),
            Exp2 => (ModelKind::Logreg, FeatureMode::Metrics, LabelScheme::Merged4, true),
            Exp3 => (ModelKind::Logreg, FeatureMode::Metrics, LabelScheme::Merged3, true),
            Exp4 => (ModelKind::NaiveBayes, FeatureMode::Counts, LabelScheme::Full6, false),
            Exp5 => (ModelKind::LinearSvc, FeatureMode::Tfidf, LabelScheme::Full6, false),
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentName::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown experiment {s:?} (expected exp1..exp5)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    pub seed: u64,
    pub split_fraction: f64,
    pub scheme: LabelScheme,
    pub model: ModelKind,
    pub balance: bool,
    pub features: FeatureConfig,
    pub logreg: LogRegParams,
    pub naive_bayes: NaiveBayesParams,
    pub svc: SvcParams,
}

impl ExperimentConfig {
    pub fn preset(experiment: ExperimentName, seed: u64) -> Self {
        let (model, mode, scheme, balance) = experiment.preset();
        ExperimentConfig {
            experiment,
            seed,
            split_fraction: DEFAULT_SPLIT_FRACTION,
            scheme,
            model,
            balance,
            features: FeatureConfig::new(mode),
            logreg: LogRegParams {
                seed,
                ..Default::default()
            },
            naive_bayes: NaiveBayesParams::default(),
            svc: SvcParams {
                seed,
                ..Default::default()
            },
        }
    }

    /// Hyperparameters relevant to the selected model, plus feature settings.
    pub fn hyperparameters(&self) -> BTreeMap<String, f64> {
        let mut h = BTreeMap::new();
        match self.model {
            ModelKind::Logreg => {
                h.insert("l2_lambda".into(), self.logreg.l2_lambda);
                h.insert("learning_rate".into(), self.logreg.learning_rate);
                h.insert("max_iters".into(), self.logreg.max_iters as f64);
                h.insert("tol".into(), self.logreg.tol);
            }
            ModelKind::NaiveBayes => {
                h.insert("alpha".into(), self.naive_bayes.alpha);
            }
            ModelKind::LinearSvc => {
                h.insert("l2_lambda".into(), self.svc.l2_lambda);
                h.insert("epochs".into(), self.svc.epochs as f64);
            }
        }
        h.insert("features.min_df".into(), self.features.min_df as f64);
        h.insert(
            "features.sublinear_tf".into(),
            f64::from(u8::from(self.features.sublinear_tf)),
        );
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Balance,
    Split,
    Features,
    Train,
    Evaluate,
    Write,
    Replay,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::Balance => "balance",
            Stage::Split => "split",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
            Stage::Replay => "replay",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl PipelineError {
    pub fn new(stage: Stage, source: impl Into<StageError>) -> Self {
        PipelineError {
            stage,
            source: source.into(),
        }
    }

    /// True when the failure stems from user input (bad corpus, bad flags,
    /// unreadable files) rather than an internal fault.
    pub fn is_input_error(&self) -> bool {
        matches!(
            &self.source,
            StageError::Dataset(_)
                | StageError::Text(_)
                | StageError::Io { .. }
                | StageError::Other(_)
                | StageError::Features(FeatureError::EmptyVocabulary(_) | FeatureError::InvalidMinDf)
                | StageError::Model(
                    ModelError::SingleClass | ModelError::EmptyClass(_) | ModelError::InvalidHyperparameter(_)
                )
                | StageError::Persist(
                    PersistError::VersionMismatch { .. } | PersistError::CorruptFile { .. } | PersistError::Io { .. }
                )
        )
    }
}

fn at<E: Into<StageError>>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::new(stage, e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub model: TrainedModel,
    pub train_size: usize,
    pub validation_size: usize,
}

fn tokenize_all(records: &[QuestionRecord]) -> Result<Vec<TokenizedText>, TextError> {
    records.iter().map(|r| tokenize(&r.text)).collect()
}

pub fn train_model(
    kind: ModelKind,
    x: &crate::features::FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    cfg: &ExperimentConfig,
) -> Result<ModelParams, ModelError> {
    Ok(match kind {
        ModelKind::Logreg => ModelParams::Logreg(models::train_logreg(x, y, n_classes, &cfg.logreg)?),
        ModelKind::NaiveBayes => ModelParams::NaiveBayes(models::train_naive_bayes(x, y, n_classes, &cfg.naive_bayes)?),
        ModelKind::LinearSvc => ModelParams::LinearSvc(models::train_linear_svc(x, y, n_classes, &cfg.svc)?),
    })
}

pub fn run_experiment(corpus: &[QuestionRecord], cfg: &ExperimentConfig) -> Result<ExperimentOutcome, PipelineError> {
    let balanced;
    let corpus = if cfg.balance {
        balanced = dataset::balance(corpus, cfg.seed).map_err(at(Stage::Balance))?;
        &balanced[..]
    } else {
        corpus
    };

    let split = dataset::stratified_split(corpus, cfg.split_fraction, cfg.seed).map_err(at(Stage::Split))?;

    let train_docs = tokenize_all(&split.train).map_err(at(Stage::Features))?;
    let val_docs = tokenize_all(&split.validation).map_err(at(Stage::Features))?;
    let features = FittedFeatures::fit(&train_docs, cfg.features).map_err(at(Stage::Features))?;
    let x_train = features.transform_all(&train_docs).map_err(at(Stage::Features))?;
    let x_val = features.transform_all(&val_docs).map_err(at(Stage::Features))?;

    let labels = |rs: &[QuestionRecord]| rs.iter().map(|r| cfg.scheme.apply(r.level)).collect::<Vec<_>>();
    let y_train = labels(&split.train);
    let y_val = labels(&split.validation);

    let params = train_model(cfg.model, &x_train, &y_train, cfg.scheme.class_count(), cfg).map_err(at(Stage::Train))?;

    let pred = x_val
        .rows
        .iter()
        .map(|row| params.predict(row))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at(Stage::Evaluate))?;
    let cm = eval::confusion(&y_val, &pred, cfg.scheme.class_names()).map_err(at(Stage::Evaluate))?;
    let mut report = eval::classification_report(&cm).map_err(at(Stage::Evaluate))?;
    report.metadata = RunMetadata {
        experiment: cfg.experiment.name().to_string(),
        scheme: cfg.scheme.name().to_string(),
        feature_mode: cfg.features.mode.name().to_string(),
        model_kind: cfg.model.name().to_string(),
        seed: cfg.seed,
        split_fraction: cfg.split_fraction,
        balanced: cfg.balance,
        rng: RNG_ALGORITHM.to_string(),
        hyperparameters: cfg.hyperparameters(),
        warnings: std::mem::take(&mut report.metadata.warnings),
    };

    Ok(ExperimentOutcome {
        report,
        model: TrainedModel {
            scheme: cfg.scheme,
            features,
            params,
        },
        train_size: split.train.len(),
        validation_size: split.validation.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRef {
    pub path: String,
    pub format: CorpusFormat,
    pub sha256: String,
    pub records: usize,
}

/// Everything needed to rerun an experiment and get byte-identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub corpus: CorpusRef,
    pub config: ExperimentConfig,
    pub rng: String,
    pub report_formats: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Markdown,
    Both,
}

impl OutputFormat {
    pub fn formats(self) -> Vec<ReportFormat> {
        match self {
            OutputFormat::Json => vec![ReportFormat::Json],
            OutputFormat::Markdown => vec![ReportFormat::Markdown],
            OutputFormat::Both => vec![ReportFormat::Json, ReportFormat::Markdown],
        }
    }

    fn from_names(names: &[String]) -> Result<Self, String> {
        let json = names.iter().any(|n| n == "json");
        let md = names.iter().any(|n| n == "markdown");
        match (json, md) {
            (true, true) => Ok(OutputFormat::Both),
            (true, false) => Ok(OutputFormat::Json),
            (false, true) => Ok(OutputFormat::Markdown),
            _ => Err(format!("no known report format in {names:?}")),
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!("unknown format {other:?} (expected json, markdown or both)")),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Artifact file names for an experiment, in write order.
pub fn artifact_names(experiment: ExperimentName, format: OutputFormat) -> Vec<String> {
    let e = experiment.name();
    let mut names = vec![format!("{e}.model.json")];
    for f in format.formats() {
        names.push(match f {
            ReportFormat::Json => format!("{e}.report.json"),
            ReportFormat::Markdown => format!("{e}.report.md"),
        });
    }
    names.push(format!("{e}.manifest.json"));
    names
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub outcome: ExperimentOutcome,
    pub manifest: RunManifest,
    pub written: Vec<PathBuf>,
}

/// Loads the corpus at `corpus_path`, runs `cfg`, and writes the model,
/// reports and manifest into `out_dir`.
pub fn run_to_dir(
    corpus_path: &Path,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<RunArtifacts, PipelineError> {
    let corpus_format = CorpusFormat::from_path(corpus_path).map_err(at(Stage::Load))?;
    let bytes = fs::read(corpus_path).map_err(|source| {
        PipelineError::new(
            Stage::Load,
            StageError::Io {
                path: corpus_path.display().to_string(),
                source,
            },
        )
    })?;
    let corpus = match corpus_format {
        CorpusFormat::Csv => dataset::read_csv(&bytes[..]),
        CorpusFormat::Jsonl => dataset::read_jsonl(&bytes[..]),
    }
    .map_err(at(Stage::Load))?;

    let outcome = run_experiment(&corpus, cfg)?;
    let outputs = artifact_names(cfg.experiment, format);
    let manifest = RunManifest {
        tool: TOOL_NAME.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        corpus: CorpusRef {
            path: fs::canonicalize(corpus_path)
                .unwrap_or_else(|_| corpus_path.to_path_buf())
                .display()
                .to_string(),
            format: corpus_format,
            sha256: sha256_hex(&bytes),
            records: corpus.len(),
        },
        config: cfg.clone(),
        rng: RNG_ALGORITHM.to_string(),
        report_formats: format
            .formats()
            .iter()
            .map(|f| match f {
                ReportFormat::Json => "json".to_string(),
                ReportFormat::Markdown => "markdown".to_string(),
            })
            .collect(),
        outputs: outputs.clone(),
    };

    let written = write_artifacts(&outcome, &manifest, out_dir, format)?;
    Ok(RunArtifacts {
        outcome,
        manifest,
        written,
    })
}

fn write_artifacts(
    outcome: &ExperimentOutcome,
    manifest: &RunManifest,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, PipelineError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| PipelineError::new(Stage::Write, StageError::Io { path, source })
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let e = manifest.config.experiment.name();
    let mut written = Vec::new();

    let model_path = out_dir.join(format!("{e}.model.json"));
    models::save_model(&outcome.model, &model_path).map_err(at(Stage::Write))?;
    written.push(model_path);

    for f in format.formats() {
        let (name, body) = match f {
            ReportFormat::Json => (format!("{e}.report.json"), eval::render_json(&outcome.report)),
            ReportFormat::Markdown => (format!("{e}.report.md"), eval::render_markdown(&outcome.report)),
        };
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        written.push(path);
    }

    let manifest_path = out_dir.join(format!("{e}.manifest.json"));
    let mut body = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    body.push('\n');
    fs::write(&manifest_path, body).map_err(io_err(&manifest_path))?;
    written.push(manifest_path);
    Ok(written)
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| {
        PipelineError::new(
            Stage::Replay,
            StageError::Io {
                path: path.display().to_string(),
                source,
            },
        )
    })?;
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::new(Stage::Replay, StageError::Other(format!("invalid manifest: {e}"))))
}

/// Reruns a manifest into `out_dir`. The corpus must still hash to the
/// recorded digest.
pub fn replay(manifest: &RunManifest, out_dir: &Path) -> Result<RunArtifacts, PipelineError> {
    let path = Path::new(&manifest.corpus.path);
    let bytes = fs::read(path).map_err(|source| {
        PipelineError::new(
            Stage::Replay,
            StageError::Io {
                path: manifest.corpus.path.clone(),
                source,
            },
        )
    })?;
    let digest = sha256_hex(&bytes);
    if digest != manifest.corpus.sha256 {
        return Err(PipelineError::new(
            Stage::Replay,
            StageError::Other(format!(
                "corpus {} changed since the run (sha256 {digest}, manifest has {})",
                manifest.corpus.path, manifest.corpus.sha256
            )),
        ));
    }
    let format = OutputFormat::from_names(&manifest.report_formats)
        .map_err(|m| PipelineError::new(Stage::Replay, StageError::Other(m)))?;
    run_to_dir(path, &manifest.config, out_dir, format)
}

/// One per-question line of the analysis table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    /// 1-based position in the corpus.
    pub id: usize,
    pub level: dataset::BloomLevel,
    pub metrics: crate::textmetrics::TextMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusAnalysis {
    pub rows: Vec<MetricRow>,
    pub stats: eval::CorpusStats,
}

/// Metrics for every record plus the per-level summary. A record without
/// word tokens fails the whole analysis, naming its row.
pub fn analyze_corpus(corpus: &[QuestionRecord]) -> Result<CorpusAnalysis, PipelineError> {
    let rows = corpus
        .iter()
        .enumerate()
        .map(|(i, r)| {
            crate::textmetrics::analyze_text(&r.text)
                .map(|metrics| MetricRow {
                    id: i + 1,
                    level: r.level,
                    metrics,
                })
                .map_err(|e| PipelineError::new(Stage::Features, StageError::Other(format!("record {}: {e}", i + 1))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<_> = rows.iter().map(|r| (r.level, r.metrics)).collect();
    let stats = eval::corpus_stats(&pairs).map_err(at(Stage::Evaluate))?;
    Ok(CorpusAnalysis { rows, stats })
}

pub fn render_metric_rows_csv(rows: &[MetricRow]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("id,label,L,FKGL,TTR,LD\n");
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(out, "{},{},{},{},{},{}", r.id, r.level, m.length_l, m.fkgl, m.ttr, m.ld);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, Banks};

    #[test]
    fn presets_follow_the_ladder() {
        use ExperimentName::*;
        assert_eq!(
            Exp1.preset(),
            (ModelKind::Logreg, FeatureMode::Metrics, LabelScheme::Full6, true)
        );
        assert_eq!(Exp3.preset().2, LabelScheme::Merged3);
        assert_eq!(Exp4.preset().1, FeatureMode::Counts);
        assert_eq!(Exp5.preset().0, ModelKind::LinearSvc);
        assert_eq!("EXP2".parse::<ExperimentName>().unwrap(), Exp2);
        assert!("exp6".parse::<ExperimentName>().is_err());
    }

    #[test]
    fn exp3_reports_three_classes() {
        let corpus = generate(20, 3, &Banks::default_banks()).unwrap().records;
        let out = run_experiment(&corpus, &ExperimentConfig::preset(ExperimentName::Exp3, 3)).unwrap();
        let names: Vec<_> = out.report.classes.iter().map(|c| c.class.as_str()).collect();
        assert_eq!(names, ["Knowledge", "Mid-Order", "Higher-Order"]);
        assert_eq!(out.train_size + out.validation_size, 120);
    }

    #[test]
    fn stage_is_named_on_failure() {
        let corpus = vec![
            QuestionRecord::new("define x", dataset::BloomLevel::Knowledge),
            QuestionRecord::new("explain y", dataset::BloomLevel::Comprehension),
        ];
        let err = run_experiment(&corpus, &ExperimentConfig::preset(ExperimentName::Exp4, 0)).unwrap_err();
        assert_eq!(err.stage, Stage::Split);
        assert!(err.is_input_error());
        assert!(err.to_string().starts_with("split stage failed"));
    }
}
