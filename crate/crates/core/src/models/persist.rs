//! Versioned JSON model files. See `docs/model-format.md` for the layout.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LinearSvcModel, LogRegModel, ModelKind, ModelParams, NaiveBayesModel, TrainedModel};
use crate::dataset::LabelScheme;
use crate::features::{FeatureConfig, FittedFeatures, MetricScaler, VocabEntry, Vocabulary};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model format_version {found} is not supported (this build reads {supported})")]
    VersionMismatch { found: u64, supported: u32 },
    #[error("corrupt model file at byte {offset}: {reason}")]
    CorruptFile { offset: usize, reason: String },
    #[error("refusing to save model: {0}")]
    InvalidModel(String),
}

#[derive(Serialize, Deserialize)]
struct SchemeSection {
    name: LabelScheme,
    class_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct VocabularySection {
    document_count: u32,
    terms: Vec<VocabEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ParametersSection {
    Logreg(LogRegModel),
    NaiveBayes(NaiveBayesModel),
    LinearSvc(LinearSvcModel),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    kind: ModelKind,
    label_scheme: SchemeSection,
    feature_config: FeatureConfig,
    vocabulary: Option<VocabularySection>,
    scaling: Option<MetricScaler>,
    parameters: ParametersSection,
}

fn corrupt(offset: usize, reason: impl Into<String>) -> PersistError {
    PersistError::CorruptFile {
        offset,
        reason: reason.into(),
    }
}

/// Byte offset of a serde_json (1-based line, 1-based column) position.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for _ in 1..line {
        match bytes[offset..].iter().position(|&b| b == b'\n') {
            Some(p) => offset += p + 1,
            None => return bytes.len(),
        }
    }
    (offset + column.saturating_sub(1)).min(bytes.len())
}

fn json_error(bytes: &[u8], e: &serde_json::Error) -> PersistError {
    let offset = if e.line() == 0 {
        0
    } else {
        byte_offset(bytes, e.line(), e.column())
    };
    corrupt(offset, e.to_string())
}

fn offset_of_key(bytes: &[u8], key: &str) -> usize {
    let needle = format!("\"{key}\"");
    bytes
        .windows(needle.len())
        .position(|w| w == needle.as_bytes())
        .unwrap_or(0)
}

fn check_finite(model: &TrainedModel) -> Result<(), PersistError> {
    let ok = match &model.params {
        ModelParams::Logreg(m) => {
            m.weights.is_finite() && m.bias.iter().all(|v| v.is_finite()) && m.final_loss.is_finite()
        }
        ModelParams::NaiveBayes(m) => m.log_likelihood.is_finite() && m.log_prior.iter().all(|v| v.is_finite()),
        ModelParams::LinearSvc(m) => m.weights.is_finite() && m.bias.iter().all(|v| v.is_finite()),
    };
    if ok {
        Ok(())
    } else {
        Err(PersistError::InvalidModel("non-finite parameters".into()))
    }
}

/// Serializes `model` as pretty-printed JSON with `format_version` first.
pub fn write_model<W: Write>(mut writer: W, model: &TrainedModel) -> Result<(), PersistError> {
    check_finite(model)?;
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        kind: model.kind(),
        label_scheme: SchemeSection {
            name: model.scheme,
            class_names: model.scheme.class_names().iter().map(|s| s.to_string()).collect(),
        },
        feature_config: model.features.config,
        vocabulary: model.features.vocabulary.as_ref().map(|v| VocabularySection {
            document_count: v.document_count(),
            terms: v.entries(),
        }),
        scaling: model.features.scaler,
        parameters: match &model.params {
            ModelParams::Logreg(m) => ParametersSection::Logreg(m.clone()),
            ModelParams::NaiveBayes(m) => ParametersSection::NaiveBayes(m.clone()),
            ModelParams::LinearSvc(m) => ParametersSection::LinearSvc(m.clone()),
        },
    };
    let io = |source| PersistError::Io {
        path: "<writer>".into(),
        source,
    };
    serde_json::to_writer_pretty(&mut writer, &file).map_err(|e| io(e.into()))?;
    writer.write_all(b"\n").map_err(io)
}

pub fn read_model(bytes: &[u8]) -> Result<TrainedModel, PersistError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, &e))?;
    let version = value
        .get("format_version")
        .ok_or_else(|| corrupt(0, "missing format_version"))?
        .as_u64()
        .ok_or_else(|| {
            corrupt(
                offset_of_key(bytes, "format_version"),
                "format_version is not an unsigned integer",
            )
        })?;
    if version != FORMAT_VERSION as u64 {
        return Err(PersistError::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }

    let file: ModelFile = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, &e))?;
    let params = match file.parameters {
        ParametersSection::Logreg(m) => ModelParams::Logreg(m),
        ParametersSection::NaiveBayes(m) => ModelParams::NaiveBayes(m),
        ParametersSection::LinearSvc(m) => ModelParams::LinearSvc(m),
    };
    let at_params = || offset_of_key(bytes, "parameters");
    if params.kind() != file.kind {
        return Err(corrupt(
            at_params(),
            format!("kind {} does not match {} parameters", file.kind, params.kind()),
        ));
    }

    let scheme = file.label_scheme.name;
    if file.label_scheme.class_names != scheme.class_names() {
        return Err(corrupt(
            offset_of_key(bytes, "label_scheme"),
            format!("class names do not match scheme {scheme}"),
        ));
    }

    let vocabulary = file
        .vocabulary
        .map(|v| Vocabulary::from_entries(&v.terms, v.document_count))
        .transpose()
        .map_err(|reason| corrupt(offset_of_key(bytes, "vocabulary"), reason))?;
    let features = FittedFeatures {
        config: file.feature_config,
        vocabulary,
        scaler: file.scaling,
    };
    let model = TrainedModel {
        scheme,
        features,
        params,
    };
    validate_shapes(&model).map_err(|reason| corrupt(at_params(), reason))?;
    Ok(model)
}

fn validate_shapes(model: &TrainedModel) -> Result<(), String> {
    use crate::features::FeatureMode;
    let cfg = &model.features.config;
    let needs_vocab = cfg.mode != FeatureMode::Metrics;
    if needs_vocab != model.features.vocabulary.is_some() {
        return Err(format!("vocabulary presence does not match feature mode {}", cfg.mode));
    }
    let needs_scaler = matches!(cfg.mode, FeatureMode::Metrics | FeatureMode::Both)
        && cfg.metric_scaling == crate::features::MetricScaling::Zscore;
    if needs_scaler != model.features.scaler.is_some() {
        return Err("scaling statistics do not match feature config".into());
    }
    let k = model.scheme.class_count();
    let d = model.features.dim();
    let (matrix, vec_len) = match &model.params {
        ModelParams::Logreg(m) => (&m.weights, m.bias.len()),
        ModelParams::NaiveBayes(m) => (&m.log_likelihood, m.log_prior.len()),
        ModelParams::LinearSvc(m) => (&m.weights, m.bias.len()),
    };
    if !matrix.shape_ok() {
        return Err(format!(
            "matrix declares {}x{} but holds {} values",
            matrix.rows,
            matrix.cols,
            matrix.values.len()
        ));
    }
    if matrix.rows != k || vec_len != k {
        return Err(format!("parameters have {} classes, scheme has {k}", matrix.rows));
    }
    if matrix.cols != d {
        return Err(format!("parameters have {} columns, features produce {d}", matrix.cols));
    }
    Ok(())
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), PersistError> {
    let mut buf = Vec::new();
    write_model(&mut buf, model)?;
    fs::write(path, buf).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, PersistError> {
    let bytes = fs::read(path).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMode;
    use crate::models::{train_naive_bayes, NaiveBayesParams};
    use crate::textmetrics::tokenize;

    fn tiny_model() -> TrainedModel {
        let docs6: Vec<_> = ["define a stack", "explain a heap", "design a compiler"]
            .iter()
            .map(|t| tokenize(t).unwrap())
            .collect();
        let features = FittedFeatures::fit(&docs6, FeatureConfig::new(FeatureMode::Counts)).unwrap();
        let x = features.transform_all(&docs6).unwrap();
        let nb = train_naive_bayes(&x, &[0, 1, 2], 3, &NaiveBayesParams::default()).unwrap();
        TrainedModel {
            scheme: LabelScheme::Merged3,
            features,
            params: ModelParams::NaiveBayes(nb),
        }
    }

    fn to_bytes(m: &TrainedModel) -> Vec<u8> {
        let mut buf = Vec::new();
        write_model(&mut buf, m).unwrap();
        buf
    }

    #[test]
    fn version_comes_first() {
        let bytes = to_bytes(&tiny_model());
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("{\n  \"format_version\": 1,"));
    }

    #[test]
    fn round_trip_is_exact() {
        let m = tiny_model();
        assert_eq!(read_model(&to_bytes(&m)).unwrap(), m);
    }

    #[test]
    fn future_version_rejected() {
        let text = String::from_utf8(to_bytes(&tiny_model())).unwrap();
        let future = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(
            read_model(future.as_bytes()),
            Err(PersistError::VersionMismatch { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = to_bytes(&tiny_model());
        let cut = &bytes[..bytes.len() / 2];
        match read_model(cut) {
            Err(PersistError::CorruptFile { offset, .. }) => assert!(offset <= cut.len() && offset > 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inconsistent_shapes_are_corrupt() {
        let text = String::from_utf8(to_bytes(&tiny_model())).unwrap();
        let bad = text.replacen("\"name\": \"merged3\"", "\"name\": \"merged4\"", 1);
        assert!(matches!(
            read_model(bad.as_bytes()),
            Err(PersistError::CorruptFile { .. })
        ));
        let bad = text.replacen("\"kind\": \"naive_bayes\"", "\"kind\": \"logreg\"", 1);
        assert!(matches!(
            read_model(bad.as_bytes()),
            Err(PersistError::CorruptFile { .. })
        ));
    }

    #[test]
    fn byte_offsets_follow_lines() {
        let b = b"ab\ncd\nef";
        assert_eq!(byte_offset(b, 1, 1), 0);
        assert_eq!(byte_offset(b, 2, 2), 4);
        assert_eq!(byte_offset(b, 3, 3), 8);
    }
}
