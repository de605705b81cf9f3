//! Vectorizing questions: the four text metrics, TF-IDF or raw term counts
//! over a fitted unigram vocabulary, or metrics and TF-IDF side by side.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textmetrics::{compute_metrics, TextError, TokenizedText};

/// Train-set standard deviations below this are replaced by 1.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("no term reaches min_df = {0}")]
    EmptyVocabulary(u32),
    #[error("cannot fit features on an empty document set")]
    NoDocuments,
    #[error("min_df must be at least 1")]
    InvalidMinDf,
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("unknown feature mode {0:?}")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// `[L, FKGL, TTR, LD]`
    Metrics,
    Tfidf,
    /// TF-IDF columns followed by the four metric columns.
    Both,
    /// Raw in-vocabulary term counts, the multinomial naive Bayes input.
    Counts,
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Metrics => "metrics",
            FeatureMode::Tfidf => "tfidf",
            FeatureMode::Both => "both",
            FeatureMode::Counts => "counts",
        }
    }

    fn uses_vocabulary(self) -> bool {
        !matches!(self, FeatureMode::Metrics)
    }

    fn uses_metrics(self) -> bool {
        matches!(self, FeatureMode::Metrics | FeatureMode::Both)
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMode {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "metrics" => Ok(FeatureMode::Metrics),
            "tfidf" => Ok(FeatureMode::Tfidf),
            "both" => Ok(FeatureMode::Both),
            "counts" => Ok(FeatureMode::Counts),
            _ => Err(FeatureError::UnknownMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricScaling {
    Zscore,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub mode: FeatureMode,
    pub sublinear_tf: bool,
    pub min_df: u32,
    pub metric_scaling: MetricScaling,
}

impl FeatureConfig {
    pub fn new(mode: FeatureMode) -> Self {
        FeatureConfig {
            mode,
            sublinear_tf: false,
            min_df: 1,
            metric_scaling: MetricScaling::Zscore,
        }
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig::new(FeatureMode::Tfidf)
    }
}

/// Sparse vector with strictly increasing column indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut v = SparseVector::default();
        for (i, &x) in dense.iter().enumerate() {
            if x != 0.0 {
                v.indices.push(i);
                v.values.push(x);
            }
        }
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut d = vec![0.0; dim];
        for (i, v) in self.iter() {
            d[i] = v;
        }
        d
    }
}

/// Rows of sparse features sharing one column count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub cols: usize,
    pub rows: Vec<SparseVector>,
}

impl FeatureMatrix {
    pub fn new(cols: usize, rows: Vec<SparseVector>) -> Self {
        FeatureMatrix { cols, rows }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        FeatureMatrix {
            cols,
            rows: rows.iter().map(|r| SparseVector::from_dense(r)).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub term: String,
    pub index: usize,
    pub df: u32,
}

/// Terms in lexicographic order; a term's column is its position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    document_frequency: Vec<u32>,
    document_count: u32,
    term_to_index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn fit(docs: &[TokenizedText], min_df: u32) -> Result<Self, FeatureError> {
        if docs.is_empty() {
            return Err(FeatureError::NoDocuments);
        }
        if min_df == 0 {
            return Err(FeatureError::InvalidMinDf);
        }
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for doc in docs {
            let distinct: HashSet<&str> = doc.tokens().iter().map(String::as_str).collect();
            for t in distinct {
                *df.entry(t).or_default() += 1;
            }
        }
        let (terms, freqs): (Vec<String>, Vec<u32>) = df
            .into_iter()
            .filter(|&(_, n)| n >= min_df)
            .map(|(t, n)| (t.to_string(), n))
            .unzip();
        if terms.is_empty() {
            return Err(FeatureError::EmptyVocabulary(min_df));
        }
        Ok(Self::from_parts(terms, freqs, docs.len() as u32))
    }

    fn from_parts(terms: Vec<String>, document_frequency: Vec<u32>, document_count: u32) -> Self {
        let term_to_index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            terms,
            document_frequency,
            document_count,
            term_to_index,
        }
    }

    /// Rebuilds from serialized entries; entries must cover `0..len` exactly,
    /// each df must lie in `[1, document_count]`, and terms must be sorted.
    pub fn from_entries(entries: &[VocabEntry], document_count: u32) -> Result<Self, String> {
        let mut terms = Vec::with_capacity(entries.len());
        let mut dfs = Vec::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.index != i {
                return Err(format!("vocabulary entry {i} has index {}", e.index));
            }
            if e.df == 0 || e.df > document_count {
                return Err(format!(
                    "term {:?} has df {} outside [1, {document_count}]",
                    e.term, e.df
                ));
            }
            if i > 0 && terms[i - 1] >= e.term {
                return Err(format!("vocabulary terms not strictly sorted at index {i}"));
            }
            terms.push(e.term.clone());
            dfs.push(e.df);
        }
        Ok(Self::from_parts(terms, dfs, document_count))
    }

    pub fn entries(&self) -> Vec<VocabEntry> {
        self.terms
            .iter()
            .zip(&self.document_frequency)
            .enumerate()
            .map(|(index, (term, &df))| VocabEntry {
                term: term.clone(),
                index,
                df,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_to_index.get(term).copied()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self, index: usize) -> u32 {
        self.document_frequency[index]
    }

    pub fn document_count(&self) -> u32 {
        self.document_count
    }

    pub fn idf(&self, index: usize) -> f64 {
        smoothed_idf(self.document_count, self.document_frequency[index])
    }

    /// In-vocabulary term counts, sorted by column.
    fn term_counts(&self, doc: &TokenizedText) -> BTreeMap<usize, u32> {
        let mut counts = BTreeMap::new();
        for tok in doc.tokens() {
            if let Some(i) = self.index_of(tok) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// `ln((1 + n_docs) / (1 + df)) + 1`
pub fn smoothed_idf(n_docs: u32, df: u32) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

pub fn transform_counts(doc: &TokenizedText, vocab: &Vocabulary) -> SparseVector {
    let (indices, values) = vocab.term_counts(doc).into_iter().map(|(i, c)| (i, c as f64)).unzip();
    SparseVector { indices, values }
}

/// L2-normalized TF-IDF; all-OOV documents map to the zero vector.
pub fn transform_tfidf(doc: &TokenizedText, vocab: &Vocabulary, sublinear_tf: bool) -> SparseVector {
    let (indices, mut values): (Vec<usize>, Vec<f64>) = vocab
        .term_counts(doc)
        .into_iter()
        .map(|(i, c)| {
            let tf = if sublinear_tf { 1.0 + (c as f64).ln() } else { c as f64 };
            (i, tf * vocab.idf(i))
        })
        .unzip();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    SparseVector { indices, values }
}

/// Train-set mean and standard deviation (population) of each metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScaler {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl MetricScaler {
    pub fn fit(docs: &[TokenizedText]) -> Result<Self, FeatureError> {
        if docs.is_empty() {
            return Err(FeatureError::NoDocuments);
        }
        let rows = docs
            .iter()
            .map(|d| compute_metrics(d).map(|m| m.as_array()))
            .collect::<Result<Vec<_>, _>>()?;
        let n = rows.len() as f64;
        let mut mean = [0.0; 4];
        for r in &rows {
            for j in 0..4 {
                mean[j] += r[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = [0.0; 4];
        for r in &rows {
            for j in 0..4 {
                std[j] += (r[j] - mean[j]).powi(2);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / n).sqrt();
            if *s < STD_FLOOR {
                *s = 1.0;
            }
        }
        Ok(MetricScaler { mean, std })
    }

    pub fn scale(&self, raw: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|j| (raw[j] - self.mean[j]) / self.std[j])
    }
}

/// `[L, FKGL, TTR, LD]`, z-scored when a scaler is supplied.
pub fn transform_metrics(doc: &TokenizedText, scaler: Option<&MetricScaler>) -> Result<[f64; 4], FeatureError> {
    let raw = compute_metrics(doc)?.as_array();
    Ok(match scaler {
        Some(s) => s.scale(raw),
        None => raw,
    })
}

/// Everything needed to turn a tokenized question into a model input row.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedFeatures {
    pub config: FeatureConfig,
    pub vocabulary: Option<Vocabulary>,
    pub scaler: Option<MetricScaler>,
}

impl FittedFeatures {
    pub fn fit(train: &[TokenizedText], config: FeatureConfig) -> Result<Self, FeatureError> {
        if train.is_empty() {
            return Err(FeatureError::NoDocuments);
        }
        let vocabulary = if config.mode.uses_vocabulary() {
            Some(Vocabulary::fit(train, config.min_df)?)
        } else {
            None
        };
        let scaler = if config.mode.uses_metrics() && config.metric_scaling == MetricScaling::Zscore {
            Some(MetricScaler::fit(train)?)
        } else {
            None
        };
        Ok(FittedFeatures {
            config,
            vocabulary,
            scaler,
        })
    }

    pub fn dim(&self) -> usize {
        let v = self.vocabulary.as_ref().map_or(0, Vocabulary::len);
        match self.config.mode {
            FeatureMode::Metrics => 4,
            FeatureMode::Tfidf | FeatureMode::Counts => v,
            FeatureMode::Both => v + 4,
        }
    }

    fn vocab(&self) -> &Vocabulary {
        self.vocabulary
            .as_ref()
            .expect("vocabulary-based feature mode without a fitted vocabulary")
    }

    pub fn transform(&self, doc: &TokenizedText) -> Result<SparseVector, FeatureError> {
        match self.config.mode {
            FeatureMode::Metrics => {
                let m = transform_metrics(doc, self.scaler.as_ref())?;
                Ok(SparseVector {
                    indices: (0..4).collect(),
                    values: m.to_vec(),
                })
            }
            FeatureMode::Tfidf => Ok(transform_tfidf(doc, self.vocab(), self.config.sublinear_tf)),
            FeatureMode::Counts => Ok(transform_counts(doc, self.vocab())),
            FeatureMode::Both => {
                let offset = self.vocab().len();
                let mut v = transform_tfidf(doc, self.vocab(), self.config.sublinear_tf);
                let m = transform_metrics(doc, self.scaler.as_ref())?;
                v.indices.extend(offset..offset + 4);
                v.values.extend(m);
                Ok(v)
            }
        }
    }

    /// Row `i` of the result always corresponds to `docs[i]`.
    pub fn transform_all(&self, docs: &[TokenizedText]) -> Result<FeatureMatrix, FeatureError> {
        let rows = docs.iter().map(|d| self.transform(d)).collect::<Result<_, _>>()?;
        Ok(FeatureMatrix::new(self.dim(), rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmetrics::tokenize;

    fn doc(tokens: &[&str]) -> TokenizedText {
        TokenizedText::from_tokens(tokens.iter().copied(), 1).unwrap()
    }

    #[test]
    fn vocabulary_counts_document_frequency() {
        let docs = [doc(&["a", "b"]), doc(&["b", "c"])];
        let v = Vocabulary::fit(&docs, 1).unwrap();
        assert_eq!(v.terms(), ["a", "b", "c"]);
        assert_eq!((v.df(0), v.df(1), v.df(2)), (1, 2, 1));

        let v2 = Vocabulary::fit(&docs, 2).unwrap();
        assert_eq!(v2.terms(), ["b"]);

        let v3 = Vocabulary::fit(&[doc(&["x", "x", "x"]), doc(&["y"])], 1).unwrap();
        assert_eq!(v3.df(v3.index_of("x").unwrap()), 1);

        assert_eq!(Vocabulary::fit(&docs, 3).unwrap_err(), FeatureError::EmptyVocabulary(3));
    }

    #[test]
    fn tfidf_single_term_unit_vector() {
        let v = Vocabulary::fit(&[doc(&["a", "b"]), doc(&["b", "c"])], 1).unwrap();
        let x = transform_tfidf(&doc(&["c", "zzz"]), &v, false);
        assert_eq!(x.indices, [2]);
        assert_eq!(x.values, [1.0]);
        let z = transform_tfidf(&doc(&["zzz"]), &v, true);
        assert_eq!(z.nnz(), 0);
    }

    #[test]
    fn idf_of_ubiquitous_term_is_one() {
        let v = Vocabulary::fit(&[doc(&["a", "b"]), doc(&["b", "c"])], 1).unwrap();
        assert_eq!(v.idf(v.index_of("b").unwrap()), 1.0);
        // df=1 of N=2: ln(3/2) + 1
        assert!((v.idf(0) - (1.5f64.ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn tfidf_weights_by_hand() {
        let v = Vocabulary::fit(&[doc(&["a", "b"]), doc(&["b", "c"])], 1).unwrap();
        let x = transform_tfidf(&doc(&["a", "a", "b"]), &v, false);
        let wa = 2.0 * (1.5f64.ln() + 1.0);
        let wb = 1.0;
        let n = (wa * wa + wb * wb).sqrt();
        assert!((x.values[0] - wa / n).abs() < 1e-15);
        assert!((x.values[1] - wb / n).abs() < 1e-15);

        let s = transform_tfidf(&doc(&["a", "a", "b"]), &v, true);
        let wa = (1.0 + 2f64.ln()) * (1.5f64.ln() + 1.0);
        let n = (wa * wa + 1.0).sqrt();
        assert!((s.values[0] - wa / n).abs() < 1e-15);
    }

    #[test]
    fn zscore_degenerate_variance_gives_zeros() {
        let train = vec![tokenize("Define a stack.").unwrap(); 5];
        let f = FittedFeatures::fit(&train, FeatureConfig::new(FeatureMode::Metrics)).unwrap();
        let row = f.transform(&train[0]).unwrap();
        assert_eq!(row.values, [0.0; 4]);
        assert_eq!(f.scaler.unwrap().std, [1.0; 4]);
    }

    #[test]
    fn metrics_passthrough_and_order() {
        // L=7 over two sentences, five distinct types, three stopwords
        let d = tokenize("The graph is big. Sort the graph!").unwrap();
        let raw = transform_metrics(&d, None).unwrap();
        let m = compute_metrics(&d).unwrap();
        assert_eq!(raw, [7.0, m.fkgl, 5.0 / 7.0, 4.0 / 7.0]);
        // words/sentence 3.5, syllables: the1 graph1 is1 big1 sort1 the1 graph1 = 7
        assert!((raw[1] - (0.39 * 3.5 + 11.8 * 1.0 - 15.59)).abs() < 1e-12);
    }

    #[test]
    fn both_mode_appends_metrics() {
        let train = [
            tokenize("list the queues").unwrap(),
            tokenize("design a cache").unwrap(),
        ];
        let mut cfg = FeatureConfig::new(FeatureMode::Both);
        cfg.metric_scaling = MetricScaling::None;
        let f = FittedFeatures::fit(&train, cfg).unwrap();
        assert_eq!(f.dim(), 6 + 4);
        let row = f.transform(&train[1]).unwrap();
        assert_eq!(&row.indices[row.nnz() - 4..], [6, 7, 8, 9]);
        assert_eq!(row.values[row.nnz() - 4], 3.0);
    }

    #[test]
    fn transform_is_fit_free() {
        let train: Vec<_> = ["define a tree", "explain the heap", "judge a tree design"]
            .iter()
            .map(|t| tokenize(t).unwrap())
            .collect();
        let f = FittedFeatures::fit(&train, FeatureConfig::default()).unwrap();
        assert_eq!(f.transform_all(&train).unwrap(), f.transform_all(&train).unwrap());
    }

    #[test]
    fn vocab_entries_round_trip() {
        let v = Vocabulary::fit(&[doc(&["a", "b"]), doc(&["b", "c"])], 1).unwrap();
        assert_eq!(Vocabulary::from_entries(&v.entries(), 2).unwrap(), v);
        let mut bad = v.entries();
        bad[1].df = 3;
        assert!(Vocabulary::from_entries(&bad, 2).is_err());
    }
}
