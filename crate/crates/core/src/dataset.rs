//! Question corpora: Bloom levels, label schemes, loading, balancing and
//! stratified splitting.
//!
//! All sampling uses ChaCha8 seeded with `seed_from_u64(seed)`, with a fixed
//! stream id per purpose (see [`RngStream`]), so a seed fully determines every
//! split and subsample.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the generator recorded in manifests and reports.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.3, seed_from_u64, per-purpose stream id)";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("unknown Bloom level label {0:?}")]
    UnknownLabel(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("class {0} has fewer than 2 records and cannot be split")]
    ClassTooSmall(String),
    #[error("class {0} has no records")]
    MissingClass(String),
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("unknown corpus format for {0} (expected .csv or .jsonl)")]
    UnknownFormat(String),
    #[error("unknown label scheme {0:?}")]
    UnknownScheme(String),
}

/// The six levels of the original cognitive taxonomy, lowest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BloomLevel {
    Knowledge,
    Comprehension,
    Application,
    Analysis,
    Synthesis,
    Evaluation,
}

impl BloomLevel {
    pub const ALL: [BloomLevel; 6] = [
        BloomLevel::Knowledge,
        BloomLevel::Comprehension,
        BloomLevel::Application,
        BloomLevel::Analysis,
        BloomLevel::Synthesis,
        BloomLevel::Evaluation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            BloomLevel::Knowledge => "Knowledge",
            BloomLevel::Comprehension => "Comprehension",
            BloomLevel::Application => "Application",
            BloomLevel::Analysis => "Analysis",
            BloomLevel::Synthesis => "Synthesis",
            BloomLevel::Evaluation => "Evaluation",
        }
    }
}

impl fmt::Display for BloomLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BloomLevel {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        BloomLevel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| DatasetError::UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub text: String,
    pub level: BloomLevel,
}

impl QuestionRecord {
    pub fn new(text: impl Into<String>, level: BloomLevel) -> Self {
        QuestionRecord {
            text: text.into(),
            level,
        }
    }
}

/// Surjective relabelings of the six levels. Each scheme coarsens the one
/// before it: Full6 → Merged4 → Merged3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelScheme {
    Full6,
    Merged4,
    Merged3,
}

impl LabelScheme {
    pub const ALL: [LabelScheme; 3] = [LabelScheme::Full6, LabelScheme::Merged4, LabelScheme::Merged3];

    pub fn name(self) -> &'static str {
        match self {
            LabelScheme::Full6 => "full6",
            LabelScheme::Merged4 => "merged4",
            LabelScheme::Merged3 => "merged3",
        }
    }

    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            LabelScheme::Full6 => &[
                "Knowledge",
                "Comprehension",
                "Application",
                "Analysis",
                "Synthesis",
                "Evaluation",
            ],
            LabelScheme::Merged4 => &["Knowledge", "Comprehension", "Application", "Higher-Order"],
            LabelScheme::Merged3 => &["Knowledge", "Mid-Order", "Higher-Order"],
        }
    }

    pub fn class_count(self) -> usize {
        self.class_names().len()
    }

    pub fn apply(self, level: BloomLevel) -> usize {
        use BloomLevel::*;
        match (self, level) {
            (LabelScheme::Full6, l) => l.index(),
            (LabelScheme::Merged4, Analysis | Synthesis | Evaluation) => 3,
            (LabelScheme::Merged4, l) => l.index(),
            (LabelScheme::Merged3, Knowledge) => 0,
            (LabelScheme::Merged3, Comprehension | Application) => 1,
            (LabelScheme::Merged3, Analysis | Synthesis | Evaluation) => 2,
        }
    }

    /// Maps class indices of `self` onto `coarser`, if `coarser` really is a
    /// coarsening (every class of `self` lands in exactly one class of
    /// `coarser`). Returns the lookup table indexed by `self`'s classes.
    pub fn coarsening_to(self, coarser: LabelScheme) -> Option<Vec<usize>> {
        let mut table: Vec<Option<usize>> = vec![None; self.class_count()];
        for level in BloomLevel::ALL {
            let from = self.apply(level);
            let to = coarser.apply(level);
            match table[from] {
                None => table[from] = Some(to),
                Some(prev) if prev != to => return None,
                Some(_) => {}
            }
        }
        table.into_iter().collect()
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelScheme {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LabelScheme::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| DatasetError::UnknownScheme(s.to_string()))
    }
}

/// Per-purpose ChaCha stream ids, so balancing and splitting under the same
/// seed draw independent sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    Balance = 1,
    Split = 2,
    Generate = 3,
    SvcShuffle = 4,
}

pub fn seeded_rng(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Result<Self, DatasetError> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("csv") => Ok(CorpusFormat::Csv),
            Some("jsonl") | Some("ndjson") => Ok(CorpusFormat::Jsonl),
            _ => Err(DatasetError::UnknownFormat(path.display().to_string())),
        }
    }
}

fn make_record(text: String, label: &str, row: usize) -> Result<QuestionRecord, DatasetError> {
    if text.trim().is_empty() {
        return Err(DatasetError::Parse {
            row,
            message: "question text is empty".into(),
        });
    }
    Ok(QuestionRecord {
        text,
        level: label.parse()?,
    })
}

/// Reads a `text,label` CSV. Row numbers in errors are 1-based data rows.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<QuestionRecord>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DatasetError::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (Some(text_col), Some(label_col)) = (col("text"), col("label")) else {
        return Err(DatasetError::Parse {
            row: 0,
            message: "header must contain `text` and `label` columns".into(),
        });
    };

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DatasetError::Parse {
            row,
            message: e.to_string(),
        })?;
        let (Some(text), Some(label)) = (rec.get(text_col), rec.get(label_col)) else {
            return Err(DatasetError::Parse {
                row,
                message: "missing field".into(),
            });
        };
        out.push(make_record(text.to_string(), label, row)?);
    }
    if out.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct JsonRow {
    text: String,
    label: String,
}

/// Reads one `{"text": ..., "label": ...}` object per line; blank lines are
/// skipped. Row numbers are 1-based line numbers.
pub fn read_jsonl<R: Read>(reader: R) -> Result<Vec<QuestionRecord>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|e| DatasetError::Parse {
            row,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonRow = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            row,
            message: e.to_string(),
        })?;
        out.push(make_record(parsed.text, &parsed.label, row)?);
    }
    if out.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<QuestionRecord>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        CorpusFormat::Csv => read_csv(file),
        CorpusFormat::Jsonl => read_jsonl(file),
    }
}

/// Writes the corpus as `text,label` CSV with canonical level names.
pub fn write_csv<W: Write>(writer: W, corpus: &[QuestionRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["text", "label"])?;
    for r in corpus {
        w.write_record([r.text.as_str(), r.level.name()])?;
    }
    w.flush()?;
    Ok(())
}

/// Record count per level, indexed by [`BloomLevel::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassDistribution(pub [usize; 6]);

impl ClassDistribution {
    pub fn get(&self, level: BloomLevel) -> usize {
        self.0[level.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BloomLevel, usize)> + '_ {
        BloomLevel::ALL.into_iter().map(|l| (l, self.get(l)))
    }
}

pub fn class_distribution(corpus: &[QuestionRecord]) -> ClassDistribution {
    let mut counts = [0usize; 6];
    for r in corpus {
        counts[r.level.index()] += 1;
    }
    ClassDistribution(counts)
}

fn indices_by_level(corpus: &[QuestionRecord]) -> [Vec<usize>; 6] {
    let mut groups: [Vec<usize>; 6] = Default::default();
    for (i, r) in corpus.iter().enumerate() {
        groups[r.level.index()].push(i);
    }
    groups
}

/// Downsamples every level to the smallest level's count. Kept records retain
/// their input order.
pub fn balance(corpus: &[QuestionRecord], seed: u64) -> Result<Vec<QuestionRecord>, DatasetError> {
    if corpus.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    let mut groups = indices_by_level(corpus);
    if let Some(level) = BloomLevel::ALL.into_iter().find(|l| groups[l.index()].is_empty()) {
        return Err(DatasetError::MissingClass(level.name().to_string()));
    }
    let target = groups.iter().map(Vec::len).min().unwrap_or(0);

    let mut rng = seeded_rng(seed, RngStream::Balance);
    let mut keep = vec![false; corpus.len()];
    for group in groups.iter_mut() {
        group.shuffle(&mut rng);
        for &i in group.iter().take(target) {
            keep[i] = true;
        }
    }
    Ok(corpus
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(r, _)| r.clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<QuestionRecord>,
    pub validation: Vec<QuestionRecord>,
    pub seed: u64,
    pub fraction: f64,
}

/// Number of records a class of `count` sends to validation.
pub fn validation_size(count: usize, fraction: f64) -> usize {
    ((fraction * count as f64).floor() as usize).max(1)
}

/// Per level, `max(1, floor(fraction * count))` records go to validation,
/// chosen by a seeded shuffle. Both halves keep input order.
pub fn stratified_split(corpus: &[QuestionRecord], fraction: f64, seed: u64) -> Result<SplitDataset, DatasetError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    if corpus.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    let mut groups = indices_by_level(corpus);
    let mut rng = seeded_rng(seed, RngStream::Split);
    let mut in_validation = vec![false; corpus.len()];
    for (level, group) in BloomLevel::ALL.iter().zip(groups.iter_mut()) {
        if group.is_empty() {
            continue;
        }
        if group.len() < 2 {
            return Err(DatasetError::ClassTooSmall(level.name().to_string()));
        }
        let n_val = validation_size(group.len(), fraction);
        group.shuffle(&mut rng);
        for &i in group.iter().take(n_val) {
            in_validation[i] = true;
        }
    }

    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (r, v) in corpus.iter().zip(in_validation) {
        if v {
            validation.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok(SplitDataset {
        train,
        validation,
        seed,
        fraction,
    })
}
