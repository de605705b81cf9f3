//! Synthetic labeled questions built from per-level action verbs slotted into
//! per-level sentence templates over a pool of computer-science topics.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use thiserror::Error;

use crate::dataset::{seeded_rng, BloomLevel, QuestionRecord, RngStream};

pub const DEFAULT_BANKS_TSV: &str = include_str!("../data/banks.tsv");

const VERB_SLOT: &str = "{verb}";
const TOPIC_SLOT: &str = "{topic}";

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("verb {verb:?} listed under both {first} and {second}")]
    DuplicateVerb {
        verb: String,
        first: BloomLevel,
        second: BloomLevel,
    },
    #[error("empty bank: {0}")]
    EmptyBank(String),
    #[error("n_per_level must be at least 1")]
    ZeroCount,
    #[error("cannot read banks file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Action verbs per level; no verb belongs to two levels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerbBank(BTreeMap<BloomLevel, Vec<String>>);

impl VerbBank {
    pub fn verbs(&self, level: BloomLevel) -> &[String] {
        self.0.get(&level).map_or(&[], Vec::as_slice)
    }

    /// The unique level a verb signals, if any.
    pub fn level_of(&self, verb: &str) -> Option<BloomLevel> {
        self.0
            .iter()
            .find(|(_, vs)| vs.iter().any(|v| v == verb))
            .map(|(l, _)| *l)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TemplateBank {
    templates: BTreeMap<BloomLevel, Vec<String>>,
    topics: Vec<String>,
}

impl TemplateBank {
    pub fn templates(&self, level: BloomLevel) -> &[String] {
        self.templates.get(&level).map_or(&[], Vec::as_slice)
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Banks {
    pub verbs: VerbBank,
    pub templates: TemplateBank,
}

fn check_template(t: &str) -> Result<(), String> {
    if !t.starts_with(VERB_SLOT) {
        return Err(format!("template must start with {VERB_SLOT}: {t:?}"));
    }
    if t.matches(VERB_SLOT).count() != 1 || t.matches(TOPIC_SLOT).count() != 1 {
        return Err(format!(
            "template needs exactly one {VERB_SLOT} and one {TOPIC_SLOT}: {t:?}"
        ));
    }
    Ok(())
}

impl Banks {
    /// Parses `LEVEL<TAB>value` lines. See `data/banks.tsv` for the format.
    pub fn parse(text: &str) -> Result<Self, DatagenError> {
        let mut banks = Banks::default();
        let mut verb_owner: HashMap<String, BloomLevel> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| DatagenError::Parse { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (tag, value) = raw
                .split_once('\t')
                .ok_or_else(|| err("expected `LEVEL<TAB>value`".into()))?;
            let (tag, value) = (tag.trim(), value.trim());
            if value.is_empty() {
                return Err(err("empty value".into()));
            }
            if tag.eq_ignore_ascii_case("topic") {
                banks.templates.topics.push(value.to_string());
                continue;
            }
            let level: BloomLevel = tag.parse().map_err(|_| err(format!("unknown level {tag:?}")))?;
            if value.contains('{') {
                check_template(value).map_err(err)?;
                banks
                    .templates
                    .templates
                    .entry(level)
                    .or_default()
                    .push(value.to_string());
            } else {
                let verb = value.to_lowercase();
                if verb.split_whitespace().count() != 1 {
                    return Err(err(format!("verb must be a single word: {value:?}")));
                }
                if let Some(&first) = verb_owner.get(&verb) {
                    if first != level {
                        return Err(DatagenError::DuplicateVerb {
                            verb,
                            first,
                            second: level,
                        });
                    }
                    continue;
                }
                verb_owner.insert(verb.clone(), level);
                banks.verbs.0.entry(level).or_default().push(verb);
            }
        }
        banks.validate()?;
        Ok(banks)
    }

    pub fn load(path: &Path) -> Result<Self, DatagenError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatagenError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Banks::parse(&text)
    }

    pub fn default_banks() -> Self {
        Banks::parse(DEFAULT_BANKS_TSV).expect("embedded banks parse")
    }

    fn validate(&self) -> Result<(), DatagenError> {
        if self.templates.topics.is_empty() {
            return Err(DatagenError::EmptyBank("topic pool".into()));
        }
        for level in BloomLevel::ALL {
            if self.verbs.verbs(level).is_empty() {
                return Err(DatagenError::EmptyBank(format!("verbs for {level}")));
            }
            if self.templates.templates(level).is_empty() {
                return Err(DatagenError::EmptyBank(format!("templates for {level}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub records: Vec<QuestionRecord>,
    /// Records that repeat a (verb, template, topic) triple because the
    /// level's combination space was smaller than `n_per_level`.
    pub duplicates: usize,
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn render(template: &str, verb: &str, topic: &str) -> String {
    template
        .replacen(VERB_SLOT, &capitalize(verb), 1)
        .replacen(TOPIC_SLOT, topic, 1)
}

/// `n_per_level` questions for each level, in level order. Triples are drawn
/// without replacement until a level's combinations run out.
pub fn generate(n_per_level: usize, seed: u64, banks: &Banks) -> Result<Generated, DatagenError> {
    if n_per_level == 0 {
        return Err(DatagenError::ZeroCount);
    }
    banks.validate()?;
    let mut rng = seeded_rng(seed, RngStream::Generate);
    let topics = banks.templates.topics();
    let mut records = Vec::with_capacity(n_per_level * 6);
    let mut duplicates = 0;

    for level in BloomLevel::ALL {
        let verbs = banks.verbs.verbs(level);
        let templates = banks.templates.templates(level);
        let space = verbs.len() * templates.len() * topics.len();

        let mut picks: Vec<usize> = if n_per_level <= space {
            index::sample(&mut rng, space, n_per_level).into_vec()
        } else {
            let mut all: Vec<usize> = (0..space).collect();
            all.shuffle(&mut rng);
            let extra = n_per_level - space;
            all.extend((0..extra).map(|_| rng.gen_range(0..space)));
            duplicates += extra;
            all
        };

        for combo in picks.drain(..) {
            let v = combo % verbs.len();
            let t = (combo / verbs.len()) % templates.len();
            let p = combo / (verbs.len() * templates.len());
            records.push(QuestionRecord::new(render(&templates[t], &verbs[v], &topics[p]), level));
        }
    }
    Ok(Generated { records, duplicates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::class_distribution;
    use crate::textmetrics::tokenize;

    #[test]
    fn default_banks_are_well_formed() {
        let b = Banks::default_banks();
        assert!(b.templates.topics().len() >= 30);
        assert_eq!(b.verbs.level_of("define"), Some(BloomLevel::Knowledge));
        assert_eq!(b.verbs.level_of("critique"), Some(BloomLevel::Evaluation));
        assert_eq!(b.verbs.level_of("remember"), None);
    }

    #[test]
    fn knowledge_define_example() {
        let text = render(
            "{verb} the primary functions of {topic}.",
            "define",
            "an operating system",
        );
        assert_eq!(text, "Define the primary functions of an operating system.");
    }

    #[test]
    fn generates_uniform_deterministic_corpora() {
        let b = Banks::default_banks();
        let a = generate(100, 5, &b).unwrap();
        assert_eq!(a, generate(100, 5, &b).unwrap());
        assert_ne!(a.records, generate(100, 6, &b).unwrap().records);
        assert_eq!(class_distribution(&a.records).0, [100; 6]);
        assert_eq!(a.duplicates, 0);
    }

    #[test]
    fn leading_verb_matches_label() {
        let b = Banks::default_banks();
        for r in generate(50, 1, &b).unwrap().records {
            let first = tokenize(&r.text).unwrap().tokens()[0].clone();
            assert_eq!(b.verbs.level_of(&first), Some(r.level), "{}", r.text);
        }
    }

    #[test]
    fn small_space_flags_duplicates() {
        let text = BloomLevel::ALL
            .iter()
            .map(|l| format!("{l}\tverb{}\n{l}\t{{verb}} {{topic}}.\n", l.index()))
            .collect::<String>()
            + "topic\tstacks\ntopic\tqueues\n";
        let b = Banks::parse(&text).unwrap();
        let g = generate(5, 0, &b).unwrap();
        assert_eq!(g.duplicates, 6 * 3);
        assert_eq!(g.records.len(), 30);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let bad = "Knowledge\tdefine\nKnowledge define\n";
        assert!(matches!(Banks::parse(bad), Err(DatagenError::Parse { line: 2, .. })));
        let bad = "Knowledge\tdefine\nAnalysis\tDefine\n";
        assert!(matches!(Banks::parse(bad), Err(DatagenError::DuplicateVerb { .. })));
        let bad = "Knowledge\tthe {verb} of {topic}\n";
        assert!(matches!(Banks::parse(bad), Err(DatagenError::Parse { line: 1, .. })));
        let bad = "Remembering\trecall\n";
        assert!(matches!(Banks::parse(bad), Err(DatagenError::Parse { line: 1, .. })));
        assert!(matches!(Banks::parse("topic\tx\n"), Err(DatagenError::EmptyBank(_))));
        assert!(matches!(
            generate(0, 0, &Banks::default_banks()),
            Err(DatagenError::ZeroCount)
        ));
    }
}
