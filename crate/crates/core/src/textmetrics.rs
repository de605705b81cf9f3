//! Tokenizing and syllable counting, plus the four per-question measures
//! (see [`TextMetrics`]).
//!
//! Everything here is a pure function of the input text. Tokens are maximal
//! runs of alphanumeric characters, with apostrophes allowed only between two
//! alphanumerics, and are lowercased before any counting.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Embedded English function-word list, one word per line.
pub const STOPWORDS_TXT: &str = include_str!("../data/stopwords.txt");

const FK_WORDS_PER_SENTENCE: f64 = 0.39;
const FK_SYLLABLES_PER_WORD: f64 = 11.8;
const FK_INTERCEPT: f64 = 15.59;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("text contains no word tokens")]
    EmptyText,
}

/// A question broken into lowercased tokens with per-token annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedText {
    tokens: Vec<String>,
    sentence_count: usize,
    syllable_counts: Vec<usize>,
    content_flags: Vec<bool>,
}

impl TokenizedText {
    /// Builds a tokenized text from already-lowercased tokens, computing
    /// syllables and content flags with the same heuristics as [`tokenize`].
    pub fn from_tokens<S: Into<String>>(
        tokens: impl IntoIterator<Item = S>,
        sentence_count: usize,
    ) -> Result<Self, TextError> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(TextError::EmptyText);
        }
        let syllable_counts = tokens.iter().map(|t| count_syllables(t)).collect();
        let content_flags = tokens.iter().map(|t| is_content_word(t)).collect();
        Ok(TokenizedText {
            tokens,
            sentence_count: sentence_count.max(1),
            syllable_counts,
            content_flags,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn sentence_count(&self) -> usize {
        self.sentence_count
    }

    pub fn syllable_counts(&self) -> &[usize] {
        &self.syllable_counts
    }

    pub fn content_flags(&self) -> &[bool] {
        &self.content_flags
    }

    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn syllable_total(&self) -> usize {
        self.syllable_counts.iter().sum()
    }

    pub fn unique_count(&self) -> usize {
        self.tokens.iter().collect::<HashSet<_>>().len()
    }

    pub fn content_count(&self) -> usize {
        self.content_flags.iter().filter(|&&c| c).count()
    }
}

/// Length (words), Flesch-Kincaid grade, type-token ratio, lexical density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextMetrics {
    pub length_l: usize,
    pub fkgl: f64,
    pub ttr: f64,
    pub ld: f64,
}

impl TextMetrics {
    /// Values in the fixed feature order (L, FKGL, TTR, LD).
    pub fn as_array(&self) -> [f64; 4] {
        [self.length_l as f64, self.fkgl, self.ttr, self.ld]
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

pub fn tokenize(text: &str) -> Result<TokenizedText, TextError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut sentence_count = 0usize;
    let mut tokens_in_segment = 0usize;
    let mut current = String::new();

    let flush = |current: &mut String, tokens: &mut Vec<String>, seg: &mut usize| {
        if !current.is_empty() {
            tokens.push(std::mem::take(current));
            *seg += 1;
        }
    };

    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if is_apostrophe(c) && !current.is_empty() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric()) {
            current.push('\'');
        } else {
            flush(&mut current, &mut tokens, &mut tokens_in_segment);
            if is_sentence_end(c) && tokens_in_segment > 0 {
                sentence_count += 1;
                tokens_in_segment = 0;
            }
        }
    }
    flush(&mut current, &mut tokens, &mut tokens_in_segment);
    if tokens_in_segment > 0 {
        sentence_count += 1;
    }

    TokenizedText::from_tokens(tokens, sentence_count)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate with silent-e removal, never below 1.
pub fn count_syllables(word: &str) -> usize {
    let chars: Vec<char> = word.chars().collect();
    let mut groups = 0usize;
    let mut in_group = false;
    for &c in &chars {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }

    let n = chars.len();
    if groups > 1 && n >= 1 && chars[n - 1] == 'e' {
        // "-le" after a consonant is voiced (ta-ble), keep it.
        let consonant_le = n >= 3 && chars[n - 2] == 'l' && !is_vowel(chars[n - 3]);
        if !consonant_le {
            groups -= 1;
        }
    }
    groups.max(1)
}

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_TXT.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

pub fn is_content_word(word: &str) -> bool {
    !stopwords().contains(word)
}

pub fn compute_metrics(t: &TokenizedText) -> Result<TextMetrics, TextError> {
    let n_words = t.word_count();
    if n_words == 0 {
        return Err(TextError::EmptyText);
    }
    let words = n_words as f64;
    let sentences = t.sentence_count().max(1) as f64;
    let syllables = t.syllable_total() as f64;
    let fkgl = FK_WORDS_PER_SENTENCE * (words / sentences) + FK_SYLLABLES_PER_WORD * (syllables / words) - FK_INTERCEPT;
    Ok(TextMetrics {
        length_l: n_words,
        fkgl,
        ttr: t.unique_count() as f64 / words,
        ld: t.content_count() as f64 / words,
    })
}

/// Tokenize and measure in one step.
pub fn analyze_text(text: &str) -> Result<TextMetrics, TextError> {
    compute_metrics(&tokenize(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_sentence() {
        let t = tokenize("The cat sat.").unwrap();
        assert_eq!(t.tokens(), ["the", "cat", "sat"]);
        assert_eq!(t.sentence_count(), 1);
    }

    #[test]
    fn two_sentences() {
        assert_eq!(tokenize("Define X. Explain Y!").unwrap().sentence_count(), 2);
    }

    #[test]
    fn internal_apostrophe_kept() {
        let t = tokenize("don't stop").unwrap();
        assert_eq!(t.tokens(), ["don't", "stop"]);
        let t = tokenize("'quoted' words’").unwrap();
        assert_eq!(t.tokens(), ["quoted", "words"]);
        let t = tokenize("it’s").unwrap();
        assert_eq!(t.tokens(), ["it's"]);
    }

    #[test]
    fn empty_punctuation_segments_not_counted() {
        let t = tokenize("...Why? !! Because.").unwrap();
        assert_eq!(t.sentence_count(), 2);
        // no terminal punctuation still yields one sentence
        assert_eq!(tokenize("no terminator here").unwrap().sentence_count(), 1);
    }

    #[test]
    fn empty_text_rejected() {
        assert_eq!(tokenize("").unwrap_err(), TextError::EmptyText);
        assert_eq!(tokenize("  ?! -- ").unwrap_err(), TextError::EmptyText);
    }

    #[test]
    fn syllables() {
        assert_eq!(count_syllables("cat"), 1);
        assert_eq!(count_syllables("analyze"), 3);
        assert_eq!(count_syllables("the"), 1);
        assert_eq!(count_syllables("table"), 2);
        assert_eq!(count_syllables("make"), 1);
        assert_eq!(count_syllables("rhythm"), 1);
        assert_eq!(count_syllables("2024"), 1);
    }

    #[test]
    fn fkgl_the_cat_sat() {
        let m = analyze_text("The cat sat.").unwrap();
        assert!((m.fkgl - (-2.62)).abs() < 1e-9);
    }

    #[test]
    fn ttr_and_ld() {
        let t = TokenizedText::from_tokens(["the", "cat", "and", "the", "dog"], 1).unwrap();
        assert_eq!(compute_metrics(&t).unwrap().ttr, 0.8);
        let t = TokenizedText::from_tokens(["the", "cat", "sat", "on", "the", "mat"], 1).unwrap();
        assert_eq!(t.content_flags(), [false, true, true, false, false, true]);
        assert_eq!(compute_metrics(&t).unwrap().ld, 0.5);
    }

    #[test]
    fn content_words() {
        assert!(!is_content_word("the"));
        assert!(!is_content_word("is"));
        assert!(!is_content_word("and"));
        assert!(is_content_word("algorithm"));
    }

    #[test]
    fn stopword_list_is_versioned_content() {
        assert_eq!(stopwords().len(), 179);
    }

    #[test]
    fn case_folding_merges_types() {
        let m = analyze_text("The the THE").unwrap();
        assert!((m.ttr - 1.0 / 3.0).abs() < 1e-15);
    }
}
