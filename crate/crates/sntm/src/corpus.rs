//! Corpus loading, preprocessing, and word-level tokenization.
//!
//! File formats:
//! - corpus: one sentence per line, UTF-8;
//! - vocabulary: one token string per line, line number minus one is the
//!   token id (line 1 is the unknown token, line 2 the begin marker);
//! - style lexicon: one token string per line.
//!
//! Preprocessing drops, in order: lines longer than 120 characters, exact
//! duplicates after whitespace normalization (the first occurrence is
//! kept), and lines whose fraction of non-alphanumeric non-space
//! characters exceeds 0.3.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

pub const UNK_ID: u32 = 0;
pub const BOS_ID: u32 = 1;

pub const MAX_LINE_CHARS: usize = 120;
pub const SYMBOL_FRACTION_THRESHOLD: f64 = 0.3;

/// Bidirectional token-string to token-id mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from token strings in id order. The first entry
    /// is the unknown token, the second the begin-of-sequence marker.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 {
            return Err(Error::InvalidInput(
                "vocabulary needs at least the unknown and begin tokens".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "vocabulary line {} is empty",
                    id + 1
                )));
            }
            if index.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate vocabulary token '{tok}' at line {}",
                    id + 1
                )));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Vocabulary::from_tokens(read_utf8_lines(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        crate::container::write_atomic(path, text.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }
}

/// Reads a file as UTF-8 lines, reporting the line number of any invalid
/// byte sequence.
pub fn read_utf8_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw).map_err(|_| {
            Error::InvalidInput(format!(
                "{}: line {} is not valid UTF-8",
                path.display(),
                i + 1
            ))
        })?;
        lines.push(line.to_string());
    }
    // A trailing newline produces one empty tail entry; drop it.
    if lines.last().is_some_and(String::is_empty) {
        lines.pop();
    }
    Ok(lines)
}

/// Per-rule rejection counts from [`preprocess`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PreprocessReport {
    pub input_lines: usize,
    pub kept: usize,
    pub dropped_too_long: usize,
    pub dropped_duplicate: usize,
    pub dropped_symbol_heavy: usize,
}

fn normalize_whitespace(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn symbol_fraction(line: &str) -> f64 {
    let total = line.chars().count();
    if total == 0 {
        return 0.0;
    }
    let symbols = line
        .chars()
        .filter(|c| !c.is_alphanumeric() && !c.is_whitespace())
        .count();
    symbols as f64 / total as f64
}

/// Applies the corpus cleaning rules, returning kept lines (verbatim) plus
/// per-rule drop counts. Also returns the 1-based source line number of
/// every kept line.
pub fn preprocess(lines: &[String]) -> (Vec<String>, Vec<usize>, PreprocessReport) {
    let mut report = PreprocessReport {
        input_lines: lines.len(),
        ..Default::default()
    };
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut kept = Vec::new();
    let mut numbers = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.chars().count() > MAX_LINE_CHARS {
            report.dropped_too_long += 1;
            continue;
        }
        let normalized = normalize_whitespace(line);
        if !seen.insert(normalized) {
            report.dropped_duplicate += 1;
            continue;
        }
        if symbol_fraction(line) > SYMBOL_FRACTION_THRESHOLD {
            report.dropped_symbol_heavy += 1;
            continue;
        }
        kept.push(line.clone());
        numbers.push(i + 1);
    }
    report.kept = kept.len();
    (kept, numbers, report)
}

/// Word-level tokenization: lowercase, whitespace-split, with every
/// non-alphanumeric non-space character emitted as its own token.
/// Out-of-vocabulary words map to the unknown id; a begin marker is
/// prepended.
pub fn tokenize(line: &str, vocab: &Vocabulary) -> Vec<u32> {
    let mut ids = vec![BOS_ID];
    for word in split_words(line) {
        ids.push(vocab.id(&word).unwrap_or(UNK_ID));
    }
    ids
}

/// The tokenizer's surface segmentation, before vocabulary lookup.
pub fn split_words(line: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut run = String::new();
    for c in line.chars() {
        if c.is_alphanumeric() {
            for lower in c.to_lowercase() {
                run.push(lower);
            }
        } else {
            if !run.is_empty() {
                words.push(std::mem::take(&mut run));
            }
            if !c.is_whitespace() {
                words.push(c.to_string());
            }
        }
    }
    if !run.is_empty() {
        words.push(run);
    }
    words
}

/// Inverse of [`tokenize`] up to whitespace normalization: tokens joined by
/// single spaces, with single-symbol tokens attached to the preceding word.
/// The begin marker is skipped.
pub fn detokenize(ids: &[u32], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for &id in ids {
        if id == BOS_ID {
            continue;
        }
        let token = vocab.token(id).unwrap_or("");
        let is_symbol = token.chars().count() == 1
            && token.chars().next().is_some_and(|c| !c.is_alphanumeric());
        if !out.is_empty() && !is_symbol {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// A preprocessed, tokenized corpus for one style.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StyleCorpus {
    pub label: String,
    pub sentences: Vec<Vec<u32>>,
    /// 1-based source line number of each sentence.
    pub line_numbers: Vec<usize>,
    pub report: PreprocessReport,
}

impl StyleCorpus {
    /// Tokenizes already-preprocessed lines.
    pub fn from_lines(
        label: impl Into<String>,
        lines: &[String],
        vocab: &Vocabulary,
    ) -> StyleCorpus {
        let (kept, numbers, report) = preprocess(lines);
        let sentences = kept.iter().map(|l| tokenize(l, vocab)).collect();
        StyleCorpus {
            label: label.into(),
            sentences,
            line_numbers: numbers,
            report,
        }
    }

    pub fn load(path: &Path, label: impl Into<String>, vocab: &Vocabulary) -> Result<StyleCorpus> {
        let lines = read_utf8_lines(path)?;
        Ok(StyleCorpus::from_lines(label, &lines, vocab))
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Loads a style lexicon (one token string per line) as a set of token ids.
pub fn load_lexicon(path: &Path, vocab: &Vocabulary) -> Result<BTreeSet<u32>> {
    let lines = read_utf8_lines(path)?;
    let mut ids = BTreeSet::new();
    for (i, line) in lines.iter().enumerate() {
        let word = line.trim();
        if word.is_empty() {
            continue;
        }
        let id = vocab.id(word).ok_or_else(|| {
            Error::InvalidInput(format!(
                "{}: line {}: lexicon token '{word}' is not in the vocabulary",
                path.display(),
                i + 1
            ))
        })?;
        ids.insert(id);
    }
    Ok(ids)
}
