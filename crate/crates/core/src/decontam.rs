//! Removes language-model training books that overlap held-out material,
//! either by title or by shared 5-grams.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::word_edit_distance;

pub const NGRAM: usize = 5;

#[derive(Debug, Error)]
pub enum DecontamError {
    #[error("no built-in stopword list for language {0:?}")]
    UnknownLanguage(String),
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DecontamError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DecontamError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&text))
    }

    pub fn builtin(language: &str) -> Result<Self, DecontamError> {
        let text = match language {
            "en" => include_str!("../data/stopwords/en.txt"),
            "de" => include_str!("../data/stopwords/de.txt"),
            _ => return Err(DecontamError::UnknownLanguage(language.to_string())),
        };
        Ok(Self::parse(text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy of `words` with stop words removed.
    pub fn filter<'a, S: AsRef<str>>(&self, words: &'a [S]) -> Vec<&'a str> {
        words
            .iter()
            .map(AsRef::as_ref)
            .filter(|w| !self.contains(w))
            .collect()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

/// True iff the word-level edit distance to some held-out title is 0 or 1.
/// Empty titles never match.
pub fn title_match<S: AsRef<str>, T: AsRef<str>>(candidate: &[S], heldout: &[Vec<T>]) -> bool {
    if candidate.is_empty() {
        return false;
    }
    let cand: Vec<&str> = candidate.iter().map(AsRef::as_ref).collect();
    heldout.iter().filter(|t| !t.is_empty()).any(|t| {
        let t: Vec<&str> = t.iter().map(AsRef::as_ref).collect();
        cand.len().abs_diff(t.len()) < 2 && word_edit_distance(&cand, &t) < 2
    })
}

/// Membership set of stopword-free 5-grams from held-out transcripts.
#[derive(Debug, Clone, Default)]
pub struct FiveGramIndex {
    vocab: HashMap<String, u32>,
    grams: HashSet<[u32; NGRAM]>,
    stopwords: Stopwords,
}

impl FiveGramIndex {
    pub fn new(stopwords: Stopwords) -> Self {
        Self {
            stopwords,
            ..Default::default()
        }
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    /// Removes stop words from `words` and inserts every 5-word window of
    /// what remains.
    pub fn add_text<S: AsRef<str>>(&mut self, words: &[S]) {
        let ids: Vec<u32> = self
            .stopwords
            .filter(words)
            .into_iter()
            .map(|w| {
                let next = self.vocab.len() as u32;
                *self.vocab.entry(w.to_string()).or_insert(next)
            })
            .collect();
        for win in ids.windows(NGRAM) {
            self.grams.insert(win.try_into().expect("window of NGRAM"));
        }
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn contains<S: AsRef<str>>(&self, gram: &[S]) -> bool {
        if gram.len() != NGRAM {
            return false;
        }
        let mut key = [0u32; NGRAM];
        for (k, w) in key.iter_mut().zip(gram) {
            match self.vocab.get(w.as_ref()) {
                Some(&id) => *k = id,
                None => return false,
            }
        }
        self.grams.contains(&key)
    }

    /// All indexed 5-grams as words, sorted.
    pub fn grams(&self) -> Vec<[String; NGRAM]> {
        let mut words = vec![""; self.vocab.len()];
        for (w, &id) in &self.vocab {
            words[id as usize] = w;
        }
        let mut out: Vec<[String; NGRAM]> = self
            .grams
            .iter()
            .map(|g| g.map(|id| words[id as usize].to_string()))
            .collect();
        out.sort();
        out
    }

    /// Book words mapped to ids; words unknown to the index get fresh ids
    /// above the index vocabulary so they still form distinct 5-grams.
    fn book_ids<S: AsRef<str>>(&self, words: &[S]) -> Vec<u32> {
        let mut local: HashMap<&str, u32> = HashMap::new();
        let base = self.vocab.len() as u32;
        self.stopwords
            .filter(words)
            .into_iter()
            .map(|w| match self.vocab.get(w) {
                Some(&id) => id,
                None => {
                    let next = base + local.len() as u32;
                    *local.entry(w).or_insert(next)
                }
            })
            .collect()
    }
}

pub fn build_heldout_index<S: AsRef<str>>(texts: &[Vec<S>], stopwords: Stopwords) -> FiveGramIndex {
    let mut index = FiveGramIndex::new(stopwords);
    for t in texts {
        index.add_text(t);
    }
    index
}

/// How the contamination rate counts 5-grams.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    /// Distinct 5-grams of the book.
    #[default]
    Distinct,
    /// Every 5-gram occurrence.
    Tokens,
}

/// Fraction of the book's stopword-free 5-grams that occur in the index.
/// Books with fewer than five non-stop words have rate 0.
pub fn contamination_rate<S: AsRef<str>>(book: &[S], index: &FiveGramIndex, mode: RateMode) -> f64 {
    let ids = index.book_ids(book);
    if ids.len() < NGRAM {
        return 0.0;
    }
    let windows = ids.windows(NGRAM).map(|w| <[u32; NGRAM]>::try_from(w).expect("window"));
    let (hits, total) = match mode {
        RateMode::Distinct => {
            let distinct: HashSet<[u32; NGRAM]> = windows.collect();
            let hits = distinct.iter().filter(|g| index.grams.contains(*g)).count();
            (hits, distinct.len())
        }
        RateMode::Tokens => {
            let mut hits = 0;
            let mut total = 0;
            for g in windows {
                total += 1;
                hits += index.grams.contains(&g) as usize;
            }
            (hits, total)
        }
    };
    hits as f64 / total as f64
}

/// A language-model training book, already normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmBook {
    pub book_id: String,
    pub title: Vec<String>,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    Title,
    Overlap,
    TitleAndOverlap,
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemovalReason::Title => "title",
            RemovalReason::Overlap => "overlap",
            RemovalReason::TitleAndOverlap => "title+overlap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookVerdict {
    pub book_id: String,
    pub rate: f64,
    pub title_matched: bool,
    pub removed: Option<RemovalReason>,
}

pub const REPORT_TSV_HEADER: &str = "book_id\trate\ttitle_match\tdecision";

impl BookVerdict {
    pub fn to_tsv_row(&self) -> String {
        let decision = match self.removed {
            Some(r) => format!("removed:{r}"),
            None => "kept".to_string(),
        };
        format!("{}\t{:.6}\t{}\t{}", self.book_id, self.rate, self.title_matched, decision)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecontamConfig {
    /// Books with a rate strictly above this are removed.
    pub threshold: f64,
    pub mode: RateMode,
}

impl Default for DecontamConfig {
    fn default() -> Self {
        Self {
            threshold: 0.01,
            mode: RateMode::Distinct,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecontamOutcome {
    pub kept: Vec<String>,
    pub removed: Vec<String>,
    /// One verdict per input book, in input order.
    pub report: Vec<BookVerdict>,
}

/// Removes books whose title matches a held-out title or whose
/// contamination rate exceeds the threshold. Rates are computed in parallel.
pub fn filter_corpus(
    books: &[LmBook],
    index: &FiveGramIndex,
    heldout_titles: &[Vec<String>],
    cfg: &DecontamConfig,
) -> Result<DecontamOutcome, DecontamError> {
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(DecontamError::BadThreshold(cfg.threshold));
    }
    let report: Vec<BookVerdict> = books
        .par_iter()
        .map(|b| {
            let rate = contamination_rate(&b.words, index, cfg.mode);
            let title_matched = title_match(&b.title, heldout_titles);
            let removed = match (title_matched, rate > cfg.threshold) {
                (true, true) => Some(RemovalReason::TitleAndOverlap),
                (true, false) => Some(RemovalReason::Title),
                (false, true) => Some(RemovalReason::Overlap),
                (false, false) => None,
            };
            BookVerdict {
                book_id: b.book_id.clone(),
                rate,
                title_matched,
                removed,
            }
        })
        .collect();
    let mut out = DecontamOutcome::default();
    for v in &report {
        if v.removed.is_some() {
            out.removed.push(v.book_id.clone());
        } else {
            out.kept.push(v.book_id.clone());
        }
    }
    out.report = report;
    Ok(out)
}
