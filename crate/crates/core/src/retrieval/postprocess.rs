//! Cleanup applied to a matched book span before it becomes a transcript:
//! digits are replaced by what the speaker actually said, and rare hyphen or
//! apostrophe word forms are simplified.

use std::collections::{HashMap, HashSet};

use super::align::{AlignOp, AlignmentResult};
use crate::textnorm::Orthography;

pub fn has_digit(word: &str) -> bool {
    word.chars().any(char::is_numeric)
}

/// Replaces every digit-bearing reference word by the pseudo-label words
/// aligned to it.
///
/// `aligned` must relate `pseudo` (query side) to `matched` (reference side).
/// A digit word takes the pseudo word it is matched or substituted with plus
/// the runs of inserted pseudo words directly around it, so "401" aligned
/// against "four o one" becomes three words. A digit word with nothing
/// aligned to it (a page number nobody read) is dropped, as are digit words
/// outside the aligned span.
pub fn replace_numbers<S: AsRef<str>>(aligned: &AlignmentResult, matched: &[S], pseudo: &[S]) -> Vec<String> {
    let mut out = Vec::with_capacity(matched.len());
    let keep = |w: &S, out: &mut Vec<String>| {
        if !has_digit(w.as_ref()) {
            out.push(w.as_ref().to_string());
        }
    };
    let span_start = aligned.ref_span.start.min(matched.len());
    let span_end = aligned.ref_span.end.min(matched.len()).max(span_start);
    for w in &matched[..span_start] {
        keep(w, &mut out);
    }

    let ops = &aligned.ops;
    let mut claimed = vec![false; ops.len()];
    for k in 0..ops.len() {
        let (reference, query) = match ops[k] {
            AlignOp::Match { query, reference } | AlignOp::Substitute { query, reference } => (reference, Some(query)),
            AlignOp::Delete { reference } => (reference, None),
            AlignOp::Insert { .. } => continue,
        };
        let word = matched[reference].as_ref();
        if !has_digit(word) {
            out.push(word.to_string());
            continue;
        }
        let mut before = k;
        while before > 0 && matches!(ops[before - 1], AlignOp::Insert { .. }) && !claimed[before - 1] {
            before -= 1;
        }
        let mut after = k + 1;
        while after < ops.len() && matches!(ops[after], AlignOp::Insert { .. }) {
            after += 1;
        }
        for (idx, op) in ops.iter().enumerate().take(after).skip(before) {
            claimed[idx] = true;
            match *op {
                AlignOp::Insert { query } => out.push(pseudo[query].as_ref().to_string()),
                _ if idx == k => {
                    if let Some(q) = query {
                        out.push(pseudo[q].as_ref().to_string());
                    }
                }
                _ => {}
            }
        }
    }

    for w in &matched[span_end..] {
        keep(w, &mut out);
    }
    out
}

/// Number of distinct books each word appears in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BookFrequency {
    counts: HashMap<String, usize>,
}

impl BookFrequency {
    pub fn from_books<'a, I, S>(books: I) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for book in books {
            let distinct: HashSet<&str> = book.iter().map(AsRef::as_ref).collect();
            for w in distinct {
                *counts.entry(w.to_string()).or_insert(0) += 1;
            }
        }
        Self { counts }
    }

    pub fn insert(&mut self, word: impl Into<String>, books: usize) {
        self.counts.insert(word.into(), books);
    }

    pub fn count(&self, word: &str) -> usize {
        self.counts.get(word).copied().unwrap_or(0)
    }
}

/// Configuration of the hyphen/apostrophe heuristics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordformRules {
    /// Words seen in fewer distinct books than this are rare.
    pub rare_threshold: usize,
    pub hyphens: Vec<char>,
    pub apostrophes: Vec<char>,
    pub split_hyphens: bool,
    pub strip_apostrophes: bool,
}

impl WordformRules {
    pub fn from_orthography(orth: &Orthography, rare_threshold: usize) -> Self {
        Self {
            rare_threshold,
            hyphens: orth.hyphens().to_vec(),
            apostrophes: orth.apostrophes().to_vec(),
            split_hyphens: true,
            strip_apostrophes: true,
        }
    }

    fn is_rare(&self, word: &str, freq: &BookFrequency) -> bool {
        freq.count(word) < self.rare_threshold
    }
}

impl Default for WordformRules {
    fn default() -> Self {
        Self {
            rare_threshold: 3,
            hyphens: vec!['-', '\u{2010}'],
            apostrophes: vec!['\'', '\u{2019}'],
            split_hyphens: true,
            strip_apostrophes: true,
        }
    }
}

/// Rewrites rare hyphenated and apostrophe-bearing words.
///
/// A rare hyphenated word is split at its hyphens. A rare word with an
/// apostrophe loses the apostrophe, unless the stripped form is rare as well,
/// in which case it is kept as is. Frequent forms are untouched.
pub fn fix_rare_wordforms<S: AsRef<str>>(words: &[S], freq: &BookFrequency, rules: &WordformRules) -> Vec<String> {
    let mut out = Vec::with_capacity(words.len());
    for w in words {
        let w = w.as_ref();
        let hyphenated = w.chars().any(|c| rules.hyphens.contains(&c));
        if rules.split_hyphens && hyphenated && rules.is_rare(w, freq) {
            for part in w.split(|c| rules.hyphens.contains(&c)).filter(|p| !p.is_empty()) {
                out.push(fix_apostrophe(part, freq, rules));
            }
        } else {
            out.push(fix_apostrophe(w, freq, rules));
        }
    }
    out
}

fn fix_apostrophe(word: &str, freq: &BookFrequency, rules: &WordformRules) -> String {
    if !rules.strip_apostrophes || !word.chars().any(|c| rules.apostrophes.contains(&c)) || !rules.is_rare(word, freq) {
        return word.to_string();
    }
    let stripped: String = word.chars().filter(|c| !rules.apostrophes.contains(c)).collect();
    if stripped.is_empty() || rules.is_rare(&stripped, freq) {
        word.to_string()
    } else {
        stripped
    }
}
