//! Text normalization shared by every stage: NFKC, end-of-line hyphen joining,
//! removal of unwanted character classes, lowercasing, orthography filtering
//! and whitespace tokenization.
//!
//! Orthographies are data, not code. The file format is line based:
//!
//! ```text
//! # comment
//! @language en
//! @apostrophe U+0027 U+2019
//! @hyphen U+002D U+2010
//! U+0061..U+007A
//! U+00E9
//! ```
//!
//! Every non-directive line adds one code point or one inclusive range to the
//! set of valid characters. `@apostrophe` and `@hyphen` lines name the
//! characters that may appear inside words in those roles.

use std::ops::{Range, RangeInclusive};
use std::path::Path;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum OrthographyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("orthography has no valid characters")]
    Empty,
    #[error("character {0:?} cannot be an apostrophe or hyphen (whitespace)")]
    WhitespaceMarker(char),
    #[error("character {0:?} is declared both as apostrophe and hyphen")]
    AmbiguousMarker(char),
    #[error("no built-in orthography for language '{0}'")]
    UnknownLanguage(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("input is not valid UTF-8: {0}")]
    InvalidUtf8(#[from] std::str::Utf8Error),
}

const BUILTIN: &[(&str, &str)] = &[
    ("de", include_str!("../data/orthography/de.txt")),
    ("en", include_str!("../data/orthography/en.txt")),
    ("es", include_str!("../data/orthography/es.txt")),
    ("fr", include_str!("../data/orthography/fr.txt")),
    ("it", include_str!("../data/orthography/it.txt")),
    ("nl", include_str!("../data/orthography/nl.txt")),
    ("pl", include_str!("../data/orthography/pl.txt")),
    ("pt", include_str!("../data/orthography/pt.txt")),
];

/// Characters allowed in normalized text for one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orthography {
    pub language_id: String,
    /// Sorted, merged, inclusive ranges.
    valid: Vec<RangeInclusive<char>>,
    apostrophes: Vec<char>,
    hyphens: Vec<char>,
}

impl Orthography {
    pub fn new(
        language_id: impl Into<String>,
        valid: impl IntoIterator<Item = RangeInclusive<char>>,
        apostrophes: impl IntoIterator<Item = char>,
        hyphens: impl IntoIterator<Item = char>,
    ) -> Result<Self, OrthographyError> {
        let mut ranges: Vec<RangeInclusive<char>> =
            valid.into_iter().filter(|r| r.start() <= r.end()).collect();
        if ranges.is_empty() {
            return Err(OrthographyError::Empty);
        }
        ranges.sort_by_key(|r| *r.start());
        let mut merged: Vec<RangeInclusive<char>> = Vec::with_capacity(ranges.len());
        for r in ranges {
            if let Some(last) = merged.last_mut() {
                if (*r.start() as u32) <= (*last.end() as u32).saturating_add(1) {
                    if r.end() > last.end() {
                        *last = *last.start()..=*r.end();
                    }
                    continue;
                }
            }
            merged.push(r);
        }
        let mut apostrophes: Vec<char> = apostrophes.into_iter().collect();
        let mut hyphens: Vec<char> = hyphens.into_iter().collect();
        apostrophes.sort_unstable();
        apostrophes.dedup();
        hyphens.sort_unstable();
        hyphens.dedup();
        for &c in apostrophes.iter().chain(&hyphens) {
            if c.is_whitespace() {
                return Err(OrthographyError::WhitespaceMarker(c));
            }
        }
        if let Some(&c) = apostrophes.iter().find(|c| hyphens.binary_search(c).is_ok()) {
            return Err(OrthographyError::AmbiguousMarker(c));
        }
        Ok(Self {
            language_id: language_id.into(),
            valid: merged,
            apostrophes,
            hyphens,
        })
    }

    pub fn parse(text: &str) -> Result<Self, OrthographyError> {
        let mut language = String::from("und");
        let mut valid = Vec::new();
        let mut apostrophes = Vec::new();
        let mut hyphens = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| OrthographyError::Parse { line: line_no, msg };
            if let Some(rest) = line.strip_prefix('@') {
                let mut parts = rest.split_whitespace();
                let directive = parts.next().unwrap_or_default();
                match directive {
                    "language" => {
                        language = parts
                            .next()
                            .ok_or_else(|| err("missing language id".into()))?
                            .to_string();
                    }
                    "apostrophe" | "hyphen" => {
                        for p in parts {
                            let c = parse_code_point(p).map_err(err)?;
                            if directive == "apostrophe" {
                                apostrophes.push(c);
                            } else {
                                hyphens.push(c);
                            }
                        }
                    }
                    other => return Err(err(format!("unknown directive '@{other}'"))),
                }
                continue;
            }
            let range = match line.split_once("..") {
                Some((lo, hi)) => {
                    let lo = parse_code_point(lo.trim()).map_err(err)?;
                    let hi = parse_code_point(hi.trim()).map_err(err)?;
                    if lo > hi {
                        return Err(err(format!("empty range {lo:?}..{hi:?}")));
                    }
                    lo..=hi
                }
                None => {
                    let c = parse_code_point(line).map_err(err)?;
                    c..=c
                }
            };
            valid.push(range);
        }
        Self::new(language, valid, apostrophes, hyphens)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, OrthographyError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// One of the orthographies shipped with the crate (`en`, `de`, `fr`, ...).
    pub fn builtin(language_id: &str) -> Result<Self, OrthographyError> {
        BUILTIN
            .iter()
            .find(|(id, _)| *id == language_id)
            .ok_or_else(|| OrthographyError::UnknownLanguage(language_id.to_string()))
            .and_then(|(_, text)| Self::parse(text))
    }

    pub fn is_valid(&self, c: char) -> bool {
        self.valid
            .binary_search_by(|r| {
                if *r.end() < c {
                    std::cmp::Ordering::Less
                } else if *r.start() > c {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .is_ok()
    }

    pub fn is_apostrophe(&self, c: char) -> bool {
        self.apostrophes.binary_search(&c).is_ok()
    }

    pub fn is_hyphen(&self, c: char) -> bool {
        self.hyphens.binary_search(&c).is_ok()
    }

    /// True for any character allowed to appear in an output token.
    pub fn allows(&self, c: char) -> bool {
        self.is_valid(c) || self.is_apostrophe(c) || self.is_hyphen(c)
    }

    pub fn apostrophes(&self) -> &[char] {
        &self.apostrophes
    }

    pub fn hyphens(&self) -> &[char] {
        &self.hyphens
    }

    pub fn valid_ranges(&self) -> &[RangeInclusive<char>] {
        &self.valid
    }
}

fn parse_code_point(s: &str) -> Result<char, String> {
    let hex = s
        .strip_prefix("U+")
        .or_else(|| s.strip_prefix("u+"))
        .ok_or_else(|| format!("expected U+XXXX, got '{s}'"))?;
    let value = u32::from_str_radix(hex, 16).map_err(|e| format!("bad code point '{s}': {e}"))?;
    char::from_u32(value).ok_or_else(|| format!("not a Unicode scalar value: '{s}'"))
}

/// Normalized word sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizedText {
    pub tokens: Vec<String>,
    /// Byte range of each token in the raw input, when tracked.
    pub source_span_map: Option<Vec<Range<usize>>>,
}

impl NormalizedText {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        Self {
            tokens,
            source_span_map: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by single spaces.
    pub fn render(&self) -> String {
        self.tokens.join(" ")
    }
}

const DEFAULT_HYPHENS: &[char] = &['-', '\u{2010}', '\u{00AD}'];

/// Joins words split by a hyphen at the end of a line, using `-`, U+2010 and
/// the soft hyphen as hyphen characters.
pub fn join_eol_hyphens(raw: &str) -> String {
    join_eol_hyphens_with(raw, |c| DEFAULT_HYPHENS.contains(&c))
}

/// Removes `hyphen [ \t]* linebreak [ \t]*` when it sits between two word
/// characters, joining the fragments. Other hyphens are left alone.
pub fn join_eol_hyphens_with(raw: &str, is_hyphen: impl Fn(char) -> bool) -> String {
    let mut out = String::with_capacity(raw.len());
    for_each_kept_char(raw, &is_hyphen, |_, c| out.push(c));
    out
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || unicode_normalization::char::is_combining_mark(c)
}

/// Walks `raw`, skipping end-of-line hyphenation breaks, and calls `f` with
/// the byte offset and value of every kept character.
fn for_each_kept_char(raw: &str, is_hyphen: &impl Fn(char) -> bool, mut f: impl FnMut(usize, char)) {
    let chars: Vec<(usize, char)> = raw.char_indices().collect();
    let mut prev: Option<char> = None;
    let mut i = 0;
    while i < chars.len() {
        let (offset, c) = chars[i];
        if is_hyphen(c) && prev.is_some_and(is_word_char) {
            if let Some(resume) = eol_break_end(&chars, i + 1) {
                i = resume;
                continue;
            }
        }
        f(offset, c);
        prev = Some(c);
        i += 1;
    }
}

/// If `chars[from..]` is `[ \t]* linebreak [ \t]* word-char`, returns the
/// index of that word char.
fn eol_break_end(chars: &[(usize, char)], from: usize) -> Option<usize> {
    let mut j = from;
    while j < chars.len() && matches!(chars[j].1, ' ' | '\t') {
        j += 1;
    }
    match chars.get(j).map(|&(_, c)| c) {
        Some('\r') => {
            j += 1;
            if chars.get(j).map(|&(_, c)| c) == Some('\n') {
                j += 1;
            }
        }
        Some('\n') => j += 1,
        _ => return None,
    }
    while j < chars.len() && matches!(chars[j].1, ' ' | '\t') {
        j += 1;
    }
    match chars.get(j) {
        Some(&(_, c)) if is_word_char(c) => Some(j),
        _ => None,
    }
}

/// Superscript and subscript code points. NFKC would fold these into plain
/// digits and letters, so they are removed before it runs.
pub fn is_sub_or_superscript(c: char) -> bool {
    matches!(c,
        '\u{00AA}' | '\u{00B2}' | '\u{00B3}' | '\u{00B9}' | '\u{00BA}'
        | '\u{02B0}'..='\u{02B8}'
        | '\u{02E0}'..='\u{02E4}'
        | '\u{1D2C}'..='\u{1D6A}'
        | '\u{1D78}'
        | '\u{1D9B}'..='\u{1DBF}'
        | '\u{2070}'..='\u{209F}'
        | '\u{2C7C}'..='\u{2C7D}'
        | '\u{A770}'
        | '\u{A7F8}'..='\u{A7F9}'
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    /// Part of a word.
    Word,
    Apostrophe,
    Hyphen,
    /// Word character outside the orthography: dropped without splitting.
    Drop,
    /// Whitespace, punctuation, symbols, emoji, control characters.
    Separator,
}

fn classify(c: char, orth: &Orthography) -> CharClass {
    if orth.is_apostrophe(c) {
        CharClass::Apostrophe
    } else if orth.is_hyphen(c) {
        CharClass::Hyphen
    } else if is_word_char(c) {
        if orth.is_valid(c) {
            CharClass::Word
        } else {
            CharClass::Drop
        }
    } else {
        CharClass::Separator
    }
}

/// Normalizes raw text into lowercase, orthography-filtered word tokens.
///
/// Steps, in order: removal of sub/superscripts, NFKC, end-of-line hyphen
/// joining, lowercasing, removal of punctuation/symbols/emoji/control
/// characters (they split words), dropping of word characters outside the
/// orthography, whitespace tokenization. Hyphens are trimmed from token
/// edges; apostrophes are kept anywhere inside a token that has at least one
/// letter or digit.
pub fn normalize(raw: &str, orth: &Orthography) -> NormalizedText {
    let mut chars: Vec<(char, Range<usize>)> = Vec::with_capacity(raw.len());
    let mut cluster = String::new();
    let mut cluster_span: Option<Range<usize>> = None;
    let flush = |cluster: &mut String, span: &mut Option<Range<usize>>, out: &mut Vec<(char, Range<usize>)>| {
        if let Some(span) = span.take() {
            for c in cluster.nfkc() {
                for lc in c.to_lowercase() {
                    out.push((lc, span.clone()));
                }
            }
        }
        cluster.clear();
    };
    let is_hyphen = |c: char| orth.is_hyphen(c) || c == '\u{00AD}';
    // Clusters are a starter followed by its combining marks; each cluster
    // is NFKC-normalized as a unit so composition still happens.
    let mut raw_kept: Vec<(usize, char)> = Vec::with_capacity(raw.len());
    for_each_kept_char(raw, &is_hyphen, |offset, c| {
        if !is_sub_or_superscript(c) {
            raw_kept.push((offset, c));
        }
    });
    for (offset, c) in raw_kept {
        let span = offset..offset + c.len_utf8();
        let starter = !unicode_normalization::char::is_combining_mark(c);
        if starter {
            flush(&mut cluster, &mut cluster_span, &mut chars);
        }
        cluster.push(c);
        cluster_span = Some(match cluster_span.take() {
            Some(s) => s.start..span.end,
            None => span,
        });
    }
    flush(&mut cluster, &mut cluster_span, &mut chars);

    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut current = String::new();
    let mut current_span: Option<Range<usize>> = None;
    for (c, span) in chars {
        match classify(c, orth) {
            CharClass::Separator => {
                finish_token(&mut current, &mut current_span, orth, &mut tokens, &mut spans);
            }
            CharClass::Drop => {}
            CharClass::Word | CharClass::Apostrophe | CharClass::Hyphen => {
                current.push(c);
                current_span = Some(match current_span.take() {
                    Some(s) => s.start..span.end,
                    None => span,
                });
            }
        }
    }
    finish_token(&mut current, &mut current_span, orth, &mut tokens, &mut spans);
    NormalizedText {
        tokens,
        source_span_map: Some(spans),
    }
}

/// Accepts raw bytes, rejecting invalid UTF-8.
pub fn normalize_bytes(raw: &[u8], orth: &Orthography) -> Result<NormalizedText, NormalizeError> {
    Ok(normalize(std::str::from_utf8(raw)?, orth))
}

fn finish_token(
    current: &mut String,
    span: &mut Option<Range<usize>>,
    orth: &Orthography,
    tokens: &mut Vec<String>,
    spans: &mut Vec<Range<usize>>,
) {
    let Some(span) = span.take() else {
        current.clear();
        return;
    };
    let token = std::mem::take(current);
    if let Some(token) = settle_token(&token, orth) {
        tokens.push(token);
        spans.push(span);
    }
}

/// Brings a candidate token to a fixpoint of NFKC + lowercase + filtering and
/// trims edge hyphens. Returns `None` when nothing word-like remains.
fn settle_token(token: &str, orth: &Orthography) -> Option<String> {
    let mut current = token.to_string();
    for _ in 0..8 {
        let next: String = current
            .nfkc()
            .flat_map(char::to_lowercase)
            .filter(|&c| orth.allows(c))
            .collect();
        if next == current {
            break;
        }
        current = next;
    }
    let trimmed = current.trim_matches(|c| orth.is_hyphen(c));
    if !trimmed.chars().any(|c| orth.is_valid(c)) {
        return None;
    }
    Some(trimmed.to_string())
}
