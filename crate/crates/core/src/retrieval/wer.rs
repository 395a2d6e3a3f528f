//! Word-level edit distance and word error rate.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WerError {
    #[error("reference is empty")]
    EmptyReference,
}

/// Levenshtein distance over words with unit costs.
pub fn word_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit counts behind a WER value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WerStats {
    pub edits: usize,
    pub ref_words: usize,
}

impl WerStats {
    pub fn compute<T: PartialEq>(hyp: &[T], reference: &[T]) -> Result<Self, WerError> {
        if reference.is_empty() {
            return Err(WerError::EmptyReference);
        }
        Ok(Self {
            edits: word_edit_distance(hyp, reference),
            ref_words: reference.len(),
        })
    }

    pub fn rate(&self) -> f64 {
        self.edits as f64 / self.ref_words as f64
    }
}

/// `edit_distance(hyp, ref) / |ref|`.
pub fn wer<T: PartialEq>(hyp: &[T], reference: &[T]) -> Result<f64, WerError> {
    WerStats::compute(hyp, reference).map(|s| s.rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn basic_rates() {
        assert_eq!(wer(&w("a b c"), &w("a b c")).unwrap(), 0.0);
        assert_eq!(wer(&w("a x c"), &w("a b c")).unwrap(), 1.0 / 3.0);
        assert_eq!(wer(&w(""), &w("a b")).unwrap(), 1.0);
        assert_eq!(wer(&w("a b c d"), &w("a b")).unwrap(), 1.0);
    }

    #[test]
    fn empty_reference_rejected() {
        assert_eq!(wer(&w("a"), &w("")), Err(WerError::EmptyReference));
    }

    #[test]
    fn distance_is_symmetric() {
        assert_eq!(word_edit_distance(&w("kitten sat"), &w("sitting sat on")), 2);
        assert_eq!(word_edit_distance(&w("sitting sat on"), &w("kitten sat")), 2);
    }
}
