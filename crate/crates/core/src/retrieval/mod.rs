//! Transcript retrieval: find the book passage a pseudo-label was read from.
//!
//! Books are cut into overlapping shards, the best shard is found with a
//! bigram TF-IDF index, the pseudo-label is aligned to it (and its two
//! neighbours) with Smith-Waterman, the matched span is post-processed and
//! the result is accepted only if its WER against the pseudo-label is at most
//! the threshold.

pub mod align;
pub mod postprocess;
pub mod shard;
pub mod tfidf;
pub mod wer;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{global_align, smith_waterman, AlignOp, AlignmentResult, Scoring};
pub use postprocess::{fix_rare_wordforms, replace_numbers, BookFrequency, WordformRules};
pub use shard::{shard_book, shard_ranges, DocumentShard, ShardError};
pub use tfidf::{build_index, IndexBuilder, RetrievalOutcome, ScoredShard, ShardInfo, TfIdfIndex, Weighting};
pub use wer::{wer, word_edit_distance, WerError, WerStats};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error(transparent)]
    Shard(#[from] ShardError),
    #[error(transparent)]
    Wer(#[from] WerError),
    #[error("wer threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("malformed candidate row {line}: {msg}")]
    BadRow { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalParams {
    pub shard_size: usize,
    pub shard_stride: usize,
    pub wer_threshold: f64,
    /// Shards on each side of the best one that are aligned as well.
    pub neighbor_shards: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            shard_size: 1250,
            shard_stride: 1000,
            wer_threshold: 0.40,
            neighbor_shards: 1,
        }
    }
}

impl RetrievalParams {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        shard_ranges(0, self.shard_size, self.shard_stride)?;
        if !(0.0..=1.0).contains(&self.wer_threshold) {
            return Err(RetrievalError::BadThreshold(self.wer_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceptance {
    pub wer: f64,
    pub accepted: bool,
}

/// Accepts a candidate iff `wer(candidate, pseudo) <= threshold`; a WER
/// strictly above the threshold rejects.
pub fn accept_candidate<S: AsRef<str>>(candidate: &[S], pseudo: &[S], threshold: f64) -> Result<Acceptance, WerError> {
    let cand: Vec<&str> = candidate.iter().map(AsRef::as_ref).collect();
    let pseudo: Vec<&str> = pseudo.iter().map(AsRef::as_ref).collect();
    let stats = WerStats::compute(&cand, &pseudo)?;
    // edits / n <= t, evaluated without dividing
    let accepted = (stats.edits as f64) <= threshold * stats.ref_words as f64 + 1e-9;
    Ok(Acceptance {
        wer: stats.rate(),
        accepted,
    })
}

/// A retrieved label with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTranscript {
    pub segment_id: String,
    pub book_id: String,
    /// Word range of the matched span in the normalized book.
    pub offset_start: usize,
    pub offset_end: usize,
    pub words: Vec<String>,
    pub pseudo_wer: f64,
    pub accepted: bool,
}

pub const CANDIDATE_TSV_HEADER: &str = "segment_id\tbook_id\toffset_start\toffset_end\twer\taccepted\ttranscript";

impl CandidateTranscript {
    pub fn source(&self) -> Range<usize> {
        self.offset_start..self.offset_end
    }

    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.6}\t{}\t{}",
            self.segment_id,
            self.book_id,
            self.offset_start,
            self.offset_end,
            self.pseudo_wer,
            self.accepted,
            self.words.join(" ")
        )
    }

    pub fn from_tsv_row(line_no: usize, line: &str) -> Result<Self, RetrievalError> {
        let bad = |msg: &str| RetrievalError::BadRow {
            line: line_no,
            msg: msg.to_string(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(bad(&format!("expected 7 columns, found {}", cols.len())));
        }
        Ok(Self {
            segment_id: cols[0].to_string(),
            book_id: cols[1].to_string(),
            offset_start: cols[2].parse().map_err(|_| bad("offset_start"))?,
            offset_end: cols[3].parse().map_err(|_| bad("offset_end"))?,
            pseudo_wer: cols[4].parse().map_err(|_| bad("wer"))?,
            accepted: cols[5].parse().map_err(|_| bad("accepted"))?,
            words: cols[6].split_whitespace().map(str::to_string).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateOutcome {
    /// No shard shares a bigram with the pseudo-label, or nothing aligned.
    NoMatch,
    Candidate(CandidateTranscript),
}

/// Everything needed to retrieve transcripts from one book. Immutable once
/// built, so segments can be processed concurrently.
#[derive(Debug)]
pub struct BookRetriever {
    book_id: String,
    words: Vec<String>,
    shards: Vec<Range<usize>>,
    index: TfIdfIndex,
    params: RetrievalParams,
    scoring: Scoring,
}

impl BookRetriever {
    pub fn new(book_id: impl Into<String>, words: Vec<String>, params: RetrievalParams) -> Result<Self, RetrievalError> {
        params.validate()?;
        let book_id = book_id.into();
        let shards = shard_ranges(words.len(), params.shard_size, params.shard_stride)?;
        let mut builder = IndexBuilder::new();
        for (i, r) in shards.iter().enumerate() {
            let info = ShardInfo {
                shard_id: i as u32,
                book_id: book_id.clone(),
                word_offset: r.start,
                len: r.len(),
            };
            builder.add_words(info, &words[r.clone()]);
        }
        Ok(Self {
            book_id,
            words,
            shards,
            index: builder.seal(),
            params,
            scoring: Scoring::default(),
        })
    }

    pub fn book_id(&self) -> &str {
        &self.book_id
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index(&self) -> &TfIdfIndex {
        &self.index
    }

    /// Word range searched when shard `best` wins retrieval.
    pub fn search_window(&self, best: usize) -> Range<usize> {
        let lo = best.saturating_sub(self.params.neighbor_shards);
        let hi = (best + self.params.neighbor_shards).min(self.shards.len() - 1);
        self.shards[lo].start..self.shards[hi].end
    }

    /// Locates the span of the book matching `pseudo` without post-processing.
    pub fn locate<S: AsRef<str>>(&self, pseudo: &[S]) -> Option<(Range<usize>, AlignmentResult)> {
        let best = self.index.retrieve(pseudo, 1).best().copied()?;
        let window = self.search_window(best.index);
        let pseudo: Vec<&str> = pseudo.iter().map(AsRef::as_ref).collect();
        let reference: Vec<&str> = self.words[window.clone()].iter().map(String::as_str).collect();
        let aligned = smith_waterman(&pseudo, &reference, &self.scoring);
        if aligned.is_empty() {
            return None;
        }
        let span = window.start + aligned.ref_span.start..window.start + aligned.ref_span.end;
        Some((span, aligned))
    }

    /// Retrieves, aligns, post-processes and scores a candidate transcript.
    pub fn candidate<S: AsRef<str>>(
        &self,
        segment_id: &str,
        pseudo: &[S],
        wordforms: Option<(&BookFrequency, &WordformRules)>,
    ) -> CandidateOutcome {
        let Some((span, _)) = self.locate(pseudo) else {
            return CandidateOutcome::NoMatch;
        };
        let pseudo: Vec<&str> = pseudo.iter().map(AsRef::as_ref).collect();
        let matched: Vec<&str> = self.words[span.clone()].iter().map(String::as_str).collect();
        let aligned = global_align(&pseudo, &matched, &self.scoring);
        let mut words = replace_numbers(&aligned, &matched, &pseudo);
        if let Some((freq, rules)) = wordforms {
            words = fix_rare_wordforms(&words, freq, rules);
        }
        let acceptance = accept_candidate(&words, &pseudo.iter().map(|s| s.to_string()).collect::<Vec<_>>(), self.params.wer_threshold)
            .expect("pseudo-label has at least two words");
        CandidateOutcome::Candidate(CandidateTranscript {
            segment_id: segment_id.to_string(),
            book_id: self.book_id.clone(),
            offset_start: span.start,
            offset_end: span.end,
            words,
            pseudo_wer: acceptance.wer,
            accepted: acceptance.accepted,
        })
    }
}
