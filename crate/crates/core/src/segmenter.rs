//! Silence-based segmentation of long timed-token streams into 10-20 s pieces.
//!
//! Silence is the time between consecutive token timestamps. From the current
//! start point the longest silence whose midpoint falls inside
//! `[start + min_len, start + max_len]` is chosen and the stream is cut at its
//! midpoint. Without such a silence the cut goes at `start + max_len`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("token {index} has start {start} after end {end}")]
    InvertedToken { index: usize, start: u64, end: u64 },
    #[error("token {index} starts at {start} before previous token ends at {prev_end}")]
    Unsorted { index: usize, start: u64, prev_end: u64 },
    #[error("min_len {min_len} ms must be smaller than max_len {max_len} ms")]
    BadBounds { min_len: u64, max_len: u64 },
}

/// A word hypothesis with millisecond timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedToken {
    #[serde(rename = "w")]
    pub word: String,
    #[serde(rename = "s")]
    pub start: u64,
    #[serde(rename = "e")]
    pub end: u64,
}

impl TimedToken {
    pub fn new(word: impl Into<String>, start: u64, end: u64) -> Self {
        Self {
            word: word.into(),
            start,
            end,
        }
    }
}

/// Tokens of one recording. The recording is taken to start at 0 ms and to
/// end at `duration_ms` or at the last token end, whichever is later.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub recording_id: String,
    pub tokens: Vec<TimedToken>,
    pub duration_ms: Option<u64>,
}

impl TokenStream {
    pub fn new(recording_id: impl Into<String>, tokens: Vec<TimedToken>) -> Self {
        Self {
            recording_id: recording_id.into(),
            tokens,
            duration_ms: None,
        }
    }

    pub fn end_ms(&self) -> u64 {
        let last = self.tokens.last().map_or(0, |t| t.end);
        self.duration_ms.map_or(last, |d| d.max(last))
    }

    pub fn validate(&self) -> Result<(), SegmentError> {
        validate_tokens(&self.tokens)
    }

    /// Reads the JSON-lines token format: one `{"w":..,"s":..,"e":..}` per line.
    pub fn from_jsonl(recording_id: impl Into<String>, text: &str) -> Result<Self, serde_json::Error> {
        let tokens = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<TimedToken>, _>>()?;
        Ok(Self::new(recording_id, tokens))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(&serde_json::to_string(t).expect("token serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn validate_tokens(tokens: &[TimedToken]) -> Result<(), SegmentError> {
    let mut prev_end = 0;
    for (index, t) in tokens.iter().enumerate() {
        if t.start > t.end {
            return Err(SegmentError::InvertedToken {
                index,
                start: t.start,
                end: t.end,
            });
        }
        if index > 0 && t.start < prev_end {
            return Err(SegmentError::Unsorted {
                index,
                start: t.start,
                prev_end,
            });
        }
        prev_end = t.end;
    }
    Ok(())
}

/// Silence between two adjacent tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    pub start: u64,
    pub end: u64,
}

impl Gap {
    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Midpoint, rounded down to the millisecond.
    pub fn midpoint(&self) -> u64 {
        self.start + (self.end - self.start) / 2
    }
}

/// One gap per adjacent token pair with `end_i < start_{i+1}`.
pub fn silence_gaps(tokens: &[TimedToken]) -> Vec<Gap> {
    tokens
        .windows(2)
        .filter(|w| w[0].end < w[1].start)
        .map(|w| Gap {
            start: w[0].end,
            end: w[1].start,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub min_len: u64,
    pub max_len: u64,
    /// How far past `start + max_len` a hard cut may move to finish a token.
    pub overrun_slack: u64,
    /// Emit the trailing remainder shorter than `min_len` as a segment.
    pub keep_residual: bool,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            min_len: 10_000,
            max_len: 20_000,
            overrun_slack: 0,
            keep_residual: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub segment_id: String,
    pub start: u64,
    pub end: u64,
    pub tokens: Vec<TimedToken>,
    /// The sub-minimum stream tail, present only with `keep_residual`.
    pub is_residual: bool,
}

impl Segment {
    pub fn duration(&self) -> u64 {
        self.end - self.start
    }

    pub fn words(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.word.clone()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segmentation {
    pub segments: Vec<Segment>,
    /// Tail `[start, end)` shorter than `min_len`, not emitted as a segment.
    pub residual: Option<(u64, u64)>,
    /// Tokens cut through by a hard cut that could not be moved.
    pub dropped: Vec<TimedToken>,
}

/// Where a cut lands and whether a token straddling it is discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cut {
    pub at: u64,
    pub dropped_token: Option<usize>,
}

/// Resolves a cut at `target` that may fall inside a token. A token finishing
/// within the slack stays in the earlier segment; otherwise one starting at or
/// after `earliest` moves to the next segment; otherwise it is dropped.
pub fn resolve_hard_cut(tokens: &[TimedToken], target: u64, earliest: u64, slack: u64) -> Cut {
    let idx = tokens.partition_point(|t| t.end <= target);
    match tokens.get(idx) {
        Some(t) if t.start < target => {
            if t.end <= target + slack {
                Cut { at: t.end, dropped_token: None }
            } else if t.start >= earliest {
                Cut { at: t.start, dropped_token: None }
            } else {
                Cut { at: target, dropped_token: Some(idx) }
            }
        }
        _ => Cut { at: target, dropped_token: None },
    }
}

/// Splits a stream at silence midpoints into segments of `min_len..=max_len`.
pub fn segment_stream(stream: &TokenStream, params: &SegmentParams) -> Result<Segmentation, SegmentError> {
    if params.min_len >= params.max_len {
        return Err(SegmentError::BadBounds {
            min_len: params.min_len,
            max_len: params.max_len,
        });
    }
    stream.validate()?;
    let tokens = &stream.tokens;
    let end = stream.end_ms();
    let gaps = silence_gaps(tokens);

    let mut bounds: Vec<(u64, u64)> = Vec::new();
    let mut dropped_idx: Vec<usize> = Vec::new();
    let mut residual = None;
    let mut start = 0u64;
    let mut gi = 0usize;
    loop {
        let remaining = end - start;
        if remaining < params.min_len {
            if remaining > 0 {
                residual = Some((start, end));
            }
            break;
        }
        if remaining <= params.max_len {
            bounds.push((start, end));
            break;
        }
        let lo = start + params.min_len;
        let hi = start + params.max_len;
        while gi < gaps.len() && gaps[gi].midpoint() < lo {
            gi += 1;
        }
        let mut best: Option<Gap> = None;
        for gap in gaps[gi..].iter().take_while(|g| g.midpoint() <= hi) {
            if best.is_none_or(|b| gap.len() > b.len()) {
                best = Some(*gap);
            }
        }
        let cut = match best {
            Some(gap) => gap.midpoint(),
            None => {
                let cut = resolve_hard_cut(tokens, hi, lo, params.overrun_slack);
                // a long token can straddle several consecutive hard cuts
                if let Some(i) = cut.dropped_token.filter(|i| dropped_idx.last() != Some(i)) {
                    log::warn!(
                        "{}: token '{}' [{}, {}] straddles a hard cut at {} ms and is dropped",
                        stream.recording_id,
                        tokens[i].word,
                        tokens[i].start,
                        tokens[i].end,
                        cut.at
                    );
                    dropped_idx.push(i);
                }
                cut.at
            }
        };
        bounds.push((start, cut));
        start = cut;
    }

    let mut segments = Vec::with_capacity(bounds.len() + 1);
    let mut ti = 0usize;
    let mut assign = |s: u64, e: u64, is_residual: bool, idx: usize| {
        let mut seg_tokens = Vec::new();
        while ti < tokens.len() && tokens[ti].start < e {
            if tokens[ti].start >= s && tokens[ti].end <= e && !dropped_idx.contains(&ti) {
                seg_tokens.push(tokens[ti].clone());
            }
            ti += 1;
        }
        // zero-length tokens sitting exactly on the end belong here too
        while ti < tokens.len() && tokens[ti].start == e && tokens[ti].end == e {
            seg_tokens.push(tokens[ti].clone());
            ti += 1;
        }
        Segment {
            segment_id: format!("{}-{:04}", stream.recording_id, idx),
            start: s,
            end: e,
            tokens: seg_tokens,
            is_residual,
        }
    };
    for (idx, &(s, e)) in bounds.iter().enumerate() {
        segments.push(assign(s, e, false, idx));
    }
    if params.keep_residual {
        if let Some((s, e)) = residual.take() {
            let idx = segments.len();
            segments.push(assign(s, e, true, idx));
        }
    }
    let dropped = dropped_idx.iter().map(|&i| tokens[i].clone()).collect();
    Ok(Segmentation {
        segments,
        residual,
        dropped,
    })
}
