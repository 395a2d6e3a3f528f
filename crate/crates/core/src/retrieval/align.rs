//! Word-level Smith-Waterman local alignment and a global (Needleman-Wunsch)
//! counterpart used when every word of both sides must be accounted for.

use std::cmp::Reverse;
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scoring {
    pub match_score: i32,
    pub mismatch: i32,
    pub gap: i32,
}

impl Default for Scoring {
    fn default() -> Self {
        Self {
            match_score: 2,
            mismatch: -1,
            gap: -1,
        }
    }
}

/// One alignment column. `Insert` consumes a query word only, `Delete` a
/// reference word only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignOp {
    Match { query: usize, reference: usize },
    Substitute { query: usize, reference: usize },
    Insert { query: usize },
    Delete { reference: usize },
}

impl AlignOp {
    pub fn query(&self) -> Option<usize> {
        match *self {
            AlignOp::Match { query, .. } | AlignOp::Substitute { query, .. } | AlignOp::Insert { query } => Some(query),
            AlignOp::Delete { .. } => None,
        }
    }

    pub fn reference(&self) -> Option<usize> {
        match *self {
            AlignOp::Match { reference, .. } | AlignOp::Substitute { reference, .. } | AlignOp::Delete { reference } => {
                Some(reference)
            }
            AlignOp::Insert { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub matches: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentResult {
    pub score: i32,
    pub query_span: Range<usize>,
    pub ref_span: Range<usize>,
    pub ops: Vec<AlignOp>,
}

impl AlignmentResult {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn counts(&self) -> OpCounts {
        let mut c = OpCounts::default();
        for op in &self.ops {
            match op {
                AlignOp::Match { .. } => c.matches += 1,
                AlignOp::Substitute { .. } => c.substitutions += 1,
                AlignOp::Insert { .. } => c.insertions += 1,
                AlignOp::Delete { .. } => c.deletions += 1,
            }
        }
        c
    }

    /// Score recomputed from the op list.
    pub fn rescore(&self, scoring: &Scoring) -> i32 {
        let c = self.counts();
        scoring.match_score * c.matches as i32
            + scoring.mismatch * c.substitutions as i32
            + scoring.gap * (c.insertions + c.deletions) as i32
    }
}

const INVALID: u8 = 0;
const DIAG: u8 = 1;
const UP: u8 = 2;
const LEFT: u8 = 3;
const DIAG_FRESH: u8 = 4;

/// Best-scoring local alignment of `query` against `reference`.
///
/// Among alignments with the maximal score the one with the smallest
/// reference start wins, then the longest reference span, then the earliest
/// query end. Returns an empty alignment with score 0 when nothing matches.
pub fn smith_waterman<T: PartialEq>(query: &[T], reference: &[T], scoring: &Scoring) -> AlignmentResult {
    let m = query.len();
    let n = reference.len();
    let w = n + 1;
    let mut score = vec![-1i32; (m + 1) * w];
    let mut start = vec![0u32; (m + 1) * w];
    let mut dir = vec![INVALID; (m + 1) * w];

    // (score, ref start, ref end, query end)
    let mut best: Option<(i32, u32, usize, usize)> = None;
    for i in 1..=m {
        let q = &query[i - 1];
        let row = i * w;
        let prev = (i - 1) * w;
        for j in 1..=n {
            let s = if *q == reference[j - 1] {
                scoring.match_score
            } else {
                scoring.mismatch
            };
            let mut cell: (i32, u32, u8) = (-1, 0, INVALID);
            let mut offer = |v: i32, st: u32, d: u8| {
                if v >= 0 && (cell.2 == INVALID || v > cell.0 || (v == cell.0 && st < cell.1)) {
                    cell = (v, st, d);
                }
            };
            let d = prev + j - 1;
            if dir[d] != INVALID {
                offer(score[d] + s, start[d], DIAG);
            } else {
                offer(s, (j - 1) as u32, DIAG_FRESH);
            }
            let u = prev + j;
            if dir[u] != INVALID {
                offer(score[u] + scoring.gap, start[u], UP);
            }
            let l = row + j - 1;
            if dir[l] != INVALID {
                offer(score[l] + scoring.gap, start[l], LEFT);
            }
            let here = row + j;
            score[here] = cell.0;
            start[here] = cell.1;
            dir[here] = cell.2;
            if cell.2 != INVALID && cell.0 > 0 {
                let cand = (cell.0, cell.1, j, i);
                let better = match best {
                    None => true,
                    Some(b) => {
                        cand.0 > b.0 || (cand.0 == b.0 && (cand.1, Reverse(cand.2), cand.3) < (b.1, Reverse(b.2), b.3))
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        }
    }

    let Some((best_score, _, end_j, end_i)) = best else {
        return AlignmentResult {
            score: 0,
            query_span: 0..0,
            ref_span: 0..0,
            ops: Vec::new(),
        };
    };
    let mut ops = Vec::new();
    let (mut i, mut j) = (end_i, end_j);
    loop {
        let here = i * w + j;
        match dir[here] {
            DIAG | DIAG_FRESH => {
                let op = if query[i - 1] == reference[j - 1] {
                    AlignOp::Match { query: i - 1, reference: j - 1 }
                } else {
                    AlignOp::Substitute { query: i - 1, reference: j - 1 }
                };
                ops.push(op);
                let fresh = dir[here] == DIAG_FRESH;
                i -= 1;
                j -= 1;
                if fresh {
                    break;
                }
            }
            UP => {
                ops.push(AlignOp::Insert { query: i - 1 });
                i -= 1;
            }
            LEFT => {
                ops.push(AlignOp::Delete { reference: j - 1 });
                j -= 1;
            }
            _ => unreachable!("traceback reached an invalid cell"),
        }
    }
    ops.reverse();
    AlignmentResult {
        score: best_score,
        query_span: i..end_i,
        ref_span: j..end_j,
        ops,
    }
}

/// Global alignment of the whole query against the whole reference with the
/// same scores. Ties prefer diagonal moves, then insertions.
pub fn global_align<T: PartialEq>(query: &[T], reference: &[T], scoring: &Scoring) -> AlignmentResult {
    let m = query.len();
    let n = reference.len();
    let w = n + 1;
    let mut score = vec![0i32; (m + 1) * w];
    let mut dir = vec![INVALID; (m + 1) * w];
    for i in 1..=m {
        score[i * w] = scoring.gap * i as i32;
        dir[i * w] = UP;
    }
    for j in 1..=n {
        score[j] = scoring.gap * j as i32;
        dir[j] = LEFT;
    }
    for i in 1..=m {
        for j in 1..=n {
            let s = if query[i - 1] == reference[j - 1] {
                scoring.match_score
            } else {
                scoring.mismatch
            };
            let mut cell = (score[(i - 1) * w + j - 1] + s, DIAG);
            let up = score[(i - 1) * w + j] + scoring.gap;
            if up > cell.0 {
                cell = (up, UP);
            }
            let left = score[i * w + j - 1] + scoring.gap;
            if left > cell.0 {
                cell = (left, LEFT);
            }
            score[i * w + j] = cell.0;
            dir[i * w + j] = cell.1;
        }
    }
    let mut ops = Vec::with_capacity(m.max(n));
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        match dir[i * w + j] {
            DIAG => {
                ops.push(if query[i - 1] == reference[j - 1] {
                    AlignOp::Match { query: i - 1, reference: j - 1 }
                } else {
                    AlignOp::Substitute { query: i - 1, reference: j - 1 }
                });
                i -= 1;
                j -= 1;
            }
            UP => {
                ops.push(AlignOp::Insert { query: i - 1 });
                i -= 1;
            }
            _ => {
                ops.push(AlignOp::Delete { reference: j - 1 });
                j -= 1;
            }
        }
    }
    ops.reverse();
    AlignmentResult {
        score: score[m * w + n],
        query_span: 0..m,
        ref_span: 0..n,
        ops,
    }
}
