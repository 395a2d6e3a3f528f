//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance runner. Nothing here calls the code under test except to build
//! inputs.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use corpus_forge::decontam::LmBook;
use corpus_forge::pipeline::synth::make_vocab;
use corpus_forge::pipeline::MarkovSource;
use corpus_forge::segmenter::TimedToken;
use corpus_forge::splitter::{Gender, Partition, PartitionAssignment, SegmentRef, SpeakerRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn random_seq(rng: &mut impl Rng, max_len: usize, alphabet: u8) -> Vec<u8> {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| rng.gen_range(0..alphabet)).collect()
}

// ---------------------------------------------------------------- alignment

/// Best local alignment score as the maximum, over every pair of substrings,
/// of their global alignment score. One global table per start pair covers
/// all end pairs. The empty alignment scores 0.
pub fn local_score_by_substrings<T: PartialEq>(q: &[T], r: &[T], mat: i32, mis: i32, gap: i32) -> i32 {
    let mut best = 0;
    for i in 0..q.len() {
        for k in 0..r.len() {
            let (m, n) = (q.len() - i, r.len() - k);
            let mut t = vec![vec![0i32; n + 1]; m + 1];
            for a in 0..=m {
                for b in 0..=n {
                    t[a][b] = match (a, b) {
                        (0, 0) => 0,
                        (0, _) => gap * b as i32,
                        (_, 0) => gap * a as i32,
                        _ => {
                            let d = if q[i + a - 1] == r[k + b - 1] { mat } else { mis };
                            (t[a - 1][b - 1] + d).max(t[a - 1][b] + gap).max(t[a][b - 1] + gap)
                        }
                    };
                    best = best.max(t[a][b]);
                }
            }
        }
    }
    best
}

/// Enumerates every alignment path from every start pair and returns the
/// best score. Exponential; only for tiny inputs.
pub fn local_score_by_paths<T: PartialEq>(q: &[T], r: &[T], mat: i32, mis: i32, gap: i32) -> i32 {
    fn walk<T: PartialEq>(q: &[T], r: &[T], i: usize, k: usize, acc: i32, p: (i32, i32, i32), best: &mut i32) {
        *best = (*best).max(acc);
        if i < q.len() && k < r.len() {
            let d = if q[i] == r[k] { p.0 } else { p.1 };
            walk(q, r, i + 1, k + 1, acc + d, p, best);
        }
        if i < q.len() {
            walk(q, r, i + 1, k, acc + p.2, p, best);
        }
        if k < r.len() {
            walk(q, r, i, k + 1, acc + p.2, p, best);
        }
    }
    let mut best = 0;
    for i in 0..q.len() {
        for k in 0..r.len() {
            walk(q, r, i, k, 0, (mat, mis, gap), &mut best);
        }
    }
    best
}

// ---------------------------------------------------------------- edit distance

/// Whether `a` can be turned into `b` with at most `k` unit edits. A shared
/// first symbol is always consumed as a match, which never hurts.
fn reachable<T: PartialEq>(a: &[T], b: &[T], k: usize) -> bool {
    if a.len().abs_diff(b.len()) > k {
        return false;
    }
    match (a.first(), b.first()) {
        (None, _) | (_, None) => true,
        (Some(x), Some(y)) if x == y => reachable(&a[1..], &b[1..], k),
        _ if k == 0 => false,
        _ => {
            reachable(&a[1..], &b[1..], k - 1) || reachable(&a[1..], b, k - 1) || reachable(a, &b[1..], k - 1)
        }
    }
}

/// Minimal edit-script length by iterative deepening over script lengths.
pub fn edit_distance_by_search<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    (0..).find(|&k| reachable(a, b, k)).expect("bounded by max length")
}

// ---------------------------------------------------------------- segmentation

pub type Span = (u64, u64);

/// Random stream: mostly short word gaps, some long pauses, some runs of
/// touching tokens and the odd very long token so that hard cuts happen.
pub fn random_stream(rng: &mut impl Rng, n_tokens: usize) -> Vec<TimedToken> {
    let mut t: u64 = rng.gen_range(0..500);
    let mut out = Vec::with_capacity(n_tokens);
    for i in 0..n_tokens {
        let dur = if rng.gen_bool(0.01) { rng.gen_range(3_000..9_000) } else { rng.gen_range(150..700) };
        out.push(TimedToken::new(format!("w{i}"), t, t + dur));
        t += dur;
        t += match rng.gen_range(0..10) {
            0..=2 => 0,
            3..=7 => rng.gen_range(1..200),
            _ => rng.gen_range(200..1_500),
        };
    }
    out
}

/// Cut points found by rescanning every gap from each start: the midpoint of
/// the longest gap whose midpoint lies in `[start + min, start + max]`
/// (earliest on ties); without one, `start + max`, moved back to the start
/// of a straddling token when that token starts at or after `start + min`.
pub fn scan_boundaries(tokens: &[TimedToken], min: u64, max: u64) -> (Vec<Span>, Option<Span>) {
    let end = tokens.last().map_or(0, |t| t.end);
    let mut gaps = Vec::new();
    for w in tokens.windows(2) {
        if w[0].end < w[1].start {
            gaps.push((w[0].end, w[1].start));
        }
    }
    let mut out = Vec::new();
    let mut start = 0u64;
    loop {
        if end - start < min {
            return (out, (end > start).then_some((start, end)));
        }
        if end - start <= max {
            out.push((start, end));
            return (out, None);
        }
        let (lo, hi) = (start + min, start + max);
        let mut best: Option<(u64, u64)> = None;
        for &(a, b) in &gaps {
            let mid = a + (b - a) / 2;
            if mid >= lo && mid <= hi && best.is_none_or(|(ba, bb)| b - a > bb - ba) {
                best = Some((a, b));
            }
        }
        let cut = match best {
            Some((a, b)) => a + (b - a) / 2,
            None => match tokens.iter().find(|t| t.start < hi && t.end > hi) {
                Some(t) if t.start >= lo => t.start,
                _ => hi,
            },
        };
        out.push((start, cut));
        start = cut;
    }
}

// ---------------------------------------------------------------- splitting

pub struct Population {
    pub speakers: Vec<SpeakerRecord>,
    pub segments: Vec<SegmentRef>,
    pub genders: HashMap<String, Gender>,
}

/// Speakers with one to four chapters of 10-20 s segments. The first
/// `2 * min_eligible + 1` speakers of each gender read enough to pass
/// `threshold_ms`; about one chapter in thirty is shared with a second reader.
pub fn random_population(seed: u64, min_eligible: usize, threshold_ms: u64) -> Population {
    let mut rng = rng(seed);
    let n_per_gender = rng.gen_range(2 * min_eligible + 1..=2 * min_eligible + 12);
    let mut speakers = Vec::new();
    let mut segments: Vec<SegmentRef> = Vec::new();
    let mut genders = HashMap::new();
    let mut chapter_no = 0;
    for gender in Gender::ALL {
        for i in 0..n_per_gender {
            let id = format!("{}{i:02}", gender.as_str());
            let long = i <= 2 * min_eligible;
            let mut total = 0u64;
            for _ in 0..rng.gen_range(1..=4) {
                chapter_no += 1;
                let chapter = format!("ch{chapter_no:04}");
                for s in 0..rng.gen_range(3..30) {
                    let d = rng.gen_range(10_000..=20_000);
                    total += d;
                    segments.push(SegmentRef {
                        segment_id: format!("{chapter}-{s:03}-{id}"),
                        chapter_id: chapter.clone(),
                        speaker_id: id.clone(),
                        duration_ms: d,
                    });
                }
            }
            while long && total < threshold_ms {
                chapter_no += 1;
                let d = 15_000;
                total += d;
                segments.push(SegmentRef {
                    segment_id: format!("ch{chapter_no:04}-000-{id}"),
                    chapter_id: format!("ch{chapter_no:04}"),
                    speaker_id: id.clone(),
                    duration_ms: d,
                });
            }
            genders.insert(id.clone(), gender);
            speakers.push(SpeakerRecord {
                speaker_id: id,
                gender,
                total_duration_ms: total,
                mean_pseudo_wer: rng.gen_range(0.0..0.4),
            });
        }
    }
    // a few chapters get a second reader
    let chapters: Vec<String> = segments.iter().map(|s| s.chapter_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let ids: Vec<String> = speakers.iter().map(|s| s.speaker_id.clone()).collect();
    for c in &chapters {
        if rng.gen_ratio(1, 30) {
            let reader = &ids[rng.gen_range(0..ids.len())];
            segments.push(SegmentRef {
                segment_id: format!("{c}-999-{reader}"),
                chapter_id: c.clone(),
                speaker_id: reader.clone(),
                duration_ms: 12_000,
            });
        }
    }
    Population {
        speakers,
        segments,
        genders,
    }
}

/// Checks speaker exclusivity, dev/test balance per gender and chapter
/// exclusivity on released segments. Returns a description of the first
/// violation.
pub fn check_split_invariants(a: &PartitionAssignment, pop: &Population, k: usize) -> Result<(), String> {
    let mut speaker_parts: BTreeMap<&str, BTreeSet<Partition>> = BTreeMap::new();
    let mut chapter_parts: BTreeMap<&str, BTreeSet<Partition>> = BTreeMap::new();
    for s in &pop.segments {
        let Some(p) = a.segments.get(&s.segment_id).copied().flatten() else {
            continue;
        };
        speaker_parts.entry(&s.speaker_id).or_default().insert(p);
        chapter_parts.entry(&s.chapter_id).or_default().insert(p);
        if a.speakers.get(&s.speaker_id) != Some(&p) {
            return Err(format!("segment {} is in {p} but its speaker is not", s.segment_id));
        }
    }
    if let Some((s, ps)) = speaker_parts.iter().find(|(_, ps)| ps.len() != 1) {
        return Err(format!("speaker {s} spans {ps:?}"));
    }
    if let Some((c, ps)) = chapter_parts.iter().find(|(_, ps)| ps.len() != 1) {
        return Err(format!("chapter {c} spans {ps:?}"));
    }
    for (c, ps) in &chapter_parts {
        let p = ps.iter().next().expect("one partition");
        if a.chapters.get(*c) != Some(p) {
            return Err(format!("chapter {c} map disagrees with its segments"));
        }
    }
    for gender in Gender::ALL {
        let count = |want: Partition| {
            a.speakers
                .iter()
                .filter(|(s, p)| **p == want && pop.genders[s.as_str()] == gender)
                .count()
        };
        let (dev, test) = (count(Partition::Dev), count(Partition::Test));
        if dev != test || dev != k {
            return Err(format!("{gender}: {dev} dev speakers, {test} test speakers, wanted {k} each"));
        }
    }
    Ok(())
}

/// Small sets pairwise disjoint, their union equal to the one-hour set, the
/// one-hour set inside the ten-hour set, everything drawn from `train`.
pub fn check_nesting(small: &[Vec<String>], one_hour: &[String], ten_hour: &[String], train: &[SegmentRef]) -> Result<(), String> {
    let train: BTreeSet<&str> = train.iter().map(|s| s.segment_id.as_str()).collect();
    let mut union: BTreeSet<&str> = BTreeSet::new();
    for (i, set) in small.iter().enumerate() {
        for id in set {
            if !union.insert(id.as_str()) {
                return Err(format!("{id} appears in more than one small set (set {i})"));
            }
        }
    }
    let one: BTreeSet<&str> = one_hour.iter().map(String::as_str).collect();
    let ten: BTreeSet<&str> = ten_hour.iter().map(String::as_str).collect();
    if union != one {
        return Err("union of the small sets differs from the one-hour set".into());
    }
    if !one.is_subset(&ten) {
        return Err("one-hour set is not inside the ten-hour set".into());
    }
    if let Some(id) = ten.iter().find(|id| !train.contains(*id)) {
        return Err(format!("{id} is not a train segment"));
    }
    Ok(())
}

// ---------------------------------------------------------------- decontamination

/// Ten held-out words, none of them stop words: six distinct 5-grams.
pub const PLANTED: &str = "lantern keeper climbed spiral stair polish brass lenses storm harbour";

/// A book of `filler` distinct words followed by the planted passage. Its
/// distinct 5-grams number `filler + 6`, of which 6 are held out.
pub fn planted_book(id: &str, filler: usize) -> LmBook {
    let mut w: Vec<String> = (0..filler).map(|i| format!("filler{i}")).collect();
    w.extend(words(PLANTED));
    LmBook {
        book_id: id.into(),
        title: words("a sea voyage"),
        words: w,
    }
}

// ---------------------------------------------------------------- language models

/// Sentences from an order-3 Markov source small enough that its contexts
/// recur: 16 words, 4 successors per context.
pub fn markov3_corpus(seed: u64) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let source = MarkovSource::new(3, 4, make_vocab(16, seed), seed);
    let mut rng = rng(seed);
    let train = source.sentences(6000, 8, 20, &mut rng);
    let dev = source.sentences(300, 8, 20, &mut rng);
    (train, dev)
}

/// Context, word and expected probability.
pub type KnValue = (&'static str, &'static str, f64);

/// Order-2 Kneser-Ney on the sentences "a b" and "b b a", derived by hand.
///
/// Every count-of-counts table has an empty class, so all discounts are the
/// 0.75 fallback. Predicted vocabulary {a, b, </s>, <unk>}, uniform 1/4.
/// Continuation counts: a 2 ({<s>, b}), b 3 ({<s>, a, b}), </s> 2 ({a, b});
/// total 7, backoff mass (2 + 1) * 0.75 / 7 = 2.25 / 7.
///   p(a) = (1.25 + 0.5625) / 7 = 29/112, p(b) = 2.8125 / 7 = 45/112,
///   p(</s>) = 29/112, p(<unk>) = 0.5625 / 7 = 9/112.
/// Context b has three singleton successors (a, b, </s>), weight 0.75:
///   p(a|b) = 0.25/3 + 0.75 * 29/112 = 373/1344, p(b|b) = 517/1344,
///   p(</s>|b) = 373/1344, p(<unk>|b) = 81/1344.
/// Context a has two (b, </s>), context <s> two (a, b), weight 0.75:
///   p(b|a) = 0.125 + 0.75 * 45/112 = 191/448, p(</s>|a) = 143/448,
///   p(a|<s>) = 143/448, p(b|<s>) = 191/448.
pub fn kn_fixture() -> (Vec<Vec<String>>, Vec<KnValue>) {
    let corpus = vec![words("a b"), words("b b a")];
    let expected = vec![
        ("", "a", 29.0 / 112.0),
        ("", "b", 45.0 / 112.0),
        ("", "</s>", 29.0 / 112.0),
        ("", "<unk>", 9.0 / 112.0),
        ("b", "a", 373.0 / 1344.0),
        ("b", "b", 517.0 / 1344.0),
        ("b", "</s>", 373.0 / 1344.0),
        ("b", "<unk>", 81.0 / 1344.0),
        ("a", "b", 191.0 / 448.0),
        ("a", "</s>", 143.0 / 448.0),
        ("<s>", "a", 143.0 / 448.0),
        ("<s>", "b", 191.0 / 448.0),
        ("<unk>", "b", 45.0 / 112.0),
    ];
    (corpus, expected)
}

// ---------------------------------------------------------------- files

/// Every file under `dir`, relative path to contents, for tree comparison.
pub fn read_tree(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).expect("readable dir") {
            let p = e.expect("dir entry").path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).expect("under root").to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).expect("readable file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
