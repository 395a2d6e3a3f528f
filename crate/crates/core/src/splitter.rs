//! Book validation, speaker-disjoint train/dev/test partitioning, and the
//! nested limited-supervision training subsets.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("need {needed} eligible {gender} speakers for dev/test, only {available} above the train threshold")]
    InsufficientSpeakers { gender: Gender, needed: usize, available: usize },
    #[error("reference WER list is empty")]
    EmptyReference,
    #[error("percentile {0} outside [0, 1]")]
    BadPercentile(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "M")]
    Male,
    #[serde(rename = "F")]
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn as_str(&self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "M" | "m" => Some(Gender::Male),
            "F" | "f" => Some(Gender::Female),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Dev,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Dev, Partition::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Partition::Train),
            "dev" => Some(Partition::Dev),
            "test" => Some(Partition::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerRecord {
    pub speaker_id: String,
    pub gender: Gender,
    /// Total reading time over valid books.
    pub total_duration_ms: u64,
    /// Mean pseudo-label WER of the speaker's candidate transcripts.
    pub mean_pseudo_wer: f64,
}

impl SpeakerRecord {
    pub fn total_duration_secs(&self) -> f64 {
        self.total_duration_ms as f64 / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChapterMeta {
    pub chapter_id: String,
    pub speaker_id: String,
    #[serde(default)]
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookRecord {
    pub book_id: String,
    pub title: String,
    pub author: String,
    #[serde(default)]
    pub version: u32,
    pub chapters: Vec<ChapterMeta>,
    #[serde(default)]
    pub multi_speaker: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    CorruptedMetadata { detail: String },
    MultiSpeaker,
    Superseded { by: String },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::CorruptedMetadata { detail } => write!(f, "corrupted metadata: {detail}"),
            RejectReason::MultiSpeaker => f.write_str("multiple speakers"),
            RejectReason::Superseded { by } => write!(f, "superseded by later version {by}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub book_id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BookValidation {
    pub valid: Vec<BookRecord>,
    pub rejections: Vec<Rejection>,
}

fn metadata_problem(book: &BookRecord, known_speakers: Option<&HashSet<String>>) -> Option<String> {
    if book.title.trim().is_empty() {
        return Some("missing title".into());
    }
    if book.author.trim().is_empty() {
        return Some("missing author".into());
    }
    if book.chapters.is_empty() {
        return Some("no chapters".into());
    }
    for ch in &book.chapters {
        if ch.speaker_id.trim().is_empty() {
            return Some(format!("chapter {} has no speaker", ch.chapter_id));
        }
        if let Some(known) = known_speakers {
            if !known.contains(&ch.speaker_id) {
                return Some(format!("chapter {} names unknown speaker {}", ch.chapter_id, ch.speaker_id));
            }
        }
    }
    None
}

fn dedupe_key(book: &BookRecord) -> (String, String) {
    let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    (norm(&book.author), norm(&book.title))
}

/// Drops books with corrupted metadata or several readers, and keeps only the
/// latest version of books sharing author and title (ties go to the smaller
/// book id). Survivors keep their input order.
pub fn validate_books(books: &[BookRecord], known_speakers: Option<&HashSet<String>>) -> BookValidation {
    let mut out = BookValidation::default();
    let mut candidates: Vec<&BookRecord> = Vec::new();
    for book in books {
        if let Some(detail) = metadata_problem(book, known_speakers) {
            out.rejections.push(Rejection {
                book_id: book.book_id.clone(),
                reason: RejectReason::CorruptedMetadata { detail },
            });
        } else if book.multi_speaker {
            out.rejections.push(Rejection {
                book_id: book.book_id.clone(),
                reason: RejectReason::MultiSpeaker,
            });
        } else {
            candidates.push(book);
        }
    }
    let mut latest: HashMap<(String, String), &BookRecord> = HashMap::new();
    for &book in &candidates {
        latest
            .entry(dedupe_key(book))
            .and_modify(|cur| {
                if (book.version, std::cmp::Reverse(&book.book_id)) > (cur.version, std::cmp::Reverse(&cur.book_id)) {
                    *cur = book;
                }
            })
            .or_insert(book);
    }
    for book in candidates {
        let winner = latest[&dedupe_key(book)];
        if winner.book_id == book.book_id {
            out.valid.push(book.clone());
        } else {
            out.rejections.push(Rejection {
                book_id: book.book_id.clone(),
                reason: RejectReason::Superseded {
                    by: winner.book_id.clone(),
                },
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Speakers per gender in dev, and again in test.
    pub dev_test_speakers_per_gender: usize,
    /// Speakers reading less than this always go to train.
    pub train_threshold_ms: u64,
    /// Dev/test speakers above this are sampled down to it.
    pub dev_test_cap_ms: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            dev_test_speakers_per_gender: 21,
            train_threshold_ms: 1_200_000,
            dev_test_cap_ms: 2_700_000,
        }
    }
}

/// Assigns every speaker to one partition.
///
/// Speakers below the train threshold go to train. From the rest, the `2k`
/// shortest speakers of each gender are dealt alternately to dev and test
/// (dev first); everyone else goes to train.
pub fn partition_speakers(
    speakers: &[SpeakerRecord],
    cfg: &SplitConfig,
) -> Result<BTreeMap<String, Partition>, SplitError> {
    let k = cfg.dev_test_speakers_per_gender;
    let mut ordered: Vec<&SpeakerRecord> = speakers.iter().collect();
    ordered.sort_by(|a, b| {
        a.total_duration_ms
            .cmp(&b.total_duration_ms)
            .then_with(|| a.speaker_id.cmp(&b.speaker_id))
    });
    let mut out = BTreeMap::new();
    for gender in Gender::ALL {
        let eligible: Vec<&&SpeakerRecord> = ordered
            .iter()
            .filter(|s| s.gender == gender && s.total_duration_ms >= cfg.train_threshold_ms)
            .collect();
        if eligible.len() < 2 * k {
            return Err(SplitError::InsufficientSpeakers {
                gender,
                needed: 2 * k,
                available: eligible.len(),
            });
        }
        for (i, s) in eligible.iter().take(2 * k).enumerate() {
            let p = if i % 2 == 0 { Partition::Dev } else { Partition::Test };
            out.insert(s.speaker_id.clone(), p);
        }
    }
    for s in speakers {
        out.entry(s.speaker_id.clone()).or_insert(Partition::Train);
    }
    Ok(out)
}

/// Linear-interpolation quantile of `values` at `p` in `[0, 1]`.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Keeps candidates whose mean pseudo-label WER is strictly above the
/// `percentile` quantile of `reference_wers`.
pub fn select_hard_speakers(
    candidates: &[SpeakerRecord],
    reference_wers: &[f64],
    percentile: f64,
) -> Result<Vec<SpeakerRecord>, SplitError> {
    if reference_wers.is_empty() {
        return Err(SplitError::EmptyReference);
    }
    let cutoff = quantile(reference_wers, percentile).ok_or(SplitError::BadPercentile(percentile))?;
    Ok(candidates
        .iter()
        .filter(|s| s.mean_pseudo_wer > cutoff)
        .cloned()
        .collect())
}

/// Minimal view of a segment for planning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub segment_id: String,
    pub chapter_id: String,
    pub speaker_id: String,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChapterConflict {
    pub chapter_id: String,
    pub partitions: Vec<Partition>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionTally {
    pub duration_ms: u64,
    pub speakers: BTreeMap<Gender, usize>,
    pub duration_ms_by_gender: BTreeMap<Gender, u64>,
}

/// The train/dev/test decision for speakers, segments and chapters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartitionAssignment {
    pub speakers: BTreeMap<String, Partition>,
    /// `None` for segments removed by truncation or chapter conflicts.
    pub segments: BTreeMap<String, Option<Partition>>,
    pub chapters: BTreeMap<String, Partition>,
    pub dropped_chapters: Vec<ChapterConflict>,
    pub truncated_segments: BTreeSet<String>,
}

impl PartitionAssignment {
    /// Attaches every segment to its speaker's partition.
    pub fn from_speakers(speakers: BTreeMap<String, Partition>, segments: &[SegmentRef]) -> Self {
        let segs = segments
            .iter()
            .map(|s| (s.segment_id.clone(), speakers.get(&s.speaker_id).copied()))
            .collect();
        Self {
            speakers,
            segments: segs,
            ..Default::default()
        }
    }

    pub fn segment_partition(&self, segment_id: &str) -> Option<Partition> {
        self.segments.get(segment_id).copied().flatten()
    }

    pub fn tallies(&self, segments: &[SegmentRef], genders: &HashMap<String, Gender>) -> BTreeMap<Partition, PartitionTally> {
        let mut out: BTreeMap<Partition, PartitionTally> = Partition::ALL.iter().map(|p| (*p, PartitionTally::default())).collect();
        let mut seen: HashSet<(Partition, &str)> = HashSet::new();
        for s in segments {
            let Some(p) = self.segment_partition(&s.segment_id) else {
                continue;
            };
            let Some(&g) = genders.get(&s.speaker_id) else {
                continue;
            };
            let t = out.get_mut(&p).expect("all partitions present");
            t.duration_ms += s.duration_ms;
            *t.duration_ms_by_gender.entry(g).or_insert(0) += s.duration_ms;
            if seen.insert((p, s.speaker_id.as_str())) {
                *t.speakers.entry(g).or_insert(0) += 1;
            }
        }
        out
    }
}

/// Samples whole segments of dev/test speakers above `cap_ms` until their
/// total would exceed the cap; unsampled segments leave the release.
pub fn truncate_dev_test(assignment: &mut PartitionAssignment, segments: &[SegmentRef], cap_ms: u64, seed: u64) {
    let mut by_speaker: BTreeMap<&str, Vec<&SegmentRef>> = BTreeMap::new();
    for s in segments {
        by_speaker.entry(s.speaker_id.as_str()).or_default().push(s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (speaker, mut segs) in by_speaker {
        if !matches!(assignment.speakers.get(speaker), Some(Partition::Dev | Partition::Test)) {
            continue;
        }
        let total: u64 = segs.iter().map(|s| s.duration_ms).sum();
        if total <= cap_ms {
            continue;
        }
        segs.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
        segs.shuffle(&mut rng);
        let mut kept = 0u64;
        for s in segs {
            if kept + s.duration_ms <= cap_ms {
                kept += s.duration_ms;
            } else {
                assignment.segments.insert(s.segment_id.clone(), None);
                assignment.truncated_segments.insert(s.segment_id.clone());
            }
        }
    }
}

/// Maps each chapter to the single partition its segments landed in. A
/// chapter spread over several partitions is dropped entirely and reported.
pub fn enforce_chapter_exclusivity(assignment: &mut PartitionAssignment, segments: &[SegmentRef]) {
    let mut by_chapter: BTreeMap<&str, Vec<&SegmentRef>> = BTreeMap::new();
    for s in segments {
        by_chapter.entry(s.chapter_id.as_str()).or_default().push(s);
    }
    for (chapter, segs) in by_chapter {
        let parts: BTreeSet<Partition> = segs
            .iter()
            .filter_map(|s| assignment.segment_partition(&s.segment_id))
            .collect();
        match parts.len() {
            0 => {
                assignment.chapters.remove(chapter);
            }
            1 => {
                let p = *parts.iter().next().expect("one partition");
                assignment.chapters.insert(chapter.to_string(), p);
            }
            _ => {
                for s in &segs {
                    assignment.segments.insert(s.segment_id.clone(), None);
                }
                assignment.chapters.remove(chapter);
                assignment.dropped_chapters.push(ChapterConflict {
                    chapter_id: chapter.to_string(),
                    partitions: parts.into_iter().collect(),
                });
            }
        }
    }
}

/// Speaker partition, segment attachment, dev/test truncation and chapter
/// exclusivity in one call.
pub fn plan_partitions(
    speakers: &[SpeakerRecord],
    segments: &[SegmentRef],
    cfg: &SplitConfig,
    seed: u64,
) -> Result<PartitionAssignment, SplitError> {
    let by_speaker = partition_speakers(speakers, cfg)?;
    let mut assignment = PartitionAssignment::from_speakers(by_speaker, segments);
    truncate_dev_test(&mut assignment, segments, cfg.dev_test_cap_ms, seed);
    enforce_chapter_exclusivity(&mut assignment, segments);
    Ok(assignment)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitedConfig {
    pub pool_speakers_per_gender: usize,
    pub set_speakers_per_gender: usize,
    pub small_sets: usize,
    /// Audio per gender in each small set.
    pub small_set_ms_per_gender: u64,
    /// Audio per gender added on top of the small sets for the large set.
    pub remainder_ms_per_gender: u64,
}

impl Default for LimitedConfig {
    fn default() -> Self {
        Self {
            pool_speakers_per_gender: 15,
            set_speakers_per_gender: 3,
            small_sets: 6,
            small_set_ms_per_gender: 5 * 60 * 1000,
            remainder_ms_per_gender: 4 * 3_600_000 + 1_800_000,
        }
    }
}

/// Nested low-resource training subsets: the small (10 minute) sets are
/// pairwise disjoint, their union is the 1 hour set, and that is contained in
/// the 10 hour set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitedSupervision {
    pub small_sets: Vec<Vec<String>>,
    pub one_hour: Vec<String>,
    pub ten_hour: Vec<String>,
    pub pool: Vec<String>,
    /// Human-readable notes where the train set could not supply the targets.
    pub shortfalls: Vec<String>,
}

fn fill_to_target<'a>(
    candidates: &mut Vec<&'a SegmentRef>,
    target_ms: u64,
    rng: &mut ChaCha8Rng,
    used: &mut HashSet<String>,
) -> (Vec<&'a SegmentRef>, u64) {
    candidates.retain(|s| !used.contains(&s.segment_id));
    candidates.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
    candidates.shuffle(rng);
    let mut picked = Vec::new();
    let mut total = 0u64;
    for s in candidates.iter() {
        if total + s.duration_ms <= target_ms {
            total += s.duration_ms;
            used.insert(s.segment_id.clone());
            picked.push(*s);
        }
    }
    (picked, total)
}

/// Carves the limited-supervision sets out of the train segments.
///
/// Up to `pool_speakers_per_gender` speakers per gender are drawn. Each small
/// set draws `set_speakers_per_gender` of them per gender and samples audio
/// per gender not used by an earlier set. The remainder of the large set is
/// sampled from the whole pool, excluding small-set audio. When the pool has
/// less audio than all targets need, every target shrinks by the same factor.
pub fn make_limited_supervision(
    train: &[SegmentRef],
    genders: &HashMap<String, Gender>,
    cfg: &LimitedConfig,
    seed: u64,
) -> LimitedSupervision {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = LimitedSupervision::default();
    let mut by_speaker: BTreeMap<&str, Vec<&SegmentRef>> = BTreeMap::new();
    for s in train {
        if genders.contains_key(&s.speaker_id) {
            by_speaker.entry(s.speaker_id.as_str()).or_default().push(s);
        }
    }

    let mut pool: BTreeMap<Gender, Vec<&str>> = BTreeMap::new();
    for gender in Gender::ALL {
        let mut speakers: Vec<&str> = by_speaker.keys().copied().filter(|s| genders[*s] == gender).collect();
        speakers.shuffle(&mut rng);
        if speakers.len() < cfg.pool_speakers_per_gender {
            out.shortfalls.push(format!(
                "only {} {gender} train speakers, wanted {}",
                speakers.len(),
                cfg.pool_speakers_per_gender
            ));
        }
        speakers.truncate(cfg.pool_speakers_per_gender);
        speakers.sort_unstable();
        pool.insert(gender, speakers);
    }

    let mut small_target = BTreeMap::new();
    let mut remainder_target = BTreeMap::new();
    for gender in Gender::ALL {
        let available: u64 = pool[&gender].iter().flat_map(|s| &by_speaker[s]).map(|s| s.duration_ms).sum();
        let needed = cfg.small_set_ms_per_gender * cfg.small_sets as u64 + cfg.remainder_ms_per_gender;
        let (small, rest) = if needed > 0 && available < needed {
            let factor = available as f64 / needed as f64;
            out.shortfalls.push(format!(
                "{gender} pool has {available} ms of audio, {needed} ms needed; targets scaled by {factor:.4}"
            ));
            (
                (cfg.small_set_ms_per_gender as f64 * factor) as u64,
                (cfg.remainder_ms_per_gender as f64 * factor) as u64,
            )
        } else {
            (cfg.small_set_ms_per_gender, cfg.remainder_ms_per_gender)
        };
        small_target.insert(gender, small);
        remainder_target.insert(gender, rest);
    }

    let mut used: HashSet<String> = HashSet::new();
    for set_idx in 0..cfg.small_sets {
        let mut set = Vec::new();
        for gender in Gender::ALL {
            let mut speakers = pool[&gender].clone();
            speakers.shuffle(&mut rng);
            speakers.truncate(cfg.set_speakers_per_gender);
            let mut candidates: Vec<&SegmentRef> = speakers.iter().flat_map(|s| by_speaker[s].iter().copied()).collect();
            let (picked, total) = fill_to_target(&mut candidates, small_target[&gender], &mut rng, &mut used);
            let max_seg = candidates.iter().map(|s| s.duration_ms).max().unwrap_or(0);
            if total + max_seg < small_target[&gender] {
                out.shortfalls.push(format!(
                    "small set {set_idx}: {gender} got {total} ms of {} ms",
                    small_target[&gender]
                ));
            }
            set.extend(picked.into_iter().map(|s| s.segment_id.clone()));
        }
        set.sort();
        out.small_sets.push(set);
    }
    let mut one_hour: Vec<String> = out.small_sets.iter().flatten().cloned().collect();
    one_hour.sort();

    let mut ten_hour = one_hour.clone();
    for gender in Gender::ALL {
        let mut candidates: Vec<&SegmentRef> = pool[&gender].iter().flat_map(|s| by_speaker[s].iter().copied()).collect();
        let (picked, total) = fill_to_target(&mut candidates, remainder_target[&gender], &mut rng, &mut used);
        if total < remainder_target[&gender] && candidates.iter().all(|s| used.contains(&s.segment_id)) {
            out.shortfalls.push(format!(
                "large set remainder: {gender} got {total} ms of {} ms",
                remainder_target[&gender]
            ));
        }
        ten_hour.extend(picked.into_iter().map(|s| s.segment_id.clone()));
    }
    ten_hour.sort();
    out.one_hour = one_hour;
    out.ten_hour = ten_hour;
    out.pool = pool.values().flatten().map(|s| s.to_string()).collect();
    out.pool.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book(id: &str, title: &str, author: &str, version: u32) -> BookRecord {
        BookRecord {
            book_id: id.into(),
            title: title.into(),
            author: author.into(),
            version,
            chapters: vec![ChapterMeta {
                chapter_id: format!("{id}-c1"),
                speaker_id: "s1".into(),
                duration_ms: 0,
            }],
            multi_speaker: false,
        }
    }

    fn speaker(id: &str, gender: Gender, secs: u64) -> SpeakerRecord {
        SpeakerRecord {
            speaker_id: id.into(),
            gender,
            total_duration_ms: secs * 1000,
            mean_pseudo_wer: 0.1,
        }
    }

    #[test]
    fn latest_version_survives() {
        let books = vec![book("b1", "T", "A", 1), book("b2", "T", "A", 2), book("b3", "Other", "A", 1)];
        let v = validate_books(&books, None);
        let ids: Vec<_> = v.valid.iter().map(|b| b.book_id.as_str()).collect();
        assert_eq!(ids, vec!["b2", "b3"]);
        assert_eq!(
            v.rejections,
            vec![Rejection {
                book_id: "b1".into(),
                reason: RejectReason::Superseded { by: "b2".into() }
            }]
        );
    }

    #[test]
    fn corrupted_and_multi_speaker_rejected() {
        let mut empty_title = book("b1", "  ", "A", 1);
        empty_title.title = String::new();
        let mut dramatic = book("b2", "Dramatic Reading", "A", 1);
        dramatic.multi_speaker = true;
        let mut no_speaker = book("b3", "X", "A", 1);
        no_speaker.chapters[0].speaker_id.clear();
        let v = validate_books(&[empty_title, dramatic, no_speaker, book("b4", "Y", "", 1)], None);
        assert!(v.valid.is_empty());
        assert_eq!(v.rejections[0].reason.to_string(), "corrupted metadata: missing title");
        assert_eq!(v.rejections[1].reason, RejectReason::MultiSpeaker);
        assert!(matches!(v.rejections[2].reason, RejectReason::CorruptedMetadata { .. }));
        assert_eq!(v.rejections[3].reason.to_string(), "corrupted metadata: missing author");

        let known: HashSet<String> = ["s2".to_string()].into();
        let v = validate_books(&[book("b5", "Z", "A", 1)], Some(&known));
        assert!(v.valid.is_empty());
    }

    #[test]
    fn all_below_threshold_is_an_error() {
        let speakers = vec![speaker("a", Gender::Male, 10), speaker("b", Gender::Female, 10)];
        let err = partition_speakers(&speakers, &SplitConfig { dev_test_speakers_per_gender: 1, ..Default::default() })
            .unwrap_err();
        assert_eq!(
            err,
            SplitError::InsufficientSpeakers {
                gender: Gender::Male,
                needed: 2,
                available: 0
            }
        );
    }

    #[test]
    fn shortest_eligible_speakers_alternate_dev_test() {
        let cfg = SplitConfig {
            dev_test_speakers_per_gender: 1,
            train_threshold_ms: 1_200_000,
            dev_test_cap_ms: 2_700_000,
        };
        let speakers = vec![
            speaker("m1", Gender::Male, 5000),
            speaker("m2", Gender::Male, 1300),
            speaker("m3", Gender::Male, 1500),
            speaker("m4", Gender::Male, 100),
            speaker("f1", Gender::Female, 2000),
            speaker("f2", Gender::Female, 1900),
            speaker("f3", Gender::Female, 9000),
        ];
        let p = partition_speakers(&speakers, &cfg).unwrap();
        assert_eq!(p["m2"], Partition::Dev);
        assert_eq!(p["m3"], Partition::Test);
        assert_eq!(p["m1"], Partition::Train);
        assert_eq!(p["m4"], Partition::Train);
        assert_eq!(p["f2"], Partition::Dev);
        assert_eq!(p["f1"], Partition::Test);
        assert_eq!(p["f3"], Partition::Train);
    }

    #[test]
    fn hard_speaker_quantile() {
        let refs = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert!((quantile(&refs, 0.8).unwrap() - 0.42).abs() < 1e-12);
        let mut hard = speaker("h", Gender::Male, 0);
        hard.mean_pseudo_wer = 0.45;
        let mut easy = speaker("e", Gender::Male, 0);
        easy.mean_pseudo_wer = 0.30;
        let kept = select_hard_speakers(&[hard.clone(), easy.clone()], &refs, 0.8).unwrap();
        assert_eq!(kept, vec![hard]);
        assert!(select_hard_speakers(&[easy.clone()], &refs, 0.8).unwrap().is_empty());
        // a single reference value is its own quantile, and equality is not enough
        let mut at = easy.clone();
        at.mean_pseudo_wer = 0.3;
        assert!(select_hard_speakers(&[at], &[0.3], 0.8).unwrap().is_empty());
        assert_eq!(select_hard_speakers(&[easy], &[], 0.8), Err(SplitError::EmptyReference));
    }

    fn seg(id: &str, chapter: &str, speaker: &str, ms: u64) -> SegmentRef {
        SegmentRef {
            segment_id: id.into(),
            chapter_id: chapter.into(),
            speaker_id: speaker.into(),
            duration_ms: ms,
        }
    }

    #[test]
    fn chapter_read_by_dev_and_test_speaker_dropped() {
        let speakers: BTreeMap<String, Partition> =
            [("d".to_string(), Partition::Dev), ("t".to_string(), Partition::Test)].into();
        let segs = vec![seg("1", "c1", "d", 10), seg("2", "c1", "t", 10), seg("3", "c2", "d", 10)];
        let mut a = PartitionAssignment::from_speakers(speakers, &segs);
        enforce_chapter_exclusivity(&mut a, &segs);
        assert_eq!(a.dropped_chapters.len(), 1);
        assert_eq!(a.dropped_chapters[0].chapter_id, "c1");
        assert_eq!(a.segment_partition("1"), None);
        assert_eq!(a.segment_partition("2"), None);
        assert_eq!(a.chapters.get("c2"), Some(&Partition::Dev));
        assert!(!a.chapters.contains_key("c1"));
    }

    #[test]
    fn truncation_keeps_dev_test_under_cap() {
        let speakers: BTreeMap<String, Partition> =
            [("d".to_string(), Partition::Dev), ("tr".to_string(), Partition::Train)].into();
        let segs: Vec<SegmentRef> = (0..20)
            .map(|i| seg(&format!("d{i:02}"), "c", "d", 15_000))
            .chain((0..20).map(|i| seg(&format!("t{i:02}"), "c2", "tr", 15_000)))
            .collect();
        let mut a = PartitionAssignment::from_speakers(speakers, &segs);
        truncate_dev_test(&mut a, &segs, 100_000, 9);
        let kept: u64 = segs
            .iter()
            .filter(|s| s.speaker_id == "d" && a.segment_partition(&s.segment_id).is_some())
            .map(|s| s.duration_ms)
            .sum();
        assert_eq!(kept, 90_000);
        assert_eq!(a.truncated_segments.len(), 14);
        // train speakers are never truncated
        assert!(segs.iter().filter(|s| s.speaker_id == "tr").all(|s| a.segment_partition(&s.segment_id).is_some()));
    }
}
