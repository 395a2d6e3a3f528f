//! Stage bodies over in-memory inputs. The orchestrated run and the
//! single-stage commands both call these; they differ only in where the
//! inputs come from and where the outputs go.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::manifest::{ManifestRow, RowPartition};
use super::{PipelineError, Stage};
use crate::decontam::{DecontamError, Stopwords};
use crate::retrieval::{BookFrequency, BookRetriever, CandidateOutcome, CandidateTranscript, RetrievalParams, WordformRules};
use crate::segmenter::{segment_stream, SegmentParams, TokenStream};
use crate::splitter::{
    enforce_chapter_exclusivity, make_limited_supervision, partition_speakers, select_hard_speakers, truncate_dev_test,
    BookRecord, Gender, LimitedConfig, LimitedSupervision, Partition, PartitionAssignment, SegmentRef, SpeakerRecord,
    SplitConfig,
};
use crate::textnorm::{normalize, Orthography};

pub const SPEAKERS_HEADER: &str = "speaker_id\tgender";
pub const LM_BOOKS_HEADER: &str = "book_id\ttitle";

pub(crate) fn fail(stage: Stage, item: impl AsRef<Path>, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::stage(stage, item.as_ref().display().to_string(), e)
}

/// Data lines of a TSV, skipping the given header, blank lines and `#` lines.
pub fn data_rows(text: &str, header: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#') && *l != header)
        .map(str::to_string)
        .collect()
}

pub fn parse_speaker(line: &str) -> Result<(String, Gender), String> {
    let (id, g) = line.split_once('\t').ok_or_else(|| format!("malformed speaker row {line:?}"))?;
    let gender = Gender::parse(g.trim()).ok_or_else(|| format!("unknown gender {g:?} for speaker {id}"))?;
    Ok((id.trim().to_string(), gender))
}

pub fn parse_speakers(text: &str) -> Result<Vec<(String, Gender)>, String> {
    data_rows(text, SPEAKERS_HEADER).iter().map(|r| parse_speaker(r)).collect()
}

/// Book metadata, one JSON object per line. `#` lines are skipped.
pub fn parse_books(text: &str) -> Result<Vec<BookRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

pub fn read_file(stage: Stage, path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| fail(stage, path, e))
}

#[derive(Debug, Clone, Default)]
pub struct SegmentOutput {
    pub rows: Vec<ManifestRow>,
    pub recordings: usize,
    pub residual_ms: u64,
    pub dropped_tokens: usize,
}

/// Segments `recordings_dir/<chapter_id>.jsonl` for every chapter of the
/// given books. Pseudo-label words are normalized with `orth`.
pub fn segment_recordings(
    books: &[BookRecord],
    speakers: &BTreeMap<String, Gender>,
    recordings_dir: &Path,
    params: &SegmentParams,
    orth: &Orthography,
) -> Result<SegmentOutput, PipelineError> {
    let st = Stage::Segment;
    let mut chapters: Vec<_> = books.iter().flat_map(|b| b.chapters.iter().map(move |c| (b, c))).collect();
    chapters.sort_by(|a, b| a.1.chapter_id.cmp(&b.1.chapter_id));
    let results: Vec<(Vec<ManifestRow>, u64, usize)> = chapters
        .par_iter()
        .map(|(book, ch)| {
            let path = recordings_dir.join(format!("{}.jsonl", ch.chapter_id));
            let text = read_file(st, &path)?;
            let mut stream = TokenStream::from_jsonl(ch.chapter_id.clone(), &text).map_err(|e| fail(st, &path, e))?;
            if ch.duration_ms > 0 {
                stream.duration_ms = Some(ch.duration_ms);
            }
            let seg = segment_stream(&stream, params).map_err(|e| fail(st, &path, e))?;
            let gender = *speakers
                .get(&ch.speaker_id)
                .ok_or_else(|| fail(st, &ch.chapter_id, format!("unknown speaker {}", ch.speaker_id)))?;
            let rows = seg
                .segments
                .iter()
                .map(|s| ManifestRow {
                    segment_id: s.segment_id.clone(),
                    book_id: book.book_id.clone(),
                    chapter_id: ch.chapter_id.clone(),
                    speaker_id: ch.speaker_id.clone(),
                    gender,
                    start_ms: s.start,
                    end_ms: s.end,
                    transcript: normalize(&s.words().join(" "), orth).tokens,
                    wer: None,
                    partition: RowPartition::Unassigned,
                })
                .collect();
            Ok((rows, seg.residual.map_or(0, |(a, b)| b - a), seg.dropped.len()))
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut out = SegmentOutput {
        recordings: chapters.len(),
        ..Default::default()
    };
    for (rows, residual, dropped) in results {
        out.rows.extend(rows);
        out.residual_ms += residual;
        out.dropped_tokens += dropped;
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct RetrieveOutput {
    /// In segment order.
    pub candidates: Vec<CandidateTranscript>,
    pub no_match: Vec<String>,
}

impl RetrieveOutput {
    pub fn accepted(&self) -> usize {
        self.candidates.iter().filter(|c| c.accepted).count()
    }
}

/// Retrieves a candidate transcript for every segment from its own book.
pub fn retrieve_segments(
    segments: &[ManifestRow],
    books: &BTreeMap<String, Vec<String>>,
    params: RetrievalParams,
    fix_wordforms: Option<&WordformRules>,
) -> Result<RetrieveOutput, PipelineError> {
    let st = Stage::Retrieve;
    let freq = BookFrequency::from_books(books.values().map(Vec::as_slice));
    let wordforms = fix_wordforms.map(|r| (&freq, r));
    let mut by_book: BTreeMap<&str, Vec<&ManifestRow>> = BTreeMap::new();
    for r in segments {
        by_book.entry(r.book_id.as_str()).or_default().push(r);
    }
    let outcomes: Vec<Vec<(String, CandidateOutcome)>> = by_book
        .par_iter()
        .map(|(book_id, rows)| {
            let words = books
                .get(*book_id)
                .ok_or_else(|| fail(st, book_id, "segment refers to a book without text"))?;
            let retriever = BookRetriever::new(*book_id, words.clone(), params).map_err(|e| fail(st, book_id, e))?;
            Ok(rows
                .par_iter()
                .map(|r| (r.segment_id.clone(), retriever.candidate(&r.segment_id, &r.transcript, wordforms)))
                .collect())
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut by_segment: HashMap<String, CandidateOutcome> = outcomes.into_iter().flatten().collect();
    let mut out = RetrieveOutput::default();
    for r in segments {
        match by_segment.remove(&r.segment_id) {
            Some(CandidateOutcome::Candidate(c)) => out.candidates.push(c),
            _ => out.no_match.push(r.segment_id.clone()),
        }
    }
    Ok(out)
}

/// Segment rows carrying their accepted retrieved transcript and WER.
pub fn accepted_rows(segments: &[ManifestRow], candidates: &[CandidateTranscript]) -> Vec<ManifestRow> {
    let by_id: HashMap<&str, &CandidateTranscript> = candidates
        .iter()
        .filter(|c| c.accepted)
        .map(|c| (c.segment_id.as_str(), c))
        .collect();
    segments
        .iter()
        .filter_map(|r| {
            by_id.get(r.segment_id.as_str()).map(|c| ManifestRow {
                transcript: c.words.clone(),
                wer: Some(c.pseudo_wer),
                ..r.clone()
            })
        })
        .collect()
}

pub fn segment_ref(r: &ManifestRow) -> SegmentRef {
    SegmentRef {
        segment_id: r.segment_id.clone(),
        chapter_id: r.chapter_id.clone(),
        speaker_id: r.speaker_id.clone(),
        duration_ms: r.duration_ms(),
    }
}

/// Optional restriction of dev/test to acoustically hard speakers.
#[derive(Debug, Clone, Copy)]
pub struct HardFilter<'a> {
    pub percentile: f64,
    pub reference_wers: &'a [f64],
}

#[derive(Debug, Clone, Default)]
pub struct SplitOutput {
    pub assignment: PartitionAssignment,
    pub partitions: BTreeMap<Partition, Vec<ManifestRow>>,
    pub unassigned: Vec<ManifestRow>,
    pub speakers: usize,
    /// `Some((applied, hard_speakers))` when a hard filter was requested.
    pub hard_filter: Option<(bool, usize)>,
    pub genders: HashMap<String, Gender>,
}

/// Speaker-level statistics from accepted rows, with the mean pseudo-label
/// WER over every candidate of the speaker, accepted or not.
pub fn speaker_records(accepted: &[ManifestRow], all_segments: &[ManifestRow], candidates: &[CandidateTranscript]) -> Vec<SpeakerRecord> {
    let speaker_of: HashMap<&str, &str> = all_segments
        .iter()
        .chain(accepted)
        .map(|r| (r.segment_id.as_str(), r.speaker_id.as_str()))
        .collect();
    let mut wer_sums: HashMap<&str, (f64, usize)> = HashMap::new();
    for c in candidates {
        if let Some(s) = speaker_of.get(c.segment_id.as_str()) {
            let e = wer_sums.entry(s).or_insert((0.0, 0));
            e.0 += c.pseudo_wer;
            e.1 += 1;
        }
    }
    let mut per_speaker: BTreeMap<&str, (Gender, u64)> = BTreeMap::new();
    for r in accepted {
        per_speaker.entry(&r.speaker_id).or_insert((r.gender, 0)).1 += r.duration_ms();
    }
    per_speaker
        .into_iter()
        .map(|(s, (gender, total))| {
            let (sum, n) = wer_sums.get(s).copied().unwrap_or((0.0, 0));
            SpeakerRecord {
                speaker_id: s.to_string(),
                gender,
                total_duration_ms: total,
                mean_pseudo_wer: if n > 0 { sum / n as f64 } else { 0.0 },
            }
        })
        .collect()
}

/// Checks the partition invariants: speakers and chapters each live in one
/// partition and dev and test have as many speakers of each gender.
pub fn check_split(assignment: &PartitionAssignment, rows: &[ManifestRow]) -> Result<(), String> {
    let mut speaker_parts: HashMap<&str, BTreeSet<Partition>> = HashMap::new();
    let mut chapter_parts: HashMap<&str, BTreeSet<Partition>> = HashMap::new();
    let mut genders: HashMap<&str, Gender> = HashMap::new();
    for r in rows {
        genders.insert(&r.speaker_id, r.gender);
        if let Some(p) = assignment.segment_partition(&r.segment_id) {
            speaker_parts.entry(&r.speaker_id).or_default().insert(p);
            chapter_parts.entry(&r.chapter_id).or_default().insert(p);
        }
    }
    let mut bad: Vec<_> = speaker_parts.iter().filter(|(_, p)| p.len() > 1).map(|(s, _)| *s).collect();
    bad.sort();
    if let Some(s) = bad.first() {
        return Err(format!("speaker {s} appears in several partitions"));
    }
    let mut bad: Vec<_> = chapter_parts.iter().filter(|(_, p)| p.len() > 1).map(|(c, _)| *c).collect();
    bad.sort();
    if let Some(c) = bad.first() {
        return Err(format!("chapter {c} appears in several partitions"));
    }
    for g in Gender::ALL {
        let count = |part: Partition| {
            assignment
                .speakers
                .iter()
                .filter(|(s, p)| **p == part && genders.get(s.as_str()) == Some(&g))
                .count()
        };
        if count(Partition::Dev) != count(Partition::Test) {
            return Err(format!("dev and test {g} speaker counts differ"));
        }
    }
    Ok(())
}

/// Partitions accepted segments into train/dev/test.
pub fn split_segments(
    accepted: &[ManifestRow],
    all_segments: &[ManifestRow],
    candidates: &[CandidateTranscript],
    cfg: &SplitConfig,
    hard: Option<HardFilter>,
    seed: u64,
) -> Result<SplitOutput, PipelineError> {
    let st = Stage::Split;
    let speakers = speaker_records(accepted, all_segments, candidates);
    let mut pool = speakers.clone();
    let mut hard_filter = None;
    if let Some(h) = hard {
        let (eligible, short): (Vec<_>, Vec<_>) = speakers
            .iter()
            .cloned()
            .partition(|s| s.total_duration_ms >= cfg.train_threshold_ms);
        let chosen = select_hard_speakers(&eligible, h.reference_wers, h.percentile).map_err(|e| fail(st, "speakers", e))?;
        let enough = Gender::ALL
            .iter()
            .all(|g| chosen.iter().filter(|s| s.gender == *g).count() >= 2 * cfg.dev_test_speakers_per_gender);
        if enough {
            hard_filter = Some((true, chosen.len()));
            pool = short.into_iter().chain(chosen).collect();
        } else {
            log::warn!("too few hard speakers for the dev/test quota, using all eligible speakers");
            hard_filter = Some((false, chosen.len()));
        }
    }
    let mut by_speaker = partition_speakers(&pool, cfg).map_err(|e| fail(st, "speakers", e))?;
    for s in &speakers {
        by_speaker.entry(s.speaker_id.clone()).or_insert(Partition::Train);
    }
    let refs: Vec<SegmentRef> = accepted.iter().map(segment_ref).collect();
    let mut assignment = PartitionAssignment::from_speakers(by_speaker, &refs);
    truncate_dev_test(&mut assignment, &refs, cfg.dev_test_cap_ms, seed);
    enforce_chapter_exclusivity(&mut assignment, &refs);
    check_split(&assignment, accepted).map_err(|e| fail(st, "assignment", e))?;

    let mut partitions: BTreeMap<Partition, Vec<ManifestRow>> = Partition::ALL.iter().map(|p| (*p, Vec::new())).collect();
    let mut unassigned = Vec::new();
    for r in accepted {
        match assignment.segment_partition(&r.segment_id) {
            Some(p) => partitions.entry(p).or_default().push(ManifestRow {
                partition: RowPartition::Split(p),
                ..r.clone()
            }),
            None => unassigned.push(r.clone()),
        }
    }
    Ok(SplitOutput {
        assignment,
        partitions,
        unassigned,
        speakers: speakers.len(),
        hard_filter,
        genders: speakers.iter().map(|s| (s.speaker_id.clone(), s.gender)).collect(),
    })
}

/// Name of the i-th ten-minute set.
pub fn small_set_name(i: usize) -> String {
    format!("10min-{i}")
}

/// A limited-supervision set name and its rows.
pub type NamedRows = (String, Vec<ManifestRow>);

/// Builds the limited-supervision sets from train rows and returns them as
/// named manifests: the ten-minute sets, then `1h` and `10h`.
pub fn limited_sets(
    train: &[ManifestRow],
    cfg: &LimitedConfig,
    seed: u64,
) -> Result<(LimitedSupervision, Vec<NamedRows>), PipelineError> {
    let genders: HashMap<String, Gender> = train.iter().map(|r| (r.speaker_id.clone(), r.gender)).collect();
    let refs: Vec<SegmentRef> = train.iter().map(segment_ref).collect();
    let sets = make_limited_supervision(&refs, &genders, cfg, seed);

    let union: BTreeSet<&String> = sets.small_sets.iter().flatten().collect();
    let one_hour: BTreeSet<&String> = sets.one_hour.iter().collect();
    let ten_hour: BTreeSet<&String> = sets.ten_hour.iter().collect();
    let total_small: usize = sets.small_sets.iter().map(Vec::len).sum();
    if union != one_hour || !one_hour.is_subset(&ten_hour) || total_small != union.len() {
        return Err(fail(Stage::Limited, "limited sets", "nesting or disjointness violated"));
    }

    let by_id: HashMap<&str, &ManifestRow> = train.iter().map(|r| (r.segment_id.as_str(), r)).collect();
    let manifest = |name: &str, ids: &[String]| -> Vec<ManifestRow> {
        ids.iter()
            .map(|id| ManifestRow {
                partition: RowPartition::Limited(name.to_string()),
                ..by_id[id.as_str()].clone()
            })
            .collect()
    };
    let mut named: Vec<(String, Vec<ManifestRow>)> = sets
        .small_sets
        .iter()
        .enumerate()
        .map(|(i, ids)| {
            let name = small_set_name(i);
            let rows = manifest(&name, ids);
            (name, rows)
        })
        .collect();
    named.push(("1h".to_string(), manifest("1h", &sets.one_hour)));
    named.push(("10h".to_string(), manifest("10h", &sets.ten_hour)));
    Ok((sets, named))
}

/// Stopwords from a file, the built-in list for the language, or none.
pub fn load_stopwords(path: Option<&Path>, language: &str) -> Result<Stopwords, DecontamError> {
    match path {
        Some(p) => Stopwords::from_file(p),
        None => Ok(Stopwords::builtin(language).unwrap_or_else(|_| {
            log::warn!("no built-in stopword list for {language}, using none");
            Stopwords::default()
        })),
    }
}

/// One sentence per non-empty line, words separated by whitespace.
pub fn sentences_from_text(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Normalizes raw text line by line, dropping lines that become empty.
pub fn normalize_lines(raw: &str, orth: &Orthography) -> Vec<String> {
    raw.lines()
        .map(|l| normalize(l, orth).render())
        .filter(|l| !l.is_empty())
        .collect()
}
