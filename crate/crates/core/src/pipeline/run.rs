//! The end-to-end run. Every stage reads its inputs from the files earlier
//! stages wrote under `output_dir/<stage>/`, so a run can restart at any
//! stage. Each stage finishes by writing `report.json` and a `.stamp` holding
//! the config hash; restarting refuses earlier outputs whose stamp differs.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{ConfigError, PipelineConfig};
use super::manifest::{read_table, write_table, Manifest, ManifestRow, HASH_PREFIX};
use super::stats::corpus_stats;
use super::steps::{self, fail, HardFilter, LM_BOOKS_HEADER, SPEAKERS_HEADER};
use super::{PipelineError, Stage};
use crate::decontam::{build_heldout_index, filter_corpus, LmBook, REPORT_TSV_HEADER};
use crate::ngramlm::{NGramModel, TrainConfig};
use crate::retrieval::{CandidateTranscript, WordformRules, CANDIDATE_TSV_HEADER};
use crate::splitter::{validate_books, BookRecord, Gender, Partition, RejectReason};
use crate::textnorm::{normalize, normalize_bytes, Orthography};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// First stage to execute; earlier stages must have stamped outputs.
    pub from_stage: Option<Stage>,
    /// Last stage to execute.
    pub until: Option<Stage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub stages: BTreeMap<String, Value>,
}

/// Book id, title words and sentences.
type LmBookText = (String, Vec<String>, Vec<Vec<String>>);

const STAMP: &str = ".stamp";
const VALIDATION_HEADER: &str = "book_id\tdecision";
const SEGMENT_ID_HEADER: &str = "segment_id";
const CHAPTERS_HEADER: &str = "chapter_id\tpartition";
const BOOK_ID_HEADER: &str = "book_id";

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    hash: String,
    input: PathBuf,
    out: PathBuf,
    orth: Orthography,
}

impl Ctx<'_> {
    fn dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.name())
    }

    fn path(&self, stage: Stage, rel: &str) -> PathBuf {
        self.dir(stage).join(rel)
    }

    fn write(&self, stage: Stage, path: &Path, body: &str) -> Result<(), PipelineError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| fail(stage, dir, e))?;
        }
        fs::write(path, body).map_err(|e| fail(stage, path, e))
    }

    /// Text file whose first line is the config hash.
    fn write_stamped(&self, stage: Stage, path: &Path, body: &str) -> Result<(), PipelineError> {
        self.write(stage, path, &format!("{HASH_PREFIX}{}\n{body}", self.hash))
    }

    fn read_stamped(&self, stage: Stage, path: &Path) -> Result<String, PipelineError> {
        let text = steps::read_file(stage, path)?;
        let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
        match first.strip_prefix(HASH_PREFIX) {
            Some(h) if h == self.hash => Ok(rest.to_string()),
            Some(h) => Err(fail(stage, path, format!("written under config {h}, expected {}", self.hash))),
            None => Err(fail(stage, path, "missing config hash line")),
        }
    }

    fn write_table<I, S>(&self, stage: Stage, path: &Path, header: &str, rows: I) -> Result<(), PipelineError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        write_table(path, &self.hash, header, rows).map_err(|e| fail(stage, path, e))
    }

    fn read_rows(&self, stage: Stage, path: &Path, header: &str) -> Result<Vec<String>, PipelineError> {
        read_table(path, header, Some(&self.hash))
            .map(|t| t.rows)
            .map_err(|e| fail(stage, path, e))
    }

    fn write_manifest(&self, stage: Stage, path: &Path, rows: Vec<ManifestRow>) -> Result<(), PipelineError> {
        Manifest::new(self.hash.clone(), rows)
            .write(path)
            .map_err(|e| fail(stage, path, e))
    }

    fn read_manifest(&self, stage: Stage, path: &Path) -> Result<Vec<ManifestRow>, PipelineError> {
        Manifest::read(path, Some(&self.hash))
            .map(|m| m.rows)
            .map_err(|e| fail(stage, path, e))
    }

    fn write_json(&self, stage: Stage, path: &Path, value: &impl Serialize) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| fail(stage, path, e))?;
        self.write(stage, path, &(text + "\n"))
    }

    fn speakers(&self, stage: Stage) -> Result<BTreeMap<String, Gender>, PipelineError> {
        let path = self.path(Stage::Normalize, "speakers.tsv");
        self.read_rows(stage, &path, SPEAKERS_HEADER)?
            .iter()
            .map(|r| steps::parse_speaker(r).map_err(|e| fail(stage, &path, e)))
            .collect()
    }

    fn valid_books(&self, stage: Stage) -> Result<Vec<BookRecord>, PipelineError> {
        let path = self.path(Stage::Normalize, "books.jsonl");
        let body = self.read_stamped(stage, &path)?;
        steps::parse_books(&body).map_err(|e| fail(stage, &path, e))
    }

    fn book_words(&self, stage: Stage, book_id: &str) -> Result<Vec<String>, PipelineError> {
        let path = self.path(Stage::Normalize, &format!("books/{book_id}.txt"));
        Ok(self
            .read_stamped(stage, &path)?
            .split_whitespace()
            .map(str::to_string)
            .collect())
    }

    fn candidates(&self, stage: Stage) -> Result<Vec<CandidateTranscript>, PipelineError> {
        let path = self.path(Stage::Retrieve, "candidates.tsv");
        self.read_rows(stage, &path, CANDIDATE_TSV_HEADER)?
            .iter()
            .enumerate()
            .map(|(i, r)| CandidateTranscript::from_tsv_row(i + 3, r).map_err(|e| fail(stage, &path, e)))
            .collect()
    }

    /// `(book_id, normalized title words, sentences)` for every LM book.
    fn lm_books(&self, stage: Stage) -> Result<Vec<LmBookText>, PipelineError> {
        let index = self.path(Stage::Normalize, "lm_books.tsv");
        self.read_rows(stage, &index, LM_BOOKS_HEADER)?
            .iter()
            .map(|row| {
                let (id, title) = row.split_once('\t').unwrap_or((row.as_str(), ""));
                let body = self.read_stamped(stage, &self.path(Stage::Normalize, &format!("lm_books/{id}.txt")))?;
                let title = title.split_whitespace().map(str::to_string).collect();
                Ok((id.to_string(), title, steps::sentences_from_text(&body)))
            })
            .collect()
    }
}

fn normalize_stage(ctx: &Ctx) -> Result<Value, PipelineError> {
    let st = Stage::Normalize;
    let input = &ctx.input;
    let is_empty = fs::read_dir(input).map(|mut d| d.next().is_none()).unwrap_or(true);
    if is_empty {
        return Err(fail(st, input, "input directory is missing or empty"));
    }
    let speakers_path = input.join("speakers.tsv");
    let mut speakers =
        steps::parse_speakers(&steps::read_file(st, &speakers_path)?).map_err(|e| fail(st, &speakers_path, e))?;
    speakers.sort();
    let books_path = input.join("books.jsonl");
    let books = steps::parse_books(&steps::read_file(st, &books_path)?).map_err(|e| fail(st, &books_path, e))?;
    let known: HashSet<String> = speakers.iter().map(|(id, _)| id.clone()).collect();
    let validation = validate_books(&books, Some(&known));

    let texts: Vec<(String, Vec<String>)> = validation
        .valid
        .par_iter()
        .map(|b| {
            let path = input.join("books").join(format!("{}.txt", b.book_id));
            let bytes = fs::read(&path).map_err(|e| fail(st, &path, e))?;
            let text = normalize_bytes(&bytes, &ctx.orth).map_err(|e| fail(st, &path, e))?;
            Ok((b.book_id.clone(), text.tokens))
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut words_total = 0;
    for (id, words) in &texts {
        words_total += words.len();
        ctx.write_stamped(st, &ctx.path(st, &format!("books/{id}.txt")), &(words.join(" ") + "\n"))?;
    }
    let mut meta = String::new();
    for b in &validation.valid {
        meta.push_str(&serde_json::to_string(b).map_err(|e| fail(st, &b.book_id, e))?);
        meta.push('\n');
    }
    ctx.write_stamped(st, &ctx.path(st, "books.jsonl"), &meta)?;
    ctx.write_table(
        st,
        &ctx.path(st, "speakers.tsv"),
        SPEAKERS_HEADER,
        speakers.iter().map(|(id, g)| format!("{id}\t{g}")),
    )?;
    let mut decisions: Vec<(String, String)> = validation
        .valid
        .iter()
        .map(|b| (b.book_id.clone(), "valid".to_string()))
        .chain(validation.rejections.iter().map(|r| (r.book_id.clone(), r.reason.to_string())))
        .collect();
    decisions.sort();
    ctx.write_table(
        st,
        &ctx.path(st, "validation.tsv"),
        VALIDATION_HEADER,
        decisions.iter().map(|(id, d)| format!("{id}\t{d}")),
    )?;

    let lm_index = input.join("lm_books.tsv");
    let mut lm_rows = Vec::new();
    if lm_index.exists() {
        for row in steps::data_rows(&steps::read_file(st, &lm_index)?, LM_BOOKS_HEADER) {
            let (id, title) = row.split_once('\t').unwrap_or((row.as_str(), ""));
            lm_rows.push((id.trim().to_string(), title.to_string()));
        }
    }
    lm_rows.sort();
    let lm_texts: Vec<(String, String, Vec<String>)> = lm_rows
        .par_iter()
        .map(|(id, title)| {
            let path = input.join("lm_books").join(format!("{id}.txt"));
            let raw = steps::read_file(st, &path)?;
            Ok((id.clone(), normalize(title, &ctx.orth).render(), steps::normalize_lines(&raw, &ctx.orth)))
        })
        .collect::<Result<_, PipelineError>>()?;
    for (id, _, lines) in &lm_texts {
        let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
        ctx.write_stamped(st, &ctx.path(st, &format!("lm_books/{id}.txt")), &body)?;
    }
    ctx.write_table(
        st,
        &ctx.path(st, "lm_books.tsv"),
        LM_BOOKS_HEADER,
        lm_texts.iter().map(|(id, title, _)| format!("{id}\t{title}")),
    )?;

    let mut rejected: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &validation.rejections {
        let key = match &r.reason {
            RejectReason::CorruptedMetadata { .. } => "corrupted_metadata",
            RejectReason::MultiSpeaker => "multi_speaker",
            RejectReason::Superseded { .. } => "superseded",
        };
        *rejected.entry(key).or_insert(0) += 1;
    }
    Ok(json!({
        "books": books.len(),
        "valid_books": validation.valid.len(),
        "rejected": rejected,
        "book_words": words_total,
        "speakers": speakers.len(),
        "lm_books": lm_texts.len(),
    }))
}

fn segment_stage(ctx: &Ctx) -> Result<Value, PipelineError> {
    let st = Stage::Segment;
    let books = ctx.valid_books(st)?;
    let speakers = ctx.speakers(st)?;
    let out = steps::segment_recordings(
        &books,
        &speakers,
        &ctx.input.join("recordings"),
        &ctx.cfg.segment_params(),
        &ctx.orth,
    )?;
    let duration: u64 = out.rows.iter().map(ManifestRow::duration_ms).sum();
    let report = json!({
        "recordings": out.recordings,
        "segments": out.rows.len(),
        "duration_ms": duration,
        "residual_ms": out.residual_ms,
        "dropped_tokens": out.dropped_tokens,
    });
    ctx.write_manifest(st, &ctx.path(st, "segments.tsv"), out.rows)?;
    Ok(report)
}

fn retrieve_stage(ctx: &Ctx) -> Result<Value, PipelineError> {
    let st = Stage::Retrieve;
    let segments = ctx.read_manifest(st, &ctx.path(Stage::Segment, "segments.tsv"))?;
    let books: BTreeMap<String, Vec<String>> = ctx
        .valid_books(st)?
        .iter()
        .map(|b| Ok((b.book_id.clone(), ctx.book_words(st, &b.book_id)?)))
        .collect::<Result<_, PipelineError>>()?;
    let rules = WordformRules::from_orthography(&ctx.orth, ctx.cfg.rare_threshold);
    let out = steps::retrieve_segments(
        &segments,
        &books,
        ctx.cfg.retrieval_params(),
        ctx.cfg.fix_wordforms.then_some(&rules),
    )?;
    let accepted = steps::accepted_rows(&segments, &out.candidates);
    let accepted_ms: u64 = accepted.iter().map(ManifestRow::duration_ms).sum();
    let report = json!({
        "segments": segments.len(),
        "accepted": accepted.len(),
        "rejected": out.candidates.len() - accepted.len(),
        "no_match": out.no_match.len(),
        "accepted_duration_ms": accepted_ms,
    });
    ctx.write_table(
        st,
        &ctx.path(st, "candidates.tsv"),
        CANDIDATE_TSV_HEADER,
        out.candidates.iter().map(CandidateTranscript::to_tsv_row),
    )?;
    ctx.write_table(st, &ctx.path(st, "no_match.tsv"), SEGMENT_ID_HEADER, &out.no_match)?;
    ctx.write_manifest(st, &ctx.path(st, "accepted.tsv"), accepted)?;
    Ok(report)
}

fn split_stage(ctx: &Ctx) -> Result<Value, PipelineError> {
    let st = Stage::Split;
    let accepted = ctx.read_manifest(st, &ctx.path(Stage::Retrieve, "accepted.tsv"))?;
    let segments = ctx.read_manifest(st, &ctx.path(Stage::Segment, "segments.tsv"))?;
    let candidates = ctx.candidates(st)?;
    let hard = ctx.cfg.hard_speaker_percentile.map(|percentile| HardFilter {
        percentile,
        reference_wers: &ctx.cfg.hard_reference_wers,
    });
    let out = steps::split_segments(
        &accepted,
        &segments,
        &candidates,
        &ctx.cfg.split_config(),
        hard,
        ctx.cfg.stage_seed("split"),
    )?;
    let refs: Vec<_> = accepted.iter().map(steps::segment_ref).collect();
    let report = json!({
        "speakers": out.speakers,
        "tallies": out.assignment.tallies(&refs, &out.genders),
        "truncated_segments": out.assignment.truncated_segments.len(),
        "dropped_chapters": out.assignment.dropped_chapters,
        "unassigned_segments": out.unassigned.len(),
        "hard_speaker_filter": out.hard_filter.map(|(applied, n)| json!({"applied": applied, "hard_speakers": n})),
    });
    ctx.write_table(
        st,
        &ctx.path(st, "chapters.tsv"),
        CHAPTERS_HEADER,
        out.assignment.chapters.iter().map(|(c, p)| format!("{c}\t{p}")),
    )?;
    for (p, rows) in out.partitions {
        ctx.write_manifest(st, &ctx.path(st, &format!("{p}.tsv")), rows)?;
    }
    ctx.write_manifest(st, &ctx.path(st, "unassigned.tsv"), out.unassigned)?;
    Ok(report)
}

fn limited_stage(ctx: &Ctx) -> Result<Value, PipelineError> {
    let st = Stage::Limited;
    let train = ctx.read_manifest(st, &ctx.path(Stage::Split, "train.tsv"))?;
    let (sets, named) = steps::limited_sets(&train, &ctx.cfg.limited_config(), ctx.cfg.stage_seed("limited"))?;
    let mut summary = BTreeMap::new();
    for (name, rows) in named {
        let mut per_gender: BTreeMap<Gender, u64> = BTreeMap::new();
        for r in &rows {
            *per_gender.entry(r.gender).or_insert(0) += r.duration_ms();
        }
        summary.insert(name.clone(), json!({"segments": rows.len(), "duration_ms_by_gender": per_gender}));
        ctx.write_manifest(st, &ctx.path(st, &format!("{name}.tsv")), rows)?;
    }
    Ok(json!({"pool": sets.pool, "sets": summary, "shortfalls": sets.shortfalls}))
}

fn decontam_stage(ctx: &Ctx) -> Result<Value, PipelineError> {
    let st = Stage::Decontam;
    let mut heldout = ctx.read_manifest(st, &ctx.path(Stage::Split, "dev.tsv"))?;
    heldout.extend(ctx.read_manifest(st, &ctx.path(Stage::Split, "test.tsv"))?);
    let stopwords =
        steps::load_stopwords(ctx.cfg.stopwords.as_deref(), &ctx.cfg.language).map_err(|e| fail(st, "stopwords", e))?;
    let texts: Vec<Vec<String>> = heldout.iter().map(|r| r.transcript.clone()).collect();
    let index = build_heldout_index(&texts, stopwords);
    let heldout_books: HashSet<&str> = heldout.iter().map(|r| r.book_id.as_str()).collect();
    let titles: Vec<Vec<String>> = ctx
        .valid_books(st)?
        .iter()
        .filter(|b| heldout_books.contains(b.book_id.as_str()))
        .map(|b| normalize(&b.title, &ctx.orth).tokens)
        .collect();
    let books: Vec<LmBook> = ctx
        .lm_books(st)?
        .into_iter()
        .map(|(book_id, title, sentences)| LmBook {
            book_id,
            title,
            words: sentences.into_iter().flatten().collect(),
        })
        .collect();
    let outcome =
        filter_corpus(&books, &index, &titles, &ctx.cfg.decontam_config()).map_err(|e| fail(st, "lm books", e))?;
    ctx.write_table(
        st,
        &ctx.path(st, "report.tsv"),
        REPORT_TSV_HEADER,
        outcome.report.iter().map(|v| v.to_tsv_row()),
    )?;
    ctx.write_table(st, &ctx.path(st, "kept.tsv"), BOOK_ID_HEADER, &outcome.kept)?;
    Ok(json!({
        "heldout_segments": heldout.len(),
        "heldout_titles": titles.len(),
        "index_5grams": index.len(),
        "books": books.len(),
        "kept": outcome.kept.len(),
        "removed": outcome.removed,
    }))
}

fn model_path(ctx: &Ctx, order: usize, ext: &str) -> PathBuf {
    ctx.path(Stage::LmTrain, &format!("{order}gram.{ext}"))
}

fn lm_train_stage(ctx: &Ctx) -> Result<Value, PipelineError> {
    let st = Stage::LmTrain;
    let kept: HashSet<String> = ctx
        .read_rows(st, &ctx.path(Stage::Decontam, "kept.tsv"), BOOK_ID_HEADER)?
        .into_iter()
        .collect();
    let sentences: Vec<Vec<String>> = ctx
        .lm_books(st)?
        .into_iter()
        .filter(|(id, _, _)| kept.contains(id))
        .flat_map(|(_, _, s)| s)
        .collect();
    fs::create_dir_all(ctx.dir(st)).map_err(|e| fail(st, ctx.dir(st), e))?;
    let mut models = BTreeMap::new();
    for &order in &ctx.cfg.lm_orders {
        let model = NGramModel::train(&sentences, &TrainConfig::new(order)).map_err(|e| fail(st, "lm corpus", e))?;
        let bin = model_path(ctx, order, "bin");
        model.save(&bin).map_err(|e| fail(st, &bin, e))?;
        let mut arpa = format!("{HASH_PREFIX}{}\n", ctx.hash).into_bytes();
        model.write_arpa(&mut arpa).map_err(|e| fail(st, &bin, e))?;
        let arpa_path = model_path(ctx, order, "arpa");
        fs::write(&arpa_path, arpa).map_err(|e| fail(st, &arpa_path, e))?;
        let grams: Vec<usize> = (1..=order).map(|k| model.num_grams(k)).collect();
        models.insert(
            order.to_string(),
            json!({
                "smoothing": model.smoothing().describe(),
                "vocab": model.vocab().len(),
                "ngrams": grams,
                "discounts": model.discounts(),
            }),
        );
    }
    Ok(json!({"sentences": sentences.len(), "models": models}))
}

fn lm_eval_stage(ctx: &Ctx) -> Result<Value, PipelineError> {
    let st = Stage::LmEval;
    let dev: Vec<Vec<String>> = ctx
        .read_manifest(st, &ctx.path(Stage::Split, "dev.tsv"))?
        .into_iter()
        .map(|r| r.transcript)
        .filter(|t| !t.is_empty())
        .collect();
    let mut reports = BTreeMap::new();
    let mut ppl = BTreeMap::new();
    for &order in &ctx.cfg.lm_orders {
        let path = model_path(ctx, order, "bin");
        let model = NGramModel::load(&path).map_err(|e| fail(st, &path, e))?;
        let report = model
            .evaluate(&dev, ctx.cfg.oov_context)
            .map_err(|e| fail(st, "dev transcripts", e))?;
        ppl.insert(order, report.perplexity);
        reports.insert(order.to_string(), report);
    }
    let comparison = match (ppl.first_key_value(), ppl.last_key_value()) {
        (Some((lo, lp)), Some((hi, hp))) if lo != hi => json!({
            "low_order": lo,
            "high_order": hi,
            "high_not_worse": hp <= lp,
        }),
        _ => Value::Null,
    };
    Ok(json!({
        "oov_context": ctx.cfg.oov_context,
        "dev_sentences": dev.len(),
        "models": reports,
        "comparison": comparison,
    }))
}

fn run_stage(ctx: &Ctx, stage: Stage) -> Result<Value, PipelineError> {
    match stage {
        Stage::Normalize => normalize_stage(ctx),
        Stage::Segment => segment_stage(ctx),
        Stage::Retrieve => retrieve_stage(ctx),
        Stage::Split => split_stage(ctx),
        Stage::Limited => limited_stage(ctx),
        Stage::Decontam => decontam_stage(ctx),
        Stage::LmTrain => lm_train_stage(ctx),
        Stage::LmEval => lm_eval_stage(ctx),
    }
}

/// Release statistics over the train, dev and test manifests.
fn release_stats(ctx: &Ctx, last: Stage) -> Result<Option<Value>, PipelineError> {
    if last < Stage::Split {
        return Ok(None);
    }
    let mut rows = Vec::new();
    for p in Partition::ALL {
        rows.extend(ctx.read_manifest(last, &ctx.path(Stage::Split, &format!("{p}.tsv")))?);
    }
    Ok(Some(json!({"config_hash": ctx.hash, "stats": corpus_stats(&rows)})))
}

/// The orthography named by the config, or the built-in one for its language.
pub fn load_orthography(cfg: &PipelineConfig) -> Result<Orthography, ConfigError> {
    match &cfg.orthography {
        Some(p) => Orthography::from_file(p),
        None => Orthography::builtin(&cfg.language),
    }
    .map_err(|e| ConfigError::Invalid {
        key: "orthography",
        msg: e.to_string(),
    })
}

fn run_inner(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunReport, PipelineError> {
    let ctx = Ctx {
        cfg,
        hash: cfg.hash(),
        input: cfg.input_dir.clone(),
        out: cfg.output_dir.clone(),
        orth: load_orthography(cfg)?,
    };
    let first = opts.from_stage.unwrap_or(Stage::Normalize);
    let last = opts.until.unwrap_or(Stage::LmEval);
    if first > last {
        return Err(ConfigError::Invalid {
            key: "from_stage",
            msg: format!("{first} comes after {last}"),
        }
        .into());
    }
    fs::create_dir_all(&ctx.out).map_err(|e| fail(first, &ctx.out, e))?;
    let mut report = RunReport {
        config_hash: ctx.hash.clone(),
        stages: BTreeMap::new(),
    };
    for stage in Stage::ALL.into_iter().filter(|s| *s <= last) {
        let stamp = ctx.dir(stage).join(STAMP);
        let report_path = ctx.dir(stage).join("report.json");
        if stage < first {
            let found = fs::read_to_string(&stamp).unwrap_or_default();
            if found.trim() != ctx.hash {
                return Err(fail(
                    stage,
                    ctx.dir(stage),
                    "outputs are missing or were written under a different config; re-run from an earlier stage",
                ));
            }
            let text = steps::read_file(stage, &report_path)?;
            let value: Value = serde_json::from_str(&text).map_err(|e| fail(stage, &report_path, e))?;
            report.stages.insert(stage.name().to_string(), value["report"].clone());
            continue;
        }
        let started = Instant::now();
        let _ = fs::remove_file(&stamp);
        let value = run_stage(&ctx, stage)?;
        ctx.write_json(stage, &report_path, &json!({"config_hash": ctx.hash, "report": value}))?;
        ctx.write(stage, &stamp, &format!("{}\n", ctx.hash))?;
        info!("{stage}: done in {:.2?}", started.elapsed());
        report.stages.insert(stage.name().to_string(), value);
    }
    if let Some(stats) = release_stats(&ctx, last)? {
        ctx.write_json(last, &ctx.out.join("stats.json"), &stats)?;
    }
    ctx.write_json(last, &ctx.out.join("report.json"), &report)?;
    Ok(report)
}

/// Runs the pipeline stages in order, writing everything under
/// `cfg.output_dir`. Stops at the first failing stage, leaving earlier
/// outputs in place.
pub fn run_pipeline(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    match cfg.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| fail(Stage::Normalize, "worker pool", e))?;
            pool.install(|| run_inner(cfg, opts))
        }
        None => run_inner(cfg, opts),
    }
}
