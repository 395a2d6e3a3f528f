//! Single-stage commands over explicit files, as exposed by the CLI. Each
//! takes the effective config (for parameters and the provenance hash) and
//! returns a small JSON summary. Inputs are read without a hash check, since
//! they may come from anywhere; outputs carry the hash of `cfg`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::PipelineConfig;
use super::manifest::{read_table, write_table, Manifest, ManifestRow};
use super::run::load_orthography;
use super::stats::corpus_stats;
use super::steps::{self, fail, HardFilter};
use super::{PipelineError, Stage};
use crate::decontam::{build_heldout_index, filter_corpus, LmBook, REPORT_TSV_HEADER};
use crate::ngramlm::{NGramModel, OovContext, TrainConfig};
use crate::retrieval::{CandidateTranscript, WordformRules, CANDIDATE_TSV_HEADER};
use crate::splitter::{validate_books, Gender};
use crate::textnorm::{normalize, normalize_bytes};

fn text_files(stage: Stage, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| fail(stage, dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    Ok(files)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn read_manifest(stage: Stage, path: &Path) -> Result<Vec<ManifestRow>, PipelineError> {
    Manifest::read(path, None).map(|m| m.rows).map_err(|e| fail(stage, path, e))
}

fn write_manifest(stage: Stage, cfg: &PipelineConfig, path: &Path, rows: Vec<ManifestRow>) -> Result<(), PipelineError> {
    Manifest::new(cfg.hash(), rows).write(path).map_err(|e| fail(stage, path, e))
}

fn write_file(stage: Stage, path: &Path, body: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| fail(stage, dir, e))?;
    }
    fs::write(path, body).map_err(|e| fail(stage, path, e))
}

/// Normalizes one text file, or every `*.txt` of a directory into a
/// directory of the same names. Output is the token sequence joined by
/// single spaces.
pub fn normalize_path(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<Value, PipelineError> {
    let st = Stage::Normalize;
    let orth = load_orthography(cfg)?;
    let pairs: Vec<(PathBuf, PathBuf)> = if input.is_dir() {
        text_files(st, input)?
            .into_iter()
            .map(|p| {
                let out = output.join(p.file_name().expect("listed files have names"));
                (p, out)
            })
            .collect()
    } else {
        vec![(input.to_path_buf(), output.to_path_buf())]
    };
    let mut words = 0;
    for (src, dst) in &pairs {
        let bytes = fs::read(src).map_err(|e| fail(st, src, e))?;
        let text = normalize_bytes(&bytes, &orth).map_err(|e| fail(st, src, e))?;
        words += text.tokens.len();
        write_file(st, dst, &(text.tokens.join(" ") + "\n"))?;
    }
    Ok(json!({"files": pairs.len(), "words": words}))
}

/// Segments the recordings of an input directory (`books.jsonl`,
/// `speakers.tsv`, `recordings/`) into a segment manifest. Books that fail
/// validation are skipped.
pub fn segment_dir(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<Value, PipelineError> {
    let st = Stage::Segment;
    let orth = load_orthography(cfg)?;
    let books_path = input.join("books.jsonl");
    let books = steps::parse_books(&steps::read_file(st, &books_path)?).map_err(|e| fail(st, &books_path, e))?;
    let speakers_path = input.join("speakers.tsv");
    let speakers: BTreeMap<String, Gender> = steps::parse_speakers(&steps::read_file(st, &speakers_path)?)
        .map_err(|e| fail(st, &speakers_path, e))?
        .into_iter()
        .collect();
    let known: HashSet<String> = speakers.keys().cloned().collect();
    let validation = validate_books(&books, Some(&known));
    let out = steps::segment_recordings(
        &validation.valid,
        &speakers,
        &input.join("recordings"),
        &cfg.segment_params(),
        &orth,
    )?;
    let summary = json!({
        "rejected_books": validation.rejections.len(),
        "recordings": out.recordings,
        "segments": out.rows.len(),
        "residual_ms": out.residual_ms,
        "dropped_tokens": out.dropped_tokens,
    });
    write_manifest(st, cfg, output, out.rows)?;
    Ok(summary)
}

/// Retrieves candidate transcripts for a segment manifest from a directory
/// of `<book_id>.txt` texts. Writes the candidate TSV and, if asked, the
/// manifest of accepted segments.
pub fn retrieve_files(
    cfg: &PipelineConfig,
    books_dir: &Path,
    pseudo: &Path,
    output: &Path,
    accepted_out: Option<&Path>,
) -> Result<Value, PipelineError> {
    let st = Stage::Retrieve;
    let orth = load_orthography(cfg)?;
    let segments = read_manifest(st, pseudo)?;
    let mut books = BTreeMap::new();
    for path in text_files(st, books_dir)? {
        let bytes = fs::read(&path).map_err(|e| fail(st, &path, e))?;
        let text = normalize_bytes(&bytes, &orth).map_err(|e| fail(st, &path, e))?;
        books.insert(file_stem(&path), text.tokens);
    }
    let rules = WordformRules::from_orthography(&orth, cfg.rare_threshold);
    let out = steps::retrieve_segments(&segments, &books, cfg.retrieval_params(), cfg.fix_wordforms.then_some(&rules))?;
    write_table(output, &cfg.hash(), CANDIDATE_TSV_HEADER, out.candidates.iter().map(CandidateTranscript::to_tsv_row))
        .map_err(|e| fail(st, output, e))?;
    if let Some(path) = accepted_out {
        write_manifest(st, cfg, path, steps::accepted_rows(&segments, &out.candidates))?;
    }
    Ok(json!({
        "segments": segments.len(),
        "candidates": out.candidates.len(),
        "accepted": out.accepted(),
        "no_match": out.no_match.len(),
    }))
}

fn read_candidates(stage: Stage, path: &Path) -> Result<Vec<CandidateTranscript>, PipelineError> {
    read_table(path, CANDIDATE_TSV_HEADER, None)
        .map_err(|e| fail(stage, path, e))?
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| CandidateTranscript::from_tsv_row(i + 3, r).map_err(|e| fail(stage, path, e)))
        .collect()
}

/// Splits the accepted candidates of a segment manifest into
/// `train.tsv`, `dev.tsv`, `test.tsv` and `unassigned.tsv` under `out_dir`,
/// plus `stats.json`.
pub fn split_files(cfg: &PipelineConfig, segments: &Path, candidates: &Path, out_dir: &Path) -> Result<Value, PipelineError> {
    let st = Stage::Split;
    let segments = read_manifest(st, segments)?;
    let candidates = read_candidates(st, candidates)?;
    let accepted = steps::accepted_rows(&segments, &candidates);
    let hard = cfg.hard_speaker_percentile.map(|percentile| HardFilter {
        percentile,
        reference_wers: &cfg.hard_reference_wers,
    });
    let out = steps::split_segments(&accepted, &segments, &candidates, &cfg.split_config(), hard, cfg.stage_seed("split"))?;
    let mut released = Vec::new();
    for (p, rows) in out.partitions {
        released.extend(rows.iter().cloned());
        write_manifest(st, cfg, &out_dir.join(format!("{p}.tsv")), rows)?;
    }
    let unassigned = out.unassigned.len();
    write_manifest(st, cfg, &out_dir.join("unassigned.tsv"), out.unassigned)?;
    let stats = serde_json::to_string_pretty(&json!({"config_hash": cfg.hash(), "stats": corpus_stats(&released)}))
        .map_err(|e| fail(st, out_dir, e))?;
    write_file(st, &out_dir.join("stats.json"), &(stats + "\n"))?;
    Ok(json!({
        "speakers": out.speakers,
        "segments": released.len(),
        "unassigned": unassigned,
        "dropped_chapters": out.assignment.dropped_chapters.len(),
    }))
}

/// Builds the limited-supervision manifests from a train manifest.
pub fn limited_files(cfg: &PipelineConfig, train: &Path, out_dir: &Path) -> Result<Value, PipelineError> {
    let st = Stage::Limited;
    let train = read_manifest(st, train)?;
    let (sets, named) = steps::limited_sets(&train, &cfg.limited_config(), cfg.stage_seed("limited"))?;
    let mut sizes = BTreeMap::new();
    for (name, rows) in named {
        sizes.insert(name.clone(), rows.len());
        write_manifest(st, cfg, &out_dir.join(format!("{name}.tsv")), rows)?;
    }
    Ok(json!({"sets": sizes, "shortfalls": sets.shortfalls}))
}

/// Paths and names for [`decontam_files`].
#[derive(Debug, Clone, Default)]
pub struct DecontamInputs {
    /// Held-out manifests (dev and test).
    pub heldout: Vec<PathBuf>,
    /// Directory of candidate `<book_id>.txt` texts.
    pub books: PathBuf,
    /// Optional `book_id<TAB>title` table for the candidate books.
    pub titles: Option<PathBuf>,
    /// Titles of the held-out books, one per line.
    pub heldout_titles: Option<PathBuf>,
    pub report: PathBuf,
}

/// Scores candidate LM books against held-out transcripts and writes the
/// decision report.
pub fn decontam_files(cfg: &PipelineConfig, inputs: &DecontamInputs) -> Result<Value, PipelineError> {
    let st = Stage::Decontam;
    let orth = load_orthography(cfg)?;
    let mut heldout = Vec::new();
    for path in &inputs.heldout {
        heldout.extend(read_manifest(st, path)?.into_iter().map(|r| r.transcript));
    }
    let stopwords = steps::load_stopwords(cfg.stopwords.as_deref(), &cfg.language).map_err(|e| fail(st, "stopwords", e))?;
    let index = build_heldout_index(&heldout, stopwords);
    let heldout_titles: Vec<Vec<String>> = match &inputs.heldout_titles {
        Some(p) => steps::read_file(st, p)?
            .lines()
            .map(|l| normalize(l, &orth).tokens)
            .filter(|t| !t.is_empty())
            .collect(),
        None => Vec::new(),
    };
    let titles: BTreeMap<String, Vec<String>> = match &inputs.titles {
        Some(p) => steps::data_rows(&steps::read_file(st, p)?, steps::LM_BOOKS_HEADER)
            .iter()
            .filter_map(|r| r.split_once('\t'))
            .map(|(id, t)| (id.to_string(), normalize(t, &orth).tokens))
            .collect(),
        None => BTreeMap::new(),
    };
    let books: Vec<LmBook> = text_files(st, &inputs.books)?
        .into_iter()
        .map(|path| {
            let bytes = fs::read(&path).map_err(|e| fail(st, &path, e))?;
            let words = normalize_bytes(&bytes, &orth).map_err(|e| fail(st, &path, e))?.tokens;
            let book_id = file_stem(&path);
            Ok(LmBook {
                title: titles.get(&book_id).cloned().unwrap_or_default(),
                book_id,
                words,
            })
        })
        .collect::<Result<_, PipelineError>>()?;
    let outcome = filter_corpus(&books, &index, &heldout_titles, &cfg.decontam_config()).map_err(|e| fail(st, "books", e))?;
    write_table(&inputs.report, &cfg.hash(), REPORT_TSV_HEADER, outcome.report.iter().map(|v| v.to_tsv_row()))
        .map_err(|e| fail(st, &inputs.report, e))?;
    Ok(json!({"books": books.len(), "kept": outcome.kept.len(), "removed": outcome.removed}))
}

/// Trains an n-gram model on a text file or a directory of `*.txt` files,
/// one sentence per line. Lines are normalized first.
pub fn lm_train_files(
    cfg: &PipelineConfig,
    train: &TrainConfig,
    input: &Path,
    model_out: &Path,
    arpa_out: Option<&Path>,
) -> Result<Value, PipelineError> {
    let st = Stage::LmTrain;
    let orth = load_orthography(cfg)?;
    let files = if input.is_dir() {
        text_files(st, input)?
    } else {
        vec![input.to_path_buf()]
    };
    let mut sentences = Vec::new();
    for path in &files {
        let raw = steps::read_file(st, path)?;
        let lines = steps::normalize_lines(&raw, &orth);
        sentences.extend(lines.iter().map(|l| l.split(' ').map(str::to_string).collect::<Vec<_>>()));
    }
    let model = NGramModel::train(&sentences, train).map_err(|e| fail(st, input, e))?;
    if let Some(dir) = model_out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| fail(st, dir, e))?;
    }
    model.save(model_out).map_err(|e| fail(st, model_out, e))?;
    if let Some(path) = arpa_out {
        let mut buf = Vec::new();
        model.write_arpa(&mut buf).map_err(|e| fail(st, path, e))?;
        fs::write(path, buf).map_err(|e| fail(st, path, e))?;
    }
    let grams: Vec<usize> = (1..=model.order()).map(|k| model.num_grams(k)).collect();
    Ok(json!({
        "sentences": sentences.len(),
        "order": model.order(),
        "smoothing": model.smoothing().describe(),
        "ngrams": grams,
    }))
}

/// Evaluates a saved model on the transcripts of a manifest and writes the
/// JSON report.
pub fn lm_eval_files(model: &Path, dev: &Path, oov: OovContext, report: &Path) -> Result<Value, PipelineError> {
    let st = Stage::LmEval;
    let lm = NGramModel::load(model).map_err(|e| fail(st, model, e))?;
    let dev: Vec<Vec<String>> = read_manifest(st, dev)?
        .into_iter()
        .map(|r| r.transcript)
        .filter(|t| !t.is_empty())
        .collect();
    let result = lm.evaluate(&dev, oov).map_err(|e| fail(st, "dev", e))?;
    let value = json!({
        "order": lm.order(),
        "oov_context": oov,
        "report": result,
    });
    let text = serde_json::to_string_pretty(&value).map_err(|e| fail(st, report, e))?;
    write_file(st, report, &(text + "\n"))?;
    Ok(value)
}
