mod common;

use std::collections::HashMap;
use std::path::Path;

use common::read_tree;
use corpus_forge::pipeline::{
    run_pipeline, synth_corpus, CorpusStats, Manifest, PipelineConfig, PipelineError, RunOptions, Stage, SynthParams, SyntheticCorpus,
};
use corpus_forge::retrieval::wer;

fn small_corpus(noise: f64) -> SyntheticCorpus {
    synth_corpus(&SynthParams {
        seed: 9,
        books: 8,
        words_per_book: 3000,
        male_speakers: 3,
        female_speakers: 3,
        noise,
        lm_books: 3,
        lm_words_per_book: 1500,
        ..Default::default()
    })
}

fn config(input: &Path, output: &Path) -> PipelineConfig {
    PipelineConfig {
        input_dir: input.to_path_buf(),
        output_dir: output.to_path_buf(),
        dev_test_speakers_per_gender: 1,
        limited_pool_speakers: 1,
        limited_set_speakers: 1,
        limited_small_ms: 30_000,
        limited_remainder_ms: 120_000,
        ..Default::default()
    }
}

fn setup(noise: f64) -> (tempfile::TempDir, SyntheticCorpus, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(noise);
    corpus.write_input_dir(&dir.path().join("in")).unwrap();
    let cfg = config(&dir.path().join("in"), &dir.path().join("out"));
    (dir, corpus, cfg)
}

#[test]
fn noiseless_run_recovers_every_segment() {
    let (_dir, corpus, cfg) = setup(0.0);
    let report = run_pipeline(&cfg, &RunOptions::default()).unwrap();
    let out = &cfg.output_dir;
    for stage in ["normalize", "segment", "retrieve", "split", "limited", "decontam", "lm-train", "lm-eval"] {
        assert!(out.join(stage).join("report.json").is_file(), "{stage} report missing");
    }
    assert!(out.join("report.json").is_file() && out.join("stats.json").is_file());

    let segments = Manifest::read(&out.join("segment/segments.tsv"), Some(&report.config_hash)).unwrap();
    let accepted = Manifest::read(&out.join("retrieve/accepted.tsv"), Some(&report.config_hash)).unwrap();
    assert_eq!(segments.rows.len(), accepted.rows.len());
    let books: HashMap<&str, &[String]> = corpus.books.iter().map(|b| (b.record.book_id.as_str(), b.words.as_slice())).collect();
    for row in &accepted.rows {
        let rec = corpus.recording(&row.chapter_id).unwrap();
        let span = rec.truth_span(row.start_ms, row.end_ms).unwrap();
        assert_eq!(wer(&row.transcript, &books[row.book_id.as_str()][span]).unwrap(), 0.0, "{}", row.segment_id);
    }
}

#[test]
fn stats_totals_equal_row_sums() {
    let (_dir, _, cfg) = setup(0.0);
    let report = run_pipeline(&cfg, &RunOptions { until: Some(Stage::Split), ..Default::default() }).unwrap();
    let file: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cfg.output_dir.join("stats.json")).unwrap()).unwrap();
    assert_eq!(file["config_hash"], report.config_hash.as_str());
    let stats: CorpusStats = serde_json::from_value(file["stats"].clone()).unwrap();
    let mut total = 0;
    for part in ["train", "dev", "test"] {
        let rows = Manifest::read(&cfg.output_dir.join(format!("split/{part}.tsv")), Some(&report.config_hash)).unwrap();
        let sum: u64 = rows.rows.iter().map(|r| r.end_ms - r.start_ms).sum();
        let p = &stats.partitions[part];
        assert_eq!(p.duration_ms, sum, "{part}");
        assert_eq!(p.segments, rows.rows.len(), "{part}");
        assert_eq!(p.by_gender.values().map(|g| g.duration_ms).sum::<u64>(), sum, "{part}");
        total += sum;
    }
    assert_eq!(stats.total_duration_ms, total);
}

#[test]
fn restart_reuses_stamped_outputs_and_refuses_foreign_ones() {
    let (_dir, _, cfg) = setup(0.0);
    run_pipeline(&cfg, &RunOptions { until: Some(Stage::Retrieve), ..Default::default() }).unwrap();
    let split = RunOptions { from_stage: Some(Stage::Split), until: Some(Stage::Split) };
    run_pipeline(&cfg, &split).unwrap();

    let changed = PipelineConfig { seed: cfg.seed + 1, ..cfg.clone() };
    let err = run_pipeline(&changed, &split).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { .. }), "{err}");
    assert_eq!(err.exit_code(), 3);

    // worker count and paths are not part of the hash
    let parallel = PipelineConfig { workers: Some(2), ..cfg.clone() };
    run_pipeline(&parallel, &split).unwrap();
}

#[test]
fn missing_input_is_a_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir.path().join("nothing"), &dir.path().join("out"));
    let err = run_pipeline(&cfg, &RunOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn two_runs_are_byte_identical() {
    let (dir, _, cfg) = setup(0.1);
    run_pipeline(&cfg, &RunOptions::default()).unwrap();
    let again = PipelineConfig { output_dir: dir.path().join("again"), ..cfg.clone() };
    run_pipeline(&again, &RunOptions::default()).unwrap();
    let (a, b) = (read_tree(&cfg.output_dir), read_tree(&again.output_dir));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        assert!(bytes == &b[name], "{name} differs");
    }
}

#[test]
fn env_override_changes_the_hash() {
    let base = PipelineConfig::from_toml_with_env("seed = 4", Vec::<(String, String)>::new()).unwrap();
    let env = vec![("CORPUS_FORGE_WER_THRESHOLD".to_string(), "0.3".to_string())];
    let over = PipelineConfig::from_toml_with_env("seed = 4", env).unwrap();
    assert_eq!(over.wer_threshold, 0.3);
    assert_ne!(base.hash(), over.hash());
}
