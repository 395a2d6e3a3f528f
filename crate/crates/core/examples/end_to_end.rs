//! Generates a small synthetic corpus, runs every stage on it and checks the
//! retrieved transcripts against the recorded ground truth.
//!
//! cargo run --release --example end_to_end -- [noise] [seed]

use std::collections::HashMap;

use corpus_forge::pipeline::{run_pipeline, synth_corpus, Manifest, PipelineConfig, RunOptions, SynthParams};
use corpus_forge::retrieval::wer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let noise: f64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(0.0);
    let seed: u64 = std::env::args().nth(2).map(|a| a.parse()).transpose()?.unwrap_or(3);
    let corpus = synth_corpus(&SynthParams {
        noise,
        seed,
        ..Default::default()
    });
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("input");
    corpus.write_input_dir(&input)?;

    let cfg = PipelineConfig {
        input_dir: input,
        output_dir: dir.path().join("release"),
        dev_test_speakers_per_gender: 1,
        limited_small_ms: 60_000,
        limited_remainder_ms: 600_000,
        ..Default::default()
    };
    let report = run_pipeline(&cfg, &RunOptions::default())?;
    println!("config hash {}", report.config_hash);
    for (stage, value) in &report.stages {
        println!("{stage}: {value}");
    }

    let accepted = Manifest::read(&cfg.output_dir.join("retrieve/accepted.tsv"), Some(&report.config_hash))?;
    let books: HashMap<&str, &[String]> = corpus
        .books
        .iter()
        .map(|b| (b.record.book_id.as_str(), b.words.as_slice()))
        .collect();
    let segs = Manifest::read(&cfg.output_dir.join("segment/segments.tsv"), Some(&report.config_hash))?;
    let pseudo: HashMap<&str, &Vec<String>> = segs.rows.iter().map(|r| (r.segment_id.as_str(), &r.transcript)).collect();
    let mut exact = 0;
    let mut worst: f64 = 0.0;
    for row in &accepted.rows {
        let rec = corpus.recording(&row.chapter_id).expect("recording exists");
        let span = rec.truth_span(row.start_ms, row.end_ms).expect("segment has words");
        let truth = &books[row.book_id.as_str()][span];
        let e = wer(&row.transcript, truth)?;
        worst = worst.max(e);
        if e > 0.15 {
            println!("{} {e:.3}\n  got   {}\n  truth {}", row.segment_id, row.transcript.join(" "), truth.join(" "));
            println!("  pseudo {}", pseudo[row.segment_id.as_str()].join(" "));
        }
        if e == 0.0 {
            exact += 1;
        }
    }
    println!(
        "{} accepted segments, {exact} exact, worst WER against ground truth {worst:.3}",
        accepted.rows.len()
    );
    Ok(())
}
