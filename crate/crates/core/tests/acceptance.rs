//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.
//!
//! cargo test --release --test acceptance

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use corpus_forge::decontam::{build_heldout_index, filter_corpus, DecontamConfig, LmBook, Stopwords};
use corpus_forge::ngramlm::{compare_orders, NGramModel, OovContext, TrainConfig, BOS};
use corpus_forge::pipeline::{run_pipeline, synth_corpus, Manifest, PipelineConfig, RunOptions, Stage, SynthParams};
use corpus_forge::retrieval::{accept_candidate, smith_waterman, wer, word_edit_distance, IndexBuilder, Scoring, ShardInfo};
use corpus_forge::segmenter::{segment_stream, SegmentParams, TokenStream};
use corpus_forge::splitter::{make_limited_supervision, plan_partitions, LimitedConfig, Partition, SplitConfig};
use rand::seq::SliceRandom;
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn release_config(input: &Path, output: &Path) -> PipelineConfig {
    PipelineConfig {
        input_dir: input.to_path_buf(),
        output_dir: output.to_path_buf(),
        dev_test_speakers_per_gender: 1,
        limited_small_ms: 60_000,
        limited_remainder_ms: 600_000,
        ..Default::default()
    }
}

struct Recovery {
    segments: usize,
    accepted: usize,
    truth_wers: Vec<f64>,
}

/// Synthesizes the default corpus at `noise`, runs the pipeline up to
/// `until` and scores every accepted transcript against the ground truth.
fn recovery(noise: f64, until: Stage) -> Result<Recovery, String> {
    let corpus = synth_corpus(&SynthParams { noise, ..Default::default() });
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("in");
    corpus.write_input_dir(&input).map_err(|e| e.to_string())?;
    let cfg = release_config(&input, &dir.path().join("out"));
    let report = run_pipeline(&cfg, &RunOptions { until: Some(until), ..Default::default() }).map_err(|e| e.to_string())?;
    let read = |rel: &str| Manifest::read(&cfg.output_dir.join(rel), Some(&report.config_hash)).map_err(|e| e.to_string());
    let segments = read("segment/segments.tsv")?.rows.len();
    let accepted = read("retrieve/accepted.tsv")?;
    let books: HashMap<&str, &[String]> = corpus.books.iter().map(|b| (b.record.book_id.as_str(), b.words.as_slice())).collect();
    let mut truth_wers = Vec::with_capacity(accepted.rows.len());
    for row in &accepted.rows {
        let rec = corpus.recording(&row.chapter_id).ok_or("unknown chapter")?;
        let span = rec.truth_span(row.start_ms, row.end_ms).ok_or("segment without words")?;
        truth_wers.push(wer(&row.transcript, &books[row.book_id.as_str()][span]).map_err(|e| e.to_string())?);
    }
    Ok(Recovery {
        segments,
        accepted: accepted.rows.len(),
        truth_wers,
    })
}

fn c1_end_to_end() -> Check {
    let started = Instant::now();
    let r = recovery(0.0, Stage::LmEval)?;
    let elapsed = started.elapsed();
    let exact = r.truth_wers.iter().filter(|w| **w == 0.0).count();
    let detail = format!("{exact}/{} segments exact, {} accepted, {elapsed:.1?}", r.segments, r.accepted);
    ensure(r.segments > 0 && exact == r.segments && r.accepted == r.segments, || detail.clone())?;
    ensure(elapsed < Duration::from_secs(60), || detail.clone())?;
    Ok(detail)
}

fn c2_noise() -> Check {
    let low = recovery(0.15, Stage::Retrieve)?;
    let above: Vec<f64> = low.truth_wers.iter().copied().filter(|w| *w > 0.15).collect();
    let worst = low.truth_wers.iter().copied().fold(0.0, f64::max);
    let rate = low.accepted as f64 / low.segments as f64;
    let high = recovery(0.6, Stage::Retrieve)?;
    let rejected = 1.0 - high.accepted as f64 / high.segments as f64;

    let pseudo = words("a b c d e f g h i j");
    let at = accept_candidate(&words("a b c d e f w x y z"), &pseudo, 0.40).map_err(|e| e.to_string())?;
    let over = accept_candidate(&words("a b c d e v w x y z"), &pseudo, 0.40).map_err(|e| e.to_string())?;

    let detail = format!(
        "noise 0.15: {}/{} accepted ({:.1}%), {} accepted above 0.15 (worst {worst:.3}); noise 0.6: {:.1}% rejected; \
         wer 0.40 accepted={}, 0.50 accepted={}",
        low.accepted,
        low.segments,
        100.0 * rate,
        above.len(),
        100.0 * rejected,
        at.accepted,
        over.accepted
    );
    ensure(rate >= 0.95 && above.is_empty() && rejected >= 0.95 && at.wer == 0.4 && at.accepted && !over.accepted, || {
        detail.clone()
    })?;
    Ok(detail)
}

fn c3_smith_waterman() -> Check {
    let s = Scoring::default();
    let mut rng = rng(3);
    for i in 0..500 {
        let q = random_seq(&mut rng, 12, 4);
        let r = random_seq(&mut rng, 40, 4);
        let got = smith_waterman(&q, &r, &s).score;
        let want = local_score_by_substrings(&q, &r, 2, -1, -1);
        ensure(got == want, || format!("instance {i}: dp {got}, enumeration {want}"))?;
    }
    Ok("500/500 instances equal".into())
}

fn c4_wer() -> Check {
    let mut rng = rng(4);
    for i in 0..500 {
        let a = random_seq(&mut rng, 12, 3);
        let b = random_seq(&mut rng, 12, 3);
        let (got, want) = (word_edit_distance(&a, &b), edit_distance_by_search(&a, &b));
        ensure(got == want, || format!("pair {i}: dp {got}, search {want}"))?;
        if !b.is_empty() {
            let w = wer(&a, &b).map_err(|e| e.to_string())?;
            ensure(w == want as f64 / b.len() as f64, || format!("pair {i}: wer {w}"))?;
        }
    }
    Ok("500/500 pairs equal".into())
}

fn c5_segmentation() -> Check {
    let params = SegmentParams::default();
    let mut rng = rng(5);
    let mut segments = 0;
    for i in 0..100 {
        let n = rng.gen_range(1..400);
        let tokens = random_stream(&mut rng, n);
        let seg = segment_stream(&TokenStream::new("r", tokens.clone()), &params).map_err(|e| e.to_string())?;
        let (bounds, residual) = scan_boundaries(&tokens, params.min_len, params.max_len);
        let got: Vec<(u64, u64)> = seg.segments.iter().map(|s| (s.start, s.end)).collect();
        ensure(got == bounds && seg.residual == residual, || format!("stream {i}: boundaries differ from scanner"))?;
        let mut pos = 0;
        for (j, &(s, e)) in bounds.iter().chain(residual.iter()).enumerate() {
            ensure(s == pos && e > s, || format!("stream {i}: gap or overlap at piece {j}"))?;
            let non_final_segment = j < bounds.len() && (j + 1 < bounds.len() || residual.is_some());
            let d = e - s;
            ensure(!non_final_segment || (10_000..=20_000).contains(&d), || {
                format!("stream {i}: segment {j} lasts {d} ms")
            })?;
            pos = e;
        }
        ensure(pos == tokens.last().map_or(0, |t| t.end), || format!("stream {i}: tiling stops at {pos}"))?;
        segments += bounds.len();
    }
    Ok(format!("100 streams, {segments} segments, boundaries equal and tiled"))
}

fn c6_split() -> Check {
    let mut conflicts = 0;
    for seed in 0..50 {
        let k = 1 + seed as usize % 3;
        let pop = random_population(seed, k, 300_000);
        let cfg = SplitConfig {
            dev_test_speakers_per_gender: k,
            train_threshold_ms: 300_000,
            dev_test_cap_ms: 400_000,
        };
        let a = plan_partitions(&pop.speakers, &pop.segments, &cfg, seed).map_err(|e| e.to_string())?;
        check_split_invariants(&a, &pop, k).map_err(|e| format!("population {seed}: {e}"))?;
        conflicts += a.dropped_chapters.len();
        let train: Vec<_> = pop
            .segments
            .iter()
            .filter(|s| a.segment_partition(&s.segment_id) == Some(Partition::Train))
            .cloned()
            .collect();
        let lcfg = LimitedConfig {
            pool_speakers_per_gender: 4,
            set_speakers_per_gender: 2,
            small_sets: 6,
            small_set_ms_per_gender: 60_000,
            remainder_ms_per_gender: 400_000,
        };
        let l = make_limited_supervision(&train, &pop.genders, &lcfg, seed);
        ensure(l.small_sets.len() == 6 && l.small_sets.iter().all(|s| !s.is_empty()), || {
            format!("population {seed}: small sets missing")
        })?;
        check_nesting(&l.small_sets, &l.one_hour, &l.ten_hour, &train).map_err(|e| format!("population {seed}: {e}"))?;
    }
    Ok(format!("50 populations hold, {conflicts} shared chapters dropped"))
}

fn c7_decontam() -> Check {
    let idx = build_heldout_index(&[words(PLANTED)], Stopwords::builtin("en").map_err(|e| e.to_string())?);
    let book = |id: &str, title: &str| LmBook {
        book_id: id.into(),
        title: words(title),
        words: (0..50).map(|i| format!("w{i}")).collect(),
    };
    let books = vec![
        planted_book("above", 400),
        planted_book("below", 700),
        book("title1", "the lighthouse keepers"),
        book("title2", "a lighthouse keepers"),
    ];
    let out = filter_corpus(&books, &idx, &[words("the lighthouse keeper")], &DecontamConfig::default()).map_err(|e| e.to_string())?;
    let detail = format!("removed {:?}, kept {:?}", out.removed, out.kept);
    ensure(out.removed == ["above", "title1"] && out.kept == ["below", "title2"], || detail.clone())?;
    Ok(detail)
}

fn c8_lm() -> Check {
    let (train, dev) = markov3_corpus(11);
    let model = NGramModel::train(&train, &TrainConfig::new(5)).map_err(|e| e.to_string())?;
    let mut rng = rng(8);
    let mut checked = 0;
    for k in 2..=5 {
        let mut contexts = model.contexts(k);
        contexts.shuffle(&mut rng);
        for h in contexts.iter().take(50) {
            let m: f64 = (0..model.vocab().len() as u32).filter(|&w| w != BOS).map(|w| model.prob_ids(h, w)).sum();
            ensure((m - 1.0).abs() < 1e-6, || format!("context {h:?} sums to {m}"))?;
            checked += 1;
        }
    }

    let (corpus, expected) = kn_fixture();
    let kn = NGramModel::train(&corpus, &TrainConfig::new(2)).map_err(|e| e.to_string())?;
    for (h, w, p) in &expected {
        let ctx: Vec<&str> = h.split_whitespace().collect();
        let got = kn.prob(&ctx, w);
        ensure((got - p).abs() < 1e-9, || format!("p({w} | {h}) = {got}, hand value {p}"))?;
    }

    let cmp = compare_orders(&train, &dev, &TrainConfig::new(3), &TrainConfig::new(5), OovContext::Break).map_err(|e| e.to_string())?;
    let detail = format!(
        "{checked} contexts sum to 1, {} hand values match, dev ppl 3-gram {:.2} / 5-gram {:.2}",
        expected.len(),
        cmp.low.perplexity,
        cmp.high.perplexity
    );
    ensure(cmp.high.perplexity < cmp.low.perplexity, || detail.clone())?;
    Ok(detail)
}

fn c9_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let bin = env!("CARGO_BIN_EXE_corpus-forge");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).env("RUST_LOG", "warn").output().map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    };
    let path = |p: &Path| p.to_string_lossy().into_owned();
    run(&["synth", "--out", &path(&d.join("in")), "--noise", "0.1"])?;
    let cfg = d.join("forge.toml");
    let text = format!(
        "input_dir = \"{}\"\ndev_test_speakers_per_gender = 1\nlimited_small_ms = 60000\nlimited_remainder_ms = 600000\n",
        path(&d.join("in"))
    );
    std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
    for out in ["a", "b"] {
        run(&["run", "--config", &path(&cfg), "--out", &path(&d.join(out))])?;
    }
    let (a, b) = (read_tree(&d.join("a")), read_tree(&d.join("b")));
    ensure(a.keys().eq(b.keys()), || "file lists differ".into())?;
    let differing: Vec<&String> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k).collect();
    ensure(differing.is_empty(), || format!("differing files: {differing:?}"))?;
    let models = a.keys().filter(|k| k.ends_with(".bin") || k.ends_with(".arpa")).count();
    Ok(format!("{} files identical, {models} of them model files", a.len()))
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn c10_performance() -> Check {
    let mut rng = rng(10);
    let vocab: Vec<String> = (0..20_000).map(|i| format!("w{i}")).collect();
    let mut builder = IndexBuilder::new();
    let mut shards = Vec::with_capacity(10_000);
    for i in 0..10_000u32 {
        let words: Vec<&str> = (0..1250).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect();
        let info = ShardInfo {
            shard_id: i,
            book_id: format!("b{}", i / 100),
            word_offset: (i as usize % 100) * 1000,
            len: words.len(),
        };
        builder.add_words(info, &words);
        if i % 500 == 0 {
            shards.push(words.iter().map(|w| w.to_string()).collect::<Vec<String>>());
        }
    }
    let index = builder.seal();
    let mut query_times = Vec::new();
    for shard in &shards {
        let start = rng.gen_range(0..1200);
        let query = &shard[start..start + 50];
        let t = Instant::now();
        let hit = index.retrieve(query, 1);
        query_times.push(t.elapsed());
        ensure(hit.best().is_some(), || "query found nothing".into())?;
    }

    let s = Scoring::default();
    let mut sw_times = Vec::new();
    for shard in shards.iter().take(20) {
        let start = rng.gen_range(0..1200);
        let query: Vec<&str> = shard[start..start + 50].iter().map(String::as_str).collect();
        let reference: Vec<&str> = shard.iter().map(String::as_str).collect();
        let t = Instant::now();
        let a = smith_waterman(&query, &reference, &s);
        sw_times.push(t.elapsed());
        ensure(a.score == 100, || format!("verbatim query scored {}", a.score))?;
    }
    let (q_max, sw_max) = (*query_times.iter().max().unwrap(), *sw_times.iter().max().unwrap());
    let detail = format!(
        "tf-idf query over 10000 shards median {:.2?} max {q_max:.2?}; smith-waterman 50x1250 median {:.2?} max {sw_max:.2?}",
        median(query_times),
        median(sw_times)
    );
    ensure(q_max < Duration::from_millis(50) && sw_max < Duration::from_millis(5), || detail.clone())?;
    Ok(detail)
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("1 synthetic end-to-end recovery", c1_end_to_end),
        ("2 noise robustness", c2_noise),
        ("3 smith-waterman oracle", c3_smith_waterman),
        ("4 wer oracle", c4_wer),
        ("5 segmentation bounds", c5_segmentation),
        ("6 split invariants", c6_split),
        ("7 decontamination soundness", c7_decontam),
        ("8 language model correctness", c8_lm),
        ("9 determinism", c9_determinism),
        ("10 performance floor", c10_performance),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(&format!("{o} "))) {
            continue;
        }
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
