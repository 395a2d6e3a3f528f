use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use corpus_forge::decontam::RateMode;
use corpus_forge::ngramlm::{OovContext, Smoothing, TrainConfig};
use corpus_forge::pipeline::commands::{self, DecontamInputs};
use corpus_forge::pipeline::{run_pipeline, synth_corpus, ConfigError, PipelineConfig, PipelineError, RunOptions, Stage, SynthParams};

#[derive(Parser)]
#[command(name = "corpus-forge", version, about = "Build speech-corpus releases from pseudo-labelled audiobook readings")]
struct Cli {
    /// TOML config; CORPUS_FORGE_* variables and flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Language id for the built-in orthography and stopwords.
    #[arg(long, global = true)]
    lang: Option<String>,
    #[arg(long, global = true)]
    orthography: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Normalize a text file or a directory of .txt files.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut recordings into segments at silence gaps.
    Segment {
        #[arg(long)]
        min_sec: Option<f64>,
        #[arg(long)]
        max_sec: Option<f64>,
        #[arg(long)]
        slack_ms: Option<u64>,
        #[arg(long)]
        keep_residual: bool,
        /// Input directory with books.jsonl, speakers.tsv and recordings/.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve and align book text for pseudo-labelled segments.
    Retrieve {
        #[arg(long)]
        books: PathBuf,
        #[arg(long)]
        pseudo: PathBuf,
        #[arg(long)]
        shard_size: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        wer_threshold: Option<f64>,
        #[arg(long)]
        no_wordform_fix: bool,
        /// Also write the accepted segments as a manifest.
        #[arg(long)]
        accepted: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Partition accepted segments into train, dev and test.
    Split {
        #[arg(long)]
        segments: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        dev_test_speakers: Option<usize>,
        #[arg(long)]
        train_threshold_sec: Option<u64>,
        #[arg(long)]
        cap_sec: Option<u64>,
        #[arg(long)]
        hard_percentile: Option<f64>,
        /// Reference speaker WERs, one per line.
        #[arg(long)]
        hard_reference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the nested limited-supervision sets from a train manifest.
    Limited {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop LM books that overlap the held-out transcripts.
    Decontam {
        #[arg(long, num_args = 1.., required = true)]
        heldout: Vec<PathBuf>,
        #[arg(long)]
        books: PathBuf,
        #[arg(long)]
        titles: Option<PathBuf>,
        #[arg(long)]
        heldout_titles: Option<PathBuf>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Count 5-gram tokens instead of distinct 5-grams.
        #[arg(long)]
        count_tokens: bool,
        #[arg(long)]
        report: PathBuf,
    },
    /// Train an n-gram model.
    LmTrain {
        #[arg(long, default_value_t = 5)]
        order: usize,
        /// Unsmoothed maximum likelihood instead of Kneser-Ney.
        #[arg(long)]
        mle: bool,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        arpa: Option<PathBuf>,
    },
    /// Perplexity and OOV rate of a model on a manifest's transcripts.
    LmEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long, default_value = "break")]
        oov_context: String,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run the whole pipeline from a config file.
    Run {
        #[arg(long)]
        from_stage: Option<String>,
        #[arg(long)]
        until: Option<String>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic input directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        books: Option<usize>,
        #[arg(long)]
        words_per_book: Option<usize>,
        #[arg(long)]
        speakers_per_gender: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        invalid_books: bool,
    },
}

fn invalid(key: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, msg: msg.into() }
}

fn secs_to_ms(key: &'static str, s: f64) -> Result<u64, ConfigError> {
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid(key, format!("{s} is not a positive number of seconds")));
    }
    Ok((s * 1000.0).round() as u64)
}

fn base_config(cli: &Cli) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::from_toml_with_env("", std::env::vars())?,
    };
    if let Some(l) = &cli.lang {
        cfg.language = l.clone();
    }
    if let Some(o) = &cli.orthography {
        cfg.orthography = Some(o.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    Ok(cfg)
}

fn parse_stage(s: &Option<String>) -> Result<Option<Stage>, ConfigError> {
    s.as_deref()
        .map(|s| s.parse().map_err(|e: String| invalid("stage", e)))
        .transpose()
}

fn execute(cli: Cli) -> Result<Value> {
    let mut cfg = base_config(&cli)?;
    let summary = match cli.cmd {
        Cmd::Normalize { input, out } => commands::normalize_path(&cfg, &input, &out)?,
        Cmd::Segment {
            min_sec,
            max_sec,
            slack_ms,
            keep_residual,
            input,
            out,
        } => {
            if let Some(s) = min_sec {
                cfg.min_segment_ms = secs_to_ms("min_sec", s)?;
            }
            if let Some(s) = max_sec {
                cfg.max_segment_ms = secs_to_ms("max_sec", s)?;
            }
            if let Some(s) = slack_ms {
                cfg.overrun_slack_ms = s;
            }
            cfg.keep_residual |= keep_residual;
            cfg.validate()?;
            commands::segment_dir(&cfg, &input, &out)?
        }
        Cmd::Retrieve {
            books,
            pseudo,
            shard_size,
            stride,
            wer_threshold,
            no_wordform_fix,
            accepted,
            out,
        } => {
            cfg.shard_size = shard_size.unwrap_or(cfg.shard_size);
            cfg.shard_stride = stride.unwrap_or(cfg.shard_stride);
            cfg.wer_threshold = wer_threshold.unwrap_or(cfg.wer_threshold);
            cfg.fix_wordforms &= !no_wordform_fix;
            cfg.validate()?;
            commands::retrieve_files(&cfg, &books, &pseudo, &out, accepted.as_deref())?
        }
        Cmd::Split {
            segments,
            candidates,
            dev_test_speakers,
            train_threshold_sec,
            cap_sec,
            hard_percentile,
            hard_reference,
            out,
        } => {
            cfg.dev_test_speakers_per_gender = dev_test_speakers.unwrap_or(cfg.dev_test_speakers_per_gender);
            cfg.train_threshold_ms = train_threshold_sec.map_or(cfg.train_threshold_ms, |s| s * 1000);
            cfg.dev_test_cap_ms = cap_sec.map_or(cfg.dev_test_cap_ms, |s| s * 1000);
            if hard_percentile.is_some() {
                cfg.hard_speaker_percentile = hard_percentile;
            }
            if let Some(path) = hard_reference {
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                cfg.hard_reference_wers = text
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| invalid("hard_reference", format!("bad WER {t:?}"))))
                    .collect::<Result<_, _>>()?;
            }
            cfg.validate()?;
            commands::split_files(&cfg, &segments, &candidates, &out)?
        }
        Cmd::Limited { train, out } => commands::limited_files(&cfg, &train, &out)?,
        Cmd::Decontam {
            heldout,
            books,
            titles,
            heldout_titles,
            stopwords,
            threshold,
            count_tokens,
            report,
        } => {
            if stopwords.is_some() {
                cfg.stopwords = stopwords;
            }
            cfg.decontam_threshold = threshold.unwrap_or(cfg.decontam_threshold);
            if count_tokens {
                cfg.decontam_mode = RateMode::Tokens;
            }
            cfg.validate()?;
            let inputs = DecontamInputs {
                heldout,
                books,
                titles,
                heldout_titles,
                report,
            };
            commands::decontam_files(&cfg, &inputs)?
        }
        Cmd::LmTrain {
            order,
            mle,
            input,
            out,
            arpa,
        } => {
            let mut train = TrainConfig::new(order);
            if mle {
                train.smoothing = Smoothing::Mle;
            }
            commands::lm_train_files(&cfg, &train, &input, &out, arpa.as_deref())?
        }
        Cmd::LmEval {
            model,
            dev,
            oov_context,
            report,
        } => {
            let oov: OovContext = oov_context.parse().map_err(|e: String| invalid("oov_context", e))?;
            commands::lm_eval_files(&model, &dev, oov, &report)?
        }
        Cmd::Run {
            from_stage,
            until,
            input,
            out,
        } => {
            if cli.config.is_none() {
                return Err(invalid("config", "run needs --config").into());
            }
            if let Some(p) = input {
                cfg.input_dir = p;
            }
            if let Some(p) = out {
                cfg.output_dir = p;
            }
            let opts = RunOptions {
                from_stage: parse_stage(&from_stage)?,
                until: parse_stage(&until)?,
            };
            let report = run_pipeline(&cfg, &opts)?;
            json!({"config_hash": report.config_hash, "output_dir": cfg.output_dir, "stages": report.stages.keys().collect::<Vec<_>>()})
        }
        Cmd::Synth {
            out,
            books,
            words_per_book,
            speakers_per_gender,
            noise,
            invalid_books,
        } => {
            let d = SynthParams::default();
            let params = SynthParams {
                seed: cli.seed.unwrap_or(d.seed),
                books: books.unwrap_or(d.books),
                words_per_book: words_per_book.unwrap_or(d.words_per_book),
                male_speakers: speakers_per_gender.unwrap_or(d.male_speakers),
                female_speakers: speakers_per_gender.unwrap_or(d.female_speakers),
                noise: noise.unwrap_or(d.noise),
                invalid_books,
                ..d
            };
            if !(0.0..=1.0).contains(&params.noise) {
                bail!(invalid("noise", format!("{} outside [0, 1]", params.noise)));
            }
            let corpus = synth_corpus(&params);
            corpus
                .write_input_dir(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            json!({"books": corpus.books.len(), "recordings": corpus.recordings.len(), "out": out})
        }
    };
    Ok(summary)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<PipelineError>() {
        e.exit_code() as u8
    } else if err.downcast_ref::<ConfigError>().is_some() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
