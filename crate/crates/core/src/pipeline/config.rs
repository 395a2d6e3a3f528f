//! Flat TOML configuration with `CORPUS_FORGE_*` environment overrides.
//!
//! Every key of [`PipelineConfig`] may appear at the top level of the file.
//! `CORPUS_FORGE_WER_THRESHOLD=0.3` overrides `wer_threshold`; override
//! values are parsed as TOML values and fall back to plain strings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decontam::{DecontamConfig, RateMode};
use crate::ngramlm::OovContext;
use crate::retrieval::{RetrievalParams, WordformRules};
use crate::segmenter::SegmentParams;
use crate::splitter::{LimitedConfig, SplitConfig};

pub const ENV_PREFIX: &str = "CORPUS_FORGE_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(String),
    #[error("invalid {key}: {msg}")]
    Invalid { key: &'static str, msg: String },
}

fn invalid(key: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub language: String,
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Orthography file; the built-in table for `language` when unset.
    pub orthography: Option<PathBuf>,
    /// Stopword file; the built-in list for `language` when unset.
    pub stopwords: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; does not affect outputs.
    pub workers: Option<usize>,

    pub min_segment_ms: u64,
    pub max_segment_ms: u64,
    pub overrun_slack_ms: u64,
    /// Emit a sub-minimum stream tail as a final segment.
    pub keep_residual: bool,

    pub shard_size: usize,
    pub shard_stride: usize,
    pub wer_threshold: f64,
    pub neighbor_shards: usize,
    pub fix_wordforms: bool,
    pub rare_threshold: usize,

    pub dev_test_speakers_per_gender: usize,
    pub train_threshold_ms: u64,
    pub dev_test_cap_ms: u64,
    /// Keep only dev/test candidates harder than this quantile of
    /// `hard_reference_wers`.
    pub hard_speaker_percentile: Option<f64>,
    pub hard_reference_wers: Vec<f64>,

    pub limited_pool_speakers: usize,
    pub limited_set_speakers: usize,
    pub limited_small_sets: usize,
    pub limited_small_ms: u64,
    pub limited_remainder_ms: u64,

    pub decontam_threshold: f64,
    pub decontam_mode: RateMode,

    pub lm_orders: Vec<usize>,
    pub oov_context: OovContext,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let seg = SegmentParams::default();
        let ret = RetrievalParams::default();
        let split = SplitConfig::default();
        let lim = LimitedConfig::default();
        let dec = DecontamConfig::default();
        Self {
            language: "en".into(),
            input_dir: PathBuf::from("input"),
            output_dir: PathBuf::from("release"),
            orthography: None,
            stopwords: None,
            seed: 17,
            workers: None,
            min_segment_ms: seg.min_len,
            max_segment_ms: seg.max_len,
            overrun_slack_ms: seg.overrun_slack,
            keep_residual: seg.keep_residual,
            shard_size: ret.shard_size,
            shard_stride: ret.shard_stride,
            wer_threshold: ret.wer_threshold,
            neighbor_shards: ret.neighbor_shards,
            fix_wordforms: true,
            rare_threshold: WordformRules::default().rare_threshold,
            dev_test_speakers_per_gender: split.dev_test_speakers_per_gender,
            train_threshold_ms: split.train_threshold_ms,
            dev_test_cap_ms: split.dev_test_cap_ms,
            hard_speaker_percentile: None,
            hard_reference_wers: Vec::new(),
            limited_pool_speakers: lim.pool_speakers_per_gender,
            limited_set_speakers: lim.set_speakers_per_gender,
            limited_small_sets: lim.small_sets,
            limited_small_ms: lim.small_set_ms_per_gender,
            limited_remainder_ms: lim.remainder_ms_per_gender,
            decontam_threshold: dec.threshold,
            decontam_mode: dec.mode,
            lm_orders: vec![3, 5],
            oov_context: OovContext::Break,
        }
    }
}

fn parse_override(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl PipelineConfig {
    /// Parses `text`, applies overrides from `env` and validates.
    pub fn from_toml_with_env<I>(text: &str, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (key, value) in env {
            if let Some(name) = key.strip_prefix(ENV_PREFIX) {
                table.insert(name.to_ascii_lowercase(), parse_override(&value));
            }
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file with overrides from the process environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.language.trim().is_empty() {
            return Err(invalid("language", "empty"));
        }
        if self.min_segment_ms == 0 || self.min_segment_ms > self.max_segment_ms {
            return Err(invalid(
                "min_segment_ms",
                format!("need 0 < min ({}) <= max ({})", self.min_segment_ms, self.max_segment_ms),
            ));
        }
        if self.shard_size == 0 {
            return Err(invalid("shard_size", "must be positive"));
        }
        if self.shard_stride == 0 || self.shard_stride > self.shard_size {
            return Err(invalid(
                "shard_stride",
                format!("need 0 < stride ({}) <= shard_size ({})", self.shard_stride, self.shard_size),
            ));
        }
        if !(0.0..=1.0).contains(&self.wer_threshold) {
            return Err(invalid("wer_threshold", format!("{} outside [0, 1]", self.wer_threshold)));
        }
        if self.rare_threshold == 0 {
            return Err(invalid("rare_threshold", "must be positive"));
        }
        if self.dev_test_speakers_per_gender == 0 {
            return Err(invalid("dev_test_speakers_per_gender", "must be positive"));
        }
        if let Some(p) = self.hard_speaker_percentile {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid("hard_speaker_percentile", format!("{p} outside [0, 1]")));
            }
            if self.hard_reference_wers.is_empty() {
                return Err(invalid("hard_reference_wers", "required with hard_speaker_percentile"));
            }
        }
        if self.limited_set_speakers == 0 || self.limited_small_sets == 0 {
            return Err(invalid("limited_set_speakers", "limited sets need speakers and at least one small set"));
        }
        if !(0.0..=1.0).contains(&self.decontam_threshold) {
            return Err(invalid("decontam_threshold", format!("{} outside [0, 1]", self.decontam_threshold)));
        }
        if self.lm_orders.is_empty() || self.lm_orders.contains(&0) {
            return Err(invalid("lm_orders", "need at least one positive order"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be positive"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical TOML of every setting that can change an
    /// output. Paths and the worker count are left out, so moving a run or
    /// changing its parallelism keeps the hash.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.input_dir = PathBuf::new();
        canon.output_dir = PathBuf::new();
        canon.workers = None;
        let mut h = Sha256::new();
        h.update(canon.to_toml().as_bytes());
        if let Some(p) = &self.orthography {
            h.update(fs::read(p).unwrap_or_default());
        }
        if let Some(p) = &self.stopwords {
            h.update(fs::read(p).unwrap_or_default());
        }
        hex::encode(h.finalize())
    }

    /// Seed for one stage: the first eight bytes (little-endian) of
    /// `SHA-256("<seed>:<stage>")`.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_seed(self.seed, stage)
    }

    pub fn segment_params(&self) -> SegmentParams {
        SegmentParams {
            min_len: self.min_segment_ms,
            max_len: self.max_segment_ms,
            overrun_slack: self.overrun_slack_ms,
            keep_residual: self.keep_residual,
        }
    }

    pub fn retrieval_params(&self) -> RetrievalParams {
        RetrievalParams {
            shard_size: self.shard_size,
            shard_stride: self.shard_stride,
            wer_threshold: self.wer_threshold,
            neighbor_shards: self.neighbor_shards,
        }
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            dev_test_speakers_per_gender: self.dev_test_speakers_per_gender,
            train_threshold_ms: self.train_threshold_ms,
            dev_test_cap_ms: self.dev_test_cap_ms,
        }
    }

    pub fn limited_config(&self) -> LimitedConfig {
        LimitedConfig {
            pool_speakers_per_gender: self.limited_pool_speakers,
            set_speakers_per_gender: self.limited_set_speakers,
            small_sets: self.limited_small_sets,
            small_set_ms_per_gender: self.limited_small_ms,
            remainder_ms_per_gender: self.limited_remainder_ms,
        }
    }

    pub fn decontam_config(&self) -> DecontamConfig {
        DecontamConfig {
            threshold: self.decontam_threshold,
            mode: self.decontam_mode,
        }
    }
}

pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}:{stage}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}
