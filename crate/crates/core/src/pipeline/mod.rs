//! Configuration, manifests, statistics, the synthetic corpus generator and
//! the stage-by-stage pipeline run.

pub mod commands;
pub mod config;
pub mod manifest;
mod run;
pub mod stats;
pub mod steps;
pub mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{derive_seed, ConfigError, PipelineConfig};
pub use manifest::{Manifest, ManifestError, ManifestRow, RowPartition};
pub use run::{load_orthography, run_pipeline, RunOptions, RunReport};
pub use stats::{corpus_stats, CorpusStats};
pub use synth::{synth_corpus, MarkovSource, SynthParams, SyntheticCorpus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Normalize,
    Segment,
    Retrieve,
    Split,
    Limited,
    Decontam,
    LmTrain,
    LmEval,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Normalize,
        Stage::Segment,
        Stage::Retrieve,
        Stage::Split,
        Stage::Limited,
        Stage::Decontam,
        Stage::LmTrain,
        Stage::LmEval,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Normalize => "normalize",
            Stage::Segment => "segment",
            Stage::Retrieve => "retrieve",
            Stage::Split => "split",
            Stage::Limited => "limited",
            Stage::Decontam => "decontam",
            Stage::LmTrain => "lm-train",
            Stage::LmEval => "lm-eval",
        }
    }

    pub fn index(&self) -> usize {
        Stage::ALL.iter().position(|s| s == self).expect("listed")
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s || st.name().replace('-', "_") == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Stage::ALL.iter().map(Stage::name).collect();
                format!("unknown stage {s:?}, expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage} failed on {item}: {message}")]
    Stage { stage: Stage, item: String, message: String },
}

impl PipelineError {
    pub fn stage(stage: Stage, item: impl Into<String>, message: impl fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            item: item.into(),
            message: message.to_string(),
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }
}
