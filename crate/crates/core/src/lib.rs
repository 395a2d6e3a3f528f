//! Corpus construction for read-speech datasets.
//!
//! The crate turns noisy machine transcripts of long audiobook recordings and
//! the books they were read from into a filtered, speaker-split corpus
//! release, plus decontaminated n-gram language models:
//!
//! - [`textnorm`]: NFKC normalization, hyphenation joining, orthography filters
//! - [`segmenter`]: silence-based 10-20 s segmentation of timed tokens
//! - [`retrieval`]: TF-IDF shard retrieval, Smith-Waterman alignment, WER filter
//! - [`splitter`]: book validation, train/dev/test speaker split, limited sets
//! - [`decontam`]: title and 5-gram overlap filtering of LM training books
//! - [`ngramlm`]: modified Kneser-Ney n-gram models, perplexity, ARPA export
//! - [`pipeline`]: configuration, manifests, statistics, the end-to-end run,
//!   and a synthetic corpus generator

pub mod decontam;
pub mod ngramlm;
pub mod pipeline;
pub mod retrieval;
pub mod segmenter;
pub mod splitter;
pub mod textnorm;
