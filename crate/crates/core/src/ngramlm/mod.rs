//! Back-off n-gram language models with interpolated modified Kneser-Ney
//! smoothing, OOV/perplexity evaluation, a binary model format and ARPA
//! export.

mod counts;
mod eval;
mod io;
mod model;

use thiserror::Error;

pub use counts::{NGramCounts, Vocab, BOS, BOS_WORD, EOS, EOS_WORD, UNK, UNK_WORD};
pub use eval::{compare_orders, EvalReport, OovContext, OrderComparison};
pub use model::{estimate_discounts, Entry, NGramModel, Smoothing, TrainConfig, FALLBACK_DISCOUNT};

#[derive(Debug, Error)]
pub enum LmError {
    #[error("training corpus has no words")]
    EmptyCorpus,
    #[error("unsupported order {0}")]
    BadOrder(usize),
    #[error("bad discounts: {0}")]
    BadDiscounts(String),
    #[error("dev text has no words")]
    EmptyDev,
    #[error("every dev token is out of vocabulary")]
    NothingToScore,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
