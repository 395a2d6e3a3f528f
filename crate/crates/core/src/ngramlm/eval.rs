use serde::{Deserialize, Serialize};

use super::counts::{BOS, EOS};
use super::model::{NGramModel, TrainConfig};
use super::LmError;

/// What happens to the context window at an out-of-vocabulary token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OovContext {
    /// The window restarts after the OOV token.
    #[default]
    Break,
    /// The OOV token is dropped and the window carries on across it.
    Keep,
}

impl std::str::FromStr for OovContext {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "break" => Ok(OovContext::Break),
            "keep" => Ok(OovContext::Keep),
            _ => Err(format!("expected break or keep, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sentences: usize,
    /// Word tokens, not counting `</s>`.
    pub word_tokens: usize,
    pub oov_tokens: usize,
    /// Tokens that contributed to the perplexity, `</s>` included.
    pub scored_tokens: usize,
    /// Natural-log probability of the scored tokens.
    pub log_prob: f64,
    pub oov_rate: f64,
    pub perplexity: f64,
}

impl NGramModel {
    /// OOV rate and perplexity with OOV tokens excluded.
    pub fn evaluate<S: AsRef<str>>(&self, dev: &[Vec<S>], oov: OovContext) -> Result<EvalReport, LmError> {
        let word_tokens: usize = dev.iter().map(Vec::len).sum();
        if word_tokens == 0 {
            return Err(LmError::EmptyDev);
        }
        let mut oov_tokens = 0;
        let mut scored = 0;
        let mut log_prob = 0.0;
        for sentence in dev {
            let mut context: Vec<u32> = Vec::new();
            if self.add_boundaries {
                context.push(BOS);
            }
            let ids = sentence.iter().map(|w| self.vocab.id(w.as_ref()));
            let tail = self.add_boundaries.then_some(Some(EOS));
            for id in ids.chain(tail) {
                let Some(id) = id else {
                    oov_tokens += 1;
                    if oov == OovContext::Break {
                        context.clear();
                    }
                    continue;
                };
                log_prob += self.prob_ids(&context, id).ln();
                scored += 1;
                context.push(id);
            }
        }
        if scored == 0 {
            return Err(LmError::NothingToScore);
        }
        Ok(EvalReport {
            sentences: dev.len(),
            word_tokens,
            oov_tokens,
            scored_tokens: scored,
            log_prob,
            oov_rate: oov_tokens as f64 / word_tokens as f64,
            perplexity: (-log_prob / scored as f64).exp(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderComparison {
    pub low_order: usize,
    pub high_order: usize,
    pub low: EvalReport,
    pub high: EvalReport,
    /// Whether the higher order scored no worse; reported, not enforced.
    pub high_not_worse: bool,
}

/// Trains two orders on the same corpus and compares dev perplexities.
pub fn compare_orders<S: AsRef<str> + Sync, T: AsRef<str>>(
    corpus: &[Vec<S>],
    dev: &[Vec<T>],
    low: &TrainConfig,
    high: &TrainConfig,
    oov: OovContext,
) -> Result<OrderComparison, LmError> {
    let lo = NGramModel::train(corpus, low)?.evaluate(dev, oov)?;
    let hi = NGramModel::train(corpus, high)?.evaluate(dev, oov)?;
    Ok(OrderComparison {
        low_order: low.order,
        high_order: high.order,
        low: lo,
        high: hi,
        high_not_worse: hi.perplexity <= lo.perplexity,
    })
}
