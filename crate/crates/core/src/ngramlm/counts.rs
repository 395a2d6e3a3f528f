use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::LmError;

pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const UNK: u32 = 2;

pub const BOS_WORD: &str = "<s>";
pub const EOS_WORD: &str = "</s>";
pub const UNK_WORD: &str = "<unk>";

/// Word ids: the three markers first, then training words in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let sorted: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().to_string())
            .filter(|w| w != BOS_WORD && w != EOS_WORD && w != UNK_WORD)
            .collect();
        let words: Vec<String> = [BOS_WORD, EOS_WORD, UNK_WORD]
            .into_iter()
            .map(str::to_string)
            .chain(sorted)
            .collect();
        Self::from_ordered(words)
    }

    /// Takes `words` as-is; the first three must be the markers.
    pub(crate) fn from_ordered(words: Vec<String>) -> Self {
        let ids = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Self { words, ids }
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn id_or_unk(&self, word: &str) -> u32 {
        self.id(word).unwrap_or(UNK)
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Includes the three markers.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Size of the predicted vocabulary: everything except `<s>`.
    pub fn predicted_len(&self) -> usize {
        self.words.len() - 1
    }
}

const SHARDS: usize = 16;

fn shard_of(first: u32) -> usize {
    ((first as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 60) as usize % SHARDS
}

/// Raw n-gram counts of every order up to `order`.
#[derive(Debug, Clone)]
pub struct NGramCounts {
    pub(crate) order: usize,
    pub(crate) add_boundaries: bool,
    pub(crate) vocab: Vocab,
    /// `tables[k - 1]` holds the k-grams.
    pub(crate) tables: Vec<HashMap<Vec<u32>, u64>>,
}

impl NGramCounts {
    /// Counts all n-grams of `sentences`. Work is split by a hash of each
    /// n-gram's first word, so shards own disjoint keys and merging is a
    /// plain union.
    pub fn count<S: AsRef<str> + Sync>(sentences: &[Vec<S>], order: usize, add_boundaries: bool) -> Result<Self, LmError> {
        if order == 0 {
            return Err(LmError::BadOrder(order));
        }
        if sentences.iter().all(|s| s.is_empty()) {
            return Err(LmError::EmptyCorpus);
        }
        let vocab = Vocab::from_words(sentences.iter().flatten());
        let padded: Vec<Vec<u32>> = sentences
            .iter()
            .map(|s| {
                let mut ids = Vec::with_capacity(s.len() + 2);
                if add_boundaries {
                    ids.push(BOS);
                }
                ids.extend(s.iter().map(|w| vocab.id_or_unk(w.as_ref())));
                if add_boundaries {
                    ids.push(EOS);
                }
                ids
            })
            .collect();
        let shards: Vec<Vec<HashMap<Vec<u32>, u64>>> = (0..SHARDS)
            .into_par_iter()
            .map(|shard| {
                let mut tables = vec![HashMap::new(); order];
                for ids in &padded {
                    for i in 0..ids.len() {
                        if shard_of(ids[i]) != shard {
                            continue;
                        }
                        for k in 1..=order.min(ids.len() - i) {
                            *tables[k - 1].entry(ids[i..i + k].to_vec()).or_insert(0) += 1;
                        }
                    }
                }
                tables
            })
            .collect();
        let mut tables: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
        for shard in shards {
            for (k, t) in shard.into_iter().enumerate() {
                tables[k].extend(t);
            }
        }
        Ok(Self {
            order,
            add_boundaries,
            vocab,
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn get(&self, gram: &[u32]) -> u64 {
        if gram.is_empty() || gram.len() > self.order {
            return 0;
        }
        self.tables[gram.len() - 1].get(gram).copied().unwrap_or(0)
    }

    pub fn distinct(&self, k: usize) -> usize {
        self.tables[k - 1].len()
    }

    /// The same counts without the orders above `order`.
    pub fn truncate(&self, order: usize) -> Result<Self, LmError> {
        if order == 0 || order > self.order {
            return Err(LmError::BadOrder(order));
        }
        Ok(Self {
            order,
            add_boundaries: self.add_boundaries,
            vocab: self.vocab.clone(),
            tables: self.tables[..order].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_every_order() {
        let c = NGramCounts::count(&[vec!["a", "b", "a"]], 3, true).unwrap();
        let v = c.vocab();
        let (a, b) = (v.id("a").unwrap(), v.id("b").unwrap());
        assert_eq!(c.get(&[a]), 2);
        assert_eq!(c.get(&[BOS, a]), 1);
        assert_eq!(c.get(&[a, b, a]), 1);
        assert_eq!(c.get(&[b, a, EOS]), 1);
        assert_eq!(c.distinct(1), 4);
        assert_eq!(c.distinct(3), 3);
        assert_eq!(c.truncate(2).unwrap().order(), 2);
        assert!(c.truncate(4).is_err());
    }

    #[test]
    fn vocab_order_is_fixed() {
        let v = Vocab::from_words(["b", "a", "b", "<s>"]);
        assert_eq!(v.words(), ["<s>", "</s>", "<unk>", "a", "b"]);
        assert_eq!(v.predicted_len(), 4);
        assert_eq!(v.id_or_unk("zz"), UNK);
    }

    #[test]
    fn empty_corpus_rejected() {
        let empty: Vec<Vec<&str>> = vec![vec![]];
        assert!(matches!(NGramCounts::count(&empty, 3, true), Err(LmError::EmptyCorpus)));
    }
}
