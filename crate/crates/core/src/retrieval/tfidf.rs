//! Bigram TF-IDF index over document shards with cosine-similarity retrieval.
//!
//! Weights are `tf(g, d) * ln(N / df(g))` where `tf` is the raw bigram count.
//! With a single shard every idf is zero, so scoring falls back to raw term
//! frequencies.

use std::collections::HashMap;

use super::shard::DocumentShard;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardInfo {
    pub shard_id: u32,
    pub book_id: String,
    pub word_offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    TfIdf,
    /// Used when the corpus has a single shard.
    RawTf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredShard {
    /// Position of the shard in the index.
    pub index: usize,
    pub shard_id: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RetrievalOutcome {
    /// The query has no bigram known to the index.
    NoMatch,
    Ranked(Vec<ScoredShard>),
}

impl RetrievalOutcome {
    pub fn best(&self) -> Option<&ScoredShard> {
        match self {
            RetrievalOutcome::NoMatch => None,
            RetrievalOutcome::Ranked(r) => r.first(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Posting {
    shard: u32,
    tf: u32,
}

fn bigram_key(a: u32, b: u32) -> u64 {
    (u64::from(a) << 32) | u64::from(b)
}

/// Accumulates shards; `seal` computes document frequencies and weights.
#[derive(Debug, Default)]
pub struct IndexBuilder {
    words: HashMap<String, u32>,
    word_list: Vec<String>,
    bigrams: HashMap<u64, u32>,
    bigram_pairs: Vec<(u32, u32)>,
    postings: Vec<Vec<Posting>>,
    shards: Vec<ShardInfo>,
}

impl IndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn word_id(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.words.get(w) {
            return id;
        }
        let id = self.word_list.len() as u32;
        self.words.insert(w.to_string(), id);
        self.word_list.push(w.to_string());
        id
    }

    pub fn add_shard(&mut self, shard: &DocumentShard) {
        let info = ShardInfo {
            shard_id: shard.shard_id,
            book_id: shard.book_id.clone(),
            word_offset: shard.word_offset,
            len: shard.words.len(),
        };
        self.add_words(info, &shard.words);
    }

    /// Adds a shard without materializing a `DocumentShard`.
    pub fn add_words<S: AsRef<str>>(&mut self, info: ShardInfo, words: &[S]) {
        let shard_idx = self.shards.len() as u32;
        let ids: Vec<u32> = words.iter().map(|w| self.word_id(w.as_ref())).collect();
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for pair in ids.windows(2) {
            let key = bigram_key(pair[0], pair[1]);
            let next = self.bigram_pairs.len() as u32;
            let gid = *self.bigrams.entry(key).or_insert(next);
            if gid == next {
                self.bigram_pairs.push((pair[0], pair[1]));
                self.postings.push(Vec::new());
            }
            *counts.entry(gid).or_insert(0) += 1;
        }
        let mut counts: Vec<(u32, u32)> = counts.into_iter().collect();
        counts.sort_unstable();
        for (gid, tf) in counts {
            self.postings[gid as usize].push(Posting { shard: shard_idx, tf });
        }
        self.shards.push(info);
    }

    pub fn seal(self) -> TfIdfIndex {
        let n = self.shards.len();
        let weighting = if n == 1 { Weighting::RawTf } else { Weighting::TfIdf };
        let df: Vec<u32> = self.postings.iter().map(|p| p.len() as u32).collect();
        let idf: Vec<f64> = df.iter().map(|&d| (n as f64 / f64::from(d)).ln()).collect();
        let mut sq = vec![0.0f64; n];
        for (gid, plist) in self.postings.iter().enumerate() {
            for p in plist {
                let w = weight(weighting, p.tf, idf[gid]);
                sq[p.shard as usize] += w * w;
            }
        }
        TfIdfIndex {
            words: self.words,
            word_list: self.word_list,
            bigrams: self.bigrams,
            bigram_pairs: self.bigram_pairs,
            df,
            idf,
            postings: self.postings,
            norms: sq.into_iter().map(f64::sqrt).collect(),
            shards: self.shards,
            weighting,
        }
    }
}

fn weight(weighting: Weighting, tf: u32, idf: f64) -> f64 {
    match weighting {
        Weighting::TfIdf => f64::from(tf) * idf,
        Weighting::RawTf => f64::from(tf),
    }
}

/// Immutable bigram index; safe to query from many threads.
#[derive(Debug)]
pub struct TfIdfIndex {
    words: HashMap<String, u32>,
    word_list: Vec<String>,
    bigrams: HashMap<u64, u32>,
    bigram_pairs: Vec<(u32, u32)>,
    df: Vec<u32>,
    idf: Vec<f64>,
    postings: Vec<Vec<Posting>>,
    norms: Vec<f64>,
    shards: Vec<ShardInfo>,
    weighting: Weighting,
}

/// Builds an index over `shards` in order.
pub fn build_index<'a>(shards: impl IntoIterator<Item = &'a DocumentShard>) -> TfIdfIndex {
    let mut builder = IndexBuilder::new();
    for s in shards {
        builder.add_shard(s);
    }
    builder.seal()
}

impl TfIdfIndex {
    pub fn shard_count(&self) -> usize {
        self.shards.len()
    }

    pub fn shards(&self) -> &[ShardInfo] {
        &self.shards
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn bigram_count(&self) -> usize {
        self.bigram_pairs.len()
    }

    fn bigram_id(&self, a: &str, b: &str) -> Option<u32> {
        let a = *self.words.get(a)?;
        let b = *self.words.get(b)?;
        self.bigrams.get(&bigram_key(a, b)).copied()
    }

    pub fn df(&self, a: &str, b: &str) -> Option<u32> {
        self.bigram_id(a, b).map(|g| self.df[g as usize])
    }

    pub fn idf(&self, a: &str, b: &str) -> Option<f64> {
        self.bigram_id(a, b).map(|g| self.idf[g as usize])
    }

    /// Non-zero tf-idf entries of shard `index`, sorted by bigram.
    pub fn shard_vector(&self, index: usize) -> Vec<((String, String), f64)> {
        let mut out = Vec::new();
        for (gid, plist) in self.postings.iter().enumerate() {
            if let Ok(pos) = plist.binary_search_by_key(&(index as u32), |p| p.shard) {
                let w = f64::from(plist[pos].tf) * self.idf[gid];
                if w != 0.0 {
                    let (a, b) = self.bigram_pairs[gid];
                    out.push((
                        (self.word_list[a as usize].clone(), self.word_list[b as usize].clone()),
                        w,
                    ));
                }
            }
        }
        out.sort_by(|x, y| x.0.cmp(&y.0));
        out
    }

    /// Ranks shards by cosine similarity to the query's bigram vector.
    pub fn retrieve<S: AsRef<str>>(&self, query: &[S], top_k: usize) -> RetrievalOutcome {
        let mut q_tf: HashMap<u32, u32> = HashMap::new();
        for pair in query.windows(2) {
            if let Some(g) = self.bigram_id(pair[0].as_ref(), pair[1].as_ref()) {
                *q_tf.entry(g).or_insert(0) += 1;
            }
        }
        if q_tf.is_empty() {
            return RetrievalOutcome::NoMatch;
        }
        let mut q_terms: Vec<(u32, u32)> = q_tf.into_iter().collect();
        q_terms.sort_unstable();

        let mut scores = vec![0.0f64; self.shards.len()];
        let mut q_sq = 0.0;
        for &(g, tf) in &q_terms {
            let idf = self.idf[g as usize];
            let qw = weight(self.weighting, tf, idf);
            if qw == 0.0 {
                continue;
            }
            q_sq += qw * qw;
            for p in &self.postings[g as usize] {
                scores[p.shard as usize] += qw * weight(self.weighting, p.tf, idf);
            }
        }
        let q_norm = q_sq.sqrt();
        let mut ranked: Vec<ScoredShard> = scores
            .iter()
            .enumerate()
            .filter(|(_, &dot)| dot > 0.0)
            .map(|(i, &dot)| ScoredShard {
                index: i,
                shard_id: self.shards[i].shard_id,
                score: dot / (q_norm * self.norms[i]),
            })
            .collect();
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.shard_id.cmp(&b.shard_id)));
        ranked.truncate(top_k);
        if ranked.len() < top_k {
            let mut rest: Vec<ScoredShard> = scores
                .iter()
                .enumerate()
                .filter(|(_, &dot)| dot <= 0.0)
                .map(|(i, _)| ScoredShard {
                    index: i,
                    shard_id: self.shards[i].shard_id,
                    score: 0.0,
                })
                .collect();
            rest.sort_by_key(|s| s.shard_id);
            ranked.extend(rest.into_iter().take(top_k - ranked.len()));
        }
        RetrievalOutcome::Ranked(ranked)
    }
}
