use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::counts::{NGramCounts, Vocab, BOS};
use super::LmError;

/// Discount used for every count class when the count-of-counts cannot
/// support the modified estimates.
pub const FALLBACK_DISCOUNT: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Interpolated modified Kneser-Ney.
    #[default]
    ModifiedKneserNey,
    /// Unsmoothed relative frequencies.
    Mle,
}

impl Smoothing {
    pub fn describe(&self) -> &'static str {
        match self {
            Smoothing::ModifiedKneserNey => "interpolated modified kneser-ney",
            Smoothing::Mle => "maximum likelihood",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub order: usize,
    pub smoothing: Smoothing,
    /// Wrap every sentence in `<s>` ... `</s>`.
    pub add_boundaries: bool,
    /// Per-order `[D1, D2, D3+]`, overriding the count-of-counts estimate.
    pub discounts: Option<Vec<[f64; 3]>>,
}

impl TrainConfig {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            smoothing: Smoothing::ModifiedKneserNey,
            add_boundaries: true,
            discounts: None,
        }
    }
}

/// Stored probability of a gram and the backoff weight applied when the gram
/// is used as a context. Linear, not log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub prob: f64,
    pub backoff: f64,
}

/// A back-off n-gram model. Probabilities of stored grams are already
/// interpolated with lower orders, so lookup is the usual back-off walk.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    pub(crate) order: usize,
    pub(crate) smoothing: Smoothing,
    pub(crate) add_boundaries: bool,
    pub(crate) vocab: Vocab,
    pub(crate) discounts: Vec<[f64; 3]>,
    /// `tables[k - 1]` holds the k-grams.
    pub(crate) tables: Vec<HashMap<Vec<u32>, Entry>>,
}

/// Modified Kneser-Ney discounts from the count-of-counts `n[i] = #{a == i + 1}`.
pub fn estimate_discounts(n: [u64; 4]) -> [f64; 3] {
    if n.contains(&0) {
        return [FALLBACK_DISCOUNT; 3];
    }
    let [n1, n2, n3, n4] = n.map(|c| c as f64);
    let y = n1 / (n1 + 2.0 * n2);
    let d = [1.0 - 2.0 * y * n2 / n1, 2.0 - 3.0 * y * n3 / n2, 3.0 - 4.0 * y * n4 / n3];
    if d.iter().any(|&x| x <= 0.0) {
        return [FALLBACK_DISCOUNT; 3];
    }
    d
}

fn discount(d: &[f64; 3], a: u64) -> f64 {
    match a {
        0 => 0.0,
        1 => d[0].min(1.0),
        2 => d[1].min(2.0),
        _ => d[2].min(a as f64),
    }
}

#[derive(Default, Clone, Copy)]
struct ContextStats {
    total: u64,
    classes: [u64; 3],
}

impl ContextStats {
    fn add(&mut self, a: u64) {
        self.total += a;
        match a {
            0 => {}
            1 => self.classes[0] += 1,
            2 => self.classes[1] += 1,
            _ => self.classes[2] += 1,
        }
    }

    fn gamma(&self, d: &[f64; 3]) -> f64 {
        let mass = self.classes[0] as f64 * d[0].min(1.0) + self.classes[1] as f64 * d[1].min(2.0) + self.classes[2] as f64 * d[2];
        mass / self.total as f64
    }
}

fn sorted_keys<V>(map: &HashMap<Vec<u32>, V>) -> Vec<&Vec<u32>> {
    let mut keys: Vec<&Vec<u32>> = map.keys().collect();
    keys.sort_unstable();
    keys
}

impl NGramModel {
    pub fn train<S: AsRef<str> + Sync>(sentences: &[Vec<S>], cfg: &TrainConfig) -> Result<Self, LmError> {
        let counts = NGramCounts::count(sentences, cfg.order, cfg.add_boundaries)?;
        Self::from_counts(&counts, cfg.smoothing, cfg.discounts.as_deref())
    }

    pub fn from_counts(counts: &NGramCounts, smoothing: Smoothing, discounts: Option<&[[f64; 3]]>) -> Result<Self, LmError> {
        if let Some(d) = discounts {
            if d.len() != counts.order {
                return Err(LmError::BadDiscounts(format!("{} orders given for an order-{} model", d.len(), counts.order)));
            }
            for (k, ds) in d.iter().enumerate() {
                for (i, &x) in ds.iter().enumerate() {
                    if !(0.0..=(i + 1) as f64).contains(&x) {
                        return Err(LmError::BadDiscounts(format!("order {} D{} = {x}", k + 1, i + 1)));
                    }
                }
            }
        }
        let mut model = Self {
            order: counts.order,
            smoothing,
            add_boundaries: counts.add_boundaries,
            vocab: counts.vocab.clone(),
            discounts: Vec::new(),
            tables: Vec::new(),
        };
        match smoothing {
            Smoothing::ModifiedKneserNey => model.fit_kneser_ney(counts, discounts),
            Smoothing::Mle => model.fit_mle(counts),
        }
        Ok(model)
    }

    /// Adjusted counts per order: raw counts for the top order and for grams
    /// starting with `<s>`, numbers of distinct left extensions otherwise.
    fn adjusted_counts(counts: &NGramCounts) -> Vec<HashMap<Vec<u32>, u64>> {
        let n = counts.order;
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    return counts.tables[k].clone();
                }
                let mut cont: HashMap<&[u32], u64> = HashMap::new();
                for gram in counts.tables[k + 1].keys() {
                    *cont.entry(&gram[1..]).or_insert(0) += 1;
                }
                counts.tables[k]
                    .iter()
                    .map(|(g, &raw)| {
                        let a = if g[0] == BOS { raw } else { cont.get(g.as_slice()).copied().unwrap_or(0) };
                        (g.clone(), a)
                    })
                    .collect()
            })
            .collect()
    }

    fn fit_kneser_ney(&mut self, counts: &NGramCounts, fixed: Option<&[[f64; 3]]>) {
        let adjusted = Self::adjusted_counts(counts);
        let uniform = 1.0 / self.vocab.predicted_len() as f64;
        for k in 1..=self.order {
            let table = &adjusted[k - 1];
            let d = match fixed {
                Some(f) => f[k - 1],
                None => {
                    let mut coc = [0u64; 4];
                    for (g, &a) in table {
                        if (1..=4).contains(&a) && !(k == 1 && g[0] == BOS) {
                            coc[a as usize - 1] += 1;
                        }
                    }
                    estimate_discounts(coc)
                }
            };
            let mut contexts: HashMap<&[u32], ContextStats> = HashMap::new();
            for (g, &a) in table {
                if k == 1 && g[0] == BOS {
                    continue;
                }
                contexts.entry(&g[..k - 1]).or_default().add(a);
            }
            let mut entries: HashMap<Vec<u32>, Entry> = HashMap::with_capacity(table.len());
            for g in sorted_keys(table) {
                let w = g[k - 1];
                if k == 1 && w == BOS {
                    entries.insert(g.clone(), Entry { prob: 0.0, backoff: 1.0 });
                    continue;
                }
                let a = table[g];
                let lower = if k == 1 { uniform } else { self.prob_ids(&g[1..k - 1], w) };
                let stats = contexts[&g[..k - 1]];
                let prob = if stats.total == 0 {
                    lower
                } else {
                    (a as f64 - discount(&d, a)).max(0.0) / stats.total as f64 + stats.gamma(&d) * lower
                };
                entries.insert(g.clone(), Entry { prob, backoff: 1.0 });
            }
            if k == 1 {
                // words that were never predicted still get their share
                let stats = contexts.get([].as_slice()).copied().unwrap_or_default();
                for id in 1..self.vocab.len() as u32 {
                    entries.entry(vec![id]).or_insert_with(|| Entry {
                        prob: if stats.total == 0 { uniform } else { stats.gamma(&d) * uniform },
                        backoff: 1.0,
                    });
                }
                entries.entry(vec![BOS]).or_insert(Entry { prob: 0.0, backoff: 1.0 });
            } else {
                let lower = self.tables.last_mut().expect("lower order present");
                for (h, stats) in &contexts {
                    if stats.total > 0 {
                        if let Some(e) = lower.get_mut(*h) {
                            e.backoff = stats.gamma(&d);
                        }
                    }
                }
            }
            self.discounts.push(d);
            self.tables.push(entries);
        }
    }

    fn fit_mle(&mut self, counts: &NGramCounts) {
        for k in 1..=self.order {
            let table = &counts.tables[k - 1];
            let mut totals: HashMap<&[u32], u64> = HashMap::new();
            for (g, &c) in table {
                if !(k == 1 && g[0] == BOS) {
                    *totals.entry(&g[..k - 1]).or_insert(0) += c;
                }
            }
            let mut entries: HashMap<Vec<u32>, Entry> = table
                .iter()
                .map(|(g, &c)| {
                    let prob = if k == 1 && g[0] == BOS { 0.0 } else { c as f64 / totals[&g[..k - 1]] as f64 };
                    (g.clone(), Entry { prob, backoff: 1.0 })
                })
                .collect();
            if k == 1 {
                for id in 0..self.vocab.len() as u32 {
                    entries.entry(vec![id]).or_insert(Entry { prob: 0.0, backoff: 1.0 });
                }
            } else {
                let lower = self.tables.last_mut().expect("lower order present");
                for h in totals.keys() {
                    if let Some(e) = lower.get_mut(*h) {
                        e.backoff = 0.0;
                    }
                }
            }
            self.discounts.push([0.0; 3]);
            self.tables.push(entries);
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    pub fn add_boundaries(&self) -> bool {
        self.add_boundaries
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn discounts(&self) -> &[[f64; 3]] {
        &self.discounts
    }

    pub fn entry(&self, gram: &[u32]) -> Option<&Entry> {
        if gram.is_empty() || gram.len() > self.tables.len() {
            return None;
        }
        self.tables[gram.len() - 1].get(gram)
    }

    pub fn num_grams(&self, k: usize) -> usize {
        self.tables[k - 1].len()
    }

    /// Stored k-grams in id order.
    pub fn grams(&self, k: usize) -> Vec<(&[u32], Entry)> {
        let t = &self.tables[k - 1];
        sorted_keys(t).into_iter().map(|g| (g.as_slice(), t[g])).collect()
    }

    /// Contexts (of length `k - 1`) under which some k-gram was observed.
    pub fn contexts(&self, k: usize) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = self.tables[k - 1].keys().map(|g| g[..k - 1].to_vec()).collect();
        out.sort_unstable();
        out.dedup();
        if k == 1 {
            out = vec![Vec::new()];
        }
        out
    }

    /// P(w | context). Only the last `order - 1` context words are used.
    pub fn prob_ids(&self, context: &[u32], w: u32) -> f64 {
        let keep = (self.tables.len()).saturating_sub(1).min(context.len());
        let context = &context[context.len() - keep..];
        let mut weight = 1.0;
        let mut gram: Vec<u32> = Vec::with_capacity(context.len() + 1);
        for start in 0..=context.len() {
            let h = &context[start..];
            gram.clear();
            gram.extend_from_slice(h);
            gram.push(w);
            if let Some(e) = self.tables[h.len()].get(&gram) {
                return weight * e.prob;
            }
            if !h.is_empty() {
                if let Some(e) = self.tables[h.len() - 1].get(h) {
                    weight *= e.backoff;
                }
            }
        }
        0.0
    }

    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let ids: Vec<u32> = context.iter().map(|w| self.vocab.id_or_unk(w)).collect();
        self.prob_ids(&ids, self.vocab.id_or_unk(word))
    }

    /// Σ_w P(w | context) over the predicted vocabulary; 1 for a proper model.
    pub fn context_mass(&self, context: &[u32]) -> f64 {
        (1..self.vocab.len() as u32).map(|w| self.prob_ids(context, w)).sum()
    }
}
