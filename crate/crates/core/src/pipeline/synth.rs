//! Seeded synthetic corpora: books from a Markov text source, speakers,
//! timed-token readings with configurable pseudo-label noise, and LM books.
//! Ground-truth book spans are kept so recovery can be checked.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::derive_seed;
use crate::segmenter::{TimedToken, TokenStream};
use crate::splitter::{BookRecord, ChapterMeta, Gender};

/// Frequent function words mixed into every synthetic vocabulary.
const FUNCTION_WORDS: [&str; 12] = ["the", "of", "and", "a", "to", "in", "was", "he", "she", "it", "that", "with"];

const SYLLABLES: [&str; 40] = [
    "ka", "to", "ri", "mo", "lan", "es", "ver", "dun", "pa", "shi", "gor", "el", "tan", "bi", "que", "sor", "ni", "lo",
    "mar", "ith", "ven", "du", "cal", "rem", "fa", "ost", "bel", "wy", "nor", "ge", "hal", "ut", "pre", "si", "dro",
    "ak", "zel", "om", "tri", "fen",
];

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Distinct pronounceable lowercase words, function words first.
pub fn make_vocab(size: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<String> = FUNCTION_WORDS.iter().take(size).map(|w| w.to_string()).collect();
    let mut seen: std::collections::HashSet<String> = out.iter().cloned().collect();
    while out.len() < size {
        let n = rng.gen_range(2..=4);
        let w: String = (0..n).map(|_| SYLLABLES[rng.gen_range(0..SYLLABLES.len())]).collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// A text source where the next word depends on the previous `order` words.
/// Each context has `branching` possible successors, drawn with weights
/// proportional to `1 / (rank + 1)`.
#[derive(Debug, Clone)]
pub struct MarkovSource {
    pub order: usize,
    pub branching: usize,
    pub vocab: Vec<String>,
    salt: u64,
}

impl MarkovSource {
    pub fn new(order: usize, branching: usize, vocab: Vec<String>, salt: u64) -> Self {
        assert!(order >= 1 && branching >= 1 && !vocab.is_empty());
        Self {
            order,
            branching,
            vocab,
            salt,
        }
    }

    pub fn successors(&self, context: &[usize]) -> Vec<usize> {
        let mut h = splitmix(self.salt);
        for &c in context {
            h = splitmix(h ^ c as u64);
        }
        (0..self.branching)
            .map(|j| (splitmix(h ^ (j as u64).wrapping_mul(0xA24B_AED4_963E_E407)) % self.vocab.len() as u64) as usize)
            .collect()
    }

    fn pick(&self, context: &[usize], rng: &mut impl Rng) -> usize {
        let succ = self.successors(context);
        let total: f64 = (0..succ.len()).map(|j| 1.0 / (j + 1) as f64).sum();
        let mut r = rng.gen::<f64>() * total;
        for (j, &s) in succ.iter().enumerate() {
            r -= 1.0 / (j + 1) as f64;
            if r <= 0.0 {
                return s;
            }
        }
        *succ.last().expect("branching >= 1")
    }

    /// `n` word ids continuing from a random start.
    pub fn generate_ids(&self, n: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.order).map(|_| rng.gen_range(0..self.vocab.len())).collect();
        for _ in 0..n {
            let next = self.pick(&ids[ids.len() - self.order..], rng);
            ids.push(next);
        }
        ids.split_off(self.order)
    }

    /// Sentences of `min_len..=max_len` words from one continuous chain.
    pub fn sentences(&self, count: usize, min_len: usize, max_len: usize, rng: &mut impl Rng) -> Vec<Vec<String>> {
        let mut out = Vec::with_capacity(count);
        let mut ids: Vec<usize> = (0..self.order).map(|_| rng.gen_range(0..self.vocab.len())).collect();
        for _ in 0..count {
            let len = rng.gen_range(min_len..=max_len);
            let mut s = Vec::with_capacity(len);
            for _ in 0..len {
                let next = self.pick(&ids[ids.len() - self.order..], rng);
                ids.push(next);
                s.push(self.vocab[next].clone());
            }
            out.push(s);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub books: usize,
    pub words_per_book: usize,
    pub chapters_per_book: usize,
    pub male_speakers: usize,
    pub female_speakers: usize,
    /// Probability that a spoken word is corrupted in the pseudo-label.
    pub noise: f64,
    /// Words per second.
    pub speech_rate: f64,
    pub vocab_size: usize,
    pub lm_books: usize,
    pub lm_words_per_book: usize,
    /// Add a superseded duplicate and a multi-speaker book to the metadata.
    pub invalid_books: bool,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 1,
            books: 20,
            words_per_book: 5000,
            chapters_per_book: 4,
            male_speakers: 6,
            female_speakers: 6,
            noise: 0.0,
            speech_rate: 2.5,
            vocab_size: 3000,
            lm_books: 8,
            lm_words_per_book: 3000,
            invalid_books: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBook {
    pub record: BookRecord,
    /// The normalized word sequence the raw text reduces to.
    pub words: Vec<String>,
    pub raw_text: String,
}

/// When a spoken book word was actually read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthWord {
    pub book_index: usize,
    pub start: u64,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecording {
    pub chapter_id: String,
    pub book_id: String,
    pub speaker_id: String,
    /// Pseudo-label tokens.
    pub stream: TokenStream,
    pub truth: Vec<TruthWord>,
}

impl SynthRecording {
    /// Book word range read in `[start, end)`, assigning each word to the
    /// interval containing its midpoint.
    pub fn truth_span(&self, start: u64, end: u64) -> Option<Range<usize>> {
        let inside: Vec<usize> = self
            .truth
            .iter()
            .filter(|t| {
                let mid = (t.start + t.end) / 2;
                mid >= start && mid < end
            })
            .map(|t| t.book_index)
            .collect();
        Some(*inside.first()?..*inside.last()? + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthLmBook {
    pub book_id: String,
    pub title: String,
    /// One sentence per line.
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub params: SynthParams,
    pub books: Vec<SynthBook>,
    /// Books in the metadata that should not survive validation.
    pub invalid_books: Vec<BookRecord>,
    pub speakers: Vec<(String, Gender)>,
    pub recordings: Vec<SynthRecording>,
    pub lm_books: Vec<SynthLmBook>,
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Renders sentences as wrapped prose with capitals, punctuation and the
/// occasional end-of-line hyphenation.
fn render_prose(sentences: &[Vec<String>], rng: &mut impl Rng) -> String {
    let mut out = String::new();
    let mut col = 0usize;
    for (si, s) in sentences.iter().enumerate() {
        for (wi, w) in s.iter().enumerate() {
            let mut token = if wi == 0 { capitalize(w) } else { w.clone() };
            if wi + 1 == s.len() {
                token.push('.');
            } else if wi > 2 && rng.gen_bool(0.06) {
                token.push(',');
            }
            if col > 0 && col + 1 + token.len() > 72 {
                let chars: Vec<char> = token.chars().collect();
                if chars.len() >= 7 && chars[..4].iter().all(|c| c.is_alphabetic()) && rng.gen_bool(0.3) {
                    let head: String = chars[..3].iter().collect();
                    let tail: String = chars[3..].iter().collect();
                    let _ = write!(out, " {head}-\n{tail}");
                    col = tail.len();
                    continue;
                }
                out.push('\n');
                col = 0;
            }
            if col > 0 {
                out.push(' ');
                col += 1;
            }
            out.push_str(&token);
            col += token.len();
        }
        if si % 6 == 5 {
            out.push_str("\n\n");
            col = 0;
        }
    }
    out.push('\n');
    out
}

fn corrupt(word: &str, vocab: &[String], rng: &mut impl Rng) -> String {
    if rng.gen_bool(0.5) {
        loop {
            let w = &vocab[rng.gen_range(0..vocab.len())];
            if w != word {
                return w.clone();
            }
        }
    }
    let mut chars: Vec<char> = word.chars().collect();
    let i = rng.gen_range(0..chars.len());
    let replacement = loop {
        let c = (b'a' + rng.gen_range(0..26)) as char;
        if c != chars[i] {
            break c;
        }
    };
    chars[i] = replacement;
    chars.into_iter().collect()
}

/// Simulates reading `words[range]`: word durations follow the speech rate,
/// short gaps separate words and longer pauses follow sentences.
fn read_chapter(
    words: &[String],
    range: Range<usize>,
    sentence_ends: &[bool],
    params: &SynthParams,
    vocab: &[String],
    rng: &mut impl Rng,
) -> (Vec<TimedToken>, Vec<TruthWord>, u64) {
    let per_word = 1000.0 / params.speech_rate;
    let mut t: u64 = rng.gen_range(200..600);
    let mut tokens = Vec::new();
    let mut truth = Vec::new();
    for i in range {
        let dur = (per_word * 0.8 * rng.gen_range(0.7..1.3)) as u64;
        let (start, end) = (t, t + dur.max(80));
        truth.push(TruthWord {
            book_index: i,
            start,
            end,
        });
        let word = &words[i];
        if params.noise > 0.0 && rng.gen_bool(params.noise.min(1.0)) {
            match rng.gen_range(0..4) {
                0 | 1 => tokens.push(TimedToken::new(corrupt(word, vocab, rng), start, end)),
                2 => {}
                _ => {
                    let split = start + (end - start) * 6 / 10;
                    tokens.push(TimedToken::new(word.clone(), start, split));
                    let extra = vocab[rng.gen_range(0..vocab.len())].clone();
                    tokens.push(TimedToken::new(extra, split, end));
                }
            }
        } else {
            tokens.push(TimedToken::new(word.clone(), start, end));
        }
        let gap = if sentence_ends[i] {
            (per_word * rng.gen_range(1.0..2.2)) as u64
        } else {
            (per_word * 0.2 * rng.gen_range(0.3..1.0)) as u64
        };
        t = end + gap;
    }
    (tokens, truth, t + 300)
}

/// Builds a corpus from `params`; identical params give identical corpora.
pub fn synth_corpus(params: &SynthParams) -> SyntheticCorpus {
    let seed = params.seed;
    let vocab = make_vocab(params.vocab_size, derive_seed(seed, "synth:vocab"));
    let source = MarkovSource::new(1, 20, vocab.clone(), derive_seed(seed, "synth:source"));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth:text"));
    let mut speakers = Vec::new();
    for i in 0..params.male_speakers + params.female_speakers {
        let g = if i < params.male_speakers { Gender::Male } else { Gender::Female };
        speakers.push((format!("spk{i:02}"), g));
    }
    assert!(!speakers.is_empty(), "need at least one speaker");

    let mut books = Vec::new();
    let mut recordings = Vec::new();
    let mut read_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth:reading"));
    for b in 0..params.books {
        let book_id = format!("book{b:03}");
        let mut sentences = Vec::new();
        let mut total = 0;
        while total < params.words_per_book {
            let mut s = source.sentences(1, 6, 18, &mut rng).remove(0);
            s.truncate(params.words_per_book - total);
            total += s.len();
            sentences.push(s);
        }
        let raw_text = render_prose(&sentences, &mut rng);
        let mut sentence_ends = Vec::with_capacity(total);
        for s in &sentences {
            sentence_ends.extend((0..s.len()).map(|i| i + 1 == s.len()));
        }
        let words: Vec<String> = sentences.into_iter().flatten().collect();
        let title: Vec<String> = (0..3).map(|_| vocab[rng.gen_range(FUNCTION_WORDS.len()..vocab.len())].clone()).collect();
        let (speaker_id, _) = &speakers[b % speakers.len()];
        let n_ch = params.chapters_per_book.max(1);
        let mut chapters = Vec::new();
        for c in 0..n_ch {
            let range = words.len() * c / n_ch..words.len() * (c + 1) / n_ch;
            let chapter_id = format!("{book_id}-ch{c:02}");
            let (tokens, truth, end) = read_chapter(&words, range, &sentence_ends, params, &vocab, &mut read_rng);
            let mut stream = TokenStream::new(chapter_id.clone(), tokens);
            stream.duration_ms = Some(end);
            chapters.push(ChapterMeta {
                chapter_id: chapter_id.clone(),
                speaker_id: speaker_id.clone(),
                duration_ms: end,
            });
            recordings.push(SynthRecording {
                chapter_id,
                book_id: book_id.clone(),
                speaker_id: speaker_id.clone(),
                stream,
                truth,
            });
        }
        books.push(SynthBook {
            record: BookRecord {
                book_id,
                title: title.join(" "),
                author: format!("author{:02}", b % 7),
                version: 2,
                chapters,
                multi_speaker: false,
            },
            words,
            raw_text,
        });
    }

    let mut invalid_books = Vec::new();
    if params.invalid_books && !books.is_empty() {
        let mut old = books[0].record.clone();
        old.book_id = "book900".into();
        old.version = 1;
        for ch in old.chapters.iter_mut() {
            ch.chapter_id = ch.chapter_id.replace(&books[0].record.book_id, "book900");
        }
        invalid_books.push(old);
        let mut drama = books[books.len() - 1].record.clone();
        drama.book_id = "book901".into();
        drama.title = "dramatic reading".into();
        drama.multi_speaker = true;
        drama.chapters = vec![ChapterMeta {
            chapter_id: "book901-ch00".into(),
            speaker_id: speakers[0].0.clone(),
            duration_ms: 1000,
        }];
        invalid_books.push(drama);
    }

    let mut lm_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth:lm"));
    let mut lm_books = Vec::new();
    for i in 0..params.lm_books {
        let mut lines: Vec<String> = Vec::new();
        let mut total = 0;
        while total < params.lm_words_per_book {
            let s = source.sentences(1, 6, 18, &mut lm_rng).remove(0);
            total += s.len();
            lines.push(format!("{}.", capitalize(&s.join(" "))));
        }
        let mut title: Vec<String> = (0..3)
            .map(|_| vocab[lm_rng.gen_range(FUNCTION_WORDS.len()..vocab.len())].clone())
            .collect();
        // the first LM book copies a read chapter, the second nearly shares a title
        if i == 0 && !books.is_empty() {
            let w = &books[0].words;
            let n = w.len().min(400);
            for chunk in w[..n].chunks(12) {
                lines.push(format!("{}.", capitalize(&chunk.join(" "))));
            }
        }
        if i == 1 && books.len() > 1 {
            title = books[1].record.title.split(' ').map(str::to_string).collect();
            if let Some(last) = title.last_mut() {
                last.push('s');
            }
        }
        lm_books.push(SynthLmBook {
            book_id: format!("lm{i:03}"),
            title: title.join(" "),
            raw_text: lines.join("\n") + "\n",
        });
    }

    SyntheticCorpus {
        params: *params,
        books,
        invalid_books,
        speakers,
        recordings,
        lm_books,
    }
}

impl SyntheticCorpus {
    pub fn recording(&self, chapter_id: &str) -> Option<&SynthRecording> {
        self.recordings.iter().find(|r| r.chapter_id == chapter_id)
    }

    pub fn book(&self, book_id: &str) -> Option<&SynthBook> {
        self.books.iter().find(|b| b.record.book_id == book_id)
    }

    pub fn recordings_by_chapter(&self) -> HashMap<&str, &SynthRecording> {
        self.recordings.iter().map(|r| (r.chapter_id.as_str(), r)).collect()
    }

    /// Writes the pipeline input layout:
    ///
    /// ```text
    /// books.jsonl               one book record per line
    /// speakers.tsv              speaker_id, gender
    /// books/<book_id>.txt       raw book text
    /// recordings/<chapter>.jsonl  timed pseudo-label tokens
    /// lm_books.tsv              book_id, title
    /// lm_books/<book_id>.txt    raw LM text, one sentence per line
    /// ```
    pub fn write_input_dir(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir.join("books"))?;
        fs::create_dir_all(dir.join("recordings"))?;
        fs::create_dir_all(dir.join("lm_books"))?;
        let mut meta = String::new();
        for b in self.books.iter().map(|b| &b.record).chain(&self.invalid_books) {
            meta.push_str(&serde_json::to_string(b).expect("record serializes"));
            meta.push('\n');
        }
        fs::write(dir.join("books.jsonl"), meta)?;
        let mut spk = String::from("speaker_id\tgender\n");
        for (id, g) in &self.speakers {
            let _ = writeln!(spk, "{id}\t{g}");
        }
        fs::write(dir.join("speakers.tsv"), spk)?;
        for b in &self.books {
            fs::write(dir.join("books").join(format!("{}.txt", b.record.book_id)), &b.raw_text)?;
        }
        for r in &self.recordings {
            fs::write(dir.join("recordings").join(format!("{}.jsonl", r.chapter_id)), r.stream.to_jsonl())?;
        }
        let mut lm = String::from("book_id\ttitle\n");
        for b in &self.lm_books {
            let _ = writeln!(lm, "{}\t{}", b.book_id, b.title);
            fs::write(dir.join("lm_books").join(format!("{}.txt", b.book_id)), &b.raw_text)?;
        }
        fs::write(dir.join("lm_books.tsv"), lm)?;
        Ok(())
    }
}
