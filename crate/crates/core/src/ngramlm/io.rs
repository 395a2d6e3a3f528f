//! Binary model files and ARPA export.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic   b"CFLM"   version u32 = 1
//! order u32, smoothing u8 (0 = modified KN, 1 = MLE), boundaries u8
//! vocab_len u32, then per word: len u32 + UTF-8 bytes, in id order
//! per order: D1 D2 D3 as f64
//! per order k: count u64, then per gram sorted by ids:
//!     k ids as u32, prob f64, backoff f64
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::counts::{Vocab, BOS_WORD, EOS_WORD, UNK_WORD};
use super::model::{Entry, NGramModel, Smoothing};
use super::LmError;

const MAGIC: &[u8; 4] = b"CFLM";
const VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_u64(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N], LmError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => LmError::Format("truncated model file".into()),
        _ => LmError::Io(e),
    })?;
    Ok(buf)
}

fn get_u32(r: &mut impl Read) -> Result<u32, LmError> {
    get::<4>(r).map(u32::from_le_bytes)
}

fn get_u64(r: &mut impl Read) -> Result<u64, LmError> {
    get::<8>(r).map(u64::from_le_bytes)
}

fn get_f64(r: &mut impl Read) -> Result<f64, LmError> {
    get::<8>(r).map(f64::from_le_bytes)
}

fn log10_or_floor(p: f64) -> f64 {
    if p > 0.0 {
        p.log10()
    } else {
        -99.0
    }
}

impl NGramModel {
    pub fn write_binary(&self, w: &mut impl Write) -> Result<(), LmError> {
        w.write_all(MAGIC)?;
        put_u32(w, VERSION)?;
        put_u32(w, self.order as u32)?;
        w.write_all(&[
            match self.smoothing {
                Smoothing::ModifiedKneserNey => 0,
                Smoothing::Mle => 1,
            },
            self.add_boundaries as u8,
        ])?;
        put_u32(w, self.vocab.len() as u32)?;
        for word in self.vocab.words() {
            put_u32(w, word.len() as u32)?;
            w.write_all(word.as_bytes())?;
        }
        for d in &self.discounts {
            for x in d {
                put_f64(w, *x)?;
            }
        }
        for k in 1..=self.order {
            let grams = self.grams(k);
            put_u64(w, grams.len() as u64)?;
            for (ids, e) in grams {
                for id in ids {
                    put_u32(w, *id)?;
                }
                put_f64(w, e.prob)?;
                put_f64(w, e.backoff)?;
            }
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self, LmError> {
        if &get::<4>(r)? != MAGIC {
            return Err(LmError::Format("not a model file".into()));
        }
        let version = get_u32(r)?;
        if version != VERSION {
            return Err(LmError::Format(format!("unsupported version {version}")));
        }
        let order = get_u32(r)? as usize;
        if order == 0 {
            return Err(LmError::Format("order 0".into()));
        }
        let [smoothing, boundaries] = get::<2>(r)?;
        let smoothing = match smoothing {
            0 => Smoothing::ModifiedKneserNey,
            1 => Smoothing::Mle,
            x => return Err(LmError::Format(format!("unknown smoothing tag {x}"))),
        };
        let vocab_len = get_u32(r)? as usize;
        let mut words = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let len = get_u32(r)? as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes)?;
            words.push(String::from_utf8(bytes).map_err(|_| LmError::Format("vocabulary is not UTF-8".into()))?);
        }
        if words.len() < 3 || words[0] != BOS_WORD || words[1] != EOS_WORD || words[2] != UNK_WORD {
            return Err(LmError::Format("vocabulary does not start with the markers".into()));
        }
        let mut discounts = Vec::with_capacity(order);
        for _ in 0..order {
            discounts.push([get_f64(r)?, get_f64(r)?, get_f64(r)?]);
        }
        let mut tables = Vec::with_capacity(order);
        for k in 1..=order {
            let n = get_u64(r)? as usize;
            let mut t = HashMap::with_capacity(n);
            for _ in 0..n {
                let mut ids = Vec::with_capacity(k);
                for _ in 0..k {
                    let id = get_u32(r)?;
                    if id as usize >= vocab_len {
                        return Err(LmError::Format(format!("word id {id} out of range")));
                    }
                    ids.push(id);
                }
                let prob = get_f64(r)?;
                let backoff = get_f64(r)?;
                t.insert(ids, Entry { prob, backoff });
            }
            tables.push(t);
        }
        Ok(Self {
            order,
            smoothing,
            add_boundaries: boundaries != 0,
            vocab: Vocab::from_ordered(words),
            discounts,
            tables,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LmError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LmError> {
        Self::read_binary(&mut BufReader::new(File::open(path)?))
    }

    /// Writes the model in ARPA text format (log10 probabilities).
    pub fn write_arpa(&self, w: &mut impl Write) -> Result<(), LmError> {
        writeln!(w, "# smoothing: {}", self.smoothing.describe())?;
        writeln!(w)?;
        writeln!(w, "\\data\\")?;
        for k in 1..=self.order {
            writeln!(w, "ngram {k}={}", self.num_grams(k))?;
        }
        for k in 1..=self.order {
            writeln!(w)?;
            writeln!(w, "\\{k}-grams:")?;
            for (ids, e) in self.grams(k) {
                let words: Vec<&str> = ids.iter().map(|&id| self.vocab.word(id)).collect();
                write!(w, "{:.7}\t{}", log10_or_floor(e.prob), words.join(" "))?;
                if k < self.order {
                    write!(w, "\t{:.7}", log10_or_floor(e.backoff))?;
                }
                writeln!(w)?;
            }
        }
        writeln!(w)?;
        writeln!(w, "\\end\\")?;
        Ok(())
    }
}
