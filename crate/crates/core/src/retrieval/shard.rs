//! Overlapping fixed-size windows over a book's word sequence.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ShardError {
    #[error("shard stride {stride} must be between 1 and the shard size {size}")]
    BadStride { size: usize, stride: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentShard {
    pub shard_id: u32,
    pub book_id: String,
    /// Index of the first word of the shard within the normalized book.
    pub word_offset: usize,
    pub words: Vec<String>,
}

impl DocumentShard {
    pub fn end_offset(&self) -> usize {
        self.word_offset + self.words.len()
    }
}

/// Word ranges of the shards of a `len`-word book: offsets `0, stride,
/// 2*stride, ...` until a shard reaches the end of the book.
pub fn shard_ranges(len: usize, size: usize, stride: usize) -> Result<Vec<std::ops::Range<usize>>, ShardError> {
    if stride == 0 || stride > size {
        return Err(ShardError::BadStride { size, stride });
    }
    let mut ranges = Vec::new();
    let mut offset = 0;
    while offset < len {
        let end = (offset + size).min(len);
        ranges.push(offset..end);
        if end == len {
            break;
        }
        offset += stride;
    }
    Ok(ranges)
}

/// Splits a book into shards numbered from `first_id`.
pub fn shard_book(
    book_id: &str,
    words: &[String],
    size: usize,
    stride: usize,
    first_id: u32,
) -> Result<Vec<DocumentShard>, ShardError> {
    Ok(shard_ranges(words.len(), size, stride)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| DocumentShard {
            shard_id: first_id + i as u32,
            book_id: book_id.to_string(),
            word_offset: r.start,
            words: words[r].to_vec(),
        })
        .collect())
}
