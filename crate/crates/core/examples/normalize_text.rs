//! Normalizes a snippet of book text with the built-in English orthography.
//!
//! cargo run --example normalize_text -- [file]

use corpus_forge::textnorm::{normalize, Orthography};

const SAMPLE: &str = "\u{FEFF}The Ｑuick brown fox\u{00B2} jumped over the lazy dog's\n\
kennel; \"ﬁne\" work, said the old sea-\nman.  Chapter XII — 1893.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    let orth = Orthography::builtin("en")?;
    let text = normalize(&raw, &orth);
    println!("{} tokens", text.len());
    println!("{}", text.render());
    Ok(())
}
