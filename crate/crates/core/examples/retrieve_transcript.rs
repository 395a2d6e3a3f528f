//! Finds the book passage a noisy pseudo-label was read from and scores it.

use corpus_forge::pipeline::{synth_corpus, SynthParams};
use corpus_forge::retrieval::{BookRetriever, CandidateOutcome, RetrievalParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synth_corpus(&SynthParams {
        books: 1,
        words_per_book: 8000,
        male_speakers: 1,
        female_speakers: 0,
        ..Default::default()
    });
    let book = &corpus.books[0];
    let retriever = BookRetriever::new(book.record.book_id.clone(), book.words.clone(), RetrievalParams::default())?;

    // Words 4100..4140 as a recognizer might have heard them.
    let mut pseudo: Vec<String> = book.words[4100..4140].to_vec();
    pseudo[3] = "zzyzx".into();
    pseudo.remove(17);
    pseudo.insert(30, "um".into());
    pseudo[38] = pseudo[38].replace('a', "e");

    match retriever.candidate("demo-0000", &pseudo, None) {
        CandidateOutcome::Candidate(c) => {
            println!("book span {}..{}", c.offset_start, c.offset_end);
            println!("pseudo WER {:.3}, accepted {}", c.pseudo_wer, c.accepted);
            println!("transcript: {}", c.words.join(" "));
        }
        CandidateOutcome::NoMatch => println!("no match"),
    }
    Ok(())
}
