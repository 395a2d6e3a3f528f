//! Filters candidate LM books against held-out transcripts by title and
//! 5-gram overlap.

use corpus_forge::decontam::{build_heldout_index, filter_corpus, DecontamConfig, LmBook, Stopwords};

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let passage = "the lantern keeper climbed the spiral stair each evening to polish brass lenses before the storm rolled across harbour";
    let heldout = vec![words(passage)];
    let index = build_heldout_index(&heldout, Stopwords::builtin("en")?);
    let heldout_titles = vec![words("the lighthouse keeper")];

    let filler: Vec<String> = (0..400).map(|i| format!("filler{i}")).collect();
    let mut copied = filler.clone();
    copied.extend(words(passage));
    let books = vec![
        LmBook { book_id: "clean".into(), title: words("a sea voyage"), words: filler.clone() },
        LmBook { book_id: "copied".into(), title: words("harbour tales"), words: copied },
        LmBook { book_id: "retitled".into(), title: words("the lighthouse keepers"), words: filler },
    ];
    let outcome = filter_corpus(&books, &index, &heldout_titles, &DecontamConfig::default())?;
    for v in &outcome.report {
        println!("{}", v.to_tsv_row());
    }
    Ok(())
}
