mod common;

use common::{planted_book, words, PLANTED};
use corpus_forge::decontam::{
    build_heldout_index, contamination_rate, filter_corpus, title_match, DecontamConfig, LmBook, RateMode, Stopwords,
};
use proptest::prelude::*;

fn index() -> corpus_forge::decontam::FiveGramIndex {
    build_heldout_index(&[words(PLANTED)], Stopwords::builtin("en").unwrap())
}

#[test]
fn planted_passage_above_one_percent_is_removed() {
    // 6 of 406 distinct 5-grams, then 6 of 706
    let books = vec![planted_book("above", 400), planted_book("below", 700)];
    let idx = index();
    assert!((contamination_rate(&books[0].words, &idx, RateMode::Distinct) - 6.0 / 406.0).abs() < 1e-12);
    assert!((contamination_rate(&books[1].words, &idx, RateMode::Distinct) - 6.0 / 706.0).abs() < 1e-12);
    let out = filter_corpus(&books, &idx, &[], &DecontamConfig::default()).unwrap();
    assert_eq!(out.removed, vec!["above".to_string()]);
    assert_eq!(out.kept, vec!["below".to_string()]);
}

#[test]
fn title_distance_one_removed_two_kept() {
    let heldout = vec![words("the lighthouse keeper")];
    let book = |id: &str, title: &str| LmBook {
        book_id: id.into(),
        title: words(title),
        words: (0..50).map(|i| format!("w{i}")).collect(),
    };
    let books = vec![
        book("one", "the lighthouse keepers"),
        book("two", "a lighthouse keepers"),
        book("same", "the lighthouse keeper"),
    ];
    let out = filter_corpus(&books, &index(), &heldout, &DecontamConfig::default()).unwrap();
    assert_eq!(out.removed, vec!["one".to_string(), "same".to_string()]);
    assert_eq!(out.kept, vec!["two".to_string()]);
}

#[test]
fn stop_words_do_not_hide_a_copy() {
    let idx = index();
    let mut book: Vec<String> = (0..100).map(|i| format!("f{i}")).collect();
    for w in words(PLANTED) {
        book.push("the".into());
        book.push(w);
    }
    assert!(contamination_rate(&book, &idx, RateMode::Distinct) > 0.05);
}

fn word_vec(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "the", "of"]).prop_map(String::from), n)
}

proptest! {
    #[test]
    fn more_heldout_never_lowers_a_rate(book in word_vec(0..60), h1 in word_vec(0..30), h2 in word_vec(0..30)) {
        let sw = Stopwords::builtin("en").unwrap();
        let small = build_heldout_index(std::slice::from_ref(&h1), sw.clone());
        let large = build_heldout_index(&[h1, h2], sw);
        for mode in [RateMode::Distinct, RateMode::Tokens] {
            prop_assert!(contamination_rate(&book, &small, mode) <= contamination_rate(&book, &large, mode));
        }
    }

    #[test]
    fn title_match_is_symmetric(a in word_vec(0..5), b in word_vec(0..5)) {
        prop_assert_eq!(title_match(&a, std::slice::from_ref(&b)), title_match(&b, std::slice::from_ref(&a)));
    }
}
