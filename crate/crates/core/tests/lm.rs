mod common;

use common::{kn_fixture, markov3_corpus, rng, words};
use corpus_forge::ngramlm::{compare_orders, NGramCounts, NGramModel, OovContext, Smoothing, TrainConfig, BOS};
use rand::seq::SliceRandom;

/// Sums P(w | h) over the predicted vocabulary, computed word by word.
fn mass(model: &NGramModel, context: &[u32]) -> f64 {
    (0..model.vocab().len() as u32)
        .filter(|&w| w != BOS)
        .map(|w| model.prob_ids(context, w))
        .sum()
}

#[test]
fn sampled_contexts_sum_to_one() {
    let (train, _) = markov3_corpus(11);
    let model = NGramModel::train(&train, &TrainConfig::new(5)).unwrap();
    let mut rng = rng(60);
    for k in 2..=5 {
        let mut contexts = model.contexts(k);
        // all of them when there are fewer than 50
        assert!(contexts.len() >= 50 || k == 2, "order {k}: {} contexts", contexts.len());
        contexts.shuffle(&mut rng);
        for h in contexts.iter().take(50) {
            let m = mass(&model, h);
            assert!((m - 1.0).abs() < 1e-6, "context {h:?}: {m}");
        }
    }
    assert!((mass(&model, &[]) - 1.0).abs() < 1e-6);
}

#[test]
fn hand_worked_kneser_ney() {
    let (corpus, expected) = kn_fixture();
    let model = NGramModel::train(&corpus, &TrainConfig::new(2)).unwrap();
    assert_eq!(model.discounts(), &[[0.75; 3], [0.75; 3]]);
    for (h, w, p) in expected {
        let ctx: Vec<&str> = h.split_whitespace().collect();
        let got = model.prob(&ctx, w);
        assert!((got - p).abs() < 1e-9, "p({w} | {h}) = {got}, expected {p}");
    }
}

#[test]
fn five_gram_beats_three_gram_on_markov3() {
    let (train, dev) = markov3_corpus(11);
    let cmp = compare_orders(&train, &dev, &TrainConfig::new(3), &TrainConfig::new(5), OovContext::Break).unwrap();
    assert!(cmp.high.perplexity < cmp.low.perplexity, "{} vs {}", cmp.high.perplexity, cmp.low.perplexity);
}

#[test]
fn truncated_counts_reproduce_lower_order() {
    let (train, dev) = markov3_corpus(5);
    let counts = NGramCounts::count(&train, 4, true).unwrap();
    let direct = NGramModel::train(&train, &TrainConfig::new(3)).unwrap();
    let truncated = NGramModel::from_counts(&counts.truncate(3).unwrap(), Smoothing::ModifiedKneserNey, None).unwrap();
    let a = direct.evaluate(&dev, OovContext::Break).unwrap();
    let b = truncated.evaluate(&dev, OovContext::Break).unwrap();
    assert_eq!(a.perplexity, b.perplexity);
}

#[test]
fn unsmoothed_training_perplexity_below_uniform() {
    let (train, _) = markov3_corpus(3);
    let cfg = TrainConfig {
        smoothing: Smoothing::Mle,
        ..TrainConfig::new(3)
    };
    let model = NGramModel::train(&train, &cfg).unwrap();
    let r = model.evaluate(&train, OovContext::Break).unwrap();
    assert!(r.perplexity <= model.vocab().predicted_len() as f64);
}

#[test]
fn no_shared_bigrams_means_equal_perplexity() {
    let train = vec![words("a b c d"), words("d c b a")];
    let dev = vec![words("a c"), words("b d")];
    let cfg = |n| TrainConfig {
        add_boundaries: false,
        ..TrainConfig::new(n)
    };
    let cmp = compare_orders(&train, &dev, &cfg(3), &cfg(5), OovContext::Break).unwrap();
    assert!((cmp.low.perplexity - cmp.high.perplexity).abs() < 1e-6);
}

#[test]
fn model_files_are_deterministic() {
    let (train, _) = markov3_corpus(11);
    let bytes = |m: &NGramModel| {
        let mut b = Vec::new();
        m.write_binary(&mut b).unwrap();
        let mut a = Vec::new();
        m.write_arpa(&mut a).unwrap();
        (b, a)
    };
    let a = NGramModel::train(&train, &TrainConfig::new(3)).unwrap();
    let b = NGramModel::train(&train, &TrainConfig::new(3)).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    let mut buf = Vec::new();
    a.write_binary(&mut buf).unwrap();
    assert_eq!(NGramModel::read_binary(&mut buf.as_slice()).unwrap(), a);
}
