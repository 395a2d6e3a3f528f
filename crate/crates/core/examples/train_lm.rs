//! Trains 3- and 5-gram models on text from a Markov source and compares
//! their perplexity on held-out sentences.

use corpus_forge::ngramlm::{compare_orders, NGramModel, OovContext, TrainConfig};
use corpus_forge::pipeline::synth::make_vocab;
use corpus_forge::pipeline::MarkovSource;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = MarkovSource::new(3, 4, make_vocab(16, 11), 11);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let train = source.sentences(6000, 8, 20, &mut rng);
    let dev = source.sentences(300, 8, 20, &mut rng);

    let cmp = compare_orders(&train, &dev, &TrainConfig::new(3), &TrainConfig::new(5), OovContext::Break)?;
    println!("3-gram dev perplexity {:.2}", cmp.low.perplexity);
    println!("5-gram dev perplexity {:.2}", cmp.high.perplexity);

    let model = NGramModel::train(&train, &TrainConfig::new(3))?;
    let mut arpa = Vec::new();
    model.write_arpa(&mut arpa)?;
    let text = String::from_utf8(arpa)?;
    for line in text.lines().take(8) {
        println!("{line}");
    }
    Ok(())
}
