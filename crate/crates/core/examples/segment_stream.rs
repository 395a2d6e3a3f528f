//! Cuts a synthetic token stream into 10-20 s segments at the longest
//! silences.

use corpus_forge::segmenter::{segment_stream, SegmentParams, TimedToken, TokenStream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut t = 0;
    let mut tokens = Vec::new();
    for i in 0..400 {
        let len = rng.gen_range(200..600);
        tokens.push(TimedToken::new(format!("w{i}"), t, t + len));
        // Mostly short pauses, with an occasional sentence break.
        t += len + if rng.gen_bool(0.1) { rng.gen_range(400..1200) } else { rng.gen_range(0..150) };
    }
    let stream = TokenStream::new("demo", tokens);
    let seg = segment_stream(&stream, &SegmentParams::default())?;
    for s in &seg.segments {
        println!("{}  {:>6}..{:<6} {:>5} ms  {} words", s.segment_id, s.start, s.end, s.duration(), s.tokens.len());
    }
    if let Some((a, b)) = seg.residual {
        println!("residual {a}..{b} ({} ms)", b - a);
    }
    println!("{} tokens dropped", seg.dropped.len());
    Ok(())
}
