//! Partitions a random speaker population and builds the limited
//! supervision sets from the train side.

use std::collections::HashMap;

use corpus_forge::splitter::{
    make_limited_supervision, plan_partitions, Gender, LimitedConfig, Partition, SegmentRef, SpeakerRecord, SplitConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut speakers = Vec::new();
    let mut segments = Vec::new();
    for s in 0..40 {
        let id = format!("spk{s:02}");
        let gender = if s % 2 == 0 { Gender::Male } else { Gender::Female };
        let mut total = 0;
        for c in 0..rng.gen_range(1..5) {
            for k in 0..rng.gen_range(20..150) {
                let d = rng.gen_range(10_000..20_000);
                total += d;
                segments.push(SegmentRef {
                    segment_id: format!("{id}-c{c}-{k:04}"),
                    chapter_id: format!("{id}-c{c}"),
                    speaker_id: id.clone(),
                    duration_ms: d,
                });
            }
        }
        speakers.push(SpeakerRecord {
            speaker_id: id,
            gender,
            total_duration_ms: total,
            mean_pseudo_wer: rng.gen_range(0.0..0.3),
        });
    }
    let cfg = SplitConfig {
        dev_test_speakers_per_gender: 3,
        ..Default::default()
    };
    let plan = plan_partitions(&speakers, &segments, &cfg, 17)?;
    let genders: HashMap<String, Gender> = speakers.iter().map(|s| (s.speaker_id.clone(), s.gender)).collect();
    for (p, t) in plan.tallies(&segments, &genders) {
        println!("{p:<5} {:>7.2} h  speakers {:?}", t.duration_ms as f64 / 3.6e6, t.speakers);
    }
    println!("{} segments truncated from dev/test", plan.truncated_segments.len());

    let train: Vec<SegmentRef> = segments
        .iter()
        .filter(|s| plan.segment_partition(&s.segment_id) == Some(Partition::Train))
        .cloned()
        .collect();
    let lim = make_limited_supervision(&train, &genders, &LimitedConfig::default(), 17);
    println!(
        "limited: {} x 10 min, 1 h = {} segments, 10 h = {} segments",
        lim.small_sets.len(),
        lim.one_hour.len(),
        lim.ten_hour.len()
    );
    for note in &lim.shortfalls {
        println!("  {note}");
    }
    Ok(())
}
