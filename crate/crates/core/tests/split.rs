mod common;

use common::{check_nesting, check_split_invariants, random_population};
use corpus_forge::splitter::{
    make_limited_supervision, partition_speakers, plan_partitions, Gender, LimitedConfig, Partition, SegmentRef,
    SpeakerRecord, SplitConfig,
};

fn cfg(k: usize) -> SplitConfig {
    SplitConfig {
        dev_test_speakers_per_gender: k,
        train_threshold_ms: 300_000,
        dev_test_cap_ms: 400_000,
    }
}

fn limited_cfg() -> LimitedConfig {
    LimitedConfig {
        pool_speakers_per_gender: 4,
        set_speakers_per_gender: 2,
        small_sets: 6,
        small_set_ms_per_gender: 60_000,
        remainder_ms_per_gender: 400_000,
    }
}

fn train_segments(a: &corpus_forge::splitter::PartitionAssignment, segs: &[SegmentRef]) -> Vec<SegmentRef> {
    segs.iter()
        .filter(|s| a.segment_partition(&s.segment_id) == Some(Partition::Train))
        .cloned()
        .collect()
}

#[test]
fn invariants_over_seeded_populations() {
    let mut conflicts = 0;
    for seed in 0..50 {
        let k = 1 + seed as usize % 3;
        let pop = random_population(seed, k, 300_000);
        let a = plan_partitions(&pop.speakers, &pop.segments, &cfg(k), seed).unwrap();
        check_split_invariants(&a, &pop, k).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        conflicts += a.dropped_chapters.len();

        // dev/test speakers are held to the cap
        for (speaker, p) in &a.speakers {
            if matches!(p, Partition::Dev | Partition::Test) {
                let kept: u64 = pop
                    .segments
                    .iter()
                    .filter(|s| &s.speaker_id == speaker && a.segment_partition(&s.segment_id).is_some())
                    .map(|s| s.duration_ms)
                    .sum();
                assert!(kept <= 400_000, "seed {seed}: {speaker} keeps {kept} ms");
            }
        }

        let train = train_segments(&a, &pop.segments);
        let l = make_limited_supervision(&train, &pop.genders, &limited_cfg(), seed);
        assert_eq!(l.small_sets.len(), 6);
        assert!(l.small_sets.iter().all(|s| !s.is_empty()), "seed {seed}: empty small set");
        check_nesting(&l.small_sets, &l.one_hour, &l.ten_hour, &train).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
    assert!(conflicts > 0, "no population exercised a shared chapter");
}

#[test]
fn same_seed_same_split_different_seed_still_valid() {
    let pop = random_population(7, 2, 300_000);
    let a = plan_partitions(&pop.speakers, &pop.segments, &cfg(2), 1).unwrap();
    let b = plan_partitions(&pop.speakers, &pop.segments, &cfg(2), 1).unwrap();
    assert_eq!(a, b);
    let c = plan_partitions(&pop.speakers, &pop.segments, &cfg(2), 2).unwrap();
    check_split_invariants(&c, &pop, 2).unwrap();
    let train = train_segments(&a, &pop.segments);
    let l1 = make_limited_supervision(&train, &pop.genders, &limited_cfg(), 1);
    let l2 = make_limited_supervision(&train, &pop.genders, &limited_cfg(), 1);
    assert_eq!(l1, l2);
}

/// Replays the dealing rule by hand on ten speakers, five per gender.
#[test]
fn ten_speakers_deal_one_pair_per_gender() {
    let mut speakers = Vec::new();
    for (g, prefix) in [(Gender::Male, "m"), (Gender::Female, "f")] {
        for i in 0..5u64 {
            speakers.push(SpeakerRecord {
                speaker_id: format!("{prefix}{i}"),
                gender: g,
                // m0/f0 are the longest, m4/f4 the shortest
                total_duration_ms: 2_000_000 - i * 100_000,
                mean_pseudo_wer: 0.1,
            });
        }
    }
    let p = partition_speakers(&speakers, &SplitConfig { dev_test_speakers_per_gender: 1, ..Default::default() }).unwrap();
    // shortest two of each gender: the shortest to dev, the next to test
    assert_eq!(p["m4"], Partition::Dev);
    assert_eq!(p["m3"], Partition::Test);
    assert_eq!(p["f4"], Partition::Dev);
    assert_eq!(p["f3"], Partition::Test);
    assert_eq!(p.values().filter(|p| **p == Partition::Train).count(), 6);
}
