//! Release statistics: hours and speakers per partition and gender, and the
//! segment-duration histogram.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::manifest::ManifestRow;
use crate::splitter::Gender;

pub const HISTOGRAM_BIN_MS: u64 = 500;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenderStats {
    pub speakers: usize,
    pub duration_ms: u64,
    pub hours: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PartitionStats {
    pub segments: usize,
    pub duration_ms: u64,
    pub hours: f64,
    pub speakers: usize,
    pub by_gender: BTreeMap<Gender, GenderStats>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub partitions: BTreeMap<String, PartitionStats>,
    pub total_duration_ms: u64,
    pub histogram_bin_ms: u64,
    /// `(bin start in ms, segment count)` for non-empty 0.5 s bins.
    pub histogram: Vec<(u64, usize)>,
}

fn hours(ms: u64) -> f64 {
    ms as f64 / 3_600_000.0
}

/// Tallies `rows` by their partition label. Durations are summed in integer
/// milliseconds, so totals equal the row sums exactly.
pub fn corpus_stats(rows: &[ManifestRow]) -> CorpusStats {
    let mut out = CorpusStats {
        histogram_bin_ms: HISTOGRAM_BIN_MS,
        ..Default::default()
    };
    let mut speakers: BTreeMap<String, BTreeSet<(Gender, &str)>> = BTreeMap::new();
    let mut bins: BTreeMap<u64, usize> = BTreeMap::new();
    for r in rows {
        let key = r.partition.to_string();
        let p = out.partitions.entry(key.clone()).or_default();
        let d = r.duration_ms();
        p.segments += 1;
        p.duration_ms += d;
        p.by_gender.entry(r.gender).or_default().duration_ms += d;
        speakers.entry(key).or_default().insert((r.gender, r.speaker_id.as_str()));
        out.total_duration_ms += d;
        *bins.entry(d / HISTOGRAM_BIN_MS * HISTOGRAM_BIN_MS).or_insert(0) += 1;
    }
    for (key, p) in out.partitions.iter_mut() {
        p.hours = hours(p.duration_ms);
        let set = &speakers[key];
        p.speakers = set.len();
        for (g, gs) in p.by_gender.iter_mut() {
            gs.hours = hours(gs.duration_ms);
            gs.speakers = set.iter().filter(|(sg, _)| sg == g).count();
        }
    }
    out.histogram = bins.into_iter().collect();
    out
}

#[cfg(test)]
mod tests {
    use super::super::manifest::RowPartition;
    use super::*;
    use crate::splitter::Partition;

    fn row(id: &str, speaker: &str, g: Gender, ms: u64, p: Partition) -> ManifestRow {
        ManifestRow {
            segment_id: id.into(),
            book_id: "b".into(),
            chapter_id: "c".into(),
            speaker_id: speaker.into(),
            gender: g,
            start_ms: 1000,
            end_ms: 1000 + ms,
            transcript: vec![],
            wer: None,
            partition: RowPartition::Split(p),
        }
    }

    #[test]
    fn single_segment() {
        let s = corpus_stats(&[row("a", "s", Gender::Male, 15_000, Partition::Train)]);
        let train = &s.partitions["train"];
        assert_eq!(train.hours, 15.0 / 3600.0);
        assert_eq!(s.histogram, vec![(15_000, 1)]);
        assert_eq!(train.by_gender[&Gender::Male].speakers, 1);
    }

    #[test]
    fn tallies_by_partition_and_gender() {
        let rows = vec![
            row("a", "m1", Gender::Male, 10_200, Partition::Dev),
            row("b", "m1", Gender::Male, 10_400, Partition::Dev),
            row("c", "f1", Gender::Female, 12_000, Partition::Dev),
            row("d", "f2", Gender::Female, 19_999, Partition::Test),
        ];
        let s = corpus_stats(&rows);
        let dev = &s.partitions["dev"];
        assert_eq!(dev.segments, 3);
        assert_eq!(dev.duration_ms, 32_600);
        assert_eq!(dev.speakers, 2);
        assert_eq!(dev.by_gender[&Gender::Male].duration_ms, 20_600);
        assert_eq!(s.total_duration_ms, 52_599);
        assert_eq!(s.histogram, vec![(10_000, 2), (12_000, 1), (19_500, 1)]);
    }
}
