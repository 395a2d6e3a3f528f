//! Segment manifests and the provenance-stamped TSV files every stage writes.
//!
//! Files start with a `# config_hash=<hex>` line, then a header row, then
//! data rows. Fields never contain tabs or newlines.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::splitter::{Gender, Partition};

pub const HASH_PREFIX: &str = "# config_hash=";

pub const MANIFEST_HEADER: &str =
    "segment_id\tbook_id\tchapter_id\tspeaker_id\tgender\tstart_ms\tend_ms\ttranscript\twer\tpartition";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing config hash line")]
    MissingHash { path: String },
    #[error("{path}: written under config {found}, expected {expected}")]
    HashMismatch { path: String, found: String, expected: String },
    #[error("{path}: header does not match, expected {expected:?}")]
    BadHeader { path: String, expected: String },
    #[error("{path} line {line}: {msg}")]
    BadRow { path: String, line: usize, msg: String },
}

/// A provenance-stamped table as read from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub config_hash: String,
    pub header: String,
    pub rows: Vec<String>,
}

pub fn render_table<I, S>(config_hash: &str, header: &str, rows: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = String::new();
    let _ = writeln!(out, "{HASH_PREFIX}{config_hash}");
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r.as_ref());
        out.push('\n');
    }
    out
}

pub fn write_table<I, S>(path: &Path, config_hash: &str, header: &str, rows: I) -> Result<(), ManifestError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| ManifestError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, render_table(config_hash, header, rows)).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a stamped table, refusing it when `expected_hash` is given and
/// differs from the stamp.
pub fn read_table(path: &Path, header: &str, expected_hash: Option<&str>) -> Result<Table, ManifestError> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io { path: p.clone(), source })?;
    let mut lines = text.lines();
    let config_hash = lines
        .next()
        .and_then(|l| l.strip_prefix(HASH_PREFIX))
        .ok_or_else(|| ManifestError::MissingHash { path: p.clone() })?
        .to_string();
    if let Some(expected) = expected_hash {
        if expected != config_hash {
            return Err(ManifestError::HashMismatch {
                path: p,
                found: config_hash,
                expected: expected.to_string(),
            });
        }
    }
    if lines.next() != Some(header) {
        return Err(ManifestError::BadHeader {
            path: p,
            expected: header.to_string(),
        });
    }
    Ok(Table {
        config_hash,
        header: header.to_string(),
        rows: lines.filter(|l| !l.is_empty()).map(str::to_string).collect(),
    })
}

/// Where a manifest row belongs in the release.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowPartition {
    Split(Partition),
    Limited(String),
    Unassigned,
}

impl std::fmt::Display for RowPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowPartition::Split(p) => f.write_str(p.as_str()),
            RowPartition::Limited(name) => write!(f, "limited:{name}"),
            RowPartition::Unassigned => f.write_str("unassigned"),
        }
    }
}

impl std::str::FromStr for RowPartition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "unassigned" {
            return Ok(RowPartition::Unassigned);
        }
        if let Some(name) = s.strip_prefix("limited:") {
            if name.is_empty() {
                return Err("empty limited set name".into());
            }
            return Ok(RowPartition::Limited(name.to_string()));
        }
        Partition::parse(s)
            .map(RowPartition::Split)
            .ok_or_else(|| format!("unknown partition {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub segment_id: String,
    pub book_id: String,
    pub chapter_id: String,
    pub speaker_id: String,
    pub gender: Gender,
    pub start_ms: u64,
    pub end_ms: u64,
    pub transcript: Vec<String>,
    pub wer: Option<f64>,
    pub partition: RowPartition,
}

impl ManifestRow {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.segment_id,
            self.book_id,
            self.chapter_id,
            self.speaker_id,
            self.gender,
            self.start_ms,
            self.end_ms,
            self.transcript.join(" "),
            self.wer.map(|w| format!("{w:.6}")).unwrap_or_default(),
            self.partition
        )
    }

    pub fn from_tsv_row(line: &str) -> Result<Self, String> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(format!("expected 10 columns, found {}", cols.len()));
        }
        let num = |i: usize, name: &str| cols[i].parse::<u64>().map_err(|_| format!("bad {name} {:?}", cols[i]));
        let row = Self {
            segment_id: cols[0].to_string(),
            book_id: cols[1].to_string(),
            chapter_id: cols[2].to_string(),
            speaker_id: cols[3].to_string(),
            gender: Gender::parse(cols[4]).ok_or_else(|| format!("bad gender {:?}", cols[4]))?,
            start_ms: num(5, "start_ms")?,
            end_ms: num(6, "end_ms")?,
            transcript: cols[7].split_whitespace().map(str::to_string).collect(),
            wer: if cols[8].is_empty() {
                None
            } else {
                Some(cols[8].parse().map_err(|_| format!("bad wer {:?}", cols[8]))?)
            },
            partition: cols[9].parse()?,
        };
        if row.start_ms >= row.end_ms {
            return Err(format!("start_ms {} not before end_ms {}", row.start_ms, row.end_ms));
        }
        Ok(row)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub config_hash: String,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn new(config_hash: impl Into<String>, rows: Vec<ManifestRow>) -> Self {
        Self {
            config_hash: config_hash.into(),
            rows,
        }
    }

    pub fn render(&self) -> String {
        render_table(&self.config_hash, MANIFEST_HEADER, self.rows.iter().map(ManifestRow::to_tsv_row))
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        write_table(path, &self.config_hash, MANIFEST_HEADER, self.rows.iter().map(ManifestRow::to_tsv_row))
    }

    pub fn read(path: &Path, expected_hash: Option<&str>) -> Result<Self, ManifestError> {
        let table = read_table(path, MANIFEST_HEADER, expected_hash)?;
        let mut seen = HashSet::new();
        let mut rows = Vec::with_capacity(table.rows.len());
        for (i, line) in table.rows.iter().enumerate() {
            let bad = |msg: String| ManifestError::BadRow {
                path: path.display().to_string(),
                line: i + 3,
                msg,
            };
            let row = ManifestRow::from_tsv_row(line).map_err(bad)?;
            if !seen.insert(row.segment_id.clone()) {
                return Err(bad(format!("duplicate segment_id {}", row.segment_id)));
            }
            rows.push(row);
        }
        Ok(Self {
            config_hash: table.config_hash,
            rows,
        })
    }
}
