//! Dataset manifest: one CSV row per slide.
//!
//! Header `wsi_id,image,mask,er,pr,her2,hg,ms,aln,split`. Image and mask
//! paths are relative to the manifest's directory and may be empty for
//! datasets that only ship feature bags.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use jointstream_core::RawLabels;

use crate::error::{io, Error, Result};

pub const HEADER: [&str; 10] = ["wsi_id", "image", "mask", "er", "pr", "her2", "hg", "ms", "aln", "split"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub wsi_id: String,
    pub image: String,
    pub mask: String,
    pub labels: RawLabels,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory that relative paths are resolved against.
    pub base: PathBuf,
    pub records: Vec<Record>,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

impl Manifest {
    pub fn new(base: impl Into<PathBuf>, records: Vec<Record>) -> Self {
        Self { base: base.into(), records }
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base.join(rel)
    }

    /// Reads and validates a manifest. Non-empty image and mask paths must
    /// exist.
    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err(path))?;
        let header = reader.headers().map_err(csv_err(path))?.clone();
        let bad = |row: usize, message: String| Error::Manifest { path: path.to_path_buf(), row, message };
        if header.iter().ne(HEADER) {
            return Err(bad(0, format!("expected header {}", HEADER.join(","))));
        }
        let mut seen = BTreeSet::new();
        let mut records = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let line = i + 1;
            let row = row.map_err(csv_err(path))?;
            let wsi_id = row[0].to_string();
            if wsi_id.is_empty() {
                return Err(bad(line, "empty wsi_id".into()));
            }
            if !seen.insert(wsi_id.clone()) {
                return Err(bad(line, format!("duplicate wsi_id {wsi_id}")));
            }
            let labels = RawLabels::parse([&row[3], &row[4], &row[5], &row[6], &row[7], &row[8]]).map_err(|e| bad(line, e.to_string()))?;
            let split = row[9].parse().map_err(|e| bad(line, e))?;
            for file in [&row[1], &row[2]] {
                if !file.is_empty() && !base.join(file).is_file() {
                    return Err(bad(line, format!("{wsi_id}: missing file {file}")));
                }
            }
            records.push(Record { wsi_id, image: row[1].into(), mask: row[2].into(), labels, split });
        }
        Ok(Self { base, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
        w.write_record(HEADER).map_err(csv_err(path))?;
        for r in &self.records {
            let t = r.labels.tokens();
            w.write_record([r.wsi_id.as_str(), &r.image, &r.mask, t[0], t[1], t[2], t[3], t[4], t[5], r.split.name()])
                .map_err(csv_err(path))?;
        }
        w.flush().map_err(io(path))
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == split)
    }
}
