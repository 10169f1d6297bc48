//! The dataset manifest: one row per scan with its partition and label.
//!
//! The file is comma-separated text with columns `scan_id,partition,label`,
//! one row per scan, optionally preceded by a header row. `partition` is one
//! of `train`, `validation`, `test`; `label` is one of the six categories or
//! `unlabeled`. Rows ending in `\r` (spreadsheet exports) are accepted.
//! Duplicate scan ids keep the first occurrence; later rows are dropped with
//! a warning.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::loss::CategoryLabel;

/// Which split of the dataset a scan belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Validation => "validation",
            Partition::Test => "test",
        }
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Partition::Train),
            "validation" => Ok(Partition::Validation),
            "test" => Ok(Partition::Test),
            other => Err(format!("unknown partition {other:?}")),
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The six annotation categories scans are stratified over.
///
/// `PositiveUnknown` marks a scan known to be positive whose severity was
/// never graded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Negative,
    Mild,
    Moderate,
    Severe,
    Critical,
    PositiveUnknown,
}

impl Category {
    /// All categories in their canonical order.
    pub const ALL: [Category; 6] = [
        Category::Negative,
        Category::Mild,
        Category::Moderate,
        Category::Severe,
        Category::Critical,
        Category::PositiveUnknown,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Negative => "negative",
            Category::Mild => "mild",
            Category::Moderate => "moderate",
            Category::Severe => "severe",
            Category::Critical => "critical",
            Category::PositiveUnknown => "positive_unknown",
        }
    }

    /// The matching loss-side label: class index for the five graded classes
    /// (negative is class 0), or the positive-unknown marker.
    pub fn to_loss_label(&self) -> CategoryLabel {
        match self {
            Category::Negative => CategoryLabel::Full(0),
            Category::Mild => CategoryLabel::Full(1),
            Category::Moderate => CategoryLabel::Full(2),
            Category::Severe => CategoryLabel::Full(3),
            Category::Critical => CategoryLabel::Full(4),
            Category::PositiveUnknown => CategoryLabel::PositiveUnknown,
        }
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "negative" => Ok(Category::Negative),
            "mild" => Ok(Category::Mild),
            "moderate" => Ok(Category::Moderate),
            "severe" => Ok(Category::Severe),
            "critical" => Ok(Category::Critical),
            "positive_unknown" => Ok(Category::PositiveUnknown),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One manifest row. `label` is `None` for unlabeled scans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanRecord {
    pub scan_id: String,
    pub partition: Partition,
    pub label: Option<Category>,
}

const HEADER: &str = "scan_id,partition,label";

/// Reads a manifest, dropping duplicate scan ids (first occurrence wins).
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ScanRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut duplicates = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        let lineno = idx + 1;
        if line.is_empty() || (lineno == 1 && line == HEADER) {
            continue;
        }
        let parse = |msg: String| Error::Parse {
            path: path.into(),
            line: lineno,
            msg,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse(format!("expected 3 fields, found {}", fields.len())));
        }
        let scan_id = fields[0].trim();
        if scan_id.is_empty() {
            return Err(parse("empty scan_id".into()));
        }
        let partition = Partition::from_str(fields[1].trim()).map_err(parse)?;
        let label = match fields[2].trim() {
            "unlabeled" => None,
            other => Some(Category::from_str(other).map_err(parse)?),
        };
        if !seen.insert(scan_id.to_string()) {
            duplicates += 1;
            continue;
        }
        records.push(ScanRecord {
            scan_id: scan_id.to_string(),
            partition,
            label,
        });
    }
    if duplicates > 0 {
        log::warn!("{}: dropped {duplicates} duplicate scan_id row(s), first occurrence kept", path.display());
    }
    Ok(records)
}

/// Writes a manifest with a header row.
pub fn write_manifest(path: impl AsRef<Path>, records: &[ScanRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let res = (|| {
        writeln!(out, "{HEADER}")?;
        for r in records {
            let label = r.label.map_or("unlabeled", |c| c.as_str());
            writeln!(out, "{},{},{}", r.scan_id, r.partition, label)?;
        }
        out.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn rec(id: &str, partition: Partition, label: Option<Category>) -> ScanRecord {
        ScanRecord {
            scan_id: id.into(),
            partition,
            label,
        }
    }

    #[test]
    fn round_trips_every_label() {
        let dir = tmp();
        let path = dir.path().join("manifest.csv");
        let mut records: Vec<ScanRecord> = Category::ALL
            .iter()
            .enumerate()
            .map(|(i, &c)| rec(&format!("scan_{i}"), Partition::Train, Some(c)))
            .collect();
        records.push(rec("scan_t", Partition::Test, None));
        records.push(rec("scan_v", Partition::Validation, Some(Category::Mild)));
        write_manifest(&path, &records).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn accepts_headerless_and_crlf_input() {
        let dir = tmp();
        let path = dir.path().join("manifest.csv");
        std::fs::write(&path, "a,train,negative\r\nb,validation,unlabeled\r\n").unwrap();
        let records = read_manifest(&path).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].scan_id, "a");
        assert_eq!(records[0].label, Some(Category::Negative));
        assert_eq!(records[1].partition, Partition::Validation);
        assert_eq!(records[1].label, None);
    }

    #[test]
    fn reports_unknown_label_with_line_number() {
        let dir = tmp();
        let path = dir.path().join("manifest.csv");
        std::fs::write(&path, "scan_id,partition,label\na,train,negative\nb,train,bogus\n")
            .unwrap();
        match read_manifest(&path) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("bogus"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn reports_wrong_field_count_with_line_number() {
        let dir = tmp();
        let path = dir.path().join("manifest.csv");
        std::fs::write(&path, "a,train\n").unwrap();
        match read_manifest(&path) {
            Err(Error::Parse { line: 1, msg, .. }) => assert!(msg.contains("3 fields")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_scan_ids_keep_first_occurrence() {
        let dir = tmp();
        let path = dir.path().join("manifest.csv");
        std::fs::write(&path, "a,train,negative\na,train,mild\nb,train,severe\n").unwrap();
        let records = read_manifest(&path).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].label, Some(Category::Negative));
    }

    #[test]
    fn category_loss_labels_line_up_with_class_indices() {
        use crate::loss::CategoryLabel;
        assert_eq!(Category::Negative.to_loss_label(), CategoryLabel::Full(0));
        assert_eq!(Category::Critical.to_loss_label(), CategoryLabel::Full(4));
        assert_eq!(
            Category::PositiveUnknown.to_loss_label(),
            CategoryLabel::PositiveUnknown
        );
    }
}
