//! Decision rules, macro F1 scoring, and prediction-file IO.
//!
//! Predictions are five-way probability vectors; two decisions are read off
//! them. Presence: positive when the probability of any disease,
//! `1 - p[0]`, reaches the threshold. Severity: the argmax over the four
//! severity classes, ignoring `p[0]`, with ties broken toward the milder
//! class. Both tasks are scored with macro-averaged F1.

use std::collections::{btree_map, BTreeMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::loss::{ProbVector, NUM_CLASSES};
use crate::manifest::Category;

/// Default decision threshold for the presence task.
pub const DEFAULT_PRESENCE_THRESHOLD: f64 = 0.5;

/// Outcome of the binary presence decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Presence {
    Negative,
    Positive,
}

/// Positive if and only if `1 - p[0] >= threshold`.
pub fn presence_decision(probs: &ProbVector, threshold: f64) -> Presence {
    if 1.0 - probs[0] >= threshold {
        Presence::Positive
    } else {
        Presence::Negative
    }
}

/// Argmax over the severity entries `p[1..5]`, ties toward the lower index.
///
/// Panics if `probs` is not a five-class vector.
pub fn severity_decision(probs: &ProbVector) -> Category {
    assert_eq!(probs.len(), NUM_CLASSES, "severity needs five classes");
    let mut best = 1;
    for c in 2..NUM_CLASSES {
        if probs[c] > probs[best] {
            best = c;
        }
    }
    match best {
        1 => Category::Mild,
        2 => Category::Moderate,
        3 => Category::Severe,
        _ => Category::Critical,
    }
}

/// Macro-averaged F1 over the given class list.
///
/// Per class, `F1 = 2 TP / (2 TP + FP + FN)`; a class with an all-zero
/// denominator (never present in truth or predictions) scores 0 and logs a
/// warning. The macro score is the unweighted mean. Labels must be drawn
/// from `classes`, which must be non-empty and duplicate-free.
pub fn macro_f1<L: PartialEq>(truth: &[L], predictions: &[L], classes: &[L]) -> Result<f64> {
    assert!(!classes.is_empty(), "macro F1 needs at least one class");
    for (i, class) in classes.iter().enumerate() {
        assert!(
            !classes[..i].contains(class),
            "class list contains a duplicate at index {i}"
        );
    }
    if truth.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            truth: truth.len(),
            pred: predictions.len(),
        });
    }
    for (index, label) in truth.iter().enumerate() {
        if !classes.contains(label) {
            return Err(Error::UnknownClass { index });
        }
    }
    for (index, label) in predictions.iter().enumerate() {
        if !classes.contains(label) {
            return Err(Error::UnknownClass { index });
        }
    }

    let mut sum = 0.0;
    for class in classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (t, p) in truth.iter().zip(predictions) {
            match (t == class, p == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        let denominator = 2 * tp + fp + fn_;
        if denominator == 0 {
            log::warn!("class absent from truth and predictions; scoring it 0");
        } else {
            sum += 2.0 * tp as f64 / denominator as f64;
        }
    }
    Ok(sum / classes.len() as f64)
}

/// Per-scan probability vectors, ordered by scan id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    entries: BTreeMap<String, ProbVector>,
}

impl PredictionSet {
    pub fn new() -> Self {
        PredictionSet::default()
    }

    /// Inserts or replaces, returning any previous vector.
    pub fn insert(&mut self, scan_id: String, probs: ProbVector) -> Option<ProbVector> {
        self.entries.insert(scan_id, probs)
    }

    pub fn get(&self, scan_id: &str) -> Option<&ProbVector> {
        self.entries.get(scan_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending scan-id order.
    pub fn iter(&self) -> btree_map::Iter<'_, String, ProbVector> {
        self.entries.iter()
    }

    pub fn scan_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

const PREDICTION_HEADER: &str = "scan_id,p0,p1,p2,p3,p4";

/// Reads a prediction file: comma-separated, optional header, one scan per
/// row with five probabilities. Repeated scan ids and malformed rows are
/// reported with their line number.
pub fn read_predictions(path: &Path) -> Result<PredictionSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut set = PredictionSet::new();
    let parse_error = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: message,
    };
    for (number, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        let number = number + 1;
        if line.is_empty() || (number == 1 && line == PREDICTION_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 1 + NUM_CLASSES {
            return Err(parse_error(
                number,
                format!("expected {} fields, got {}", 1 + NUM_CLASSES, fields.len()),
            ));
        }
        let scan_id = fields[0].to_string();
        if scan_id.is_empty() {
            return Err(parse_error(number, "empty scan id".to_string()));
        }
        let mut probs = Vec::with_capacity(NUM_CLASSES);
        for field in &fields[1..] {
            let value: f64 = field
                .parse()
                .map_err(|e| parse_error(number, format!("bad probability {field:?}: {e}")))?;
            probs.push(value);
        }
        let probs = match ProbVector::new(probs) {
            Ok(p) => p,
            Err(Error::InvalidProbVector { reason }) => {
                return Err(parse_error(number, reason));
            }
            Err(other) => return Err(other),
        };
        if set.insert(scan_id.clone(), probs).is_some() {
            return Err(parse_error(number, format!("repeated scan id {scan_id:?}")));
        }
    }
    Ok(set)
}

/// Writes predictions with a header, sorted by scan id. Probabilities are
/// printed with 17 significant digits so a read-back reproduces the exact
/// f64 values and rewriting a file is byte-stable.
pub fn write_predictions(path: &Path, set: &PredictionSet) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "{PREDICTION_HEADER}")?;
        for (scan_id, probs) in set.iter() {
            write!(out, "{scan_id}")?;
            for &p in probs.iter() {
                write!(out, ",{p:.16e}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Element-wise mean over prediction sets covering identical scan ids.
pub fn ensemble_average(sets: &[PredictionSet]) -> Result<PredictionSet> {
    let Some(first) = sets.first() else {
        return Err(Error::EmptyEnsemble);
    };
    for other in &sets[1..] {
        if other.len() != first.len() {
            let example = first
                .scan_ids()
                .find(|id| other.get(id).is_none())
                .or_else(|| other.scan_ids().find(|id| first.get(id).is_none()))
                .unwrap_or_default()
                .to_string();
            return Err(Error::KeySetMismatch { example });
        }
        if let Some(id) = first.scan_ids().find(|id| other.get(id).is_none()) {
            return Err(Error::KeySetMismatch {
                example: id.to_string(),
            });
        }
    }
    let k = sets.len() as f64;
    let mut out = PredictionSet::new();
    for (scan_id, probs) in first.iter() {
        let mut sums = vec![0.0f64; probs.len()];
        for set in sets {
            let p = set.get(scan_id).expect("key sets verified equal");
            if p.len() != probs.len() {
                return Err(Error::InvalidProbVector {
                    reason: format!(
                        "scan {scan_id:?} has vectors of lengths {} and {}",
                        probs.len(),
                        p.len()
                    ),
                });
            }
            for (s, &v) in sums.iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for s in &mut sums {
            *s /= k;
        }
        out.insert(scan_id.clone(), ProbVector::new(sums)?);
    }
    Ok(out)
}
