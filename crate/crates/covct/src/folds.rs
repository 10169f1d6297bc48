//! Stratified cross-validation fold assignment.
//!
//! Five folds. Fold 0 is always exactly the validation partition of the
//! manifest, independent of the seed, so every assignment shares the same
//! held-out set. Training scans are dealt into folds 1 through 4: for each
//! category (in canonical order) the scan ids are collected in manifest
//! order, shuffled once with a seeded generator, and dealt round-robin. The
//! deal keeps per-category fold sizes within one of each other. Test scans
//! are left out entirely.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifest::{Category, Partition, ScanRecord};

/// Total number of folds, including the fixed validation fold 0.
pub const FOLD_COUNT: u32 = 5;

/// A scan-id to fold-index map.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FoldAssignment {
    map: BTreeMap<String, u32>,
}

impl FoldAssignment {
    pub fn fold_of(&self, scan_id: &str) -> Option<u32> {
        self.map.get(scan_id).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Entries in ascending scan-id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.map.iter().map(|(id, &fold)| (id.as_str(), fold))
    }

    /// Number of scans in each fold.
    pub fn fold_sizes(&self) -> [usize; FOLD_COUNT as usize] {
        let mut sizes = [0usize; FOLD_COUNT as usize];
        for &fold in self.map.values() {
            sizes[fold as usize] += 1;
        }
        sizes
    }
}

/// Assigns folds to the train and validation scans of a manifest.
///
/// Validation scans land on fold 0 regardless of `seed` (labels optional
/// there). Every training scan must carry a category label; a repeated scan
/// id anywhere in the manifest is an error.
pub fn make_folds(records: &[ScanRecord], seed: u64) -> Result<FoldAssignment> {
    let mut map = BTreeMap::new();
    let mut seen: HashSet<&str> = HashSet::with_capacity(records.len());
    let mut per_category: BTreeMap<Category, Vec<&str>> = BTreeMap::new();

    for record in records {
        if !seen.insert(&record.scan_id) {
            return Err(Error::DuplicateScanId {
                scan_id: record.scan_id.clone(),
            });
        }
        match record.partition {
            Partition::Validation => {
                map.insert(record.scan_id.clone(), 0);
            }
            Partition::Test => {}
            Partition::Train => {
                let category = record.label.ok_or_else(|| Error::MissingCategory {
                    scan_id: record.scan_id.clone(),
                })?;
                per_category.entry(category).or_default().push(&record.scan_id);
            }
        }
    }

    // One generator drives every shuffle, categories always in the same
    // order, so the whole assignment is a function of (records, seed).
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_folds = FOLD_COUNT as usize - 1;
    for category in Category::ALL {
        let Some(ids) = per_category.get_mut(&category) else {
            continue;
        };
        ids.shuffle(&mut rng);
        for (k, id) in ids.iter().enumerate() {
            map.insert((*id).to_string(), 1 + (k % train_folds) as u32);
        }
    }

    Ok(FoldAssignment { map })
}

/// Writes `scan_id,fold` rows in ascending scan-id order.
pub fn write_fold_file(path: &Path, assignment: &FoldAssignment) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "scan_id,fold")?;
        for (id, fold) in assignment.iter() {
            writeln!(out, "{id},{fold}")?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}
