//! Reproducible labelled/unlabelled/test splits.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::VideoRecord;
use crate::error::{Error, Result};
use crate::rng::{mix, stream_rng, streams};

/// Disjoint id sets: labelled `V`, unlabelled `U`, held-out test `W`, plus
/// the seed that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub labelled: Vec<String>,
    pub unlabelled: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

/// Splits into 80% train / 20% test by seeded shuffle, then draws
/// `labelled_count` ids uniformly from the training partition to form the
/// labelled set; the remaining training ids form the unlabelled set. Their
/// labels, if present in the source data, stay available only for
/// diagnostics.
pub fn make_split(
    records: &[VideoRecord],
    labelled_count: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    if records.is_empty() {
        return Err(Error::Split("no records to split".into()));
    }
    let n = records.len();
    let n_test = (0.2 * n as f64).round() as usize;
    let n_train = n - n_test;
    if labelled_count > n_train {
        return Err(Error::Split(format!(
            "labelled_count {labelled_count} exceeds training partition size {n_train}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, streams::SPLIT));
    let (test_idx, train_idx) = order.split_at(n_test);

    let mut train: Vec<usize> = train_idx.to_vec();
    train.shuffle(&mut stream_rng(mix(&[seed]), streams::SPLIT_LABELLED));
    let (labelled_idx, unlabelled_idx) = train.split_at(labelled_count);

    for &i in labelled_idx {
        if !records[i].is_labelled() {
            return Err(Error::Split(format!(
                "sampled labelled id `{}` lacks a mos label",
                records[i].id
            )));
        }
    }

    let ids = |idx: &[usize]| idx.iter().map(|&i| records[i].id.clone()).collect();
    Ok(DatasetSplit {
        labelled: ids(labelled_idx),
        unlabelled: ids(unlabelled_idx),
        test: ids(test_idx),
        seed,
    })
}

/// Resolved view of a split that trainers and evaluators consume. Labels are
/// exposed only for the labelled set.
#[derive(Debug, Clone)]
pub struct SplitData<'a> {
    pub labelled: Vec<(&'a VideoRecord, f64)>,
    pub unlabelled: Vec<&'a VideoRecord>,
    pub test: Vec<&'a VideoRecord>,
}

impl<'a> SplitData<'a> {
    pub fn resolve(records: &'a [VideoRecord], split: &DatasetSplit) -> Result<Self> {
        let lookup: std::collections::HashMap<&str, &VideoRecord> =
            records.iter().map(|r| (r.id.as_str(), r)).collect();
        let find = |id: &String| -> Result<&'a VideoRecord> {
            lookup
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Split(format!("split references unknown id `{id}`")))
        };

        let mut labelled = Vec::with_capacity(split.labelled.len());
        for id in &split.labelled {
            let rec = find(id)?;
            let mos = rec
                .diagnostic_mos()
                .ok_or_else(|| Error::Split(format!("labelled id `{id}` lacks a mos label")))?;
            labelled.push((rec, mos));
        }
        let unlabelled = split.unlabelled.iter().map(find).collect::<Result<_>>()?;
        let test = split.test.iter().map(find).collect::<Result<_>>()?;
        Ok(SplitData {
            labelled,
            unlabelled,
            test,
        })
    }
}

pub fn assert_partition(split: &DatasetSplit, total: usize) -> bool {
    let mut seen: HashSet<&String> = HashSet::new();
    for id in split
        .labelled
        .iter()
        .chain(&split.unlabelled)
        .chain(&split.test)
    {
        if !seen.insert(id) {
            return false;
        }
    }
    seen.len() == total
}
