// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, SampleGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub benign: usize,
    pub malicious: usize,
}

impl ClassCounts {
    fn bump(&mut self, label: Label) {
        match label {
            Label::Benign => self.benign += 1,
            Label::Malicious => self.malicious += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.benign + self.malicious
    }
}

/// Stratified train/validation/test partition of sample ids. Computed once
/// on CFG samples and reused at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub train_counts: ClassCounts,
    pub val_counts: ClassCounts,
    pub test_counts: ClassCounts,
    pub train_fraction: f64,
    pub val_fraction_of_train: f64,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn all_ids(&self) -> impl Iterator<Item = &String> {
        self.train_ids
            .iter()
            .chain(&self.val_ids)
            .chain(&self.test_ids)
    }
}

/// Split per class: `round(train_fraction * n_c)` samples (clamped to leave
/// at least one for test) go to train, then `round(val_fraction_of_train *
/// n_train_c)` of those move to validation.
pub fn split_dataset(
    samples: &[SampleGraph],
    train_fraction: f64,
    val_fraction_of_train: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    for (name, f) in [
        ("train_fraction", train_fraction),
        ("val_fraction_of_train", val_fraction_of_train),
    ] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} must lie in (0,1), got {f}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = DatasetSplit {
        train_ids: vec![],
        val_ids: vec![],
        test_ids: vec![],
        train_counts: ClassCounts::default(),
        val_counts: ClassCounts::default(),
        test_counts: ClassCounts::default(),
        train_fraction,
        val_fraction_of_train,
        seed,
    };
    for label in [Label::Benign, Label::Malicious] {
        let mut ids: Vec<&str> = samples
            .iter()
            .filter(|g| g.label() == label)
            .map(SampleGraph::id)
            .collect();
        if ids.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {} has {} samples; at least 2 are required",
                label.name(),
                ids.len()
            )));
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let n = ids.len();
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let n_val = ((val_fraction_of_train * n_train as f64).round() as usize).min(n_train - 1);
        for (i, id) in ids.into_iter().enumerate() {
            let (bucket, counts) = if i < n_val {
                (&mut split.val_ids, &mut split.val_counts)
            } else if i < n_train {
                (&mut split.train_ids, &mut split.train_counts)
            } else {
                (&mut split.test_ids, &mut split.test_counts)
            };
            bucket.push(id.to_string());
            counts.bump(label);
        }
    }
    split.train_ids.sort();
    split.val_ids.sort();
    split.test_ids.sort();
    Ok(split)
}
