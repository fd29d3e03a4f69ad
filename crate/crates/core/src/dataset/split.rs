use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    /// Share of non-test fingerprints that go to train; the rest is validation.
    pub train_ratio: f64,
    /// Fingerprints reserved for test before the train/validation split.
    pub test_count: usize,
    pub seed: u64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self { train_ratio: 0.9, test_count: 4000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub params: SplitParams,
    pub assignment: BTreeMap<String, Split>,
}

impl SplitManifest {
    pub fn get(&self, fingerprint: &str) -> Option<Split> {
        self.assignment.get(fingerprint).copied()
    }

    /// Fingerprints per split.
    pub fn counts(&self) -> BTreeMap<Split, usize> {
        let mut out: BTreeMap<Split, usize> = Split::ALL.iter().map(|&s| (s, 0)).collect();
        for s in self.assignment.values() {
            *out.get_mut(s).unwrap() += 1;
        }
        out
    }
}

/// Assigns whole fingerprints to splits.
///
/// Distinct fingerprints are sorted, shuffled with a seeded generator, the
/// first `test_count` reserved for test, and of the remaining `r`,
/// `round(train_ratio * r)` go to train and the rest to validation.
pub fn assign_splits<'a>(
    fingerprints: impl IntoIterator<Item = &'a str>,
    params: &SplitParams,
) -> Result<SplitManifest, DatasetError> {
    if !(0.0..=1.0).contains(&params.train_ratio) {
        return Err(DatasetError::Params(format!("train_ratio {} outside [0, 1]", params.train_ratio)));
    }
    let mut unique = BTreeSet::new();
    for fp in fingerprints {
        if fp.trim().is_empty() {
            return Err(DatasetError::MissingFingerprint);
        }
        unique.insert(fp);
    }
    let mut order: Vec<&str> = unique.into_iter().collect();
    if params.test_count > order.len() {
        return Err(DatasetError::TestReservation { wanted: params.test_count, available: order.len() });
    }
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let remaining = order.len() - params.test_count;
    let train = (params.train_ratio * remaining as f64).round() as usize;
    let assignment = order
        .into_iter()
        .enumerate()
        .map(|(i, fp)| {
            let split = if i < params.test_count {
                Split::Test
            } else if i < params.test_count + train {
                Split::Train
            } else {
                Split::Val
            };
            (fp.to_string(), split)
        })
        .collect();
    Ok(SplitManifest { params: params.clone(), assignment })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fps(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("fp{i:04}")).collect()
    }

    #[test]
    fn hundred_fingerprints_ten_reserved() {
        let f = fps(100);
        let m = assign_splits(f.iter().map(String::as_str), &SplitParams { train_ratio: 0.9, test_count: 10, seed: 1 })
            .unwrap();
        let c = m.counts();
        assert_eq!((c[&Split::Train], c[&Split::Val], c[&Split::Test]), (81, 9, 10));
    }

    #[test]
    fn variants_share_split_and_result_is_deterministic() {
        let f = fps(50);
        let with_dupes: Vec<&str> = f.iter().flat_map(|s| std::iter::repeat_n(s.as_str(), 6)).collect();
        let params = SplitParams { test_count: 5, seed: 77, ..Default::default() };
        let a = assign_splits(with_dupes.iter().copied(), &params).unwrap();
        let b = assign_splits(f.iter().rev().map(String::as_str), &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.assignment.len(), 50);
        let other = assign_splits(f.iter().map(String::as_str), &SplitParams { seed: 78, ..params }).unwrap();
        assert_ne!(a.assignment, other.assignment);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            assign_splits(["a", ""], &SplitParams { test_count: 0, ..Default::default() }),
            Err(DatasetError::MissingFingerprint)
        ));
        assert!(matches!(
            assign_splits(["a", "b"], &SplitParams::default()),
            Err(DatasetError::TestReservation { wanted: 4000, available: 2 })
        ));
    }
}
