use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ImageSample;
use crate::error::{Error, Result};

/// Subjects whose images always go to the training side.
pub const PINNED_TRAIN_PATIENTS: [u32; 2] = [1, 2];
pub const TEST_FRACTION: f64 = 0.30;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Patient-grouped train/test split over per-sample patient ids.
///
/// Pinned patients go to train. The remaining distinct ids are sorted,
/// shuffled with the seed, and the first `max(1, floor(fraction·m))` of them
/// form the test side with all their samples.
pub fn split_patients(patient_ids: &[u32], seed: u64, test_fraction: f64) -> Result<SplitAssignment> {
    if patient_ids.is_empty() {
        return Err(Error::Split("empty dataset".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut others: Vec<u32> = patient_ids
        .iter()
        .copied()
        .filter(|p| !PINNED_TRAIN_PATIENTS.contains(p))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if others.is_empty() {
        return Err(Error::Split("no patients besides the pinned training subjects".into()));
    }
    others.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((test_fraction * others.len() as f64).floor() as usize).max(1);
    let test_patients: BTreeSet<u32> = others[..n_test].iter().copied().collect();
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..patient_ids.len()).partition(|&i| test_patients.contains(&patient_ids[i]));
    Ok(SplitAssignment { train, test, seed })
}

pub fn split(dataset: &[ImageSample], seed: u64, test_fraction: f64) -> Result<SplitAssignment> {
    let ids: Vec<u32> = dataset.iter().map(|s| s.patient_id).collect();
    split_patients(&ids, seed, test_fraction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(patients: impl IntoIterator<Item = u32>, per: usize) -> Vec<u32> {
        patients.into_iter().flat_map(|p| std::iter::repeat_n(p, per)).collect()
    }

    #[test]
    fn ten_other_patients_put_three_in_test() {
        let pids = ids(1..=12, 3);
        let s = split_patients(&pids, 5, TEST_FRACTION).unwrap();
        let test: BTreeSet<u32> = s.test.iter().map(|&i| pids[i]).collect();
        assert_eq!(test.len(), 3);
        assert_eq!(s.test.len(), 9);
        assert!(!test.contains(&1) && !test.contains(&2));
    }

    #[test]
    fn pinned_only_is_an_error() {
        assert!(matches!(split_patients(&ids([1, 2], 4), 0, 0.3), Err(Error::Split(_))));
        assert!(matches!(split_patients(&[], 0, 0.3), Err(Error::Split(_))));
    }

    #[test]
    fn small_pool_still_gets_one_test_patient() {
        let pids = ids([1, 2, 9], 2);
        let s = split_patients(&pids, 1, 0.3).unwrap();
        assert_eq!(s.test, vec![4, 5]);
    }

    #[test]
    fn seeds_are_reproducible_and_vary() {
        let pids = ids(1..=30, 2);
        let a = split_patients(&pids, 7, 0.3).unwrap();
        assert_eq!(a, split_patients(&pids, 7, 0.3).unwrap());
        let distinct: BTreeSet<Vec<usize>> = (0..10).map(|s| split_patients(&pids, s, 0.3).unwrap().test).collect();
        assert_eq!(distinct.len(), 10);
    }
}
