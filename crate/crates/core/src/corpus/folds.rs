//! Deterministic fold plans for cross-validation.

use std::collections::BTreeMap;

use super::{CorpusError, PunInstance};
use crate::num::Rng;

/// Partition of the corpus into `k` folds whose sizes differ by at most one.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, text_id: &str) -> Option<usize> {
        self.assignment.get(text_id).copied()
    }

    /// Indices of `instances` inside and outside fold `fold`.
    pub fn split<'a>(
        &self,
        instances: &'a [PunInstance],
        fold: usize,
    ) -> (Vec<&'a PunInstance>, Vec<&'a PunInstance>) {
        let mut test = Vec::new();
        let mut train = Vec::new();
        for inst in instances {
            if self.assignment.get(&inst.text_id) == Some(&fold) {
                test.push(inst);
            } else {
                train.push(inst);
            }
        }
        (train, test)
    }
}

/// Shuffle text ids with the seed, then deal them round-robin into `k`
/// folds. The same seed always produces the same plan.
pub fn make_folds(instances: &[PunInstance], k: usize, seed: u64) -> Result<FoldPlan, CorpusError> {
    if k == 0 || k > instances.len() {
        return Err(CorpusError::Config(format!(
            "fold count {k} is not in 1..={}",
            instances.len()
        )));
    }
    let mut ids: Vec<&str> = instances.iter().map(|i| i.text_id.as_str()).collect();
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut ids);
    let assignment = ids
        .iter()
        .enumerate()
        .map(|(pos, id)| (id.to_string(), pos % k))
        .collect();
    Ok(FoldPlan { k, assignment })
}
