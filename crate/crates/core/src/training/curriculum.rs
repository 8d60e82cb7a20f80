use serde::{Deserialize, Serialize};

use crate::experiment::{Dataset, TokenizedCircuit};
use crate::models::GroupInput;

use super::TrainError;

/// Dataset indices of one model input, in order. The last group of a
/// partition repeats its own members to fill up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub indices: Vec<usize>,
}

impl Group {
    pub fn input(&self, dataset: &Dataset, tokens: &[TokenizedCircuit]) -> GroupInput {
        GroupInput {
            tokens: self.indices.iter().map(|&i| tokens[i].clone()).collect(),
            freqs: self.indices.iter().map(|&i| dataset.frequencies(i)).collect(),
        }
    }
}

/// Splits `indices` into ⌈n/group_size⌉ groups, filling the last one by
/// cycling through its own members.
pub fn group_indices(indices: &[usize], group_size: usize) -> Result<Vec<Group>, TrainError> {
    if indices.is_empty() {
        return Err(TrainError::Config("cannot group an empty dataset".into()));
    }
    if group_size == 0 {
        return Err(TrainError::Config("group_size must be at least 1".into()));
    }
    Ok(indices
        .chunks(group_size)
        .map(|chunk| Group { indices: (0..group_size).map(|k| chunk[k % chunk.len()]).collect() })
        .collect())
}

/// Groups of the whole dataset in its stored order.
pub fn group_dataset(dataset: &Dataset, group_size: usize) -> Result<Vec<Group>, TrainError> {
    group_indices(&(0..dataset.len()).collect::<Vec<_>>(), group_size)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub parts: Vec<Vec<usize>>,
    pub epochs_per_part: Vec<usize>,
    pub accumulative: bool,
}

impl CurriculumSchedule {
    /// Epoch (0-based) at which each part starts.
    pub fn part_starts(&self) -> Vec<usize> {
        self.epochs_per_part
            .iter()
            .scan(0, |acc, &e| {
                let start = *acc;
                *acc += e;
                Some(start)
            })
            .collect()
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs_per_part.iter().sum()
    }
}

/// Stable sort by gate count, then `epochs_per_part.len()` contiguous parts of
/// near-equal size (earlier parts take the remainder).
pub fn curriculum_partition(dataset: &Dataset, epochs_per_part: &[usize]) -> Result<CurriculumSchedule, TrainError> {
    let n_parts = epochs_per_part.len();
    if dataset.is_empty() {
        return Err(TrainError::Config("cannot partition an empty dataset".into()));
    }
    if n_parts == 0 || n_parts > dataset.len() {
        return Err(TrainError::Config(format!("{n_parts} parts for a dataset of {} circuits", dataset.len())));
    }
    if epochs_per_part.contains(&0) {
        return Err(TrainError::Config("every part needs at least one epoch".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by_key(|&i| dataset.circuits[i].len());
    let base = order.len() / n_parts;
    let extra = order.len() % n_parts;
    let mut parts = Vec::with_capacity(n_parts);
    let mut start = 0;
    for k in 0..n_parts {
        let len = base + usize::from(k < extra);
        parts.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(CurriculumSchedule { parts, epochs_per_part: epochs_per_part.to_vec(), accumulative: false })
}

/// One part holding the whole dataset, trained for `epochs`.
pub fn single_part(dataset: &Dataset, epochs: usize) -> Result<CurriculumSchedule, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::Config("cannot train on an empty dataset".into()));
    }
    Ok(CurriculumSchedule { parts: vec![(0..dataset.len()).collect()], epochs_per_part: vec![epochs], accumulative: false })
}
