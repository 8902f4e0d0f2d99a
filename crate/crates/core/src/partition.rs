//! Static assignment of A block rows to workers.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

/// Contiguous, disjoint block-row ranges, one per worker, covering all rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerPartition {
    ranges: Vec<Range<usize>>,
    weights: Vec<u64>,
}

impl WorkerPartition {
    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    /// Row weights the partition was computed from.
    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn workers(&self) -> usize {
        self.ranges.len()
    }

    /// Total weight assigned to each worker.
    pub fn worker_weights(&self) -> Vec<u64> {
        self.ranges
            .iter()
            .map(|r| self.weights[r.clone()].iter().sum())
            .collect()
    }

    pub fn owner_of(&self, row: usize) -> Option<usize> {
        self.ranges.iter().position(|r| r.contains(&row))
    }
}

/// Greedy prefix split: each worker takes rows until its weight reaches
/// `total / workers`; the last worker takes whatever remains. Workers beyond
/// the row count get empty ranges.
pub fn partition_rows(weights: &[u64], workers: usize) -> Result<WorkerPartition> {
    if workers == 0 {
        return Err(Error::param("worker count must be at least 1"));
    }
    let total: u128 = weights.iter().map(|&w| u128::from(w)).sum();
    let n = weights.len();
    let mut ranges = Vec::with_capacity(workers);
    let mut start = 0usize;
    for w in 0..workers {
        if w + 1 == workers {
            ranges.push(start..n);
            break;
        }
        let mut end = start;
        let mut acc: u128 = 0;
        while end < n {
            acc += u128::from(weights[end]);
            end += 1;
            if acc * workers as u128 >= total {
                break;
            }
        }
        ranges.push(start..end);
        start = end;
    }
    Ok(WorkerPartition {
        ranges,
        weights: weights.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn even_split() {
        let p = partition_rows(&[1, 1, 1, 1], 2).unwrap();
        assert_eq!(p.ranges(), &[0..2, 2..4]);
    }

    #[test]
    fn heavy_first_row() {
        let p = partition_rows(&[10, 1, 1, 1], 2).unwrap();
        assert_eq!(p.ranges(), &[0..1, 1..4]);
        assert_eq!(p.worker_weights(), vec![10, 3]);
    }

    #[test]
    fn more_workers_than_rows() {
        let p = partition_rows(&[3, 4], 4).unwrap();
        assert_eq!(p.ranges(), &[0..1, 1..2, 2..2, 2..2]);
    }

    #[test]
    fn single_worker_takes_all() {
        assert_eq!(partition_rows(&[5, 0, 2], 1).unwrap().ranges(), vec![Range { start: 0, end: 3 }]);
        assert_eq!(partition_rows(&[], 1).unwrap().ranges(), vec![Range { start: 0, end: 0 }]);
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(partition_rows(&[1], 0).is_err());
    }

    #[test]
    fn owner_lookup() {
        let p = partition_rows(&[1, 1, 1, 1], 2).unwrap();
        assert_eq!(p.owner_of(3), Some(1));
        assert_eq!(p.owner_of(4), None);
    }
}
