//! Assignment of condensed-matrix cells to worker ranks.
//!
//! Cells are dealt out in row-major upper-triangle order as contiguous flat
//! ranges, one per rank. Splitting at cell granularity (rather than whole
//! rows) keeps every worker within one cell of the even share for all `n`
//! and `p`; when the share is uneven the lowest ranks take one extra cell.

use crate::error::Error;
use crate::matrix::{cell_count, condensed_index, index_unchecked};

/// Which rank owns which contiguous slice of the condensed matrix.
///
/// Immutable after construction and freely shareable across workers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionMap {
    items: usize,
    workers: usize,
    /// `workers + 1` non-decreasing flat offsets; rank `m` owns
    /// `boundaries[m]..boundaries[m + 1]`.
    boundaries: Vec<usize>,
}

/// Builds the cell partition for `n` items over `workers` ranks.
///
/// More workers than cells is legal: surplus ranks own empty ranges and
/// still take part in the protocol.
pub fn build_partition(items: usize, workers: usize) -> Result<PartitionMap, Error> {
    if workers == 0 {
        return Err(Error::NoWorkers);
    }
    let total = cell_count(items);
    let share = total / workers;
    let remainder = total % workers;
    let mut boundaries = Vec::with_capacity(workers + 1);
    let mut next = 0;
    boundaries.push(0);
    for rank in 0..workers {
        next += share + usize::from(rank < remainder);
        boundaries.push(next);
    }
    debug_assert_eq!(next, total);
    Ok(PartitionMap { items, workers, boundaries })
}

impl PartitionMap {
    pub fn items(&self) -> usize {
        self.items
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn total_cells(&self) -> usize {
        *self.boundaries.last().expect("non-empty boundaries")
    }

    /// The flat range owned by `rank`. Panics on an out-of-range rank.
    pub fn range(&self, rank: usize) -> std::ops::Range<usize> {
        assert!(rank < self.workers, "rank {rank} out of range for {} workers", self.workers);
        self.boundaries[rank]..self.boundaries[rank + 1]
    }

    /// Number of cells owned by `rank`.
    pub fn cells_of(&self, rank: usize) -> usize {
        let range = self.range(rank);
        range.end - range.start
    }

    /// The rank owning the cell for pair `{i, j}`.
    pub fn owner_of(&self, i: usize, j: usize) -> Result<usize, Error> {
        let offset = condensed_index(i, j, self.items)?;
        Ok(self.owner_of_offset(offset))
    }

    #[inline]
    pub(crate) fn owner_of_offset(&self, offset: usize) -> usize {
        debug_assert!(offset < self.total_cells());
        // partition_point skips any empty ranges sharing the boundary.
        self.boundaries.partition_point(|&start| start <= offset) - 1
    }

    /// Every cell owned by `rank` whose pair includes `cluster`, as
    /// `(partner, flat offset)` in ascending partner order.
    pub fn cells_touching(&self, rank: usize, cluster: usize) -> Vec<(usize, usize)> {
        assert!(cluster < self.items, "cluster {cluster} out of range for {} items", self.items);
        let range = self.range(rank);
        let mut touching = Vec::new();
        for partner in 0..self.items {
            if partner == cluster {
                continue;
            }
            let offset = index_unchecked(partner.min(cluster), partner.max(cluster), self.items);
            if range.contains(&offset) {
                touching.push((partner, offset));
            }
        }
        touching
    }
}
