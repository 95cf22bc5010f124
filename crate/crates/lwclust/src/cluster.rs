//! Cluster bookkeeping and the serial clustering algorithm.

use crate::dendrogram::{Dendrogram, Merge};
use crate::error::Error;
use crate::linkage::{coefficients_unchecked, lw_update, LinkageScheme};
use crate::matrix::{index_unchecked, min_value, CondensedMatrix};

/// Sizes, liveness and merge-list labels of the clusters during a run.
///
/// Row slot `s` (an original item index) stands for the cluster currently
/// stored in row/column `s` of the matrix. When slots `i < j` merge, the
/// union keeps slot `i` and slot `j` retires for the rest of the run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterState {
    items: usize,
    sizes: Vec<usize>,
    alive: Vec<bool>,
    labels: Vec<usize>,
    active: usize,
}

impl ClusterState {
    pub fn new(items: usize) -> Self {
        ClusterState {
            items,
            sizes: vec![1; items],
            alive: vec![true; items],
            labels: (0..items).collect(),
            active: items,
        }
    }

    pub fn items(&self) -> usize {
        self.items
    }

    /// Number of clusters still active.
    pub fn active_clusters(&self) -> usize {
        self.active
    }

    pub fn is_alive(&self, slot: usize) -> bool {
        self.alive[slot]
    }

    /// Member count of the cluster in `slot`.
    pub fn size(&self, slot: usize) -> usize {
        self.sizes[slot]
    }

    /// Merge-list id of the cluster in `slot`.
    pub fn label(&self, slot: usize) -> usize {
        self.labels[slot]
    }

    pub fn alive_slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter_map(|(slot, &alive)| alive.then_some(slot))
    }

    /// Total members across active clusters; equals `items` at all times.
    pub fn total_active_size(&self) -> usize {
        self.alive_slots().map(|slot| self.sizes[slot]).sum()
    }

    /// Retires slot `j` into slot `i` and returns the merge record. `step`
    /// is the 0-based merge index, so the union gets id `items + step`.
    pub fn merge(&mut self, i: usize, j: usize, step: usize, height: f64) -> Merge {
        debug_assert!(i < j && self.alive[i] && self.alive[j]);
        let record = Merge {
            left: self.labels[i].min(self.labels[j]),
            right: self.labels[i].max(self.labels[j]),
            height,
            size: self.sizes[i] + self.sizes[j],
        };
        self.sizes[i] += self.sizes[j];
        self.alive[j] = false;
        self.labels[i] = self.items + step;
        self.active -= 1;
        record
    }
}

/// Serial agglomerative clustering: n-1 iterations, each selecting the
/// globally minimal alive cell, recording the merge, retiring row `j` and
/// rewriting row `i` through the update recurrence.
///
/// Ties on the minimum go to the lexicographically smallest `(i, j)` pair.
/// This is the reference the distributed engine must reproduce bitwise, and
/// the fast path for single-worker runs.
pub fn serial_cluster(matrix: &CondensedMatrix, scheme: LinkageScheme) -> Dendrogram {
    let n = matrix.items();
    let mut cells = matrix.clone();
    let mut state = ClusterState::new(n);
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let (i, j, gmin) = min_alive_cell(&cells, &state).expect("alive cells remain");

        // Rewrite row i: distances from every other live cluster to the union.
        for k in state.alive_slots() {
            if k == i || k == j {
                continue;
            }
            let off_ki = index_unchecked(k.min(i), k.max(i), n);
            let off_kj = index_unchecked(k.min(j), k.max(j), n);
            let coefficients =
                coefficients_unchecked(scheme, state.size(i), state.size(j), state.size(k));
            let updated = lw_update(cells.cell(off_ki), cells.cell(off_kj), gmin, &coefficients);
            cells.set_cell(off_ki, updated);
        }
        // Retire row j: every cell pairing j with a live slot dies, including
        // the merged cell {i, j} itself.
        for k in state.alive_slots() {
            if k == j {
                continue;
            }
            cells.kill(index_unchecked(k.min(j), k.max(j), n));
        }
        merges.push(state.merge(i, j, step, gmin));
    }
    Dendrogram::from_run(n, merges)
}

/// Globally minimal alive cell in row-major order (which realizes the
/// lexicographic tie-break on `(i, j)`). Rows of retired clusters hold only
/// dead cells and are skipped without reading them.
fn min_alive_cell(cells: &CondensedMatrix, state: &ClusterState) -> Option<(usize, usize, f64)> {
    let n = cells.items();
    let mut best = f64::INFINITY;
    let mut best_row = usize::MAX;
    for i in 0..n.saturating_sub(1) {
        if !state.is_alive(i) {
            continue;
        }
        let start = index_unchecked(i, i + 1, n);
        let end = index_unchecked(i, n - 1, n) + 1;
        let row_min = min_value(&cells.cells()[start..end]);
        if row_min < best {
            best = row_min;
            best_row = i;
        }
    }
    if !best.is_finite() {
        return None;
    }
    let start = index_unchecked(best_row, best_row + 1, n);
    let end = index_unchecked(best_row, n - 1, n) + 1;
    let position = cells.cells()[start..end]
        .iter()
        .position(|&cell| cell == best)
        .expect("minimum exists in winning row");
    Some((best_row, best_row + 1 + position, best))
}

/// Flat clustering of `dendrogram` into `k` groups.
///
/// Thin wrapper over [`Dendrogram::flat_clusters`], kept as a free function
/// for symmetry with [`serial_cluster`].
pub fn flat_clusters(dendrogram: &Dendrogram, k: usize) -> Result<Vec<Vec<usize>>, Error> {
    dendrogram.flat_clusters(k)
}
