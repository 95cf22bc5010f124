//! Condensed storage for symmetric distance matrices.
//!
//! Only the upper triangle (excluding the diagonal) is stored: `(n*n - n)/2`
//! cells laid out row by row, so pair `(i, j)` with `i < j` sits at flat
//! offset `i*n - i*(i+1)/2 + j - i - 1`.

use crate::error::Error;

/// Number of condensed cells for `n` items.
pub fn cell_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Flat offset of the unordered pair `{i, j}` in row-major upper-triangle
/// order. Requires `0 <= i < j < n`.
pub fn condensed_index(i: usize, j: usize, n: usize) -> Result<usize, Error> {
    if i >= j || j >= n {
        return Err(Error::InvalidPair { i, j, n });
    }
    Ok(index_unchecked(i, j, n))
}

#[inline(always)]
pub(crate) fn index_unchecked(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Inverse of [`condensed_index`]: the pair stored at `offset`.
pub fn pair_of(offset: usize, n: usize) -> Result<(usize, usize), Error> {
    if offset >= cell_count(n) {
        return Err(Error::OffsetOutOfRange { offset, n });
    }
    Ok(pair_unchecked(offset, n))
}

/// Minimum of a cell slice via four independent lanes; exact regardless of
/// association order, and dead cells (infinity) never win.
#[inline]
pub(crate) fn min_value(cells: &[f64]) -> f64 {
    let mut lanes = [f64::INFINITY; 4];
    let mut chunks = cells.chunks_exact(4);
    for chunk in &mut chunks {
        lanes[0] = lanes[0].min(chunk[0]);
        lanes[1] = lanes[1].min(chunk[1]);
        lanes[2] = lanes[2].min(chunk[2]);
        lanes[3] = lanes[3].min(chunk[3]);
    }
    let mut min = lanes[0].min(lanes[1]).min(lanes[2].min(lanes[3]));
    for &d in chunks.remainder() {
        min = min.min(d);
    }
    min
}

pub(crate) fn pair_unchecked(offset: usize, n: usize) -> (usize, usize) {
    debug_assert!(offset < cell_count(n));
    // Binary search for the row whose span contains the offset.
    let row_start = |i: usize| i * n - i * (i + 1) / 2;
    let mut lo = 0;
    let mut hi = n - 2;
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if row_start(mid) <= offset {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    (lo, offset - row_start(lo) + lo + 1)
}

/// An `n`-item distance matrix in condensed form.
///
/// Construction validates every cell: distances must be finite and
/// non-negative (NaN is rejected). During a clustering run the matrix also
/// tracks which cells are still in play: retiring a cluster tombstones every
/// cell touching it. Dead cells are stored as `f64::INFINITY`, which is
/// unambiguous because infinite distances are rejected at construction; it
/// also means minimum scans need no separate liveness check.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedMatrix {
    n: usize,
    cells: Vec<f64>,
}

impl CondensedMatrix {
    /// Builds a matrix from `n` and its `(n*n - n)/2` condensed cells.
    pub fn new(n: usize, mut cells: Vec<f64>) -> Result<Self, Error> {
        let expected = cell_count(n);
        if cells.len() != expected {
            return Err(Error::CellCountMismatch { got: cells.len(), expected, n });
        }
        for (offset, value) in cells.iter_mut().enumerate() {
            if !value.is_finite() || *value < 0.0 {
                let (i, j) = pair_unchecked(offset, n);
                return Err(Error::InvalidDistance { i, j, value: *value });
            }
            if *value == 0.0 {
                *value = 0.0; // normalize -0.0
            }
        }
        Ok(CondensedMatrix { n, cells })
    }

    /// Builds a matrix by evaluating `f(i, j)` for every pair `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, Error> {
        let mut cells = Vec::with_capacity(cell_count(n));
        for i in 0..n {
            for j in i + 1..n {
                cells.push(f(i, j));
            }
        }
        CondensedMatrix::new(n, cells)
    }

    /// Number of items (leaves), not cells.
    pub fn items(&self) -> usize {
        self.n
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Distance between items `i` and `j` (`i != j`, any order).
    ///
    /// Panics if the pair is out of range.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        assert!(i != j && b < self.n, "invalid pair ({i}, {j}) for {} items", self.n);
        self.cells[index_unchecked(a, b, self.n)]
    }

    /// True while the cell for `{i, j}` has not been tombstoned.
    pub fn is_alive(&self, i: usize, j: usize) -> bool {
        self.distance(i, j).is_finite()
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    #[inline]
    pub(crate) fn kill(&mut self, offset: usize) {
        self.cells[offset] = f64::INFINITY;
    }

    #[inline]
    pub(crate) fn cell(&self, offset: usize) -> f64 {
        self.cells[offset]
    }

    #[inline]
    pub(crate) fn set_cell(&mut self, offset: usize, value: f64) {
        self.cells[offset] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_matches_enumeration() {
        // Independent oracle: enumerate all pairs of n=8 in row-major order.
        let n = 8;
        let mut by_enumeration = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                by_enumeration.push((i, j));
            }
        }
        assert_eq!(by_enumeration.len(), 28);
        for (offset, &(i, j)) in by_enumeration.iter().enumerate() {
            assert_eq!(condensed_index(i, j, n).unwrap(), offset);
            assert_eq!(pair_of(offset, n).unwrap(), (i, j));
        }
        assert_eq!(condensed_index(0, 1, 8).unwrap(), 0);
        assert_eq!(condensed_index(6, 7, 8).unwrap(), 27);
        assert_eq!(by_enumeration[9], (1, 4));
        assert_eq!(condensed_index(1, 4, 8).unwrap(), 9);
    }

    #[test]
    fn index_rejects_bad_pairs() {
        assert!(matches!(condensed_index(3, 3, 8), Err(Error::InvalidPair { .. })));
        assert!(matches!(condensed_index(4, 2, 8), Err(Error::InvalidPair { .. })));
        assert!(matches!(condensed_index(0, 8, 8), Err(Error::InvalidPair { .. })));
        assert!(matches!(pair_of(28, 8), Err(Error::OffsetOutOfRange { .. })));
    }

    #[test]
    fn cell_count_edges() {
        assert_eq!(cell_count(0), 0);
        assert_eq!(cell_count(1), 0);
        assert_eq!(cell_count(2), 1);
        assert_eq!(cell_count(8), 28);
    }

    #[test]
    fn construction_validates_cells() {
        assert!(CondensedMatrix::new(3, vec![1.0, 2.0]).is_err());
        let err = CondensedMatrix::new(3, vec![1.0, f64::NAN, 2.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidDistance { i: 0, j: 2, .. }));
        let err = CondensedMatrix::new(3, vec![1.0, 2.0, -0.5]).unwrap_err();
        assert!(matches!(err, Error::InvalidDistance { i: 1, j: 2, .. }));
        assert!(CondensedMatrix::new(3, vec![1.0, 2.0, f64::INFINITY]).is_err());
        // Zero distances are legal.
        let m = CondensedMatrix::new(3, vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.distance(2, 0), 0.0);
        assert!(CondensedMatrix::new(0, vec![]).is_ok());
        assert!(CondensedMatrix::new(1, vec![]).is_ok());
    }

    #[test]
    fn negative_zero_is_normalized() {
        let m = CondensedMatrix::new(2, vec![-0.0]).unwrap();
        assert!(m.distance(0, 1).is_sign_positive());
    }

    #[test]
    fn distance_is_symmetric_access() {
        let m = CondensedMatrix::new(3, vec![1.0, 4.0, 5.0]).unwrap();
        assert_eq!(m.distance(0, 1), 1.0);
        assert_eq!(m.distance(1, 0), 1.0);
        assert_eq!(m.distance(2, 1), 5.0);
    }
}
