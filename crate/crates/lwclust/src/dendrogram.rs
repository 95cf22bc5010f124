//! The merge-list dendrogram produced by clustering.

use sha2::{Digest, Sha256};

use crate::error::Error;

/// One agglomeration step.
///
/// Cluster ids follow the merge-list convention: leaves are `0..n-1` and the
/// k-th merge (0-based) creates id `n + k`. `left < right` always.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// The distance at which the two clusters merged.
    pub height: f64,
    /// Member count of the newly created cluster.
    pub size: usize,
}

/// An ordered list of `n - 1` merges over `n` items.
///
/// The list losslessly encodes every level of the cluster tree; cutting it
/// after `n - k` merges recovers the `k`-cluster level.
#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    items: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    /// Builds a dendrogram, validating the merge-list structure: ids in
    /// range, each cluster consumed at most once, sizes consistent.
    pub fn new(items: usize, merges: Vec<Merge>) -> Result<Self, Error> {
        let expected = items.saturating_sub(1);
        if merges.len() != expected {
            return Err(Error::InvalidMergeList {
                row: merges.len().min(expected),
                message: format!("{} merges for {} items; expected {}", merges.len(), items, expected),
            });
        }
        let mut sizes = vec![1usize; items + merges.len()];
        let mut consumed = vec![false; items + merges.len()];
        for (k, merge) in merges.iter().enumerate() {
            let created = items + k;
            let fail = |message: String| Error::InvalidMergeList { row: k, message };
            if merge.left >= merge.right {
                return Err(fail(format!("left id {} must be below right id {}", merge.left, merge.right)));
            }
            if merge.right >= created {
                return Err(fail(format!("cluster id {} does not exist yet", merge.right)));
            }
            if consumed[merge.left] || consumed[merge.right] {
                return Err(fail("cluster merged twice".to_string()));
            }
            if !merge.height.is_finite() {
                return Err(fail(format!("height {} is not finite", merge.height)));
            }
            let size = sizes[merge.left] + sizes[merge.right];
            if merge.size != size {
                return Err(fail(format!("size {} inconsistent with children ({size})", merge.size)));
            }
            consumed[merge.left] = true;
            consumed[merge.right] = true;
            sizes[created] = size;
        }
        Ok(Dendrogram { items, merges })
    }

    pub(crate) fn from_run(items: usize, merges: Vec<Merge>) -> Self {
        debug_assert_eq!(merges.len(), items.saturating_sub(1));
        Dendrogram { items, merges }
    }

    /// Number of original items (leaves).
    pub fn items(&self) -> usize {
        self.items
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    /// The groups present after cutting the tree down to `k` clusters,
    /// i.e. after applying the first `n - k` merges.
    ///
    /// Groups and their members are sorted ascending.
    pub fn flat_clusters(&self, k: usize) -> Result<Vec<Vec<usize>>, Error> {
        if k < 1 || k > self.items {
            return Err(Error::ClusterCountOutOfRange { k, n: self.items });
        }
        let applied = self.items - k;
        let mut groups: Vec<Option<Vec<usize>>> =
            (0..self.items).map(|item| Some(vec![item])).collect();
        groups.resize_with(self.items + applied, || None);
        for (step, merge) in self.merges[..applied].iter().enumerate() {
            let mut left = groups[merge.left].take().expect("validated merge list");
            let right = groups[merge.right].take().expect("validated merge list");
            left.extend(right);
            left.sort_unstable();
            groups[self.items + step] = Some(left);
        }
        let mut clusters: Vec<Vec<usize>> = groups.into_iter().flatten().collect();
        clusters.sort_unstable_by_key(|group| group[0]);
        debug_assert_eq!(clusters.len(), k);
        Ok(clusters)
    }

    /// Per-item cluster labels for the `k`-cluster level. Labels are
    /// `0..k-1` in order of first appearance by item id.
    pub fn cluster_labels(&self, k: usize) -> Result<Vec<usize>, Error> {
        let clusters = self.flat_clusters(k)?;
        let mut labels = vec![0usize; self.items];
        for (label, group) in clusters.iter().enumerate() {
            for &item in group {
                labels[item] = label;
            }
        }
        Ok(labels)
    }

    /// Hex SHA-256 over the canonical little-endian encoding of the merge
    /// list (ids, height bits, sizes). Two dendrograms share a digest exactly
    /// when they are bitwise identical.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.items as u64).to_le_bytes());
        for merge in &self.merges {
            hasher.update((merge.left as u64).to_le_bytes());
            hasher.update((merge.right as u64).to_le_bytes());
            hasher.update(merge.height.to_bits().to_le_bytes());
            hasher.update((merge.size as u64).to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}
