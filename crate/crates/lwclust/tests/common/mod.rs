//! Shared oracles and generators for the integration tests.
//!
//! The clustering oracles work straight from the definitions on member
//! sets and the original pairwise distances, never through the update
//! recurrence, so they are independent of the implementation they check.

#![allow(dead_code)]

use std::collections::BTreeSet;

use lwclust::{CondensedMatrix, Dendrogram};

/// Expanded square view of a condensed matrix.
pub fn to_square(matrix: &CondensedMatrix) -> Vec<Vec<f64>> {
    let n = matrix.items();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { matrix.distance(i, j) }).collect())
        .collect()
}

/// Set-level inter-cluster distance definitions.
#[derive(Clone, Copy, Debug)]
pub enum SetRule {
    /// Distance between the closest members.
    ClosestMembers,
    /// Distance between the furthest members.
    FurthestMembers,
    /// Mean over all member pairs.
    MeanOverPairs,
}

impl SetRule {
    fn between(self, square: &[Vec<f64>], a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
        let pairs = a.iter().flat_map(|&x| b.iter().map(move |&y| square[x][y]));
        match self {
            SetRule::ClosestMembers => pairs.fold(f64::INFINITY, f64::min),
            SetRule::FurthestMembers => pairs.fold(f64::NEG_INFINITY, f64::max),
            SetRule::MeanOverPairs => {
                let mut total = 0.0;
                let mut count = 0usize;
                for d in pairs {
                    total += d;
                    count += 1;
                }
                total / count as f64
            }
        }
    }
}

/// One oracle merge: the two member sets joined and the distance between
/// them at the time of joining.
#[derive(Clone, Debug)]
pub struct OracleMerge {
    pub first: BTreeSet<usize>,
    pub second: BTreeSet<usize>,
    pub height: f64,
}

/// Brute-force agglomerative clustering from the definition: keep explicit
/// member sets, measure inter-cluster distance with `rule` over the original
/// matrix, and always join the closest pair (ties by smallest member ids).
pub fn brute_force_linkage(square: &[Vec<f64>], rule: SetRule) -> Vec<OracleMerge> {
    let n = square.len();
    let mut clusters: Vec<BTreeSet<usize>> =
        (0..n).map(|item| BTreeSet::from([item])).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let d = rule.between(square, &clusters[a], &clusters[b]);
                let key = (
                    d,
                    *clusters[a].first().expect("non-empty cluster"),
                    *clusters[b].first().expect("non-empty cluster"),
                );
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        let best_key = (
                            bd,
                            *clusters[bi].first().unwrap(),
                            *clusters[bj].first().unwrap(),
                        );
                        (key.0, key.1.min(key.2), key.1.max(key.2))
                            < (best_key.0, best_key.1.min(best_key.2), best_key.1.max(best_key.2))
                    }
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (height, a, b) = best.expect("at least two clusters");
        let second = clusters.remove(b);
        let first = clusters.remove(a);
        let mut union = first.clone();
        union.extend(second.iter().copied());
        merges.push(OracleMerge { first, second, height });
        clusters.push(union);
    }
    merges
}

/// The member sets joined by each merge of a dendrogram, in merge order.
pub fn merge_member_sets(d: &Dendrogram) -> Vec<OracleMerge> {
    let n = d.items();
    let mut members: Vec<BTreeSet<usize>> = (0..n).map(|item| BTreeSet::from([item])).collect();
    let mut out = Vec::new();
    for merge in d.merges() {
        let first = members[merge.left].clone();
        let second = members[merge.right].clone();
        let mut union = first.clone();
        union.extend(second.iter().copied());
        members.push(union);
        out.push(OracleMerge { first, second, height: merge.height });
    }
    out
}

/// Checks a dendrogram against an oracle merge sequence: identical member
/// partitions per step (unordered), heights within `tolerance` relative.
pub fn assert_matches_oracle(d: &Dendrogram, oracle: &[OracleMerge], tolerance: f64) {
    let actual = merge_member_sets(d);
    assert_eq!(actual.len(), oracle.len(), "merge counts differ");
    for (step, (got, want)) in actual.iter().zip(oracle).enumerate() {
        let got_pair = normalized_pair(got);
        let want_pair = normalized_pair(want);
        assert_eq!(got_pair, want_pair, "merge {step} joins different clusters");
        assert!(
            relative_eq(got.height, want.height, tolerance),
            "merge {step} height {} differs from oracle {}",
            got.height,
            want.height,
        );
    }
}

fn normalized_pair(merge: &OracleMerge) -> (BTreeSet<usize>, BTreeSet<usize>) {
    if merge.first.first() <= merge.second.first() {
        (merge.first.clone(), merge.second.clone())
    } else {
        (merge.second.clone(), merge.first.clone())
    }
}

pub fn relative_eq(a: f64, b: f64, tolerance: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tolerance * a.abs().max(b.abs()).max(1e-300)
}

/// Sorted edge weights of the minimum spanning tree of the complete distance
/// graph (Prim's algorithm).
pub fn mst_edge_weights(square: &[Vec<f64>]) -> Vec<f64> {
    let n = square.len();
    if n == 0 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    in_tree[0] = true;
    best[1..n].copy_from_slice(&square[0][1..n]);
    let mut weights = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].partial_cmp(&best[b]).expect("finite distances"))
            .expect("vertices remain");
        weights.push(best[next]);
        in_tree[next] = true;
        for j in 0..n {
            if !in_tree[j] && square[next][j] < best[j] {
                best[j] = square[next][j];
            }
        }
    }
    weights.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    weights
}

/// Uniform random matrix with all pairwise distances distinct (retries the
/// seed; uniform doubles collide essentially never).
pub fn distinct_uniform(items: usize, seed: u64) -> CondensedMatrix {
    for attempt in 0..16 {
        let matrix = lwclust::synth::uniform_matrix(items, seed.wrapping_add(attempt * 0x9e37));
        let mut values: Vec<u64> = matrix.cells().iter().map(|d| d.to_bits()).collect();
        values.sort_unstable();
        values.dedup();
        if values.len() == matrix.cell_count() {
            return matrix;
        }
    }
    panic!("could not generate distinct distances for n = {items}");
}

/// Asserts two dendrograms are bitwise identical (ids, sizes, height bits).
pub fn assert_bitwise_equal(a: &Dendrogram, b: &Dendrogram, context: &str) {
    assert_eq!(a.items(), b.items(), "{context}: item counts differ");
    for (step, (x, y)) in a.merges().iter().zip(b.merges()).enumerate() {
        assert!(
            x.left == y.left
                && x.right == y.right
                && x.size == y.size
                && x.height.to_bits() == y.height.to_bits(),
            "{context}: merge {step} differs: {x:?} vs {y:?}",
        );
    }
    assert_eq!(a.digest(), b.digest(), "{context}: digests differ");
}
