//! Seeded synthetic distance matrices for benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{cell_count, CondensedMatrix};

/// Uniform distances in `[0, 1)`. The same seed always yields the same
/// matrix, on every platform.
pub fn uniform_matrix(items: usize, seed: u64) -> CondensedMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (0..cell_count(items)).map(|_| rng.random::<f64>()).collect();
    CondensedMatrix::new(items, cells).expect("generated cells are valid")
}

/// Distances drawn from `{1, 2, .., levels}`, which forces ties: useful for
/// exercising the deterministic tie-break rules.
pub fn quantized_matrix(items: usize, seed: u64, levels: u32) -> CondensedMatrix {
    assert!(levels >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells =
        (0..cell_count(items)).map(|_| rng.random_range(1..=levels) as f64).collect();
    CondensedMatrix::new(items, cells).expect("generated cells are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        assert_eq!(uniform_matrix(12, 42), uniform_matrix(12, 42));
        assert_ne!(uniform_matrix(12, 42), uniform_matrix(12, 43));
    }

    #[test]
    fn quantized_values_are_small_integers() {
        let m = quantized_matrix(10, 7, 4);
        assert!(m.cells().iter().all(|&d| (1.0..=4.0).contains(&d) && d.fract() == 0.0));
        // With 45 cells over 4 levels there must be collisions.
        let mut values: Vec<u64> = m.cells().iter().map(|d| d.to_bits()).collect();
        values.sort_unstable();
        values.dedup();
        assert!(values.len() < m.cell_count());
    }
}
