/*!
Hierarchical agglomerative clustering built on the Lance-Williams update
recurrence, with two interchangeable execution paths:

* [`serial_cluster`] — the straightforward O(n³) algorithm over a condensed
  distance matrix; the reference implementation and single-worker fast path.
* [`run_distributed`] — the same algorithm executed by `p` message-passing
  workers, each owning a contiguous slice of the matrix. Workers find local
  minima, agree on the global minimum through a replicated reduction, and
  ship retired-row cells to the survivors' owners each iteration. Output is
  bitwise identical to the serial path for every scheme and worker count.

Six linkage schemes are supported through one coefficient table
([`LinkageScheme`]): single, complete, group average, weighted average,
centroid and Ward.

The crate ships a CLI (`lwclust`) with `cluster`, `cut` and `bench`
subcommands; see the repository README for the file formats.

# Example

```
use lwclust::{serial_cluster, CondensedMatrix, LinkageScheme};

// Three items: d(0,1) = 1, d(0,2) = 4, d(1,2) = 5.
let matrix = CondensedMatrix::new(3, vec![1.0, 4.0, 5.0]).unwrap();
let dendrogram = serial_cluster(&matrix, LinkageScheme::Complete);
let heights: Vec<f64> = dendrogram.merges().iter().map(|m| m.height).collect();
assert_eq!(heights, vec![1.0, 5.0]);
assert_eq!(dendrogram.flat_clusters(2).unwrap(), vec![vec![0, 1], vec![2]]);
```
*/

pub mod bench;
mod cluster;
mod dendrogram;
mod engine;
mod error;
pub mod io;
mod linkage;
mod matrix;
mod partition;
pub mod synth;
pub mod transport;

pub use cluster::{flat_clusters, serial_cluster, ClusterState};
pub use dendrogram::{Dendrogram, Merge};
pub use engine::{
    distribute_matrix, global_min_reduce, local_min_scan, run_distributed, EngineOptions,
    Execution, GlobalMin, IterationSnapshot, RunOutput, WorkerTrace,
};
pub use error::{Error, ProtocolError, TransportError};
pub use linkage::{lw_update, scheme_coefficients, LinkageCoefficients, LinkageScheme};
pub use matrix::{cell_count, condensed_index, pair_of, CondensedMatrix};
pub use partition::{build_partition, PartitionMap};
