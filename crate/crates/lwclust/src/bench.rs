//! Speedup benchmarking: wall time and message traffic versus worker count.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::dendrogram::Dendrogram;
use crate::engine::{run_distributed, EngineOptions, Execution};
use crate::error::Error;
use crate::linkage::LinkageScheme;
use crate::matrix::CondensedMatrix;
use crate::synth::uniform_matrix;
use crate::transport::InProcTransport;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    /// Synthetic problem sizes; ignored when an input matrix is supplied.
    pub sizes: Vec<usize>,
    pub scheme: LinkageScheme,
    pub procs: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
}

/// One `(n, p)` measurement.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub items: usize,
    pub procs: usize,
    pub scheme: LinkageScheme,
    pub repeats: usize,
    pub median_wall: Duration,
    pub broadcasts: u64,
    pub point_to_point: u64,
    pub max_iteration_broadcasts: u64,
    pub max_iteration_point_to_point: u64,
    /// Dendrogram digest; identical across repeats and worker counts.
    pub digest: String,
}

/// Runs the benchmark grid. Every repeat runs the threaded engine on a fresh
/// transport; times vary, dendrograms must not (a digest mismatch across
/// repeats is reported as a protocol error).
pub fn run_bench(
    config: &BenchConfig,
    input: Option<&CondensedMatrix>,
) -> Result<Vec<BenchRow>, Error> {
    let mut rows = Vec::new();
    let sizes: Vec<usize> = match input {
        Some(matrix) => vec![matrix.items()],
        None => config.sizes.clone(),
    };
    for &items in &sizes {
        let synthetic;
        let matrix = match input {
            Some(matrix) => matrix,
            None => {
                synthetic = uniform_matrix(items, config.seed);
                &synthetic
            }
        };
        for &procs in &config.procs {
            rows.push(measure(matrix, config.scheme, procs, config.repeats)?);
        }
    }
    Ok(rows)
}

fn measure(
    matrix: &CondensedMatrix,
    scheme: LinkageScheme,
    procs: usize,
    repeats: usize,
) -> Result<BenchRow, Error> {
    let options = EngineOptions { execution: Execution::Threaded, trace: false };
    let mut times = Vec::with_capacity(repeats.max(1));
    let mut reference: Option<(Dendrogram, BenchRow)> = None;
    for _ in 0..repeats.max(1) {
        let transport = InProcTransport::new(procs);
        let start = Instant::now();
        let output = run_distributed(matrix, scheme, &transport, &options)?;
        times.push(start.elapsed());

        let (max_broadcasts, max_p2p) = output.counters.per_iteration[1..]
            .iter()
            .fold((0, 0), |(b, p), it| (b.max(it.broadcasts), p.max(it.point_to_point)));
        let row = BenchRow {
            items: matrix.items(),
            procs,
            scheme,
            repeats: repeats.max(1),
            median_wall: Duration::ZERO,
            broadcasts: output.counters.broadcasts,
            point_to_point: output.counters.point_to_point,
            max_iteration_broadcasts: max_broadcasts,
            max_iteration_point_to_point: max_p2p,
            digest: output.dendrogram.digest(),
        };
        match &reference {
            None => reference = Some((output.dendrogram, row)),
            Some((dendrogram, first)) => {
                if *dendrogram != output.dendrogram || first.digest != row.digest {
                    return Err(crate::error::ProtocolError::UnexpectedMessage {
                        iteration: 0,
                        rank: 0,
                        message: "dendrogram differed between repeats of the same run".to_string(),
                    }
                    .into());
                }
            }
        }
    }
    times.sort_unstable();
    let (_, mut row) = reference.expect("at least one repeat");
    row.median_wall = median(&times);
    Ok(row)
}

fn median(sorted: &[Duration]) -> Duration {
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2
    }
}

/// CSV rendering of the benchmark report. The header comment records the
/// timing methodology.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let repeats = rows.first().map_or(0, |row| row.repeats);
    let _ = writeln!(
        out,
        "# wall times are the median of {repeats} repeats, measured as elapsed wall-clock \
         seconds around the full run (distribution included); message counts are per full run"
    );
    out.push_str(
        "n,p,scheme,repeats,median_wall_seconds,broadcasts,point_to_point,\
         max_iteration_broadcasts,max_iteration_point_to_point,dendrogram_sha256\n",
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.items,
            row.procs,
            row.scheme,
            row.repeats,
            row.median_wall.as_secs_f64(),
            row.broadcasts,
            row.point_to_point,
            row.max_iteration_broadcasts,
            row.max_iteration_point_to_point,
            row.digest,
        );
    }
    out
}
