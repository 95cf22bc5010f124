//! The distributed clustering protocol.
//!
//! Each of the `p` workers owns a contiguous slice of the condensed matrix
//! and runs the same per-iteration round:
//!
//! 1. scan its alive cells for the local minimum;
//! 2. broadcast that local minimum;
//! 3. collect the `p` local minima;
//! 4. reduce them to the global minimum `(i, j)` — deterministic, so no
//!    further communication is needed to agree;
//! 5. the winning rank broadcasts the combine announcement (the iteration
//!    barrier; everyone checks it against their own reduction);
//! 6. owners of cells in the retired row `j` ship those distances to the
//!    owners of the matching survivor-row cells (self-sends elided, triples
//!    batched per destination), tombstone them, and the receivers rewrite
//!    row `i` through the update recurrence. All workers then apply the same
//!    size/label bookkeeping, so every replica stays identical.
//!
//! Workers are sequential state machines that interact only through the
//! transport; output depends on the matrix, scheme and worker count, never
//! on scheduling. The driver can interleave them on one thread (optionally
//! in seeded-random order) or run one OS thread per worker.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cluster::ClusterState;
use crate::dendrogram::{Dendrogram, Merge};
use crate::error::{Error, ProtocolError, TransportError};
use crate::linkage::{coefficients_unchecked, lw_update, LinkageScheme};
use crate::matrix::{index_unchecked, min_value, pair_unchecked, CondensedMatrix};
use crate::partition::{build_partition, PartitionMap};
use crate::transport::{
    Combine, Envelope, LocalMin, MatrixShard, MinCell, Rank, Transport, TrafficCounters, Triple,
    TripleList, TripleSide, WorkerMessage,
};

/// How the driver schedules the worker state machines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    /// All workers interleaved on the calling thread. With a seed, the sweep
    /// order is re-shuffled every pass (adversarial scheduling for tests);
    /// without one, workers are stepped round-robin.
    Polled { sweep_seed: Option<u64> },
    /// One OS thread per worker; the only mode where wall time shrinks with
    /// the worker count.
    Threaded,
}

#[derive(Clone, Copy, Debug)]
pub struct EngineOptions {
    pub execution: Execution,
    /// Record per-iteration replica snapshots for tests.
    pub trace: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { execution: Execution::Polled { sweep_seed: None }, trace: false }
    }
}

/// Result of a distributed run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dendrogram: Dendrogram,
    pub counters: TrafficCounters,
    pub trace: Option<Vec<WorkerTrace>>,
}

/// Everything one worker saw, when tracing is on.
#[derive(Clone, Debug)]
pub struct WorkerTrace {
    pub rank: Rank,
    /// The merge list this worker assembled locally (identical across ranks).
    pub dendrogram: Dendrogram,
    pub snapshots: Vec<IterationSnapshot>,
}

/// A worker's replica state at an iteration boundary.
#[derive(Clone, Debug)]
pub struct IterationSnapshot {
    /// 0 right after shard delivery, then the iteration just completed.
    pub iteration: usize,
    pub state: ClusterState,
    /// Global flat offsets of this worker's tombstoned cells.
    pub dead_cells: Vec<usize>,
    /// This worker's cell values (dead cells read as infinity).
    pub cells: Vec<f64>,
}

/// The agreed global minimum for one iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalMin {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub winner: Rank,
}

/// Minimum over a worker's cell slice, with the lexicographic pair
/// tie-break. `None` when no cell is alive (dead cells read as infinity).
pub fn local_min_scan(cells: &[f64], first_offset: usize, items: usize) -> Option<MinCell> {
    let value = min_value(cells);
    if !value.is_finite() {
        return None;
    }
    let position = cells.iter().position(|&d| d == value).expect("minimum exists");
    let (i, j) = pair_unchecked(first_offset + position, items);
    Some(MinCell { i, j, distance: cells[position] })
}

/// Deterministic reduction of the broadcast local minima: smallest distance
/// wins, ties broken by lexicographic pair, then by lowest rank. Sentinels
/// (workers with no alive cells) are skipped; all sentinels is a protocol
/// error. Every worker runs this on the same inputs and gets the same
/// answer, so the reduction needs no communication of its own.
pub fn global_min_reduce(iteration: usize, mins: &[LocalMin]) -> Result<GlobalMin, ProtocolError> {
    let mut best: Option<GlobalMin> = None;
    for local in mins {
        let Some(cell) = local.best else { continue };
        let candidate =
            GlobalMin { i: cell.i, j: cell.j, distance: cell.distance, winner: local.rank };
        let better = match &best {
            None => true,
            Some(current) => {
                (candidate.distance, candidate.i, candidate.j, candidate.winner)
                    < (current.distance, current.i, current.j, current.winner)
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    best.ok_or(ProtocolError::NoAliveCells { iteration })
}

/// Ships each worker its slice of the matrix: exactly `p` point-to-point
/// sends (rank 0 doubles as the data source and receives its own shard
/// through the transport like everyone else), tagged iteration 0.
pub fn distribute_matrix<T: Transport + ?Sized>(
    matrix: &CondensedMatrix,
    map: &PartitionMap,
    transport: &T,
) -> Result<(), Error> {
    assert_eq!(map.items(), matrix.items(), "partition built for a different matrix");
    assert_eq!(map.workers(), transport.workers(), "partition built for a different worker count");
    for rank in 0..map.workers() {
        let range = map.range(rank);
        let shard = MatrixShard {
            first_offset: range.start,
            cells: matrix.cells()[range].to_vec(),
        };
        transport.send(0, rank, 0, WorkerMessage::Shard(shard))?;
    }
    Ok(())
}

/// Runs the full protocol and returns the dendrogram, which is bitwise
/// identical to [`crate::serial_cluster`] on the same input: both paths
/// perform the same per-cell arithmetic and the same deterministic
/// tie-breaks.
pub fn run_distributed<T: Transport + ?Sized>(
    matrix: &CondensedMatrix,
    scheme: LinkageScheme,
    transport: &T,
    options: &EngineOptions,
) -> Result<RunOutput, Error> {
    if transport.workers() == 0 {
        return Err(Error::NoWorkers);
    }
    let map = Arc::new(build_partition(matrix.items(), transport.workers())?);
    distribute_matrix(matrix, &map, transport)?;
    let mut workers: Vec<Worker> = (0..map.workers())
        .map(|rank| Worker::new(rank, scheme, Arc::clone(&map), options.trace))
        .collect();
    match options.execution {
        Execution::Polled { sweep_seed } => run_polled(&mut workers, transport, sweep_seed)?,
        Execution::Threaded => run_threaded(&mut workers, transport)?,
    }
    let trace = options.trace.then(|| workers.iter_mut().map(Worker::take_trace).collect());
    let dendrogram = workers[0].take_dendrogram();
    Ok(RunOutput { dendrogram, counters: transport.snapshot_counters(), trace })
}

fn run_polled<T: Transport + ?Sized>(
    workers: &mut [Worker],
    transport: &T,
    sweep_seed: Option<u64>,
) -> Result<(), Error> {
    let mut rng = sweep_seed.map(ChaCha8Rng::seed_from_u64);
    let mut order: Vec<usize> = (0..workers.len()).collect();
    let mut done = vec![false; workers.len()];
    let mut remaining = workers.len();
    while remaining > 0 {
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let mut progressed = false;
        for &index in &order {
            if done[index] {
                continue;
            }
            loop {
                match workers[index].step(transport)? {
                    StepOutcome::Progressed => progressed = true,
                    StepOutcome::Blocked => break,
                    StepOutcome::Finished => {
                        done[index] = true;
                        remaining -= 1;
                        progressed = true;
                        break;
                    }
                }
            }
        }
        if !progressed && remaining > 0 {
            let iteration = workers
                .iter()
                .zip(&done)
                .filter(|(_, &finished)| !finished)
                .map(|(worker, _)| worker.iteration())
                .min()
                .unwrap_or(0);
            return Err(ProtocolError::Stalled { iteration }.into());
        }
    }
    Ok(())
}

fn run_threaded<T: Transport + ?Sized>(
    workers: &mut [Worker],
    transport: &T,
) -> Result<(), Error> {
    /// Closes the transport if a worker thread unwinds, so peers blocked in
    /// `wait` fail instead of hanging.
    struct CloseOnUnwind<'a, T: Transport + ?Sized>(&'a T);
    impl<T: Transport + ?Sized> Drop for CloseOnUnwind<'_, T> {
        fn drop(&mut self) {
            if std::thread::panicking() {
                self.0.close("worker thread panicked");
            }
        }
    }

    let results: Vec<Result<(), Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = workers
            .iter_mut()
            .map(|worker| {
                scope.spawn(move || {
                    let _guard = CloseOnUnwind(transport);
                    loop {
                        match worker.step(transport) {
                            Ok(StepOutcome::Progressed) => {}
                            Ok(StepOutcome::Blocked) => transport.wait(worker.rank())?,
                            Ok(StepOutcome::Finished) => return Ok(()),
                            Err(error) => {
                                transport
                                    .close(&format!("worker {} failed: {error}", worker.rank()));
                                return Err(error);
                            }
                        }
                    }
                })
            })
            .collect();
        handles.into_iter().map(|handle| handle.join().expect("worker thread")).collect()
    });

    // Prefer the root cause over knock-on "transport closed" errors.
    let mut closed = None;
    for result in results {
        match result {
            Ok(()) => {}
            Err(Error::Transport(TransportError::Closed(reason))) => {
                closed.get_or_insert(TransportError::Closed(reason));
            }
            Err(error) => return Err(error),
        }
    }
    match closed {
        Some(error) => Err(error.into()),
        None => Ok(()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum StepOutcome {
    Progressed,
    Blocked,
    Finished,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    AwaitShard,
    StartIteration,
    CollectMins,
    AwaitCombine,
    DrainTriples,
    Finished,
}

/// One rank's protocol state machine.
pub(crate) struct Worker {
    rank: Rank,
    scheme: LinkageScheme,
    map: Arc<PartitionMap>,
    first_offset: usize,
    cells: Vec<f64>,
    /// Owned slice split by matrix row: `(row, local start, local end)`.
    /// Rows whose cluster has retired are skipped wholesale during scans.
    row_segments: Vec<(usize, usize, usize)>,
    state: ClusterState,
    phase: Phase,
    /// Completed merges; the next iteration is `merges.len() + 1`.
    merges: Vec<Merge>,
    /// Messages for a later phase of the current round, or the next round's
    /// local minima, that arrived early.
    stash: Vec<Envelope>,
    mins: Vec<Option<LocalMin>>,
    mins_received: usize,
    reduced: Option<GlobalMin>,
    expected_lists: usize,
    lists_received: usize,
    /// `(partner, distance to retired row)` pairs staged for the update.
    staged: Vec<(usize, f64)>,
    /// Partners whose survivor-row cell this worker owns this iteration.
    owned_survivor_partners: Vec<usize>,
    trace: Option<Vec<IterationSnapshot>>,
}

impl Worker {
    pub(crate) fn new(
        rank: Rank,
        scheme: LinkageScheme,
        map: Arc<PartitionMap>,
        trace: bool,
    ) -> Self {
        let items = map.items();
        let workers = map.workers();
        let first_offset = map.range(rank).start;
        Worker {
            rank,
            scheme,
            map,
            first_offset,
            cells: Vec::new(),
            row_segments: Vec::new(),
            state: ClusterState::new(items),
            phase: Phase::AwaitShard,
            merges: Vec::new(),
            stash: Vec::new(),
            mins: vec![None; workers],
            mins_received: 0,
            reduced: None,
            expected_lists: 0,
            lists_received: 0,
            staged: Vec::new(),
            owned_survivor_partners: Vec::new(),
            trace: trace.then(Vec::new),
        }
    }

    pub(crate) fn rank(&self) -> Rank {
        self.rank
    }

    fn items(&self) -> usize {
        self.map.items()
    }

    fn total_merges(&self) -> usize {
        self.items().saturating_sub(1)
    }

    /// Current 1-based iteration (0 is the distribution round).
    pub(crate) fn iteration(&self) -> usize {
        self.merges.len() + 1
    }

    pub(crate) fn take_dendrogram(&mut self) -> Dendrogram {
        Dendrogram::from_run(self.items(), std::mem::take(&mut self.merges))
    }

    pub(crate) fn take_trace(&mut self) -> WorkerTrace {
        WorkerTrace {
            rank: self.rank,
            dendrogram: Dendrogram::from_run(self.items(), self.merges.clone()),
            snapshots: self.trace.take().unwrap_or_default(),
        }
    }

    #[inline]
    fn cell(&self, offset: usize) -> f64 {
        self.cells[offset - self.first_offset]
    }

    #[inline]
    fn set_cell(&mut self, offset: usize, value: f64) {
        self.cells[offset - self.first_offset] = value;
    }

    #[inline]
    fn kill(&mut self, offset: usize) {
        self.set_cell(offset, f64::INFINITY);
    }

    fn split_into_row_segments(&mut self) {
        let items = self.items();
        let end = self.first_offset + self.cells.len();
        self.row_segments.clear();
        let mut offset = self.first_offset;
        while offset < end {
            let (row, _) = pair_unchecked(offset, items);
            // Last global offset of this row is for the pair (row, items-1).
            let row_end = index_unchecked(row, items - 1, items) + 1;
            let segment_end = row_end.min(end);
            self.row_segments.push((
                row,
                offset - self.first_offset,
                segment_end - self.first_offset,
            ));
            offset = segment_end;
        }
    }

    /// Local minimum over alive cells; whole rows belonging to retired
    /// clusters are skipped without reading them. Returns the same answer
    /// as [`local_min_scan`] over the full slice (dead cells are infinite
    /// either way), including the first-occurrence tie-break, since the
    /// segments are scanned in ascending offset order.
    fn local_min(&self) -> Option<MinCell> {
        let mut best = f64::INFINITY;
        let mut best_segment = usize::MAX;
        for (index, &(row, start, end)) in self.row_segments.iter().enumerate() {
            if !self.state.is_alive(row) {
                continue;
            }
            let segment_min = min_value(&self.cells[start..end]);
            if segment_min < best {
                best = segment_min;
                best_segment = index;
            }
        }
        if !best.is_finite() {
            return None;
        }
        let (_, start, end) = self.row_segments[best_segment];
        let position = self.cells[start..end]
            .iter()
            .position(|&cell| cell == best)
            .expect("minimum exists in winning segment");
        let (i, j) = pair_unchecked(self.first_offset + start + position, self.items());
        Some(MinCell { i, j, distance: self.cells[start + position] })
    }

    /// Drives the state machine as far as one phase transition. `Blocked`
    /// means a message this phase needs has not arrived yet.
    pub(crate) fn step<T: Transport + ?Sized>(
        &mut self,
        transport: &T,
    ) -> Result<StepOutcome, Error> {
        let mut moved = false;
        let outcome = self.step_inner(transport, &mut moved)?;
        // Consuming transport messages counts as progress even if the phase
        // is still incomplete; the polled driver uses this for stall
        // detection.
        if outcome == StepOutcome::Blocked && moved {
            return Ok(StepOutcome::Progressed);
        }
        Ok(outcome)
    }

    fn step_inner<T: Transport + ?Sized>(
        &mut self,
        transport: &T,
        moved: &mut bool,
    ) -> Result<StepOutcome, Error> {
        match self.phase {
            Phase::AwaitShard => {
                let Some(envelope) = self.take_matching(
                    transport,
                    |envelope| matches!(envelope.payload, WorkerMessage::Shard(_)),
                    moved,
                )?
                else {
                    return Ok(StepOutcome::Blocked);
                };
                let WorkerMessage::Shard(shard) = envelope.payload else { unreachable!() };
                let range = self.map.range(self.rank);
                if shard.first_offset != range.start || shard.cells.len() != range.len() {
                    return Err(self
                        .unexpected(format!(
                            "shard [{}, {}) does not match owned range [{}, {})",
                            shard.first_offset,
                            shard.first_offset + shard.cells.len(),
                            range.start,
                            range.end,
                        ))
                        .into());
                }
                self.cells = shard.cells;
                self.split_into_row_segments();
                self.snapshot(0);
                if self.total_merges() == 0 {
                    self.phase = Phase::Finished;
                    transport.finish(self.rank);
                    return Ok(StepOutcome::Finished);
                }
                self.phase = Phase::StartIteration;
                Ok(StepOutcome::Progressed)
            }

            Phase::StartIteration => {
                let best = self.local_min();
                self.mins.iter_mut().for_each(|slot| *slot = None);
                self.mins_received = 0;
                transport.broadcast(
                    self.rank,
                    self.iteration(),
                    WorkerMessage::LocalMin(LocalMin { rank: self.rank, best }),
                )?;
                self.phase = Phase::CollectMins;
                Ok(StepOutcome::Progressed)
            }

            Phase::CollectMins => {
                let iteration = self.iteration();
                while self.mins_received < self.map.workers() {
                    let Some(envelope) = self.take_matching(
                        transport,
                        |envelope| {
                            envelope.iteration == iteration
                                && matches!(envelope.payload, WorkerMessage::LocalMin(_))
                        },
                        moved,
                    )?
                    else {
                        return Ok(StepOutcome::Blocked);
                    };
                    let WorkerMessage::LocalMin(local) = envelope.payload else { unreachable!() };
                    if local.rank != envelope.src || self.mins[local.rank].is_some() {
                        return Err(self
                            .unexpected(format!("duplicate or mislabeled local minimum from rank {}", envelope.src))
                            .into());
                    }
                    self.mins[local.rank] = Some(local);
                    self.mins_received += 1;
                }
                let collected: Vec<LocalMin> =
                    self.mins.iter().map(|slot| slot.expect("all minima collected")).collect();
                let reduced = global_min_reduce(iteration, &collected)?;
                self.reduced = Some(reduced);
                if reduced.winner == self.rank {
                    transport.broadcast(
                        self.rank,
                        iteration,
                        WorkerMessage::Combine(Combine {
                            survivor: reduced.i,
                            retired: reduced.j,
                            distance: reduced.distance,
                        }),
                    )?;
                }
                self.phase = Phase::AwaitCombine;
                Ok(StepOutcome::Progressed)
            }

            Phase::AwaitCombine => {
                let iteration = self.iteration();
                let Some(envelope) = self.take_matching(
                    transport,
                    |envelope| {
                        envelope.iteration == iteration
                            && matches!(envelope.payload, WorkerMessage::Combine(_))
                    },
                    moved,
                )?
                else {
                    return Ok(StepOutcome::Blocked);
                };
                let WorkerMessage::Combine(combine) = envelope.payload else { unreachable!() };
                let reduced = self.reduced.expect("reduction precedes combine");
                if combine.survivor != reduced.i
                    || combine.retired != reduced.j
                    || combine.distance.to_bits() != reduced.distance.to_bits()
                    || envelope.src != reduced.winner
                {
                    return Err(ProtocolError::CombineMismatch {
                        iteration,
                        got_i: combine.survivor,
                        got_j: combine.retired,
                        got_distance: combine.distance,
                        want_i: reduced.i,
                        want_j: reduced.j,
                        want_distance: reduced.distance,
                    }
                    .into());
                }
                self.plan_exchange(transport, reduced)?;
                self.phase = Phase::DrainTriples;
                Ok(StepOutcome::Progressed)
            }

            Phase::DrainTriples => {
                let iteration = self.iteration();
                while self.lists_received < self.expected_lists {
                    let Some(envelope) = self.take_matching(
                        transport,
                        |envelope| {
                            envelope.iteration == iteration
                                && matches!(envelope.payload, WorkerMessage::Triples(_))
                        },
                        moved,
                    )?
                    else {
                        return Ok(StepOutcome::Blocked);
                    };
                    self.ingest_triples(envelope)?;
                }
                self.apply_update()?;
                if self.merges.len() == self.total_merges() {
                    self.phase = Phase::Finished;
                    transport.finish(self.rank);
                    return Ok(StepOutcome::Finished);
                }
                self.phase = Phase::StartIteration;
                Ok(StepOutcome::Progressed)
            }

            Phase::Finished => Ok(StepOutcome::Finished),
        }
    }

    /// Pulls the next envelope satisfying `matches`, first from the stash,
    /// then from the transport; everything else valid is stashed for its
    /// phase.
    fn take_matching<T: Transport + ?Sized>(
        &mut self,
        transport: &T,
        matches: impl Fn(&Envelope) -> bool,
        moved: &mut bool,
    ) -> Result<Option<Envelope>, Error> {
        if let Some(position) = self.stash.iter().position(&matches) {
            return Ok(Some(self.stash.remove(position)));
        }
        loop {
            match transport.try_recv(self.rank)? {
                None => return Ok(None),
                Some(envelope) => {
                    *moved = true;
                    if matches(&envelope) {
                        return Ok(Some(envelope));
                    }
                    self.check_stashable(&envelope)?;
                    self.stash.push(envelope);
                }
            }
        }
    }

    /// An early message may only be a later phase of the current iteration
    /// or the next iteration's local minimum; anything else is a protocol
    /// violation.
    fn check_stashable(&self, envelope: &Envelope) -> Result<(), ProtocolError> {
        let iteration = self.iteration();
        let ok = match &envelope.payload {
            WorkerMessage::Shard(_) => false,
            WorkerMessage::LocalMin(_) => {
                envelope.iteration == iteration || envelope.iteration == iteration + 1
            }
            WorkerMessage::Combine(_) | WorkerMessage::Triples(_) => {
                envelope.iteration == iteration
            }
        };
        if ok {
            Ok(())
        } else {
            Err(self.unexpected(format!(
                "{} message tagged iteration {} while in iteration {}",
                envelope.payload.kind(),
                envelope.iteration,
                iteration,
            )))
        }
    }

    fn unexpected(&self, message: String) -> ProtocolError {
        ProtocolError::UnexpectedMessage { iteration: self.iteration(), rank: self.rank, message }
    }

    /// Step 6a bookkeeping: read and tombstone owned retired-row cells,
    /// batch one triple list per destination rank, stage local updates, and
    /// work out how many lists to expect in return. Both the destinations
    /// and the expected senders are scanned in ascending partner order, and
    /// cell offsets grow with the partner index, so each appears as one
    /// contiguous run.
    fn plan_exchange<T: Transport + ?Sized>(
        &mut self,
        transport: &T,
        merge: GlobalMin,
    ) -> Result<(), Error> {
        let items = self.items();
        let me = self.rank;
        let (i, j) = (merge.i, merge.j);
        self.staged.clear();
        self.owned_survivor_partners.clear();
        self.lists_received = 0;

        let mut batches: Vec<(Rank, Vec<Triple>)> = Vec::new();
        let mut expected_senders: Vec<Rank> = Vec::new();
        let alive: Vec<usize> = self.state.alive_slots().collect();
        for partner in alive {
            if partner == i || partner == j {
                continue;
            }
            let retired_offset = index_unchecked(partner.min(j), partner.max(j), items);
            let survivor_offset = index_unchecked(partner.min(i), partner.max(i), items);
            let sender = self.map.owner_of_offset(retired_offset);
            let receiver = self.map.owner_of_offset(survivor_offset);
            if receiver == me {
                self.owned_survivor_partners.push(partner);
            }
            if sender == me {
                let distance = self.cell(retired_offset);
                debug_assert!(distance.is_finite(), "retired-row cell already dead");
                self.kill(retired_offset);
                if receiver == me {
                    self.staged.push((partner, distance));
                } else {
                    let triple = Triple { partner, side: TripleSide::Retired, distance };
                    match batches.last_mut() {
                        Some((rank, triples)) if *rank == receiver => triples.push(triple),
                        _ => {
                            debug_assert!(batches.iter().all(|(rank, _)| *rank != receiver));
                            batches.push((receiver, vec![triple]));
                        }
                    }
                }
            } else if receiver == me && expected_senders.last() != Some(&sender) {
                debug_assert!(!expected_senders.contains(&sender));
                expected_senders.push(sender);
            }
        }
        // The merged pair's own cell dies where it lives; no message needed.
        let merged_offset = index_unchecked(i, j, items);
        if self.map.owner_of_offset(merged_offset) == me {
            self.kill(merged_offset);
        }

        let iteration = self.iteration();
        for (receiver, triples) in batches {
            transport.send(
                me,
                receiver,
                iteration,
                WorkerMessage::Triples(TripleList { sender: me, triples }),
            )?;
        }
        self.expected_lists = expected_senders.len();
        Ok(())
    }

    fn ingest_triples(&mut self, envelope: Envelope) -> Result<(), Error> {
        let WorkerMessage::Triples(list) = envelope.payload else { unreachable!() };
        let merge = self.reduced.expect("combine precedes triples");
        if list.sender != envelope.src {
            return Err(self
                .unexpected(format!("triple list labeled {} arrived from {}", list.sender, envelope.src))
                .into());
        }
        let mut previous = None;
        for triple in &list.triples {
            let valid = triple.side == TripleSide::Retired
                && triple.partner != merge.i
                && triple.partner != merge.j
                && triple.partner < self.items()
                && self.state.is_alive(triple.partner)
                && previous < Some(triple.partner);
            if !valid {
                return Err(self
                    .unexpected(format!("invalid triple for partner {} from rank {}", triple.partner, envelope.src))
                    .into());
            }
            previous = Some(triple.partner);
            self.staged.push((triple.partner, triple.distance));
        }
        self.lists_received += 1;
        Ok(())
    }

    /// Step 6b: rewrite owned survivor-row cells via the recurrence, then
    /// apply the replicated merge bookkeeping shared with the serial path.
    fn apply_update(&mut self) -> Result<(), Error> {
        let merge = self.reduced.take().expect("reduction precedes update");
        let (i, j) = (merge.i, merge.j);
        let items = self.items();
        let iteration = self.iteration();

        self.staged.sort_unstable_by_key(|&(partner, _)| partner);
        let staged = std::mem::take(&mut self.staged);
        let owned = std::mem::take(&mut self.owned_survivor_partners);
        let mut expected = owned.iter().copied();
        for &(partner, retired_distance) in &staged {
            match expected.next() {
                Some(want) if want == partner => {}
                Some(want) => {
                    let error = if partner < want {
                        self.unexpected(format!("duplicate or unowned triple for partner {partner}"))
                    } else {
                        ProtocolError::MissingTriple { iteration, partner: want, retired: j }
                    };
                    return Err(error.into());
                }
                None => {
                    return Err(self
                        .unexpected(format!("triple for partner {partner} not owned here"))
                        .into());
                }
            }
            let survivor_offset = index_unchecked(partner.min(i), partner.max(i), items);
            let coefficients = coefficients_unchecked(
                self.scheme,
                self.state.size(i),
                self.state.size(j),
                self.state.size(partner),
            );
            let updated = lw_update(
                self.cell(survivor_offset),
                retired_distance,
                merge.distance,
                &coefficients,
            );
            self.set_cell(survivor_offset, updated);
        }
        if let Some(partner) = expected.next() {
            return Err(ProtocolError::MissingTriple { iteration, partner, retired: j }.into());
        }

        let step = self.merges.len();
        let record = self.state.merge(i, j, step, merge.distance);
        self.merges.push(record);
        self.snapshot(iteration);
        Ok(())
    }

    fn snapshot(&mut self, iteration: usize) {
        let Some(trace) = self.trace.as_mut() else { return };
        let dead_cells = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, cell)| !cell.is_finite())
            .map(|(index, _)| self.first_offset + index)
            .collect();
        trace.push(IterationSnapshot {
            iteration,
            state: self.state.clone(),
            dead_cells,
            cells: self.cells.clone(),
        });
    }
}
