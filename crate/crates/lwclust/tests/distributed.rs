//! Integration tests for the distributed engine: protocol traces, replica
//! coherence, fault handling, scheduling and delivery-order independence.

mod common;

use std::collections::BTreeSet;
use std::sync::Mutex;

use common::assert_bitwise_equal;
use lwclust::synth::{quantized_matrix, uniform_matrix};
use lwclust::transport::{
    Delivery, Envelope, InProcTransport, Rank, TrafficCounters, Transport, WorkerMessage,
};
use lwclust::{
    build_partition, run_distributed, serial_cluster, CondensedMatrix, EngineOptions, Error,
    Execution, LinkageScheme, ProtocolError, RunOutput, TransportError,
};

fn polled() -> EngineOptions {
    EngineOptions { execution: Execution::Polled { sweep_seed: None }, trace: false }
}

fn polled_traced() -> EngineOptions {
    EngineOptions { execution: Execution::Polled { sweep_seed: None }, trace: true }
}

fn run(matrix: &CondensedMatrix, scheme: LinkageScheme, workers: usize) -> RunOutput {
    let transport = InProcTransport::new(workers);
    run_distributed(matrix, scheme, &transport, &polled()).unwrap()
}

#[test]
fn single_worker_matches_serial() {
    let matrix = CondensedMatrix::new(3, vec![1.0, 4.0, 5.0]).unwrap();
    let serial = serial_cluster(&matrix, LinkageScheme::Complete);
    let distributed = run(&matrix, LinkageScheme::Complete, 1);
    assert_bitwise_equal(&serial, &distributed.dendrogram, "n=3 complete p=1");
    let heights: Vec<f64> = distributed.dendrogram.merges().iter().map(|m| m.height).collect();
    assert_eq!(heights, vec![1.0, 5.0]);
}

#[test]
fn three_workers_one_cell_each() {
    // With n = 3 and p = 3 every worker owns exactly one cell. Merging
    // (0, 1) makes the owner of {1, 2} ship one triple to the owner of
    // {0, 2}: exactly one point-to-point message in iteration 1 and none in
    // iteration 2.
    let matrix = CondensedMatrix::new(3, vec![1.0, 4.0, 5.0]).unwrap();
    let serial = serial_cluster(&matrix, LinkageScheme::Complete);
    let transport = InProcTransport::new(3);
    let output = run_distributed(&matrix, LinkageScheme::Complete, &transport, &polled_traced())
        .unwrap();
    assert_bitwise_equal(&serial, &output.dendrogram, "n=3 complete p=3");

    let per_iteration = &output.counters.per_iteration;
    assert_eq!(per_iteration[0].point_to_point, 3); // shards
    assert_eq!(per_iteration[1].point_to_point, 1); // the single triple
    assert_eq!(per_iteration[2].point_to_point, 0);
    assert_eq!(per_iteration[1].broadcasts, 4); // 3 local minima + 1 combine
    assert_eq!(per_iteration[2].broadcasts, 4);

    // Worker 1 owns cell (0, 2): after iteration 1 it holds max(4, 5) = 5.
    let traces = output.trace.unwrap();
    let after_first = &traces[1].snapshots[1];
    assert_eq!(after_first.cells, vec![5.0]);
    // Worker 2 owns cell (1, 2): tombstoned when row 1 retired.
    assert_eq!(traces[2].snapshots[1].dead_cells, vec![2]);
    // Worker 0 owns the merged cell (0, 1) itself: dead as well.
    assert_eq!(traces[0].snapshots[1].dead_cells, vec![0]);
}

#[test]
fn merge_updates_survivor_row_and_kills_retired_row() {
    // Single worker trace of the n=3 example: after the first iteration the
    // cell {0, 2} holds 5 and both {0, 1} and {1, 2} are dead.
    let matrix = CondensedMatrix::new(3, vec![1.0, 4.0, 5.0]).unwrap();
    let transport = InProcTransport::new(1);
    let output = run_distributed(&matrix, LinkageScheme::Complete, &transport, &polled_traced())
        .unwrap();
    let snapshots = &output.trace.unwrap()[0].snapshots;
    assert_eq!(snapshots[0].dead_cells, Vec::<usize>::new());
    assert_eq!(snapshots[1].cells[1], 5.0);
    assert_eq!(snapshots[1].dead_cells, vec![0, 2]);
}

#[test]
fn two_items_need_no_triples() {
    for workers in [1, 2, 5] {
        let matrix = CondensedMatrix::new(2, vec![7.0]).unwrap();
        let output = run(&matrix, LinkageScheme::Ward, workers);
        assert_eq!(output.dendrogram.merges().len(), 1);
        assert_eq!(output.dendrogram.merges()[0].height, 7.0);
        // Shards plus zero triple traffic.
        assert_eq!(output.counters.point_to_point, workers as u64);
    }
}

#[test]
fn degenerate_inputs_run_cleanly() {
    for items in [0usize, 1] {
        for workers in [1usize, 3] {
            let matrix = CondensedMatrix::new(items, vec![]).unwrap();
            let output = run(&matrix, LinkageScheme::Single, workers);
            assert!(output.dendrogram.is_empty());
            assert_eq!(output.counters.point_to_point, workers as u64);
            assert_eq!(output.counters.broadcasts, 0);
        }
    }
}

#[test]
fn surplus_workers_participate_as_sentinels() {
    // 3 cells, 8 workers: five workers own nothing and still broadcast.
    let matrix = CondensedMatrix::new(3, vec![1.0, 4.0, 5.0]).unwrap();
    let serial = serial_cluster(&matrix, LinkageScheme::GroupAverage);
    let output = run(&matrix, LinkageScheme::GroupAverage, 8);
    assert_bitwise_equal(&serial, &output.dendrogram, "surplus workers");
    // Every iteration still carries p local-minimum broadcasts + 1 combine.
    for it in &output.counters.per_iteration[1..] {
        assert_eq!(it.broadcasts, 9);
    }
}

#[test]
fn replicas_stay_identical_at_every_boundary() {
    let matrix = uniform_matrix(17, 40);
    for scheme in [LinkageScheme::Ward, LinkageScheme::Centroid] {
        let transport = InProcTransport::new(5);
        let output = run_distributed(&matrix, scheme, &transport, &polled_traced()).unwrap();
        let traces = output.trace.unwrap();
        for trace in &traces {
            assert_bitwise_equal(&output.dendrogram, &trace.dendrogram, "per-worker merge list");
            assert_eq!(trace.snapshots.len(), 17);
        }
        for step in 0..traces[0].snapshots.len() {
            let reference = &traces[0].snapshots[step].state;
            assert_eq!(reference.total_active_size(), 17);
            assert_eq!(reference.active_clusters(), 17 - step);
            for trace in &traces[1..] {
                assert_eq!(&trace.snapshots[step].state, reference, "iteration {step}");
            }
        }
    }
}

#[test]
fn tombstones_grow_by_exactly_the_retired_cross() {
    let items = 13;
    let workers = 4;
    let matrix = uniform_matrix(items, 77);
    let map = build_partition(items, workers).unwrap();
    let transport = InProcTransport::new(workers);
    let output =
        run_distributed(&matrix, LinkageScheme::Complete, &transport, &polled_traced()).unwrap();
    let traces = output.trace.unwrap();
    for trace in &traces {
        for step in 1..trace.snapshots.len() {
            let before = &trace.snapshots[step - 1];
            let after = &trace.snapshots[step];
            let dead_before: BTreeSet<usize> = before.dead_cells.iter().copied().collect();
            let dead_after: BTreeSet<usize> = after.dead_cells.iter().copied().collect();
            assert!(dead_before.is_subset(&dead_after), "tombstones must only grow");

            // The slot that flipped alive -> dead this iteration.
            let retired = (0..items)
                .find(|&slot| before.state.is_alive(slot) && !after.state.is_alive(slot))
                .expect("one slot retires per iteration");
            let expected: BTreeSet<usize> = map
                .cells_touching(trace.rank, retired)
                .into_iter()
                .filter(|&(partner, _)| before.state.is_alive(partner) && partner != retired)
                .map(|(_, offset)| offset)
                .collect();
            let new_dead: BTreeSet<usize> =
                dead_after.difference(&dead_before).copied().collect();
            assert_eq!(new_dead, expected, "iteration {step} deaths");
        }
    }
}

#[test]
fn output_is_schedule_and_delivery_independent() {
    let matrix = quantized_matrix(19, 3, 5); // ties exercise the tie-breaks
    let scheme = LinkageScheme::WeightedAverage;
    let serial = serial_cluster(&matrix, scheme);
    for sweep_seed in [None, Some(1), Some(99)] {
        for delivery_seed in [None, Some(7), Some(123456)] {
            let delivery = match delivery_seed {
                None => Delivery::Fifo,
                Some(seed) => Delivery::Randomized(seed),
            };
            let transport = InProcTransport::with_delivery(6, delivery);
            let options = EngineOptions { execution: Execution::Polled { sweep_seed }, trace: false };
            let output = run_distributed(&matrix, scheme, &transport, &options).unwrap();
            assert_bitwise_equal(
                &serial,
                &output.dendrogram,
                &format!("sweep {sweep_seed:?} delivery {delivery_seed:?}"),
            );
        }
    }
}

#[test]
fn threaded_execution_matches_serial() {
    let matrix = uniform_matrix(31, 9);
    for scheme in LinkageScheme::ALL {
        let serial = serial_cluster(&matrix, scheme);
        let transport = InProcTransport::new(4);
        let options = EngineOptions { execution: Execution::Threaded, trace: false };
        let output = run_distributed(&matrix, scheme, &transport, &options).unwrap();
        assert_bitwise_equal(&serial, &output.dendrogram, scheme.name());
    }
}

/// Transport wrapper that tampers with protocol messages to exercise the
/// engine's failure detection.
struct FaultyTransport {
    inner: InProcTransport,
    fault: Fault,
    fired: Mutex<bool>,
}

#[derive(Clone, Copy, PartialEq)]
enum Fault {
    /// Swallow the first triple list entirely.
    DropFirstTripleList,
    /// Deliver the first triple list with its last triple removed.
    TruncateFirstTripleList,
    /// Corrupt the distance in the first combine announcement.
    CorruptFirstCombine,
}

impl FaultyTransport {
    fn new(workers: usize, fault: Fault) -> Self {
        FaultyTransport { inner: InProcTransport::new(workers), fault, fired: Mutex::new(false) }
    }

    fn fired(&self) -> bool {
        *self.fired.lock().unwrap()
    }
}

impl Transport for FaultyTransport {
    fn workers(&self) -> usize {
        self.inner.workers()
    }

    fn send(
        &self,
        src: Rank,
        dst: Rank,
        iteration: usize,
        mut payload: WorkerMessage,
    ) -> Result<(), TransportError> {
        if let WorkerMessage::Triples(list) = &mut payload {
            let mut fired = self.fired.lock().unwrap();
            if !*fired {
                match self.fault {
                    Fault::DropFirstTripleList => {
                        *fired = true;
                        return Ok(()); // swallowed
                    }
                    Fault::TruncateFirstTripleList if !list.triples.is_empty() => {
                        *fired = true;
                        list.triples.pop();
                    }
                    _ => {}
                }
            }
        }
        self.inner.send(src, dst, iteration, payload)
    }

    fn broadcast(
        &self,
        src: Rank,
        iteration: usize,
        mut payload: WorkerMessage,
    ) -> Result<(), TransportError> {
        if let WorkerMessage::Combine(combine) = &mut payload {
            let mut fired = self.fired.lock().unwrap();
            if !*fired && self.fault == Fault::CorruptFirstCombine {
                *fired = true;
                combine.distance += 1.0;
            }
        }
        self.inner.broadcast(src, iteration, payload)
    }

    fn try_recv(&self, dst: Rank) -> Result<Option<Envelope>, TransportError> {
        self.inner.try_recv(dst)
    }

    fn wait(&self, dst: Rank) -> Result<(), TransportError> {
        self.inner.wait(dst)
    }

    fn finish(&self, rank: Rank) {
        self.inner.finish(rank)
    }

    fn close(&self, reason: &str) {
        self.inner.close(reason)
    }

    fn snapshot_counters(&self) -> TrafficCounters {
        self.inner.snapshot_counters()
    }
}

#[test]
fn dropped_triple_list_stalls_and_is_reported() {
    let matrix = uniform_matrix(8, 5);
    let transport = FaultyTransport::new(3, Fault::DropFirstTripleList);
    let result = run_distributed(&matrix, LinkageScheme::Complete, &transport, &polled());
    assert!(transport.fired(), "fault never triggered; pick a larger matrix");
    assert!(matches!(result, Err(Error::Protocol(ProtocolError::Stalled { .. }))));
}

#[test]
fn truncated_triple_list_names_the_missing_partner() {
    let matrix = uniform_matrix(8, 5);
    let transport = FaultyTransport::new(3, Fault::TruncateFirstTripleList);
    let result = run_distributed(&matrix, LinkageScheme::Complete, &transport, &polled());
    assert!(transport.fired());
    assert!(matches!(result, Err(Error::Protocol(ProtocolError::MissingTriple { .. }))));
}

#[test]
fn corrupted_combine_is_detected_against_local_reduction() {
    let matrix = uniform_matrix(8, 5);
    let transport = FaultyTransport::new(3, Fault::CorruptFirstCombine);
    let result = run_distributed(&matrix, LinkageScheme::Complete, &transport, &polled());
    assert!(transport.fired());
    assert!(matches!(result, Err(Error::Protocol(ProtocolError::CombineMismatch { .. }))));
}

#[test]
fn threaded_faults_error_out_instead_of_hanging() {
    let matrix = uniform_matrix(10, 6);
    let transport = FaultyTransport::new(3, Fault::TruncateFirstTripleList);
    let options = EngineOptions { execution: Execution::Threaded, trace: false };
    let result = run_distributed(&matrix, LinkageScheme::Complete, &transport, &options);
    assert!(transport.fired());
    assert!(result.is_err());
}

#[test]
fn full_run_counter_totals_stay_within_bounds() {
    // n = 8, p = 7 complete-linkage run: broadcasts are at most
    // p*(n-1) + (n-1) = 56 and point-to-point messages at most 2*p*(n-1) = 98
    // including the p initial shard sends.
    let matrix = uniform_matrix(8, 11);
    let output = run(&matrix, LinkageScheme::Complete, 7);
    assert_eq!(output.counters.broadcasts, 56); // exactly (p+1) per iteration
    assert!(output.counters.point_to_point <= 98);
    assert_eq!(output.counters.per_iteration[0].point_to_point, 7);
}
