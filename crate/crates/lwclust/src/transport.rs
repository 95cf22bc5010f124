//! The message-passing contract the distributed engine runs over.
//!
//! Three communication events exist per iteration (local-minimum broadcasts,
//! the combine announcement, the triple exchange) plus the one-time shard
//! distribution. The in-process implementation backs each rank with per-sender
//! FIFO queues behind one lock; delivery across senders is either
//! arrival-ordered or adversarially randomized. A broadcast counts as one
//! logical message regardless of fan-out.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::TransportError;

/// Worker identifier, `0..p`.
pub type Rank = usize;

/// Addressee of an envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dest {
    To(Rank),
    /// Delivered once to every rank, the sender included.
    All,
}

/// One delivered message.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub src: Rank,
    pub dst: Dest,
    /// Protocol round the payload belongs to; 0 tags the initial shard
    /// distribution. Non-decreasing per sender.
    pub iteration: usize,
    pub payload: WorkerMessage,
}

/// Payload variants of the protocol.
#[derive(Clone, Debug, PartialEq)]
pub enum WorkerMessage {
    Shard(MatrixShard),
    LocalMin(LocalMin),
    Combine(Combine),
    Triples(TripleList),
}

impl WorkerMessage {
    pub(crate) fn kind(&self) -> &'static str {
        match self {
            WorkerMessage::Shard(_) => "shard",
            WorkerMessage::LocalMin(_) => "local-min",
            WorkerMessage::Combine(_) => "combine",
            WorkerMessage::Triples(_) => "triples",
        }
    }
}

/// A worker's contiguous slice of the condensed matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixShard {
    /// Global flat offset of `cells[0]`; with the shared partition map this
    /// carries the global `(i, j)` indices of every cell in the slice.
    pub first_offset: usize,
    pub cells: Vec<f64>,
}

/// The minimum over one worker's alive cells; `None` when it has none.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalMin {
    pub rank: Rank,
    pub best: Option<MinCell>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinCell {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

/// The iteration's merge announcement: rows `survivor < retired` combine at
/// `distance` (the global minimum, carried so every worker has the merged
/// pair's distance for the update rule's `beta` term).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Combine {
    pub survivor: usize,
    pub retired: usize,
    pub distance: f64,
}

/// Which row of the merging pair a shipped distance belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TripleSide {
    /// The row kept for the union (`i`).
    Survivor,
    /// The row being retired (`j`).
    Retired,
}

/// One shipped cell: the distance between `partner` and one of the merging
/// rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triple {
    pub partner: usize,
    pub side: TripleSide,
    pub distance: f64,
}

/// A batch of triples, one message per (sender, receiver) pair and iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleList {
    pub sender: Rank,
    /// Sorted by partner index.
    pub triples: Vec<Triple>,
}

/// Running message counts. Counters only increase; a fresh transport starts
/// a fresh count.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrafficCounters {
    pub broadcasts: u64,
    pub point_to_point: u64,
    /// Indexed by iteration tag; slot 0 is the shard distribution.
    pub per_iteration: Vec<IterationTraffic>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IterationTraffic {
    pub broadcasts: u64,
    pub point_to_point: u64,
}

impl TrafficCounters {
    fn record(&mut self, iteration: usize, broadcast: bool) {
        if self.per_iteration.len() <= iteration {
            self.per_iteration.resize(iteration + 1, IterationTraffic::default());
        }
        if broadcast {
            self.broadcasts += 1;
            self.per_iteration[iteration].broadcasts += 1;
        } else {
            self.point_to_point += 1;
            self.per_iteration[iteration].point_to_point += 1;
        }
    }
}

/// Reliable, per-channel FIFO message passing between `p` ranks.
///
/// Every sent envelope is delivered exactly once; for a fixed (src, dst)
/// pair, receive order matches send order. No ordering is promised across
/// senders. Blocking receives return an error instead of deadlocking when
/// the transport is closed or no peer can ever send again.
pub trait Transport: Sync {
    /// Number of worker endpoints.
    fn workers(&self) -> usize;

    /// Queues a point-to-point envelope; counted as one message.
    fn send(
        &self,
        src: Rank,
        dst: Rank,
        iteration: usize,
        payload: WorkerMessage,
    ) -> Result<(), TransportError>;

    /// Delivers one copy to every rank (the sender's own inbox included, for
    /// uniformity); counted as one broadcast.
    fn broadcast(&self, src: Rank, iteration: usize, payload: WorkerMessage)
        -> Result<(), TransportError>;

    /// Pops the next deliverable envelope for `dst`, if any.
    fn try_recv(&self, dst: Rank) -> Result<Option<Envelope>, TransportError>;

    /// Blocks until `dst` may have a deliverable envelope. Spurious returns
    /// are fine; callers re-poll.
    fn wait(&self, dst: Rank) -> Result<(), TransportError>;

    /// Blocking receive.
    fn recv(&self, dst: Rank) -> Result<Envelope, TransportError> {
        loop {
            if let Some(envelope) = self.try_recv(dst)? {
                return Ok(envelope);
            }
            self.wait(dst)?;
        }
    }

    /// Marks `rank` as done sending for good.
    fn finish(&self, rank: Rank);

    /// Poisons the transport; all pending and future operations fail.
    fn close(&self, reason: &str);

    /// Point-in-time copy of the traffic counters.
    fn snapshot_counters(&self) -> TrafficCounters;
}

/// Delivery order across senders for the in-process transport.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    /// Global arrival order per receiving rank.
    Fifo,
    /// Adversarial: each receive picks a uniformly random sender with
    /// pending messages (per-sender order still FIFO). Used to check that
    /// engine output does not depend on cross-channel delivery order.
    Randomized(u64),
}

struct Inbox {
    /// One FIFO queue per sender.
    queues: Vec<VecDeque<Envelope>>,
    /// Sender of each pending envelope in arrival order.
    arrivals: VecDeque<Rank>,
    /// Delivery-order randomization state, when enabled.
    rng: Option<ChaCha8Rng>,
}

impl Inbox {
    fn push(&mut self, envelope: Envelope) {
        self.arrivals.push_back(envelope.src);
        self.queues[envelope.src].push_back(envelope);
    }

    fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    fn pop(&mut self) -> Option<Envelope> {
        match self.rng.as_mut() {
            None => {
                let src = self.arrivals.pop_front()?;
                self.queues[src].pop_front()
            }
            Some(rng) => {
                let pending: Vec<Rank> = self
                    .queues
                    .iter()
                    .enumerate()
                    .filter(|(_, queue)| !queue.is_empty())
                    .map(|(src, _)| src)
                    .collect();
                if pending.is_empty() {
                    return None;
                }
                let src = pending[rng.random_range(0..pending.len())];
                let envelope = self.queues[src].pop_front()?;
                let position = self
                    .arrivals
                    .iter()
                    .position(|&s| s == src)
                    .expect("arrival entry exists for queued envelope");
                self.arrivals.remove(position);
                Some(envelope)
            }
        }
    }
}

/// The in-process [`Transport`] implementation. Each rank has its own
/// lock and condition variable, so receives contend only with senders
/// targeting the same rank.
pub struct InProcTransport {
    workers: usize,
    inboxes: Vec<(Mutex<Inbox>, Condvar)>,
    finished: Vec<AtomicBool>,
    closed: AtomicBool,
    close_reason: Mutex<String>,
    counters: Mutex<TrafficCounters>,
}

impl InProcTransport {
    pub fn new(workers: usize) -> Self {
        Self::with_delivery(workers, Delivery::Fifo)
    }

    pub fn with_delivery(workers: usize, delivery: Delivery) -> Self {
        let inboxes = (0..workers)
            .map(|rank| {
                let rng = match delivery {
                    Delivery::Fifo => None,
                    Delivery::Randomized(seed) => {
                        Some(ChaCha8Rng::seed_from_u64(seed.wrapping_add(rank as u64)))
                    }
                };
                let inbox = Inbox {
                    queues: vec![VecDeque::new(); workers],
                    arrivals: VecDeque::new(),
                    rng,
                };
                (Mutex::new(inbox), Condvar::new())
            })
            .collect();
        InProcTransport {
            workers,
            inboxes,
            finished: (0..workers).map(|_| AtomicBool::new(false)).collect(),
            closed: AtomicBool::new(false),
            close_reason: Mutex::new(String::new()),
            counters: Mutex::new(TrafficCounters::default()),
        }
    }

    fn check_rank(&self, rank: Rank) -> Result<(), TransportError> {
        if rank >= self.workers {
            return Err(TransportError::BadRank { rank, workers: self.workers });
        }
        Ok(())
    }

    fn closed_error(&self) -> TransportError {
        TransportError::Closed(self.close_reason.lock().expect("transport lock").clone())
    }

    fn deliver(&self, dst: Rank, envelope: Envelope) {
        let (lock, cv) = &self.inboxes[dst];
        lock.lock().expect("transport lock").push(envelope);
        cv.notify_all();
    }
}

impl Transport for InProcTransport {
    fn workers(&self) -> usize {
        self.workers
    }

    fn send(
        &self,
        src: Rank,
        dst: Rank,
        iteration: usize,
        payload: WorkerMessage,
    ) -> Result<(), TransportError> {
        self.check_rank(src)?;
        self.check_rank(dst)?;
        if self.closed.load(Ordering::Acquire) {
            return Err(self.closed_error());
        }
        self.counters.lock().expect("transport lock").record(iteration, false);
        self.deliver(dst, Envelope { src, dst: Dest::To(dst), iteration, payload });
        Ok(())
    }

    fn broadcast(
        &self,
        src: Rank,
        iteration: usize,
        payload: WorkerMessage,
    ) -> Result<(), TransportError> {
        self.check_rank(src)?;
        if self.closed.load(Ordering::Acquire) {
            return Err(self.closed_error());
        }
        self.counters.lock().expect("transport lock").record(iteration, true);
        for dst in 0..self.workers {
            self.deliver(dst, Envelope { src, dst: Dest::All, iteration, payload: payload.clone() });
        }
        Ok(())
    }

    fn try_recv(&self, dst: Rank) -> Result<Option<Envelope>, TransportError> {
        self.check_rank(dst)?;
        if self.closed.load(Ordering::Acquire) {
            return Err(self.closed_error());
        }
        Ok(self.inboxes[dst].0.lock().expect("transport lock").pop())
    }

    fn wait(&self, dst: Rank) -> Result<(), TransportError> {
        self.check_rank(dst)?;
        let (lock, cv) = &self.inboxes[dst];
        let mut inbox = lock.lock().expect("transport lock");
        loop {
            if self.closed.load(Ordering::Acquire) {
                return Err(self.closed_error());
            }
            if !inbox.is_empty() {
                return Ok(());
            }
            let all_peers_done = (0..self.workers)
                .all(|rank| rank == dst || self.finished[rank].load(Ordering::Acquire));
            if all_peers_done {
                return Err(TransportError::NoFutureMessage { rank: dst });
            }
            inbox = cv.wait(inbox).expect("transport lock");
        }
    }

    fn finish(&self, rank: Rank) {
        if rank < self.workers {
            self.finished[rank].store(true, Ordering::Release);
        }
        // Serialize with every waiter's check-then-sleep before notifying.
        for (lock, cv) in &self.inboxes {
            drop(lock.lock().expect("transport lock"));
            cv.notify_all();
        }
    }

    fn close(&self, reason: &str) {
        {
            let mut stored = self.close_reason.lock().expect("transport lock");
            if stored.is_empty() {
                *stored = reason.to_string();
            }
        }
        self.closed.store(true, Ordering::Release);
        for (lock, cv) in &self.inboxes {
            drop(lock.lock().expect("transport lock"));
            cv.notify_all();
        }
    }

    fn snapshot_counters(&self) -> TrafficCounters {
        self.counters.lock().expect("transport lock").clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn combine(distance: f64) -> WorkerMessage {
        WorkerMessage::Combine(Combine { survivor: 0, retired: 1, distance })
    }

    #[test]
    fn counters_start_at_zero() {
        let t = InProcTransport::new(4);
        let counters = t.snapshot_counters();
        assert_eq!(counters.broadcasts, 0);
        assert_eq!(counters.point_to_point, 0);
        assert!(counters.per_iteration.is_empty());
    }

    #[test]
    fn broadcast_reaches_every_rank_once() {
        let t = InProcTransport::new(4);
        t.broadcast(2, 1, combine(1.0)).unwrap();
        for dst in 0..4 {
            let envelope = t.recv(dst).unwrap();
            assert_eq!(envelope.src, 2);
            assert_eq!(envelope.dst, Dest::All);
            assert!(t.try_recv(dst).unwrap().is_none());
        }
        let counters = t.snapshot_counters();
        assert_eq!(counters.broadcasts, 1);
        assert_eq!(counters.per_iteration[1].broadcasts, 1);
    }

    #[test]
    fn broadcast_on_single_rank_delivers_to_self() {
        let t = InProcTransport::new(1);
        t.broadcast(0, 1, combine(2.0)).unwrap();
        assert_eq!(t.recv(0).unwrap().payload, combine(2.0));
        assert_eq!(t.snapshot_counters().broadcasts, 1);
    }

    #[test]
    fn per_channel_fifo_order() {
        let t = InProcTransport::new(2);
        t.send(1, 0, 1, combine(1.0)).unwrap();
        t.send(1, 0, 1, combine(2.0)).unwrap();
        assert_eq!(t.recv(0).unwrap().payload, combine(1.0));
        assert_eq!(t.recv(0).unwrap().payload, combine(2.0));
        assert_eq!(t.snapshot_counters().point_to_point, 2);
    }

    #[test]
    fn randomized_delivery_preserves_per_channel_order() {
        let t = InProcTransport::with_delivery(3, Delivery::Randomized(7));
        for step in 0..5 {
            t.send(1, 0, 1, combine(step as f64)).unwrap();
            t.send(2, 0, 1, combine(100.0 + step as f64)).unwrap();
        }
        let mut from_one = Vec::new();
        let mut from_two = Vec::new();
        while let Some(envelope) = t.try_recv(0).unwrap() {
            match envelope.payload {
                WorkerMessage::Combine(c) if envelope.src == 1 => from_one.push(c.distance),
                WorkerMessage::Combine(c) => from_two.push(c.distance),
                _ => unreachable!(),
            }
        }
        assert_eq!(from_one, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(from_two, vec![100.0, 101.0, 102.0, 103.0, 104.0]);
    }

    #[test]
    fn exactly_once_delivery() {
        // Sequence-number every send and check the received multiset.
        let t = InProcTransport::new(3);
        let mut sent = 0u32;
        for src in 0..3usize {
            for copy in 0..4 {
                t.send(src, 2, 1, combine((src * 10 + copy) as f64)).unwrap();
                sent += 1;
            }
        }
        let mut seen = Vec::new();
        while let Some(envelope) = t.try_recv(2).unwrap() {
            if let WorkerMessage::Combine(c) = envelope.payload {
                seen.push(c.distance as u32);
            }
        }
        seen.sort_unstable();
        assert_eq!(seen.len() as u32, sent);
        let expected: Vec<u32> =
            (0..3).flat_map(|src| (0..4).map(move |copy| src * 10 + copy)).collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn closed_transport_errors() {
        let t = InProcTransport::new(2);
        t.close("test shutdown");
        assert!(matches!(t.send(0, 1, 1, combine(1.0)), Err(TransportError::Closed(_))));
        assert!(matches!(t.broadcast(0, 1, combine(1.0)), Err(TransportError::Closed(_))));
        assert!(matches!(t.recv(0), Err(TransportError::Closed(_))));
    }

    #[test]
    fn recv_after_all_peers_finish_is_a_protocol_error() {
        let t = InProcTransport::new(2);
        t.finish(1);
        assert!(matches!(t.recv(0), Err(TransportError::NoFutureMessage { rank: 0 })));
    }

    #[test]
    fn bad_ranks_are_rejected() {
        let t = InProcTransport::new(2);
        assert!(matches!(t.send(0, 5, 1, combine(1.0)), Err(TransportError::BadRank { .. })));
        assert!(matches!(t.try_recv(9), Err(TransportError::BadRank { .. })));
    }
}
