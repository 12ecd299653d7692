use std::collections::BTreeMap;

use crate::error::{invariant, Result};
use crate::model::{Packet, Slot, StripeId};
use crate::sim::{QueueId, Stage};

/// Occupancy, peak and arrival count of every per-port-pair queue.
#[derive(Clone, Debug)]
pub struct QueueStats {
    n: usize,
    current: Vec<u32>,
    peak: Vec<u32>,
    arrivals: Vec<u64>,
}

impl QueueStats {
    pub fn new(n: usize) -> Self {
        QueueStats { n, current: vec![0; 2 * n * n], peak: vec![0; 2 * n * n], arrivals: vec![0; 2 * n * n] }
    }

    fn idx(&self, stage: Stage, a: usize, b: usize) -> usize {
        let base = match stage {
            Stage::InputToIntermediate => 0,
            Stage::IntermediateToOutput => self.n * self.n,
        };
        base + (a - 1) * self.n + (b - 1)
    }

    pub fn enter(&mut self, stage: Stage, a: usize, b: usize) {
        let i = self.idx(stage, a, b);
        self.current[i] += 1;
        self.arrivals[i] += 1;
        self.peak[i] = self.peak[i].max(self.current[i]);
    }

    pub fn leave(&mut self, stage: Stage, a: usize, b: usize) {
        let i = self.idx(stage, a, b);
        self.current[i] = self.current[i].checked_sub(1).expect("queue underflow");
    }

    pub fn occupancy(&self, stage: Stage, a: usize, b: usize) -> u32 {
        self.current[self.idx(stage, a, b)]
    }

    fn ids(&self) -> impl Iterator<Item = QueueId> + '_ {
        [Stage::InputToIntermediate, Stage::IntermediateToOutput]
            .into_iter()
            .flat_map(move |stage| (1..=self.n).flat_map(move |a| (1..=self.n).map(move |b| QueueId { stage, a, b })))
    }

    pub fn peaks(&self) -> BTreeMap<QueueId, u32> {
        self.ids().map(|q| (q, self.peak[self.idx(q.stage, q.a, q.b)])).collect()
    }

    /// Queues whose arrival rate over `slots` reached the `1/N` service rate.
    pub fn overloaded(&self, slots: u64) -> Vec<QueueId> {
        let n = self.n as u64;
        self.ids().filter(|q| self.arrivals[self.idx(q.stage, q.a, q.b)] * n >= slots && slots > 0).collect()
    }
}

/// Delay histogram of measured packets.
#[derive(Clone, Debug, Default)]
pub struct DelayRecorder {
    histogram: Vec<u64>,
    count: u64,
    sum: u128,
}

impl DelayRecorder {
    pub fn record(&mut self, delay: u64) {
        let d = delay as usize;
        if d >= self.histogram.len() {
            self.histogram.resize(d + 1, 0);
        }
        self.histogram[d] += 1;
        self.count += 1;
        self.sum += delay as u128;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }

    /// Smallest delay `d` with at least 99% of measured packets at or below `d`.
    pub fn p99(&self) -> u64 {
        if self.count == 0 {
            return 0;
        }
        let need = (self.count * 99).div_ceil(100);
        let mut seen = 0;
        for (d, &c) in self.histogram.iter().enumerate() {
            seen += c;
            if seen >= need {
                return d as u64;
            }
        }
        unreachable!("histogram total equals count")
    }

    pub fn histogram(&self) -> &[u64] {
        &self.histogram
    }
}

/// Counts departures that overtake an earlier departure of the same VOQ.
#[derive(Clone, Debug)]
pub struct ReorderDetector {
    n: usize,
    last: Vec<Option<u64>>,
    events: u64,
}

impl ReorderDetector {
    pub fn new(n: usize) -> Self {
        ReorderDetector { n, last: vec![None; n * n], events: 0 }
    }

    pub fn observe(&mut self, p: &Packet) {
        let slot = &mut self.last[(p.input - 1) * self.n + (p.output - 1)];
        match *slot {
            Some(last) if p.id < last => self.events += 1,
            _ => *slot = Some(p.id),
        }
    }

    pub fn events(&self) -> u64 {
        self.events
    }
}

#[derive(Clone, Copy, Debug)]
struct OpenStripe {
    stripe: StripeId,
    next_slot: Slot,
    next_port: usize,
    remaining: usize,
    last_id: u64,
}

/// Asserts that every stripe crosses one fabric on consecutive slots and
/// consecutive intermediate ports, and that each VOQ's stripes cross in
/// formation order.
#[derive(Clone, Debug)]
pub struct ContinuityChecker {
    n: usize,
    stage: Stage,
    open: Vec<Option<OpenStripe>>,
    last_seq: Vec<Option<u64>>,
    stripes: u64,
}

impl ContinuityChecker {
    pub fn new(n: usize, stage: Stage) -> Self {
        ContinuityChecker { n, stage, open: vec![None; n], last_seq: vec![None; n * n], stripes: 0 }
    }

    /// Completed stripes seen so far.
    pub fn stripes(&self) -> u64 {
        self.stripes
    }

    /// Records `p` crossing at slot `t`; `side` is the input (first fabric) or
    /// output (second fabric), `port` the intermediate port on the other end.
    pub fn observe(&mut self, side: usize, port: usize, p: &Packet, t: Slot) -> Result<()> {
        let (Some(stripe), Some(size)) = (p.stripe, p.stripe_size) else {
            return invariant(format!("{:?}: packet {} carries no stripe header", self.stage, p.id));
        };
        let next = match self.open[side - 1] {
            Some(o) => {
                if o.stripe != stripe || o.next_slot != t || o.next_port != port || p.id <= o.last_id {
                    return invariant(format!(
                        "{:?} port {side} slot {t}: packet {} of {stripe} at intermediate {port} \
                         breaks open stripe {} (expected slot {}, intermediate {})",
                        self.stage, p.id, o.stripe, o.next_slot, o.next_port
                    ));
                }
                OpenStripe { next_slot: t + 1, next_port: port + 1, remaining: o.remaining - 1, last_id: p.id, ..o }
            }
            None => {
                if !(port - 1).is_multiple_of(size) {
                    return invariant(format!(
                        "{:?} port {side} slot {t}: {stripe} (size {size}) starts mid-interval at {port}",
                        self.stage
                    ));
                }
                let voq = (stripe.input - 1) * self.n + (stripe.output - 1);
                let expected = self.last_seq[voq].map_or(0, |s| s + 1);
                if stripe.seq != expected {
                    return invariant(format!(
                        "{:?}: {stripe} crosses before stripe #{expected} of its VOQ",
                        self.stage
                    ));
                }
                self.last_seq[voq] = Some(stripe.seq);
                OpenStripe { stripe, next_slot: t + 1, next_port: port + 1, remaining: size - 1, last_id: p.id }
            }
        };
        self.open[side - 1] = if next.remaining == 0 {
            self.stripes += 1;
            None
        } else {
            Some(next)
        };
        Ok(())
    }

    /// Fails if a partially crossed stripe skipped slot `t`.
    pub fn end_slot(&self, t: Slot) -> Result<()> {
        for (k, o) in self.open.iter().enumerate() {
            if let Some(o) = o {
                if o.next_slot <= t {
                    return invariant(format!(
                        "{:?} port {}: stripe {} stalled at slot {t} with {} packets left",
                        self.stage,
                        k + 1,
                        o.stripe,
                        o.remaining
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tagged(id: u64, seq: u64, size: usize) -> Packet {
        let mut p = Packet::new(id, 1, 2, 0);
        p.stripe = Some(StripeId { input: 1, output: 2, seq });
        p.stripe_size = Some(size);
        p
    }

    #[test]
    fn p99_and_mean() {
        let mut d = DelayRecorder::default();
        for k in 1..=100 {
            d.record(k);
        }
        assert_eq!(d.p99(), 99);
        assert!((d.mean() - 50.5).abs() < 1e-12);
        assert_eq!(DelayRecorder::default().p99(), 0);
    }

    #[test]
    fn reorder_counts_overtakes() {
        let mut r = ReorderDetector::new(4);
        for id in [1, 2, 5, 3, 6, 4] {
            r.observe(&Packet::new(id, 1, 1, 0));
        }
        assert_eq!(r.events(), 2);
    }

    #[test]
    fn queue_stats_track_peak() {
        let mut q = QueueStats::new(2);
        q.enter(Stage::InputToIntermediate, 1, 2);
        q.enter(Stage::InputToIntermediate, 1, 2);
        q.leave(Stage::InputToIntermediate, 1, 2);
        let peaks = q.peaks();
        assert_eq!(peaks.len(), 8);
        assert_eq!(peaks[&QueueId { stage: Stage::InputToIntermediate, a: 1, b: 2 }], 2);
        assert_eq!(q.overloaded(4), vec![QueueId { stage: Stage::InputToIntermediate, a: 1, b: 2 }]);
    }

    #[test]
    fn continuity_accepts_consecutive_crossing() {
        let mut c = ContinuityChecker::new(8, Stage::InputToIntermediate);
        for m in 0..4 {
            c.observe(1, 5 + m, &tagged(m as u64, 0, 4), 10 + m as u64).unwrap();
            c.end_slot(10 + m as u64).unwrap();
        }
        assert_eq!(c.stripes(), 1);
    }

    #[test]
    fn continuity_rejects_gap_and_bad_start() {
        let mut c = ContinuityChecker::new(8, Stage::InputToIntermediate);
        c.observe(1, 1, &tagged(0, 0, 2), 0).unwrap();
        assert!(c.end_slot(1).is_err());

        let mut c = ContinuityChecker::new(8, Stage::InputToIntermediate);
        assert!(c.observe(1, 2, &tagged(0, 0, 2), 0).is_err());

        let mut c = ContinuityChecker::new(8, Stage::IntermediateToOutput);
        assert!(c.observe(2, 1, &tagged(0, 1, 1), 0).is_err());
    }
}
