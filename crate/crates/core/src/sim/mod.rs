//! Discrete-time engine shared by every switch policy.
//!
//! Each slot runs, in order: arrivals, the first fabric (input to
//! intermediate), the second fabric (intermediate to output), departures.
//! Packets crossing the first fabric in slot `t` become visible at their
//! intermediate port from slot `t + 1`.

pub mod fabric;
mod sprinklers;
mod stats;
mod traffic;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::comparators::{BaselinePolicy, FramePolicy};
use crate::error::{invariant, Result};
use crate::lsf::RowService;
use crate::model::{Packet, PolicyKind, SimMetrics, Slot, SwitchConfig};

pub use fabric::{first_fabric, intermediate_for_output, second_fabric};
pub use sprinklers::SprinklersPolicy;
pub use stats::{ContinuityChecker, DelayRecorder, QueueStats, ReorderDetector};
pub use traffic::generate_arrivals;

/// RNG stream that fixes primary ports; traffic uses a separate stream so
/// every policy sees the same arrivals for a given seed.
pub(crate) const OLS_STREAM: u64 = 0;
pub(crate) const TRAFFIC_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    InputToIntermediate,
    IntermediateToOutput,
}

/// A per-port-pair queue: input `a` to intermediate `b`, or intermediate `a` to output `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueueId {
    pub stage: Stage,
    pub a: usize,
    pub b: usize,
}

impl fmt::Display for QueueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.stage {
            Stage::InputToIntermediate => "in",
            Stage::IntermediateToOutput => "mid",
        };
        write!(f, "{tag}:{}->{}", self.a, self.b)
    }
}

/// Buffering and service decisions of one switch architecture.
pub trait SwitchPolicy: Send {
    fn on_arrival(&mut self, packet: Packet, t: Slot) -> Result<()>;

    /// First fabric: input `i` is connected to intermediate `l`.
    fn serve_input(&mut self, i: usize, l: usize, t: Slot) -> Result<RowService>;

    fn accept_intermediate(&mut self, l: usize, packet: Packet, t: Slot) -> Result<()>;

    /// Second fabric: intermediate `l` is connected to output `j`.
    fn serve_intermediate(&mut self, l: usize, j: usize, t: Slot) -> Result<RowService>;

    /// Output stage; returns the packets that leave the switch now.
    fn deliver(&mut self, _j: usize, packet: Packet, _t: Slot) -> Result<Vec<Packet>> {
        Ok(if packet.fake { Vec::new() } else { vec![packet] })
    }

    fn end_of_slot(&mut self, _t: Slot) -> Result<()> {
        Ok(())
    }

    /// Real packets currently inside the switch, counted from the buffers.
    fn held_packets(&self) -> usize;

    fn queue_stats(&self) -> &QueueStats;

    /// Whether packets carry stripe headers whose continuity the engine must assert.
    fn striped(&self) -> bool {
        false
    }

    /// Fills policy-specific metric fields.
    fn report(&self, _metrics: &mut SimMetrics) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceKind {
    Arrival,
    ToIntermediate,
    ToOutput,
    Departure,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Arrival => "arrival",
            TraceKind::ToIntermediate => "to_intermediate",
            TraceKind::ToOutput => "to_output",
            TraceKind::Departure => "departure",
        }
    }
}

/// One per-slot event. `port` is the input for arrivals, the intermediate
/// for first-fabric crossings and the output otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub slot: Slot,
    pub kind: TraceKind,
    pub port: usize,
    pub packet_id: u64,
    pub fake: bool,
}

pub fn build_policy(cfg: &SwitchConfig) -> Result<Box<dyn SwitchPolicy>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(OLS_STREAM);
    Ok(match cfg.policy {
        PolicyKind::Sprinklers => Box::new(SprinklersPolicy::new(cfg, &mut rng)?),
        PolicyKind::Baseline => Box::new(BaselinePolicy::new(cfg.n_ports)),
        PolicyKind::Ufs | PolicyKind::Foff | PolicyKind::Pf => Box::new(FramePolicy::new(cfg)),
    })
}

/// One switch instance stepping through time.
pub struct Simulator<'a> {
    cfg: SwitchConfig,
    n: usize,
    t: Slot,
    policy: Box<dyn SwitchPolicy>,
    rng: ChaCha8Rng,
    next_id: u64,
    measure_from: Slot,
    measure_to: Slot,
    delays: DelayRecorder,
    reorder: ReorderDetector,
    continuity: Option<[ContinuityChecker; 2]>,
    arrivals: u64,
    departures: u64,
    pending_measured: u64,
    idle_despite_backlog: u64,
    crossing: Vec<(usize, Packet)>,
    trace: Option<&'a mut dyn FnMut(TraceEvent)>,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &SwitchConfig) -> Result<Self> {
        cfg.validate()?;
        let policy = build_policy(cfg)?;
        Ok(Self::with_policy(cfg, policy))
    }

    /// Engine around a caller-supplied policy; `cfg` is assumed valid.
    pub fn with_policy(cfg: &SwitchConfig, policy: Box<dyn SwitchPolicy>) -> Self {
        let n = cfg.n_ports;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(TRAFFIC_STREAM);
        let measure_from = cfg.warmup_slots();
        let continuity = policy.striped().then(|| {
            [
                ContinuityChecker::new(n, Stage::InputToIntermediate),
                ContinuityChecker::new(n, Stage::IntermediateToOutput),
            ]
        });
        Simulator {
            cfg: cfg.clone(),
            n,
            t: 0,
            policy,
            rng,
            next_id: 0,
            measure_from,
            measure_to: measure_from + cfg.duration_slots,
            delays: DelayRecorder::default(),
            reorder: ReorderDetector::new(n),
            continuity,
            arrivals: 0,
            departures: 0,
            pending_measured: 0,
            idle_despite_backlog: 0,
            crossing: Vec::with_capacity(n),
            trace: None,
        }
    }

    pub fn set_trace(&mut self, sink: &'a mut dyn FnMut(TraceEvent)) {
        self.trace = Some(sink);
    }

    pub fn now(&self) -> Slot {
        self.t
    }

    pub fn policy(&self) -> &dyn SwitchPolicy {
        self.policy.as_ref()
    }

    fn emit(&mut self, kind: TraceKind, port: usize, p: &Packet) {
        if let Some(sink) = self.trace.as_mut() {
            sink(TraceEvent { slot: self.t, kind, port, packet_id: p.id, fake: p.fake });
        }
    }

    fn measured(&self, arrival: Slot) -> bool {
        (self.measure_from..self.measure_to).contains(&arrival)
    }

    /// Injects one packet at the current slot, bypassing the traffic generator.
    pub fn inject(&mut self, input: usize, output: usize) -> Result<u64> {
        let id = self.next_id;
        self.next_id += 1;
        self.admit(Packet::new(id, input, output, self.t))?;
        Ok(id)
    }

    fn admit(&mut self, p: Packet) -> Result<()> {
        self.arrivals += 1;
        if self.measured(p.arrival_slot) {
            self.pending_measured += 1;
        }
        self.emit(TraceKind::Arrival, p.input, &p);
        self.policy.on_arrival(p, self.t)
    }

    /// Advances one slot, generating traffic from the configured spec.
    pub fn step(&mut self) -> Result<()> {
        for i in 1..=self.n {
            if let Some(p) = generate_arrivals(&self.cfg.traffic, self.n, i, self.t, self.next_id, &mut self.rng) {
                self.next_id += 1;
                self.admit(p)?;
            }
        }
        self.switch_slot()
    }

    /// Advances one slot without generating traffic.
    pub fn step_quiet(&mut self) -> Result<()> {
        self.switch_slot()
    }

    fn switch_slot(&mut self) -> Result<()> {
        let (n, t) = (self.n, self.t);

        for i in 1..=n {
            let l = first_fabric(i, t, n);
            match self.policy.serve_input(i, l, t)? {
                RowService::Served(p) => {
                    if p.input != i {
                        return invariant(format!("input {i} sent packet {} of input {}", p.id, p.input));
                    }
                    if let Some(c) = self.continuity.as_mut() {
                        c[0].observe(i, l, &p, t)?;
                    }
                    self.emit(TraceKind::ToIntermediate, l, &p);
                    self.crossing.push((l, p));
                }
                RowService::Blocked => self.idle_despite_backlog += 1,
                RowService::Idle => {}
            }
        }

        for l in 1..=n {
            let j = second_fabric(l, t, n);
            match self.policy.serve_intermediate(l, j, t)? {
                RowService::Served(p) => {
                    if p.output != j {
                        return invariant(format!(
                            "intermediate {l} sent packet {} for output {} to output {j}",
                            p.id, p.output
                        ));
                    }
                    if let Some(c) = self.continuity.as_mut() {
                        c[1].observe(j, l, &p, t)?;
                    }
                    self.emit(TraceKind::ToOutput, j, &p);
                    for d in self.policy.deliver(j, p, t)? {
                        self.depart(j, d);
                    }
                }
                RowService::Blocked => self.idle_despite_backlog += 1,
                RowService::Idle => {}
            }
        }

        let mut crossing = std::mem::take(&mut self.crossing);
        for (l, p) in crossing.drain(..) {
            self.policy.accept_intermediate(l, p, t)?;
        }
        self.crossing = crossing;

        if let Some(c) = self.continuity.as_ref() {
            c[0].end_slot(t)?;
            c[1].end_slot(t)?;
        }
        self.policy.end_of_slot(t)?;
        self.t += 1;
        if self.t.is_multiple_of(self.cfg.audit_interval_slots()) {
            self.audit()?;
        }
        Ok(())
    }

    fn depart(&mut self, j: usize, mut p: Packet) {
        debug_assert!(!p.fake);
        p.depart_slot = Some(self.t);
        self.departures += 1;
        self.reorder.observe(&p);
        if self.measured(p.arrival_slot) {
            self.delays.record(self.t - p.arrival_slot);
            self.pending_measured -= 1;
        }
        self.emit(TraceKind::Departure, j, &p);
    }

    /// Checks `arrivals == departures + packets held` by recounting the buffers.
    pub fn audit(&self) -> Result<()> {
        let held = self.policy.held_packets() as u64;
        if self.arrivals != self.departures + held {
            return invariant(format!(
                "slot {}: {} arrivals but {} departures + {held} held",
                self.t, self.arrivals, self.departures
            ));
        }
        Ok(())
    }

    /// Runs warm-up and measurement, then keeps traffic flowing until every
    /// measured packet has left or another `duration_slots` have passed.
    pub fn run_to_completion(mut self) -> Result<SimMetrics> {
        while self.t < self.measure_to {
            self.step()?;
        }
        let deadline = self.measure_to + self.cfg.duration_slots;
        while self.pending_measured > 0 && self.t < deadline {
            self.step()?;
        }
        self.audit()?;
        Ok(self.metrics())
    }

    pub fn metrics(&self) -> SimMetrics {
        let stats = self.policy.queue_stats();
        let mut m = SimMetrics {
            mean_delay: self.delays.mean(),
            p99_delay: self.delays.p99(),
            delay_histogram: self.delays.histogram().to_vec(),
            reorder_events: self.reorder.events(),
            per_queue_peak: stats.peaks(),
            served_packets: self.delays.count(),
            arrivals: self.arrivals,
            departures: self.departures,
            idle_despite_backlog: self.idle_despite_backlog,
            overloaded_queues: stats.overloaded(self.t),
            ..SimMetrics::default()
        };
        self.policy.report(&mut m);
        m
    }

    /// Stripes that completed each fabric crossing (striped policies only).
    pub fn stripes_checked(&self) -> Option<(u64, u64)> {
        self.continuity.as_ref().map(|c| (c[0].stripes(), c[1].stripes()))
    }
}

/// Simulates `cfg`; deterministic in `(cfg, cfg.seed)`.
pub fn run(cfg: &SwitchConfig) -> Result<SimMetrics> {
    Simulator::new(cfg)?.run_to_completion()
}

/// Like [`run`], passing every event to `sink`.
pub fn run_traced(cfg: &SwitchConfig, sink: &mut dyn FnMut(TraceEvent)) -> Result<SimMetrics> {
    let mut sim = Simulator::new(cfg)?;
    sim.set_trace(sink);
    sim.run_to_completion()
}
