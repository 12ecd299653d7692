use rand::Rng;

use crate::error::{invariant, Result};
use crate::lsf::{FifoArray, IntermediateStage, RowService, StripeAssembler};
use crate::model::{Packet, RateMode, SimMetrics, Slot, Stripe, SwitchConfig};
use crate::sim::{QueueStats, Stage, SwitchPolicy};
use crate::striping::{assign_intervals, dyadic_interval, weak_ols, OlsMatrix, RateMatrix, ResizeController};

/// Striped switching with largest-stripe-first service at both stages.
pub struct SprinklersPolicy {
    n: usize,
    ols: OlsMatrix,
    assemblers: Vec<StripeAssembler>,
    inputs: Vec<FifoArray>,
    stage: IntermediateStage,
    stats: QueueStats,
    resize: Option<ResizeController>,
    resize_events: u64,
}

impl SprinklersPolicy {
    pub fn new<R: Rng + ?Sized>(cfg: &SwitchConfig, rng: &mut R) -> Result<Self> {
        let n = cfg.n_ports;
        let ols = weak_ols(n, rng);
        let mut policy = match cfg.rate_mode {
            RateMode::Oracle => Self::with_rates(&RateMatrix::from_traffic(&cfg.traffic, n), ols)?,
            RateMode::Measured { .. } => Self::with_rates(&RateMatrix::zeros(n), ols)?,
        };
        if let RateMode::Measured { half_life_slots, window_slots } = cfg.rate_mode {
            let half_life = half_life_slots.unwrap_or(16 * (n * n) as u64);
            let window = window_slots.unwrap_or(half_life);
            policy.resize = Some(ResizeController::new(n, half_life, window, cfg.resize_hysteresis, |_, _| 1));
        }
        Ok(policy)
    }

    /// Fixed stripe sizes derived from `rates` and primary ports from `ols`.
    pub fn with_rates(rates: &RateMatrix, ols: OlsMatrix) -> Result<Self> {
        let n = rates.n();
        let table = assign_intervals(rates, &ols)?;
        let mut assemblers = Vec::with_capacity(n * n);
        for i in 1..=n {
            for j in 1..=n {
                let v = table.get(i, j);
                assemblers.push(StripeAssembler::new(i, j, v.size, v.interval));
            }
        }
        Ok(SprinklersPolicy {
            n,
            ols,
            assemblers,
            inputs: (0..n).map(|_| FifoArray::new(n)).collect(),
            stage: IntermediateStage::new(n),
            stats: QueueStats::new(n),
            resize: None,
            resize_events: 0,
        })
    }

    pub fn ols(&self) -> &OlsMatrix {
        &self.ols
    }

    pub fn assembler(&self, i: usize, j: usize) -> &StripeAssembler {
        &self.assemblers[(i - 1) * self.n + (j - 1)]
    }

    pub fn input_array(&self, i: usize) -> &FifoArray {
        &self.inputs[i - 1]
    }

    pub fn intermediate(&self) -> &IntermediateStage {
        &self.stage
    }

    fn enqueue(&mut self, s: Stripe) {
        let i = s.id.input;
        for l in s.interval.ports() {
            self.stats.enter(Stage::InputToIntermediate, i, l);
        }
        self.inputs[i - 1].enqueue_stripe(s);
    }

    fn poll(&mut self, k: usize, t: Slot) {
        while let Some(s) = self.assemblers[k].poll(t) {
            self.enqueue(s);
        }
    }
}

impl SwitchPolicy for SprinklersPolicy {
    fn on_arrival(&mut self, packet: Packet, t: Slot) -> Result<()> {
        let (i, j) = (packet.input, packet.output);
        if let Some(r) = self.resize.as_mut() {
            r.record_arrival(i, j, t);
        }
        let k = (i - 1) * self.n + (j - 1);
        if let Some(s) = self.assemblers[k].offer_packet(packet, t) {
            self.enqueue(s);
        }
        Ok(())
    }

    fn serve_input(&mut self, i: usize, l: usize, _t: Slot) -> Result<RowService> {
        let out = self.inputs[i - 1].serve_row(l)?;
        if matches!(out, RowService::Served(_)) {
            self.stats.leave(Stage::InputToIntermediate, i, l);
        }
        Ok(out)
    }

    fn accept_intermediate(&mut self, l: usize, packet: Packet, _t: Slot) -> Result<()> {
        self.stats.enter(Stage::IntermediateToOutput, l, packet.output);
        self.stage.intermediate_enqueue(l, packet)
    }

    fn serve_intermediate(&mut self, l: usize, j: usize, t: Slot) -> Result<RowService> {
        let out = self.stage.intermediate_serve(l, t)?;
        if let RowService::Served(p) = &out {
            if p.output != j {
                return invariant(format!("intermediate {l} grid mismatch: packet {} for {}", p.id, p.output));
            }
            self.stats.leave(Stage::IntermediateToOutput, l, j);
            let k = (p.input - 1) * self.n + (j - 1);
            self.assemblers[k].packet_departed();
            if self.assemblers[k].resize_pending() {
                self.poll(k, t);
            }
        }
        Ok(out)
    }

    fn end_of_slot(&mut self, t: Slot) -> Result<()> {
        let Some(ctrl) = self.resize.as_mut() else {
            return Ok(());
        };
        if !(t + 1).is_multiple_of(ctrl.window()) {
            return Ok(());
        }
        for (i, j, size) in ctrl.window_end(t) {
            let interval = dyadic_interval(self.ols.get(i, j), size, self.n)?;
            let k = (i - 1) * self.n + (j - 1);
            self.assemblers[k].request_resize(size, interval);
            self.resize_events += 1;
            self.poll(k, t);
        }
        Ok(())
    }

    fn held_packets(&self) -> usize {
        self.assemblers.iter().map(StripeAssembler::ready_len).sum::<usize>()
            + self.inputs.iter().map(FifoArray::len).sum::<usize>()
            + self.stage.len()
    }

    fn queue_stats(&self) -> &QueueStats {
        &self.stats
    }

    fn striped(&self) -> bool {
        true
    }

    fn report(&self, m: &mut SimMetrics) {
        m.resize_events = self.resize_events;
    }
}
