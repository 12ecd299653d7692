use std::collections::VecDeque;

use crate::error::Result;
use crate::lsf::RowService;
use crate::model::{Packet, Slot};
use crate::sim::{QueueStats, Stage, SwitchPolicy};

/// Plain two-stage load balancing: every input sends its oldest packet to
/// whichever intermediate port it is connected to. Packets of one flow spread
/// over all intermediate ports and may leave out of order.
pub struct BaselinePolicy {
    n: usize,
    inputs: Vec<VecDeque<Packet>>,
    mids: Vec<VecDeque<Packet>>,
    stats: QueueStats,
}

impl BaselinePolicy {
    pub fn new(n: usize) -> Self {
        BaselinePolicy {
            n,
            inputs: vec![VecDeque::new(); n],
            mids: vec![VecDeque::new(); n * n],
            stats: QueueStats::new(n),
        }
    }
}

impl SwitchPolicy for BaselinePolicy {
    fn on_arrival(&mut self, packet: Packet, _t: Slot) -> Result<()> {
        self.inputs[packet.input - 1].push_back(packet);
        Ok(())
    }

    fn serve_input(&mut self, i: usize, _l: usize, _t: Slot) -> Result<RowService> {
        Ok(self.inputs[i - 1].pop_front().map_or(RowService::Idle, RowService::Served))
    }

    fn accept_intermediate(&mut self, l: usize, packet: Packet, _t: Slot) -> Result<()> {
        self.stats.enter(Stage::IntermediateToOutput, l, packet.output);
        self.mids[(l - 1) * self.n + (packet.output - 1)].push_back(packet);
        Ok(())
    }

    fn serve_intermediate(&mut self, l: usize, j: usize, _t: Slot) -> Result<RowService> {
        match self.mids[(l - 1) * self.n + (j - 1)].pop_front() {
            Some(p) => {
                self.stats.leave(Stage::IntermediateToOutput, l, j);
                Ok(RowService::Served(p))
            }
            None => Ok(RowService::Idle),
        }
    }

    fn held_packets(&self) -> usize {
        self.inputs.iter().chain(&self.mids).map(VecDeque::len).sum()
    }

    fn queue_stats(&self) -> &QueueStats {
        &self.stats
    }
}
