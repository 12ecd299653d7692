use crate::error::{invariant, Result};
use crate::lsf::fifo_array::{FifoArray, RowService};
use crate::model::{Packet, Slot};
use crate::sim::fabric::second_fabric;

/// The intermediate stage as `N` virtual grids, one per output.
///
/// Row `l` of output `j`'s grid physically lives at intermediate port `l`;
/// the per-region service state of each grid is shared by all its rows.
#[derive(Clone, Debug)]
pub struct IntermediateStage {
    n: usize,
    grids: Vec<FifoArray>,
}

impl IntermediateStage {
    pub fn new(n: usize) -> Self {
        IntermediateStage { n, grids: (0..n).map(|_| FifoArray::new(n)).collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Virtual grid of output `j`.
    pub fn grid(&self, j: usize) -> &FifoArray {
        &self.grids[j - 1]
    }

    /// Buffers a packet that crossed the first fabric into port `l`.
    ///
    /// The size class comes from the packet's stripe-size header only.
    pub fn intermediate_enqueue(&mut self, l: usize, packet: Packet) -> Result<()> {
        let Some(size) = packet.stripe_size.filter(|s| s.is_power_of_two() && *s <= self.n) else {
            return invariant(format!("packet {} reached port {l} without a valid stripe-size header", packet.id));
        };
        let class = size.trailing_zeros() as usize;
        let j = packet.output;
        self.grids[j - 1].push(l, class, packet);
        Ok(())
    }

    /// Serves port `l` towards the output the second fabric connects it to at slot `t`.
    pub fn intermediate_serve(&mut self, l: usize, t: Slot) -> Result<RowService> {
        let j = second_fabric(l, t, self.n);
        self.grids[j - 1].serve_row(l)
    }

    /// Packets at port `l` waiting for output `j`.
    pub fn occupancy(&self, l: usize, j: usize) -> usize {
        self.grids[j - 1].row_len(l)
    }

    pub fn len(&self) -> usize {
        self.grids.iter().map(FifoArray::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StripeId;
    use crate::sim::fabric::intermediate_for_output;

    fn tagged(id: u64, input: usize, output: usize, seq: u64, size: usize) -> Packet {
        let mut p = Packet::new(id, input, output, 0);
        p.stripe = Some(StripeId { input, output, seq });
        p.stripe_size = Some(size);
        p
    }

    /// Slots at which output `j` is served, with the packet received (if any).
    fn drain(stage: &mut IntermediateStage, j: usize, from: Slot, slots: u64) -> Vec<(Slot, u64)> {
        let n = stage.n();
        let mut got = Vec::new();
        for t in from..from + slots {
            for l in 1..=n {
                if let RowService::Served(p) = stage.intermediate_serve(l, t).unwrap() {
                    if p.output == j {
                        got.push((t, p.id));
                    }
                }
            }
        }
        got
    }

    #[test]
    fn size_one_lands_in_one_port() {
        let mut st = IntermediateStage::new(8);
        st.intermediate_enqueue(3, tagged(0, 1, 2, 0, 1)).unwrap();
        assert_eq!(st.len(), 1);
        assert_eq!(st.occupancy(3, 2), 1);
        assert_eq!((1..=8).filter(|&l| st.occupancy(l, 2) > 0).count(), 1);
    }

    #[test]
    fn full_stripe_occupies_every_port_in_same_class() {
        let mut st = IntermediateStage::new(8);
        for l in 1..=8 {
            st.intermediate_enqueue(l, tagged(l as u64, 1, 4, 0, 8)).unwrap();
        }
        for l in 1..=8 {
            assert_eq!(st.grid(4).fifo(l, 3).len(), 1);
        }
    }

    #[test]
    fn size_four_reaches_output_in_consecutive_slots() {
        let mut st = IntermediateStage::new(8);
        for l in 1..=4 {
            st.intermediate_enqueue(l, tagged(l as u64, 2, 5, 0, 4)).unwrap();
        }
        let got = drain(&mut st, 5, 0, 16);
        assert_eq!(got.len(), 4);
        let start = got[0].0;
        assert_eq!(intermediate_for_output(5, start, 8), 1);
        for (k, (t, id)) in got.iter().enumerate() {
            assert_eq!(*t, start + k as u64);
            assert_eq!(*id, k as u64 + 1);
        }
    }

    #[test]
    fn two_full_stripes_do_not_interleave() {
        let mut st = IntermediateStage::new(4);
        for (input, base) in [(1usize, 0u64), (2, 10)] {
            for l in 1..=4 {
                st.intermediate_enqueue(l, tagged(base + l as u64, input, 3, 0, 4)).unwrap();
            }
        }
        let ids: Vec<u64> = drain(&mut st, 3, 0, 12).into_iter().map(|(_, id)| id).collect();
        assert_eq!(ids, vec![1, 2, 3, 4, 11, 12, 13, 14]);
    }

    #[test]
    fn empty_stage_idles() {
        let mut st = IntermediateStage::new(4);
        for t in 0..8 {
            for l in 1..=4 {
                assert_eq!(st.intermediate_serve(l, t).unwrap(), RowService::Idle);
            }
        }
    }

    #[test]
    fn missing_header_is_rejected() {
        let mut st = IntermediateStage::new(4);
        assert!(st.intermediate_enqueue(1, Packet::new(0, 1, 1, 0)).is_err());
    }
}
