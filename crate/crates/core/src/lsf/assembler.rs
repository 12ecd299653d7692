use std::collections::VecDeque;

use crate::model::{Packet, Slot, Stripe, StripeId, StripeInterval};

/// Per-VOQ ready queue that groups packets, in arrival order, into stripes.
///
/// A resize takes effect only once every packet of the old size has left the
/// intermediate stage (`in_flight == 0`); until then no stripe is formed and
/// the ready queue may grow past the target size.
#[derive(Clone, Debug)]
pub struct StripeAssembler {
    input: usize,
    output: usize,
    size: usize,
    interval: StripeInterval,
    ready: VecDeque<Packet>,
    pending: Option<(usize, StripeInterval)>,
    in_flight: usize,
    next_seq: u64,
}

impl StripeAssembler {
    pub fn new(input: usize, output: usize, size: usize, interval: StripeInterval) -> Self {
        assert_eq!(size, interval.len(), "stripe size must match its interval");
        StripeAssembler {
            input,
            output,
            size,
            interval,
            ready: VecDeque::new(),
            pending: None,
            in_flight: 0,
            next_seq: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn interval(&self) -> StripeInterval {
        self.interval
    }

    pub fn ready_len(&self) -> usize {
        self.ready.len()
    }

    /// Packets of this VOQ that left the ready queue but not yet the switch.
    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn resize_pending(&self) -> bool {
        self.pending.is_some()
    }

    /// Appends `packet`; emits a stripe if the ready queue reaches the target size.
    pub fn offer_packet(&mut self, packet: Packet, slot: Slot) -> Option<Stripe> {
        debug_assert_eq!((packet.input, packet.output), (self.input, self.output));
        self.ready.push_back(packet);
        self.poll(slot)
    }

    /// Emits at most one full stripe, first applying a pending resize once drained.
    pub fn poll(&mut self, slot: Slot) -> Option<Stripe> {
        if let Some((size, interval)) = self.pending {
            if self.in_flight > 0 {
                return None;
            }
            self.size = size;
            self.interval = interval;
            self.pending = None;
        }
        if self.ready.len() < self.size {
            return None;
        }
        let id = StripeId { input: self.input, output: self.output, seq: self.next_seq };
        self.next_seq += 1;
        let packets: Vec<Packet> = self
            .ready
            .drain(..self.size)
            .map(|mut p| {
                p.stripe_size = Some(self.size);
                p.stripe = Some(id);
                p
            })
            .collect();
        self.in_flight += packets.len();
        Some(Stripe { id, size: self.size, interval: self.interval, packets, formation_slot: slot })
    }

    /// Schedules a size change; ignored if it matches the size already in force.
    pub fn request_resize(&mut self, size: usize, interval: StripeInterval) {
        assert_eq!(size, interval.len(), "stripe size must match its interval");
        if self.pending.is_none() && size == self.size {
            return;
        }
        self.pending = if size == self.size { None } else { Some((size, interval)) };
    }

    /// A packet of this VOQ left the intermediate stage.
    pub fn packet_departed(&mut self) {
        self.in_flight = self.in_flight.checked_sub(1).expect("departure without a packet in flight");
    }
}
