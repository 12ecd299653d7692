use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{invariant, Result};
use crate::model::{Packet, Stripe, StripeId};

/// Service state of one dyadic region within one size class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionState {
    Idle,
    InService { stripe: StripeId, next_row: usize },
}

/// Outcome of serving one row.
#[derive(Clone, Debug, PartialEq)]
pub enum RowService {
    Served(Packet),
    /// The row holds no packets.
    Idle,
    /// The row holds packets, but none of them may start or continue here.
    Blocked,
}

/// `N x (log2 N + 1)` packet FIFOs with a per-row occupancy bitmap.
///
/// Row `l` buffers packets bound for intermediate port `l`; class `k` holds
/// packets of stripes of size `2^k`. Service is largest-class-first, gated so
/// that a stripe starts only at the first row of its interval and, once
/// started, is served on consecutive rows without interruption.
#[derive(Clone, Debug)]
pub struct FifoArray {
    n: usize,
    classes: usize,
    fifos: Vec<VecDeque<Packet>>,
    bits: Vec<u64>,
    regions: Vec<Vec<RegionState>>,
    len: usize,
}

impl FifoArray {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 1 && n.trailing_zeros() < 63);
        let classes = n.trailing_zeros() as usize + 1;
        FifoArray {
            n,
            classes,
            fifos: vec![VecDeque::new(); n * classes],
            bits: vec![0; n],
            regions: (0..classes).map(|k| vec![RegionState::Idle; n >> k]).collect(),
            len: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn idx(&self, row: usize, class: usize) -> usize {
        debug_assert!((1..=self.n).contains(&row) && class < self.classes);
        (row - 1) * self.classes + class
    }

    pub fn fifo(&self, row: usize, class: usize) -> &VecDeque<Packet> {
        &self.fifos[self.idx(row, class)]
    }

    /// Bitmap of row `row`: bit `k` set iff FIFO `(row, k)` is nonempty.
    pub fn row_bits(&self, row: usize) -> u64 {
        self.bits[row - 1]
    }

    /// Packets queued for port `row`.
    pub fn row_len(&self, row: usize) -> usize {
        (0..self.classes).map(|k| self.fifo(row, k).len()).sum()
    }

    pub fn region_state(&self, row: usize, class: usize) -> RegionState {
        self.regions[class][(row - 1) >> class]
    }

    /// True when no stripe is partially served.
    pub fn all_idle(&self) -> bool {
        self.regions.iter().flatten().all(|s| *s == RegionState::Idle)
    }

    /// Appends one packet to FIFO `(row, class)`.
    pub fn push(&mut self, row: usize, class: usize, packet: Packet) {
        let i = self.idx(row, class);
        self.fifos[i].push_back(packet);
        self.bits[row - 1] |= 1 << class;
        self.len += 1;
        debug_assert!(self.row_coherent(row));
    }

    /// Plasters stripe `s` into its interval: packet `m` goes to row `lo + 1 + m`.
    pub fn enqueue_stripe(&mut self, s: Stripe) {
        debug_assert!(s.interval.hi() <= self.n);
        debug_assert_eq!(s.packets.len(), s.interval.len());
        let class = s.interval.class();
        let first = s.interval.first_port();
        for (m, p) in s.packets.into_iter().enumerate() {
            self.push(first + m, class, p);
        }
    }

    /// Serves the connected row `row` under the gated largest-first rule.
    pub fn serve_row(&mut self, row: usize) -> Result<RowService> {
        let mut bits = self.row_bits(row);
        if bits == 0 {
            return Ok(RowService::Idle);
        }
        while bits != 0 {
            let class = 63 - bits.leading_zeros() as usize;
            bits &= !(1 << class);
            let region = (row - 1) >> class;
            let head = self.fifo(row, class).front().and_then(|p| p.stripe);
            match self.regions[class][region] {
                RegionState::InService { stripe, next_row } => {
                    if next_row != row {
                        continue;
                    }
                    if head != Some(stripe) {
                        return invariant(format!(
                            "row {row} class {class}: stripe {stripe} in service but FIFO head is {}",
                            head.map_or("untagged".to_string(), |h| h.to_string())
                        ));
                    }
                }
                RegionState::Idle => {
                    if row != (region << class) + 1 {
                        continue;
                    }
                }
            }
            return Ok(RowService::Served(self.take(row, class)?));
        }
        Ok(RowService::Blocked)
    }

    fn take(&mut self, row: usize, class: usize) -> Result<Packet> {
        let i = self.idx(row, class);
        let packet = self.fifos[i].pop_front().expect("bitmap bit set for an empty FIFO");
        if self.fifos[i].is_empty() {
            self.bits[row - 1] &= !(1 << class);
        }
        self.len -= 1;
        let Some(stripe) = packet.stripe else {
            return invariant(format!("row {row} class {class}: packet {} carries no stripe tag", packet.id));
        };
        let region = (row - 1) >> class;
        let last_row = (region + 1) << class;
        self.regions[class][region] =
            if row == last_row { RegionState::Idle } else { RegionState::InService { stripe, next_row: row + 1 } };
        debug_assert!(self.row_coherent(row));
        Ok(packet)
    }

    fn row_coherent(&self, row: usize) -> bool {
        (0..self.classes).all(|k| ((self.row_bits(row) >> k) & 1 == 1) == !self.fifo(row, k).is_empty())
    }

    pub fn bitmap_coherent(&self) -> bool {
        (1..=self.n).all(|row| self.row_coherent(row))
    }

    /// Plain-text dump, one line per row, classes from largest to smallest.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for row in 1..=self.n {
            let _ = write!(out, "{row:>3} |");
            for k in (0..self.classes).rev() {
                let ids: Vec<String> = self
                    .fifo(row, k)
                    .iter()
                    .map(|p| p.stripe.map_or_else(|| format!("p{}", p.id), |s| s.to_string()))
                    .collect();
                let _ = write!(out, " [{}]", ids.join(" "));
            }
            out.push('\n');
        }
        out
    }
}
