use std::collections::{BTreeMap, VecDeque};

use crate::error::{invariant, Result};
use crate::lsf::RowService;
use crate::model::{Packet, PolicyKind, SimMetrics, Slot, SwitchConfig};
use crate::sim::{QueueStats, Stage, SwitchPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameKind {
    /// Only full frames of `N` packets are sent, each starting at intermediate port 1.
    Ufs,
    /// Full frames first; otherwise partial frames, restored to order at the outputs.
    Foff,
    /// Full frames first; otherwise the longest VOQ is padded with fake packets
    /// once it holds more than `threshold` packets.
    Pf { threshold: usize },
}

#[derive(Clone, Debug)]
struct Input {
    voqs: Vec<VecDeque<Packet>>,
    queued: usize,
    /// Packet to send to each intermediate port during the current cycle.
    frame: Vec<Option<Packet>>,
    frame_left: usize,
    /// Per-VOQ intermediate port (0-based) where its next FOFF frame starts.
    spread: Vec<usize>,
    rr_full: usize,
    rr_partial: usize,
}

/// Output-side resequencer: holds packets until every earlier packet of the same VOQ has left.
#[derive(Clone, Debug)]
struct Resequencer {
    order: Vec<VecDeque<u64>>,
    held: Vec<BTreeMap<u64, Packet>>,
    per_output: Vec<usize>,
    max_held: usize,
}

/// Frame-based comparators: UFS, FOFF and PF.
pub struct FramePolicy {
    n: usize,
    kind: FrameKind,
    inputs: Vec<Input>,
    mids: Vec<VecDeque<Packet>>,
    reseq: Option<Resequencer>,
    stats: QueueStats,
    fakes: u64,
}

impl FramePolicy {
    pub fn new(cfg: &SwitchConfig) -> Self {
        let kind = match cfg.policy {
            PolicyKind::Ufs => FrameKind::Ufs,
            PolicyKind::Foff => FrameKind::Foff,
            PolicyKind::Pf => FrameKind::Pf { threshold: cfg.pf_threshold() },
            other => panic!("{other} is not a frame-based policy"),
        };
        Self::with_kind(cfg.n_ports, kind)
    }

    pub fn with_kind(n: usize, kind: FrameKind) -> Self {
        let input = Input {
            voqs: vec![VecDeque::new(); n],
            queued: 0,
            frame: vec![None; n],
            frame_left: 0,
            spread: vec![0; n],
            rr_full: 0,
            rr_partial: 0,
        };
        let reseq = (kind == FrameKind::Foff).then(|| Resequencer {
            order: vec![VecDeque::new(); n * n],
            held: vec![BTreeMap::new(); n * n],
            per_output: vec![0; n],
            max_held: 0,
        });
        FramePolicy {
            n,
            kind,
            inputs: vec![input; n],
            mids: vec![VecDeque::new(); n * n],
            reseq,
            stats: QueueStats::new(n),
            fakes: 0,
        }
    }

    /// Largest number of packets ever waiting in one output's resequencer.
    pub fn max_reorder_buffer(&self) -> usize {
        self.reseq.as_ref().map_or(0, |r| r.max_held)
    }

    /// Loads the next frame of input `i` at the start of a cycle; returns
    /// `false` when the policy holds its packets back for now.
    fn select_frame(&mut self, i: usize, t: Slot) -> bool {
        let n = self.n;
        let kind = self.kind;
        let inp = &mut self.inputs[i - 1];
        let full = (0..n).map(|k| (inp.rr_full + k) % n).find(|&j| inp.voqs[j].len() >= n);
        let (j, take) = match (full, kind) {
            (Some(j), _) => {
                inp.rr_full = (j + 1) % n;
                (j, n)
            }
            (None, FrameKind::Ufs) => return false,
            (None, FrameKind::Foff) => {
                let Some(j) = (0..n).map(|k| (inp.rr_partial + k) % n).find(|&j| !inp.voqs[j].is_empty()) else {
                    return false;
                };
                inp.rr_partial = (j + 1) % n;
                (j, inp.voqs[j].len())
            }
            (None, FrameKind::Pf { threshold }) => {
                let mut best: Option<usize> = None;
                for j in (0..n).map(|k| (inp.rr_partial + k) % n) {
                    if best.is_none_or(|b| inp.voqs[j].len() > inp.voqs[b].len()) {
                        best = Some(j);
                    }
                }
                let Some(j) = best else { return false };
                if inp.voqs[j].len() <= threshold {
                    return false;
                }
                inp.rr_partial = (j + 1) % n;
                (j, inp.voqs[j].len())
            }
        };
        inp.queued -= take;
        // FOFF continues each VOQ where its previous frame stopped; the
        // other policies always lay a frame out from intermediate port 1.
        let first = if kind == FrameKind::Foff { inp.spread[j] } else { 0 };
        for (q, p) in inp.voqs[j].drain(..take).enumerate() {
            inp.frame[(first + q) % n] = Some(p);
        }
        inp.spread[j] = (first + take) % n;
        if let FrameKind::Pf { .. } = kind {
            for slot in inp.frame.iter_mut().filter(|s| s.is_none()) {
                *slot = Some(Packet::fake(i, j + 1, t));
            }
            self.fakes += (n - take) as u64;
        }
        inp.frame_left = inp.frame.iter().flatten().count();
        true
    }
}

impl SwitchPolicy for FramePolicy {
    fn on_arrival(&mut self, packet: Packet, _t: Slot) -> Result<()> {
        if let Some(r) = self.reseq.as_mut() {
            r.order[(packet.input - 1) * self.n + (packet.output - 1)].push_back(packet.id);
        }
        let inp = &mut self.inputs[packet.input - 1];
        inp.queued += 1;
        inp.voqs[packet.output - 1].push_back(packet);
        Ok(())
    }

    fn serve_input(&mut self, i: usize, l: usize, t: Slot) -> Result<RowService> {
        if l == 1 && self.inputs[i - 1].frame_left == 0 {
            self.select_frame(i, t);
        }
        let inp = &mut self.inputs[i - 1];
        match inp.frame[l - 1].take() {
            Some(p) => {
                inp.frame_left -= 1;
                Ok(RowService::Served(p))
            }
            None if inp.queued > 0 || inp.frame_left > 0 => Ok(RowService::Blocked),
            None => Ok(RowService::Idle),
        }
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

    fn deliver(&mut self, j: usize, packet: Packet, _t: Slot) -> Result<Vec<Packet>> {
        if packet.fake {
            return Ok(Vec::new());
        }
        let Some(r) = self.reseq.as_mut() else {
            return Ok(vec![packet]);
        };
        let n = self.n;
        let voq = (packet.input - 1) * n + (j - 1);
        r.held[voq].insert(packet.id, packet);
        r.per_output[j - 1] += 1;
        let mut out = Vec::new();
        while let Some(&next) = r.order[voq].front() {
            let Some(p) = r.held[voq].remove(&next) else { break };
            r.order[voq].pop_front();
            r.per_output[j - 1] -= 1;
            out.push(p);
        }
        r.max_held = r.max_held.max(r.per_output[j - 1]);
        if r.per_output[j - 1] > n * n {
            return invariant(format!(
                "output {j} resequencer holds {} packets, above N^2 = {}",
                r.per_output[j - 1],
                n * n
            ));
        }
        Ok(out)
    }

    fn held_packets(&self) -> usize {
        let real = |q: &VecDeque<Packet>| q.iter().filter(|p| !p.fake).count();
        self.inputs.iter().map(|inp| inp.queued + inp.frame.iter().flatten().filter(|p| !p.fake).count()).sum::<usize>()
            + self.mids.iter().map(real).sum::<usize>()
            + self.reseq.as_ref().map_or(0, |r| r.per_output.iter().sum())
    }

    fn queue_stats(&self) -> &QueueStats {
        &self.stats
    }

    fn report(&self, m: &mut SimMetrics) {
        m.max_reorder_buffer = self.max_reorder_buffer();
        m.fake_packets = self.fakes;
    }
}
