//! Domain types shared by every other module.
//!
//! Ports are numbered `1..=N` everywhere (inputs, intermediates and outputs).
//! Modulo arithmetic on port numbers is normalised to `((x - 1) mod N) + 1`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::QueueId;

/// A time slot index. One fixed-size packet crosses a link per slot.
pub type Slot = u64;

/// Switch policy under simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Sprinklers,
    Baseline,
    Ufs,
    Foff,
    Pf,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] =
        [PolicyKind::Sprinklers, PolicyKind::Baseline, PolicyKind::Ufs, PolicyKind::Foff, PolicyKind::Pf];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Sprinklers => "sprinklers",
            PolicyKind::Baseline => "baseline",
            PolicyKind::Ufs => "ufs",
            PolicyKind::Foff => "foff",
            PolicyKind::Pf => "pf",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown policy `{s}`")))
    }
}

/// Destination distribution of arriving packets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DestDist {
    /// Every output with probability 1/N.
    Uniform,
    /// Output `j = i` with probability 1/2, every other output with 1/(2(N-1)).
    Diagonal,
}

impl DestDist {
    pub fn name(self) -> &'static str {
        match self {
            DestDist::Uniform => "uniform",
            DestDist::Diagonal => "diagonal",
        }
    }
}

impl fmt::Display for DestDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DestDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(DestDist::Uniform),
            "diagonal" => Ok(DestDist::Diagonal),
            _ => Err(Error::InvalidConfig(format!("unknown destination distribution `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    /// Per-input Bernoulli arrival probability per slot.
    pub load: f64,
    pub dest_dist: DestDist,
}

impl TrafficSpec {
    pub fn new(load: f64, dest_dist: DestDist) -> Self {
        TrafficSpec { load, dest_dist }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.load) {
            return Err(Error::InvalidConfig(format!("load {} outside [0, 1]", self.load)));
        }
        Ok(())
    }

    /// Long-run rate of VOQ `(input, output)` in packets per slot.
    pub fn voq_rate(&self, n: usize, input: usize, output: usize) -> f64 {
        match self.dest_dist {
            DestDist::Uniform => self.load / n as f64,
            DestDist::Diagonal if input == output => self.load / 2.0,
            DestDist::Diagonal => self.load / (2.0 * (n as f64 - 1.0)),
        }
    }
}

/// Where Sprinklers gets the VOQ rates that size its stripes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RateMode {
    /// True generator rates, fixed for the whole run.
    #[default]
    Oracle,
    /// Online EWMA estimates with hysteresis-gated resizing.
    Measured {
        /// EWMA half-life; defaults to `16 * N^2` slots.
        half_life_slots: Option<u64>,
        /// Resize decision period; defaults to the half-life.
        window_slots: Option<u64>,
    },
}

fn default_hysteresis() -> f64 {
    1.25
}

/// Full description of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchConfig {
    pub n_ports: usize,
    pub duration_slots: u64,
    pub seed: u64,
    pub policy: PolicyKind,
    pub traffic: TrafficSpec,
    /// PF padding threshold T; defaults to N/2.
    #[serde(default)]
    pub pf_threshold: Option<usize>,
    #[serde(default = "default_hysteresis")]
    pub resize_hysteresis: f64,
    /// Slots simulated before measurement starts; defaults to `duration_slots / 10`.
    #[serde(default)]
    pub warmup_slots: Option<u64>,
    #[serde(default)]
    pub rate_mode: RateMode,
    /// Period of the full conservation audit; defaults to `N^2` slots.
    #[serde(default)]
    pub audit_interval_slots: Option<u64>,
}

impl SwitchConfig {
    pub fn new(n_ports: usize, policy: PolicyKind, traffic: TrafficSpec, duration_slots: u64, seed: u64) -> Self {
        SwitchConfig {
            n_ports,
            duration_slots,
            seed,
            policy,
            traffic,
            pf_threshold: None,
            resize_hysteresis: default_hysteresis(),
            warmup_slots: None,
            rate_mode: RateMode::Oracle,
            audit_interval_slots: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SwitchConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_ports;
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidConfig(format!("n_ports {n} must be a power of two >= 2")));
        }
        if self.duration_slots < n as u64 {
            return Err(Error::InvalidConfig(format!(
                "duration_slots {} must be at least n_ports {n}",
                self.duration_slots
            )));
        }
        self.traffic.validate()?;
        if let Some(t) = self.pf_threshold {
            if t == 0 {
                return Err(Error::InvalidConfig("pf_threshold must be positive".into()));
            }
        }
        if self.resize_hysteresis.is_nan() || self.resize_hysteresis < 1.0 {
            return Err(Error::InvalidConfig(format!("resize_hysteresis {} must be >= 1", self.resize_hysteresis)));
        }
        if let RateMode::Measured { half_life_slots, window_slots } = self.rate_mode {
            if half_life_slots == Some(0) || window_slots == Some(0) {
                return Err(Error::InvalidConfig("measurement periods must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn pf_threshold(&self) -> usize {
        self.pf_threshold.unwrap_or(self.n_ports / 2)
    }

    pub fn warmup_slots(&self) -> u64 {
        self.warmup_slots.unwrap_or(self.duration_slots / 10)
    }

    pub fn audit_interval_slots(&self) -> u64 {
        self.audit_interval_slots.unwrap_or((self.n_ports * self.n_ports) as u64).max(1)
    }
}

/// Identifies a stripe: the `seq`-th stripe formed by VOQ `(input, output)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StripeId {
    pub input: usize,
    pub output: usize,
    pub seq: u64,
}

impl fmt::Display for StripeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}#{}", self.input, self.output, self.seq)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    /// Global arrival sequence number. Within a VOQ, id order is arrival order.
    pub id: u64,
    pub input: usize,
    pub output: usize,
    pub arrival_slot: Slot,
    /// Stripe (or frame) size header, set when the packet joins a stripe.
    pub stripe_size: Option<usize>,
    pub stripe: Option<StripeId>,
    pub depart_slot: Option<Slot>,
    /// Padding packet (PF only); never counted in any metric.
    pub fake: bool,
}

impl Packet {
    pub fn new(id: u64, input: usize, output: usize, arrival_slot: Slot) -> Self {
        Packet { id, input, output, arrival_slot, stripe_size: None, stripe: None, depart_slot: None, fake: false }
    }

    pub fn fake(input: usize, output: usize, slot: Slot) -> Self {
        Packet { fake: true, ..Packet::new(u64::MAX, input, output, slot) }
    }

    pub fn delay(&self) -> Option<u64> {
        self.depart_slot.map(|d| d - self.arrival_slot)
    }
}

/// Dyadic range `(lo, hi]` of intermediate ports, i.e. ports `lo+1..=hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StripeInterval {
    lo: usize,
    hi: usize,
}

impl StripeInterval {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if hi <= lo {
            return Err(Error::Domain(format!("empty interval ({lo}, {hi}]")));
        }
        let len = hi - lo;
        if !len.is_power_of_two() || !lo.is_multiple_of(len) {
            return Err(Error::Domain(format!("({lo}, {hi}] is not dyadic")));
        }
        Ok(StripeInterval { lo, hi })
    }

    /// The size-`size` dyadic interval containing `port`.
    pub(crate) fn containing(port: usize, size: usize) -> Self {
        debug_assert!(port >= 1 && size.is_power_of_two());
        let lo = (port - 1) / size * size;
        StripeInterval { lo, hi: lo + size }
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first_port(&self) -> usize {
        self.lo + 1
    }

    pub fn contains(&self, port: usize) -> bool {
        port > self.lo && port <= self.hi
    }

    /// Size class `k` with `len == 2^k`.
    pub fn class(&self) -> usize {
        self.len().trailing_zeros() as usize
    }

    pub fn ports(&self) -> std::ops::RangeInclusive<usize> {
        self.lo + 1..=self.hi
    }
}

impl fmt::Display for StripeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}]", self.lo, self.hi)
    }
}

/// A group of `size` consecutive packets of one VOQ, switched as one unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Stripe {
    pub id: StripeId,
    pub size: usize,
    pub interval: StripeInterval,
    pub packets: Vec<Packet>,
    /// Slot in which the last packet joined.
    pub formation_slot: Slot,
}

impl Stripe {
    pub fn voq(&self) -> (usize, usize) {
        (self.id.input, self.id.output)
    }
}

/// Results of one simulation run. Delay statistics cover packets that arrived after warm-up.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimMetrics {
    pub mean_delay: f64,
    pub p99_delay: u64,
    /// `delay_histogram[d]` counts measured packets with delay `d` slots.
    pub delay_histogram: Vec<u64>,
    /// Departures with a smaller id than an earlier departure of the same VOQ (whole run).
    pub reorder_events: u64,
    pub per_queue_peak: BTreeMap<QueueId, u32>,
    /// Real packets that arrived after warm-up and departed before the end.
    pub served_packets: u64,
    pub arrivals: u64,
    pub departures: u64,
    /// Connections where queued work for the connected port existed but nothing was sent.
    pub idle_despite_backlog: u64,
    /// Queues whose measured arrival rate reached the 1/N service rate.
    pub overloaded_queues: Vec<QueueId>,
    /// Largest output resequencing buffer seen (FOFF only).
    pub max_reorder_buffer: usize,
    pub fake_packets: u64,
    pub resize_events: u64,
}
