//! Sprinklers: a load-balanced switch that keeps packets in order by
//! striping each flow over a dyadic range of intermediate ports, sized to
//! the flow's rate.
//!
//! The crate contains a slot-accurate simulator of the switch and of four
//! reference policies, and the stability analysis of its per-port queues.

pub mod analysis;
pub mod comparators;
pub mod error;
pub mod experiment;
pub mod lsf;
pub mod model;
pub mod sim;
pub mod striping;

pub use error::{Error, Result};
pub use model::{
    DestDist, Packet, PolicyKind, RateMode, SimMetrics, Slot, Stripe, StripeId, StripeInterval, SwitchConfig,
    TrafficSpec,
};
pub use sim::run;
