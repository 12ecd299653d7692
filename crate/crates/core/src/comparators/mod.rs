//! Reference load-balanced switch policies run on the same engine as Sprinklers.
//!
//! These policies record only intermediate-to-output queues in their
//! [`QueueStats`](crate::sim::QueueStats); their input buffers are not split
//! per intermediate port.

mod baseline;
mod frame;

pub use baseline::BaselinePolicy;
pub use frame::{FrameKind, FramePolicy};
