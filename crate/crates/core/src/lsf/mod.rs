//! Largest-stripe-first scheduling: stripe assembly, the FIFO array with its
//! occupancy bitmap, and the per-output virtual grids of the intermediate stage.

mod assembler;
mod fifo_array;
mod grid;
mod intermediate;

pub use assembler::StripeAssembler;
pub use fifo_array::{FifoArray, RegionState, RowService};
pub use grid::{no_hole_check, ScheduleGrid};
pub use intermediate::IntermediateStage;
