//! Stability analysis of the per-port queues: the exact queue rate under a
//! given primary-port permutation, the zero-overload threshold with its
//! extremal rate vector, the Chernoff overload bound, a Monte-Carlo check of
//! it, and the cycle-level queue-length chain.

mod chernoff;
mod markov;
mod rates;

pub use chernoff::{
    chernoff_bound, h_func, ln_h, log_objective, p_star, switch_wide_bound, BoundRegime, ChernoffBound,
};
pub use markov::{default_truncation, linear_fit, markov_expected_queue, MarkovChainSpec, MarkovSolution, Orientation};
pub use rates::{
    extremal_rate_vector, monte_carlo_overload, queue_rate, theorem1_threshold, wilson_interval, OverloadEstimate,
    RateVector,
};
