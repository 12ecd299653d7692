use rand::Rng;

use crate::model::{DestDist, Packet, Slot, TrafficSpec};

/// Bernoulli arrival at input `i` in slot `t`, with destination drawn from `spec.dest_dist`.
pub fn generate_arrivals<R: Rng + ?Sized>(
    spec: &TrafficSpec,
    n: usize,
    i: usize,
    t: Slot,
    id: u64,
    rng: &mut R,
) -> Option<Packet> {
    if !rng.gen_bool(spec.load) {
        return None;
    }
    let j = match spec.dest_dist {
        DestDist::Uniform => rng.gen_range(1..=n),
        DestDist::Diagonal => {
            if rng.gen_bool(0.5) {
                i
            } else {
                let k = rng.gen_range(1..n);
                if k < i {
                    k
                } else {
                    k + 1
                }
            }
        }
    };
    Some(Packet::new(id, i, j, t))
}
