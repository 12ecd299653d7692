//! Periodic connection patterns of the two switching fabrics.

use crate::model::Slot;

/// Intermediate port connected to input `i` at slot `t`: `((i + t) mod N) + 1`.
pub fn first_fabric(i: usize, t: Slot, n: usize) -> usize {
    ((i as u64 + t) % n as u64) as usize + 1
}

/// Output port connected to intermediate `l` at slot `t`: `((l - t) mod N) + 1`.
pub fn second_fabric(l: usize, t: Slot, n: usize) -> usize {
    let n64 = n as u64;
    ((l as u64 + n64 - t % n64) % n64) as usize + 1
}

/// Intermediate port connected to output `j` at slot `t` (inverse of [`second_fabric`]).
pub fn intermediate_for_output(j: usize, t: Slot, n: usize) -> usize {
    let n64 = n as u64;
    ((j as u64 + n64 - 1 + t % n64 - 1) % n64) as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_fabric_examples() {
        assert_eq!(first_fabric(1, 0, 8), 2);
        assert_eq!(first_fabric(8, 0, 8), 1);
        for i in 1..=8 {
            for t in 0..40 {
                assert_eq!(first_fabric(i, t, 8), first_fabric(i, t + 8, 8));
                // consecutive slots reach consecutive intermediates
                let l = first_fabric(i, t, 8);
                assert_eq!(first_fabric(i, t + 1, 8), l % 8 + 1);
            }
        }
    }

    #[test]
    fn second_fabric_examples() {
        assert_eq!(second_fabric(1, 1, 8), 1);
        for t in 0..40u64 {
            let mut outs: Vec<usize> = (1..=8).map(|l| second_fabric(l, t, 8)).collect();
            outs.sort_unstable();
            assert_eq!(outs, (1..=8).collect::<Vec<_>>());
            for l in 1..=8 {
                assert_eq!(second_fabric(l, t, 8), second_fabric(l, t + 8, 8));
                let j = second_fabric(l, t, 8);
                assert_eq!(intermediate_for_output(j, t, 8), l);
            }
        }
    }

    #[test]
    fn every_pair_meets_once_per_cycle() {
        let n = 16;
        for start in [0u64, 5, 1000] {
            let mut first = vec![0u32; n * n];
            let mut second = vec![0u32; n * n];
            for t in start..start + n as u64 {
                for p in 1..=n {
                    first[(p - 1) * n + first_fabric(p, t, n) - 1] += 1;
                    second[(p - 1) * n + second_fabric(p, t, n) - 1] += 1;
                }
            }
            assert!(first.iter().all(|&c| c == 1));
            assert!(second.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn outputs_scan_intermediates_in_increasing_order() {
        let n = 8;
        for j in 1..=n {
            for t in 0..32u64 {
                let l = intermediate_for_output(j, t, n);
                assert_eq!(intermediate_for_output(j, t + 1, n), l % n + 1);
            }
        }
    }
}
