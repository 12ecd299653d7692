//! Reference data and exact oracles used by the acceptance suite.

use sprinklers::analysis::RateVector;

/// Reference values of the per-queue overload bound: rows ρ = 0.90..0.97,
/// columns N = 1024, 2048, 4096.
pub const PUBLISHED_TABLE: [[f64; 3]; 8] = [
    [1.21e-18, 1.14e-29, 6.10e-30],
    [3.06e-15, 4.91e-29, 7.10e-30],
    [3.54e-12, 1.26e-23, 9.10e-30],
    [1.76e-9, 3.09e-18, 1.58e-29],
    [3.76e-7, 1.42e-13, 2.00e-26],
    [3.50e-5, 1.22e-9, 1.48e-18],
    [1.41e-3, 1.99e-6, 3.97e-12],
    [2.50e-2, 6.24e-4, 3.90e-7],
];
/// Relative tolerance per reference cell.
pub const TABLE_TOLERANCE: f64 = 0.10;
/// Reference switch-wide bound at N = 2048, ρ = 0.93.
pub const PUBLISHED_SWITCH_WIDE: f64 = 1.30e-11;

/// Integer rate vector in units of `1/denom`, with `denom = n² · 2^16`.
///
/// All rates are dyadic, so the f64 library route sees them exactly.
pub struct UnitRates {
    pub n: usize,
    pub denom: i64,
    pub units: Vec<i64>,
}

impl UnitRates {
    pub fn rates(&self) -> RateVector {
        RateVector::new(self.units.iter().map(|&k| k as f64 / self.denom as f64).collect()).unwrap()
    }

    /// Stripe size from integer arithmetic: smallest power of two `p` with
    /// `p · denom ≥ k · n²`, capped at `n`.
    pub fn size(&self, k: i64) -> i64 {
        let n = self.n as i64;
        let mut p = 1;
        while p < n && p * self.denom < k * n * n {
            p *= 2;
        }
        p
    }

    /// `n · denom · X` for primary ports `sigma`; overload iff this reaches `denom`.
    pub fn scaled_queue_rate(&self, sigma: &[usize]) -> i64 {
        let n = self.n as i64;
        self.units
            .iter()
            .zip(sigma)
            .filter(|(&k, _)| k > 0)
            .map(|(&k, &p)| {
                let f = self.size(k);
                if (p as i64) <= f {
                    k * (n / f)
                } else {
                    0
                }
            })
            .sum()
    }

    pub fn below_threshold(&self) -> bool {
        let nsq = (self.n * self.n) as i64;
        3 * nsq * self.units.iter().sum::<i64>() < (2 * nsq + 1) * self.denom
    }
}
