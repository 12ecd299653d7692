use std::ops::Index;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{domain, Result};
use crate::striping::stripe_size;

/// Rates of the `N` VOQs of one input port, indexed by VOQ (`r[0]` is VOQ 1).
#[derive(Clone, Debug, PartialEq)]
pub struct RateVector(Vec<f64>);

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some(r) = rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return domain(format!("rate {r} is not a nonnegative number"));
        }
        let v = RateVector(rates);
        if v.total() > 1.0 + 1e-12 {
            return domain(format!("rates sum to {} > 1", v.total()));
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        RateVector::new(self.0.iter().map(|r| r * factor).collect())
    }
}

impl Index<usize> for RateVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Stripe size and per-port share of each VOQ; VOQs with zero rate are dropped.
fn shares(r: &RateVector, n: usize) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (k, &rate) in r.as_slice().iter().enumerate() {
        if rate > 0.0 {
            let f = stripe_size(rate, n)?;
            out.push((k, f, rate / f as f64));
        }
    }
    Ok(out)
}

/// Arrival rate of the queue from this input to intermediate port 1 when VOQ
/// `k` has primary port `sigma[k]`.
///
/// VOQ `k` feeds port 1 exactly when its stripe interval, the dyadic block of
/// size `f` containing `sigma[k]`, starts at port 1, i.e. when `sigma[k] <= f`.
pub fn queue_rate(r: &RateVector, sigma: &[usize], n: usize) -> Result<f64> {
    if r.len() != n || sigma.len() != n {
        return domain(format!("need {n} rates and {n} primary ports"));
    }
    let mut seen = vec![false; n];
    for &p in sigma {
        if p == 0 || p > n || std::mem::replace(&mut seen[p - 1], true) {
            return domain("primary ports must be a permutation of 1..=N");
        }
    }
    Ok(shares(r, n)?.into_iter().filter(|&(k, f, _)| sigma[k] <= f).map(|(_, _, s)| s).sum())
}

/// Total rate `2/3 + 1/(3N²)` below which no permutation overloads a queue.
pub fn theorem1_threshold(n: usize) -> f64 {
    2.0 / 3.0 + 1.0 / (3.0 * (n * n) as f64)
}

/// The rate vector that reaches `1/N` at the threshold total under the identity permutation.
///
/// VOQ `l` (for `l <= N/2`) gets rate `2^⌈log₂ l⌉ / N²`, VOQ `N/2 + 1` gets 1/2.
pub fn extremal_rate_vector(n: usize) -> Result<RateVector> {
    if n < 4 || !n.is_power_of_two() {
        return domain(format!("extremal vector needs a power of two >= 4, got {n}"));
    }
    let nsq = (n * n) as f64;
    let mut r = vec![0.0; n];
    for (l, slot) in r.iter_mut().enumerate().take(n / 2) {
        *slot = (l + 1).next_power_of_two() as f64 / nsq;
    }
    r[n / 2] = 0.5;
    RateVector::new(r)
}

/// Monte-Carlo estimate of `P(X >= 1/N)` over uniform primary-port permutations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverloadEstimate {
    pub hits: u64,
    pub trials: u64,
    pub estimate: f64,
    /// 95% Wilson score interval.
    pub lower: f64,
    pub upper: f64,
}

const Z95: f64 = 1.959964;

/// Wilson score interval for `hits` successes out of `trials`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    let m = trials as f64;
    let p = hits as f64 / m;
    let z2 = z * z;
    let denom = 1.0 + z2 / m;
    let centre = (p + z2 / (2.0 * m)) / denom;
    let half = z / denom * (p * (1.0 - p) / m + z2 / (4.0 * m * m)).sqrt();
    let lower = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let upper = if hits == trials { 1.0 } else { (centre + half).min(1.0) };
    (lower, upper)
}

/// Samples `trials` uniform permutations and counts those with `X >= 1/N`.
///
/// Only the primary ports of VOQs with nonzero rate are drawn; their joint
/// law is that of a uniform permutation.
pub fn monte_carlo_overload<R: Rng + ?Sized>(
    n: usize,
    r: &RateVector,
    trials: u64,
    rng: &mut R,
) -> Result<OverloadEstimate> {
    if trials == 0 {
        return domain("at least one trial is needed");
    }
    if r.len() != n {
        return domain(format!("need {n} rates"));
    }
    let active = shares(r, n)?;
    let limit = (1.0 - 1e-12) / n as f64;
    let mut ports: Vec<usize> = (1..=n).collect();
    let mut hits = 0;
    for _ in 0..trials {
        let (drawn, _) = ports.partial_shuffle(rng, active.len());
        let x: f64 = active.iter().zip(drawn.iter()).filter(|((_, f, _), &p)| p <= *f).map(|((_, _, s), _)| s).sum();
        if x >= limit {
            hits += 1;
        }
    }
    let (lower, upper) = wilson_interval(hits, trials, Z95);
    Ok(OverloadEstimate { hits, trials, estimate: hits as f64 / trials as f64, lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> Vec<usize> {
        (1..=n).collect()
    }

    #[test]
    fn zero_rates_give_zero() {
        let r = RateVector::new(vec![0.0; 8]).unwrap();
        assert_eq!(queue_rate(&r, &identity(8), 8).unwrap(), 0.0);
    }

    #[test]
    fn full_size_voq_contributes_everywhere() {
        let mut v = vec![0.0; 8];
        v[3] = 0.3;
        let r = RateVector::new(v).unwrap();
        for p in [vec![1, 2, 3, 4, 5, 6, 7, 8], vec![8, 7, 6, 5, 4, 3, 2, 1]] {
            assert!((queue_rate(&r, &p, 8).unwrap() - 0.3 / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn extremal_vector_examples() {
        let r = extremal_rate_vector(8).unwrap();
        let want = [1.0, 2.0, 4.0, 4.0, 32.0, 0.0, 0.0, 0.0].map(|x| x / 64.0);
        assert_eq!(r.as_slice(), &want);
        assert_eq!(r.total(), 43.0 / 64.0);
        assert_eq!(queue_rate(&r, &identity(8), 8).unwrap(), 1.0 / 8.0);
        assert!((extremal_rate_vector(4).unwrap().total() - 11.0 / 16.0).abs() < 1e-15);
        assert!(extremal_rate_vector(2).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert!((theorem1_threshold(8) - 129.0 / 192.0).abs() < 1e-15);
        assert!((theorem1_threshold(2) - 0.75).abs() < 1e-15);
        assert!((theorem1_threshold(1 << 20) - 2.0 / 3.0).abs() < 1e-12);
        for n in [4, 8, 16, 64, 256] {
            assert!((extremal_rate_vector(n).unwrap().total() - theorem1_threshold(n)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(RateVector::new(vec![0.6, 0.6]).is_err());
        assert!(RateVector::new(vec![-0.1, 0.1]).is_err());
        let r = RateVector::new(vec![0.1; 4]).unwrap();
        assert!(queue_rate(&r, &[1, 1, 2, 3], 4).is_err());
        assert!(queue_rate(&r, &[1, 2, 3], 4).is_err());
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(0, 1000, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.004);
        let (lo, hi) = wilson_interval(500, 1000, Z95);
        assert!(lo < 0.5 && hi > 0.5 && (hi - lo - 0.062).abs() < 0.001);
    }

    #[test]
    fn below_threshold_never_overloads() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = extremal_rate_vector(8).unwrap().scaled(0.999).unwrap();
        let est = monte_carlo_overload(8, &r, 20_000, &mut rng).unwrap();
        assert_eq!(est.hits, 0);
    }

    #[test]
    fn extremal_vector_overloads_sometimes() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let r = extremal_rate_vector(4).unwrap();
        let est = monte_carlo_overload(4, &r, 24_000, &mut rng).unwrap();
        assert!(est.hits > 0);
        assert!(est.lower <= est.estimate && est.estimate <= est.upper);
    }
}
