use crate::analysis::rates::theorem1_threshold;
use crate::error::{domain, Result};

/// `h(p, a) = p·e^{a(1-p)} + (1-p)·e^{-ap}`, the MGF of a centred Bernoulli(p) at `a`.
pub fn h_func(p: f64, a: f64) -> f64 {
    p * (a * (1.0 - p)).exp() + (1.0 - p) * (-a * p).exp()
}

/// `ln h(p, a)`, stable for small and for large `a`.
pub fn ln_h(p: f64, a: f64) -> f64 {
    if a > 1.0 {
        a * (1.0 - p) + (p + (1.0 - p) * (-a).exp()).ln()
    } else {
        -a * p + (p * a.exp_m1()).ln_1p()
    }
}

/// The maximiser over `p` of `h(p, a)`: `(e^a - 1 - a) / (a(e^a - 1))`, with value 1/2 at `a = 0`.
pub fn p_star(a: f64) -> f64 {
    if a < 1e-3 {
        let a2 = a * a;
        return 0.5 - a / 12.0 + a * a2 / 720.0 - a * a2 * a2 / 30240.0;
    }
    let q = -(-a).exp_m1();
    (q - a * (-a).exp()) / (a * q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundRegime {
    /// Total load below the zero-overload threshold: overload is impossible.
    ZeroOverload,
    Chernoff,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChernoffBound {
    /// Bound on `P(X >= 1/N)` for one queue, clamped to at most 1.
    pub value: f64,
    /// Natural log of the unclamped bound (`-inf` in the zero-overload regime).
    pub log_value: f64,
    /// Minimising `θ` (0 in the zero-overload regime).
    pub theta: f64,
    pub regime: BoundRegime,
}

/// `ln` of `e^{-θ/n} · h(p*(θα), θα)^{n/2} · e^{θρ/n}` with `α = 1/n²`.
pub fn log_objective(n: usize, rho: f64, theta: f64) -> f64 {
    let nf = n as f64;
    let a = theta / (nf * nf);
    -theta / nf + 0.5 * nf * ln_h(p_star(a), a) + theta * rho / nf
}

const THETA_MIN: f64 = 1e-3;
const THETA_MAX: f64 = 1e9;
const GRID: usize = 600;
const TOL: f64 = 1e-9;

/// Per-queue overload probability bound, minimised over `θ` in `[1e-3, 1e9]`.
///
/// A coarse scan in `ln θ` brackets the minimum of the log-objective, then a
/// golden-section search refines it to `1e-9` in `ln θ`.
pub fn chernoff_bound(n: usize, rho: f64) -> Result<ChernoffBound> {
    if n < 2 || !n.is_power_of_two() {
        return domain(format!("switch size {n} is not a power of two >= 2"));
    }
    if !(0.0..1.0).contains(&rho) {
        return domain(format!("load {rho} outside [0, 1)"));
    }
    if rho < theorem1_threshold(n) {
        return Ok(ChernoffBound {
            value: 0.0,
            log_value: f64::NEG_INFINITY,
            theta: 0.0,
            regime: BoundRegime::ZeroOverload,
        });
    }
    let f = |x: f64| log_objective(n, rho, x.exp());
    let (lo, hi) = (THETA_MIN.ln(), THETA_MAX.ln());
    let step = (hi - lo) / GRID as f64;
    let best = (0..=GRID)
        .map(|k| (k, f(lo + step * k as f64)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .expect("grid is nonempty");
    let mut a = lo + step * best.saturating_sub(1) as f64;
    let mut b = lo + step * (best + 1).min(GRID) as f64;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let log_value = f(x);
    Ok(ChernoffBound { value: log_value.exp().min(1.0), log_value, theta: x.exp(), regime: BoundRegime::Chernoff })
}

/// Union bound over the `2N²` queues of the switch, clamped to at most 1.
pub fn switch_wide_bound(n: usize, rho: f64) -> Result<f64> {
    let cell = chernoff_bound(n, rho)?;
    Ok((2.0 * (n * n) as f64 * cell.value).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn h_examples() {
        for p in [0.0, 0.3, 1.0] {
            assert!((h_func(p, 0.0) - 1.0).abs() < 1e-15);
        }
        for a in [0.1, 2.0, 7.0] {
            assert!((h_func(0.0, a) - 1.0).abs() < 1e-15);
            assert!((h_func(1.0, a) - 1.0).abs() < 1e-15);
        }
        let want = 0.5 * 0.5f64.exp() + 0.5 * (-0.5f64).exp();
        assert!((h_func(0.5, 1.0) - want).abs() < 1e-15);
        assert!((h_func(0.5, 1.0) - 1.12763).abs() < 1e-5);
    }

    #[test]
    fn p_star_examples() {
        assert_eq!(p_star(0.0), 0.5);
        assert!((p_star(1e-9) - 0.5).abs() < 1e-9);
        let e = std::f64::consts::E;
        assert!((p_star(1.0) - (e - 2.0) / (e - 1.0)).abs() < 1e-15);
        assert!((p_star(1.0) - 0.41802).abs() < 1e-5);
        // both branches agree at the switch point
        let naive = |a: f64| (a.exp() - 1.0 - a) / (a * a.exp() - a);
        assert!((p_star(1.0001e-3) - naive(1.0001e-3)).abs() < 1e-9);
        assert!((p_star(0.999e-3) - naive(0.999e-3)).abs() < 1e-9);
    }

    #[test]
    fn p_star_maximises_h() {
        for a in [0.1, 1.0, 5.0] {
            let top = h_func(p_star(a), a);
            for k in 0..=1000 {
                let p = k as f64 / 1000.0;
                assert!(top >= h_func(p, a) - 1e-15, "a={a} p={p}");
            }
        }
    }

    #[test]
    fn ln_h_matches_direct_form() {
        for a in [1e-6, 0.01, 0.5, 1.0, 1.5, 10.0, 50.0] {
            for p in [0.0, 0.1, 0.5, 0.9, 1.0] {
                let direct = h_func(p, a).ln();
                assert!((ln_h(p, a) - direct).abs() <= 1e-12 * direct.abs().max(1e-300) + 1e-15, "p={p} a={a}");
            }
        }
    }

    #[test]
    fn zero_overload_regime_is_flagged() {
        let b = chernoff_bound(1024, 0.5).unwrap();
        assert_eq!(b.value, 0.0);
        assert_eq!(b.regime, BoundRegime::ZeroOverload);
        assert!(chernoff_bound(1024, 1.0).is_err());
        assert!(chernoff_bound(1000, 0.9).is_err());
    }

    #[test]
    fn no_overflow_at_large_sizes() {
        for n in [4096, 8192] {
            for theta in [1e-3, 1.0, 1e4, 1e8] {
                assert!(log_objective(n, 0.95, theta).is_finite());
            }
            assert!(chernoff_bound(n, 0.97).unwrap().value.is_finite());
        }
    }

    #[test]
    fn golden_section_finds_grid_minimum() {
        let b = chernoff_bound(2048, 0.93).unwrap();
        let mut best = f64::INFINITY;
        for k in 0..=20_000 {
            let theta = (1e-3f64.ln() + (1e9f64.ln() - 1e-3f64.ln()) * k as f64 / 20_000.0).exp();
            best = best.min(log_objective(2048, 0.93, theta));
        }
        assert!(b.log_value <= best + 1e-9);
    }

    proptest! {
        #[test]
        fn bound_nondecreasing_in_load(k in 0usize..3, r1 in 0.9f64..0.99, dr in 0.0f64..0.009) {
            let n = [1024, 2048, 4096][k];
            let a = chernoff_bound(n, r1).unwrap().log_value;
            let b = chernoff_bound(n, r1 + dr).unwrap().log_value;
            prop_assert!(b >= a - 1e-9 * a.abs());
        }
    }
}
