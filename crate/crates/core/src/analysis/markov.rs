use crate::error::{domain, Result};

/// Which way the cycle-level queue chain jumps with the small probability `ρ/N`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Orientation {
    /// Up by `N-1` with probability `ρ/N`, down by 1 otherwise: one batch of
    /// `N` packets arrives with probability `ρ/N` while one packet is served.
    #[default]
    ArrivalConsistent,
    /// Up by `N-1` with probability `1-ρ/N`, down by 1 with probability `ρ/N`.
    /// Kept for auditing; it has positive drift for every `ρ < 1`.
    AsPrinted,
}

impl Orientation {
    pub fn name(self) -> &'static str {
        match self {
            Orientation::ArrivalConsistent => "arrival-consistent",
            Orientation::AsPrinted => "as-printed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkovChainSpec {
    pub n: usize,
    pub rho: f64,
    /// Largest queue length kept; defaults to [`default_truncation`].
    pub truncation: Option<usize>,
    pub orientation: Orientation,
}

impl MarkovChainSpec {
    pub fn new(n: usize, rho: f64) -> Self {
        MarkovChainSpec { n, rho, truncation: None, orientation: Orientation::ArrivalConsistent }
    }

    pub fn with_orientation(self, orientation: Orientation) -> Self {
        MarkovChainSpec { orientation, ..self }
    }
}

/// Smallest multiple of `N-1` exceeding `50N/(1-ρ)`.
pub fn default_truncation(n: usize, rho: f64) -> usize {
    let step = n - 1;
    let target = 50.0 * n as f64 / (1.0 - rho);
    (target / step as f64).floor() as usize * step + step
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovSolution {
    pub expected_queue: f64,
    /// `‖πP - π‖₁` of the returned distribution.
    pub residual: f64,
    /// Mass on the top `N-1` states.
    pub tail_mass: f64,
    pub truncation: usize,
    pub pi: Vec<f64>,
}

/// Stationary mean of the truncated chain on `0..=Q_max`.
///
/// Up-jumps that would pass `Q_max` land on `Q_max`. Balancing the flow
/// across each cut `{0..i} | {i+1..}` gives
/// `π(i+1)(1-u) = u · Σ_{k=max(0, i-N+2)}^{i} π(k)`, which is exact for this
/// chain and needs no matrix solve.
pub fn markov_expected_queue(spec: &MarkovChainSpec) -> Result<MarkovSolution> {
    let n = spec.n;
    if n < 2 {
        return domain(format!("switch size {n} must be at least 2"));
    }
    if !(0.0..1.0).contains(&spec.rho) {
        return domain(format!("load {} outside [0, 1): no stationary distribution", spec.rho));
    }
    let q = spec.truncation.unwrap_or_else(|| default_truncation(n, spec.rho));
    if q < n {
        return domain(format!("truncation {q} must be at least N = {n}"));
    }
    let small = spec.rho / n as f64;
    let up = match spec.orientation {
        Orientation::ArrivalConsistent => small,
        Orientation::AsPrinted => 1.0 - small,
    };
    let down = 1.0 - up;
    if up == 0.0 {
        let mut pi = vec![0.0; q + 1];
        pi[0] = 1.0;
        return Ok(MarkovSolution { expected_queue: 0.0, residual: 0.0, tail_mass: 0.0, truncation: q, pi });
    }
    if down == 0.0 {
        let mut pi = vec![0.0; q + 1];
        pi[q] = 1.0;
        return Ok(MarkovSolution { expected_queue: q as f64, residual: 0.0, tail_mass: 1.0, truncation: q, pi });
    }

    let ratio = up / down;
    let mut pi = Vec::with_capacity(q + 1);
    pi.push(1.0f64);
    for i in 0..q {
        let from = (i + 2).saturating_sub(n);
        let window: f64 = pi[from..=i].iter().sum();
        let next = ratio * window;
        pi.push(next);
        if next > 1e200 {
            pi.iter_mut().for_each(|x| *x *= 1e-200);
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);

    let expected_queue = pi.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    let tail_mass = pi[q + 2 - n..].iter().sum();
    let residual = residual(&pi, n, up);
    Ok(MarkovSolution { expected_queue, residual, tail_mass, truncation: q, pi })
}

/// `‖πP - π‖₁` for the truncated chain with up-probability `up`.
fn residual(pi: &[f64], n: usize, up: f64) -> f64 {
    let q = pi.len() - 1;
    let mut next = vec![0.0; q + 1];
    for (i, &p) in pi.iter().enumerate() {
        next[(i + n - 1).min(q)] += p * up;
        next[i.saturating_sub(1)] += p * (1.0 - up);
    }
    next.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}
