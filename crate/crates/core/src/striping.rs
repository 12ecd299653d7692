//! Stripe sizing, primary-port assignment and dyadic stripe intervals.
//!
//! Every VOQ `(i, j)` gets a primary intermediate port `a[i][j]` from a weakly
//! uniform random orthogonal Latin square, a stripe size `F(r)` that keeps its
//! per-port load below `α = 1/N²`, and the unique dyadic interval of that size
//! containing the primary port.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::model::{Slot, StripeInterval, TrafficSpec};

/// Per-port load cap `α = 1/N²` that stripe sizing aims for.
pub fn alpha(n: usize) -> f64 {
    1.0 / (n as f64 * n as f64)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return domain(format!("switch size {n} is not a power of two"));
    }
    Ok(())
}

/// Stripe size `min{N, 2^⌈log₂(rN²)⌉}` of a VOQ with rate `r`.
///
/// An idle VOQ (`r = 0`) gets size 1. When `rN²` is exactly a power of two the
/// result is that power.
pub fn stripe_size(r: f64, n: usize) -> Result<usize> {
    check_n(n)?;
    if !r.is_finite() || r < 0.0 {
        return domain(format!("rate {r} is not a nonnegative number"));
    }
    let target = r * (n * n) as f64;
    let mut size = 1usize;
    // Compare against the power directly; log2 of an exact power can round up.
    while size < n && (size as f64) < target {
        size *= 2;
    }
    Ok(size)
}

/// `r / F(r)`: the load a VOQ places on each port of its stripe interval.
pub fn load_per_share(r: f64, n: usize) -> Result<f64> {
    Ok(r / stripe_size(r, n)? as f64)
}

/// The size-`size` dyadic interval `(m·size, (m+1)·size]` containing `primary`.
pub fn dyadic_interval(primary: usize, size: usize, n: usize) -> Result<StripeInterval> {
    check_n(n)?;
    if size == 0 || !size.is_power_of_two() || size > n {
        return domain(format!("stripe size {size} is not a power of two dividing {n}"));
    }
    if primary == 0 || primary > n {
        return domain(format!("primary port {primary} outside 1..={n}"));
    }
    Ok(StripeInterval::containing(primary, size))
}

/// Uniform random permutation of `1..=n` (Durstenfeld shuffle).
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (1..=n).collect();
    perm.shuffle(rng);
    perm
}

/// `N × N` matrix of primary intermediate ports; `get(i, j)` serves VOQ `i → j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OlsMatrix {
    n: usize,
    a: Vec<usize>,
}

impl OlsMatrix {
    /// Builds `a(i, j) = ((σR(i) + σC(j)) mod N) + 1`.
    pub fn from_permutations(row_perm: &[usize], col_perm: &[usize]) -> Result<Self> {
        let n = row_perm.len();
        if col_perm.len() != n {
            return domain("row and column permutations differ in length");
        }
        let mut a = Vec::with_capacity(n * n);
        for &r in row_perm {
            for &c in col_perm {
                a.push((r + c) % n + 1);
            }
        }
        Ok(OlsMatrix { n, a })
    }

    pub fn from_rows(rows: Vec<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return domain("matrix is not square");
        }
        Ok(OlsMatrix { n, a: rows.into_iter().flatten().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Primary port of VOQ `(input, output)`, both 1-based.
    pub fn get(&self, input: usize, output: usize) -> usize {
        self.a[(input - 1) * self.n + (output - 1)]
    }

    pub fn row(&self, input: usize) -> Vec<usize> {
        self.a[(input - 1) * self.n..input * self.n].to_vec()
    }

    pub fn column(&self, output: usize) -> Vec<usize> {
        (1..=self.n).map(|i| self.get(i, output)).collect()
    }
}

/// Weakly uniform random OLS: every row and every column is marginally a
/// uniform random permutation. Consumes two independent shuffles.
pub fn weak_ols<R: Rng + ?Sized>(n: usize, rng: &mut R) -> OlsMatrix {
    let row_perm = random_permutation(n, rng);
    let col_perm = random_permutation(n, rng);
    OlsMatrix::from_permutations(&row_perm, &col_perm).expect("permutations have equal length")
}

fn is_permutation(values: impl Iterator<Item = usize>, n: usize) -> bool {
    let mut seen = vec![false; n + 1];
    let mut count = 0;
    for v in values {
        if v == 0 || v > n || seen[v] {
            return false;
        }
        seen[v] = true;
        count += 1;
    }
    count == n
}

/// True iff every row and every column of `m` is a permutation of `1..=N`.
pub fn verify_ols(m: &OlsMatrix) -> bool {
    let n = m.n;
    (1..=n).all(|i| is_permutation(m.row(i).into_iter(), n))
        && (1..=n).all(|j| is_permutation((1..=n).map(|i| m.get(i, j)), n))
}

/// Arrival rates of all `N²` VOQs in packets per slot.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    n: usize,
    r: Vec<f64>,
}

impl RateMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut r = Vec::with_capacity(n * n);
        for i in 1..=n {
            for j in 1..=n {
                r.push(f(i, j));
            }
        }
        RateMatrix { n, r }
    }

    pub fn zeros(n: usize) -> Self {
        RateMatrix { n, r: vec![0.0; n * n] }
    }

    /// True rates of the traffic generator.
    pub fn from_traffic(spec: &TrafficSpec, n: usize) -> Self {
        Self::from_fn(n, |i, j| spec.voq_rate(n, i, j))
    }

    /// Reads `N` rows of `N` comma-separated reals (no header).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|field| field.parse::<f64>().map_err(|e| Error::Domain(format!("bad rate `{field}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return domain(format!("rate matrix must be square, got {n} rows"));
        }
        Ok(RateMatrix { n, r: rows.into_iter().flatten().collect() })
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.r[(input - 1) * self.n + (output - 1)]
    }

    pub fn set(&mut self, input: usize, output: usize, rate: f64) {
        self.r[(input - 1) * self.n + (output - 1)] = rate;
    }

    /// Nonnegative entries with every row and column sum at most 1.
    pub fn check_admissible(&self) -> Result<()> {
        const SLACK: f64 = 1e-9;
        let n = self.n;
        if let Some(bad) = self.r.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return domain(format!("rate {bad} is not a nonnegative number"));
        }
        for i in 1..=n {
            let row: f64 = (1..=n).map(|j| self.get(i, j)).sum();
            let col: f64 = (1..=n).map(|j| self.get(j, i)).sum();
            if row > 1.0 + SLACK {
                return domain(format!("row {i} sums to {row} > 1"));
            }
            if col > 1.0 + SLACK {
                return domain(format!("column {i} sums to {col} > 1"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoqStripe {
    pub size: usize,
    pub load_per_share: f64,
    pub interval: StripeInterval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalTable {
    n: usize,
    entries: Vec<VoqStripe>,
}

impl IntervalTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, input: usize, output: usize) -> &VoqStripe {
        &self.entries[(input - 1) * self.n + (output - 1)]
    }
}

/// Sizes every VOQ from its rate and places it on the dyadic interval around its primary port.
pub fn assign_intervals(rates: &RateMatrix, ols: &OlsMatrix) -> Result<IntervalTable> {
    let n = rates.n();
    if ols.n() != n {
        return domain(format!("rate matrix is {n}x{n} but OLS is {0}x{0}", ols.n()));
    }
    rates.check_admissible()?;
    let mut entries = Vec::with_capacity(n * n);
    for i in 1..=n {
        for j in 1..=n {
            let r = rates.get(i, j);
            let size = stripe_size(r, n)?;
            entries.push(VoqStripe {
                size,
                load_per_share: r / size as f64,
                interval: dyadic_interval(ols.get(i, j), size, n)?,
            });
        }
    }
    Ok(IntervalTable { n, entries })
}

/// Online VOQ rate estimation with hysteresis-gated doubling and halving of
/// stripe sizes.
///
/// Each VOQ keeps a lazily decayed EWMA of its per-slot arrival indicator. At
/// the end of every measurement window the current size `f` is compared with
/// the sizing thresholds: doubling needs the estimate above
/// `hysteresis · f/N²`, halving needs it below `f/(2N²) / hysteresis`. A
/// direction must hold at two consecutive window ends (one full window)
/// before the size changes, and each change is a single step.
#[derive(Clone, Debug)]
pub struct ResizeController {
    n: usize,
    decay: f64,
    weight: f64,
    window: u64,
    hysteresis: f64,
    voqs: Vec<VoqEstimate>,
}

#[derive(Clone, Copy, Debug, Default)]
struct VoqEstimate {
    value: f64,
    last: Slot,
    size: usize,
    /// +1 pending doubling, -1 pending halving.
    pending: i8,
}

impl ResizeController {
    pub fn new(
        n: usize,
        half_life: u64,
        window: u64,
        hysteresis: f64,
        initial_sizes: impl Fn(usize, usize) -> usize,
    ) -> Self {
        let decay = 0.5f64.powf(1.0 / half_life as f64);
        let mut voqs = Vec::with_capacity(n * n);
        for i in 1..=n {
            for j in 1..=n {
                voqs.push(VoqEstimate { size: initial_sizes(i, j), ..Default::default() });
            }
        }
        ResizeController { n, decay, weight: 1.0 - decay, window, hysteresis, voqs }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    fn slot(&mut self, input: usize, output: usize) -> &mut VoqEstimate {
        &mut self.voqs[(input - 1) * self.n + (output - 1)]
    }

    pub fn record_arrival(&mut self, input: usize, output: usize, t: Slot) {
        let (decay, weight) = (self.decay, self.weight);
        let v = self.slot(input, output);
        v.value = v.value * decay.powf((t - v.last) as f64) + weight;
        v.last = t;
    }

    pub fn estimate(&self, input: usize, output: usize, t: Slot) -> f64 {
        let v = &self.voqs[(input - 1) * self.n + (output - 1)];
        v.value * self.decay.powf((t - v.last) as f64)
    }

    /// Evaluates every VOQ at a window end; returns `(input, output, new_size)` for each resize.
    pub fn window_end(&mut self, t: Slot) -> Vec<(usize, usize, usize)> {
        let n = self.n;
        let nsq = (n * n) as f64;
        let mut changes = Vec::new();
        for i in 1..=n {
            for j in 1..=n {
                let est = self.estimate(i, j, t);
                let hysteresis = self.hysteresis;
                let v = self.slot(i, j);
                let f = v.size as f64;
                let dir = if v.size < n && est > hysteresis * f / nsq {
                    1
                } else if v.size > 1 && est < f / (2.0 * nsq) / hysteresis {
                    -1
                } else {
                    0
                };
                if dir != 0 && dir == v.pending {
                    v.size = if dir > 0 { v.size * 2 } else { v.size / 2 };
                    v.pending = 0;
                    changes.push((i, j, v.size));
                } else {
                    v.pending = dir;
                }
            }
        }
        changes
    }
}
