//! Linear-time sampling and marginals for product-weight distributions over
//! `k_r`-subsets.
//!
//! The weight of a subset is the product of its channels' weights. Two tables
//! of partial sums make both sampling and per-channel marginals `O(n * k_r)`:
//!
//! - `suffix[f][k]`: total weight of `k`-subsets of channels `f..n`
//! - `prefix[f][k]`: total weight of `k`-subsets of channels `0..f`
//!
//! Channel weights are `exp(-eta * L)` and span hundreds of orders of
//! magnitude over long runs, so every entry is stored as a natural log and
//! combined with log-sum-exp.

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{CoveringSet, Strategy};

/// `ln(e^a + e^b)` without overflow; `-inf` is the additive identity.
#[inline]
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Log-domain partial-sum tables for one round's channel weights.
#[derive(Debug, Clone)]
pub struct DpTables {
    n: usize,
    k_r: usize,
    // row-major, (n + 1) rows of (k_r + 1) entries
    suffix: Vec<f64>,
    prefix: Vec<f64>,
}

impl DpTables {
    /// Builds both tables from log-weights. Every log-weight must be finite,
    /// i.e. every weight strictly positive.
    pub fn build(log_weights: &[f64], k_r: usize) -> Result<Self> {
        let n = log_weights.len();
        if k_r == 0 || k_r > n {
            return Err(Error::InvalidSpace { n, k_r });
        }
        if let Some((index, &value)) = log_weights.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonPositiveWeight {
                index,
                value: value.exp(),
            });
        }
        let width = k_r + 1;
        let mut suffix = vec![f64::NEG_INFINITY; (n + 1) * width];
        let mut prefix = vec![f64::NEG_INFINITY; (n + 1) * width];
        suffix[n * width] = 0.0;
        prefix[0] = 0.0;

        for f in (0..n).rev() {
            let (row, next) = suffix.split_at_mut((f + 1) * width);
            let row = &mut row[f * width..];
            let lw = log_weights[f];
            row[0] = 0.0;
            for k in 1..width {
                row[k] = log_add(next[k], lw + next[k - 1]);
            }
        }
        for f in 1..=n {
            let (prev, row) = prefix.split_at_mut(f * width);
            let prev = &prev[(f - 1) * width..];
            let lw = log_weights[f - 1];
            row[0] = 0.0;
            for k in 1..width {
                row[k] = log_add(prev[k], lw + prev[k - 1]);
            }
        }
        Ok(Self {
            n,
            k_r,
            suffix,
            prefix,
        })
    }

    /// Builds tables from strictly positive linear weights.
    pub fn from_weights(weights: &[f64], k_r: usize) -> Result<Self> {
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::NonPositiveWeight { index, value });
        }
        let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        Self::build(&logs, k_r)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_r(&self) -> usize {
        self.k_r
    }

    /// `ln` of the total weight of `k`-subsets drawn from channels `f..n`.
    pub fn log_suffix(&self, f: usize, k: usize) -> f64 {
        self.suffix[f * (self.k_r + 1) + k]
    }

    /// `ln` of the total weight of `k`-subsets drawn from channels `0..f`.
    pub fn log_prefix(&self, f: usize, k: usize) -> f64 {
        self.prefix[f * (self.k_r + 1) + k]
    }

    /// `ln` of the total weight over all `k_r`-subsets.
    pub fn log_total(&self) -> f64 {
        self.log_suffix(0, self.k_r)
    }

    /// Probability of taking channel `f` when `slots` channels remain to be
    /// picked from `f..n`.
    pub fn accept_probability(&self, log_weights: &[f64], f: usize, slots: usize) -> f64 {
        if slots == 0 {
            return 0.0;
        }
        if slots >= self.n - f {
            return 1.0;
        }
        let p = (log_weights[f] + self.log_suffix(f + 1, slots - 1) - self.log_suffix(f, slots)).exp();
        if p.is_nan() {
            // both numerator and denominator degenerate; only reachable
            // through states of negligible mass
            return 0.0;
        }
        p.clamp(0.0, 1.0)
    }

    /// Probability that the channel-by-channel scan produces `strategy`.
    pub fn path_probability(&self, log_weights: &[f64], strategy: &Strategy) -> f64 {
        let mut slots = self.k_r;
        let mut prob = 1.0;
        for f in 0..self.n {
            let a = self.accept_probability(log_weights, f, slots);
            if strategy.contains(f) {
                prob *= a;
                slots -= 1;
            } else {
                prob *= 1.0 - a;
            }
            if prob == 0.0 {
                break;
            }
        }
        prob
    }
}

/// Draws a `k_r`-subset with probability proportional to the product of its
/// channel weights, deciding channels in increasing index order.
pub fn sample_strategy<R: Rng + ?Sized>(tables: &DpTables, log_weights: &[f64], rng: &mut R) -> Strategy {
    let mut members = Vec::with_capacity(tables.k_r);
    let mut slots = tables.k_r;
    for f in 0..tables.n {
        if slots == 0 {
            break;
        }
        let a = tables.accept_probability(log_weights, f, slots);
        if a >= 1.0 || rng.random::<f64>() < a {
            members.push(f);
            slots -= 1;
        }
    }
    debug_assert_eq!(members.len(), tables.k_r);
    Strategy::from_sorted(members)
}

/// Per-channel inclusion probabilities of the exploration mixture
/// `(1 - sum eps) * product-weight distribution + covering-block exploration`.
pub fn marginals(tables: &DpTables, log_weights: &[f64], epsilons: &[f64], covering: &CoveringSet) -> Vec<f64> {
    let (n, k) = (tables.n, tables.k_r);
    let exploit = 1.0 - epsilons.iter().sum::<f64>();
    let log_total = tables.log_total();
    let mut q = vec![0.0; n];
    for (f, qf) in q.iter_mut().enumerate() {
        let mut acc = f64::NEG_INFINITY;
        for j in 0..k {
            let term = tables.log_prefix(f, j) + log_weights[f] + tables.log_suffix(f + 1, k - j - 1);
            acc = log_add(acc, term);
        }
        *qf = exploit * (acc - log_total).exp();
    }
    for (block, mass) in covering.blocks().iter().zip(covering.block_masses(epsilons)) {
        for &f in block.members() {
            q[f] += mass;
        }
    }
    q
}
