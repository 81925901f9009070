//! Domain types shared by policies, environments and the harness: channel
//! strategies, the covering set used for exploration, and regret accounting.
//!
//! Channels are indexed `0..n`. A strategy is a `k_r`-subset of channels,
//! kept sorted so equality is structural. The loss of a strategy is the sum of
//! the losses of its channels, which is what makes per-channel bookkeeping
//! (and the best fixed strategy in hindsight) cheap.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on explicit enumeration of `binomial(n, k_r)` strategies.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// `binomial(n, k)`, or `None` when it does not fit in a `u64`.
pub fn binomial(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// The action universe: `n` channels and strategies of exactly `k_r` channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySpace {
    n: usize,
    k_r: usize,
    count: Option<u64>,
}

impl StrategySpace {
    pub fn new(n: usize, k_r: usize) -> Result<Self> {
        if n < 2 || k_r == 0 || k_r > n {
            return Err(Error::InvalidSpace { n, k_r });
        }
        Ok(Self {
            n,
            k_r,
            count: binomial(n, k_r),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_r(&self) -> usize {
        self.k_r
    }

    /// Number of strategies, `None` when it overflows a `u64`.
    pub fn count(&self) -> Option<u64> {
        self.count
    }

    /// True when the strategy count fits under `cap`.
    pub fn is_enumerable(&self, cap: u64) -> bool {
        matches!(self.count, Some(c) if c <= cap)
    }

    fn count_label(&self) -> String {
        match self.count {
            Some(c) => c.to_string(),
            None => format!("binomial({}, {}) > 2^64", self.n, self.k_r),
        }
    }
}

/// A sorted set of distinct channel indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Strategy(Vec<usize>);

impl Strategy {
    /// Builds a strategy from arbitrary channel indices, sorting them and
    /// rejecting duplicates or indices outside `0..n`.
    pub fn new(mut members: Vec<usize>, space: &StrategySpace) -> Result<Self> {
        members.sort_unstable();
        if members.len() != space.k_r() {
            return Err(Error::InvalidStrategy(format!(
                "expected {} channels, got {}",
                space.k_r(),
                members.len()
            )));
        }
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidStrategy(format!("duplicate channels in {members:?}")));
        }
        if let Some(&last) = members.last() {
            if last >= space.n() {
                return Err(Error::InvalidStrategy(format!(
                    "channel {last} out of range for n={}",
                    space.n()
                )));
            }
        }
        Ok(Self(members))
    }

    /// Wraps an already sorted, duplicate-free list.
    pub(crate) fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self(members)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, channel: usize) -> bool {
        self.0.binary_search(&channel).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of `values[f]` over member channels.
    pub fn total(&self, values: &[f64]) -> f64 {
        self.0.iter().map(|&f| values[f]).sum()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

/// `ceil(n / k_r)` strategies whose union is every channel.
///
/// Channels are split into consecutive blocks of `k_r`. When `k_r` does not
/// divide `n`, the final block is topped up with the lowest-index channels it
/// does not already hold. Those padding channels stay owned by their original
/// block, so `owner` is a partition of the channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoveringSet {
    blocks: Vec<Strategy>,
    owner: Vec<usize>,
}

impl CoveringSet {
    pub fn new(space: &StrategySpace) -> Self {
        let (n, k) = (space.n(), space.k_r());
        let count = n.div_ceil(k);
        let mut blocks = Vec::with_capacity(count);
        let mut owner = vec![0; n];
        for b in 0..count {
            let start = b * k;
            let end = (start + k).min(n);
            let mut members: Vec<usize> = (start..end).collect();
            owner[start..end].fill(b);
            let mut pad = 0;
            while members.len() < k {
                if !members.contains(&pad) {
                    members.push(pad);
                }
                pad += 1;
            }
            members.sort_unstable();
            blocks.push(Strategy::from_sorted(members));
        }
        Self { blocks, owner }
    }

    pub fn blocks(&self) -> &[Strategy] {
        &self.blocks
    }

    /// Index of the block that owns `channel`.
    pub fn owner(&self, channel: usize) -> usize {
        self.owner[channel]
    }

    /// Exploration mass attributed to each block: the sum of `epsilons` over
    /// the channels that block owns.
    pub fn block_masses(&self, epsilons: &[f64]) -> Vec<f64> {
        let mut mass = vec![0.0; self.blocks.len()];
        for (f, &e) in epsilons.iter().enumerate() {
            mass[self.owner[f]] += e;
        }
        mass
    }
}

/// Every `k_r`-subset in lexicographic order.
pub fn enumerate_strategies(space: &StrategySpace, cap: u64) -> Result<Vec<Strategy>> {
    if !space.is_enumerable(cap) {
        return Err(Error::SpaceTooLarge {
            count: space.count_label(),
            cap,
        });
    }
    let (n, k) = (space.n(), space.k_r());
    let total = space.count().unwrap_or(0) as usize;
    let mut out = Vec::with_capacity(total);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(Strategy::from_sorted(idx.clone()));
        // rightmost position that can still advance
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(out)
}

/// Channels sorted by `(value, index)` ascending.
fn ranked_channels(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| match values[a].total_cmp(&values[b]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    order
}

/// The best fixed strategy for additive per-channel totals: the `k_r`
/// smallest totals, ties going to the lower channel index.
pub fn hindsight_best(loss_totals: &[f64], k_r: usize) -> (Strategy, f64) {
    let mut members: Vec<usize> = ranked_channels(loss_totals).into_iter().take(k_r).collect();
    members.sort_unstable();
    let total = members.iter().map(|&f| loss_totals[f]).sum();
    (Strategy::from_sorted(members), total)
}

/// Expected-loss gap of `chosen` relative to the best `k_r` channels under
/// `expected_losses`.
pub fn pseudo_regret_increment(chosen: &Strategy, expected_losses: &[f64]) -> f64 {
    let (_, best) = hindsight_best(expected_losses, chosen.len());
    let gap = chosen.total(expected_losses) - best;
    gap.max(0.0)
}

/// Per-checkpoint cumulative regret of one (policy, environment, repetition)
/// run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub policy: String,
    pub environment: String,
    pub repetition: usize,
    pub checkpoints: Vec<u64>,
    /// Cumulative expected-loss gap. NaN when the environment exposes no
    /// expected losses (adversarial regimes).
    pub pseudo_regret: Vec<f64>,
    /// Realized cumulative loss minus that of the best fixed strategy on the
    /// same realized sequence.
    pub hindsight_regret: Vec<f64>,
    /// Realized cumulative loss of the policy.
    pub realized_loss: Vec<f64>,
}

impl RegretTrace {
    pub fn new(policy: impl Into<String>, environment: impl Into<String>, repetition: usize) -> Self {
        Self {
            policy: policy.into(),
            environment: environment.into(),
            repetition,
            checkpoints: Vec::new(),
            pseudo_regret: Vec::new(),
            hindsight_regret: Vec::new(),
            realized_loss: Vec::new(),
        }
    }

    pub fn push(&mut self, round: u64, pseudo: f64, hindsight: f64, realized: f64) {
        debug_assert!(self.checkpoints.last().is_none_or(|&last| last < round));
        self.checkpoints.push(round);
        self.pseudo_regret.push(pseudo);
        self.hindsight_regret.push(hindsight);
        self.realized_loss.push(realized);
    }
}

/// Running regret bookkeeping for a single run.
#[derive(Debug, Clone)]
pub struct RegretAccountant {
    k_r: usize,
    pseudo: f64,
    has_expected: bool,
    policy_loss: f64,
    channel_totals: Vec<f64>,
}

impl RegretAccountant {
    pub fn new(space: &StrategySpace) -> Self {
        Self {
            k_r: space.k_r(),
            pseudo: 0.0,
            has_expected: true,
            policy_loss: 0.0,
            channel_totals: vec![0.0; space.n()],
        }
    }

    pub fn record(&mut self, chosen: &Strategy, realized: &[f64], expected: Option<&[f64]>) {
        match expected {
            Some(mu) => self.pseudo += pseudo_regret_increment(chosen, mu),
            None => self.has_expected = false,
        }
        self.policy_loss += chosen.total(realized);
        for (acc, &l) in self.channel_totals.iter_mut().zip(realized) {
            *acc += l;
        }
    }

    pub fn pseudo_regret(&self) -> f64 {
        if self.has_expected {
            self.pseudo
        } else {
            f64::NAN
        }
    }

    pub fn hindsight_regret(&self) -> f64 {
        let (_, best) = hindsight_best(&self.channel_totals, self.k_r);
        self.policy_loss - best
    }

    pub fn realized_loss(&self) -> f64 {
        self.policy_loss
    }
}
