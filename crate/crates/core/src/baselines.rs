//! Comparison policies: CombUCB1, combinatorial Thompson sampling, EXP3 over
//! the enumerated strategy set, and a mini-batching wrapper that freezes any
//! inner policy's action for a fixed number of rounds.
//!
//! The stochastic baselines work on rewards `g = 1 - loss`.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::policy::{sample_index, Policy, SimRng, StrategyTable};
use crate::types::{hindsight_best, CoveringSet, Strategy, StrategySpace};

/// Confidence-radius constant of CombUCB1: `sqrt(1.5 ln t / T(f))`.
pub const COMBUCB1_RADIUS: f64 = 1.5;

/// The `k_r` channels with the largest scores, ties to the lower index.
fn top_k(scores: &[f64], k: usize) -> Strategy {
    let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
    hindsight_best(&negated, k).0
}

/// Per-channel upper-confidence-bound selection.
#[derive(Debug, Clone)]
pub struct CombUcb1 {
    space: StrategySpace,
    covering: CoveringSet,
    means: Vec<f64>,
    pulls: Vec<u64>,
    round: u64,
}

impl CombUcb1 {
    pub fn new(space: StrategySpace) -> Self {
        let n = space.n();
        Self {
            covering: CoveringSet::new(&space),
            space,
            means: vec![0.0; n],
            pulls: vec![0; n],
            round: 0,
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    /// UCB index of every channel at round `t`; requires every channel to
    /// have been pulled.
    pub fn indices(&self, t: u64) -> Vec<f64> {
        let log_t = (t.max(1) as f64).ln();
        self.means
            .iter()
            .zip(&self.pulls)
            .map(|(&m, &p)| m + (COMBUCB1_RADIUS * log_t / p as f64).sqrt())
            .collect()
    }

    /// Strategy for round `t`: the covering block of the lowest unpulled
    /// channel while the initialization sweep runs, otherwise the top-`k_r`
    /// indices.
    pub fn select_at(&self, t: u64) -> Strategy {
        if let Some(f) = self.pulls.iter().position(|&p| p == 0) {
            return self.covering.blocks()[self.covering.owner(f)].clone();
        }
        top_k(&self.indices(t), self.space.k_r())
    }
}

impl Policy for CombUcb1 {
    fn select(&mut self, _rng: &mut SimRng) -> Result<Strategy> {
        Ok(self.select_at(self.round + 1))
    }

    fn observe(&mut self, chosen: &Strategy, losses: &[f64]) -> Result<()> {
        for (&f, &l) in chosen.members().iter().zip(losses) {
            self.pulls[f] += 1;
            self.means[f] += ((1.0 - l) - self.means[f]) / self.pulls[f] as f64;
        }
        self.round += 1;
        Ok(())
    }
}

/// Beta-Bernoulli Thompson sampling with uniform priors, top-`k_r` by sample.
#[derive(Debug, Clone)]
pub struct Thompson {
    k_r: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl Thompson {
    pub fn new(space: StrategySpace) -> Self {
        Self {
            k_r: space.k_r(),
            alpha: vec![1.0; space.n()],
            beta: vec![1.0; space.n()],
        }
    }

    /// Starts from explicit posterior parameters (each at least 1).
    pub fn with_posterior(space: StrategySpace, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != space.n() || beta.len() != space.n() {
            return Err(Error::Config("posterior length must equal n".into()));
        }
        if alpha.iter().chain(&beta).any(|&v| !(v >= 1.0 && v.is_finite())) {
            return Err(Error::Config("posterior parameters must be finite and >= 1".into()));
        }
        Ok(Self {
            k_r: space.k_r(),
            alpha,
            beta,
        })
    }

    pub fn posterior(&self) -> (&[f64], &[f64]) {
        (&self.alpha, &self.beta)
    }

    /// Posterior mean reward of each channel.
    pub fn posterior_means(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a / (a + b)).collect()
    }
}

impl Policy for Thompson {
    fn select(&mut self, rng: &mut SimRng) -> Result<Strategy> {
        let theta: Vec<f64> = self
            .alpha
            .iter()
            .zip(&self.beta)
            .map(|(&a, &b)| Beta::new(a, b).map(|d| d.sample(rng)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("invalid Beta posterior: {e}")))?;
        Ok(top_k(&theta, self.k_r))
    }

    fn observe(&mut self, chosen: &Strategy, losses: &[f64]) -> Result<()> {
        // fractional update; identical to success/failure counting for 0/1 losses
        for (&f, &l) in chosen.members().iter().zip(losses) {
            self.alpha[f] += 1.0 - l;
            self.beta[f] += l;
        }
        Ok(())
    }
}

/// EXP3 run directly over the enumerated strategies, with no sharing of
/// information between strategies that overlap on channels.
pub struct Exp3Strategies {
    k_r: usize,
    table: StrategyTable,
    cum_loss: Vec<f64>,
    probs: Vec<f64>,
    last: usize,
    round: u64,
}

impl Exp3Strategies {
    pub fn new(space: StrategySpace, cap: u64) -> Result<Self> {
        if !space.is_enumerable(cap) {
            return Err(Error::SpaceTooLarge {
                count: space
                    .count()
                    .map_or_else(|| "more than 2^64".to_string(), |c| c.to_string()),
                cap,
            });
        }
        let covering = CoveringSet::new(&space);
        let table = StrategyTable::new(&space, &covering, cap)?;
        let count = table.len();
        Ok(Self {
            k_r: space.k_r(),
            table,
            cum_loss: vec![0.0; count],
            probs: Vec::new(),
            last: 0,
            round: 0,
        })
    }

    pub fn strategy_count(&self) -> usize {
        self.table.len()
    }

    /// Anytime exploration rate `min{1, sqrt(N ln N / ((e - 1) t))}`.
    pub fn gamma(&self, t: u64) -> f64 {
        let count = self.table.len() as f64;
        let raw = (count * count.ln() / ((std::f64::consts::E - 1.0) * t as f64)).sqrt();
        raw.min(1.0)
    }

    /// `(1 - gamma) * softmax(-eta * L) + gamma / N`.
    pub fn distribution_with(&self, gamma: f64, eta: f64) -> Vec<f64> {
        let count = self.table.len() as f64;
        let shift = self
            .cum_loss
            .iter()
            .map(|&l| -eta * l)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = self.cum_loss.iter().map(|&l| (-eta * l - shift).exp()).collect();
        let total: f64 = p.iter().sum();
        for v in p.iter_mut() {
            *v = (1.0 - gamma) * *v / total + gamma / count;
        }
        p
    }

    pub fn distribution(&self, t: u64) -> Vec<f64> {
        let gamma = self.gamma(t);
        self.distribution_with(gamma, gamma / self.table.len() as f64)
    }
}

impl Policy for Exp3Strategies {
    fn select(&mut self, rng: &mut SimRng) -> Result<Strategy> {
        self.probs = self.distribution(self.round + 1);
        self.last = sample_index(&self.probs, rng.random::<f64>());
        Ok(self.table.strategy(self.last))
    }

    fn observe(&mut self, _chosen: &Strategy, losses: &[f64]) -> Result<()> {
        let loss = losses.iter().sum::<f64>() / self.k_r as f64;
        self.cum_loss[self.last] += loss / self.probs[self.last];
        self.round += 1;
        Ok(())
    }
}

/// Rounds per batch for a known horizon:
/// `round((4 k_r sqrt(n ln n))^(-1/3) * horizon^(1/3))`, at least 1.
pub fn minibatch_size(n: usize, k_r: usize, horizon: u64) -> u64 {
    let n_f = n as f64;
    let scale = 4.0 * k_r as f64 * (n_f * n_f.ln()).sqrt();
    let tau = scale.powf(-1.0 / 3.0) * (horizon as f64).cbrt();
    (tau.round() as u64).max(1)
}

pub type PolicyFactory = Box<dyn Fn() -> Result<Box<dyn Policy>> + Send>;

enum BatchPlan {
    Fixed,
    /// Epoch `j` lasts `2^j` rounds with a fresh inner policy and a batch
    /// size tuned to that epoch length.
    Doubling {
        factory: PolicyFactory,
        n: usize,
        k_r: usize,
        epoch: u32,
        epoch_left: u64,
    },
}

/// Holds the inner policy's strategy for `tau` rounds and feeds it the
/// per-channel batch-average loss once per batch.
pub struct MiniBatch {
    inner: Box<dyn Policy>,
    plan: BatchPlan,
    tau: u64,
    current: Option<Strategy>,
    played: u64,
    sums: Vec<f64>,
}

impl MiniBatch {
    pub fn new(inner: Box<dyn Policy>, tau: u64) -> Result<Self> {
        if tau == 0 {
            return Err(Error::Config("mini-batch size must be at least 1".into()));
        }
        Ok(Self {
            inner,
            plan: BatchPlan::Fixed,
            tau,
            current: None,
            played: 0,
            sums: Vec::new(),
        })
    }

    /// Batch size derived from a known horizon.
    pub fn for_horizon(inner: Box<dyn Policy>, n: usize, k_r: usize, horizon: u64) -> Result<Self> {
        Self::new(inner, minibatch_size(n, k_r, horizon))
    }

    /// Doubling-trick restarts for an unknown horizon.
    pub fn doubling(factory: PolicyFactory, n: usize, k_r: usize) -> Result<Self> {
        let inner = factory()?;
        Ok(Self {
            inner,
            plan: BatchPlan::Doubling {
                factory,
                n,
                k_r,
                epoch: 0,
                epoch_left: 1,
            },
            tau: minibatch_size(n, k_r, 1),
            current: None,
            played: 0,
            sums: Vec::new(),
        })
    }

    pub fn batch_size(&self) -> u64 {
        self.tau
    }

    fn advance_epoch(&mut self) -> Result<()> {
        if let BatchPlan::Doubling {
            factory,
            n,
            k_r,
            epoch,
            epoch_left,
        } = &mut self.plan
        {
            if *epoch_left == 0 {
                *epoch += 1;
                let len = 1u64 << (*epoch).min(62);
                *epoch_left = len;
                self.tau = minibatch_size(*n, *k_r, len);
                self.inner = factory()?;
                self.current = None;
            }
        }
        Ok(())
    }
}

impl Policy for MiniBatch {
    fn select(&mut self, rng: &mut SimRng) -> Result<Strategy> {
        self.advance_epoch()?;
        if let Some(s) = &self.current {
            return Ok(s.clone());
        }
        let s = self.inner.select(rng)?;
        self.sums = vec![0.0; s.len()];
        self.played = 0;
        self.current = Some(s.clone());
        Ok(s)
    }

    fn observe(&mut self, chosen: &Strategy, losses: &[f64]) -> Result<()> {
        for (acc, &l) in self.sums.iter_mut().zip(losses) {
            *acc += l;
        }
        self.played += 1;
        if let BatchPlan::Doubling { epoch_left, .. } = &mut self.plan {
            *epoch_left -= 1;
        }
        let epoch_done = matches!(self.plan, BatchPlan::Doubling { epoch_left: 0, .. });
        if self.played == self.tau || epoch_done {
            let avg: Vec<f64> = self.sums.iter().map(|s| s / self.played as f64).collect();
            self.inner.observe(chosen, &avg)?;
            self.current = None;
        }
        Ok(())
    }
}
