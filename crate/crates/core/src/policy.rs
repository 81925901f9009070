//! Exponential-weights channel access with per-channel adaptive exploration.
//!
//! Each round the receiver picks a `k_r`-subset of channels, observes the
//! loss of every channel it listened on, and updates per-channel weights
//! `w(f) = exp(-eta_t * L(f))` from importance-weighted loss estimates. A
//! strategy's weight is the product of its channels' weights. A small
//! exploration floor `eps_t(f)` is spread over a covering set of strategies
//! so that every channel keeps a minimum probability of being observed.
//!
//! Two interchangeable backends draw from the same distribution:
//! [`Backend::Reference`] enumerates every strategy, [`Backend::Dp`] uses
//! the linear-time tables in [`crate::sampler`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{self, DpTables};
use crate::schedule::Schedule;
use crate::types::{enumerate_strategies, CoveringSet, Strategy, StrategySpace};

/// Random source used by every simulated policy and environment.
pub type SimRng = ChaCha8Rng;

/// A channel access policy under semi-bandit feedback.
pub trait Policy: Send {
    /// Chooses the strategy for the next round.
    fn select(&mut self, rng: &mut SimRng) -> Result<Strategy>;

    /// Feeds back the losses of the chosen channels, aligned with
    /// `chosen.members()`.
    fn observe(&mut self, chosen: &Strategy, losses: &[f64]) -> Result<()>;
}

/// Per-channel learner state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    /// `-eta_{t+1} * L(f)`, the log-weights used for the next draw.
    pub log_weights: Vec<f64>,
    /// Cumulative importance-weighted loss estimates `L(f)`.
    pub cum_est_loss: Vec<f64>,
    pub play_counts: Vec<u64>,
    /// Empirical gaps `min{1, (L(f) - min L) / t}`.
    pub gap_estimates: Vec<f64>,
    /// Completed rounds.
    pub round: u64,
}

impl PolicyState {
    pub fn new(n: usize) -> Self {
        Self {
            log_weights: vec![0.0; n],
            cum_est_loss: vec![0.0; n],
            play_counts: vec![0; n],
            gap_estimates: vec![0.0; n],
            round: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.log_weights.len()
    }

    /// Exploration floors for the upcoming round.
    pub fn epsilons(&self, schedule: &Schedule) -> Vec<f64> {
        schedule.epsilons(self.round + 1, self.n(), &self.gap_estimates)
    }
}

/// Every strategy of an enumerable space, stored flat, plus the positions of
/// the covering blocks within the enumeration.
#[derive(Debug, Clone)]
pub struct StrategyTable {
    k_r: usize,
    members: Vec<usize>,
    covering_positions: Vec<usize>,
}

impl StrategyTable {
    pub fn new(space: &StrategySpace, covering: &CoveringSet, cap: u64) -> Result<Self> {
        let all = enumerate_strategies(space, cap).map_err(|e| match e {
            Error::SpaceTooLarge { .. } => Error::NotEnumerable,
            other => other,
        })?;
        let covering_positions = covering
            .blocks()
            .iter()
            .map(|b| all.binary_search(b).expect("covering block is a valid strategy"))
            .collect();
        let members = all.iter().flat_map(|s| s.members().iter().copied()).collect();
        Ok(Self {
            k_r: space.k_r(),
            members,
            covering_positions,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len() / self.k_r
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self, i: usize) -> &[usize] {
        &self.members[i * self.k_r..(i + 1) * self.k_r]
    }

    pub fn strategy(&self, i: usize) -> Strategy {
        Strategy::from_sorted(self.members(i).to_vec())
    }

    /// Enumeration index of each covering block.
    pub fn covering_positions(&self) -> &[usize] {
        &self.covering_positions
    }
}

/// The exploration mixture over every enumerated strategy:
/// `p(i) = (1 - sum eps) * w(i) / W + [i in C] * (owned eps mass of i)`.
pub fn mixture_distribution(
    log_weights: &[f64],
    epsilons: &[f64],
    table: &StrategyTable,
    covering: &CoveringSet,
) -> Vec<f64> {
    let count = table.len();
    let mut p: Vec<f64> = (0..count)
        .map(|i| table.members(i).iter().map(|&f| log_weights[f]).sum())
        .collect();
    let shift = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in p.iter_mut() {
        *v = (*v - shift).exp();
        total += *v;
    }
    let exploit = (1.0 - epsilons.iter().sum::<f64>()) / total;
    for v in p.iter_mut() {
        *v *= exploit;
    }
    for (&pos, mass) in table
        .covering_positions()
        .iter()
        .zip(covering.block_masses(epsilons))
    {
        p[pos] += mass;
    }
    p
}

/// `q(f) = sum over strategies containing f of p(i)`.
pub fn marginals_from_distribution(p: &[f64], table: &StrategyTable, n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n];
    for (i, &pi) in p.iter().enumerate() {
        for &f in table.members(i) {
            q[f] += pi;
        }
    }
    q
}

/// Strategy probabilities for the upcoming round of `state`.
pub fn strategy_distribution(
    state: &PolicyState,
    schedule: &Schedule,
    table: &StrategyTable,
    covering: &CoveringSet,
) -> Vec<f64> {
    mixture_distribution(&state.log_weights, &state.epsilons(schedule), table, covering)
}

/// Inclusion probability of channel `f` for the upcoming round.
pub fn marginal_probability(
    state: &PolicyState,
    schedule: &Schedule,
    table: &StrategyTable,
    covering: &CoveringSet,
    f: usize,
) -> f64 {
    let p = strategy_distribution(state, schedule, table, covering);
    (0..table.len())
        .filter(|&i| table.members(i).contains(&f))
        .map(|i| p[i])
        .sum()
}

/// Inverse-CDF draw; the last bucket absorbs rounding residue.
pub(crate) fn sample_index(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Importance-weighted loss estimates: `loss / q(f)` on chosen channels,
/// zero elsewhere.
pub fn estimate_losses(chosen: &Strategy, losses: &[f64], marginals: &[f64]) -> Result<Vec<f64>> {
    let mut est = vec![0.0; marginals.len()];
    for (&f, &l) in chosen.members().iter().zip(losses) {
        let q = marginals[f];
        if q.is_nan() || q <= 0.0 {
            return Err(Error::ZeroMarginal { channel: f });
        }
        est[f] = l / q;
    }
    Ok(est)
}

/// Accumulates estimates and recomputes log-weights from the cumulative
/// losses with the next round's learning rate.
pub fn update(state: &mut PolicyState, schedule: &Schedule, chosen: &Strategy, estimated: &[f64]) {
    for (acc, &e) in state.cum_est_loss.iter_mut().zip(estimated) {
        *acc += e;
    }
    for &f in chosen.members() {
        state.play_counts[f] += 1;
    }
    state.round += 1;
    let eta = schedule.eta(state.round + 1, state.n());
    for (lw, &l) in state.log_weights.iter_mut().zip(&state.cum_est_loss) {
        *lw = -eta * l;
    }
}

/// Refreshes `gap_estimates` from the cumulative estimates after `round`
/// completed rounds.
pub fn update_gap_estimates(state: &mut PolicyState) {
    if state.round == 0 {
        return;
    }
    let t = state.round as f64;
    let min = state.cum_est_loss.iter().copied().fold(f64::INFINITY, f64::min);
    for (g, &l) in state.gap_estimates.iter_mut().zip(&state.cum_est_loss) {
        *g = ((l - min) / t).min(1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Explicit enumeration of all strategies, `O(C(n, k_r))` per round.
    Reference,
    /// Dynamic-programming tables, `O(n k_r)` per round.
    #[default]
    Dp,
}

enum Engine {
    Reference(StrategyTable),
    Dp,
}

/// The adaptive exponential-weights policy.
pub struct AufhPolicy {
    space: StrategySpace,
    covering: CoveringSet,
    schedule: Schedule,
    state: PolicyState,
    engine: Engine,
    marginals: Vec<f64>,
}

impl AufhPolicy {
    pub fn new(space: StrategySpace, schedule: Schedule, backend: Backend, enumeration_cap: u64) -> Result<Self> {
        schedule.validate(space.n())?;
        let covering = CoveringSet::new(&space);
        let engine = match backend {
            Backend::Reference => Engine::Reference(StrategyTable::new(&space, &covering, enumeration_cap)?),
            Backend::Dp => Engine::Dp,
        };
        Ok(Self {
            space,
            covering,
            schedule,
            state: PolicyState::new(space.n()),
            engine,
            marginals: Vec::new(),
        })
    }

    pub fn state(&self) -> &PolicyState {
        &self.state
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn space(&self) -> &StrategySpace {
        &self.space
    }

    /// Marginals used for the most recent draw.
    pub fn last_marginals(&self) -> &[f64] {
        &self.marginals
    }

    /// One full round against a feedback function returning the losses of the
    /// chosen channels.
    pub fn step<F>(&mut self, rng: &mut SimRng, mut feedback: F) -> Result<Strategy>
    where
        F: FnMut(&Strategy) -> Vec<f64>,
    {
        let chosen = self.select(rng)?;
        let losses = feedback(&chosen);
        self.observe(&chosen, &losses)?;
        Ok(chosen)
    }
}

impl Policy for AufhPolicy {
    fn select(&mut self, rng: &mut SimRng) -> Result<Strategy> {
        let eps = self.state.epsilons(&self.schedule);
        let lw = &self.state.log_weights;
        match &self.engine {
            Engine::Reference(table) => {
                let p = mixture_distribution(lw, &eps, table, &self.covering);
                let i = sample_index(&p, rng.random::<f64>());
                self.marginals = marginals_from_distribution(&p, table, self.space.n());
                Ok(table.strategy(i))
            }
            Engine::Dp => {
                let tables = DpTables::build(lw, self.space.k_r())?;
                let masses = self.covering.block_masses(&eps);
                let explore: f64 = masses.iter().sum();
                let u = rng.random::<f64>();
                let chosen = if u < explore {
                    let b = sample_index(&masses, u);
                    self.covering.blocks()[b].clone()
                } else {
                    sampler::sample_strategy(&tables, lw, rng)
                };
                self.marginals = sampler::marginals(&tables, lw, &eps, &self.covering);
                Ok(chosen)
            }
        }
    }

    fn observe(&mut self, chosen: &Strategy, losses: &[f64]) -> Result<()> {
        let est = estimate_losses(chosen, losses, &self.marginals)?;
        update(&mut self.state, &self.schedule, chosen, &est);
        update_gap_estimates(&mut self.state);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{Exploration, LearningRate};
    use crate::types::DEFAULT_ENUMERATION_CAP;
    use rand::SeedableRng;

    fn setup(n: usize, k: usize) -> (StrategySpace, CoveringSet, StrategyTable) {
        let space = StrategySpace::new(n, k).unwrap();
        let cover = CoveringSet::new(&space);
        let table = StrategyTable::new(&space, &cover, DEFAULT_ENUMERATION_CAP).unwrap();
        (space, cover, table)
    }

    #[test]
    fn uniform_weights_no_exploration_is_uniform() {
        let (_, cover, table) = setup(6, 3);
        let p = mixture_distribution(&[0.0; 6], &[0.0; 6], &table, &cover);
        for v in p {
            assert!((v - 1.0 / 20.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_channel_mixture() {
        let (_, cover, table) = setup(2, 1);
        let p = mixture_distribution(&[0.0, 0.0], &[0.1, 0.1], &table, &cover);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dominant_strategy_limit() {
        // all weight on {0,1}: p({0,1}) -> (1 - sum eps) + its owned exploration
        let (_, cover, table) = setup(3, 2);
        let eps = [0.05, 0.02, 0.1];
        let p = mixture_distribution(&[400.0, 400.0, 0.0], &eps, &table, &cover);
        // blocks: {0,1} owns 0,1; {0,2} owns 2
        assert!((p[0] - (1.0 - 0.17 + 0.07)).abs() < 1e-12);
        assert!((p[1] - 0.1).abs() < 1e-12);
        assert!(p[2].abs() < 1e-12);
    }

    #[test]
    fn marginals_examples() {
        let (_, cover, table) = setup(8, 4);
        let p = mixture_distribution(&[0.0; 8], &[0.0; 8], &table, &cover);
        for q in marginals_from_distribution(&p, &table, 8) {
            assert!((q - 0.5).abs() < 1e-12);
        }
        let (_, cover, table) = setup(3, 2);
        let p = mixture_distribution(&[2f64.ln(), 0.0, 0.0], &[0.0; 3], &table, &cover);
        let q = marginals_from_distribution(&p, &table, 3);
        for (got, want) in q.iter().zip([0.8, 0.6, 0.6]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_probability_matches_vector() {
        let (_, cover, table) = setup(5, 2);
        let mut state = PolicyState::new(5);
        state.log_weights = vec![0.3, -1.0, 2.0, 0.0, -0.5];
        let schedule = Schedule::default();
        let p = strategy_distribution(&state, &schedule, &table, &cover);
        let q = marginals_from_distribution(&p, &table, 5);
        for f in 0..5 {
            let single = marginal_probability(&state, &schedule, &table, &cover, f);
            assert!((single - q[f]).abs() < 1e-14);
        }
    }

    #[test]
    fn estimate_examples() {
        let space = StrategySpace::new(3, 1).unwrap();
        let chosen = Strategy::new(vec![1], &space).unwrap();
        let est = estimate_losses(&chosen, &[0.3], &[0.2, 0.6, 0.2]).unwrap();
        assert!((est[1] - 0.5).abs() < 1e-15);
        assert_eq!(est[0], 0.0);
        assert_eq!(est[2], 0.0);
        // channelwise unbiasedness: q * (l / q) + (1 - q) * 0 = l
        for &(l, q) in &[(0.3f64, 0.6f64), (1.0, 0.01), (0.0, 0.5), (0.77, 1.0)] {
            let e = q * (l / q) + (1.0 - q) * 0.0;
            assert!((e - l).abs() < 1e-15);
        }
        assert!(matches!(
            estimate_losses(&chosen, &[0.3], &[0.5, 0.0, 0.5]),
            Err(Error::ZeroMarginal { channel: 1 })
        ));
    }

    #[test]
    fn update_single_step() {
        let space = StrategySpace::new(3, 1).unwrap();
        let chosen = Strategy::new(vec![0], &space).unwrap();
        let schedule = Schedule::new(LearningRate::Acc, Exploration::Experimental);
        let mut state = PolicyState::new(3);
        update(&mut state, &schedule, &chosen, &[0.5, 0.0, 0.0]);
        assert_eq!(state.log_weights, vec![-0.5, 0.0, 0.0]);
        assert_eq!(state.play_counts, vec![1, 0, 0]);
        assert_eq!(state.round, 1);

        let before = state.clone();
        update(&mut state, &schedule, &chosen, &[0.0; 3]);
        assert_eq!(state.log_weights, before.log_weights);
        assert_eq!(state.cum_est_loss, before.cum_est_loss);
        assert_eq!(state.round, 2);
        assert_eq!(state.play_counts[0], 2);
    }

    #[test]
    fn update_uses_closed_form_with_varying_eta() {
        let space = StrategySpace::new(2, 1).unwrap();
        let chosen = Strategy::new(vec![0], &space).unwrap();
        let schedule = Schedule::emp();
        let mut state = PolicyState::new(2);
        update(&mut state, &schedule, &chosen, &[0.4, 0.0]);
        update(&mut state, &schedule, &chosen, &[0.6, 0.0]);
        // weight for round 3 is exp(-eta_3 * (0.4 + 0.6))
        let closed = -crate::schedule::beta(3, 2) * 1.0;
        assert!((state.log_weights[0] - closed).abs() < 1e-15);
        let product = -crate::schedule::beta(2, 2) * 0.4 - crate::schedule::beta(3, 2) * 0.6;
        assert!((state.log_weights[0] - product).abs() > 1e-3);
    }

    #[test]
    fn gap_estimate_examples() {
        let mut s = PolicyState::new(3);
        s.cum_est_loss = vec![10.0, 4.0, 7.0];
        s.round = 10;
        update_gap_estimates(&mut s);
        for (g, want) in s.gap_estimates.iter().zip([0.6, 0.0, 0.3]) {
            assert!((g - want).abs() < 1e-15);
        }
        let mut s = PolicyState::new(2);
        s.cum_est_loss = vec![9.0, 4.0];
        s.round = 2;
        update_gap_estimates(&mut s);
        assert_eq!(s.gap_estimates, vec![1.0, 0.0]);
        let mut s = PolicyState::new(4);
        s.cum_est_loss = vec![3.0; 4];
        s.round = 7;
        update_gap_estimates(&mut s);
        assert_eq!(s.gap_estimates, vec![0.0; 4]);
    }

    #[test]
    fn not_enumerable_reference_is_refused() {
        let space = StrategySpace::new(64, 12).unwrap();
        assert!(matches!(
            AufhPolicy::new(space, Schedule::emp(), Backend::Reference, DEFAULT_ENUMERATION_CAP),
            Err(Error::NotEnumerable)
        ));
        assert!(AufhPolicy::new(space, Schedule::emp(), Backend::Dp, DEFAULT_ENUMERATION_CAP).is_ok());
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        for backend in [Backend::Reference, Backend::Dp] {
            let run = || {
                let space = StrategySpace::new(6, 2).unwrap();
                let mut pol = AufhPolicy::new(space, Schedule::emp(), backend, 1000).unwrap();
                let mut rng = SimRng::seed_from_u64(11);
                (0..200)
                    .map(|_| pol.step(&mut rng, |s| s.members().iter().map(|&f| (f % 2) as f64).collect()).unwrap())
                    .collect::<Vec<_>>()
            };
            assert_eq!(run(), run());
        }
    }

    #[test]
    fn estimates_grow_only_on_observed_channels() {
        let space = StrategySpace::new(4, 2).unwrap();
        let mut pol = AufhPolicy::new(space, Schedule::emp(), Backend::Dp, 1000).unwrap();
        let mut rng = SimRng::seed_from_u64(5);
        let mut observed = [false; 4];
        for _ in 0..50 {
            let prev = pol.state().cum_est_loss.clone();
            let s = pol.step(&mut rng, |s| vec![1.0; s.len()]).unwrap();
            for f in 0..4 {
                let grew = pol.state().cum_est_loss[f] > prev[f];
                assert_eq!(grew, s.contains(f));
                observed[f] |= grew;
            }
        }
        assert!(observed.iter().all(|&o| o));
    }

    #[test]
    fn concentrates_on_dominant_strategy() {
        // n=2, k=1: without exploration the heavier channel wins almost surely
        let space = StrategySpace::new(2, 1).unwrap();
        let cover = CoveringSet::new(&space);
        let table = StrategyTable::new(&space, &cover, 10).unwrap();
        let p = mixture_distribution(&[0.0, -12.0], &[0.0, 0.0], &table, &cover);
        let mut rng = SimRng::seed_from_u64(9);
        let hits = (0..10_000)
            .filter(|_| sample_index(&p, rng.random::<f64>()) == 0)
            .count();
        assert!(hits >= 9_995, "hits = {hits}");
    }
}
