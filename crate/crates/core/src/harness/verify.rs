//! Fast self-checks run by `semibandit verify`.

use rand::{Rng, SeedableRng};

use super::config::{ExperimentConfig, PolicySpec};
use super::envelope::{check_envelope, BoundEnvelope};
use super::run::run_experiment;
use crate::environment::{Environment, EnvironmentSpec, Regime};
use crate::policy::{
    marginal_probability, mixture_distribution, AufhPolicy, Backend, Policy, PolicyState, SimRng, StrategyTable,
};
use crate::sampler::{marginals, DpTables};
use crate::schedule::{Exploration, LearningRate, Schedule};
use crate::types::{enumerate_strategies, CoveringSet, StrategySpace, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_space(rng: &mut SimRng) -> StrategySpace {
    let n = rng.random_range(2..=10);
    let k = rng.random_range(1..=n.min(4));
    StrategySpace::new(n, k).expect("valid by construction")
}

/// Log-weights spanning about ten orders of magnitude.
fn random_log_weights(rng: &mut SimRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-11.5..11.5)).collect()
}

/// A mid-run learner state with nonzero exploration.
fn random_state(rng: &mut SimRng, n: usize) -> PolicyState {
    let mut state = PolicyState::new(n);
    state.log_weights = random_log_weights(rng, n);
    state.round = rng.random_range(0..50);
    state.gap_estimates = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    state
}

/// Scan path probabilities equal normalized product weights.
pub fn dp_equivalence(instances: usize, seed: u64) -> CheckResult {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let space = random_space(&mut rng);
        let lw = random_log_weights(&mut rng, space.n());
        let tables = DpTables::build(&lw, space.k_r()).expect("finite weights");
        let all = enumerate_strategies(&space, DEFAULT_ENUMERATION_CAP).expect("small space");
        let logs: Vec<f64> = all.iter().map(|s| s.total(&lw)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        for (s, l) in all.iter().zip(&logs) {
            let want = (l - top).exp() / z;
            worst = worst.max((tables.path_probability(&lw, s) - want).abs());
        }
    }
    CheckResult {
        name: "dp_path_probability",
        passed: worst <= 1e-10,
        detail: format!("max abs error {worst:e} over {instances} instances"),
    }
}

/// DP marginals against marginals summed from the enumerated mixture.
pub fn marginal_cross_check(instances: usize, seed: u64) -> CheckResult {
    let mut rng = SimRng::seed_from_u64(seed);
    let schedule = Schedule::new(LearningRate::Emp, Exploration::Experimental);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let space = random_space(&mut rng);
        let state = random_state(&mut rng, space.n());
        let cover = CoveringSet::new(&space);
        let table = StrategyTable::new(&space, &cover, DEFAULT_ENUMERATION_CAP).expect("small space");
        let tables = DpTables::build(&state.log_weights, space.k_r()).expect("finite weights");
        let eps = state.epsilons(&schedule);
        let q = marginals(&tables, &state.log_weights, &eps, &cover);
        for (f, qf) in q.iter().enumerate() {
            let want = marginal_probability(&state, &schedule, &table, &cover, f);
            worst = worst.max((qf - want).abs());
        }
    }
    CheckResult {
        name: "marginal_cross_check",
        passed: worst <= 1e-9,
        detail: format!("max abs error {worst:e} over {instances} instances"),
    }
}

/// Mixture sums to one, marginals to `k_r`, covering blocks keep their floor.
pub fn simplex_invariants(states: usize, seed: u64) -> CheckResult {
    let mut rng = SimRng::seed_from_u64(seed);
    let schedule = Schedule::new(LearningRate::Emp, Exploration::Experimental);
    let mut failures = 0usize;
    for _ in 0..states {
        let space = random_space(&mut rng);
        let state = random_state(&mut rng, space.n());
        let cover = CoveringSet::new(&space);
        let table = StrategyTable::new(&space, &cover, DEFAULT_ENUMERATION_CAP).expect("small space");
        let eps = state.epsilons(&schedule);
        let p = mixture_distribution(&state.log_weights, &eps, &table, &cover);
        let tables = DpTables::build(&state.log_weights, space.k_r()).expect("finite weights");
        let q = marginals(&tables, &state.log_weights, &eps, &cover);
        let floors_ok = table
            .covering_positions()
            .iter()
            .zip(cover.block_masses(&eps))
            .all(|(&i, m)| p[i] >= m);
        let ok = (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9
            && (q.iter().sum::<f64>() - space.k_r() as f64).abs() <= 1e-9
            && floors_ok;
        if !ok {
            failures += 1;
        }
    }
    CheckResult {
        name: "simplex_invariants",
        passed: failures == 0,
        detail: format!("{failures} of {states} states violated an invariant"),
    }
}

/// Per-channel mean of `loss / q` in the stochastic regime, against the
/// channel means.
pub fn estimator_unbiasedness(rounds: u64, seed: u64) -> CheckResult {
    let space = StrategySpace::new(8, 4).expect("valid");
    let env = Environment::new(&EnvironmentSpec::stochastic(8, 0.2, seed)).expect("valid");
    let mu = env.expected_losses(1).expect("stochastic");
    let mut policy = AufhPolicy::new(space, Schedule::emp(), Backend::Dp, DEFAULT_ENUMERATION_CAP).expect("valid");
    let mut rng = SimRng::seed_from_u64(seed ^ 0x5eed);
    let (mut sum, mut sq) = (vec![0.0; 8], vec![0.0; 8]);
    for t in 1..=rounds {
        let chosen = policy.select(&mut rng).expect("select");
        let q = policy.last_marginals().to_vec();
        let round = env.stochastic_step(t);
        for &f in chosen.members() {
            let e = round.realized[f] / q[f];
            sum[f] += e;
            sq[f] += e * e;
        }
        policy.observe(&chosen, &round.observed(&chosen)).expect("observe");
    }
    let r = rounds as f64;
    let mut worst = 0.0f64;
    for f in 0..8 {
        let mean = sum[f] / r;
        let var = (sq[f] / r - mean * mean).max(0.0);
        let se = (var / r).sqrt();
        worst = worst.max((mean - mu[f]).abs() / se.max(f64::MIN_POSITIVE));
    }
    CheckResult {
        name: "estimator_unbiasedness",
        passed: worst <= 3.0,
        detail: format!("largest deviation {worst:.2} standard errors over {rounds} rounds"),
    }
}

/// Mean hindsight regret of a short oblivious-adversary run stays under the
/// absolute bound.
pub fn adversarial_envelope(horizon: u64, seed: u64) -> CheckResult {
    let config = ExperimentConfig {
        name: "verify-adversarial".into(),
        k_r: 4,
        horizon,
        repetitions: 3,
        checkpoints_per_decade: 10,
        master_seed: seed,
        enumeration_cap: DEFAULT_ENUMERATION_CAP,
        packet_rate_summary: false,
        environment: EnvironmentSpec::oblivious(8, seed),
        policies: vec![PolicySpec::aufh(Schedule::emp())],
    };
    let outcome = run_experiment(&config).and_then(|res| {
        let runs = res.policies[0].outcome.clone().map_err(crate::error::Error::Config)?;
        check_envelope(
            &runs.primary,
            &BoundEnvelope::Adversarial { n: 8, k_r: 4 },
            Regime::AdversarialOblivious,
        )
    });
    match outcome {
        Ok(report) => {
            let worst = report
                .checkpoints
                .iter()
                .map(|c| c.mean / c.envelope)
                .fold(f64::NEG_INFINITY, f64::max);
            CheckResult {
                name: "adversarial_envelope",
                passed: report.passed,
                detail: format!("largest regret/bound ratio {worst:.3}"),
            }
        }
        Err(e) => CheckResult {
            name: "adversarial_envelope",
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Every check at its default size.
pub fn verify_suite(seed: u64) -> Vec<CheckResult> {
    vec![
        dp_equivalence(200, seed),
        marginal_cross_check(200, seed.wrapping_add(1)),
        simplex_invariants(2000, seed.wrapping_add(2)),
        estimator_unbiasedness(20_000, seed.wrapping_add(3)),
        adversarial_envelope(5_000, seed.wrapping_add(4)),
    ]
}
