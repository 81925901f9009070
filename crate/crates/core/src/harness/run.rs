//! Running experiments: every (policy, repetition) cell is simulated
//! independently from derived seeds, then aggregated per checkpoint.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::environment::{Environment, Regime};
use crate::error::{Error, Result};
use crate::policy::{Policy, SimRng};
use crate::types::{hindsight_best, RegretAccountant, RegretTrace, Strategy};

/// Which regret a summary reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Pseudo,
    Hindsight,
}

impl Metric {
    /// Pseudo-regret where expected losses exist, hindsight regret otherwise.
    pub fn primary_for(regime: Regime) -> Self {
        if regime.is_stochastic_type() {
            Metric::Pseudo
        } else {
            Metric::Hindsight
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Pseudo => "pseudo_regret",
            Metric::Hindsight => "hindsight_regret",
        }
    }

    fn column<'a>(&self, trace: &'a RegretTrace) -> &'a [f64] {
        match self {
            Metric::Pseudo => &trace.pseudo_regret,
            Metric::Hindsight => &trace.hindsight_regret,
        }
    }
}

/// Mean and sample standard deviation across repetitions at each checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStats {
    pub checkpoints: Vec<u64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl TraceStats {
    pub fn from_traces(traces: &[RegretTrace], metric: Metric) -> Self {
        Self::from_columns(traces, |t| metric.column(t))
    }

    pub fn from_columns<'a, F>(traces: &'a [RegretTrace], column: F) -> Self
    where
        F: Fn(&'a RegretTrace) -> &'a [f64],
    {
        let checkpoints = traces.first().map(|t| t.checkpoints.clone()).unwrap_or_default();
        let reps = traces.len() as f64;
        let mut mean = Vec::with_capacity(checkpoints.len());
        let mut std = Vec::with_capacity(checkpoints.len());
        for i in 0..checkpoints.len() {
            let m = traces.iter().map(|t| column(t)[i]).sum::<f64>() / reps;
            let var = if traces.len() > 1 {
                traces.iter().map(|t| (column(t)[i] - m).powi(2)).sum::<f64>() / (reps - 1.0)
            } else {
                0.0
            };
            mean.push(m);
            std.push(var.sqrt());
        }
        Self { checkpoints, mean, std }
    }

    pub fn last_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(f64::NAN)
    }

    /// Mean at the checkpoint equal to `t`.
    pub fn mean_at(&self, t: u64) -> Option<f64> {
        self.checkpoints.iter().position(|&c| c == t).map(|i| self.mean[i])
    }
}

/// Average wall-clock cost per round of each phase.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseTiming {
    pub select_ns: f64,
    pub observe_ns: f64,
}

#[derive(Debug, Clone)]
pub struct PolicyRuns {
    pub traces: Vec<RegretTrace>,
    pub primary: TraceStats,
    pub pseudo: TraceStats,
    pub hindsight: TraceStats,
    pub timing: PhaseTiming,
}

#[derive(Debug, Clone)]
pub struct PolicyResult {
    pub label: String,
    /// Runs, or the reason the policy could not run in this configuration.
    pub outcome: std::result::Result<PolicyRuns, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub metric: Metric,
    pub policies: Vec<PolicyResult>,
}

impl ExperimentResult {
    pub fn policy(&self, label: &str) -> Option<&PolicyRuns> {
        self.policies
            .iter()
            .find(|p| p.label == label)
            .and_then(|p| p.outcome.as_ref().ok())
    }
}

enum Player {
    Learner(Box<dyn Policy>),
    Oracle,
}

struct Cell {
    trace: RegretTrace,
    select: Duration,
    observe: Duration,
}

fn run_cell(config: &ExperimentConfig, policy_index: usize, repetition: usize, checkpoints: &[u64]) -> Result<Cell> {
    let spec = &config.policies[policy_index];
    let space = config.space()?;
    let mut env = Environment::new(&config.environment_for(repetition))?;
    let mut player = match spec.build(space, config.horizon, config.enumeration_cap)? {
        Some(p) => Player::Learner(p),
        None => {
            if !config.environment.regime.is_stochastic_type() {
                return Err(Error::Config(format!(
                    "oracle needs expected losses, which the {} regime does not define",
                    config.environment.regime.as_str()
                )));
            }
            Player::Oracle
        }
    };
    let mut rng = SimRng::seed_from_u64(config.policy_seed(policy_index, repetition));
    let mut acc = RegretAccountant::new(&space);
    let mut trace = RegretTrace::new(spec.label(), config.environment_id(), repetition);
    let (mut select, mut observe) = (Duration::ZERO, Duration::ZERO);
    let mut next = 0;

    for t in 1..=config.horizon {
        let started = Instant::now();
        let chosen: Strategy = match &mut player {
            Player::Learner(p) => p.select(&mut rng)?,
            Player::Oracle => {
                let mu = env.expected_losses(t).expect("stochastic-type regime");
                hindsight_best(&mu, space.k_r()).0
            }
        };
        select += started.elapsed();

        let round = env.step(t, &chosen);
        if let Player::Learner(p) = &mut player {
            let observed = round.observed(&chosen);
            let started = Instant::now();
            p.observe(&chosen, &observed)?;
            observe += started.elapsed();
        }
        acc.record(&chosen, &round.realized, round.expected.as_deref());

        if checkpoints.get(next) == Some(&t) {
            trace.push(t, acc.pseudo_regret(), acc.hindsight_regret(), acc.realized_loss());
            next += 1;
        }
    }
    Ok(Cell { trace, select, observe })
}

/// Runs every (policy, repetition) pair on the global thread pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let checkpoints = config.checkpoints();
    let cells: Vec<(usize, usize)> = (0..config.policies.len())
        .flat_map(|p| (0..config.repetitions).map(move |r| (p, r)))
        .collect();
    let outcomes: Vec<Result<Cell>> = cells
        .par_iter()
        .map(|&(p, r)| run_cell(config, p, r, &checkpoints))
        .collect();

    let metric = Metric::primary_for(config.environment.regime);
    let mut outcomes = outcomes.into_iter();
    let mut policies = Vec::with_capacity(config.policies.len());
    for spec in &config.policies {
        let mine: Vec<Result<Cell>> = outcomes.by_ref().take(config.repetitions).collect();
        let outcome = match mine.into_iter().collect::<Result<Vec<Cell>>>() {
            Ok(cells) => {
                let rounds = (config.horizon * cells.len() as u64) as f64;
                let timing = PhaseTiming {
                    select_ns: cells.iter().map(|c| c.select.as_nanos() as f64).sum::<f64>() / rounds,
                    observe_ns: cells.iter().map(|c| c.observe.as_nanos() as f64).sum::<f64>() / rounds,
                };
                let traces: Vec<RegretTrace> = cells.into_iter().map(|c| c.trace).collect();
                Ok(PolicyRuns {
                    primary: TraceStats::from_traces(&traces, metric),
                    pseudo: TraceStats::from_traces(&traces, Metric::Pseudo),
                    hindsight: TraceStats::from_traces(&traces, Metric::Hindsight),
                    traces,
                    timing,
                })
            }
            Err(e) => Err(e.to_string()),
        };
        policies.push(PolicyResult {
            label: spec.label(),
            outcome,
        });
    }
    Ok(ExperimentResult {
        config: config.clone(),
        metric,
        policies,
    })
}

/// Like [`run_experiment`], bounded to `threads` workers.
pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(config))
}
