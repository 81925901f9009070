//! Experiment configuration, seed derivation and the TOML file format.

use serde::{Deserialize, Serialize};

use crate::baselines::{CombUcb1, Exp3Strategies, MiniBatch, PolicyFactory, Thompson};
use crate::environment::{derive_seed, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::policy::{AufhPolicy, Backend, Policy};
use crate::schedule::{Exploration, LearningRate, Schedule, DEFAULT_GAP_CONSTANT};
use crate::types::{StrategySpace, DEFAULT_ENUMERATION_CAP};

pub const ARTIFACT_NAME: &str = "semibandit";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

const POLICY_SEED_SALT: u64 = 0x706f_6c69;

fn default_repetitions() -> usize {
    10
}

fn default_per_decade() -> u32 {
    10
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

fn default_learning_rate() -> LearningRate {
    LearningRate::Emp
}

fn default_exploration() -> Exploration {
    Exploration::EmpiricalGap {
        c: DEFAULT_GAP_CONSTANT,
    }
}

/// How a mini-batch wrapper sizes its batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSpec {
    /// Tuned to the experiment horizon.
    Horizon,
    Fixed(u64),
    /// Doubling-trick restarts.
    Doubling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Aufh {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default = "default_learning_rate")]
        learning_rate: LearningRate,
        #[serde(default = "default_exploration")]
        exploration: Exploration,
        #[serde(default)]
        backend: Backend,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        minibatch: Option<BatchSpec>,
    },
    #[serde(rename = "combucb1")]
    CombUcb1,
    Thompson,
    /// EXP3 over the enumerated strategy set.
    Exp3,
    /// Plays the expected-loss optimal strategy every round.
    Oracle,
}

impl PolicySpec {
    pub fn aufh(schedule: Schedule) -> Self {
        PolicySpec::Aufh {
            label: None,
            learning_rate: schedule.learning_rate,
            exploration: schedule.exploration,
            backend: Backend::Dp,
            minibatch: None,
        }
    }

    pub fn with_minibatch(self, batch: BatchSpec) -> Self {
        match self {
            PolicySpec::Aufh {
                label,
                learning_rate,
                exploration,
                backend,
                ..
            } => PolicySpec::Aufh {
                label,
                learning_rate,
                exploration,
                backend,
                minibatch: Some(batch),
            },
            other => other,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PolicySpec::Aufh {
                label: Some(l), ..
            } => l.clone(),
            PolicySpec::Aufh {
                learning_rate,
                minibatch,
                ..
            } => {
                let base = match learning_rate {
                    LearningRate::Emp => "aufh_emp".to_string(),
                    LearningRate::Acc => "aufh_acc".to_string(),
                    LearningRate::Constant(eta) => format!("aufh_eta{eta}"),
                };
                if minibatch.is_some() {
                    format!("{base}_minibatch")
                } else {
                    base
                }
            }
            PolicySpec::CombUcb1 => "combucb1".into(),
            PolicySpec::Thompson => "thompson".into(),
            PolicySpec::Exp3 => "anti_jam_exp3".into(),
            PolicySpec::Oracle => "oracle".into(),
        }
    }

    /// Instantiates a learning policy; `None` for the oracle, which the
    /// harness drives directly from expected losses.
    pub fn build(&self, space: StrategySpace, horizon: u64, cap: u64) -> Result<Option<Box<dyn Policy>>> {
        let policy: Box<dyn Policy> = match self {
            PolicySpec::Aufh {
                learning_rate,
                exploration,
                backend,
                minibatch,
                ..
            } => {
                let schedule = Schedule::new(*learning_rate, exploration.clone());
                let make = {
                    let backend = *backend;
                    move || -> Result<Box<dyn Policy>> {
                        Ok(Box::new(AufhPolicy::new(space, schedule.clone(), backend, cap)?))
                    }
                };
                match minibatch {
                    None => make()?,
                    Some(BatchSpec::Horizon) => {
                        Box::new(MiniBatch::for_horizon(make()?, space.n(), space.k_r(), horizon)?)
                    }
                    Some(BatchSpec::Fixed(tau)) => Box::new(MiniBatch::new(make()?, *tau)?),
                    Some(BatchSpec::Doubling) => {
                        let factory: PolicyFactory = Box::new(make);
                        Box::new(MiniBatch::doubling(factory, space.n(), space.k_r())?)
                    }
                }
            }
            PolicySpec::CombUcb1 => Box::new(CombUcb1::new(space)),
            PolicySpec::Thompson => Box::new(Thompson::new(space)),
            PolicySpec::Exp3 => Box::new(Exp3Strategies::new(space, cap)?),
            PolicySpec::Oracle => return Ok(None),
        };
        Ok(Some(policy))
    }
}

/// One experiment: a single environment, several policies, repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub k_r: usize,
    pub horizon: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_per_decade")]
    pub checkpoints_per_decade: u32,
    pub master_seed: u64,
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
    /// Also emit received-packet rates.
    #[serde(default)]
    pub packet_rate_summary: bool,
    pub environment: EnvironmentSpec,
    pub policies: Vec<PolicySpec>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        StrategySpace::new(self.environment.n, self.k_r)?;
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.checkpoints_per_decade == 0 {
            return Err(Error::Config("checkpoints_per_decade must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("at least one policy is required".into()));
        }
        let mut labels: Vec<String> = self.policies.iter().map(|p| p.label()).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate policy label '{}'", w[0])));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<StrategySpace> {
        StrategySpace::new(self.environment.n, self.k_r)
    }

    pub fn checkpoints(&self) -> Vec<u64> {
        log_checkpoints(self.horizon, self.checkpoints_per_decade)
    }

    /// Seed of the policy's random stream for one repetition.
    pub fn policy_seed(&self, policy_index: usize, repetition: usize) -> u64 {
        derive_seed(&[self.master_seed, POLICY_SEED_SALT, policy_index as u64, repetition as u64])
    }

    /// Environment for one repetition; shared by every policy in it.
    pub fn environment_for(&self, repetition: usize) -> EnvironmentSpec {
        let mut spec = self.environment.clone();
        spec.seed = derive_seed(&[self.environment.seed, self.master_seed, repetition as u64]);
        spec
    }

    pub fn environment_id(&self) -> String {
        format!("{}-n{}", self.environment.regime.as_str(), self.environment.n)
    }

    /// Serializes to TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config, or a manifest (taking its `config` table), applying
    /// `key=value` overrides on dotted paths before validation.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(toml::Value::Table(inner)) = doc.remove("config") {
            doc = inner;
        }
        let mut value = toml::Value::Table(doc);
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Round indices spaced `per_decade` to a decade, always ending at `horizon`.
pub fn log_checkpoints(horizon: u64, per_decade: u32) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut j = 0u32;
    loop {
        let t = 10f64.powf(j as f64 / per_decade as f64).round() as u64;
        if t > horizon {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
        j += 1;
    }
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

fn parse_scalar(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `path=value` inside a TOML tree; numeric path segments index arrays.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        node = match node {
            toml::Value::Table(t) => {
                if last {
                    t.insert(key.to_string(), parse_scalar(raw.trim()));
                    return Ok(());
                }
                t.entry(key.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::Config(format!("'{key}' in '{path}' must index an array")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range ({len}) in '{path}'")))?;
                if last {
                    *slot = parse_scalar(raw.trim());
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("'{path}' descends into a scalar"))),
        };
    }
    Ok(())
}
