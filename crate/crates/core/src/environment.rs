//! Loss generators for the wireless regimes.
//!
//! All regimes share one Bernoulli backbone: every channel's reward is
//! Bernoulli(0.5) except a single best channel with bias `0.5 + delta`, and
//! losses are `1 - reward`. The per-round uniforms come from a counter-based
//! stream keyed on `(seed, t)`, so the loss matrix is a pure function of the
//! seed and never depends on which strategy a policy plays. Regimes then
//! modify the backbone:
//!
//! - oblivious adversarial: the best channel and its gap are re-drawn every
//!   two rounds from a separate seeded stream
//! - adaptive adversarial: a reactive jammer forces loss 1 on the channels
//!   played most often in the last `m` rounds
//! - mixed: a fixed seeded subset of `k_j` channels follows the oblivious
//!   model, the rest stay stochastic
//! - contaminated: either pre-scheduled worst-case flips at a rate bounded by
//!   `zeta * delta`, or a single switch of the best channel

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Strategy;

/// Contamination onset used when the experimental switch mode omits one.
pub const DEFAULT_SWITCH_ROUND: u64 = 2_500;

/// Strength at or below which contamination counts as moderate.
pub const MODERATE_ZETA: f64 = 0.25;

const BASE_LOSS: f64 = 0.5;
const OBLIVIOUS_GAP_RANGE: (f64, f64) = (0.1, 0.3);

const SALT_BASE: u64 = 0x6261_7365;
const SALT_BEST: u64 = 0x6265_7374;
const SALT_RELOCATE: u64 = 0x7265_6c6f;
const SALT_SUBSET: u64 = 0x7375_6273;
const SALT_SWITCH: u64 = 0x7377_6974;

/// Deterministically mixes seed parts into a new 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    // splitmix64 finalizer folded over the parts
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Independent random streams addressable by an index.
#[derive(Debug, Clone)]
struct CounterStream {
    key: [u8; 32],
}

impl CounterStream {
    fn new(seed: u64, salt: u64) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(derive_seed(&[seed, salt])).fill_bytes(&mut key);
        Self { key }
    }

    fn at(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }

    fn uniforms(&self, index: u64, n: usize) -> Vec<f64> {
        let mut rng = self.at(index);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Stochastic,
    AdversarialOblivious,
    AdversarialAdaptive,
    Mixed,
    Contaminated,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Stochastic => "stochastic",
            Regime::AdversarialOblivious => "adversarial_oblivious",
            Regime::AdversarialAdaptive => "adversarial_adaptive",
            Regime::Mixed => "mixed",
            Regime::Contaminated => "contaminated",
        }
    }

    /// Regimes whose expected losses are defined independently of the policy.
    pub fn is_stochastic_type(&self) -> bool {
        matches!(self, Regime::Stochastic | Regime::Mixed | Regime::Contaminated)
    }
}

/// Regime tag plus the parameters each regime needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub regime: Regime,
    pub n: usize,
    /// Reward advantage of the best channel.
    pub delta: f64,
    pub seed: u64,
    /// Jammed channel count (adaptive and mixed).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jammed: Option<usize>,
    /// Adaptive jammer memory `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    /// Attacking strength (contaminated, formal mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    /// Contamination onset `tau` (formal mode, defaults to 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onset: Option<u64>,
    /// Last round of the initial model (contaminated, switch mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_round: Option<u64>,
}

impl EnvironmentSpec {
    fn base(regime: Regime, n: usize, delta: f64, seed: u64) -> Self {
        Self {
            regime,
            n,
            delta,
            seed,
            jammed: None,
            memory: None,
            zeta: None,
            onset: None,
            switch_round: None,
        }
    }

    pub fn stochastic(n: usize, delta: f64, seed: u64) -> Self {
        Self::base(Regime::Stochastic, n, delta, seed)
    }

    pub fn oblivious(n: usize, seed: u64) -> Self {
        Self::base(Regime::AdversarialOblivious, n, 0.2, seed)
    }

    pub fn adaptive(n: usize, delta: f64, memory: usize, jammed: usize, seed: u64) -> Self {
        Self {
            memory: Some(memory),
            jammed: Some(jammed),
            ..Self::base(Regime::AdversarialAdaptive, n, delta, seed)
        }
    }

    pub fn mixed(n: usize, delta: f64, jammed: usize, seed: u64) -> Self {
        Self {
            jammed: Some(jammed),
            ..Self::base(Regime::Mixed, n, delta, seed)
        }
    }

    pub fn contaminated_formal(n: usize, delta: f64, zeta: f64, onset: u64, seed: u64) -> Self {
        Self {
            zeta: Some(zeta),
            onset: Some(onset),
            ..Self::base(Regime::Contaminated, n, delta, seed)
        }
    }

    pub fn contaminated_switch(n: usize, delta: f64, switch_round: u64, seed: u64) -> Self {
        Self {
            switch_round: Some(switch_round),
            ..Self::base(Regime::Contaminated, n, delta, seed)
        }
    }

    /// Copy with the seed replaced by one derived from `(seed, repetition)`.
    pub fn for_repetition(&self, repetition: usize) -> Self {
        Self {
            seed: derive_seed(&[self.seed, repetition as u64]),
            ..self.clone()
        }
    }

    /// True when formal contamination strength is at most one quarter.
    pub fn is_moderate(&self) -> bool {
        self.zeta.is_none_or(|z| z <= MODERATE_ZETA)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return cfg(format!("environment needs at least 2 channels, got {}", self.n));
        }
        if !(0.0..=0.5).contains(&self.delta) {
            return cfg(format!("delta must lie in [0, 0.5], got {}", self.delta));
        }
        let name = self.regime.as_str();
        let present = [
            ("jammed", self.jammed.is_some()),
            ("memory", self.memory.is_some()),
            ("zeta", self.zeta.is_some()),
            ("onset", self.onset.is_some()),
            ("switch_round", self.switch_round.is_some()),
        ];
        let allowed: &[&str] = match self.regime {
            Regime::Stochastic | Regime::AdversarialOblivious => &[],
            Regime::AdversarialAdaptive => &["jammed", "memory"],
            Regime::Mixed => &["jammed"],
            Regime::Contaminated => &["zeta", "onset", "switch_round"],
        };
        for (field, is_set) in present {
            if is_set && !allowed.contains(&field) {
                return cfg(format!("field '{field}' does not apply to regime '{name}'"));
            }
        }
        match self.regime {
            Regime::Stochastic | Regime::AdversarialOblivious => {}
            Regime::AdversarialAdaptive => {
                match self.memory {
                    Some(m) if m >= 1 => {}
                    _ => return cfg("adaptive regime requires memory >= 1".into()),
                }
                match self.jammed {
                    Some(j) if (1..=self.n).contains(&j) => {}
                    _ => return cfg(format!("adaptive regime requires 1 <= jammed <= {}", self.n)),
                }
            }
            Regime::Mixed => match self.jammed {
                Some(j) if j < self.n => {}
                Some(j) => {
                    return cfg(format!(
                        "mixed regime needs jammed < n (got {j} of {}); use the adversarial regime",
                        self.n
                    ))
                }
                None => return cfg("mixed regime requires 'jammed'".into()),
            },
            Regime::Contaminated => match (self.zeta, self.switch_round) {
                (Some(z), None) => {
                    if !(0.0..0.5).contains(&z) {
                        return cfg(format!(
                            "zeta = {z} is outside [0, 1/2): the regime is severely contaminated and carries no guarantee"
                        ));
                    }
                }
                (None, Some(s)) => {
                    if s == 0 {
                        return cfg("switch_round must be at least 1".into());
                    }
                    if self.onset.is_some() {
                        return cfg("'onset' only applies to formal contamination (zeta)".into());
                    }
                }
                _ => return cfg("contaminated regime needs exactly one of 'zeta' or 'switch_round'".into()),
            },
        }
        Ok(())
    }
}

/// Losses of one round: realized for every channel, plus expected losses when
/// the regime defines them independently of the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLosses {
    pub realized: Vec<f64>,
    pub expected: Option<Vec<f64>>,
}

impl RoundLosses {
    /// Semi-bandit view: the realized losses of the chosen channels.
    pub fn observed(&self, chosen: &Strategy) -> Vec<f64> {
        chosen.members().iter().map(|&f| self.realized[f]).collect()
    }
}

/// Best channel and its gap for the oblivious relocation model.
#[derive(Debug, Clone)]
struct Relocation {
    stream: CounterStream,
    n: usize,
}

impl Relocation {
    /// Best channel and gap in force at round `t` (re-drawn every 2 rounds).
    fn at(&self, t: u64) -> (usize, f64) {
        let pair = (t.max(1) - 1) / 2;
        let mut rng = self.stream.at(pair);
        let best = rng.random_range(0..self.n);
        let gap = rng.random_range(OBLIVIOUS_GAP_RANGE.0..=OBLIVIOUS_GAP_RANGE.1);
        (best, gap)
    }

    fn mean(&self, t: u64, f: usize) -> f64 {
        let (best, gap) = self.at(t);
        if f == best {
            BASE_LOSS - gap
        } else {
            BASE_LOSS
        }
    }
}

#[derive(Debug, Clone)]
enum Model {
    Stochastic,
    Oblivious(Relocation),
    Adaptive {
        memory: usize,
        jammed: usize,
        window: VecDeque<Strategy>,
    },
    Mixed {
        relocation: Relocation,
        adversarial: Vec<bool>,
    },
    Formal {
        rate: f64,
        onset: u64,
    },
    Switch {
        switch_round: u64,
        second_best: usize,
    },
}

/// A seeded environment instance driven round by round.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvironmentSpec,
    base: CounterStream,
    best: usize,
    model: Model,
}

fn bernoulli_loss(u: f64, mean_loss: f64) -> f64 {
    // reward = 1 with probability 1 - mean_loss
    if u < 1.0 - mean_loss {
        0.0
    } else {
        1.0
    }
}

/// Channels a frequency-tracking jammer hits: the `jammed` most played
/// channels in `window` (ties to the lower index), never an unplayed one.
pub fn jam_targets<'a, I>(window: I, n: usize, jammed: usize) -> Vec<usize>
where
    I: IntoIterator<Item = &'a Strategy>,
{
    let mut counts = vec![0u64; n];
    for s in window {
        for &f in s.members() {
            counts[f] += 1;
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&f| counts[f] > 0).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order.truncate(jammed);
    order.sort_unstable();
    order
}

impl Environment {
    pub fn new(spec: &EnvironmentSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let best = ChaCha8Rng::seed_from_u64(derive_seed(&[spec.seed, SALT_BEST])).random_range(0..n);
        let relocation = || Relocation {
            stream: CounterStream::new(spec.seed, SALT_RELOCATE),
            n,
        };
        let model = match spec.regime {
            Regime::Stochastic => Model::Stochastic,
            Regime::AdversarialOblivious => Model::Oblivious(relocation()),
            Regime::AdversarialAdaptive => Model::Adaptive {
                memory: spec.memory.unwrap_or(1),
                jammed: spec.jammed.unwrap_or(1),
                window: VecDeque::new(),
            },
            Regime::Mixed => {
                let k_j = spec.jammed.unwrap_or(0);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[spec.seed, SALT_SUBSET]));
                let others: Vec<usize> = (0..n).filter(|&f| f != best).collect();
                let mut adversarial = vec![false; n];
                for i in sample(&mut rng, others.len(), k_j) {
                    adversarial[others[i]] = true;
                }
                Model::Mixed {
                    relocation: relocation(),
                    adversarial,
                }
            }
            Regime::Contaminated => match (spec.zeta, spec.switch_round) {
                (Some(zeta), _) => Model::Formal {
                    rate: zeta * spec.delta,
                    onset: spec.onset.unwrap_or(0),
                },
                (None, switch) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[spec.seed, SALT_SWITCH]));
                    let mut second_best = rng.random_range(0..n - 1);
                    if second_best >= best {
                        second_best += 1;
                    }
                    Model::Switch {
                        switch_round: switch.unwrap_or(DEFAULT_SWITCH_ROUND),
                        second_best,
                    }
                }
            },
        };
        Ok(Self {
            spec: spec.clone(),
            base: CounterStream::new(spec.seed, SALT_BASE),
            best,
            model,
        })
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    /// The designated best channel of the stochastic backbone.
    pub fn best_channel(&self) -> usize {
        self.best
    }

    /// Channels driven by the oblivious adversary in the mixed regime.
    pub fn adversarial_channels(&self) -> Vec<usize> {
        match &self.model {
            Model::Mixed { adversarial, .. } => (0..self.n()).filter(|&f| adversarial[f]).collect(),
            _ => Vec::new(),
        }
    }

    fn stochastic_means(&self, best: usize) -> Vec<f64> {
        let mut mu = vec![BASE_LOSS; self.n()];
        mu[best] = BASE_LOSS - self.spec.delta;
        mu
    }

    /// Whether round `t` is a formal contamination location. Every channel
    /// is contaminated on the same rounds, which arrive at rate `zeta * delta`
    /// after the onset.
    pub fn is_contaminated(&self, t: u64) -> bool {
        match self.model {
            Model::Formal { rate, onset } => {
                t > onset && ((t as f64) * rate).floor() > (((t - 1) as f64) * rate).floor()
            }
            _ => false,
        }
    }

    /// Expected per-channel losses at round `t`, for regimes where they do not
    /// depend on the policy.
    pub fn expected_losses(&self, t: u64) -> Option<Vec<f64>> {
        match &self.model {
            Model::Stochastic | Model::Formal { .. } => Some(self.stochastic_means(self.best)),
            Model::Switch {
                switch_round,
                second_best,
            } => {
                let best = if t <= *switch_round { self.best } else { *second_best };
                Some(self.stochastic_means(best))
            }
            Model::Mixed {
                relocation,
                adversarial,
            } => {
                let mut mu = self.stochastic_means(self.best);
                for (f, m) in mu.iter_mut().enumerate() {
                    if adversarial[f] {
                        *m = relocation.mean(t, f);
                    }
                }
                Some(mu)
            }
            Model::Oblivious(_) | Model::Adaptive { .. } => None,
        }
    }

    fn draw(&self, t: u64, means: &[f64]) -> Vec<f64> {
        self.base
            .uniforms(t, self.n())
            .into_iter()
            .zip(means)
            .map(|(u, &m)| bernoulli_loss(u, m))
            .collect()
    }

    /// Bernoulli losses with one best channel of bias `0.5 + delta`.
    pub fn stochastic_step(&self, t: u64) -> RoundLosses {
        let mu = self.stochastic_means(self.best);
        RoundLosses {
            realized: self.draw(t, &mu),
            expected: Some(mu),
        }
    }

    /// Losses from the relocating-best-channel model; a pure function of
    /// `(seed, t)`.
    pub fn oblivious_adversarial_step(&self, t: u64) -> RoundLosses {
        let relocation = match &self.model {
            Model::Oblivious(r) => r,
            _ => unreachable!("oblivious step on a non-oblivious environment"),
        };
        let mu: Vec<f64> = (0..self.n()).map(|f| relocation.mean(t, f)).collect();
        RoundLosses {
            realized: self.draw(t, &mu),
            expected: None,
        }
    }

    /// Stochastic backbone with the most-played channels of `window` jammed
    /// to loss 1.
    pub fn adaptive_adversarial_step<'a, I>(&self, t: u64, window: I, jammed: usize) -> RoundLosses
    where
        I: IntoIterator<Item = &'a Strategy>,
    {
        let mut realized = self.draw(t, &self.stochastic_means(self.best));
        for f in jam_targets(window, self.n(), jammed) {
            realized[f] = 1.0;
        }
        RoundLosses {
            realized,
            expected: None,
        }
    }

    pub fn mixed_step(&self, t: u64) -> RoundLosses {
        let mu = self.expected_losses(t).expect("mixed regime defines expected losses");
        RoundLosses {
            realized: self.draw(t, &mu),
            expected: Some(mu),
        }
    }

    pub fn contaminated_step(&self, t: u64) -> RoundLosses {
        let mu = self.expected_losses(t).expect("contaminated regime defines expected losses");
        let mut realized = self.draw(t, &mu);
        if self.is_contaminated(t) {
            for (f, l) in realized.iter_mut().enumerate() {
                *l = if f == self.best { 1.0 } else { 0.0 };
            }
        }
        RoundLosses { realized, expected: Some(mu) }
    }

    /// Advances one round. Only the adaptive regime reads `chosen`, after the
    /// losses are fixed, to update its memory.
    pub fn step(&mut self, t: u64, chosen: &Strategy) -> RoundLosses {
        match &self.model {
            Model::Stochastic => self.stochastic_step(t),
            Model::Oblivious(_) => self.oblivious_adversarial_step(t),
            Model::Mixed { .. } => self.mixed_step(t),
            Model::Formal { .. } | Model::Switch { .. } => self.contaminated_step(t),
            Model::Adaptive { window, jammed, .. } => {
                let out = self.adaptive_adversarial_step(t, window.iter(), *jammed);
                if let Model::Adaptive { memory, window, .. } = &mut self.model {
                    window.push_back(chosen.clone());
                    while window.len() > *memory {
                        window.pop_front();
                    }
                }
                out
            }
        }
    }
}
