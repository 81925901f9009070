//! Learning-rate and exploration schedules for the exponential-weights policy.
//!
//! Two knobs drive the policy: the learning rate `eta_t` (controls adversarial
//! regret) and the per-channel exploration term `xi_t(f)` (controls regret in
//! stochastic regimes). The exploration floor actually used is
//! `eps_t(f) = min{1/(2n), beta_t, xi_t(f)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exploration constant used by the empirical-gap schedule unless overridden.
pub const DEFAULT_GAP_CONSTANT: f64 = 18.0;

/// Denominator of the experimental schedule `ln(t g^2) / (32 t g^2)`.
const EXPERIMENTAL_DENOMINATOR: f64 = 32.0;

/// `beta_t = 0.5 * sqrt(ln n / (t n))`.
pub fn beta(t: u64, n: usize) -> f64 {
    debug_assert!(t >= 1 && n >= 2);
    let n = n as f64;
    0.5 * (n.ln() / (t as f64 * n)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRate {
    /// `eta_t = beta_t`; the variant with an adversarial guarantee.
    Emp,
    /// `eta_t = 1`.
    Acc,
    /// Fixed `eta`, must be positive.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Exploration {
    /// `c (ln t)^2 / (t gap_{t-1}(f)^2)` with empirically estimated gaps.
    EmpiricalGap { c: f64 },
    /// `ln(t gap^2) / (32 t gap^2)` with empirically estimated gaps.
    Experimental,
    /// `c ln(t gap^2) / (t gap^2)` with gaps supplied up front.
    KnownGap { c: f64, gaps: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub learning_rate: LearningRate,
    pub exploration: Exploration,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            learning_rate: LearningRate::Emp,
            exploration: Exploration::EmpiricalGap {
                c: DEFAULT_GAP_CONSTANT,
            },
        }
    }
}

/// `value / (t g^2)` style term, mapped to `[0, +inf]`: an exactly zero gap
/// yields `+inf` and a log argument below one yields `0`.
fn gap_term(numerator_scale: f64, t: f64, gap: f64, log_of_tg2: bool) -> f64 {
    if gap <= 0.0 {
        return f64::INFINITY;
    }
    let tg2 = t * gap * gap;
    let numerator = if log_of_tg2 {
        if tg2 < 1.0 {
            return 0.0;
        }
        tg2.ln()
    } else {
        let l = t.ln();
        l * l
    };
    (numerator_scale * numerator / tg2).max(0.0)
}

impl Schedule {
    pub fn new(learning_rate: LearningRate, exploration: Exploration) -> Self {
        Self {
            learning_rate,
            exploration,
        }
    }

    /// `eta_t = beta_t` with the experimental exploration form.
    pub fn emp() -> Self {
        Self::new(LearningRate::Emp, Exploration::Experimental)
    }

    /// `eta_t = 1` with the experimental exploration form.
    pub fn acc() -> Self {
        Self::new(LearningRate::Acc, Exploration::Experimental)
    }

    pub fn known_gap(c: f64, gaps: Vec<f64>) -> Self {
        Self::new(LearningRate::Emp, Exploration::KnownGap { c, gaps })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let LearningRate::Constant(eta) = self.learning_rate {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::Config(format!("learning rate must be positive, got {eta}")));
            }
        }
        match &self.exploration {
            Exploration::EmpiricalGap { c } => check_constant(*c),
            Exploration::Experimental => Ok(()),
            Exploration::KnownGap { c, gaps } => {
                check_constant(*c)?;
                if gaps.is_empty() {
                    return Err(Error::Config("known-gap schedule requires per-channel gaps".into()));
                }
                if gaps.len() != n {
                    return Err(Error::Config(format!(
                        "known-gap schedule has {} gaps for {n} channels",
                        gaps.len()
                    )));
                }
                if gaps.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                    return Err(Error::Config("known gaps must be finite and non-negative".into()));
                }
                Ok(())
            }
        }
    }

    /// Learning rate for round `t`.
    pub fn eta(&self, t: u64, n: usize) -> f64 {
        match self.learning_rate {
            LearningRate::Emp => beta(t, n),
            LearningRate::Acc => 1.0,
            LearningRate::Constant(eta) => eta,
        }
    }

    /// `xi_t(f)`. `gap_estimates` holds the estimates from the end of round
    /// `t - 1` and is ignored by the known-gap form.
    pub fn xi(&self, t: u64, f: usize, gap_estimates: &[f64]) -> f64 {
        match &self.exploration {
            Exploration::EmpiricalGap { c } => gap_term(*c, t as f64, gap_estimates[f], false),
            Exploration::Experimental => {
                gap_term(1.0 / EXPERIMENTAL_DENOMINATOR, t as f64, gap_estimates[f], true)
            }
            Exploration::KnownGap { c, gaps } => gap_term(*c, t as f64, gaps[f], true),
        }
    }

    /// `eps_t(f) = min{1/(2n), beta_t, xi_t(f)}`.
    pub fn epsilon(&self, t: u64, n: usize, f: usize, gap_estimates: &[f64]) -> f64 {
        let cap = (0.5 / n as f64).min(beta(t, n));
        cap.min(self.xi(t, f, gap_estimates))
    }

    pub fn epsilons(&self, t: u64, n: usize, gap_estimates: &[f64]) -> Vec<f64> {
        (0..n).map(|f| self.epsilon(t, n, f, gap_estimates)).collect()
    }
}

fn check_constant(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("exploration constant must be positive, got {c}")))
    }
}
