//! Regret bounds as checkable functions of the round index.
//!
//! The two adversarial bounds are absolute. The polylogarithmic bounds hide
//! constants, so they are checked by order: the ratio of measured regret to
//! the bound's shape must not keep growing over the last few checkpoints.

use super::run::TraceStats;
use crate::environment::Regime;
use crate::error::{Error, Result};

/// Checkpoints used by the order check.
pub const ORDER_WINDOW: usize = 5;
/// Largest tolerated growth of the fitted ratio, relative to its mean, per
/// unit of ln t.
pub const ORDER_SLOPE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum BoundEnvelope {
    /// Oblivious adversary: 4 k √(t n ln n).
    Adversarial { n: usize, k_r: usize },
    /// m-memory adaptive adversary, leading term of the mini-batched bound.
    AdaptiveMiniBatch { n: usize, k_r: usize, memory: usize },
    /// Stochastic with known gaps.
    KnownGap { n: usize, k_r: usize, min_gap: f64 },
    /// Stochastic with estimated gaps.
    EstimatedGap { n: usize, k_r: usize, min_gap: f64 },
    /// Mixed: `jammed` adversarial channels, the rest stochastic.
    Mixed { n: usize, k_r: usize, jammed: usize, min_gap: f64 },
    /// Mixed with an adaptive jammer, mini-batched.
    MixedAdaptive { n: usize, k_r: usize, jammed: usize, memory: usize, min_gap: f64 },
    /// Contaminated stochastic with attacking strength `zeta`.
    Contaminated { n: usize, k_r: usize, min_gap: f64, zeta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    Absolute,
    Order,
}

impl BoundEnvelope {
    pub fn kind(&self) -> EnvelopeKind {
        match self {
            BoundEnvelope::Adversarial { .. } | BoundEnvelope::AdaptiveMiniBatch { .. } => EnvelopeKind::Absolute,
            _ => EnvelopeKind::Order,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundEnvelope::Adversarial { .. } => "adversarial",
            BoundEnvelope::AdaptiveMiniBatch { .. } => "adaptive_minibatch",
            BoundEnvelope::KnownGap { .. } => "known_gap",
            BoundEnvelope::EstimatedGap { .. } => "estimated_gap",
            BoundEnvelope::Mixed { .. } => "mixed",
            BoundEnvelope::MixedAdaptive { .. } => "mixed_adaptive",
            BoundEnvelope::Contaminated { .. } => "contaminated",
        }
    }

    pub fn applies_to(&self, regime: Regime) -> bool {
        match self {
            BoundEnvelope::Adversarial { .. } => regime == Regime::AdversarialOblivious,
            BoundEnvelope::AdaptiveMiniBatch { .. } => regime == Regime::AdversarialAdaptive,
            BoundEnvelope::KnownGap { .. } | BoundEnvelope::EstimatedGap { .. } => regime == Regime::Stochastic,
            BoundEnvelope::Mixed { .. } | BoundEnvelope::MixedAdaptive { .. } => regime == Regime::Mixed,
            BoundEnvelope::Contaminated { .. } => regime == Regime::Contaminated,
        }
    }

    /// Bound value for absolute envelopes, bound shape (constants dropped)
    /// for order envelopes.
    pub fn value(&self, t: u64) -> f64 {
        let t = t as f64;
        let lt = if t > 1.0 { t.ln() } else { 0.0 };
        let root = |n: usize| (n as f64 * (n as f64).ln()).sqrt();
        match *self {
            BoundEnvelope::Adversarial { n, k_r } => 4.0 * k_r as f64 * (t * n as f64 * (n as f64).ln()).sqrt(),
            BoundEnvelope::AdaptiveMiniBatch { n, k_r, memory } => {
                (memory as f64 + 1.0) * (4.0 * k_r as f64 * root(n)).powf(2.0 / 3.0) * t.powf(2.0 / 3.0)
            }
            BoundEnvelope::KnownGap { n, k_r, min_gap } => n as f64 * k_r as f64 * lt.powi(2) / min_gap,
            BoundEnvelope::EstimatedGap { n, k_r, min_gap } => n as f64 * k_r as f64 * lt.powi(3) / min_gap,
            BoundEnvelope::Mixed {
                n,
                k_r,
                jammed,
                min_gap,
            } => {
                (n - jammed) as f64 * k_r as f64 * lt.powi(3) / min_gap
                    + jammed as f64 * (t * n as f64 * (n as f64).ln()).sqrt()
            }
            BoundEnvelope::MixedAdaptive {
                n,
                k_r,
                jammed,
                memory,
                min_gap,
            } => {
                (n - jammed) as f64 * k_r as f64 * lt.powi(3) / min_gap
                    + (memory as f64 + 1.0) * (jammed as f64 * root(n)).powf(2.0 / 3.0) * t.powf(2.0 / 3.0)
            }
            BoundEnvelope::Contaminated { n, k_r, min_gap, zeta } => {
                n as f64 * k_r as f64 * lt.powi(3) / ((1.0 - 2.0 * zeta) * min_gap)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointVerdict {
    pub t: u64,
    pub mean: f64,
    pub envelope: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub envelope: &'static str,
    pub kind: EnvelopeKind,
    /// Absolute envelopes only.
    pub checkpoints: Vec<CheckpointVerdict>,
    /// Order envelopes only: slope of regret/shape against ln t, divided by
    /// the mean ratio.
    pub relative_slope: Option<f64>,
    pub passed: bool,
}

/// Least-squares slope of `ys` against `xs`.
pub fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Relative growth of `regret / shape` over the last [`ORDER_WINDOW`]
/// checkpoints past t = 1.
pub fn order_slope(checkpoints: &[u64], mean: &[f64], shape: impl Fn(u64) -> f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = checkpoints
        .iter()
        .zip(mean)
        .filter(|(t, _)| **t > 1)
        .map(|(&t, &m)| ((t as f64).ln(), m / shape(t)))
        .collect();
    if pts.len() < ORDER_WINDOW {
        return Err(Error::Config(format!(
            "order check needs {ORDER_WINDOW} checkpoints past t=1, got {}",
            pts.len()
        )));
    }
    let tail = &pts[pts.len() - ORDER_WINDOW..];
    let xs: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let level = ys.iter().sum::<f64>() / ys.len() as f64;
    if level <= 0.0 {
        // Nonpositive regret never outgrows any bound.
        return Ok(0.0);
    }
    Ok(fitted_slope(&xs, &ys) / level)
}

/// Compares aggregated regret with an envelope from the matching regime.
pub fn check_envelope(stats: &TraceStats, envelope: &BoundEnvelope, regime: Regime) -> Result<EnvelopeReport> {
    if !envelope.applies_to(regime) {
        return Err(Error::RegimeMismatch {
            envelope: envelope.name().to_string(),
            regime: regime.as_str().to_string(),
        });
    }
    match envelope.kind() {
        EnvelopeKind::Absolute => {
            let checkpoints: Vec<CheckpointVerdict> = stats
                .checkpoints
                .iter()
                .zip(&stats.mean)
                .map(|(&t, &mean)| {
                    let bound = envelope.value(t);
                    CheckpointVerdict {
                        t,
                        mean,
                        envelope: bound,
                        passed: mean <= bound,
                    }
                })
                .collect();
            let passed = checkpoints.iter().all(|c| c.passed);
            Ok(EnvelopeReport {
                envelope: envelope.name(),
                kind: EnvelopeKind::Absolute,
                checkpoints,
                relative_slope: None,
                passed,
            })
        }
        EnvelopeKind::Order => {
            let slope = order_slope(&stats.checkpoints, &stats.mean, |t| envelope.value(t))?;
            Ok(EnvelopeReport {
                envelope: envelope.name(),
                kind: EnvelopeKind::Order,
                checkpoints: Vec::new(),
                relative_slope: Some(slope),
                passed: slope <= ORDER_SLOPE_TOLERANCE,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adversarial_bound_examples() {
        let e = BoundEnvelope::Adversarial { n: 8, k_r: 4 };
        assert_eq!(e.value(0), 0.0);
        assert!((e.value(10_000) - 6526.0).abs() < 1.0, "{}", e.value(10_000));
    }

    #[test]
    fn adaptive_bound_grows_as_two_thirds_power() {
        let e = BoundEnvelope::AdaptiveMiniBatch { n: 8, k_r: 2, memory: 80 };
        let r = e.value(8_000) / e.value(1_000);
        assert!((r - 4.0).abs() < 1e-9);
    }

    #[test]
    fn regime_mismatch_refused() {
        let stats = TraceStats {
            checkpoints: vec![1, 10],
            mean: vec![0.0, 1.0],
            std: vec![0.0, 0.0],
        };
        let e = BoundEnvelope::Adversarial { n: 8, k_r: 4 };
        assert!(matches!(
            check_envelope(&stats, &e, Regime::Stochastic),
            Err(Error::RegimeMismatch { .. })
        ));
    }

    #[test]
    fn absolute_check_passes_below_and_fails_above() {
        let e = BoundEnvelope::Adversarial { n: 8, k_r: 4 };
        let cps = vec![1, 100, 10_000];
        let below = TraceStats {
            mean: cps.iter().map(|&t| 0.5 * e.value(t)).collect(),
            std: vec![0.0; 3],
            checkpoints: cps.clone(),
        };
        assert!(check_envelope(&below, &e, Regime::AdversarialOblivious).unwrap().passed);
        let above = TraceStats {
            mean: vec![0.0, 0.0, 7000.0],
            std: vec![0.0; 3],
            checkpoints: cps,
        };
        let report = check_envelope(&above, &e, Regime::AdversarialOblivious).unwrap();
        assert!(!report.passed);
        assert!(report.checkpoints[1].passed && !report.checkpoints[2].passed);
    }

    #[test]
    fn order_check_separates_polylog_from_linear() {
        let e = BoundEnvelope::EstimatedGap {
            n: 8,
            k_r: 4,
            min_gap: 0.2,
        };
        let cps: Vec<u64> = (0..=20).map(|j| 10f64.powf(j as f64 / 4.0).round() as u64).collect();
        let poly = TraceStats {
            mean: cps.iter().map(|&t| 3.0 * (t as f64).ln().powi(2)).collect(),
            std: vec![0.0; cps.len()],
            checkpoints: cps.clone(),
        };
        assert!(check_envelope(&poly, &e, Regime::Stochastic).unwrap().passed);
        let linear = TraceStats {
            mean: cps.iter().map(|&t| 0.1 * t as f64).collect(),
            std: vec![0.0; cps.len()],
            checkpoints: cps,
        };
        let report = check_envelope(&linear, &e, Regime::Stochastic).unwrap();
        assert!(!report.passed, "{:?}", report.relative_slope);
    }
}
