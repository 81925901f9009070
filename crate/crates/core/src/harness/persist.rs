//! Result files: CSV summaries, per-repetition traces and a manifest that
//! can be fed back as a config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ARTIFACT_NAME, ARTIFACT_VERSION};
use super::run::ExperimentResult;
use crate::environment::Regime;
use crate::error::{Error, Result};

pub const BITS_PER_PACKET: f64 = 1000.0;
pub const SECONDS_PER_SLOT: f64 = 1.0;

pub const RESULTS_FILE: &str = "results.csv";
pub const TRACES_FILE: &str = "traces.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const PACKET_RATE_FILE: &str = "packet_rate.csv";
pub const ERRORS_FILE: &str = "errors.txt";
pub const PLOT_FILE: &str = "plot.py";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub policy: String,
    pub repetition: usize,
    /// Hex, since TOML integers are signed 64-bit.
    pub policy_seed: String,
    pub environment_seed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub primary_metric: String,
    pub metric_note: String,
    pub seeds: Vec<SeedRecord>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn for_config(config: &ExperimentConfig) -> Self {
        let regime = config.environment.regime;
        let primary = super::run::Metric::primary_for(regime);
        let metric_note = match regime {
            Regime::AdversarialAdaptive => {
                "hindsight regret against the best fixed strategy on the realized losses; \
                 competitors that adapt to the adversary's memory are not evaluated"
            }
            Regime::AdversarialOblivious => "hindsight regret against the best fixed strategy on the realized losses",
            _ => "pseudo-regret against the expected-loss optimal strategy of each round",
        };
        let mut seeds = Vec::new();
        for (p, spec) in config.policies.iter().enumerate() {
            for r in 0..config.repetitions {
                seeds.push(SeedRecord {
                    policy: spec.label(),
                    repetition: r,
                    policy_seed: format!("{:#018x}", config.policy_seed(p, r)),
                    environment_seed: format!("{:#018x}", config.environment_for(r).seed),
                });
            }
        }
        Self {
            artifact: ARTIFACT_NAME.into(),
            version: ARTIFACT_VERSION.into(),
            primary_metric: primary.as_str().into(),
            metric_note: metric_note.into(),
            seeds,
            config: config.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Summary CSV: one row per (policy, checkpoint) of the primary metric.
pub fn results_csv(result: &ExperimentResult) -> String {
    let cfg = &result.config;
    let mut out = String::from("run_id,policy,regime,n,k_r,checkpoint,regret_mean,regret_std\n");
    for p in &result.policies {
        let Ok(runs) = &p.outcome else { continue };
        let s = &runs.primary;
        for i in 0..s.checkpoints.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                cfg.name,
                p.label,
                cfg.environment.regime.as_str(),
                cfg.environment.n,
                cfg.k_r,
                s.checkpoints[i],
                s.mean[i],
                s.std[i]
            );
        }
    }
    out
}

/// Per-repetition traces with both regret notions.
pub fn traces_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("run_id,policy,repetition,checkpoint,pseudo_regret,hindsight_regret,realized_loss\n");
    for p in &result.policies {
        let Ok(runs) = &p.outcome else { continue };
        for tr in &runs.traces {
            for i in 0..tr.checkpoints.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    result.config.name,
                    p.label,
                    tr.repetition,
                    tr.checkpoints[i],
                    tr.pseudo_regret[i],
                    tr.hindsight_regret[i],
                    tr.realized_loss[i]
                );
            }
        }
    }
    out
}

/// Received bits per second at the horizon: every listened channel whose loss
/// is 0 delivers one packet per slot.
pub fn packet_rate_csv(result: &ExperimentResult) -> String {
    let cfg = &result.config;
    let mut out = String::from("run_id,policy,regime,n,k_r,horizon,rate_bps_mean,rate_bps_std\n");
    let slots = cfg.horizon as f64;
    for p in &result.policies {
        let Ok(runs) = &p.outcome else { continue };
        let rates: Vec<f64> = runs
            .traces
            .iter()
            .map(|tr| {
                let lost = tr.realized_loss.last().copied().unwrap_or(0.0);
                (cfg.k_r as f64 * slots - lost) * BITS_PER_PACKET / (slots * SECONDS_PER_SLOT)
            })
            .collect();
        let m = rates.iter().sum::<f64>() / rates.len() as f64;
        let sd = if rates.len() > 1 {
            (rates.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (rates.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            cfg.name,
            p.label,
            cfg.environment.regime.as_str(),
            cfg.environment.n,
            cfg.k_r,
            cfg.horizon,
            m,
            sd
        );
    }
    out
}

fn timings_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("policy,select_ns_per_round,observe_ns_per_round\n");
    for p in &result.policies {
        if let Ok(runs) = &p.outcome {
            let _ = writeln!(out, "{},{},{}", p.label, runs.timing.select_ns, runs.timing.observe_ns);
        }
    }
    out
}

const PLOT_SCRIPT: &str = r#"import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "results.csv"
series = defaultdict(lambda: ([], [], []))
with open(path) as fh:
    for row in csv.DictReader(fh):
        t, m, s = series[row["policy"]]
        t.append(int(row["checkpoint"]))
        m.append(float(row["regret_mean"]))
        s.append(float(row["regret_std"]))

for policy, (t, m, s) in series.items():
    (line,) = plt.plot(t, m, label=policy)
    plt.plot(t, [a + b for a, b in zip(m, s)], "--", color=line.get_color())
plt.xscale("log")
plt.xlabel("round")
plt.ylabel("regret")
plt.legend()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"#;

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Writes every result file into `dir`, creating it if needed.
pub fn persist_results(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut written = vec![
        write(dir, RESULTS_FILE, &results_csv(result))?,
        write(dir, TRACES_FILE, &traces_csv(result))?,
        write(dir, MANIFEST_FILE, &Manifest::for_config(&result.config).to_toml()?)?,
        write(dir, TIMINGS_FILE, &timings_csv(result))?,
        write(dir, PLOT_FILE, PLOT_SCRIPT)?,
    ];
    if result.config.packet_rate_summary {
        written.push(write(dir, PACKET_RATE_FILE, &packet_rate_csv(result))?);
    }
    let errors: String = result
        .policies
        .iter()
        .filter_map(|p| p.outcome.as_ref().err().map(|e| format!("{}: {e}\n", p.label)))
        .collect();
    if !errors.is_empty() {
        written.push(write(dir, ERRORS_FILE, &errors)?);
    }
    Ok(written)
}
