//! Canned experiment configurations at their full published horizons.

use semibandit::environment::EnvironmentSpec;
use semibandit::harness::bench::TABLE_GRID;
use semibandit::harness::{BatchSpec, ExperimentConfig, PolicySpec};
use semibandit::schedule::{Exploration, LearningRate, Schedule};
use semibandit::types::DEFAULT_ENUMERATION_CAP;

pub const NAMES: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "fig6", "table1"];

const DELTA: f64 = 0.2;
const SEED: u64 = 20_160_101;

pub enum Preset {
    Experiments(Vec<ExperimentConfig>),
    Bench(Vec<(usize, usize)>),
}

fn emp() -> PolicySpec {
    PolicySpec::aufh(Schedule::new(LearningRate::Emp, Exploration::Experimental))
}

fn acc() -> PolicySpec {
    PolicySpec::aufh(Schedule::new(LearningRate::Acc, Exploration::Experimental))
}

fn config(name: String, k_r: usize, horizon: u64, environment: EnvironmentSpec, policies: Vec<PolicySpec>) -> ExperimentConfig {
    ExperimentConfig {
        name,
        k_r,
        horizon,
        repetitions: 10,
        checkpoints_per_decade: 10,
        master_seed: SEED,
        enumeration_cap: DEFAULT_ENUMERATION_CAP,
        packet_rate_summary: false,
        environment,
        policies,
    }
}

fn regime_zoo(n: usize, seed: u64) -> Vec<(&'static str, EnvironmentSpec)> {
    vec![
        ("stochastic", EnvironmentSpec::stochastic(n, DELTA, seed)),
        ("contaminated", EnvironmentSpec::contaminated_switch(n, DELTA, 2_500, seed)),
        ("oblivious", EnvironmentSpec::oblivious(n, seed)),
        ("adaptive", EnvironmentSpec::adaptive(n, DELTA, 80, 2, seed)),
        ("mixed", EnvironmentSpec::mixed(n, DELTA, 2, seed)),
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    let baselines = || vec![PolicySpec::CombUcb1, PolicySpec::Thompson, PolicySpec::Exp3];
    let with = |mut head: Vec<PolicySpec>| {
        head.extend(baselines());
        head
    };
    let out = match name {
        "fig2" => Preset::Experiments(
            [(8, 4), (16, 4), (60, 4)]
                .into_iter()
                .map(|(n, k)| {
                    config(
                        format!("fig2-n{n}-k{k}"),
                        k,
                        10_000_000,
                        EnvironmentSpec::stochastic(n, DELTA, SEED + n as u64),
                        with(vec![emp(), acc()]),
                    )
                })
                .collect(),
        ),
        "fig3" => Preset::Experiments(
            [4, 8, 16]
                .into_iter()
                .map(|n| {
                    config(
                        format!("fig3-n{n}-k2"),
                        2,
                        8_000_000,
                        EnvironmentSpec::contaminated_switch(n, DELTA, 2_500, SEED + n as u64),
                        with(vec![emp(), acc()]),
                    )
                })
                .collect(),
        ),
        "fig4" => Preset::Experiments(vec![config(
            "fig4-n8-k2".into(),
            2,
            8_000_000,
            EnvironmentSpec::oblivious(8, SEED),
            with(vec![emp()]),
        )]),
        "fig5" => Preset::Experiments(vec![config(
            "fig5-n8-k2".into(),
            2,
            8_000_000,
            EnvironmentSpec::adaptive(8, DELTA, 80, 2, SEED),
            with(vec![emp(), emp().with_minibatch(BatchSpec::Horizon)]),
        )]),
        "fig6" => Preset::Experiments(
            [4, 8, 16]
                .into_iter()
                .flat_map(|n| {
                    regime_zoo(n, SEED + n as u64).into_iter().map(move |(tag, env)| {
                        let mut c = config(format!("fig6-{tag}-n{n}-k2"), 2, 20_000_000, env, Vec::new());
                        c.packet_rate_summary = true;
                        c
                    })
                })
                .map(|mut c| {
                    c.policies = with(vec![emp()]);
                    c
                })
                .collect(),
        ),
        "table1" => Preset::Bench(TABLE_GRID.iter().copied().chain([(64, 24)]).collect()),
        _ => return None,
    };
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves_and_validates() {
        for name in NAMES {
            match preset(name).unwrap() {
                Preset::Experiments(cfgs) => {
                    assert!(!cfgs.is_empty());
                    for c in cfgs {
                        c.validate().unwrap();
                        let text = c.to_toml().unwrap();
                        assert_eq!(ExperimentConfig::from_toml(&text, &[]).unwrap(), c);
                    }
                }
                Preset::Bench(grid) => assert!(grid.contains(&(64, 12))),
            }
        }
        assert!(preset("fig9").is_none());
    }

    #[test]
    fn fig2_matches_published_setup() {
        let Preset::Experiments(cfgs) = preset("fig2").unwrap() else {
            panic!()
        };
        let pairs: Vec<(usize, usize)> = cfgs.iter().map(|c| (c.environment.n, c.k_r)).collect();
        assert_eq!(pairs, vec![(8, 4), (16, 4), (60, 4)]);
        for c in &cfgs {
            assert_eq!(c.repetitions, 10);
            assert_eq!(c.environment.delta, 0.2);
            let labels: Vec<String> = c.policies.iter().map(|p| p.label()).collect();
            assert_eq!(labels, ["aufh_emp", "aufh_acc", "combucb1", "thompson", "anti_jam_exp3"]);
        }
    }

    #[test]
    fn fig5_uses_memory_80() {
        let Preset::Experiments(cfgs) = preset("fig5").unwrap() else {
            panic!()
        };
        assert_eq!(cfgs[0].environment.memory, Some(80));
    }
}
