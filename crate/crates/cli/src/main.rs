//! `semibandit`: run, sweep, bench and verify channel-access experiments.

mod presets;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semibandit::harness::bench::{dp_cost_model, timings_csv, BenchSettings, TABLE_GRID};
use semibandit::harness::verify::verify_suite;
use semibandit::harness::{persist_results, run_experiment_with_threads, timing_bench, ExperimentConfig, ExperimentResult};
use semibandit::policy::Backend;
use semibandit::Error;

use presets::Preset;

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "semibandit", version, about = "Combinatorial semi-bandit channel access experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config (or manifest).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a config once per point of a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `key=v1,v2,...`; repeat for a cartesian product.
        #[arg(long = "grid", required = true)]
        grids: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Time both policy backends per round.
    Bench {
        /// Space grid as `n:k,n:k,...`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 1000)]
        rounds: usize,
        #[arg(long, default_value_t = 100)]
        warmup: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the fast oracle and property checks.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run a canned configuration.
    Preset {
        #[arg(value_parser = presets::NAMES)]
        name: String,
        /// Write manifests without running.
        #[arg(long)]
        emit_only: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Horizon override; accepts forms like `1e5`.
    #[arg(long, value_parser = parse_horizon)]
    horizon: Option<u64>,
    /// Dotted `key=value` override, applied after parsing.
    #[arg(long = "set")]
    overrides: Vec<String>,
}

fn parse_horizon(raw: &str) -> Result<u64, String> {
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = raw.parse().map_err(|_| format!("'{raw}' is not a number"))?;
    if v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("'{raw}' is not a positive whole number"))
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn resolve(text: &str, common: &Common, extra: &[String]) -> Result<ExperimentConfig, Failure> {
    let mut overrides: Vec<String> = extra.to_vec();
    overrides.extend(common.overrides.iter().cloned());
    if let Some(seed) = common.seed {
        overrides.push(format!("master_seed={seed}"));
    }
    if let Some(h) = common.horizon {
        overrides.push(format!("horizon={h}"));
    }
    Ok(ExperimentConfig::from_toml(text, &overrides)?)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn summarize(result: &ExperimentResult) {
    println!("{} ({}, {})", result.config.name, result.config.environment.regime.as_str(), result.metric.as_str());
    for p in &result.policies {
        match &p.outcome {
            Ok(runs) => {
                let i = runs.primary.mean.len() - 1;
                println!(
                    "  {:<24} t={:<10} regret {:.1} +/- {:.1}",
                    p.label, runs.primary.checkpoints[i], runs.primary.mean[i], runs.primary.std[i]
                );
            }
            Err(e) => println!("  {:<24} skipped: {e}", p.label),
        }
    }
}

fn execute(config: &ExperimentConfig, common: &Common, out: &Path) -> Result<(), Failure> {
    let threads = common.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let result = run_experiment_with_threads(config, threads)?;
    persist_results(&result, out)?;
    summarize(&result);
    println!("  wrote {}", out.display());
    Ok(())
}

/// Expands `key=a,b` grids into override lists, first key varying slowest.
fn grid_points(grids: &[String]) -> Result<Vec<Vec<String>>, Failure> {
    let mut points: Vec<Vec<String>> = vec![Vec::new()];
    for g in grids {
        let (key, values) = g
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("grid '{g}' is not key=v1,v2")))?;
        let mut next = Vec::new();
        for p in &points {
            for v in values.split(',') {
                let mut q = p.clone();
                q.push(format!("{key}={}", v.trim()));
                next.push(q);
            }
        }
        points = next;
    }
    Ok(points)
}

fn parse_space_grid(raw: &str) -> Result<Vec<(usize, usize)>, Failure> {
    raw.split(',')
        .map(|pair| {
            let (n, k) = pair
                .split_once(':')
                .ok_or_else(|| Failure::Config(format!("grid entry '{pair}' is not n:k")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Failure::Config(format!("grid entry '{pair}' is not n:k")))
            };
            Ok((parse(n)?, parse(k)?))
        })
        .collect()
}

fn bench(grid: &[(usize, usize)], settings: &BenchSettings, out: Option<&Path>) -> Result<(), Failure> {
    let rows = timing_bench(grid, settings)?;
    println!("{:>4} {:>4} {:>14} {:>14}", "n", "k_r", "reference_us", "dp_us");
    for pair in rows.chunks(2) {
        let show = |v: Option<f64>| v.map_or("infeasible".to_string(), |us| format!("{us:.1}"));
        let (r, d) = (&pair[0], &pair[1]);
        debug_assert!(r.backend == Backend::Reference && d.backend == Backend::Dp);
        println!("{:>4} {:>4} {:>14} {:>14}", r.n, r.k_r, show(r.median_us), show(d.median_us));
    }
    let (a, b, r2) = dp_cost_model(&rows);
    println!("dp time ~ {a:.2} + {b:.4} * n * k_r us (R^2 = {r2:.3})");
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
        let path = dir.join("timings.csv");
        fs::write(&path, timings_csv(&rows)).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, common } => {
            let cfg = resolve(&read(&config)?, &common, &[])?;
            execute(&cfg, &common, &common.out)
        }
        Command::Sweep { config, grids, common } => {
            let text = read(&config)?;
            for point in grid_points(&grids)? {
                let mut cfg = resolve(&text, &common, &point)?;
                let tag: Vec<String> = point.iter().map(|p| p.replace(['=', '.'], "_")).collect();
                cfg.name = format!("{}-{}", cfg.name, tag.join("-"));
                let out = common.out.join(&cfg.name);
                execute(&cfg, &common, &out)?;
            }
            Ok(())
        }
        Command::Bench {
            grid,
            rounds,
            warmup,
            out,
            seed,
        } => {
            let grid = match grid {
                Some(g) => parse_space_grid(&g)?,
                None => TABLE_GRID.to_vec(),
            };
            let settings = BenchSettings {
                rounds,
                warmup,
                seed: seed.unwrap_or(1),
                ..BenchSettings::default()
            };
            bench(&grid, &settings, out.as_deref())
        }
        Command::Verify { seed } => {
            let checks = verify_suite(seed);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Failure::Verify)
            }
        }
        Command::Preset {
            name,
            emit_only,
            common,
        } => match presets::preset(&name).expect("validated by clap") {
            Preset::Bench(grid) => {
                let settings = BenchSettings {
                    seed: common.seed.unwrap_or(1),
                    ..BenchSettings::default()
                };
                bench(&grid, &settings, Some(&common.out))
            }
            Preset::Experiments(cfgs) => {
                for base in cfgs {
                    let cfg = resolve(&base.to_toml()?, &common, &[])?;
                    let out = common.out.join(&cfg.name);
                    if emit_only {
                        fs::create_dir_all(&out).map_err(|e| Failure::Config(format!("{}: {e}", out.display())))?;
                        let path = out.join("config.toml");
                        fs::write(&path, cfg.to_toml()?)
                            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                        println!("wrote {}", path.display());
                    } else {
                        execute(&cfg, &common, &out)?;
                    }
                }
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Verify) => ExitCode::from(EXIT_VERIFY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_accepts_scientific_notation() {
        assert_eq!(parse_horizon("1e5"), Ok(100_000));
        assert_eq!(parse_horizon("8e6"), Ok(8_000_000));
        assert_eq!(parse_horizon("2500"), Ok(2500));
        assert!(parse_horizon("1.5").is_err());
        assert!(parse_horizon("abc").is_err());
        assert!(parse_horizon("0").is_ok());
    }

    #[test]
    fn grid_is_cartesian() {
        let pts = grid_points(&["environment.n=8,16".into(), "k_r=2,4".into()]).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1], vec!["environment.n=8".to_string(), "k_r=4".to_string()]);
    }

    #[test]
    fn space_grid_parses() {
        assert!(matches!(parse_space_grid("12:4, 24:4"), Ok(g) if g == vec![(12, 4), (24, 4)]));
        assert!(parse_space_grid("12-4").is_err());
    }
}
