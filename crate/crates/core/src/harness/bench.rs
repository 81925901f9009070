//! Per-round cost of the two policy backends over a grid of spaces.

use std::time::Instant;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::policy::{AufhPolicy, Backend, Policy, SimRng};
use crate::schedule::Schedule;
use crate::types::StrategySpace;

/// Grid timed by the `table1` preset.
pub const TABLE_GRID: [(usize, usize); 6] = [(12, 4), (24, 4), (48, 6), (48, 12), (64, 6), (64, 12)];

#[derive(Debug, Clone, Copy)]
pub struct BenchSettings {
    pub warmup: usize,
    pub rounds: usize,
    pub enumeration_cap: u64,
    pub seed: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            warmup: 100,
            rounds: 1000,
            enumeration_cap: crate::types::DEFAULT_ENUMERATION_CAP,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub n: usize,
    pub k_r: usize,
    pub backend: Backend,
    /// Median microseconds per round; `None` when the backend cannot run.
    pub median_us: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = xs.len() / 2;
    if xs.len().is_multiple_of(2) {
        0.5 * (xs[m - 1] + xs[m])
    } else {
        xs[m]
    }
}

/// Median select+observe time of one backend against Bernoulli(1/2) losses.
pub fn time_backend(space: StrategySpace, backend: Backend, settings: &BenchSettings) -> Result<Option<f64>> {
    let mut policy = match AufhPolicy::new(space, Schedule::emp(), backend, settings.enumeration_cap) {
        Ok(p) => p,
        Err(Error::NotEnumerable) | Err(Error::SpaceTooLarge { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut rng = SimRng::seed_from_u64(settings.seed);
    let mut losses = vec![0.0; space.k_r()];
    let mut samples = Vec::with_capacity(settings.rounds);
    for round in 0..settings.warmup + settings.rounds {
        for l in losses.iter_mut() {
            *l = if rng.random::<bool>() { 1.0 } else { 0.0 };
        }
        let started = Instant::now();
        let chosen = policy.select(&mut rng)?;
        policy.observe(&chosen, &losses)?;
        let elapsed = started.elapsed().as_secs_f64() * 1e6;
        if round >= settings.warmup {
            samples.push(elapsed);
        }
    }
    Ok(Some(median(samples)))
}

/// Times both backends serially on each grid point.
pub fn timing_bench(grid: &[(usize, usize)], settings: &BenchSettings) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::with_capacity(2 * grid.len());
    for &(n, k_r) in grid {
        let space = StrategySpace::new(n, k_r)?;
        for backend in [Backend::Reference, Backend::Dp] {
            rows.push(TimingRow {
                n,
                k_r,
                backend,
                median_us: time_backend(space, backend, settings)?,
            });
        }
    }
    Ok(rows)
}

/// Least-squares `y = a + b x` with its coefficient of determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (a, b, r2)
}

/// Fit of DP time against `n k_r` over the rows that ran.
pub fn dp_cost_model(rows: &[TimingRow]) -> (f64, f64, f64) {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.backend == Backend::Dp)
        .filter_map(|r| r.median_us.map(|us| ((r.n * r.k_r) as f64, us)))
        .unzip();
    linear_fit(&xs, &ys)
}

pub fn timings_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from("n,k_r,backend,median_us\n");
    for r in rows {
        let backend = match r.backend {
            Backend::Reference => "reference",
            Backend::Dp => "dp",
        };
        let value = r.median_us.map_or("infeasible".to_string(), |us| format!("{us}"));
        out.push_str(&format!("{},{},{},{}\n", r.n, r.k_r, backend, value));
    }
    out
}
