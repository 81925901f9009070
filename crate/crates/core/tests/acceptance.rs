//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero when an outcome differs from [`KNOWN_FAILURES`].

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};

use semibandit::environment::{Environment, EnvironmentSpec};
use semibandit::harness::bench::{dp_cost_model, timing_bench, BenchSettings, TABLE_GRID};
use semibandit::harness::envelope::{check_envelope, order_slope, BoundEnvelope};
use semibandit::harness::persist::{MANIFEST_FILE, RESULTS_FILE, TRACES_FILE};
use semibandit::harness::{persist_results, run_experiment, BatchSpec, ExperimentConfig, ExperimentResult, PolicySpec};
use semibandit::policy::{marginal_probability, mixture_distribution, AufhPolicy, Backend, Policy, PolicyState, StrategyTable};
use semibandit::sampler::{marginals, DpTables};
use semibandit::schedule::{Exploration, LearningRate, Schedule};
use semibandit::types::{CoveringSet, Strategy, StrategySpace};
use semibandit::SimRng;

/// Criteria expected to fail, with the reason.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    6,
    "part (b) only: with eta = beta_t the best channel's log-weight lead grows like \
     0.5 * delta * sqrt(t ln n / n), so stochastic regret settles near 8 n / (delta * ln n) \
     (about 154 here) while CombUCB1 stays in single digits; see README",
)];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn emp() -> PolicySpec {
    PolicySpec::aufh(Schedule::new(LearningRate::Emp, Exploration::Experimental))
}

fn experiment(name: &str, k_r: usize, horizon: u64, environment: EnvironmentSpec, policies: Vec<PolicySpec>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        k_r,
        horizon,
        repetitions: 10,
        checkpoints_per_decade: 10,
        master_seed: 2024,
        enumeration_cap: 1_000_000,
        packet_rate_summary: false,
        environment,
        policies,
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|f| m >> f & 1 == 1).collect())
        .collect()
}

fn random_space(rng: &mut SimRng) -> (usize, usize) {
    let n = rng.random_range(2..=10);
    (n, rng.random_range(1..=n.min(4)))
}

/// Natural-log weights with decimal exponents uniform on [-5, 5].
fn random_log_weights(rng: &mut SimRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-5.0..5.0) * 10f64.ln()).collect()
}

fn random_state(rng: &mut SimRng, n: usize) -> PolicyState {
    let mut state = PolicyState::new(n);
    state.log_weights = random_log_weights(rng, n);
    state.round = rng.random_range(0..200);
    state.gap_estimates = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    state
}

fn schedule() -> Schedule {
    Schedule::new(LearningRate::Emp, Exploration::Experimental)
}

fn dp_exactness() -> Verdict {
    let mut rng = SimRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (n, k) = random_space(&mut rng);
        let space = StrategySpace::new(n, k).unwrap();
        let lw = random_log_weights(&mut rng, n);
        let tables = DpTables::build(&lw, k).unwrap();
        let all = subsets(n, k);
        let logs: Vec<f64> = all.iter().map(|s| s.iter().map(|&f| lw[f]).sum()).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        for (s, l) in all.into_iter().zip(&logs) {
            let want = (l - top).exp() / z;
            let got = tables.path_probability(&lw, &Strategy::new(s, &space).unwrap());
            worst = worst.max((got - want).abs());
        }
    }
    verdict(worst <= 1e-10, format!("max |path - w/W| = {worst:.2e} over 200 instances"))
}

fn marginal_cross_check() -> Verdict {
    let mut rng = SimRng::seed_from_u64(2);
    let (mut worst, mut padded, mut explored) = (0.0f64, 0, 0);
    for _ in 0..200 {
        let (n, k) = random_space(&mut rng);
        let space = StrategySpace::new(n, k).unwrap();
        let state = random_state(&mut rng, n);
        let cover = CoveringSet::new(&space);
        let table = StrategyTable::new(&space, &cover, 1_000_000).unwrap();
        let eps = state.epsilons(&schedule());
        padded += usize::from(n % k != 0);
        explored += usize::from(eps.iter().sum::<f64>() > 0.0);
        let tables = DpTables::build(&state.log_weights, k).unwrap();
        let q = marginals(&tables, &state.log_weights, &eps, &cover);
        for (f, qf) in q.iter().enumerate() {
            worst = worst.max((qf - marginal_probability(&state, &schedule(), &table, &cover, f)).abs());
        }
    }
    verdict(
        worst <= 1e-9 && padded > 0 && explored > 0,
        format!("max diff {worst:.2e}; {padded} padded covers, {explored} with exploration"),
    )
}

fn simplex_invariants() -> Verdict {
    let mut rng = SimRng::seed_from_u64(3);
    let (mut dp, mut sp, mut sq, mut floor) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    for _ in 0..10_000 {
        let (n, k) = random_space(&mut rng);
        let space = StrategySpace::new(n, k).unwrap();
        let state = random_state(&mut rng, n);
        let cover = CoveringSet::new(&space);
        let table = StrategyTable::new(&space, &cover, 1_000_000).unwrap();
        let eps = state.epsilons(&schedule());
        let p = mixture_distribution(&state.log_weights, &eps, &table, &cover);
        sp = sp.max((p.iter().sum::<f64>() - 1.0).abs());
        let mut q = vec![0.0; n];
        for (i, pi) in p.iter().enumerate() {
            for &f in table.members(i) {
                q[f] += pi;
            }
        }
        sq = sq.max((q.iter().sum::<f64>() - k as f64).abs());
        let tables = DpTables::build(&state.log_weights, k).unwrap();
        let qd = marginals(&tables, &state.log_weights, &eps, &cover);
        dp = dp.max((qd.iter().sum::<f64>() - k as f64).abs());
        for (b, block) in cover.blocks().iter().enumerate() {
            let owned: f64 = (0..n).filter(|&f| cover.owner(f) == b).map(|f| eps[f]).sum();
            let i = (0..table.len()).find(|&i| table.members(i) == block.members()).unwrap();
            floor += usize::from(p[i] < owned);
        }
    }
    verdict(
        sp <= 1e-9 && sq <= 1e-9 && dp <= 1e-9 && floor == 0,
        format!("|sum p - 1| <= {sp:.1e}, |sum q - k| <= {sq:.1e} (dp {dp:.1e}), {floor} floor violations"),
    )
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reduced fraction arithmetic for the identity q * (l / q) = l.
fn unbiasedness() -> Verdict {
    let reduce = |(a, b): (u128, u128)| {
        let g = gcd(a, b).max(1);
        (a / g, b / g)
    };
    let mut symbolic = true;
    for (a, b) in [(0u128, 1u128), (3, 10), (1, 1), (7, 9)] {
        for (c, d) in [(1u128, 2u128), (1, 10_000), (3, 7), (1, 1)] {
            let est = reduce((a * d, b * c));
            let back = reduce((c * est.0, d * est.1));
            symbolic &= back == reduce((a, b));
        }
    }

    let rounds = 100_000u64;
    let space = StrategySpace::new(8, 4).unwrap();
    let env = Environment::new(&EnvironmentSpec::stochastic(8, 0.2, 77)).unwrap();
    let mu = env.expected_losses(1).unwrap();
    let mut policy = AufhPolicy::new(space, schedule(), Backend::Dp, 1_000_000).unwrap();
    let mut rng = SimRng::seed_from_u64(78);
    let (mut sum, mut sq) = ([0.0f64; 8], [0.0f64; 8]);
    for t in 1..=rounds {
        let chosen = policy.select(&mut rng).unwrap();
        let q = policy.last_marginals().to_vec();
        let round = env.stochastic_step(t);
        for &f in chosen.members() {
            let e = round.realized[f] / q[f];
            sum[f] += e;
            sq[f] += e * e;
        }
        policy.observe(&chosen, &round.observed(&chosen)).unwrap();
    }
    let r = rounds as f64;
    let worst = (0..8)
        .map(|f| {
            let m = sum[f] / r;
            let se = ((sq[f] / r - m * m).max(0.0) / r).sqrt();
            (m - mu[f]).abs() / se
        })
        .fold(0.0f64, f64::max);
    verdict(
        symbolic && worst <= 3.0,
        format!("symbolic identity {}; empirical max deviation {worst:.2} sigma", if symbolic { "exact" } else { "broken" }),
    )
}

fn adversarial_envelope() -> Verdict {
    let cfg = experiment("oblivious-n8-k4", 4, 100_000, EnvironmentSpec::oblivious(8, 11), vec![emp()]);
    let res = run_experiment(&cfg).unwrap();
    let stats = &res.policy("aufh_emp").unwrap().primary;
    let bound = |t: u64| 4.0 * 4.0 * (t as f64 * 8.0 * 8f64.ln()).sqrt();
    let own = stats.checkpoints.iter().zip(&stats.mean).all(|(&t, &m)| m <= bound(t));
    let report = check_envelope(
        stats,
        &BoundEnvelope::Adversarial { n: 8, k_r: 4 },
        semibandit::environment::Regime::AdversarialOblivious,
    )
    .unwrap();
    let at = (bound(10_000) - 6526.0).abs() < 1.0;
    let worst = stats
        .checkpoints
        .iter()
        .zip(&stats.mean)
        .map(|(&t, &m)| m / bound(t).max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        own && report.passed && at,
        format!("final regret {:.1}, largest regret/bound {worst:.3}", stats.last_mean()),
    )
}

fn stochastic_behavior() -> Verdict {
    let cfg = experiment(
        "stochastic-n8-k4",
        4,
        1_000_000,
        EnvironmentSpec::stochastic(8, 0.2, 12),
        vec![emp(), PolicySpec::CombUcb1, PolicySpec::Exp3],
    );
    let res = run_experiment(&cfg).unwrap();
    let emp = &res.policy("aufh_emp").unwrap().primary;
    let ucb = res.policy("combucb1").unwrap().primary.last_mean();
    let exp3 = res.policy("anti_jam_exp3").unwrap().primary.last_mean();
    let ratio = emp.mean_at(1_000_000).unwrap() / emp.mean_at(100_000).unwrap();
    let final_emp = emp.last_mean();
    let (a, b, c) = (ratio < 4.0, final_emp <= 3.0 * ucb, final_emp < exp3);
    let tag = |ok: bool| if ok { "ok" } else { "FAILED" };
    verdict(
        a && b && c,
        format!(
            "(a) R(1e6)/R(1e5) = {ratio:.2} {}; (b) EMP {final_emp:.1} vs 3 x CombUCB1 {:.1} {}; (c) EMP vs EXP3 {exp3:.1} {}",
            tag(a),
            3.0 * ucb,
            tag(b),
            tag(c)
        ),
    )
}

fn contaminated_recovery() -> Verdict {
    let cfg = experiment(
        "contaminated-n8-k2",
        2,
        1_000_000,
        EnvironmentSpec::contaminated_switch(8, 0.2, 2_500, 13),
        vec![emp()],
    );
    let res = run_experiment(&cfg).unwrap();
    let stats = &res.policy("aufh_emp").unwrap().primary;
    let (cps, mean): (Vec<u64>, Vec<f64>) = stats
        .checkpoints
        .iter()
        .zip(&stats.mean)
        .filter(|(&t, _)| t >= 100_000)
        .map(|(&t, &m)| (t, m))
        .unzip();
    let slope = order_slope(&cps, &mean, |t| (t as f64).ln().powi(3)).unwrap();
    let decade = stats.mean_at(1_000_000).unwrap() / stats.mean_at(100_000).unwrap();
    verdict(
        slope <= 0.05,
        format!("relative slope of R/ln^3 t over final decade {slope:.4}; R(1e6)/R(1e5) = {decade:.3}"),
    )
}

fn mixed_decomposition() -> Verdict {
    let seed = 14;
    let policies = vec![emp(), PolicySpec::CombUcb1];
    let mut a = experiment("m", 2, 20_000, EnvironmentSpec::stochastic(8, 0.2, seed), policies.clone());
    let mut b = experiment("m", 2, 20_000, EnvironmentSpec::mixed(8, 0.2, 0, seed), policies);
    a.repetitions = 3;
    b.repetitions = 3;
    let render = |r: &ExperimentResult| {
        r.policies
            .iter()
            .map(|p| {
                let runs = p.outcome.as_ref().unwrap();
                format!(
                    "{:?}",
                    runs.traces
                        .iter()
                        .map(|t| (&t.checkpoints, &t.pseudo_regret, &t.hindsight_regret, &t.realized_loss))
                        .collect::<Vec<_>>()
                )
            })
            .collect::<Vec<_>>()
    };
    let identical = render(&run_experiment(&a).unwrap()) == render(&run_experiment(&b).unwrap());

    let mut env = Environment::new(&EnvironmentSpec::mixed(8, 0.2, 2, seed)).unwrap();
    let jammed = env.adversarial_channels();
    let space = StrategySpace::new(8, 2).unwrap();
    let rounds = 100_000u64;
    let mut sums = [0.0f64; 8];
    let mut mu = Vec::new();
    for t in 1..=rounds {
        let chosen = Strategy::new(vec![(t % 8) as usize, ((t + 3) % 8) as usize], &space).unwrap();
        let losses = env.step(t, &chosen);
        mu = losses.expected.clone().unwrap();
        for (s, l) in sums.iter_mut().zip(&losses.realized) {
            *s += l;
        }
    }
    let r = rounds as f64;
    let worst = (0..8)
        .filter(|f| !jammed.contains(f))
        .map(|f| (sums[f] / r - mu[f]).abs() / (mu[f] * (1.0 - mu[f]) / r).sqrt())
        .fold(0.0f64, f64::max);
    verdict(
        identical && jammed.len() == 2 && worst <= 3.0,
        format!(
            "jammed=0 traces {}; jammed=2 stochastic channels max deviation {worst:.2} sigma",
            if identical { "bit-identical" } else { "DIFFER" }
        ),
    )
}

fn timing() -> Verdict {
    let settings = BenchSettings {
        warmup: 100,
        rounds: 1000,
        ..BenchSettings::default()
    };
    let rows = timing_bench(&TABLE_GRID, &settings).unwrap();
    let time = |n: usize, k: usize, backend: Backend| {
        rows.iter()
            .find(|r| r.n == n && r.k_r == k && r.backend == backend)
            .and_then(|r| r.median_us)
    };
    let speedup = time(24, 4, Backend::Reference).unwrap() / time(24, 4, Backend::Dp).unwrap();
    let big = match time(64, 12, Backend::Reference) {
        None => true,
        Some(us) => us / time(64, 12, Backend::Dp).unwrap() > 100.0,
    };
    let (_, _, r2) = dp_cost_model(&rows);
    verdict(
        speedup >= 10.0 && big && r2 > 0.9,
        format!(
            "(24,4) speedup {speedup:.1}x; (64,12) reference {}; dp fit R^2 = {r2:.3}",
            if time(64, 12, Backend::Reference).is_none() { "infeasible" } else { "timed" }
        ),
    )
}

fn adaptive_degradation() -> Verdict {
    let adaptive = experiment(
        "adaptive-n8-k2",
        2,
        100_000,
        EnvironmentSpec::adaptive(8, 0.2, 80, 2, 15),
        vec![emp(), emp().with_minibatch(BatchSpec::Horizon)],
    );
    let oblivious = experiment("oblivious-n8-k2", 2, 100_000, EnvironmentSpec::oblivious(8, 15), vec![emp()]);
    let ra = run_experiment(&adaptive).unwrap();
    let ro = run_experiment(&oblivious).unwrap();
    let a = ra.policy("aufh_emp").unwrap().primary.last_mean();
    let o = ro.policy("aufh_emp").unwrap().primary.last_mean();
    let mb = ra.policy("aufh_emp_minibatch").unwrap().primary.last_mean();
    let dir = tempfile::tempdir().unwrap();
    persist_results(&ra, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    let recorded = csv.lines().any(|l| l.contains(",aufh_emp_minibatch,") && l.contains(",100000,"));
    verdict(
        a > o && mb.is_finite() && recorded,
        format!("adaptive {a:.1} vs oblivious {o:.1}; mini-batched {mb:.1} recorded"),
    )
}

fn determinism() -> Verdict {
    let envs = [
        EnvironmentSpec::stochastic(6, 0.2, 16),
        EnvironmentSpec::oblivious(6, 16),
        EnvironmentSpec::adaptive(6, 0.2, 10, 2, 16),
        EnvironmentSpec::mixed(6, 0.2, 2, 16),
        EnvironmentSpec::contaminated_switch(6, 0.2, 300, 16),
        EnvironmentSpec::contaminated_formal(6, 0.2, 0.2, 100, 16),
    ];
    let mut failures = Vec::new();
    for env in envs {
        let mut cfg = experiment(
            env.regime.as_str(),
            2,
            3000,
            env,
            vec![
                emp(),
                emp().with_minibatch(BatchSpec::Doubling),
                PolicySpec::CombUcb1,
                PolicySpec::Thompson,
                PolicySpec::Exp3,
            ],
        );
        cfg.repetitions = 3;
        cfg.packet_rate_summary = true;
        let first = tempfile::tempdir().unwrap();
        let second = tempfile::tempdir().unwrap();
        persist_results(&run_experiment(&cfg).unwrap(), first.path()).unwrap();
        let manifest = fs::read_to_string(first.path().join(MANIFEST_FILE)).unwrap();
        let again = ExperimentConfig::from_toml(&manifest, &[]).unwrap();
        persist_results(&run_experiment(&again).unwrap(), second.path()).unwrap();
        for f in [RESULTS_FILE, TRACES_FILE, "packet_rate.csv"] {
            if fs::read(first.path().join(f)).unwrap() != fs::read(second.path().join(f)).unwrap() {
                failures.push(format!("{}:{f}", cfg.name));
            }
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "6 regimes re-run from manifest, CSVs byte-identical".to_string()
        } else {
            format!("differences in {}", failures.join(", "))
        },
    )
}

fn main() {
    // `cargo test` forwards harness flags such as --quiet; only a name filter
    // is honoured here.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    type Check = fn() -> Verdict;
    let criteria: [(u32, &str, Check); 11] = [
        (1, "dp sampler exactness", dp_exactness),
        (2, "marginal cross-check", marginal_cross_check),
        (3, "simplex and floor invariants", simplex_invariants),
        (4, "estimator unbiasedness", unbiasedness),
        (5, "adversarial envelope", adversarial_envelope),
        (6, "stochastic regime behaviour", stochastic_behavior),
        (7, "contaminated recovery", contaminated_recovery),
        (8, "mixed regime decomposition", mixed_decomposition),
        (9, "timing", timing),
        (10, "adaptive adversary degradation", adaptive_degradation),
        (11, "determinism", determinism),
    ];
    let mut surprises = 0;
    for (id, name, check) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f) && f != id.to_string()) {
            continue;
        }
        let started = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| verdict(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        let known = KNOWN_FAILURES.iter().find(|k| k.0 == id);
        let note = match (v.passed, known) {
            (false, Some((_, why))) => format!(" [known: {why}]"),
            (true, Some(_)) => {
                surprises += 1;
                " [listed as a known failure but passed]".to_string()
            }
            (false, None) => {
                surprises += 1;
                String::new()
            }
            (true, None) => String::new(),
        };
        println!(
            "{} criterion {id:>2} {name}: {} ({:.1}s){note}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if surprises > 0 {
        eprintln!("{surprises} criteria did not match their expected outcome");
        std::process::exit(1);
    }
}
