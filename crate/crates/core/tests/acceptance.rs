//! Acceptance checks. One PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use klbandit::experiments::{bayes_regret_fast_family, regime_sweep, write_sweep_csv, Grid};
use klbandit::objective::{geometric_mean_policy, kl_divergence, optimal_policy, subopt_gap};
use klbandit::oracle::{
    brute_force_min_sum_kl, dirichlet_policy, gaussian_kl, random_separation_case,
};
use klbandit::rng::{derive_seeds, stream_rng};
use klbandit::simulator::{harmonic_bound, run, run_batch};
use klbandit::{
    AgentKind, BanditInstance, Error, ExperimentConfig, InstanceSource, NoiseModel, RunConfig,
};
use rand::Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn unit_instance<R: Rng>(k: usize, eta: f64, rng: &mut R) -> BanditInstance {
    let means = (0..k).map(|_| rng.random::<f64>()).collect();
    BanditInstance::with_uniform_reference(means, eta, 1).unwrap()
}

fn log_eta<R: Rng>(rng: &mut R) -> f64 {
    10f64.powf(rng.random_range(-2.0..=2.0))
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn gap_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(101, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=32);
        let eta = log_eta(&mut rng);
        let inst = unit_instance(k, eta, &mut rng);
        let pi = dirichlet_policy(k, 1.0, &mut rng);
        let gap = subopt_gap(&inst, &pi).unwrap();
        let kl = kl_divergence(&pi, &optimal_policy(&inst)).unwrap();
        worst = worst.max((gap - kl / eta).abs());
    }
    let t = start.elapsed();
    Outcome {
        ok: worst <= 1e-9 && within(t, 5),
        detail: format!("1000 cases, max |gap - KL/eta| = {worst:.3e} (tol 1e-9), {t:.2?}"),
    }
}

fn trivial_gap_bound() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(102, 0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let k = rng.random_range(2..=32);
        let eta = log_eta(&mut rng);
        let inst = unit_instance(k, eta, &mut rng);
        let other = unit_instance(k, eta, &mut rng);
        worst = worst.max(subopt_gap(&inst, &optimal_policy(&other)).unwrap());
    }
    let t = start.elapsed();
    Outcome {
        ok: worst <= 1.0 + 1e-12 && within(t, 5),
        detail: format!("1000 pairs, max gap = {worst:.6} (limit 1 + 1e-12), {t:.2?}"),
    }
}

fn optimistic_decomposition() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(103, 0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let k = rng.random_range(2..=32);
        let eta = log_eta(&mut rng);
        let inst = unit_instance(k, eta, &mut rng);
        let fhat: Vec<f64> = inst
            .means()
            .iter()
            .map(|r| r + rng.random_range(-1.0f64..1.0).abs())
            .collect();
        let hat = optimal_policy(&inst.with_means(fhat.clone()).unwrap());
        let sq: Vec<f64> = fhat
            .iter()
            .zip(inst.means())
            .map(|(f, r)| (f - r).powi(2))
            .collect();
        let excess = subopt_gap(&inst, &hat).unwrap() - eta * hat.expect(&sq);
        worst = worst.max(excess);
    }
    let t = start.elapsed();
    Outcome {
        ok: worst <= 1e-12 && within(t, 5),
        detail: format!("1000 cases, max gap - bound = {worst:.3e} (tol 1e-12), {t:.2?}"),
    }
}

fn harmonic_ledger() -> Outcome {
    let start = Instant::now();
    let plan: [(u64, usize, usize); 3] = [(2, 3, 100), (1000, 5, 90), (100_000, 5, 12)];
    let mut runs = 0;
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for (i, &(horizon, k, n)) in plan.iter().enumerate() {
        let mut rng = stream_rng(104, i as u64);
        for seed in derive_seeds(104 + i as u64, n) {
            let inst = unit_instance(k, log_eta(&mut rng), &mut rng)
                .with_eta_horizon(log_eta(&mut rng), horizon)
                .unwrap();
            let kind = AgentKind::ALL[runs % AgentKind::ALL.len()];
            runs += 1;
            match run(
                &inst,
                kind,
                &RunConfig::new(seed, 0.1).unwrap(),
                NoiseModel::UnitGaussian,
            ) {
                Ok(rec) => {
                    let bound = harmonic_bound(k, horizon);
                    tightest = tightest.max(rec.harmonic_sum / bound);
                    if rec.harmonic_sum > bound {
                        violations += 1;
                    }
                }
                Err(Error::Invariant(_)) => violations += 1,
                Err(e) => panic!("run failed: {e}"),
            }
        }
    }
    Outcome {
        ok: violations == 0 && runs >= 200,
        detail: format!(
            "{runs} runs at T in {{2, 1e3, 1e5}}, {violations} violations, max sum/bound = {tightest:.3}, {:.2?}",
            start.elapsed()
        ),
    }
}

fn optimism_frequency() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(105, 0);
    let inst = unit_instance(5, 1.0, &mut rng)
        .with_eta_horizon(1.0, 1000)
        .unwrap();
    let seeds = derive_seeds(105, 500);
    let batch = run_batch(
        &inst,
        AgentKind::KlUcb,
        &RunConfig::new(0, 0.1).unwrap(),
        NoiseModel::UnitGaussian,
        &seeds,
    )
    .unwrap();
    let t = start.elapsed();
    Outcome {
        ok: batch.optimism_failure_rate <= 0.1 && within(t, 120),
        detail: format!(
            "500 runs, failure rate = {:.3} (limit 0.1), {t:.2?}",
            batch.optimism_failure_rate
        ),
    }
}

fn geometric_mean_minimizer() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(106, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = dirichlet_policy(3, 2.0, &mut rng);
        let q = dirichlet_policy(3, 2.0, &mut rng);
        let hat = geometric_mean_policy(&p, &q).unwrap();
        let closed = kl_divergence(&hat, &p).unwrap() + kl_divergence(&hat, &q).unwrap();
        let (_, brute) = brute_force_min_sum_kl(&p, &q, 0.01).unwrap();
        worst = worst.max((brute - closed).abs());
    }
    let t = start.elapsed();
    Outcome {
        ok: worst <= 1e-4 && within(t, 60),
        detail: format!("20 pairs, max |brute - closed| = {worst:.3e} (tol 1e-4), {t:.2?}"),
    }
}

fn separation() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(107, 0);
    let mut held = 0;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..100 {
        let (lhs, rhs, ok) = random_separation_case(&mut rng).unwrap();
        held += ok as usize;
        if rhs > 0.0 {
            min_ratio = min_ratio.min(lhs / rhs);
        }
    }
    let t = start.elapsed();
    Outcome {
        ok: held == 100 && within(t, 30),
        detail: format!("{held}/100 cases hold, min lhs/rhs (m > 0) = {min_ratio:.3}, {t:.2?}"),
    }
}

fn gaussian_kl_closed_form() -> Outcome {
    let mut rng = stream_rng(108, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(-2.0..2.0);
        let delta = rng.random_range(0.0..1.0);
        worst = worst.max((gaussian_kl(m, m + 2.0 * delta) - 2.0 * delta * delta).abs());
    }
    Outcome {
        ok: worst <= 1e-15,
        detail: format!("100 cases, max |KL - 2 delta^2| = {worst:.3e} (tol 1e-15)"),
    }
}

fn sweep_config(
    eta: Vec<f64>,
    arms: Vec<usize>,
    horizon: Vec<u64>,
    seeds: usize,
    source: InstanceSource,
) -> ExperimentConfig {
    ExperimentConfig {
        grid: Grid { eta, arms, horizon },
        agents: vec![AgentKind::KlUcb],
        seeds_per_cell: seeds,
        noise: NoiseModel::UnitGaussian,
        confidence_delta: 0.1,
        instance_source: source,
        instance_path: None,
        master_seed: 2024,
        output_path: None,
    }
}

fn regime_transition() -> Outcome {
    let start = Instant::now();
    let cfg = sweep_config(
        vec![1.0, 1e6],
        vec![8],
        vec![1 << 12, 1 << 14],
        50,
        InstanceSource::SlowFamily,
    );
    let rows = regime_sweep(&cfg).unwrap();
    let regret = |eta: f64, t: u64| {
        rows.iter()
            .find(|r| r.eta == eta && r.horizon == t)
            .map(|r| r.mean_regret)
            .unwrap()
    };
    let high = regret(1.0, 1 << 14) / regret(1.0, 1 << 12);
    let low = regret(1e6, 1 << 14) / regret(1e6, 1 << 12);
    let t = start.elapsed();
    Outcome {
        ok: high <= 2.0 && low >= 1.5 && low >= 1.25 * high && within(t, 900),
        detail: format!(
            "ratio(eta=1) = {high:.3} (<= 2), ratio(eta=1e6) = {low:.3} (>= 1.5, >= {:.3}), {t:.2?}",
            1.25 * high
        ),
    }
}

fn lower_bound_shape() -> Outcome {
    let start = Instant::now();
    let regrets: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&k| {
            bayes_regret_fast_family(k, 1.0, 1 << 14, 100, 1, 2024, 0.1)
                .unwrap()
                .0
        })
        .collect();
    let factors: Vec<f64> = regrets.windows(2).map(|w| w[1] / w[0]).collect();
    let t = start.elapsed();
    Outcome {
        ok: factors.iter().all(|f| (1.3..=3.5).contains(f)) && within(t, 1200),
        detail: format!(
            "Bayes regret K=4,8,16: {:.1}, {:.1}, {:.1}; factors {:.3}, {:.3} (in [1.3, 3.5]), {t:.2?}",
            regrets[0], regrets[1], regrets[2], factors[0], factors[1]
        ),
    }
}

fn sweep_csv(cfg: &ExperimentConfig, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| {
        let rows = regime_sweep(cfg).unwrap();
        let mut out = Vec::new();
        write_sweep_csv(&rows, &mut out).unwrap();
        out
    })
}

fn determinism() -> Outcome {
    let mut cfg = sweep_config(
        vec![0.5, 4.0],
        vec![3, 6],
        vec![300, 900],
        8,
        InstanceSource::Random,
    );
    cfg.agents = AgentKind::ALL.to_vec();
    let n = std::thread::available_parallelism()
        .map_or(4, |n| n.get())
        .max(2);
    let first = sweep_csv(&cfg, n);
    let second = sweep_csv(&cfg, n);
    let single = sweep_csv(&cfg, 1);
    Outcome {
        ok: first == second && first == single && !first.is_empty(),
        detail: format!(
            "{} bytes; repeat identical: {}, 1 vs {n} threads identical: {}",
            first.len(),
            first == second,
            first == single
        ),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("gap equals KL over eta", gap_identity),
        (
            "gap of a mismatched Gibbs policy at most 1",
            trivial_gap_bound,
        ),
        (
            "optimistic one-step decomposition",
            optimistic_decomposition,
        ),
        ("harmonic sum at most 4K log T", harmonic_ledger),
        ("optimism event frequency", optimism_frequency),
        (
            "geometric mean minimizes summed KL",
            geometric_mean_minimizer,
        ),
        ("fast-family separation", separation),
        ("Gaussian KL closed form", gaussian_kl_closed_form),
        ("regime transition growth ratios", regime_transition),
        ("fast-family Bayes regret grows with K", lower_bound_shape),
        ("sweep CSV determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let out = check();
        if !out.ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if out.ok { "PASS" } else { "FAIL" },
            i + 1,
            out.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
