//! `klbandit`: single runs, regret sweeps, instance generation, oracle
//! verification and scaling fits.
//!
//! Exit codes: 0 on success, 1 when a check or a sweep cell fails (or on I/O
//! errors), 2 on usage errors, including arguments the library rejects.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use klbandit::experiments::{
    cell_instance, fit_sweep, read_sweep_csv, regime_sweep, write_sweep_csv, Grid,
};
use klbandit::instances::{
    fast_family_range, fast_family_sample, random_instance, slow_hard_family,
};
use klbandit::model::{instances_from_toml, instances_to_toml, DEFAULT_CONFIDENCE_DELTA};
use klbandit::oracle::verify_suite;
use klbandit::plot::regret_curves_svg;
use klbandit::rng::{derive_seed, derive_seeds, INSTANCE_STREAM};
use klbandit::simulator::{run, run_batch};
use klbandit::{
    validate_instance, AgentKind, BanditInstance, Error, ExperimentConfig, FastFamilySample,
    InstanceSource, NoiseModel, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "klbandit",
    version,
    about = "KL-regularized bandit experiments"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One seeded run; writes a per-step CSV (or a per-seed CSV with --seeds).
    Run(RunArgs),
    /// Grid sweep; writes one summary row per cell.
    Sweep(SweepArgs),
    /// Emit a generated instance family as TOML.
    Instances(InstancesArgs),
    /// Run the closed-form verification checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit log²T and √T regret models to a sweep CSV.
    Fit {
        /// Summary CSV written by `sweep`.
        input: PathBuf,
    },
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct RunArgs {
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 5)]
    arms: usize,
    #[arg(long, default_value_t = 1000)]
    horizon: u64,
    #[arg(long, default_value = "kl_ucb")]
    agent: AgentKind,
    /// Seed of the run; also keys random and fast-family instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run this many derived seeds and write per-seed final regret instead.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_DELTA)]
    delta: f64,
    #[arg(long)]
    noise: Option<NoiseModel>,
    #[arg(long, default_value = "random")]
    family: InstanceSource,
    /// Instance TOML, required with `--family file`. Its eta and horizon
    /// take precedence over the flags.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Which entry of a multi-instance file to use.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the regret curve as SVG.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    /// Sweep config TOML; grid flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    eta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "5")]
    arms: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    horizon: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "kl_ucb")]
    agent: Vec<AgentKind>,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_DELTA)]
    delta: f64,
    #[arg(long)]
    noise: Option<NoiseModel>,
    #[arg(long, default_value = "random")]
    family: InstanceSource,
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct InstancesArgs {
    #[arg(long, default_value = "slow_family")]
    family: InstanceSource,
    #[arg(long, default_value_t = 9)]
    arms: usize,
    #[arg(long, default_value_t = 4096)]
    horizon: u64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Marks errors that should exit with the usage code.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// The fast family is only defined under unit Gaussian noise.
fn resolve_noise(family: InstanceSource, noise: Option<NoiseModel>) -> anyhow::Result<NoiseModel> {
    match (family, noise) {
        (InstanceSource::FastFamily, Some(n)) if n != FastFamilySample::NOISE => Err(usage(
            format!("the fast family uses unit_gaussian noise; --noise {n} is not allowed"),
        )),
        (_, n) => Ok(n.unwrap_or(NoiseModel::UnitGaussian)),
    }
}

fn read_instance(path: &Path, index: usize) -> anyhow::Result<BanditInstance> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut list = instances_from_toml(&text)?;
    if index >= list.len() {
        return Err(usage(format!(
            "--index {index} but {} has {} instances",
            path.display(),
            list.len()
        )));
    }
    Ok(list.swap_remove(index))
}

fn cmd_run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let noise = resolve_noise(a.family, a.noise)?;
    let inst = match a.family {
        InstanceSource::File => {
            let path = a
                .instance
                .as_deref()
                .ok_or_else(|| usage("--family file needs --instance"))?;
            read_instance(path, a.index)?
        }
        source => cell_instance(source, None, a.seed, a.eta, a.arms, a.horizon)?,
    };
    for w in validate_instance(&inst)? {
        eprintln!("warning: {w}");
    }
    let mut cfg = RunConfig::new(a.seed, a.delta)?;
    if a.family == InstanceSource::FastFamily {
        cfg.clip = fast_family_range(inst.eta());
    }

    let mut out = output(a.out.as_deref())?;
    let curve = match a.seeds {
        Some(n) => {
            if n == 0 {
                return Err(usage("--seeds must be at least 1"));
            }
            let batch = run_batch(&inst, a.agent, &cfg, noise, &derive_seeds(a.seed, n))?;
            batch.write_csv(&mut out)?;
            eprintln!(
                "{}: mean final regret {:.4} ± {:.4}, optimism failure rate {:.3}",
                a.agent,
                batch.mean_final_regret,
                batch.stderr_final_regret,
                batch.optimism_failure_rate
            );
            batch.mean_regret_curve
        }
        None => {
            let rec = run(&inst, a.agent, &cfg, noise)?;
            rec.write_csv(&mut out)?;
            eprintln!(
                "{}: final regret {:.4}, optimism {}",
                a.agent,
                rec.final_regret(),
                if rec.optimism_violated {
                    "violated"
                } else {
                    "held"
                }
            );
            rec.regret_curve
        }
    };
    out.flush()?;
    if let Some(p) = a.plot {
        std::fs::write(&p, regret_curves_svg(&[(a.agent.to_string(), curve)]))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: SweepArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let cfg = ExperimentConfig {
                grid: Grid {
                    eta: a.eta,
                    arms: a.arms,
                    horizon: a.horizon,
                },
                agents: a.agent,
                seeds_per_cell: a.seeds,
                noise: resolve_noise(a.family, a.noise)?,
                confidence_delta: a.delta,
                instance_source: a.family,
                instance_path: a.instance,
                master_seed: a.seed,
                output_path: None,
            };
            cfg.validate()?;
            cfg
        }
    };
    if a.out.is_some() {
        cfg.output_path = a.out;
    }
    let rows = regime_sweep(&cfg)?;
    let mut out = output(cfg.output_path.as_deref())?;
    write_sweep_csv(&rows, &mut out)?;
    out.flush()?;
    let failed: Vec<_> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| (r, e)))
        .collect();
    for (r, e) in &failed {
        eprintln!(
            "cell eta={} arms={} horizon={} agent={} failed: {e}",
            r.eta, r.arms, r.horizon, r.agent
        );
    }
    Ok(if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_instances(a: InstancesArgs) -> anyhow::Result<ExitCode> {
    let mut text = String::new();
    let instances = match a.family {
        InstanceSource::SlowFamily => {
            let fam = slow_hard_family(a.arms, a.horizon, a.eta)?;
            if !fam.in_theorem_range() {
                eprintln!(
                    "warning: K = {} is below 9; the lower-bound constants do not apply",
                    a.arms
                );
            }
            text.push_str(&format!(
                "# slow family, K = {}, delta = {}\n",
                a.arms, fam.delta
            ));
            fam.instances
        }
        InstanceSource::FastFamily => {
            let seed = derive_seed(a.seed, INSTANCE_STREAM + a.arms as u64);
            let s = fast_family_sample(a.arms, a.eta, a.horizon, seed)?;
            text.push_str(&format!(
                "# fast family, K = {}, alpha = {}, delta_t = {}, mu = {:?}\n",
                a.arms, s.alpha, s.delta_t, s.mu
            ));
            vec![s.instance]
        }
        InstanceSource::Random => {
            let seed = derive_seed(a.seed, INSTANCE_STREAM + a.arms as u64);
            vec![random_instance(a.arms, a.eta, a.horizon, seed)?]
        }
        InstanceSource::File => {
            return Err(usage("`instances` generates families; file is not one"))
        }
    };
    text.push_str(&instances_to_toml(&instances)?);
    let mut out = output(a.out.as_deref())?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(seed: u64) -> anyhow::Result<ExitCode> {
    let outcomes = verify_suite(seed);
    println!(
        "{:<26} {:>6} {:>9} {:>12}  result",
        "check", "cases", "failures", "worst"
    );
    for o in &outcomes {
        println!(
            "{:<26} {:>6} {:>9} {:>12.3e}  {}",
            o.name,
            o.cases,
            o.failures,
            o.worst,
            if o.passed() { "ok" } else { "FAIL" }
        );
    }
    Ok(if outcomes.iter().all(|o| o.passed()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_fit(input: &Path) -> anyhow::Result<ExitCode> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let rows = read_sweep_csv(file)?;
    let groups = fit_sweep(&rows);
    if groups.is_empty() {
        bail!("{} has no successful rows to fit", input.display());
    }
    println!(
        "{:>10} {:>5} {:<18} {:>6} {:>12} {:>12} {:>12} {:>12}  better",
        "eta", "arms", "agent", "points", "c_logsq", "c_sqrt", "resid_logsq", "resid_sqrt"
    );
    let mut ok = true;
    for g in &groups {
        match &g.fit {
            Ok(f) => println!(
                "{:>10} {:>5} {:<18} {:>6} {:>12.5} {:>12.5} {:>12.4e} {:>12.4e}  {}",
                g.eta,
                g.arms,
                g.agent.name(),
                g.points,
                f.c_logsq,
                f.c_sqrt,
                f.resid_logsq,
                f.resid_sqrt,
                f.better_model
            ),
            Err(e) => {
                ok = false;
                println!(
                    "{:>10} {:>5} {:<18} {:>6}  error: {e}",
                    g.eta,
                    g.arms,
                    g.agent.name(),
                    g.points
                );
            }
        }
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<Usage>() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidArgument(_) | Error::InvalidInstance(_) | Error::Precondition(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Instances(a) => cmd_instances(a),
        Command::Verify { seed } => cmd_verify(seed),
        Command::Fit { input } => cmd_fit(&input),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
