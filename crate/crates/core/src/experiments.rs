//! Declarative regret sweeps, regret-scaling fits and the fast-family Bayes
//! regret probe.
//!
//! Sweep output is deterministic: per-cell seeds are derived from the master
//! seed by index, instances are keyed by arm count, and rows are sorted by
//! `(eta, arms, horizon, agent)` before being written.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::AgentKind;
use crate::error::{Error, Result};
use crate::instances::{
    fast_family_range, fast_family_sample, random_instance, slow_hard_family, FastFamilySample,
};
use crate::model::{BanditInstance, NoiseModel, RunConfig, DEFAULT_CONFIDENCE_DELTA};
use crate::rng::{derive_seed, derive_seeds, INSTANCE_STREAM};
use crate::simulator::{mean_stderr, run_batch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    /// Means i.i.d. `Unif[0,1]`, one fixed draw per arm count.
    Random,
    /// Base instance (means `(δ, 0, …, 0)`) of the slow-regime family.
    SlowFamily,
    /// One fast-regime prior draw per arm count (`2K` arms).
    FastFamily,
    /// Means read from `instance_path`; only `eta` and horizon vary.
    File,
}

impl InstanceSource {
    pub fn name(self) -> &'static str {
        match self {
            InstanceSource::Random => "random",
            InstanceSource::SlowFamily => "slow_family",
            InstanceSource::FastFamily => "fast_family",
            InstanceSource::File => "file",
        }
    }
}

impl fmt::Display for InstanceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstanceSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InstanceSource::Random),
            "slow" | "slow_family" => Ok(InstanceSource::SlowFamily),
            "fast" | "fast_family" => Ok(InstanceSource::FastFamily),
            "file" => Ok(InstanceSource::File),
            other => Err(Error::Parse(format!("unknown instance source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub eta: Vec<f64>,
    pub arms: Vec<usize>,
    pub horizon: Vec<u64>,
}

/// A sweep over `eta × arms × horizon × agents`.
///
/// On disk this is a TOML file:
///
/// ```toml
/// master_seed = 7
/// seeds_per_cell = 50
/// agents = ["kl_ucb"]
/// noise = "unit_gaussian"
/// confidence_delta = 0.1
/// instance_source = "slow_family"
/// output_path = "sweep.csv"
///
/// [grid]
/// eta = [1.0, 1e6]
/// arms = [8]
/// horizon = [4096, 16384]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: Grid,
    pub agents: Vec<AgentKind>,
    pub seeds_per_cell: usize,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default = "default_delta")]
    pub confidence_delta: f64,
    #[serde(default = "default_source")]
    pub instance_source: InstanceSource,
    #[serde(default)]
    pub instance_path: Option<PathBuf>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn default_noise() -> NoiseModel {
    NoiseModel::UnitGaussian
}

fn default_delta() -> f64 {
    DEFAULT_CONFIDENCE_DELTA
}

fn default_source() -> InstanceSource {
    InstanceSource::Random
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.grid.eta.is_empty() || self.grid.arms.is_empty() || self.grid.horizon.is_empty() {
            return bad("every grid axis needs at least one value");
        }
        if self.agents.is_empty() {
            return bad("at least one agent is required");
        }
        if self.seeds_per_cell == 0 {
            return bad("seeds_per_cell must be at least 1");
        }
        if self.grid.eta.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return bad("eta values must be positive and finite");
        }
        if self.grid.arms.iter().any(|&k| k < 2) {
            return bad("arm counts must be at least 2");
        }
        if self.grid.horizon.contains(&0) {
            return bad("horizons must be positive");
        }
        RunConfig::new(0, self.confidence_delta)?;
        if self.instance_source == InstanceSource::FastFamily
            && self.noise != FastFamilySample::NOISE
        {
            return bad("the fast family is defined under unit_gaussian noise only");
        }
        if self.instance_source == InstanceSource::File && self.instance_path.is_none() {
            return bad("instance_source = \"file\" needs instance_path");
        }
        Ok(())
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative instance paths are resolved against the config file.
        if let (Some(p), Some(dir)) = (cfg.instance_path.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eta: f64,
    pub arms: usize,
    pub horizon: u64,
    pub agent: AgentKind,
    /// `√(T/K)`: above it the run is in the low-regularization regime.
    pub regime_threshold: f64,
    pub mean_regret: f64,
    pub stderr: f64,
    pub optimism_failure_rate: f64,
    /// Set when the cell failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

impl SweepRow {
    fn sort_key(&self, other: &Self) -> std::cmp::Ordering {
        self.eta
            .total_cmp(&other.eta)
            .then(self.arms.cmp(&other.arms))
            .then(self.horizon.cmp(&other.horizon))
            .then(self.agent.name().cmp(other.agent.name()))
    }
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "eta",
    "arms",
    "horizon",
    "agent",
    "regime_threshold",
    "mean_regret",
    "stderr",
    "optimism_failure_rate",
    "error",
];

/// Instance for one `(eta, arms, horizon)` cell.
pub fn cell_instance(
    source: InstanceSource,
    template: Option<&BanditInstance>,
    master_seed: u64,
    eta: f64,
    arms: usize,
    horizon: u64,
) -> Result<BanditInstance> {
    let instance_seed = derive_seed(master_seed, INSTANCE_STREAM + arms as u64);
    match source {
        InstanceSource::Random => random_instance(arms, eta, horizon, instance_seed),
        InstanceSource::SlowFamily => Ok(slow_hard_family(arms, horizon, eta)?
            .instances
            .swap_remove(0)),
        InstanceSource::FastFamily => {
            Ok(fast_family_sample(arms, eta, horizon, instance_seed)?.instance)
        }
        InstanceSource::File => {
            let t = template
                .ok_or_else(|| Error::InvalidArgument("missing instance template".into()))?;
            if t.num_arms() != arms {
                return Err(Error::InvalidArgument(format!(
                    "instance file has {} arms, grid asks for {arms}",
                    t.num_arms()
                )));
            }
            t.with_eta_horizon(eta, horizon)
        }
    }
}

/// Runs every grid cell (in parallel) and returns rows sorted by
/// `(eta, arms, horizon, agent)`. Cell failures become error rows.
pub fn regime_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let template = match (&cfg.instance_source, &cfg.instance_path) {
        (InstanceSource::File, Some(p)) => {
            Some(BanditInstance::from_toml(&std::fs::read_to_string(p)?)?)
        }
        _ => None,
    };
    let seeds = derive_seeds(cfg.master_seed, cfg.seeds_per_cell);

    let mut cells = Vec::new();
    for &eta in &cfg.grid.eta {
        for &arms in &cfg.grid.arms {
            for &horizon in &cfg.grid.horizon {
                for &agent in &cfg.agents {
                    cells.push((eta, arms, horizon, agent));
                }
            }
        }
    }

    let mut rows: Vec<SweepRow> = cells
        .into_par_iter()
        .map(|(eta, arms, horizon, agent)| {
            let outcome = RunConfig::new(0, cfg.confidence_delta).and_then(|mut base| {
                if cfg.instance_source == InstanceSource::FastFamily {
                    base.clip = fast_family_range(eta);
                }
                let inst = cell_instance(
                    cfg.instance_source,
                    template.as_ref(),
                    cfg.master_seed,
                    eta,
                    arms,
                    horizon,
                )?;
                run_batch(&inst, agent, &base, cfg.noise, &seeds)
            });
            let regime_threshold = (horizon as f64 / arms as f64).sqrt();
            match outcome {
                Ok(b) => SweepRow {
                    eta,
                    arms,
                    horizon,
                    agent,
                    regime_threshold,
                    mean_regret: b.mean_final_regret,
                    stderr: b.stderr_final_regret,
                    optimism_failure_rate: b.optimism_failure_rate,
                    error: None,
                },
                Err(e) => SweepRow {
                    eta,
                    arms,
                    horizon,
                    agent,
                    regime_threshold,
                    mean_regret: f64::NAN,
                    stderr: f64::NAN,
                    optimism_failure_rate: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    rows.sort_by(SweepRow::sort_key);
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.eta.to_string(),
            r.arms.to_string(),
            r.horizon.to_string(),
            r.agent.name().to_string(),
            r.regime_threshold.to_string(),
            r.mean_regret.to_string(),
            r.stderr.to_string(),
            r.optimism_failure_rate.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a summary CSV written by [`write_sweep_csv`].
pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != SWEEP_COLUMNS {
        return Err(Error::Parse(format!(
            "unexpected sweep header: {headers:?}"
        )));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::Parse(format!("{s}: {e}")))
    };
    let int = |s: &str| {
        s.parse::<u64>()
            .map_err(|e| Error::Parse(format!("{s}: {e}")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(SweepRow {
            eta: num(&rec[0])?,
            arms: int(&rec[1])? as usize,
            horizon: int(&rec[2])?,
            agent: rec[3].parse()?,
            regime_threshold: num(&rec[4])?,
            mean_regret: num(&rec[5])?,
            stderr: num(&rec[6])?,
            optimism_failure_rate: num(&rec[7])?,
            error: (!rec[8].is_empty()).then(|| rec[8].to_string()),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    /// `regret ≈ a·log²T`, the high-regularization shape.
    Logsq,
    /// `regret ≈ b·√T`, the low-regularization shape.
    Sqrt,
}

impl fmt::Display for ScalingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingModel::Logsq => "logsq",
            ScalingModel::Sqrt => "sqrt",
        })
    }
}

/// Least-squares fits of `a·log²T` and `b·√T` (no intercepts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub c_logsq: f64,
    pub c_sqrt: f64,
    pub resid_logsq: f64,
    pub resid_sqrt: f64,
    /// The model with strictly smaller residual; ties go to `Sqrt`.
    pub better_model: ScalingModel,
}

fn one_dim_fit(series: &[(f64, f64)], feature: impl Fn(f64) -> f64) -> (f64, f64) {
    let sxy: f64 = series.iter().map(|&(t, y)| feature(t) * y).sum();
    let sxx: f64 = series.iter().map(|&(t, _)| feature(t).powi(2)).sum();
    let c = sxy / sxx;
    let resid = series
        .iter()
        .map(|&(t, y)| (y - c * feature(t)).powi(2))
        .sum();
    (c, resid)
}

pub fn scaling_fit(series: &[(f64, f64)]) -> Result<ScalingFit> {
    let mut distinct: Vec<f64> = series.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "scaling fit needs at least 3 distinct horizons, got {}",
            distinct.len()
        )));
    }
    if series.iter().any(|&(t, y)| !(t > 1.0) || !y.is_finite()) {
        return Err(Error::InvalidArgument(
            "horizons must exceed 1 and regrets be finite".into(),
        ));
    }
    let (c_logsq, resid_logsq) = one_dim_fit(series, |t| t.ln().powi(2));
    let (c_sqrt, resid_sqrt) = one_dim_fit(series, f64::sqrt);
    let better_model = if resid_logsq < resid_sqrt {
        ScalingModel::Logsq
    } else {
        ScalingModel::Sqrt
    };
    Ok(ScalingFit {
        c_logsq,
        c_sqrt,
        resid_logsq,
        resid_sqrt,
        better_model,
    })
}

/// A scaling fit for one `(eta, arms, agent)` group of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFit {
    pub eta: f64,
    pub arms: usize,
    pub agent: AgentKind,
    pub points: usize,
    pub fit: Result<ScalingFit>,
}

type GroupKey = (u64, usize, &'static str);
type GroupSeries = (f64, AgentKind, Vec<(f64, f64)>);

/// Groups successful sweep rows by `(eta, arms, agent)` and fits each group.
pub fn fit_sweep(rows: &[SweepRow]) -> Vec<GroupFit> {
    let mut groups: BTreeMap<GroupKey, GroupSeries> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        // f64 bit patterns of positive values sort like the values.
        let key = (r.eta.to_bits(), r.arms, r.agent.name());
        groups
            .entry(key)
            .or_insert_with(|| (r.eta, r.agent, Vec::new()))
            .2
            .push((r.horizon as f64, r.mean_regret));
    }
    groups
        .into_iter()
        .map(|((_, arms, _), (eta, agent, series))| GroupFit {
            eta,
            arms,
            agent,
            points: series.len(),
            fit: scaling_fit(&series),
        })
        .collect()
}

/// Mean Bayes regret of KL-UCB over the fast-family prior.
///
/// Draws `prior_samples` instances at `t = horizon` and runs
/// `seeds_per_sample` seeds on each. The agent clips its optimistic
/// estimates to the family's reward range ([`fast_family_range`]). Returns
/// the mean over all runs and the standard error across per-instance means.
pub fn bayes_regret_fast_family(
    num_arms: usize,
    eta: f64,
    horizon: u64,
    prior_samples: usize,
    seeds_per_sample: usize,
    master_seed: u64,
    confidence_delta: f64,
) -> Result<(f64, f64)> {
    if (horizon as f64) < eta * eta * num_arms as f64 {
        return Err(Error::Precondition(format!(
            "horizon {horizon} below η²K = {}",
            eta * eta * num_arms as f64
        )));
    }
    if prior_samples == 0 || seeds_per_sample == 0 {
        return Err(Error::InvalidArgument(
            "need at least one sample and one seed".into(),
        ));
    }
    let mut base = RunConfig::new(0, confidence_delta)?;
    base.clip = fast_family_range(eta);
    let per_instance: Vec<Result<f64>> = (0..prior_samples as u64)
        .into_par_iter()
        .map(|i| {
            let inst_seed = derive_seed(master_seed, INSTANCE_STREAM + i);
            let sample = fast_family_sample(num_arms, eta, horizon, inst_seed)?;
            let seeds: Vec<u64> = (0..seeds_per_sample as u64)
                .map(|j| derive_seed(master_seed, i * seeds_per_sample as u64 + j))
                .collect();
            let batch = run_batch(
                &sample.instance,
                AgentKind::KlUcb,
                &base,
                FastFamilySample::NOISE,
                &seeds,
            )?;
            Ok(batch.mean_final_regret)
        })
        .collect();
    let per_instance = per_instance.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(mean_stderr(&per_instance))
}
