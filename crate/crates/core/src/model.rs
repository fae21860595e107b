//! Domain types shared by every other module: policies, bandit instances,
//! reward noise and per-run configuration.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards, so they can be shared read-only across worker threads.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ probs = 1`.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Confidence level used when none is given.
pub const DEFAULT_CONFIDENCE_DELTA: f64 = 0.1;

/// A probability vector over a finite set of arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Policy {
    probs: Vec<f64>,
}

impl Policy {
    /// Wraps `probs` after checking nonnegativity and `|Σ − 1| ≤ 1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPolicy(
                "policy must have at least one arm".into(),
            ));
        }
        for (a, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidPolicy(format!(
                    "probability of arm {a} is {p}, must be finite and nonnegative"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidPolicy(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights into a policy.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || !(total > 0.0)
            || !total.is_finite()
        {
            return Err(Error::InvalidPolicy(
                "weights must be finite, nonnegative and not all zero".into(),
            ));
        }
        let mut probs = weights;
        for p in &mut probs {
            *p /= total;
        }
        Self::new(probs)
    }

    pub fn uniform(num_arms: usize) -> Self {
        assert!(num_arms > 0, "uniform policy needs at least one arm");
        Self {
            probs: vec![1.0 / num_arms as f64; num_arms],
        }
    }

    pub fn point_mass(num_arms: usize, arm: usize) -> Self {
        assert!(arm < num_arms, "arm {arm} out of range for {num_arms} arms");
        let mut probs = vec![0.0; num_arms];
        probs[arm] = 1.0;
        Self { probs }
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn num_arms(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn prob(&self, arm: usize) -> f64 {
        self.probs[arm]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Expectation of `values` under this policy.
    pub fn expect(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.probs.len());
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Inverse-CDF sampling: returns the first arm whose cumulative mass
    /// exceeds `u ∈ [0, 1)`. Arms with zero mass are never returned.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = a;
                if u < acc {
                    return a;
                }
            }
        }
        // u landed in the rounding gap between the cumulative sum and 1.
        last_positive
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl TryFrom<Vec<f64>> for Policy {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Policy::new(v)
    }
}

impl From<Policy> for Vec<f64> {
    fn from(p: Policy) -> Self {
        p.probs
    }
}

/// Non-fatal findings reported by [`validate_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceWarning {
    /// Some mean lies outside `[0, 1]`. The fast-regime hard family does this
    /// for small `eta`.
    MeansOutsideUnitInterval,
}

impl fmt::Display for InstanceWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceWarning::MeansOutsideUnitInterval => f.write_str("means outside [0,1]"),
        }
    }
}

/// A KL-regularized bandit problem `(arms, means, eta, reference, horizon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRecord", into = "InstanceRecord")]
pub struct BanditInstance {
    means: Vec<f64>,
    eta: f64,
    reference: Policy,
    horizon: u64,
}

impl BanditInstance {
    pub fn new(means: Vec<f64>, eta: f64, reference: Policy, horizon: u64) -> Result<Self> {
        let inst = Self {
            means,
            eta,
            reference,
            horizon,
        };
        validate_instance(&inst)?;
        Ok(inst)
    }

    /// Instance with a uniform reference policy.
    pub fn with_uniform_reference(means: Vec<f64>, eta: f64, horizon: u64) -> Result<Self> {
        let k = means.len().max(1);
        Self::new(means, eta, Policy::uniform(k), horizon)
    }

    #[inline]
    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    #[inline]
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    #[inline]
    pub fn eta(&self) -> f64 {
        self.eta
    }

    #[inline]
    pub fn reference(&self) -> &Policy {
        &self.reference
    }

    #[inline]
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Same reward means under a different `eta` and horizon.
    pub fn with_eta_horizon(&self, eta: f64, horizon: u64) -> Result<Self> {
        Self::new(self.means.clone(), eta, self.reference.clone(), horizon)
    }

    /// Same `eta`, reference and horizon, different means.
    pub fn with_means(&self, means: Vec<f64>) -> Result<Self> {
        Self::new(means, self.eta, self.reference.clone(), self.horizon)
    }

    pub fn means_in_unit_interval(&self) -> bool {
        self.means.iter().all(|m| (0.0..=1.0).contains(m))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceList {
    instance: Vec<BanditInstance>,
}

/// Several instances as a TOML array of `[[instance]]` tables.
pub fn instances_to_toml(instances: &[BanditInstance]) -> Result<String> {
    let list = InstanceList {
        instance: instances.to_vec(),
    };
    toml::to_string(&list).map_err(|e| Error::Parse(e.to_string()))
}

/// Reads either a single instance record or an `[[instance]]` list.
pub fn instances_from_toml(s: &str) -> Result<Vec<BanditInstance>> {
    let value: toml::Table = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    if value.contains_key("instance") {
        let list: InstanceList = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        Ok(list.instance)
    } else {
        Ok(vec![BanditInstance::from_toml(s)?])
    }
}

/// Checks every [`BanditInstance`] invariant, reporting the first violation.
/// Means outside `[0, 1]` are accepted and reported as a warning.
pub fn validate_instance(inst: &BanditInstance) -> Result<Vec<InstanceWarning>> {
    let k = inst.means.len();
    if k < 2 {
        return Err(Error::InvalidInstance(format!(
            "num_arms must be at least 2, got {k}"
        )));
    }
    if let Some(a) = inst.means.iter().position(|m| !m.is_finite()) {
        return Err(Error::InvalidInstance(format!(
            "mean of arm {a} must be finite"
        )));
    }
    if !(inst.eta > 0.0) || !inst.eta.is_finite() {
        return Err(Error::InvalidInstance("eta must be positive".into()));
    }
    if inst.reference.num_arms() != k {
        return Err(Error::InvalidInstance(format!(
            "reference has {} arms, means has {k}",
            inst.reference.num_arms()
        )));
    }
    if !inst.reference.is_strictly_positive() {
        return Err(Error::InvalidInstance(
            "reference must be strictly positive".into(),
        ));
    }
    if inst.horizon == 0 {
        return Err(Error::InvalidInstance("horizon must be positive".into()));
    }
    let mut warnings = Vec::new();
    if !inst.means_in_unit_interval() {
        warnings.push(InstanceWarning::MeansOutsideUnitInterval);
    }
    Ok(warnings)
}

/// Flat on-disk record of an instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub num_arms: usize,
    pub means: Vec<f64>,
    pub eta: f64,
    pub reference: Vec<f64>,
    pub horizon: u64,
}

impl TryFrom<InstanceRecord> for BanditInstance {
    type Error = Error;

    fn try_from(r: InstanceRecord) -> Result<Self> {
        if r.num_arms != r.means.len() {
            return Err(Error::InvalidInstance(format!(
                "num_arms is {} but means has {} entries",
                r.num_arms,
                r.means.len()
            )));
        }
        BanditInstance::new(r.means, r.eta, Policy::new(r.reference)?, r.horizon)
    }
}

impl From<BanditInstance> for InstanceRecord {
    fn from(i: BanditInstance) -> Self {
        InstanceRecord {
            num_arms: i.means.len(),
            means: i.means,
            eta: i.eta,
            reference: i.reference.into_vec(),
            horizon: i.horizon,
        }
    }
}

/// How observed rewards are generated around the arm means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// `mean + N(0, 1)`.
    UnitGaussian,
    /// `Bernoulli(mean)`; requires every mean in `[0, 1]`.
    Bernoulli,
    /// Rewards equal the mean exactly. Degenerate model for tests.
    Noiseless,
}

impl NoiseModel {
    pub fn name(self) -> &'static str {
        match self {
            NoiseModel::UnitGaussian => "unit_gaussian",
            NoiseModel::Bernoulli => "bernoulli",
            NoiseModel::Noiseless => "noiseless",
        }
    }

    /// Checks that this noise model can be used with `inst`.
    pub fn check_compatible(self, inst: &BanditInstance) -> Result<()> {
        if self == NoiseModel::Bernoulli && !inst.means_in_unit_interval() {
            return Err(Error::Precondition(
                "bernoulli noise requires every mean in [0,1]".into(),
            ));
        }
        Ok(())
    }

    /// Draws one observed reward for an arm with the given mean.
    pub fn observe<R: Rng + ?Sized>(self, mean: f64, rng: &mut R) -> f64 {
        match self {
            NoiseModel::UnitGaussian => {
                let eps: f64 = rng.sample(StandardNormal);
                mean + eps
            }
            NoiseModel::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseModel::Noiseless => mean,
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit_gaussian" | "gaussian" => Ok(NoiseModel::UnitGaussian),
            "bernoulli" => Ok(NoiseModel::Bernoulli),
            "noiseless" | "none" => Ok(NoiseModel::Noiseless),
            other => Err(Error::Parse(format!("unknown noise model `{other}`"))),
        }
    }
}

/// Closed interval that KL-UCB clips its optimistic estimates to.
///
/// The default is the unit interval. Instances whose means are known to live
/// in a wider range (the fast-regime hard family) can pass that range
/// instead; clipping to `[0, 1]` there caps every estimate of an arm worth
/// more than 1 and leaves a bias that never shrinks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipRange {
    pub lo: f64,
    pub hi: f64,
}

impl ClipRange {
    pub const UNIT: ClipRange = ClipRange { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "clip range needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }
}

impl Default for ClipRange {
    fn default() -> Self {
        Self::UNIT
    }
}

/// Per-run settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Failure probability of the confidence bonus, in `(0, 1)`.
    pub confidence_delta: f64,
    /// Keep every per-step policy and optimism margin in the record.
    pub record_policies: bool,
    /// Clipping interval for KL-UCB's optimistic estimates.
    pub clip: ClipRange,
}

impl RunConfig {
    pub fn new(seed: u64, confidence_delta: f64) -> Result<Self> {
        let cfg = Self {
            seed,
            confidence_delta,
            record_policies: false,
            clip: ClipRange::UNIT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence_delta > 0.0 && self.confidence_delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence_delta must lie in (0,1), got {}",
                self.confidence_delta
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            confidence_delta: DEFAULT_CONFIDENCE_DELTA,
            record_policies: false,
            clip: ClipRange::UNIT,
        }
    }
}
