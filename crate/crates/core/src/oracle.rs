//! Independent checks of the closed forms used by the lower-bound
//! constructions, plus the `verify` suite that runs them as randomized sweeps.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::instances::{
    fast_alpha, paired_instances, slow_hard_family, InstancePair, SLOW_FAMILY_MIN_ARMS,
};
use crate::model::{BanditInstance, Policy};
use crate::objective::{geometric_mean_policy, kl_divergence, optimal_policy, subopt_gap};
use crate::rng::stream_rng;

/// KL divergence between `N(m1, 1)` and `N(m2, 1)`.
pub fn gaussian_kl(m1: f64, m2: f64) -> f64 {
    let d = m1 - m2;
    d * d / 2.0
}

/// Largest arm count accepted by [`brute_force_min_sum_kl`].
pub const BRUTE_FORCE_MAX_ARMS: usize = 4;

fn sum_kl(pi: &[f64], p: &[f64], q: &[f64]) -> f64 {
    pi.iter()
        .zip(p.iter().zip(q))
        .filter(|(x, _)| **x > 0.0)
        .map(|(&x, (&a, &b))| x * (2.0 * x.ln() - a.ln() - b.ln()))
        .sum()
}

/// Enumerates the simplex grid with `steps` increments per unit and keeps
/// the best point.
fn grid_search(k: usize, steps: usize, p: &[f64], q: &[f64]) -> (Vec<f64>, f64) {
    fn recurse(
        arm: usize,
        left: usize,
        steps: usize,
        cur: &mut Vec<usize>,
        p: &[f64],
        q: &[f64],
        best: &mut (Vec<f64>, f64),
    ) {
        if arm + 1 == cur.len() {
            cur[arm] = left;
            let pi: Vec<f64> = cur.iter().map(|&c| c as f64 / steps as f64).collect();
            let v = sum_kl(&pi, p, q);
            if v < best.1 {
                *best = (pi, v);
            }
            return;
        }
        for c in 0..=left {
            cur[arm] = c;
            recurse(arm + 1, left - c, steps, cur, p, q, best);
        }
    }
    let mut best = (vec![], f64::INFINITY);
    let mut cur = vec![0; k];
    recurse(0, steps, steps, &mut cur, p, q, &mut best);
    best
}

/// Minimizes the objective along `pi + s·(e_i − e_j)` by golden-section
/// search; returns the improvement.
fn line_refine(pi: &mut [f64], i: usize, j: usize, p: &[f64], q: &[f64]) -> f64 {
    let total = pi[i] + pi[j];
    let eval = |s: f64, pi: &mut [f64]| {
        let (oi, oj) = (pi[i], pi[j]);
        pi[i] = s;
        pi[j] = total - s;
        let v = sum_kl(pi, p, q);
        pi[i] = oi;
        pi[j] = oj;
        v
    };
    let before = sum_kl(pi, p, q);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, total);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = eval(c, pi);
    let mut fd = eval(d, pi);
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = eval(c, pi);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = eval(d, pi);
        }
    }
    let s = 0.5 * (lo + hi);
    let after = eval(s, pi);
    if after < before {
        pi[i] = s;
        pi[j] = total - s;
        before - after
    } else {
        0.0
    }
}

/// Minimizes `KL(π‖p) + KL(π‖q)` by grid search over the simplex at the
/// given resolution, then pairwise coordinate descent until an entire sweep
/// improves the value by less than `1e-10`.
///
/// Shares no code with the closed form `π̂ ∝ √(p·q)` it is meant to check.
pub fn brute_force_min_sum_kl(p: &Policy, q: &Policy, resolution: f64) -> Result<(Policy, f64)> {
    let k = p.num_arms();
    if q.num_arms() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            got: q.num_arms(),
        });
    }
    if k > BRUTE_FORCE_MAX_ARMS {
        return Err(Error::InvalidArgument(format!(
            "brute force supports at most {BRUTE_FORCE_MAX_ARMS} arms, got {k}"
        )));
    }
    if !p.is_strictly_positive() || !q.is_strictly_positive() {
        return Err(Error::InvalidPolicy(
            "p and q must be strictly positive".into(),
        ));
    }
    if !(resolution > 0.0) || 1.0 / resolution < 2.0 {
        return Err(Error::InvalidArgument(
            "resolution too coarse: need at least 3 grid points per axis".into(),
        ));
    }
    let steps = (1.0 / resolution).round() as usize;
    let (pp, qq) = (p.probs(), q.probs());
    let (mut pi, _) = grid_search(k, steps, pp, qq);
    for _ in 0..10_000 {
        let mut improved = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                improved += line_refine(&mut pi, i, j, pp, qq);
            }
        }
        if improved < 1e-10 {
            break;
        }
    }
    let value = sum_kl(&pi, pp, qq);
    Ok((Policy::from_weights(pi)?, value))
}

/// `(lhs, rhs, lhs ≥ rhs)` for the fast-family separation inequality.
///
/// `lhs = SubOpt₁(π̂) + SubOpt₂(π̂)` at the geometric-mean policy of the two
/// optimal policies, `rhs = m·η·δ² / (10·K·exp(2ηα))` with `K` the number of
/// perturbed arms (half the instance size).
pub fn separation_check(pair: &InstancePair, m: usize) -> Result<(f64, f64, bool)> {
    if m != pair.hamming {
        return Err(Error::Precondition(format!(
            "pair has Hamming distance {}, not {m}",
            pair.hamming
        )));
    }
    if pair.alpha < 2.0 * pair.delta {
        return Err(Error::Precondition("alpha must be at least 2·delta".into()));
    }
    let eta = pair.first.eta();
    let half = pair.first.num_arms() / 2;
    let p1 = optimal_policy(&pair.first);
    let p2 = optimal_policy(&pair.second);
    let hat = geometric_mean_policy(&p1, &p2)?;
    let lhs = subopt_gap(&pair.first, &hat)? + subopt_gap(&pair.second, &hat)?;
    let rhs = m as f64 * eta * pair.delta * pair.delta
        / (10.0 * half as f64 * (2.0 * eta * pair.alpha).exp());
    Ok((lhs, rhs, lhs >= rhs))
}

/// `(value, δ/2, value ≥ δ/2)` for instances 1 and 2 of the slow family,
/// where `value` is the gap sum at the geometric-mean policy.
///
/// Requires `K ≥ 9` and `η·δ ≥ 2·log K` with `δ = √(2K/T)`.
pub fn slow_separation_check(num_arms: usize, horizon: u64, eta: f64) -> Result<(f64, f64, bool)> {
    if num_arms < SLOW_FAMILY_MIN_ARMS {
        return Err(Error::Precondition(format!(
            "slow separation needs K ≥ {SLOW_FAMILY_MIN_ARMS}, got {num_arms}"
        )));
    }
    let fam = slow_hard_family(num_arms, horizon, eta)?;
    let need = 2.0 * (num_arms as f64).ln();
    if eta * fam.delta < need * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "regime violated: η·δ = {} < 2·log K = {need}",
            eta * fam.delta
        )));
    }
    let (r1, r2) = (&fam.instances[0], &fam.instances[1]);
    let hat = geometric_mean_policy(&optimal_policy(r1), &optimal_policy(r2))?;
    let value = subopt_gap(r1, &hat)? + subopt_gap(r2, &hat)?;
    let half_delta = fam.delta / 2.0;
    Ok((value, half_delta, value >= half_delta))
}

/// Dirichlet(1, …, 1) draw, i.e. uniform on the simplex.
pub fn dirichlet_policy<R: Rng + ?Sized>(k: usize, concentration: f64, rng: &mut R) -> Policy {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    loop {
        let w: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        if w.iter().all(|&x| x > 0.0) {
            if let Ok(p) = Policy::from_weights(w) {
                return p;
            }
        }
    }
}

/// One row of the `verify` table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Worst observed value of the checked quantity (error or slack).
    pub worst: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    /// Records one case whose `excess` must be ≤ 0 to pass.
    fn record(&mut self, excess: f64) {
        self.cases += 1;
        self.worst = self.worst.max(excess);
        if !(excess <= 0.0) {
            self.failures += 1;
        }
    }

    fn fail(&mut self) {
        self.cases += 1;
        self.failures += 1;
    }

    fn done(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
        }
    }
}

/// Reward-scale of a random instance used by the sweeps.
fn random_unit_instance<R: Rng + ?Sized>(k: usize, eta: f64, rng: &mut R) -> BanditInstance {
    let means = (0..k).map(|_| rng.random::<f64>()).collect();
    BanditInstance::with_uniform_reference(means, eta, 1).expect("valid random instance")
}

/// Runs every closed-form verification sweep. Each outcome's `worst` is the
/// largest excess over its tolerance (≤ 0 means pass).
pub fn verify_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut rng = stream_rng(seed, 7);

    // Gap identity: J(π*) − J(π) = KL(π‖π*)/η.
    let mut t = Tally::new("subopt_kl_identity");
    for _ in 0..1000 {
        let k = rng.random_range(2..=32);
        let eta = 10f64.powf(rng.random_range(-2.0..=2.0));
        let inst = random_unit_instance(k, eta, &mut rng);
        let pi = dirichlet_policy(k, 1.0, &mut rng);
        let gap = subopt_gap(&inst, &pi).unwrap();
        let direct = kl_divergence(&pi, &optimal_policy(&inst)).map(|kl| kl / eta);
        match direct {
            Ok(d) => t.record((gap - d).abs() - 1e-9),
            Err(_) => t.fail(),
        }
    }
    out.push(t.done());

    // Gap of a mis-specified Gibbs policy is at most 1 for rewards in [0,1].
    let mut t = Tally::new("trivial_gap_bound");
    for _ in 0..1000 {
        let k = rng.random_range(2..=32);
        let eta = 10f64.powf(rng.random_range(-2.0..=2.0));
        let inst = random_unit_instance(k, eta, &mut rng);
        let other = random_unit_instance(k, eta, &mut rng);
        let gap = subopt_gap(&inst, &optimal_policy(&other)).unwrap();
        t.record(gap - 1.0 - 1e-12);
    }
    out.push(t.done());

    // Optimistic estimates: gap ≤ η·E_π̂[(f̂ − r)²].
    let mut t = Tally::new("optimistic_decomposition");
    for _ in 0..1000 {
        let k = rng.random_range(2..=32);
        let eta = 10f64.powf(rng.random_range(-2.0..=2.0));
        let inst = random_unit_instance(k, eta, &mut rng);
        let fhat: Vec<f64> = inst
            .means()
            .iter()
            .map(|r| r + rng.random::<f64>())
            .collect();
        let hat = optimal_policy(&inst.with_means(fhat.clone()).unwrap());
        let sq: Vec<f64> = fhat
            .iter()
            .zip(inst.means())
            .map(|(f, r)| (f - r) * (f - r))
            .collect();
        let bound = eta * hat.expect(&sq);
        t.record(subopt_gap(&inst, &hat).unwrap() - bound - 1e-12);
    }
    out.push(t.done());

    // Geometric-mean minimizer against the brute-force search.
    let mut t = Tally::new("geometric_mean_minimizer");
    for _ in 0..20 {
        let p = dirichlet_policy(3, 2.0, &mut rng);
        let q = dirichlet_policy(3, 2.0, &mut rng);
        let hat = geometric_mean_policy(&p, &q).unwrap();
        let closed = kl_divergence(&hat, &p).unwrap() + kl_divergence(&hat, &q).unwrap();
        let (_, brute) = brute_force_min_sum_kl(&p, &q, 0.01).unwrap();
        t.record((brute - closed).abs() - 1e-4);
    }
    out.push(t.done());

    // Fast-family separation inequality.
    let mut t = Tally::new("fast_separation");
    for _ in 0..100 {
        match random_separation_case(&mut rng) {
            Ok((lhs, rhs, _)) => t.record(rhs - lhs),
            Err(_) => t.fail(),
        }
    }
    out.push(t.done());

    // Slow-family separation at and inside the regime boundary.
    let mut t = Tally::new("slow_separation");
    for &(k, factor) in &[(9usize, 1.0), (12, 1.0), (16, 2.0), (25, 1.5), (64, 3.0)] {
        let horizon = 4096u64;
        let delta = (2.0 * k as f64 / horizon as f64).sqrt();
        let eta = factor * 2.0 * (k as f64).ln() / delta;
        match slow_separation_check(k, horizon, eta) {
            Ok((v, half, _)) => t.record(half - v),
            Err(_) => t.fail(),
        }
    }
    out.push(t.done());

    // Gaussian KL closed form at a perturbed arm.
    let mut t = Tally::new("gaussian_kl");
    for _ in 0..100 {
        let m = rng.random_range(-2.0..2.0);
        let delta = rng.random_range(0.0..1.0);
        let got = gaussian_kl(m, m + 2.0 * delta);
        let want = 2.0 * delta * delta;
        t.record((got - want).abs() - 1e-15);
    }
    out.push(t.done());

    out
}

/// One randomized configuration of the separation sweep: `K ∈ [2,8]`,
/// `η ∈ [0.1, 2]`, `α = 2·ln 2/η`, `δ = α/4`, random `x`, `μ₁` and a random
/// number of flipped signs for `μ₂`.
pub fn random_separation_case<R: Rng + ?Sized>(rng: &mut R) -> Result<(f64, f64, bool)> {
    let k: usize = rng.random_range(2..=8);
    let eta = rng.random_range(0.1..=2.0);
    let alpha = fast_alpha(eta);
    let delta = alpha / 4.0;
    let bound = alpha - delta;
    let x: Vec<f64> = (0..k).map(|_| rng.random_range(-bound..=bound)).collect();
    let mu1: Vec<i8> = (0..k)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    let m = rng.random_range(0..=k);
    let mut mu2 = mu1.clone();
    let mut idx: Vec<usize> = (0..k).collect();
    for i in 0..m {
        let j = rng.random_range(i..k);
        idx.swap(i, j);
        mu2[idx[i]] = -mu2[idx[i]];
    }
    let pair = paired_instances(&x, &mu1, &mu2, delta, eta, alpha, 1)?;
    separation_check(&pair, m)
}
