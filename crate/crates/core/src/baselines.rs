//! Action-elimination baselines (median elimination, exponential-gap
//! elimination) and a harness comparing their elimination speed with ABS.
//!
//! A *sample* is one trace: every arm an algorithm is currently pulling is
//! observed once per sample. ME and EGE pull all surviving arms; ABS
//! observes each arm with its current policy probability.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_distr::{Beta, Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abs::{compute_policy, VitalSetConfig};
use crate::belief::{BeliefStore, UpdateMode, DEFAULT_LAMBDA};
use crate::trace_model::SpanIdentity;
use crate::utility::{mean, normalize, percentile_type7, UtilityEstimate};

pub const DEFAULT_BUDGET: u64 = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("need at least {needed} arms, got {got}")]
    TooFewArms { needed: usize, got: usize },
    #[error("budget exhausted after {used} samples; round needed {needed} more")]
    BudgetExhausted { used: u64, needed: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EliminationAlgorithm {
    MedianElimination,
    ExponentialGap,
}

impl EliminationAlgorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MedianElimination => "median_elimination",
            Self::ExponentialGap => "exponential_gap",
        }
    }
}

/// Parameters of one baseline run. `quota_scale` multiplies every sample
/// quota (1.0 is the classical algorithm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EliminationSchedule {
    pub algorithm: EliminationAlgorithm,
    pub eps: f64,
    pub delta: f64,
    pub sample_budget: u64,
    pub quota_scale: f64,
}

impl EliminationSchedule {
    pub fn new(algorithm: EliminationAlgorithm) -> Self {
        Self {
            algorithm,
            eps: 0.1,
            delta: 0.1,
            sample_budget: DEFAULT_BUDGET,
            quota_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(BaselineError::InvalidParameter(format!("eps {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(BaselineError::InvalidParameter(format!(
                "delta {}",
                self.delta
            )));
        }
        if !(self.quota_scale > 0.0 && self.quota_scale.is_finite()) {
            return Err(BaselineError::InvalidParameter(format!(
                "quota_scale {}",
                self.quota_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmState {
    pub identity: SpanIdentity,
    pub pulls: u64,
    pub mean_reward: f64,
    pub eliminated_at_sample: Option<u64>,
}

impl ArmState {
    pub fn new(identity: SpanIdentity) -> Self {
        Self {
            identity,
            pulls: 0,
            mean_reward: 0.0,
            eliminated_at_sample: None,
        }
    }

    fn observe(&mut self, u: f64) {
        self.pulls += 1;
        self.mean_reward += (u - self.mean_reward) / self.pulls as f64;
    }
}

/// Source of one normalized utility observation per pull.
pub trait ArmSampler {
    fn pull(&mut self, arm: usize) -> f64;
}

/// Sample counter shared by all rounds of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub used: u64,
    pub limit: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Self { used: 0, limit }
    }

    pub fn remaining(&self) -> u64 {
        self.limit.saturating_sub(self.used)
    }
}

/// Surviving-set size after each change, starting at sample 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelinePoint {
    pub samples: u64,
    pub surviving: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Identified,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminationOutcome {
    pub arms: Vec<ArmState>,
    pub timeline: Vec<TimelinePoint>,
    pub stop: StopReason,
    pub samples_used: u64,
}

impl EliminationOutcome {
    pub fn surviving(&self) -> usize {
        self.arms
            .iter()
            .filter(|a| a.eliminated_at_sample.is_none())
            .count()
    }
}

fn quota(scale: f64, raw: f64) -> u64 {
    (scale * raw).ceil().max(1.0) as u64
}

/// Per-arm pulls of one median-elimination round.
pub fn me_quota(eps_l: f64, delta_l: f64, scale: f64) -> u64 {
    let half = eps_l / 2.0;
    quota(scale, 4.0 / (half * half) * (3.0 / delta_l).ln())
}

/// Pull every arm in `alive` `n` times, returning the per-arm means of these
/// pulls (in `alive` order).
fn pull_round(
    arms: &mut [ArmState],
    alive: &[usize],
    n: u64,
    sampler: &mut dyn ArmSampler,
    budget: &mut Budget,
) -> Vec<f64> {
    let mut sums = vec![0.0; alive.len()];
    for _ in 0..n {
        for (s, &a) in sums.iter_mut().zip(alive) {
            let u = sampler.pull(a);
            arms[a].observe(u);
            *s += u;
        }
    }
    budget.used += n;
    sums.into_iter().map(|s| s / n.max(1) as f64).collect()
}

/// One median-elimination round over `alive`. Arms whose round mean is below
/// the median are eliminated. If the quota does not fit in the budget the
/// remaining budget is spent and nothing is eliminated.
pub fn me_round(
    arms: &mut [ArmState],
    alive: &mut Vec<usize>,
    eps_l: f64,
    delta_l: f64,
    scale: f64,
    sampler: &mut dyn ArmSampler,
    budget: &mut Budget,
) -> Result<(), BaselineError> {
    if alive.len() < 2 {
        return Err(BaselineError::TooFewArms {
            needed: 2,
            got: alive.len(),
        });
    }
    let q = me_quota(eps_l, delta_l, scale);
    if q > budget.remaining() {
        let rest = budget.remaining();
        pull_round(arms, alive, rest, sampler, budget);
        return Err(BaselineError::BudgetExhausted {
            used: budget.used,
            needed: q - rest,
        });
    }
    let means = pull_round(arms, alive, q, sampler, budget);
    let median = percentile_type7(&means, 50.0);
    let mut kept = Vec::with_capacity(alive.len());
    for (&a, &m) in alive.iter().zip(&means) {
        if m < median {
            arms[a].eliminated_at_sample = Some(budget.used);
        } else {
            kept.push(a);
        }
    }
    *alive = kept;
    Ok(())
}

/// Rounds of [`me_round`] with ε₁ = ε/4, δ₁ = δ/2, ε ← 3ε/4, δ ← δ/2 until
/// one arm remains. Returns that arm.
#[allow(clippy::too_many_arguments)]
fn median_elimination(
    arms: &mut [ArmState],
    alive: &mut Vec<usize>,
    eps: f64,
    delta: f64,
    scale: f64,
    sampler: &mut dyn ArmSampler,
    budget: &mut Budget,
    timeline: &mut Vec<TimelinePoint>,
) -> Result<usize, BaselineError> {
    let (mut e, mut d) = (eps / 4.0, delta / 2.0);
    while alive.len() > 1 {
        let before = alive.len();
        me_round(arms, alive, e, d, scale, sampler, budget)?;
        if alive.len() != before {
            timeline.push(TimelinePoint {
                samples: budget.used,
                surviving: alive.len(),
            });
        }
        e *= 0.75;
        d *= 0.5;
    }
    Ok(alive[0])
}

fn fresh_arms(n: usize) -> Vec<ArmState> {
    (0..n).map(|i| ArmState::new(arm_identity(i))).collect()
}

pub fn arm_identity(i: usize) -> SpanIdentity {
    SpanIdentity::new("arm", format!("a{i:03}"), "").expect("non-empty identity")
}

fn finish(
    arms: Vec<ArmState>,
    mut timeline: Vec<TimelinePoint>,
    stop: StopReason,
    budget: &Budget,
) -> EliminationOutcome {
    let surviving = arms
        .iter()
        .filter(|a| a.eliminated_at_sample.is_none())
        .count();
    if timeline.last().map(|p| p.samples) != Some(budget.used) {
        timeline.push(TimelinePoint {
            samples: budget.used,
            surviving,
        });
    }
    EliminationOutcome {
        arms,
        timeline,
        stop,
        samples_used: budget.used,
    }
}

/// Full median elimination on `n` arms.
pub fn me_run(
    n: usize,
    schedule: &EliminationSchedule,
    sampler: &mut dyn ArmSampler,
) -> Result<EliminationOutcome, BaselineError> {
    schedule.validate()?;
    let mut arms = fresh_arms(n);
    let mut budget = Budget::new(schedule.sample_budget);
    let mut timeline = vec![TimelinePoint {
        samples: 0,
        surviving: n,
    }];
    if n < 2 {
        return Ok(finish(arms, timeline, StopReason::Identified, &budget));
    }
    let mut alive: Vec<usize> = (0..n).collect();
    let stop = match median_elimination(
        &mut arms,
        &mut alive,
        schedule.eps,
        schedule.delta,
        schedule.quota_scale,
        sampler,
        &mut budget,
        &mut timeline,
    ) {
        Ok(_) => StopReason::Identified,
        Err(BaselineError::BudgetExhausted { .. }) => StopReason::BudgetExhausted,
        Err(e) => return Err(e),
    };
    Ok(finish(arms, timeline, stop, &budget))
}

/// Accuracy and confidence of EGE round `r` (1-based).
pub fn ege_round_params(r: u32, delta: f64) -> (f64, f64) {
    let r = r as f64;
    (0.25 * 0.5f64.powf(r), delta / (50.0 * r * r * r))
}

/// Per-arm pulls of EGE round `r`.
pub fn ege_quota(r: u32, delta: f64, scale: f64) -> u64 {
    let (e, d) = ege_round_params(r, delta);
    quota(scale, 2.0 / (e * e) * (2.0 / d).ln())
}

/// Samples needed by EGE round `r` on `n` arms, including the reference
/// median elimination (assuming it halves the set each round).
pub fn ege_round_cost(n: usize, r: u32, delta: f64, scale: f64) -> u64 {
    let (e, d) = ege_round_params(r, delta);
    let mut cost = ege_quota(r, delta, scale);
    let (mut me_e, mut me_d, mut left) = (e / 2.0 / 4.0, d / 2.0, n);
    while left > 1 {
        cost += me_quota(me_e, me_d, scale);
        left = left.div_ceil(2);
        me_e *= 0.75;
        me_d *= 0.5;
    }
    cost
}

/// Quota scale at which EGE's first round on `n` arms costs `fraction` of
/// `budget` samples.
pub fn fit_ege_scale(n: usize, delta: f64, budget: u64, fraction: f64) -> f64 {
    let target = budget as f64 * fraction;
    // Cost is monotone in the scale; bisect on a log scale.
    let (mut lo, mut hi) = (1e-12f64, 1.0f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if (ege_round_cost(n, 1, delta, mid) as f64) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Exponential-gap elimination. Round r samples each surviving arm
/// `(2/ε_r²)·ln(2/δ_r)` times, finds a reference arm by median elimination
/// at (ε_r/2, δ_r), and drops arms whose round mean is more than ε_r below
/// the reference's.
pub fn ege_run(
    n: usize,
    schedule: &EliminationSchedule,
    sampler: &mut dyn ArmSampler,
) -> Result<EliminationOutcome, BaselineError> {
    schedule.validate()?;
    let mut arms = fresh_arms(n);
    let mut budget = Budget::new(schedule.sample_budget);
    let mut timeline = vec![TimelinePoint {
        samples: 0,
        surviving: n,
    }];
    let mut alive: Vec<usize> = (0..n).collect();
    let mut r = 1u32;
    while alive.len() > 1 {
        let (e, d) = ege_round_params(r, schedule.delta);
        let t = ege_quota(r, schedule.delta, schedule.quota_scale);
        if t > budget.remaining() {
            let rest = budget.remaining();
            pull_round(&mut arms, &alive, rest, sampler, &mut budget);
            return Ok(finish(arms, timeline, StopReason::BudgetExhausted, &budget));
        }
        let means = pull_round(&mut arms, &alive, t, sampler, &mut budget);
        let mut sub = alive.clone();
        // The reference search eliminates only within its own copy.
        let mut scratch = arms.clone();
        let mut sub_timeline = Vec::new();
        let reference = match median_elimination(
            &mut scratch,
            &mut sub,
            e / 2.0,
            d,
            schedule.quota_scale,
            sampler,
            &mut budget,
            &mut sub_timeline,
        ) {
            Ok(a) => a,
            Err(BaselineError::BudgetExhausted { .. }) => {
                for (a, s) in arms.iter_mut().zip(&scratch) {
                    a.pulls = s.pulls;
                    a.mean_reward = s.mean_reward;
                }
                return Ok(finish(arms, timeline, StopReason::BudgetExhausted, &budget));
            }
            Err(err) => return Err(err),
        };
        for (a, s) in arms.iter_mut().zip(&scratch) {
            a.pulls = s.pulls;
            a.mean_reward = s.mean_reward;
        }
        let ref_mean = means[alive
            .iter()
            .position(|&a| a == reference)
            .expect("reference is alive")];
        let mut kept = Vec::with_capacity(alive.len());
        for (&a, &m) in alive.iter().zip(&means) {
            if m < ref_mean - e {
                arms[a].eliminated_at_sample = Some(budget.used);
            } else {
                kept.push(a);
            }
        }
        if kept.len() != alive.len() {
            timeline.push(TimelinePoint {
                samples: budget.used,
                surviving: kept.len(),
            });
        }
        alive = kept;
        r += 1;
    }
    Ok(finish(arms, timeline, StopReason::Identified, &budget))
}

/// Arms with Beta-distributed normalized utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmEnv {
    pub name: String,
    pub means: Vec<f64>,
    pub noise: RewardNoise,
}

/// Per-pull reward law around an arm's mean `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RewardNoise {
    /// Always `m`.
    None,
    /// Beta(κm, κ(1−m)).
    Beta { kappa: f64 },
    /// `m·Z²` clamped to [0, 1], Z standard normal: one trace's squared
    /// deviation when the utility is a variance.
    SquaredNormal,
}

impl ArmEnv {
    /// Right-skewed means 0.9·(1 − i/n)^10. The top 15% of arms hold about
    /// 83% of the total utility.
    pub fn skewed(n: usize) -> Self {
        Self {
            name: "skewed".into(),
            means: (0..n)
                .map(|i| 0.9 * (1.0 - i as f64 / n as f64).powi(10))
                .collect(),
            noise: RewardNoise::SquaredNormal,
        }
    }

    /// Means evenly spread over [0.1, 0.9].
    pub fn uniform(n: usize) -> Self {
        let step = if n > 1 { 0.8 / (n - 1) as f64 } else { 0.0 };
        Self {
            name: "uniform".into(),
            means: (0..n).map(|i| 0.9 - step * i as f64).collect(),
            noise: RewardNoise::SquaredNormal,
        }
    }

    pub fn identical(n: usize, mean: f64) -> Self {
        Self {
            name: "identical".into(),
            means: vec![mean; n],
            noise: RewardNoise::SquaredNormal,
        }
    }

    /// One arm at `high`, the rest at `low`.
    pub fn one_dominant(n: usize, high: f64, low: f64) -> Self {
        let mut means = vec![low; n];
        if n > 0 {
            means[0] = high;
        }
        Self {
            name: "one_dominant".into(),
            means,
            noise: RewardNoise::SquaredNormal,
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn sampler(&self, seed: u64) -> EnvSampler {
        let laws = self
            .means
            .iter()
            .map(|&m| match self.noise {
                RewardNoise::Beta { kappa } => {
                    let m = m.clamp(1e-3, 1.0 - 1e-3);
                    Some(Beta::new(kappa * m, kappa * (1.0 - m)).expect("positive Beta shapes"))
                }
                _ => None,
            })
            .collect();
        EnvSampler {
            means: self.means.clone(),
            noise: self.noise,
            laws,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }
}

pub struct EnvSampler {
    means: Vec<f64>,
    noise: RewardNoise,
    laws: Vec<Option<Beta<f64>>>,
    rng: Xoshiro256PlusPlus,
}

impl ArmSampler for EnvSampler {
    fn pull(&mut self, arm: usize) -> f64 {
        match (&self.laws[arm], self.noise) {
            (Some(law), _) => law.sample(&mut self.rng),
            (None, RewardNoise::SquaredNormal) => {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                (self.means[arm] * z * z).min(1.0)
            }
            (None, _) => self.means[arm],
        }
    }
}

/// Controller settings for the ABS side of the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsArmConfig {
    pub batch_size: u64,
    pub lambda: f64,
    pub mode: UpdateMode,
    pub percentile_p: f64,
    pub epsilon: f64,
    pub mc_rows: usize,
}

impl Default for AbsArmConfig {
    fn default() -> Self {
        Self {
            batch_size: 20,
            lambda: DEFAULT_LAMBDA,
            mode: UpdateMode::VerbatimEwma,
            percentile_p: 90.0,
            epsilon: 0.05,
            mc_rows: 10_000,
        }
    }
}

/// ABS on an arm environment. Each sample observes arm `i` with its current
/// policy probability; after every batch the per-arm mean observation
/// updates the beliefs. An arm counts as eliminated while its vital
/// probability is below ε, so the surviving count may go up again.
pub fn abs_run(
    env: &ArmEnv,
    cfg: &AbsArmConfig,
    budget: u64,
    seed: u64,
) -> Result<EliminationOutcome, BaselineError> {
    if cfg.batch_size == 0 {
        return Err(BaselineError::InvalidParameter("batch_size 0".into()));
    }
    let n = env.len();
    let mut arms = fresh_arms(n);
    let mut sampler = env.sampler(seed);
    let mut coin = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0x0005_EED0_FAB5);
    let mut store = BeliefStore::new(cfg.lambda, cfg.mode)
        .map_err(|e| BaselineError::InvalidParameter(e.to_string()))?;
    store.observe(arms.iter().map(|a| &a.identity));
    let mut probs = vec![1.0; n];
    let mut timeline = vec![TimelinePoint {
        samples: 0,
        surviving: n,
    }];
    let mut used = 0u64;
    let mut epoch = 0u64;
    while used < budget {
        let steps = cfg.batch_size.min(budget - used);
        let mut obs: Vec<Vec<f64>> = vec![Vec::new(); n];
        for _ in 0..steps {
            for (i, o) in obs.iter_mut().enumerate() {
                if coin.gen::<f64>() < probs[i] {
                    let u = sampler.pull(i);
                    arms[i].observe(u);
                    o.push(u);
                }
            }
        }
        used += steps;
        let mut estimates: Vec<_> = obs
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.is_empty())
            .map(|(i, o)| UtilityEstimate {
                identity: arms[i].identity.clone(),
                sample_count: o.len(),
                raw: mean(o),
                normalized: 0.0,
            })
            .collect();
        normalize(&mut estimates);
        store
            .update_epoch(&estimates)
            .map_err(|e| BaselineError::InvalidParameter(e.to_string()))?;
        let vcfg = VitalSetConfig {
            percentile_p: cfg.percentile_p,
            epsilon: cfg.epsilon,
            mc_rows: cfg.mc_rows,
            rng_seed: seed.wrapping_add(epoch),
        };
        let policy = compute_policy(&store, &vcfg)
            .map_err(|e| BaselineError::InvalidParameter(e.to_string()))?;
        let mut surviving = 0;
        for (i, a) in arms.iter_mut().enumerate() {
            let v = policy.vital_probability(&a.identity).unwrap_or(1.0);
            probs[i] = policy.probability(&a.identity);
            if v < cfg.epsilon {
                a.eliminated_at_sample.get_or_insert(used);
            } else {
                a.eliminated_at_sample = None;
                surviving += 1;
            }
        }
        timeline.push(TimelinePoint {
            samples: used,
            surviving,
        });
        epoch += 1;
    }
    let mut out = finish(
        arms,
        timeline,
        StopReason::BudgetExhausted,
        &Budget {
            used,
            limit: budget,
        },
    );
    out.stop = StopReason::BudgetExhausted;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ComparedAlgorithm {
    Abs(AbsArmConfig),
    Baseline(EliminationSchedule),
}

impl ComparedAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Abs(_) => "abs",
            Self::Baseline(s) => s.algorithm.as_str(),
        }
    }

    pub fn run(
        &self,
        env: &ArmEnv,
        budget: u64,
        seed: u64,
    ) -> Result<EliminationOutcome, BaselineError> {
        match self {
            Self::Abs(cfg) => abs_run(env, cfg, budget, seed),
            Self::Baseline(s) => {
                let s = EliminationSchedule {
                    sample_budget: budget,
                    ..*s
                };
                let mut sampler = env.sampler(seed);
                match s.algorithm {
                    EliminationAlgorithm::MedianElimination => me_run(env.len(), &s, &mut sampler),
                    EliminationAlgorithm::ExponentialGap => ege_run(env.len(), &s, &mut sampler),
                }
            }
        }
    }
}

/// Surviving count at `samples` for a step-function timeline.
pub fn surviving_at(timeline: &[TimelinePoint], samples: u64) -> usize {
    timeline
        .iter()
        .take_while(|p| p.samples <= samples)
        .last()
        .or(timeline.first())
        .map_or(0, |p| p.surviving)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub samples: u64,
    pub surviving_mean: f64,
    pub surviving_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub algorithm: String,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn final_mean(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.surviving_mean)
    }

    /// First grid point at which the mean surviving count is `<= k`.
    pub fn first_at_most(&self, k: f64) -> Option<u64> {
        self.points
            .iter()
            .find(|p| p.surviving_mean <= k)
            .map(|p| p.samples)
    }
}

/// Average surviving-set curves over `seeds`, evaluated every `step`
/// samples from 0 to `budget`.
pub fn compare_elimination(
    env: &ArmEnv,
    algorithms: &[ComparedAlgorithm],
    budget: u64,
    seeds: &[u64],
    step: u64,
) -> Result<Vec<Curve>, BaselineError> {
    let step = step.max(1);
    let grid: Vec<u64> = (0..=budget / step)
        .map(|i| i * step)
        .chain((!budget.is_multiple_of(step)).then_some(budget))
        .collect();
    algorithms
        .iter()
        .map(|alg| {
            let runs = seeds
                .par_iter()
                .map(|&s| alg.run(env, budget, s))
                .collect::<Result<Vec<_>, _>>()?;
            let points = grid
                .iter()
                .map(|&x| {
                    let ys: Vec<f64> = runs
                        .iter()
                        .map(|r| surviving_at(&r.timeline, x) as f64)
                        .collect();
                    let m = mean(&ys);
                    let var = if ys.len() > 1 {
                        ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (ys.len() - 1) as f64
                    } else {
                        0.0
                    };
                    CurvePoint {
                        samples: x,
                        surviving_mean: m,
                        surviving_std: var.sqrt(),
                    }
                })
                .collect();
            Ok(Curve {
                algorithm: alg.name().to_string(),
                points,
            })
        })
        .collect()
}

/// The three-way comparison on one environment: ABS (P = 90), classical ME,
/// and EGE with quotas scaled so its first round costs half the budget.
pub fn default_comparison(env: &ArmEnv, budget: u64) -> Vec<ComparedAlgorithm> {
    let me = EliminationSchedule {
        sample_budget: budget,
        ..EliminationSchedule::new(EliminationAlgorithm::MedianElimination)
    };
    let mut ege = EliminationSchedule {
        sample_budget: budget,
        ..EliminationSchedule::new(EliminationAlgorithm::ExponentialGap)
    };
    ege.quota_scale = fit_ege_scale(env.len(), ege.delta, budget, 0.5);
    vec![
        ComparedAlgorithm::Abs(AbsArmConfig::default()),
        ComparedAlgorithm::Baseline(me),
        ComparedAlgorithm::Baseline(ege),
    ]
}

pub fn write_curves_csv<W: Write>(writer: W, curves: &[Curve]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["algorithm", "samples", "surviving_mean", "surviving_std"])?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.algorithm.clone(),
                p.samples.to_string(),
                format!("{:.4}", p.surviving_mean),
                format!("{:.4}", p.surviving_std),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
