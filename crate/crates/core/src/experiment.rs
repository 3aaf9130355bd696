//! Multi-seed experiments, sensitivity sweeps and the inference benchmark.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abs::{compute_policy, VitalSetConfig, DEFAULT_EPSILON};
use crate::belief::{BeliefStore, UpdateMode, DEFAULT_LAMBDA};
use crate::simulator::closed_loop::{
    run_closed_loop, run_with_shifts, AnomalyShift, ControllerConfig, EpochMetrics, LoopConfig,
    LoopError, LoopOutcome,
};
use crate::simulator::{presets, ScenarioSpec, SimError, Simulator};
use crate::trace_model::SpanIdentity;
use crate::utility::{UtilityEstimate, UtilityMeasure};

pub const TOOL_VERSION: &str = concat!("spanbandit ", env!("CARGO_PKG_VERSION"));
/// Probability at which the faulty span counts as localized.
pub const CONVERGENCE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum WriteError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Where the injected random-delay fault goes in preset runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultPlacement {
    /// A seeded choice among non-root identities, different per seed.
    Random,
    Fixed(SpanIdentity),
    None,
}

/// Every knob of an experiment; serialized into each output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub utility: UtilityMeasure,
    pub lambda: f64,
    pub mode: UpdateMode,
    pub percentile: f64,
    pub epsilon: f64,
    pub mc_rows: usize,
    pub batch_size: usize,
    /// Number of seeds; seed values are `base_seed..base_seed + seeds`.
    pub seeds: u64,
    pub base_seed: u64,
    pub request_sampling_rate: f64,
    pub epochs: usize,
    pub preset: String,
    pub fault: FaultPlacement,
    pub record_timings: bool,
    /// Epoch at which epsilon sweeps move the fault.
    pub shift_epoch: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = ControllerConfig::default();
        Self {
            utility: c.utility,
            lambda: c.lambda,
            mode: c.mode,
            percentile: c.percentile_p,
            epsilon: c.epsilon,
            mc_rows: c.mc_rows,
            batch_size: 20,
            seeds: 20,
            base_seed: 0,
            request_sampling_rate: 1.0,
            epochs: 50,
            preset: "socialnet-like".into(),
            fault: FaultPlacement::Random,
            record_timings: false,
            shift_epoch: DEFAULT_SHIFT_EPOCH,
        }
    }
}

impl RunConfig {
    pub fn controller(&self) -> ControllerConfig {
        ControllerConfig {
            utility: self.utility,
            lambda: self.lambda,
            mode: self.mode,
            percentile_p: self.percentile,
            epsilon: self.epsilon,
            mc_rows: self.mc_rows,
        }
    }

    pub fn loop_config(&self, seed: u64) -> LoopConfig {
        LoopConfig {
            controller: self.controller(),
            batch_size: self.batch_size,
            epochs: self.epochs,
            request_sampling_rate: self.request_sampling_rate,
            seed,
            record_timings: self.record_timings,
        }
    }

    pub fn seed_values(&self) -> Vec<u64> {
        (0..self.seeds)
            .map(|i| self.base_seed.wrapping_add(i))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(ExperimentError::Config(format!(
                "lambda {} outside (0, 1]",
                self.lambda
            )));
        }
        VitalSetConfig {
            percentile_p: self.percentile,
            epsilon: self.epsilon,
            mc_rows: self.mc_rows,
            rng_seed: 0,
        }
        .validate()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
        if self.batch_size == 0 {
            return Err(ExperimentError::Config(
                "batch_size must be at least 1".into(),
            ));
        }
        if !(self.request_sampling_rate > 0.0 && self.request_sampling_rate <= 1.0) {
            return Err(ExperimentError::Config(format!(
                "request_sampling_rate {} outside (0, 1]",
                self.request_sampling_rate
            )));
        }
        if self.seeds == 0 || self.epochs == 0 {
            return Err(ExperimentError::Config(
                "seeds and epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Simulator for one seed: a preset (plus its fault) or a user scenario.
    pub fn simulator(
        &self,
        scenario: Option<&ScenarioSpec>,
        seed: u64,
    ) -> Result<(Simulator, Option<SpanIdentity>), ExperimentError> {
        if let Some(s) = scenario {
            return Ok((s.validate()?, None));
        }
        let topo = presets::topology(&self.preset)
            .ok_or_else(|| ExperimentError::UnknownPreset(self.preset.clone()))?;
        let mut anomalies = presets::default_anomalies(&self.preset);
        let fault = match &self.fault {
            FaultPlacement::Random => Some(presets::pick_fault_target(&topo, seed)),
            FaultPlacement::Fixed(id) => Some(id.clone()),
            FaultPlacement::None => None,
        };
        if let Some(f) = &fault {
            anomalies.push(presets::random_delay(f.clone()));
        }
        Ok((Simulator::new(topo, anomalies)?, fault))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            median: crate::utility::percentile_type7(xs, 50.0),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub fault: Option<SpanIdentity>,
    /// Sampled traces until the faulty span first reached the threshold.
    pub convergence_samples: Option<u64>,
    /// Requests issued until then.
    pub convergence_requests: Option<u64>,
    pub final_top1: bool,
    pub final_top3: bool,
    pub final_top5: bool,
    pub coverage: f64,
    pub cumulative_fraction_enabled: f64,
    #[serde(skip)]
    pub metrics: Vec<EpochMetrics>,
}

impl SeedRun {
    fn from_outcome(seed: u64, fault: Option<SpanIdentity>, out: &LoopOutcome) -> Self {
        let reach = out.first_reaching(CONVERGENCE_THRESHOLD, 0);
        let last = out.metrics.last();
        Self {
            seed,
            fault,
            convergence_samples: reach.map(|m| m.samples_seen),
            convergence_requests: reach.map(|m| m.requests_seen),
            final_top1: last.is_some_and(|m| m.top1_hit),
            final_top3: last.is_some_and(|m| m.top3_hit),
            final_top5: last.is_some_and(|m| m.top5_hit),
            coverage: out.coverage(),
            cumulative_fraction_enabled: out.cumulative_fraction_enabled(),
            metrics: out.metrics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub coverage: Stat,
    pub top1_accuracy: f64,
    pub top3_accuracy: f64,
    pub top5_accuracy: f64,
    pub fraction_enabled: Stat,
    pub converged_runs: usize,
    /// Over converged runs only.
    pub convergence_samples: Stat,
    pub convergence_requests: Stat,
}

impl Summary {
    pub fn of(runs: &[SeedRun]) -> Self {
        let frac = |f: fn(&SeedRun) -> bool| {
            runs.iter().filter(|r| f(r)).count() as f64 / runs.len().max(1) as f64
        };
        let conv: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.convergence_samples)
            .map(|x| x as f64)
            .collect();
        let conv_req: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.convergence_requests)
            .map(|x| x as f64)
            .collect();
        Self {
            runs: runs.len(),
            coverage: Stat::of(&runs.iter().map(|r| r.coverage).collect::<Vec<_>>()),
            top1_accuracy: frac(|r| r.final_top1),
            top3_accuracy: frac(|r| r.final_top3),
            top5_accuracy: frac(|r| r.final_top5),
            fraction_enabled: Stat::of(
                &runs
                    .iter()
                    .map(|r| r.cumulative_fraction_enabled)
                    .collect::<Vec<_>>(),
            ),
            converged_runs: conv.len(),
            convergence_samples: Stat::of(&conv),
            convergence_requests: Stat::of(&conv_req),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub tool: String,
    pub config: RunConfig,
    pub summary: Summary,
    pub runs: Vec<SeedRun>,
}

impl Experiment {
    /// Share of runs whose faulty span reached the threshold within
    /// `samples` sampled traces.
    pub fn converged_within(&self, samples: u64) -> f64 {
        self.runs
            .iter()
            .filter(|r| r.convergence_samples.is_some_and(|s| s <= samples))
            .count() as f64
            / self.runs.len().max(1) as f64
    }
}

pub fn run_experiment(
    cfg: &RunConfig,
    scenario: Option<&ScenarioSpec>,
) -> Result<Experiment, ExperimentError> {
    cfg.validate()?;
    let runs = cfg
        .seed_values()
        .par_iter()
        .map(|&seed| {
            let (sim, fault) = cfg.simulator(scenario, seed)?;
            let out = run_closed_loop(&sim, &cfg.loop_config(seed))?;
            let fault = fault.or_else(|| out.truth.faulty.iter().next().cloned());
            Ok(SeedRun::from_outcome(seed, fault, &out))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(Experiment {
        tool: TOOL_VERSION.into(),
        config: cfg.clone(),
        summary: Summary::of(&runs),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftRun {
    pub seed: u64,
    pub old_fault: SpanIdentity,
    pub new_fault: SpanIdentity,
    pub shift_epoch: usize,
    /// Sampled traces between the shift and the new faulty span first
    /// reaching the threshold.
    pub reconvergence_samples: Option<u64>,
    /// Post-shift samples available in the run (value used when censored).
    pub post_shift_samples: u64,
    #[serde(skip)]
    pub metrics: Vec<EpochMetrics>,
}

impl ShiftRun {
    pub fn censored_samples(&self) -> u64 {
        self.reconvergence_samples
            .unwrap_or(self.post_shift_samples + 1)
    }
}

/// Move the fault to a different span at `shift_epoch`. The new target is a
/// seeded choice among spans the controller had eliminated just before the
/// shift (vital probability below the default ε, or the five least vital
/// spans if none is), so re-convergence has to come from exploration.
pub fn run_shift(
    cfg: &RunConfig,
    seed: u64,
    shift_epoch: usize,
) -> Result<ShiftRun, ExperimentError> {
    cfg.validate()?;
    if shift_epoch == 0 || shift_epoch >= cfg.epochs {
        return Err(ExperimentError::Config(format!(
            "shift epoch {shift_epoch} outside 1..{}",
            cfg.epochs
        )));
    }
    let (sim, fault) = cfg.simulator(None, seed)?;
    let old = fault.ok_or_else(|| ExperimentError::Config("shift runs need a fault".into()))?;
    let lc = cfg.loop_config(seed);
    let pre = run_closed_loop(
        &sim,
        &LoopConfig {
            epochs: shift_epoch,
            ..lc.clone()
        },
    )?;

    let mut ranked: Vec<(&SpanIdentity, f64)> = pre
        .policy
        .entries
        .iter()
        .filter(|(id, _)| **id != old && **id != sim.topology.root)
        .map(|(id, e)| (id, e.vital_probability))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    let below = ranked.iter().filter(|(_, v)| *v < DEFAULT_EPSILON).count();
    // Broad beliefs may leave nothing below ε; fall back to the five least vital.
    let low: Vec<&SpanIdentity> = ranked
        .iter()
        .take(below.max(5))
        .map(|(id, _)| *id)
        .collect();
    if low.is_empty() {
        return Err(ExperimentError::Config(
            "topology has no candidate for a shifted fault".into(),
        ));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0x5_1F7);
    let new = low[rng.gen_range(0..low.len())].clone();

    let mut anomalies: Vec<_> = sim
        .anomalies
        .iter()
        .filter(|a| !a.targets(&sim.topology).contains(&old))
        .cloned()
        .collect();
    anomalies.push(presets::random_delay(new.clone()));
    let out = run_with_shifts(
        &sim,
        &lc,
        &[AnomalyShift {
            at_epoch: shift_epoch,
            anomalies,
        }],
    )?;
    let before = out.metrics[shift_epoch - 1].samples_seen;
    let total = out.metrics.last().map_or(0, |m| m.samples_seen);
    Ok(ShiftRun {
        seed,
        old_fault: old,
        new_fault: new,
        shift_epoch,
        reconvergence_samples: out
            .first_reaching(CONVERGENCE_THRESHOLD, shift_epoch)
            .map(|m| m.samples_seen - before),
        post_shift_samples: total - before,
        metrics: out.metrics,
    })
}

pub fn run_shift_experiment(
    cfg: &RunConfig,
    shift_epoch: usize,
) -> Result<Vec<ShiftRun>, ExperimentError> {
    cfg.seed_values()
        .par_iter()
        .map(|&s| run_shift(cfg, s, shift_epoch))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Percentile,
    Epsilon,
    RequestSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub summary: Summary,
    /// Post-shift re-convergence (censored at run end), epsilon sweeps only.
    pub reconvergence: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub tool: String,
    pub config: RunConfig,
    pub param: SweepParam,
    pub shift_epoch: Option<usize>,
    pub points: Vec<SweepPoint>,
}

impl Sweep {
    /// The headline metric of the sweep, per point: cumulative fraction
    /// enabled (percentile), mean censored re-convergence samples (epsilon),
    /// mean requests to convergence (request sampling).
    pub fn trend(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| match self.param {
                SweepParam::Percentile => p.summary.fraction_enabled.mean,
                SweepParam::Epsilon => p.reconvergence.map_or(f64::NAN, |s| s.mean),
                SweepParam::RequestSampling => p.summary.convergence_requests.mean,
            })
            .collect()
    }
}

pub const DEFAULT_SHIFT_EPOCH: usize = 10;

pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Sweep, ExperimentError> {
    let shift_epoch = (param == SweepParam::Epsilon).then_some(cfg.shift_epoch);
    let points = values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            match param {
                SweepParam::Percentile => c.percentile = v,
                SweepParam::Epsilon => c.epsilon = v,
                SweepParam::RequestSampling => c.request_sampling_rate = v,
            }
            let exp = run_experiment(&c, None)?;
            let reconvergence = match shift_epoch {
                Some(e) => {
                    let shifts = run_shift_experiment(&c, e)?;
                    Some(Stat::of(
                        &shifts
                            .iter()
                            .map(|s| s.censored_samples() as f64)
                            .collect::<Vec<_>>(),
                    ))
                }
                None => None,
            };
            Ok(SweepPoint {
                value: v,
                summary: exp.summary,
                reconvergence,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(Sweep {
        tool: TOOL_VERSION.into(),
        config: cfg.clone(),
        param,
        shift_epoch,
        points,
    })
}

/// `# {...}` header line carrying the tool version and configuration.
pub fn meta_line(config: &impl Serialize) -> Result<String, WriteError> {
    Ok(format!(
        "# {}",
        serde_json::to_string(&serde_json::json!({"tool": TOOL_VERSION, "config": config}))?
    ))
}

/// Per-epoch CSV (one row per epoch per seed), preceded by a `#` line
/// holding the tool version and configuration as JSON.
pub fn write_metrics_csv<W: Write>(mut writer: W, exp: &Experiment) -> Result<(), WriteError> {
    writeln!(writer, "{}", meta_line(&exp.config)?)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "seed",
        "epoch",
        "samples_seen",
        "requests_seen",
        "faulty_span_probability",
        "fraction_spans_enabled",
        "top1_hit",
        "top3_hit",
        "top5_hit",
        "inference_ms",
    ])?;
    for r in &exp.runs {
        for m in &r.metrics {
            w.write_record([
                r.seed.to_string(),
                m.epoch.to_string(),
                m.samples_seen.to_string(),
                m.requests_seen.to_string(),
                format!("{:.6}", m.faulty_span_probability),
                format!("{:.6}", m.fraction_spans_enabled),
                m.top1_hit.to_string(),
                m.top3_hit.to_string(),
                m.top5_hit.to_string(),
                format!("{:.3}", m.inference_ms),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per sweep value, preceded by the `#` metadata line.
pub fn write_sweep_csv<W: Write>(mut writer: W, sweep: &Sweep) -> Result<(), WriteError> {
    writeln!(
        writer,
        "{}",
        meta_line(
            &serde_json::json!({"run": sweep.config, "param": sweep.param, "shift_epoch": sweep.shift_epoch})
        )?
    )?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "param",
        "value",
        "fraction_enabled_mean",
        "fraction_enabled_std",
        "converged_runs",
        "convergence_samples_mean",
        "convergence_samples_std",
        "convergence_requests_mean",
        "convergence_requests_std",
        "top5_accuracy",
        "reconvergence_mean",
        "reconvergence_median",
    ])?;
    let param = serde_json::to_value(sweep.param)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    for p in &sweep.points {
        let s = &p.summary;
        let (rm, rmed) = p.reconvergence.map_or((String::new(), String::new()), |r| {
            (format!("{:.2}", r.mean), format!("{:.2}", r.median))
        });
        w.write_record([
            param.clone(),
            p.value.to_string(),
            format!("{:.6}", s.fraction_enabled.mean),
            format!("{:.6}", s.fraction_enabled.std),
            s.converged_runs.to_string(),
            format!("{:.2}", s.convergence_samples.mean),
            format!("{:.2}", s.convergence_samples.std),
            format!("{:.2}", s.convergence_requests.mean),
            format!("{:.2}", s.convergence_requests.std),
            format!("{:.4}", s.top5_accuracy),
            rm,
            rmed,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub tool: String,
    pub num_spans: usize,
    pub mc_rows: usize,
    pub runs_ms: Vec<f64>,
    pub median_ms: f64,
}

/// A belief store of `n` spans after a few epochs of right-skewed
/// utilities, so shapes range from well below to well above 1.
pub fn synthetic_beliefs(n: usize, seed: u64) -> (BeliefStore, Vec<UtilityEstimate>) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let ids: Vec<SpanIdentity> = (0..n)
        .map(|i| {
            SpanIdentity::new(format!("svc-{:02}", i % 40), format!("op-{i:04}"), "")
                .expect("non-empty")
        })
        .collect();
    let batch = |rng: &mut Xoshiro256PlusPlus| -> Vec<UtilityEstimate> {
        ids.iter()
            .map(|id| {
                let u: f64 = rng.gen::<f64>().powi(6);
                UtilityEstimate {
                    identity: id.clone(),
                    sample_count: 20,
                    raw: u,
                    normalized: u,
                }
            })
            .collect()
    };
    let mut store =
        BeliefStore::new(DEFAULT_LAMBDA, UpdateMode::VerbatimEwma).expect("valid lambda");
    for _ in 0..5 {
        store.update_epoch(&batch(&mut rng)).expect("normalized");
    }
    let next = batch(&mut rng);
    (store, next)
}

/// Median wall-clock of `runs` full inferences (belief update, Monte-Carlo
/// vital set, policy).
pub fn bench_inference(num_spans: usize, mc_rows: usize, runs: usize) -> BenchResult {
    let (store, batch) = synthetic_beliefs(num_spans, 1);
    let cfg = VitalSetConfig {
        mc_rows,
        ..VitalSetConfig::default()
    };
    // One untimed warm-up run.
    let _ = compute_policy(&store, &cfg);
    let runs_ms: Vec<f64> = (0..runs.max(1))
        .map(|i| {
            let mut s = store.clone();
            let c = VitalSetConfig {
                rng_seed: i as u64,
                ..cfg
            };
            let t = Instant::now();
            s.update_epoch(&batch).expect("normalized");
            let p = compute_policy(&s, &c).expect("valid config");
            let ms = t.elapsed().as_secs_f64() * 1e3;
            std::hint::black_box(p);
            ms
        })
        .collect();
    BenchResult {
        tool: TOOL_VERSION.into(),
        num_spans,
        mc_rows,
        median_ms: crate::utility::percentile_type7(&runs_ms, 50.0),
        runs_ms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            mc_rows: 2000,
            seeds: 2,
            epochs: 6,
            ..RunConfig::default()
        }
    }

    #[test]
    fn stat_basics() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!((s.mean, s.median, s.n), (2.5, 2.5, 4));
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Stat::of(&[]).n, 0);
    }

    #[test]
    fn experiment_is_deterministic_and_csv_embeds_config() {
        let a = run_experiment(&small(), None).unwrap();
        let b = run_experiment(&small(), None).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &a).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# {"));
        assert!(text.contains(TOOL_VERSION));
        assert_eq!(text.lines().count(), 2 + 2 * 6);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig {
            lambda: 0.0,
            ..small()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            percentile: 100.0,
            ..small()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            preset: "nope".into(),
            ..small()
        }
        .simulator(None, 0)
        .is_err());
    }

    #[test]
    fn shift_picks_new_target() {
        let r = run_shift(
            &RunConfig {
                epochs: 8,
                ..small()
            },
            3,
            4,
        )
        .unwrap();
        assert_ne!(r.old_fault, r.new_fault);
        assert_eq!(r.post_shift_samples, 4 * 20);
    }

    #[test]
    fn bench_reports_median() {
        let b = bench_inference(20, 1000, 3);
        assert_eq!(b.runs_ms.len(), 3);
        assert!(b.median_ms >= 0.0);
    }
}
