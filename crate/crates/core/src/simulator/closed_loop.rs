//! The learning loop against a simulator: generate a batch under the current
//! policy, compute utilities, update beliefs, recompute the policy.
//!
//! One epoch corresponds to one policy refresh; wall-clock refresh intervals
//! do not exist here.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AnomalySpec, GroundTruth, SimError, Simulator};
use crate::abs::{compute_policy, report, AbsError, SamplingPolicy, VitalSetConfig};
use crate::belief::{BeliefError, BeliefStore, UpdateMode, DEFAULT_LAMBDA};
use crate::trace_model::{SpanIdentity, Trace};
use crate::utility::{pool_self_segments, utilities_from_observations, Measure, UtilityMeasure};

#[derive(Debug, Error)]
pub enum LoopError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Abs(#[from] AbsError),
    #[error("invalid loop configuration: {0}")]
    Config(String),
}

/// Learning knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub utility: UtilityMeasure,
    pub lambda: f64,
    pub mode: UpdateMode,
    pub percentile_p: f64,
    pub epsilon: f64,
    pub mc_rows: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let v = VitalSetConfig::default();
        Self {
            utility: UtilityMeasure::default(),
            lambda: DEFAULT_LAMBDA,
            mode: UpdateMode::default(),
            percentile_p: v.percentile_p,
            epsilon: v.epsilon,
            mc_rows: v.mc_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub controller: ControllerConfig,
    /// Sampled traces per epoch.
    pub batch_size: usize,
    pub epochs: usize,
    pub request_sampling_rate: f64,
    pub seed: u64,
    /// Fill `inference_ms`; off by default so outputs are reproducible.
    pub record_timings: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            controller: ControllerConfig::default(),
            batch_size: 20,
            epochs: 50,
            request_sampling_rate: 1.0,
            seed: 0,
            record_timings: false,
        }
    }
}

/// Replace the active anomalies before epoch `at_epoch` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyShift {
    pub at_epoch: usize,
    pub anomalies: Vec<AnomalySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Sampled traces consumed so far.
    pub samples_seen: u64,
    /// Requests issued so far (sampled or not).
    pub requests_seen: u64,
    /// Highest policy probability among the currently faulty identities.
    pub faulty_span_probability: f64,
    /// Policy probability averaged over spans, weighted by how often each
    /// identity occurs in a fully recorded request.
    pub fraction_spans_enabled: f64,
    pub top1_hit: bool,
    pub top3_hit: bool,
    pub top5_hit: bool,
    pub inference_ms: f64,
}

#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub beliefs: BeliefStore,
    pub policy: SamplingPolicy,
    pub truth: GroundTruth,
}

impl LoopOutcome {
    /// First epoch at or after `from_epoch` whose faulty probability is at
    /// least `threshold`.
    pub fn first_reaching(&self, threshold: f64, from_epoch: usize) -> Option<&EpochMetrics> {
        self.metrics
            .iter()
            .skip(from_epoch)
            .find(|m| m.faulty_span_probability >= threshold)
    }

    /// Mean fraction of spans enabled over all epochs.
    pub fn cumulative_fraction_enabled(&self) -> f64 {
        if self.metrics.is_empty() {
            return 1.0;
        }
        self.metrics
            .iter()
            .map(|m| m.fraction_spans_enabled)
            .sum::<f64>()
            / self.metrics.len() as f64
    }

    /// Mean faulty-span probability over all epochs.
    pub fn coverage(&self) -> f64 {
        if self.metrics.is_empty() {
            return 0.0;
        }
        self.metrics
            .iter()
            .map(|m| m.faulty_span_probability)
            .sum::<f64>()
            / self.metrics.len() as f64
    }
}

/// Vital-set config for one epoch; the Monte-Carlo stream is derived from
/// the run seed and epoch.
fn vital_config(c: &ControllerConfig, seed: u64, epoch: usize) -> VitalSetConfig {
    VitalSetConfig {
        percentile_p: c.percentile_p,
        epsilon: c.epsilon,
        mc_rows: c.mc_rows,
        rng_seed: seed
            .wrapping_mul(0x2545_F491_4F6C_DD1D)
            .wrapping_add(epoch as u64 + 1),
    }
}

/// One learning step on a batch: register identities, update beliefs from
/// batch utilities, recompute the policy.
pub fn learn_epoch(
    store: &mut BeliefStore,
    batch: &[Trace],
    measure: &dyn Measure,
    cfg: &VitalSetConfig,
) -> Result<SamplingPolicy, LoopError> {
    let mut pooled = pool_self_segments(batch);
    store.observe(pooled.keys());
    // Identities observed too rarely for the measure keep their belief.
    pooled.retain(|_, xs| xs.len() >= measure.min_samples());
    let estimates = utilities_from_observations(&pooled, measure);
    store.update_epoch(&estimates)?;
    Ok(compute_policy(store, cfg)?)
}

pub fn run_closed_loop(sim: &Simulator, cfg: &LoopConfig) -> Result<LoopOutcome, LoopError> {
    run_with_shifts(sim, cfg, &[])
}

/// Run the loop, replacing the anomaly set at each shift.
pub fn run_with_shifts(
    sim: &Simulator,
    cfg: &LoopConfig,
    shifts: &[AnomalyShift],
) -> Result<LoopOutcome, LoopError> {
    if cfg.batch_size == 0 {
        return Err(LoopError::Config("batch_size must be at least 1".into()));
    }
    if !(cfg.request_sampling_rate > 0.0 && cfg.request_sampling_rate <= 1.0) {
        return Err(LoopError::Config(format!(
            "request_sampling_rate {} outside (0, 1]",
            cfg.request_sampling_rate
        )));
    }
    vital_config(&cfg.controller, cfg.seed, 0).validate()?;
    let mut store = BeliefStore::new(cfg.controller.lambda, cfg.controller.mode)?;
    let measure: &dyn Measure = &cfg.controller.utility;

    let weights = sim.occurrence_counts();
    let total_weight: usize = weights.values().sum();
    let mut current = sim.clone();
    let mut truth = current.ground_truth();
    let mut policy = SamplingPolicy::all_on();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let (mut samples, mut requests) = (0u64, 0u64);

    for epoch in 0..cfg.epochs {
        if let Some(s) = shifts.iter().rev().find(|s| s.at_epoch == epoch) {
            current = sim.with_anomalies(s.anomalies.clone())?;
            let fresh = current.ground_truth();
            truth.faulty = fresh.faulty;
            let base = truth.activations.len();
            truth
                .activations
                .extend(fresh.activations.into_iter().map(|mut a| {
                    a.anomaly += base;
                    a
                }));
        }
        let offset = truth.activations.len() - current.anomalies.len();
        let mut counts = vec![0u64; current.anomalies.len()];
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if let Some(t) = current.generate_request(
                cfg.seed,
                requests,
                cfg.request_sampling_rate,
                &policy,
                &mut counts,
            ) {
                batch.push(t);
            }
            requests += 1;
        }
        samples += batch.len() as u64;
        for (a, c) in truth.activations[offset..].iter_mut().zip(&counts) {
            a.activations += c;
        }

        let started = Instant::now();
        policy = learn_epoch(
            &mut store,
            &batch,
            measure,
            &vital_config(&cfg.controller, cfg.seed, epoch),
        )?;
        let inference_ms = started.elapsed().as_secs_f64() * 1e3;

        metrics.push(epoch_metrics(
            epoch,
            samples,
            requests,
            &policy,
            &store,
            &truth.faulty,
            &weights,
            total_weight,
        )?);
        if cfg.record_timings {
            metrics.last_mut().expect("just pushed").inference_ms = inference_ms;
        }
    }
    Ok(LoopOutcome {
        metrics,
        beliefs: store,
        policy,
        truth,
    })
}

#[allow(clippy::too_many_arguments)]
fn epoch_metrics(
    epoch: usize,
    samples: u64,
    requests: u64,
    policy: &SamplingPolicy,
    store: &BeliefStore,
    faulty: &BTreeSet<SpanIdentity>,
    weights: &BTreeMap<SpanIdentity, usize>,
    total_weight: usize,
) -> Result<EpochMetrics, LoopError> {
    let enabled = weights
        .iter()
        .map(|(id, &w)| policy.probability(id) * w as f64)
        .sum::<f64>()
        / total_weight.max(1) as f64;
    let faulty_p = faulty
        .iter()
        .map(|id| policy.probability(id))
        .fold(0.0, f64::max);
    let rep = report(policy, store, 5)?;
    let best = faulty.iter().filter_map(|id| rep.rank_of(id)).min();
    let hit = |k: usize| best.is_some_and(|r| r <= k);
    Ok(EpochMetrics {
        epoch,
        samples_seen: samples,
        requests_seen: requests,
        faulty_span_probability: if faulty.is_empty() { 0.0 } else { faulty_p },
        fraction_spans_enabled: enabled,
        top1_hit: hit(1),
        top3_hit: hit(3),
        top5_hit: hit(5),
        inference_ms: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::presets;

    fn quick(epochs: usize) -> LoopConfig {
        LoopConfig {
            controller: ControllerConfig {
                mc_rows: 4000,
                ..ControllerConfig::default()
            },
            epochs,
            ..LoopConfig::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let t = presets::socialnet_like();
        let target = presets::pick_fault_target(&t, 1);
        let sim = Simulator::new(t, vec![presets::random_delay(target)]).unwrap();
        let a = run_closed_loop(&sim, &quick(6)).unwrap();
        let b = run_closed_loop(&sim, &quick(6)).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.policy, b.policy);
        assert!(a
            .metrics
            .windows(2)
            .all(|w| w[0].samples_seen < w[1].samples_seen));
    }

    #[test]
    fn metrics_are_probabilities() {
        let sim = Simulator::new(presets::media_like(), vec![]).unwrap();
        let out = run_closed_loop(&sim, &quick(5)).unwrap();
        for m in &out.metrics {
            assert!((0.0..=1.0).contains(&m.fraction_spans_enabled));
            assert_eq!(m.faulty_span_probability, 0.0);
            assert!(!m.top5_hit);
        }
    }

    #[test]
    fn shift_replaces_ground_truth() {
        let t = presets::socialnet_like();
        let a = presets::pick_fault_target(&t, 1);
        let b = presets::pick_fault_target(&t, 2);
        let sim = Simulator::new(t, vec![presets::random_delay(a)]).unwrap();
        let shift = AnomalyShift {
            at_epoch: 2,
            anomalies: vec![presets::random_delay(b.clone())],
        };
        let out = run_with_shifts(&sim, &quick(4), &[shift]).unwrap();
        assert_eq!(out.truth.faulty, BTreeSet::from([b]));
        assert_eq!(out.truth.activations.len(), 2);
        assert!(out.truth.activations[1].activations > 0);
    }
}
