//! Per-span utility statistics over a batch of traces.
//!
//! Observations are `self_segment` latencies (µs) pooled per identity across
//! the whole batch. Raw utilities are normalized by the batch maximum.
//!
//! The built-in measure set beyond `variance` and `max` is a reconstruction;
//! additional measures can be registered through [`MeasureRegistry`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace_model::{decompose, SpanIdentity, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UtilityError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("identity {0} not observed in batch")]
    UnknownIdentity(String),
    #[error("unknown utility measure {0:?}")]
    UnknownMeasure(String),
}

/// A statistic mapping a span's pooled observations to a non-negative utility.
pub trait Measure: Send + Sync {
    fn name(&self) -> &str;
    /// Smallest sample count for which the statistic is defined. Below it
    /// the raw utility is 0.
    fn min_samples(&self) -> usize {
        1
    }
    fn compute(&self, xs: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityMeasure {
    #[default]
    Variance,
    Mean,
    Max,
    Std,
    P99,
    CoefficientOfVariation,
}

impl UtilityMeasure {
    pub const ALL: [UtilityMeasure; 6] = [
        UtilityMeasure::Variance,
        UtilityMeasure::Mean,
        UtilityMeasure::Max,
        UtilityMeasure::Std,
        UtilityMeasure::P99,
        UtilityMeasure::CoefficientOfVariation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            UtilityMeasure::Variance => "variance",
            UtilityMeasure::Mean => "mean",
            UtilityMeasure::Max => "max",
            UtilityMeasure::Std => "std",
            UtilityMeasure::P99 => "p99",
            UtilityMeasure::CoefficientOfVariation => "coefficient_of_variation",
        }
    }
}

impl fmt::Display for UtilityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UtilityMeasure {
    type Err = UtilityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "variance" => Ok(Self::Variance),
            "mean" => Ok(Self::Mean),
            "max" => Ok(Self::Max),
            "std" => Ok(Self::Std),
            "p99" => Ok(Self::P99),
            "coefficient_of_variation" | "cov" => Ok(Self::CoefficientOfVariation),
            other => Err(UtilityError::UnknownMeasure(other.to_string())),
        }
    }
}

impl Measure for UtilityMeasure {
    fn name(&self) -> &str {
        self.as_str()
    }

    fn min_samples(&self) -> usize {
        match self {
            UtilityMeasure::Variance
            | UtilityMeasure::Std
            | UtilityMeasure::CoefficientOfVariation => 2,
            _ => 1,
        }
    }

    fn compute(&self, xs: &[f64]) -> f64 {
        if xs.len() < self.min_samples() {
            return 0.0;
        }
        match self {
            UtilityMeasure::Variance => sample_variance(xs),
            UtilityMeasure::Mean => mean(xs),
            UtilityMeasure::Max => xs.iter().copied().fold(0.0, f64::max),
            UtilityMeasure::Std => sample_variance(xs).sqrt(),
            UtilityMeasure::P99 => percentile_type7(xs, 99.0),
            UtilityMeasure::CoefficientOfVariation => {
                let m = mean(xs);
                if m > 0.0 {
                    sample_variance(xs).sqrt() / m
                } else {
                    0.0
                }
            }
        }
    }
}

/// Name-keyed set of measures, pre-populated with the built-ins.
#[derive(Clone)]
pub struct MeasureRegistry {
    measures: BTreeMap<String, Arc<dyn Measure>>,
}

impl Default for MeasureRegistry {
    fn default() -> Self {
        let mut r = Self {
            measures: BTreeMap::new(),
        };
        for m in UtilityMeasure::ALL {
            r.register(Arc::new(m));
        }
        r
    }
}

impl MeasureRegistry {
    pub fn register(&mut self, measure: Arc<dyn Measure>) {
        self.measures.insert(measure.name().to_string(), measure);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Measure>, UtilityError> {
        self.measures
            .get(name)
            .cloned()
            .ok_or_else(|| UtilityError::UnknownMeasure(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.measures.keys().map(String::as_str)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n−1) sample variance; 0 for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    ss / (xs.len() - 1) as f64
}

/// Linear-interpolation percentile (type 7). `p` in [0, 100].
pub fn percentile_type7(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, p)
}

pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * (p / 100.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityEstimate {
    pub identity: SpanIdentity,
    pub sample_count: usize,
    pub raw: f64,
    pub normalized: f64,
}

/// Pool `self_segment` observations per identity, in identity order.
pub fn pool_self_segments(traces: &[Trace]) -> BTreeMap<SpanIdentity, Vec<f64>> {
    let mut pooled: HashMap<SpanIdentity, Vec<f64>> = HashMap::new();
    for trace in traces {
        for part in decompose(trace) {
            pooled
                .entry(part.identity)
                .or_default()
                .push(part.self_segment as f64);
        }
    }
    let mut out: BTreeMap<SpanIdentity, Vec<f64>> = pooled.into_iter().collect();
    // Sorting observations makes floating-point sums independent of trace order.
    for xs in out.values_mut() {
        xs.sort_by(f64::total_cmp);
    }
    out
}

pub fn compute_batch_utilities(
    traces: &[Trace],
    measure: &dyn Measure,
) -> Result<Vec<UtilityEstimate>, UtilityError> {
    if traces.is_empty() {
        return Err(UtilityError::EmptyBatch);
    }
    Ok(utilities_from_observations(
        &pool_self_segments(traces),
        measure,
    ))
}

pub fn utilities_from_observations(
    pooled: &BTreeMap<SpanIdentity, Vec<f64>>,
    measure: &dyn Measure,
) -> Vec<UtilityEstimate> {
    let mut out: Vec<UtilityEstimate> = pooled
        .iter()
        .map(|(id, xs)| UtilityEstimate {
            identity: id.clone(),
            sample_count: xs.len(),
            raw: measure.compute(xs).max(0.0),
            normalized: 0.0,
        })
        .collect();
    normalize(&mut out);
    out
}

/// Set `normalized = raw / max(raw)`; all zeros when the max is not positive.
pub fn normalize(estimates: &mut [UtilityEstimate]) {
    let max = estimates.iter().map(|e| e.raw).fold(0.0, f64::max);
    for e in estimates.iter_mut() {
        e.normalized = if max > 0.0 {
            (e.raw / max).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
}

/// Fraction of the total raw utility held by the top `fraction` of identities
/// (rounded to the nearest count, at least one identity).
pub fn top_share(estimates: &[UtilityEstimate], fraction: f64) -> f64 {
    let mut raws: Vec<f64> = estimates.iter().map(|e| e.raw).collect();
    let total: f64 = raws.iter().sum();
    if total <= 0.0 || raws.is_empty() {
        return 0.0;
    }
    raws.sort_by(|a, b| b.total_cmp(a));
    let k = ((raws.len() as f64 * fraction).round() as usize).clamp(1, raws.len());
    raws[..k].iter().sum::<f64>() / total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureHit {
    pub measure: String,
    /// Pessimistic 1-based rank: the number of identities with raw utility at
    /// least the faulty one's. `None` when the ranking is ambiguous.
    pub rank: Option<usize>,
    pub top1: bool,
    pub top3: bool,
    pub top5: bool,
    pub ambiguous: bool,
}

pub fn measure_comparison(
    traces: &[Trace],
    fault: &SpanIdentity,
    measures: &[Arc<dyn Measure>],
) -> Result<Vec<MeasureHit>, UtilityError> {
    if traces.is_empty() {
        return Err(UtilityError::EmptyBatch);
    }
    let pooled = pool_self_segments(traces);
    if !pooled.contains_key(fault) {
        return Err(UtilityError::UnknownIdentity(fault.to_string()));
    }
    Ok(measures
        .iter()
        .map(|m| {
            let est = utilities_from_observations(&pooled, m.as_ref());
            let fault_raw = est
                .iter()
                .find(|e| &e.identity == fault)
                .map_or(0.0, |e| e.raw);
            let ambiguous = est.iter().all(|e| e.raw <= 0.0) || fault_raw <= 0.0;
            let rank = (!ambiguous).then(|| est.iter().filter(|e| e.raw >= fault_raw).count());
            let within = |k| rank.is_some_and(|r| r <= k);
            MeasureHit {
                measure: m.name().to_string(),
                rank,
                top1: within(1),
                top3: within(3),
                top5: within(5),
                ambiguous,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::{build_trace, SpanRecord};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn single(op: &str, dur: i64, n: usize) -> Trace {
        build_trace(vec![SpanRecord {
            trace_id: format!("t{n}"),
            span_id: "s".into(),
            parent_id: None,
            identity: SpanIdentity::new("svc", op, "").unwrap(),
            start: 0,
            duration: dur,
            tags: Default::default(),
        }])
        .unwrap()
    }

    fn pair(a: i64, b: i64, n: usize) -> Trace {
        let id = |op: &str| SpanIdentity::new("svc", op, "").unwrap();
        build_trace(vec![
            SpanRecord {
                trace_id: format!("t{n}"),
                span_id: "a".into(),
                parent_id: None,
                identity: id("A"),
                start: 0,
                duration: a + b,
                tags: Default::default(),
            },
            SpanRecord {
                trace_id: format!("t{n}"),
                span_id: "b".into(),
                parent_id: Some("a".into()),
                identity: id("B"),
                start: a,
                duration: b,
                tags: Default::default(),
            },
        ])
        .unwrap()
    }

    #[test]
    fn variance_examples() {
        let m = UtilityMeasure::Variance;
        let t: Vec<Trace> = [5, 5, 5]
            .iter()
            .enumerate()
            .map(|(i, &d)| single("x", d, i))
            .collect();
        assert_eq!(compute_batch_utilities(&t, &m).unwrap()[0].raw, 0.0);
        let t: Vec<Trace> = [0, 2]
            .iter()
            .enumerate()
            .map(|(i, &d)| single("x", d, i))
            .collect();
        assert_eq!(compute_batch_utilities(&t, &m).unwrap()[0].raw, 2.0);
        let t = vec![single("x", 7, 0)];
        let est = compute_batch_utilities(&t, &m).unwrap();
        assert_eq!((est[0].raw, est[0].sample_count), (0.0, 1));
        assert_eq!(
            compute_batch_utilities(&[], &m).unwrap_err(),
            UtilityError::EmptyBatch
        );
    }

    #[test]
    fn normalization_by_batch_max() {
        let id = |op: &str| SpanIdentity::new("s", op, "").unwrap();
        let mut est = vec![
            UtilityEstimate {
                identity: id("A"),
                sample_count: 3,
                raw: 8.0,
                normalized: 0.0,
            },
            UtilityEstimate {
                identity: id("B"),
                sample_count: 3,
                raw: 2.0,
                normalized: 0.0,
            },
        ];
        normalize(&mut est);
        assert_eq!(est[0].normalized, 1.0);
        assert_eq!(est[1].normalized, 0.25);
    }

    #[test]
    fn builtin_statistics() {
        let xs = [1.0, 2.0, 3.0, 4.0, 10.0];
        assert_eq!(UtilityMeasure::Mean.compute(&xs), 4.0);
        assert_eq!(UtilityMeasure::Max.compute(&xs), 10.0);
        assert_relative_eq!(UtilityMeasure::Variance.compute(&xs), 12.5);
        assert_relative_eq!(UtilityMeasure::Std.compute(&xs), 12.5f64.sqrt());
        assert_relative_eq!(
            UtilityMeasure::CoefficientOfVariation.compute(&xs),
            12.5f64.sqrt() / 4.0
        );
        // type 7: h = 4 * 0.99 = 3.96 → 4 + 0.96 * 6
        assert_relative_eq!(UtilityMeasure::P99.compute(&xs), 9.76);
        assert_eq!(percentile_type7(&[3.0], 75.0), 3.0);
    }

    #[test]
    fn registry_lookup_and_custom_measures() {
        struct Range;
        impl Measure for Range {
            fn name(&self) -> &str {
                "range"
            }
            fn compute(&self, xs: &[f64]) -> f64 {
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(0.0, f64::max);
                hi - lo
            }
        }
        let mut reg = MeasureRegistry::default();
        assert!(reg.get("variance").is_ok());
        assert!(matches!(
            reg.get("range"),
            Err(UtilityError::UnknownMeasure(_))
        ));
        reg.register(Arc::new(Range));
        let t: Vec<Trace> = [3, 9]
            .iter()
            .enumerate()
            .map(|(i, &d)| single("x", d, i))
            .collect();
        let m = reg.get("range").unwrap();
        assert_eq!(compute_batch_utilities(&t, m.as_ref()).unwrap()[0].raw, 6.0);
        assert_eq!(
            "cov".parse::<UtilityMeasure>().unwrap(),
            UtilityMeasure::CoefficientOfVariation
        );
    }

    #[test]
    fn comparison_hits_and_ambiguity() {
        let fault = SpanIdentity::new("svc", "B", "").unwrap();
        let noisy: Vec<Trace> = (0..10)
            .map(|i| pair(10, if i % 2 == 0 { 5 } else { 50 }, i))
            .collect();
        let measures: Vec<Arc<dyn Measure>> = vec![Arc::new(UtilityMeasure::Variance)];
        let hits = measure_comparison(&noisy, &fault, &measures).unwrap();
        assert_eq!(hits[0].rank, Some(1));
        assert!(hits[0].top1 && hits[0].top5);

        let flat: Vec<Trace> = (0..10).map(|i| pair(10, 5, i)).collect();
        let hits = measure_comparison(&flat, &fault, &measures).unwrap();
        assert!(hits[0].ambiguous && !hits[0].top5);

        let other = SpanIdentity::new("svc", "nope", "").unwrap();
        assert!(matches!(
            measure_comparison(&flat, &other, &measures),
            Err(UtilityError::UnknownIdentity(_))
        ));
    }

    #[test]
    fn top_share_counts_heaviest() {
        let id = |op: &str| SpanIdentity::new("s", op, "").unwrap();
        let est: Vec<UtilityEstimate> = [8.0, 1.0, 1.0, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &raw)| UtilityEstimate {
                identity: id(&i.to_string()),
                sample_count: 2,
                raw,
                normalized: 0.0,
            })
            .collect();
        assert_relative_eq!(top_share(&est, 0.25), 0.8);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raws in prop::collection::vec(0.0f64..1e6, 1..20)) {
            let mut est: Vec<UtilityEstimate> = raws.iter().enumerate().map(|(i, &raw)| UtilityEstimate {
                identity: SpanIdentity::new("s", i.to_string(), "").unwrap(),
                sample_count: 2,
                raw,
                normalized: 0.0,
            }).collect();
            normalize(&mut est);
            for e in &est {
                prop_assert!((0.0..=1.0).contains(&e.normalized));
            }
            let mut again = est.clone();
            for e in &mut again { e.raw = e.normalized; }
            normalize(&mut again);
            for (a, b) in est.iter().zip(&again) {
                prop_assert!((a.normalized - b.normalized).abs() < 1e-12);
            }
        }

        #[test]
        fn variance_scale_covariance(
            durs in prop::collection::vec((1i64..1000, 1i64..1000), 2..30),
            c in 1i64..20,
        ) {
            let base: Vec<Trace> = durs.iter().enumerate().map(|(i, &(a, b))| pair(a, b, i)).collect();
            let scaled: Vec<Trace> = durs.iter().enumerate().map(|(i, &(a, b))| pair(a * c, b * c, i)).collect();
            let m = UtilityMeasure::Variance;
            let e0 = compute_batch_utilities(&base, &m).unwrap();
            let e1 = compute_batch_utilities(&scaled, &m).unwrap();
            let c2 = (c * c) as f64;
            for (a, b) in e0.iter().zip(&e1) {
                prop_assert!((a.raw * c2 - b.raw).abs() <= 1e-9 * b.raw.max(1.0));
                prop_assert!((a.normalized - b.normalized).abs() < 1e-9);
            }
        }

        #[test]
        fn permutation_invariance(durs in prop::collection::vec((1i64..1000, 1i64..1000), 2..30), rot in 0usize..30) {
            let traces: Vec<Trace> = durs.iter().enumerate().map(|(i, &(a, b))| pair(a, b, i)).collect();
            let mut shuffled = traces.clone();
            shuffled.rotate_left(rot % traces.len());
            shuffled.reverse();
            for m in UtilityMeasure::ALL {
                prop_assert_eq!(
                    compute_batch_utilities(&traces, &m).unwrap(),
                    compute_batch_utilities(&shuffled, &m).unwrap()
                );
            }
        }
    }
}
