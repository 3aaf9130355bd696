//! Synthetic microservice traces with injected anomalies.
//!
//! A topology is a call graph of operations, expanded into a tree for every
//! request. Latencies are composed bottom-up: each operation instance draws
//! a self time `s`, spends `s/2` before its first child stage and the rest
//! after the last one. A stage is either one sequential call or a run of
//! consecutive parallel calls sharing a start time. The decomposed
//! `self_segment` of every recorded span therefore equals its drawn self
//! time plus the self time of unrecorded descendants it absorbs.

pub mod closed_loop;
pub mod presets;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, LogNormal, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abs::SamplingPolicy;
use crate::trace_model::{build_trace, SpanIdentity, SpanRecord, Trace, TraceError};

pub const VERSION_TAG: &str = "service.version";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid anomaly: {0}")]
    InvalidAnomaly(String),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalSpec {
    pub mu_log: f64,
    pub sigma_log: f64,
}

impl LogNormalSpec {
    /// Parameters giving the requested mean and standard deviation (µs).
    pub fn from_mean_std(mean: f64, std: f64) -> Self {
        let s2 = (1.0 + (std / mean).powi(2)).ln();
        Self {
            mu_log: mean.ln() - s2 / 2.0,
            sigma_log: s2.sqrt(),
        }
    }

    pub fn mean(&self) -> f64 {
        (self.mu_log + self.sigma_log * self.sigma_log / 2.0).exp()
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.sigma_log * self.sigma_log;
        (s2.exp() - 1.0) * (2.0 * self.mu_log + s2).exp()
    }
}

/// Non-negative Normal(mu, sigma) in µs, clamped at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub mu_us: f64,
    pub sigma_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallMode {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallSpec {
    pub callee: SpanIdentity,
    pub mode: CallMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationSpec {
    pub identity: SpanIdentity,
    pub base_latency: LogNormalSpec,
    #[serde(default)]
    pub children: Vec<CallSpec>,
    /// Static tags attached to every span of this operation.
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
    /// Per-request random tags: key → candidate values, drawn uniformly.
    #[serde(default)]
    pub random_tags: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub name: String,
    pub root: SpanIdentity,
    pub operations: Vec<OperationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnomalySpec {
    /// Each instance of `target` is delayed with probability `probability`.
    RandomDelay {
        target: SpanIdentity,
        probability: f64,
        delay: DelaySpec,
    },
    /// Self times of every operation of `service` are multiplied by
    /// `factor` for requests with index in `[start_request, end_request)`.
    Contention {
        service: String,
        factor: f64,
        #[serde(default)]
        start_request: u64,
        #[serde(default)]
        end_request: Option<u64>,
    },
    /// A fraction of requests hit a canary build of `service`: its spans are
    /// tagged `service.version = canary` (otherwise `stable`) and delayed.
    Canary {
        service: String,
        fraction: f64,
        extra_delay: DelaySpec,
    },
}

impl AnomalySpec {
    /// Identities whose own self time the anomaly changes.
    pub fn targets(&self, topo: &TopologySpec) -> BTreeSet<SpanIdentity> {
        match self {
            Self::RandomDelay { target, .. } => BTreeSet::from([target.clone()]),
            Self::Contention { service, .. } | Self::Canary { service, .. } => topo
                .operations
                .iter()
                .filter(|o| &o.identity.service == service)
                .map(|o| o.identity.clone())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub num_requests: u64,
    #[serde(default = "default_rate")]
    pub request_sampling_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_rate() -> f64 {
    1.0
}

fn default_batch() -> usize {
    20
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.request_sampling_rate > 0.0 && self.request_sampling_rate <= 1.0) {
            return Err(SimError::InvalidWorkload(format!(
                "request_sampling_rate {} outside (0, 1]",
                self.request_sampling_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(SimError::InvalidWorkload(
                "batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Topology, anomalies and workload as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub topology: TopologySpec,
    #[serde(default)]
    pub anomalies: Vec<AnomalySpec>,
    pub workload: WorkloadSpec,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<Simulator, SimError> {
        self.workload.validate()?;
        Simulator::new(self.topology.clone(), self.anomalies.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnomalyActivation {
    pub anomaly: usize,
    /// Span instances (delay, contention) or requests (canary) affected.
    pub activations: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub faulty: BTreeSet<SpanIdentity>,
    pub activations: Vec<AnomalyActivation>,
}

impl GroundTruth {
    fn absorb(&mut self, counts: &[u64]) {
        for (a, c) in self.activations.iter_mut().zip(counts) {
            a.activations += c;
        }
    }
}

/// One node of the expanded call tree.
#[derive(Debug, Clone)]
struct Node {
    op: usize,
    children: Vec<(usize, CallMode)>,
}

/// Validated topology plus anomalies, ready to generate requests.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub topology: TopologySpec,
    pub anomalies: Vec<AnomalySpec>,
    base: Vec<LogNormal<f64>>,
    /// Expanded tree in preorder; node 0 is the root.
    nodes: Vec<Node>,
}

/// Cap on expanded tree size, guarding against exponential DAG blow-up.
const MAX_NODES: usize = 100_000;

impl Simulator {
    pub fn new(topology: TopologySpec, anomalies: Vec<AnomalySpec>) -> Result<Self, SimError> {
        let index = validate_topology(&topology)?;
        for (i, a) in anomalies.iter().enumerate() {
            validate_anomaly(&topology, &index, a)
                .map_err(|m| SimError::InvalidAnomaly(format!("#{i}: {m}")))?;
        }
        let base = topology
            .operations
            .iter()
            .map(|o| {
                LogNormal::new(o.base_latency.mu_log, o.base_latency.sigma_log).expect("validated")
            })
            .collect();
        let mut nodes = Vec::new();
        expand(&topology, &index, index[&topology.root], &mut nodes)?;
        Ok(Self {
            topology,
            anomalies,
            base,
            nodes,
        })
    }

    pub fn with_anomalies(&self, anomalies: Vec<AnomalySpec>) -> Result<Self, SimError> {
        Self::new(self.topology.clone(), anomalies)
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            faulty: self
                .anomalies
                .iter()
                .flat_map(|a| a.targets(&self.topology))
                .collect(),
            activations: (0..self.anomalies.len())
                .map(|anomaly| AnomalyActivation {
                    anomaly,
                    activations: 0,
                })
                .collect(),
        }
    }

    /// Number of spans per identity in one fully recorded request.
    pub fn occurrence_counts(&self) -> BTreeMap<SpanIdentity, usize> {
        let mut out = BTreeMap::new();
        for n in &self.nodes {
            *out.entry(self.topology.operations[n.op].identity.clone())
                .or_insert(0) += 1;
        }
        out
    }

    pub fn spans_per_request(&self) -> usize {
        self.nodes.len()
    }

    /// Simulate request `index`. Returns `None` when head sampling drops it.
    /// `counts` accumulates per-anomaly activations (sized like `anomalies`).
    pub fn generate_request(
        &self,
        seed: u64,
        index: u64,
        request_sampling_rate: f64,
        policy: &SamplingPolicy,
        counts: &mut [u64],
    ) -> Option<Trace> {
        let mut rng = request_rng(seed, index);
        if rng.gen::<f64>() >= request_sampling_rate {
            return None;
        }
        Some(self.simulate(&mut rng, index, policy, counts))
    }

    fn simulate(
        &self,
        rng: &mut Xoshiro256PlusPlus,
        index: u64,
        policy: &SamplingPolicy,
        counts: &mut [u64],
    ) -> Trace {
        let ops = &self.topology.operations;
        let n = self.nodes.len();

        // Per-request anomaly state.
        let mut canary: Vec<Option<bool>> = vec![None; self.anomalies.len()];
        for (i, a) in self.anomalies.iter().enumerate() {
            if let AnomalySpec::Canary { fraction, .. } = a {
                let hit = rng.gen::<f64>() < *fraction;
                canary[i] = Some(hit);
                counts[i] += hit as u64;
            }
        }

        // Self times, drawn in preorder.
        let mut self_time = vec![0i64; n];
        let mut tags: Vec<BTreeMap<String, String>> = vec![BTreeMap::new(); n];
        for (k, node) in self.nodes.iter().enumerate() {
            let op = &ops[node.op];
            let mut s = self.base[node.op].sample(rng);
            for (i, a) in self.anomalies.iter().enumerate() {
                match a {
                    AnomalySpec::Contention {
                        service,
                        factor,
                        start_request,
                        end_request,
                    } if &op.identity.service == service
                        && index >= *start_request
                        && end_request.is_none_or(|e| index < e) =>
                    {
                        s *= factor;
                        counts[i] += 1;
                    }
                    AnomalySpec::RandomDelay {
                        target,
                        probability,
                        delay,
                    } if target == &op.identity => {
                        if rng.gen::<f64>() < *probability {
                            s += draw_delay(rng, delay);
                            counts[i] += 1;
                        }
                    }
                    AnomalySpec::Canary {
                        service,
                        extra_delay,
                        ..
                    } if &op.identity.service == service => {
                        let hit = canary[i].unwrap_or(false);
                        if hit {
                            s += draw_delay(rng, extra_delay);
                        }
                        tags[k].insert(
                            VERSION_TAG.into(),
                            if hit { "canary" } else { "stable" }.into(),
                        );
                    }
                    _ => {}
                }
            }
            self_time[k] = s.round().max(0.0) as i64;
            for (key, v) in &op.tags {
                tags[k].entry(key.clone()).or_insert_with(|| v.clone());
            }
            for (key, vs) in &op.random_tags {
                if !vs.is_empty() {
                    let v = &vs[rng.gen_range(0..vs.len())];
                    tags[k].entry(key.clone()).or_insert_with(|| v.clone());
                }
            }
        }

        // Durations bottom-up (children follow parents in preorder).
        let mut duration = vec![0i64; n];
        for k in (0..n).rev() {
            duration[k] = self_time[k]
                + stages(&self.nodes[k])
                    .map(|st| st.iter().map(|&c| duration[c]).max().unwrap_or(0))
                    .sum::<i64>();
        }

        // Start times top-down.
        let mut start = vec![0i64; n];
        start[0] = index as i64 * 1_000_000;
        for k in 0..n {
            let mut cursor = start[k] + self_time[k] / 2;
            for st in stages(&self.nodes[k]) {
                let mut longest = 0;
                for &c in &st {
                    start[c] = cursor;
                    longest = longest.max(duration[c]);
                }
                cursor += longest;
            }
        }

        // Recording decisions; the root is always recorded.
        let mut recorded = vec![true; n];
        for k in 1..n {
            let p = policy.probability(&ops[self.nodes[k].op].identity);
            recorded[k] = p >= 1.0 || rng.gen::<f64>() < p;
        }
        let mut parent = vec![usize::MAX; n];
        for (k, node) in self.nodes.iter().enumerate() {
            for &(c, _) in &node.children {
                parent[c] = k;
            }
        }

        let trace_id = format!("req-{index:08}");
        let mut records = Vec::new();
        for k in 0..n {
            if !recorded[k] {
                continue;
            }
            let mut p = parent[k];
            while p != usize::MAX && !recorded[p] {
                p = parent[p];
            }
            records.push(SpanRecord {
                trace_id: trace_id.clone(),
                span_id: format!("s{k}"),
                parent_id: (p != usize::MAX).then(|| format!("s{p}")),
                identity: ops[self.nodes[k].op].identity.clone(),
                start: start[k],
                duration: duration[k],
                tags: std::mem::take(&mut tags[k]),
            });
        }
        build_trace(records).expect("generated traces are valid trees")
    }

    /// Generate `workload.num_requests` requests under `policy`.
    pub fn generate(
        &self,
        workload: &WorkloadSpec,
        policy: &SamplingPolicy,
    ) -> (Vec<Trace>, GroundTruth) {
        let mut truth = self.ground_truth();
        let mut counts = vec![0u64; self.anomalies.len()];
        let traces = (0..workload.num_requests)
            .filter_map(|i| {
                self.generate_request(
                    workload.rng_seed,
                    i,
                    workload.request_sampling_rate,
                    policy,
                    &mut counts,
                )
            })
            .collect();
        truth.absorb(&counts);
        (traces, truth)
    }
}

/// Child stages of a node: each sequential call alone, consecutive parallel
/// calls grouped.
fn stages(node: &Node) -> impl Iterator<Item = Vec<usize>> + '_ {
    let mut i = 0;
    std::iter::from_fn(move || {
        let kids = &node.children;
        if i >= kids.len() {
            return None;
        }
        let mut st = vec![kids[i].0];
        if kids[i].1 == CallMode::Parallel {
            while i + 1 < kids.len() && kids[i + 1].1 == CallMode::Parallel {
                i += 1;
                st.push(kids[i].0);
            }
        }
        i += 1;
        Some(st)
    })
}

fn draw_delay(rng: &mut Xoshiro256PlusPlus, d: &DelaySpec) -> f64 {
    if d.sigma_us <= 0.0 {
        return d.mu_us.max(0.0);
    }
    Normal::new(d.mu_us, d.sigma_us)
        .expect("validated")
        .sample(rng)
        .max(0.0)
}

/// Independent stream for request `index` of run `seed`.
pub fn request_rng(seed: u64, index: u64) -> Xoshiro256PlusPlus {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    Xoshiro256PlusPlus::seed_from_u64(z ^ (z >> 31))
}

fn validate_topology(t: &TopologySpec) -> Result<HashMap<SpanIdentity, usize>, SimError> {
    let bad = |m: String| SimError::InvalidTopology(m);
    let mut index = HashMap::new();
    for (i, o) in t.operations.iter().enumerate() {
        o.identity.validate().map_err(|e| bad(e.to_string()))?;
        if index.insert(o.identity.clone(), i).is_some() {
            return Err(bad(format!("operation {} declared twice", o.identity)));
        }
        let l = &o.base_latency;
        if !(l.mu_log.is_finite() && l.sigma_log.is_finite() && l.sigma_log >= 0.0) {
            return Err(bad(format!("bad latency for {}", o.identity)));
        }
    }
    if !index.contains_key(&t.root) {
        return Err(bad(format!("root {} not declared", t.root)));
    }
    for o in &t.operations {
        for c in &o.children {
            if !index.contains_key(&c.callee) {
                return Err(bad(format!("{} calls undeclared {}", o.identity, c.callee)));
            }
        }
    }
    // Cycle check by depth-first colouring.
    fn visit(
        t: &TopologySpec,
        index: &HashMap<SpanIdentity, usize>,
        i: usize,
        colour: &mut [u8],
    ) -> Result<(), SimError> {
        match colour[i] {
            1 => {
                return Err(SimError::InvalidTopology(format!(
                    "call cycle through {}",
                    t.operations[i].identity
                )))
            }
            2 => return Ok(()),
            _ => {}
        }
        colour[i] = 1;
        for c in &t.operations[i].children {
            visit(t, index, index[&c.callee], colour)?;
        }
        colour[i] = 2;
        Ok(())
    }
    let mut colour = vec![0u8; t.operations.len()];
    for i in 0..t.operations.len() {
        visit(t, &index, i, &mut colour)?;
    }
    if t.operations
        .iter()
        .any(|o| o.children.iter().any(|c| c.callee == t.root))
    {
        return Err(bad(format!(
            "root {} is called by another operation",
            t.root
        )));
    }
    Ok(index)
}

fn validate_anomaly(
    t: &TopologySpec,
    index: &HashMap<SpanIdentity, usize>,
    a: &AnomalySpec,
) -> Result<(), String> {
    let has_service = |s: &str| t.operations.iter().any(|o| o.identity.service == s);
    let check_delay = |d: &DelaySpec| {
        if d.mu_us.is_finite() && d.sigma_us.is_finite() && d.sigma_us >= 0.0 {
            Ok(())
        } else {
            Err(format!("bad delay {d:?}"))
        }
    };
    match a {
        AnomalySpec::RandomDelay {
            target,
            probability,
            delay,
        } => {
            if !index.contains_key(target) {
                return Err(format!("unknown target {target}"));
            }
            if !(0.0..=1.0).contains(probability) {
                return Err(format!("probability {probability} outside [0, 1]"));
            }
            check_delay(delay)
        }
        AnomalySpec::Contention {
            service, factor, ..
        } => {
            if !has_service(service) {
                return Err(format!("unknown service {service}"));
            }
            if !(*factor >= 1.0 && factor.is_finite()) {
                return Err(format!("factor {factor} must be >= 1"));
            }
            Ok(())
        }
        AnomalySpec::Canary {
            service,
            fraction,
            extra_delay,
        } => {
            if !has_service(service) {
                return Err(format!("unknown service {service}"));
            }
            if !(0.0..=1.0).contains(fraction) {
                return Err(format!("fraction {fraction} outside [0, 1]"));
            }
            check_delay(extra_delay)
        }
    }
}

fn expand(
    t: &TopologySpec,
    index: &HashMap<SpanIdentity, usize>,
    op: usize,
    nodes: &mut Vec<Node>,
) -> Result<usize, SimError> {
    if nodes.len() >= MAX_NODES {
        return Err(SimError::InvalidTopology(format!(
            "expanded tree exceeds {MAX_NODES} spans"
        )));
    }
    let me = nodes.len();
    nodes.push(Node {
        op,
        children: Vec::new(),
    });
    for c in &t.operations[op].children {
        let k = expand(t, index, index[&c.callee], nodes)?;
        nodes[me].children.push((k, c.mode));
    }
    Ok(me)
}

pub fn write_ground_truth<W: Write>(writer: W, truth: &GroundTruth) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(writer, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::decompose;

    fn id(s: &str, o: &str) -> SpanIdentity {
        SpanIdentity::new(s, o, "").unwrap()
    }

    fn op(s: &str, o: &str, mean: f64, kids: &[(&str, &str, CallMode)]) -> OperationSpec {
        OperationSpec {
            identity: id(s, o),
            base_latency: LogNormalSpec::from_mean_std(mean, mean * 0.1),
            children: kids
                .iter()
                .map(|(s, o, m)| CallSpec {
                    callee: id(s, o),
                    mode: *m,
                })
                .collect(),
            tags: BTreeMap::new(),
            random_tags: BTreeMap::new(),
        }
    }

    /// A calls B and C in parallel, then D sequentially.
    fn fig() -> TopologySpec {
        TopologySpec {
            name: "fig".into(),
            root: id("a", "A"),
            operations: vec![
                op(
                    "a",
                    "A",
                    100.0,
                    &[
                        ("b", "B", CallMode::Parallel),
                        ("c", "C", CallMode::Parallel),
                        ("d", "D", CallMode::Sequential),
                    ],
                ),
                op("b", "B", 300.0, &[]),
                op("c", "C", 200.0, &[]),
                op("d", "D", 50.0, &[]),
            ],
        }
    }

    #[test]
    fn lognormal_moments() {
        let l = LogNormalSpec::from_mean_std(1000.0, 300.0);
        assert!((l.mean() - 1000.0).abs() < 1e-9);
        assert!((l.variance() - 90_000.0).abs() < 1e-6);
    }

    #[test]
    fn full_policy_records_everything_and_self_time_is_exact() {
        let sim = Simulator::new(fig(), vec![]).unwrap();
        let all = SamplingPolicy::all_on();
        let mut counts = [];
        let t = sim.generate_request(1, 0, 1.0, &all, &mut counts).unwrap();
        let ids: BTreeSet<_> = t.spans.iter().map(|s| s.identity.clone()).collect();
        let declared: BTreeSet<_> = fig()
            .operations
            .iter()
            .map(|o| o.identity.clone())
            .collect();
        assert_eq!(ids, declared);
        // B and C start together; D starts when the longer of them ends.
        let by = |o: &str| t.spans.iter().find(|s| s.identity.operation == o).unwrap();
        assert_eq!(by("B").start, by("C").start);
        assert_eq!(by("D").start, by("B").end().max(by("C").end()));
        let root = by("A");
        let d = decompose(&t);
        let a = d.iter().find(|x| x.identity.operation == "A").unwrap();
        assert_eq!(
            root.duration - a.self_segment,
            by("B").duration.max(by("C").duration) + by("D").duration
        );
    }

    #[test]
    fn disabled_span_reparents_children() {
        let mut topo = fig();
        topo.operations[1].children.push(CallSpec {
            callee: id("e", "E"),
            mode: CallMode::Sequential,
        });
        topo.operations.push(op("e", "E", 10.0, &[]));
        let sim = Simulator::new(topo, vec![]).unwrap();
        let mut policy = SamplingPolicy::all_on();
        policy.entries.insert(
            id("b", "B"),
            crate::abs::PolicyEntry {
                probability: 0.0,
                vital_probability: 0.0,
            },
        );
        let t = sim.generate_request(3, 7, 1.0, &policy, &mut []).unwrap();
        assert!(t.spans.iter().all(|s| s.identity.operation != "B"));
        let e = t
            .spans
            .iter()
            .find(|s| s.identity.operation == "E")
            .unwrap();
        assert_eq!(e.parent_id.as_deref(), Some(t.root.as_str()));
    }

    #[test]
    fn invalid_topologies() {
        let mut t = fig();
        t.operations[3].children.push(CallSpec {
            callee: id("b", "B"),
            mode: CallMode::Sequential,
        });
        t.operations[1].children.push(CallSpec {
            callee: id("d", "D"),
            mode: CallMode::Sequential,
        });
        assert!(matches!(
            Simulator::new(t, vec![]),
            Err(SimError::InvalidTopology(_))
        ));
        let mut t = fig();
        t.operations[1].children.push(CallSpec {
            callee: id("x", "X"),
            mode: CallMode::Sequential,
        });
        assert!(Simulator::new(t, vec![]).is_err());
        let bad = AnomalySpec::RandomDelay {
            target: id("x", "X"),
            probability: 0.5,
            delay: DelaySpec {
                mu_us: 1.0,
                sigma_us: 0.0,
            },
        };
        assert!(matches!(
            Simulator::new(fig(), vec![bad]),
            Err(SimError::InvalidAnomaly(_))
        ));
    }

    #[test]
    fn head_sampling_and_determinism() {
        let sim = Simulator::new(fig(), vec![]).unwrap();
        let w = WorkloadSpec {
            num_requests: 2000,
            request_sampling_rate: 0.25,
            batch_size: 20,
            rng_seed: 9,
        };
        let (a, _) = sim.generate(&w, &SamplingPolicy::all_on());
        let (b, _) = sim.generate(&w, &SamplingPolicy::all_on());
        // Binomial(2000, 0.25): sd ≈ 19.4.
        assert!((a.len() as f64 - 500.0).abs() < 5.0 * 19.4);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.spans, y.spans);
        }
    }

    #[test]
    fn delay_counts_activations() {
        let sim = Simulator::new(
            fig(),
            vec![AnomalySpec::RandomDelay {
                target: id("d", "D"),
                probability: 0.5,
                delay: DelaySpec {
                    mu_us: 5000.0,
                    sigma_us: 1000.0,
                },
            }],
        )
        .unwrap();
        let w = WorkloadSpec {
            num_requests: 1000,
            request_sampling_rate: 1.0,
            batch_size: 20,
            rng_seed: 1,
        };
        let (traces, truth) = sim.generate(&w, &SamplingPolicy::all_on());
        assert_eq!(truth.faulty, BTreeSet::from([id("d", "D")]));
        let n = truth.activations[0].activations;
        assert!((n as f64 - 500.0).abs() < 80.0, "{n}");
        assert_eq!(traces.len(), 1000);
    }
}
