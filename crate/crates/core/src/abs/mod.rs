//! Approximate Bayesian sampling: beliefs to sampling policy.
//!
//! Each Monte-Carlo row draws one utility sample per span. Spans at or above
//! the row's P-th percentile form that row's vital set, and a span's vital
//! probability is the fraction of rows it appears in. The policy floors every
//! vital probability at ε.

mod kernel;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefStore, BetaBelief};
use crate::trace_model::SpanIdentity;

use kernel::{fill_block, LaneRng, Scratch, SpanShape, WIDTH};

pub const DEFAULT_PERCENTILE: f64 = 75.0;
pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_MC_ROWS: usize = 100_000;

/// Rows per independently seeded chunk.
const CHUNK_ROWS: usize = 1024;
/// Rows per generated block.
const BLOCK_ROWS: usize = WIDTH;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbsError {
    #[error("percentile {0} must lie in (0, 100)")]
    InvalidPercentile(f64),
    #[error("epsilon {0} must lie in [0, 1)")]
    InvalidEpsilon(f64),
    #[error("mc_rows must be at least 1")]
    InvalidRows,
    #[error("no spans to sample")]
    NoSpans,
    #[error("k must be at least 1")]
    InvalidK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VitalSetConfig {
    pub percentile_p: f64,
    pub epsilon: f64,
    pub mc_rows: usize,
    pub rng_seed: u64,
}

impl Default for VitalSetConfig {
    fn default() -> Self {
        Self {
            percentile_p: DEFAULT_PERCENTILE,
            epsilon: DEFAULT_EPSILON,
            mc_rows: DEFAULT_MC_ROWS,
            rng_seed: 0,
        }
    }
}

impl VitalSetConfig {
    pub fn validate(&self) -> Result<(), AbsError> {
        if !(self.percentile_p > 0.0 && self.percentile_p < 100.0) {
            return Err(AbsError::InvalidPercentile(self.percentile_p));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(AbsError::InvalidEpsilon(self.epsilon));
        }
        if self.mc_rows == 0 {
            return Err(AbsError::InvalidRows);
        }
        Ok(())
    }
}

/// Monte-Carlo draws, one row per sample and one column per span.
///
/// Cells are stored as log-odds; [`DrawMatrix::value`] maps back to (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    pub identities: Vec<SpanIdentity>,
    pub rows: usize,
    logits: Vec<f64>,
}

impl DrawMatrix {
    pub fn cols(&self) -> usize {
        self.identities.len()
    }

    pub fn row_logits(&self, r: usize) -> &[f64] {
        let s = self.cols();
        &self.logits[r * s..(r + 1) * s]
    }

    pub fn logit(&self, r: usize, s: usize) -> f64 {
        self.logits[r * self.cols() + s]
    }

    /// The Beta draw in cell (r, s).
    pub fn value(&self, r: usize, s: usize) -> f64 {
        1.0 / (1.0 + (-self.logit(r, s)).exp())
    }

    pub fn column_values(&self, s: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.value(r, s)).collect()
    }
}

fn shapes_of(beliefs: &BeliefStore) -> (Vec<SpanIdentity>, Vec<SpanShape>) {
    beliefs
        .beliefs
        .iter()
        .map(|(id, b)| (id.clone(), SpanShape::new(b.alpha, b.beta)))
        .unzip()
}

/// Hashed so that the lane streams of different chunks (each seeded from a
/// run of SplitMix states) start far apart.
fn chunk_seed(seed: u64, chunk: usize) -> u64 {
    let mut z = seed
        ^ (chunk as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generate rows `[chunk * CHUNK_ROWS, ..)` block by block, calling
/// `visit(first_row, rows_in_block, block)` where `block[s * BLOCK_ROWS + r]`
/// holds span `s` in row `first_row + r`.
fn walk_chunk(
    shapes: &[SpanShape],
    seed: u64,
    chunk: usize,
    total_rows: usize,
    buf: &mut [f64],
    mut visit: impl FnMut(usize, usize, &[f64]),
) {
    let mut rng = LaneRng::new(chunk_seed(seed, chunk));
    let mut sc = Box::<Scratch>::default();
    let start = chunk * CHUNK_ROWS;
    let end = (start + CHUNK_ROWS).min(total_rows);
    let mut first = start;
    while first < end {
        let n = (end - first).min(BLOCK_ROWS);
        fill_block(&mut rng, &mut sc, shapes, buf);
        visit(first, n, buf);
        first += n;
    }
}

/// Draw the full matrix. Deterministic given the beliefs and `cfg.rng_seed`.
pub fn draw_matrix(beliefs: &BeliefStore, cfg: &VitalSetConfig) -> DrawMatrix {
    let (identities, shapes) = shapes_of(beliefs);
    let s = shapes.len();
    let rows = cfg.mc_rows;
    let mut logits = vec![0.0; rows * s];
    if s > 0 {
        logits
            .par_chunks_mut(CHUNK_ROWS * s)
            .enumerate()
            .for_each(|(chunk, out)| {
                let mut buf = vec![0.0; s * BLOCK_ROWS];
                walk_chunk(
                    &shapes,
                    cfg.rng_seed,
                    chunk,
                    rows,
                    &mut buf,
                    |first, n, block| {
                        let base = first - chunk * CHUNK_ROWS;
                        for r in 0..n {
                            let row = &mut out[(base + r) * s..(base + r + 1) * s];
                            for (j, cell) in row.iter_mut().enumerate() {
                                *cell = block[j * BLOCK_ROWS + r];
                            }
                        }
                    },
                );
            });
    }
    DrawMatrix {
        identities,
        rows,
        logits,
    }
}

/// Type-7 position of the P-th percentile among `s` values: (index, fraction).
fn percentile_position(s: usize, p: f64) -> (usize, f64) {
    let h = (s - 1) as f64 * (p / 100.0);
    let lo = h.floor() as usize;
    (lo.min(s - 1), h - lo as f64)
}

/// Per-row candidate counting with reusable scratch space.
struct RowCounter {
    lo: usize,
    frac: f64,
    scratch: Vec<f64>,
    /// Centre and half-width of the value band expected to hold the order
    /// statistics, carried over from the previous row.
    centre: f64,
    width: f64,
}

impl RowCounter {
    fn new(s: usize, p: f64) -> Self {
        let (lo, frac) = percentile_position(s, p);
        Self {
            lo,
            frac,
            scratch: Vec::with_capacity(s),
            centre: f64::NAN,
            width: 0.0,
        }
    }

    /// Ranks `lo` and `lo + 1` of `row`, or `None` for the upper one when it
    /// is not needed.
    fn order_stats(&mut self, row: &[f64]) -> (f64, Option<f64>) {
        let need_hi = self.frac != 0.0 && self.lo + 1 < row.len();
        if self.centre.is_finite() {
            let (a, b) = (self.centre - self.width, self.centre + self.width);
            self.scratch.resize(row.len(), 0.0);
            let below = row.iter().map(|&v| (v < a) as usize).sum::<usize>();
            let mut n = 0;
            for &v in row {
                self.scratch[n] = v;
                n += ((v >= a) & (v <= b)) as usize;
            }
            self.scratch.truncate(n);
            let last = self.lo + need_hi as usize;
            if below <= self.lo && last < below + self.scratch.len() {
                let found = self.take(self.lo - below, need_hi);
                if self.scratch.len() > 96 {
                    self.width *= 0.8;
                }
                self.centre = found.0;
                return found;
            }
            self.width *= 2.0;
        }
        self.scratch.clear();
        self.scratch.extend_from_slice(row);
        let found = self.take(self.lo, need_hi);
        let spread = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
            - row.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if !self.centre.is_finite() {
            self.width = spread * 16.0 / row.len() as f64;
        }
        self.centre = found.0;
        found
    }

    fn take(&mut self, k: usize, need_hi: bool) -> (f64, Option<f64>) {
        let (_, &mut x_lo, upper) = self.scratch.select_nth_unstable_by(k, f64::total_cmp);
        let x_hi = need_hi.then(|| upper.iter().copied().fold(f64::INFINITY, f64::min));
        (x_lo, x_hi)
    }

    fn threshold(&mut self, row: &[f64]) -> f64 {
        match self.order_stats(row) {
            (x_lo, Some(x_hi)) => x_lo + self.frac * (x_hi - x_lo),
            (x_lo, None) => x_lo,
        }
    }

    fn count(&mut self, row: &[f64], counts: &mut [u64]) {
        let t = self.threshold(row);
        for (c, &v) in counts.iter_mut().zip(row) {
            *c += (v >= t) as u64;
        }
    }
}

/// Candidate fraction per span for an existing matrix.
pub fn vital_probabilities(matrix: &DrawMatrix, percentile_p: f64) -> Vec<(SpanIdentity, f64)> {
    let s = matrix.cols();
    if s == 0 || matrix.rows == 0 {
        return matrix
            .identities
            .iter()
            .map(|id| (id.clone(), 0.0))
            .collect();
    }
    let mut counter = RowCounter::new(s, percentile_p);
    let mut counts = vec![0u64; s];
    for r in 0..matrix.rows {
        counter.count(matrix.row_logits(r), &mut counts);
    }
    to_fractions(&matrix.identities, &counts, matrix.rows)
}

fn to_fractions(ids: &[SpanIdentity], counts: &[u64], rows: usize) -> Vec<(SpanIdentity, f64)> {
    ids.iter()
        .zip(counts)
        .map(|(id, &c)| (id.clone(), c as f64 / rows as f64))
        .collect()
}

/// Same result as `vital_probabilities(&draw_matrix(..), P)` without
/// materializing the matrix.
pub fn estimate_vital_probabilities(
    beliefs: &BeliefStore,
    cfg: &VitalSetConfig,
) -> Vec<(SpanIdentity, f64)> {
    let (identities, shapes) = shapes_of(beliefs);
    let s = shapes.len();
    if s == 0 || cfg.mc_rows == 0 {
        return identities.into_iter().map(|id| (id, 0.0)).collect();
    }
    let chunks = cfg.mc_rows.div_ceil(CHUNK_ROWS);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut buf = vec![0.0; s * BLOCK_ROWS];
            let mut counts = vec![0u64; s];
            let mut counter = RowCounter::new(s, cfg.percentile_p);
            let mut rows = vec![0.0; s * BLOCK_ROWS];
            walk_chunk(
                &shapes,
                cfg.rng_seed,
                chunk,
                cfg.mc_rows,
                &mut buf,
                |_, n, block| {
                    transpose_block(block, s, &mut rows);
                    for row in rows.chunks_exact(s).take(n) {
                        counter.count(row, &mut counts);
                    }
                },
            );
            counts
        })
        .reduce(
            || vec![0u64; s],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    to_fractions(&identities, &counts, cfg.mc_rows)
}

/// Column-major `s × BLOCK_ROWS` block into row-major order, in tiles.
fn transpose_block(block: &[f64], s: usize, rows: &mut [f64]) {
    const TILE: usize = 8;
    for j0 in (0..s).step_by(TILE) {
        let j1 = (j0 + TILE).min(s);
        for r0 in (0..BLOCK_ROWS).step_by(TILE) {
            for j in j0..j1 {
                let col = &block[j * BLOCK_ROWS + r0..j * BLOCK_ROWS + r0 + TILE];
                for (k, &v) in col.iter().enumerate() {
                    rows[(r0 + k) * s + j] = v;
                }
            }
        }
    }
}

/// Replace the estimates of spans sharing an identical belief by their mean.
/// Such spans are exchangeable, so this only removes Monte-Carlo noise.
pub fn pool_identical_beliefs(beliefs: &BeliefStore, vital: &mut [(SpanIdentity, f64)]) {
    let mut groups: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, (id, _)) in vital.iter().enumerate() {
        if let Some(b) = beliefs.get(id) {
            groups
                .entry((b.alpha.to_bits(), b.beta.to_bits()))
                .or_default()
                .push(i);
        }
    }
    for members in groups.values().filter(|m| m.len() > 1) {
        let mean = members.iter().map(|&i| vital[i].1).sum::<f64>() / members.len() as f64;
        for &i in members {
            vital[i].1 = mean;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub probability: f64,
    pub vital_probability: f64,
}

/// Sampling probability per span identity, floored at ε.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPolicy {
    pub epoch: u64,
    pub epsilon: f64,
    pub percentile: f64,
    pub entries: BTreeMap<SpanIdentity, PolicyEntry>,
}

impl SamplingPolicy {
    /// A policy that records every span (the initial state of a run).
    pub fn all_on() -> Self {
        Self {
            epoch: 0,
            epsilon: 0.0,
            percentile: DEFAULT_PERCENTILE,
            entries: BTreeMap::new(),
        }
    }

    /// Sampling probability for `id`; spans without an entry are recorded.
    pub fn probability(&self, id: &SpanIdentity) -> f64 {
        self.entries.get(id).map_or(1.0, |e| e.probability)
    }

    pub fn vital_probability(&self, id: &SpanIdentity) -> Option<f64> {
        self.entries.get(id).map(|e| e.vital_probability)
    }

    pub fn to_file(&self) -> PolicyFile {
        PolicyFile {
            epoch: self.epoch,
            epsilon: self.epsilon,
            percentile: self.percentile,
            entries: self
                .entries
                .iter()
                .map(|(id, e)| PolicyFileEntry {
                    service: id.service.clone(),
                    operation: id.operation.clone(),
                    url: id.url.clone(),
                    probability: e.probability,
                    vital_probability: e.vital_probability,
                })
                .collect(),
        }
    }

    pub fn from_file(f: PolicyFile) -> Self {
        Self {
            epoch: f.epoch,
            epsilon: f.epsilon,
            percentile: f.percentile,
            entries: f
                .entries
                .into_iter()
                .map(|e| {
                    (
                        SpanIdentity {
                            service: e.service,
                            operation: e.operation,
                            url: e.url,
                        },
                        PolicyEntry {
                            probability: e.probability,
                            vital_probability: e.vital_probability,
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub epoch: u64,
    pub epsilon: f64,
    pub percentile: f64,
    pub entries: Vec<PolicyFileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyFileEntry {
    pub service: String,
    pub operation: String,
    #[serde(default)]
    pub url: String,
    pub probability: f64,
    pub vital_probability: f64,
}

pub fn finalize_policy(
    vital: &[(SpanIdentity, f64)],
    cfg: &VitalSetConfig,
    epoch: u64,
) -> SamplingPolicy {
    SamplingPolicy {
        epoch,
        epsilon: cfg.epsilon,
        percentile: cfg.percentile_p,
        entries: vital
            .iter()
            .map(|(id, v)| {
                let v = v.clamp(0.0, 1.0);
                (
                    id.clone(),
                    PolicyEntry {
                        probability: v.max(cfg.epsilon),
                        vital_probability: v,
                    },
                )
            })
            .collect(),
    }
}

/// Full inference: Monte-Carlo vital set, pooling of exchangeable spans, ε floor.
pub fn compute_policy(
    beliefs: &BeliefStore,
    cfg: &VitalSetConfig,
) -> Result<SamplingPolicy, AbsError> {
    cfg.validate()?;
    if beliefs.is_empty() {
        return Err(AbsError::NoSpans);
    }
    let mut vital = estimate_vital_probabilities(beliefs, cfg);
    pool_identical_beliefs(beliefs, &mut vital);
    Ok(finalize_policy(&vital, cfg, beliefs.epoch))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub rank: usize,
    pub identity: SpanIdentity,
    pub vital_probability: f64,
    pub probability: f64,
    pub posterior_mean: f64,
    pub posterior_variance: f64,
    /// Confidence that the span belongs to the vital set.
    pub confidence: f64,
    pub eliminated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub k: usize,
    pub rows: Vec<ReportRow>,
    /// True when the top-k membership was decided by the identity tie-break.
    pub ambiguous: bool,
}

impl Report {
    pub fn top_k(&self) -> &[ReportRow] {
        &self.rows[..self.k.min(self.rows.len())]
    }

    /// 1-based rank of `id`, if present.
    pub fn rank_of(&self, id: &SpanIdentity) -> Option<usize> {
        self.rows.iter().find(|r| &r.identity == id).map(|r| r.rank)
    }
}

/// Rank spans by vital probability, then posterior mean, then identity.
pub fn report(
    policy: &SamplingPolicy,
    beliefs: &BeliefStore,
    k: usize,
) -> Result<Report, AbsError> {
    if k == 0 {
        return Err(AbsError::InvalidK);
    }
    let mut rows: Vec<ReportRow> = policy
        .entries
        .iter()
        .map(|(id, e)| {
            let b = beliefs.get(id).copied().unwrap_or_else(BetaBelief::default);
            ReportRow {
                rank: 0,
                identity: id.clone(),
                vital_probability: e.vital_probability,
                probability: e.probability,
                posterior_mean: b.posterior_mean(),
                posterior_variance: b.posterior_variance(),
                confidence: e.vital_probability,
                eliminated: e.vital_probability < policy.epsilon,
            }
        })
        .collect();
    let key = |r: &ReportRow| (r.vital_probability, r.posterior_mean);
    rows.sort_by(|a, b| {
        b.vital_probability
            .total_cmp(&a.vital_probability)
            .then(b.posterior_mean.total_cmp(&a.posterior_mean))
            .then_with(|| a.identity.cmp(&b.identity))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    let all_tied = rows.len() > 1 && rows.windows(2).all(|w| key(&w[0]) == key(&w[1]));
    let boundary_tie = rows.len() > k && key(&rows[k - 1]) == key(&rows[k]);
    Ok(Report {
        k,
        ambiguous: all_tied || boundary_tie,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::UpdateMode;

    fn store(params: &[(f64, f64)]) -> BeliefStore {
        let mut s = BeliefStore::new(0.3, UpdateMode::VerbatimEwma).unwrap();
        for (i, &(a, b)) in params.iter().enumerate() {
            s.beliefs.insert(
                SpanIdentity::new("svc", format!("op{i:02}"), "").unwrap(),
                BetaBelief::new(a, b),
            );
        }
        s
    }

    fn cfg(rows: usize, seed: u64) -> VitalSetConfig {
        VitalSetConfig {
            mc_rows: rows,
            rng_seed: seed,
            ..VitalSetConfig::default()
        }
    }

    #[test]
    fn near_degenerate_belief_concentrates() {
        let m = draw_matrix(&store(&[(1e9, 1.0)]), &cfg(2000, 1));
        assert!(m
            .column_values(0)
            .iter()
            .all(|&v| (0.999..=1.0).contains(&v)));
    }

    #[test]
    fn same_seed_same_matrix() {
        let s = store(&[(0.5, 3.0), (2.0, 2.0), (7.0, 1.0)]);
        assert_eq!(
            draw_matrix(&s, &cfg(3000, 9)),
            draw_matrix(&s, &cfg(3000, 9))
        );
        assert_ne!(
            draw_matrix(&s, &cfg(3000, 9)),
            draw_matrix(&s, &cfg(3000, 10))
        );
    }

    #[test]
    fn chunks_do_not_repeat_rows() {
        let s = store(&[(2.0, 2.0), (0.4, 0.5)]);
        for seed in [0, 3, 12345] {
            let m = draw_matrix(&s, &cfg(8 * CHUNK_ROWS, seed));
            let rows: std::collections::HashSet<(u64, u64)> = (0..m.rows)
                .map(|r| (m.logit(r, 0).to_bits(), m.logit(r, 1).to_bits()))
                .collect();
            assert_eq!(rows.len(), m.rows, "seed {seed}");
        }
    }

    #[test]
    fn fused_estimate_matches_matrix_route() {
        let params: Vec<(f64, f64)> = (0..37)
            .map(|i| (0.2 + i as f64 * 0.3, 1.0 + (i % 5) as f64))
            .collect();
        let s = store(&params);
        for p in [50.0, 75.0, 90.0, 99.0] {
            let c = VitalSetConfig {
                percentile_p: p,
                ..cfg(2500, 4)
            };
            assert_eq!(
                estimate_vital_probabilities(&s, &c),
                vital_probabilities(&draw_matrix(&s, &c), p)
            );
        }
    }

    #[test]
    fn single_span_always_vital() {
        let v = estimate_vital_probabilities(&store(&[(3.0, 9.0)]), &cfg(500, 2));
        assert_eq!(v[0].1, 1.0);
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let v = estimate_vital_probabilities(&store(&[(1.0, 1.0), (1.0, 1.0)]), &cfg(100_000, 5));
        for (_, p) in &v {
            assert!((p - 0.5).abs() < 0.02, "{p}");
        }
        assert!((v[0].1 + v[1].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fraction_sum_at_least_one() {
        let s = store(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0), (0.5, 0.5)]);
        let total: f64 = estimate_vital_probabilities(&s, &cfg(4000, 1))
            .iter()
            .map(|v| v.1)
            .sum();
        assert!(total >= 1.0);
    }

    #[test]
    fn finalize_examples() {
        let id = SpanIdentity::new("fetch", "get", "").unwrap();
        let c = VitalSetConfig::default();
        let p = finalize_policy(&[(id.clone(), 0.0)], &c, 3);
        assert_eq!(p.probability(&id), 0.05);
        assert_eq!(p.epoch, 3);
        let p = finalize_policy(&[(id.clone(), 0.91)], &c, 3);
        assert_eq!(p.probability(&id), 0.91);
        let zero = VitalSetConfig { epsilon: 0.0, ..c };
        let p = finalize_policy(&[(id.clone(), 0.37)], &zero, 3);
        assert_eq!(p.probability(&id), 0.37);
        assert_eq!(p.vital_probability(&id), Some(0.37));
    }

    #[test]
    fn report_orders_and_flags() {
        let s = store(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        let ids: Vec<SpanIdentity> = s.beliefs.keys().cloned().collect();
        let vital = vec![
            (ids[0].clone(), 0.1),
            (ids[1].clone(), 0.9),
            (ids[2].clone(), 0.5),
        ];
        let p = finalize_policy(&vital, &VitalSetConfig::default(), 1);
        let r = report(&p, &s, 1).unwrap();
        assert_eq!(r.top_k()[0].identity, ids[1]);
        assert!(!r.ambiguous);
        assert_eq!(r.rank_of(&ids[0]), Some(3));

        let vital = vec![(ids[0].clone(), 0.01), (ids[1].clone(), 0.3)];
        let p = finalize_policy(&vital, &VitalSetConfig::default(), 1);
        let r = report(&p, &s, 1).unwrap();
        assert!(r.rows[1].eliminated && !r.rows[0].eliminated);
        assert!(report(&p, &s, 0).is_err());
    }

    #[test]
    fn equal_beliefs_fall_back_to_identity_order() {
        let s = store(&[(2.0, 5.0); 4]);
        let p = compute_policy(&s, &cfg(5000, 8)).unwrap();
        let r = report(&p, &s, 2).unwrap();
        assert!(r.ambiguous);
        let order: Vec<&SpanIdentity> = r.rows.iter().map(|r| &r.identity).collect();
        let expected: Vec<&SpanIdentity> = s.beliefs.keys().collect();
        assert_eq!(order, expected);
    }

    #[test]
    fn policy_file_round_trip() {
        let s = store(&[(1.0, 4.0), (6.0, 1.0)]);
        let p = compute_policy(&s, &cfg(1000, 1)).unwrap();
        let json = serde_json::to_string(&p.to_file()).unwrap();
        assert!(json.contains("\"vitalProbability\""));
        let back = SamplingPolicy::from_file(serde_json::from_str(&json).unwrap());
        assert_eq!(back, p);
    }

    #[test]
    fn config_validation() {
        assert!(VitalSetConfig::default().validate().is_ok());
        let bad = |f: fn(&mut VitalSetConfig)| {
            let mut c = VitalSetConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.percentile_p = 100.0));
        assert!(bad(|c| c.epsilon = 1.0));
        assert!(bad(|c| c.mc_rows = 0));
    }
}
