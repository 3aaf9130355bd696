//! Span and trace data model.
//!
//! Traces are reconstructed from flat span records, validated as a tree, and
//! decomposed into per-span `self_segment` / `child_waiting` latencies. All
//! times are integer microseconds.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identity of an instrumentation point: service, operation and URL.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpanIdentity {
    pub service: String,
    pub operation: String,
    #[serde(default)]
    pub url: String,
}

impl SpanIdentity {
    pub fn new(
        service: impl Into<String>,
        operation: impl Into<String>,
        url: impl Into<String>,
    ) -> Result<Self, TraceError> {
        let id = Self {
            service: service.into(),
            operation: operation.into(),
            url: url.into(),
        };
        id.validate()?;
        Ok(id)
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        if self.service.is_empty() || self.operation.is_empty() {
            return Err(TraceError::EmptyIdentity(self.to_string()));
        }
        Ok(())
    }
}

impl fmt::Display for SpanIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.url.is_empty() {
            write!(f, "{}/{}", self.service, self.operation)
        } else {
            write!(f, "{}/{} {}", self.service, self.operation, self.url)
        }
    }
}

/// Parses the display form, `service/operation` or `service/operation url`.
impl std::str::FromStr for SpanIdentity {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, url) = s.trim().split_once(' ').unwrap_or((s.trim(), ""));
        let (service, operation) = head.split_once('/').unwrap_or((head, ""));
        Self::new(service, operation, url.trim())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanRecord {
    pub trace_id: String,
    pub span_id: String,
    pub parent_id: Option<String>,
    pub identity: SpanIdentity,
    pub start: i64,
    pub duration: i64,
    pub tags: BTreeMap<String, String>,
}

impl SpanRecord {
    pub fn end(&self) -> i64 {
        self.start + self.duration
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("empty trace")]
    EmptyTrace,
    #[error("span {span_id} belongs to trace {found}, expected {expected}")]
    MixedTraceIds {
        span_id: String,
        expected: String,
        found: String,
    },
    #[error("multiple root spans: {span_id} is a second root")]
    MultipleRoots { span_id: String },
    #[error("trace has no root span")]
    NoRoot,
    #[error("span {span_id} references missing parent")]
    OrphanSpan { span_id: String },
    #[error("cycle detected through span {span_id}")]
    CycleDetected { span_id: String },
    #[error("duplicate span id {span_id}")]
    DuplicateSpanId { span_id: String },
    #[error("span {span_id} has negative duration")]
    NegativeDuration { span_id: String },
    #[error("span identity {0:?} needs a non-empty service and operation")]
    EmptyIdentity(String),
}

/// How `build_trace` treats spans whose parent is not part of the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrphanPolicy {
    #[default]
    Reject,
    /// Attach orphans to the root, as if context had propagated through
    /// uninstrumented frames.
    ReparentToRoot,
}

/// A validated causal tree of spans sharing one trace id.
#[derive(Debug, Clone)]
pub struct Trace {
    pub trace_id: String,
    pub spans: Vec<SpanRecord>,
    /// span_id of the root.
    pub root: String,
    root_index: usize,
    children: Vec<Vec<usize>>,
}

impl Trace {
    pub fn root_span(&self) -> &SpanRecord {
        &self.spans[self.root_index]
    }

    /// Indices of the direct children of `index`, ordered by (start, span_id).
    pub fn children_of(&self, index: usize) -> &[usize] {
        &self.children[index]
    }

    pub fn is_leaf(&self, index: usize) -> bool {
        self.children[index].is_empty()
    }

    /// Span indices in tree preorder; children visited by (start, span_id).
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.spans.len());
        let mut stack = vec![self.root_index];
        while let Some(i) = stack.pop() {
            out.push(i);
            for &c in self.children[i].iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Parent span index of each span, `None` for the root.
    pub fn parent_indices(&self) -> Vec<Option<usize>> {
        let mut parents = vec![None; self.spans.len()];
        for (p, kids) in self.children.iter().enumerate() {
            for &c in kids {
                parents[c] = Some(p);
            }
        }
        parents
    }
}

pub fn build_trace(records: Vec<SpanRecord>) -> Result<Trace, TraceError> {
    build_trace_with(records, OrphanPolicy::Reject)
}

pub fn build_trace_with(
    mut records: Vec<SpanRecord>,
    orphans: OrphanPolicy,
) -> Result<Trace, TraceError> {
    let first = records.first().ok_or(TraceError::EmptyTrace)?;
    let trace_id = first.trace_id.clone();

    let mut index: HashMap<String, usize> = HashMap::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if r.trace_id != trace_id {
            return Err(TraceError::MixedTraceIds {
                span_id: r.span_id.clone(),
                expected: trace_id,
                found: r.trace_id.clone(),
            });
        }
        if r.duration < 0 {
            return Err(TraceError::NegativeDuration {
                span_id: r.span_id.clone(),
            });
        }
        r.identity.validate()?;
        if index.insert(r.span_id.clone(), i).is_some() {
            return Err(TraceError::DuplicateSpanId {
                span_id: r.span_id.clone(),
            });
        }
    }

    // Resolve parents; orphans are either rejected or collected for re-parenting.
    let mut parent: Vec<Option<usize>> = Vec::with_capacity(records.len());
    let mut orphan_rows = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match &r.parent_id {
            None => parent.push(None),
            Some(pid) => match index.get(pid) {
                Some(&p) => parent.push(Some(p)),
                None => match orphans {
                    OrphanPolicy::Reject => {
                        return Err(TraceError::OrphanSpan {
                            span_id: r.span_id.clone(),
                        })
                    }
                    OrphanPolicy::ReparentToRoot => {
                        parent.push(None);
                        orphan_rows.push(i);
                    }
                },
            },
        }
    }

    // Cycle check: walk parent chains, colouring nodes 0 = unseen, 1 = on path, 2 = done.
    let mut state = vec![0u8; records.len()];
    for start in 0..records.len() {
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match state[i] {
                2 => break,
                1 => {
                    return Err(TraceError::CycleDetected {
                        span_id: records[i].span_id.clone(),
                    })
                }
                _ => {
                    state[i] = 1;
                    path.push(i);
                    cur = parent[i];
                }
            }
        }
        for i in path {
            state[i] = 2;
        }
    }

    let mut root = None;
    for (i, p) in parent.iter().enumerate() {
        if p.is_none() && !orphan_rows.contains(&i) {
            if root.is_some() {
                return Err(TraceError::MultipleRoots {
                    span_id: records[i].span_id.clone(),
                });
            }
            root = Some(i);
        }
    }
    let root_index = root.ok_or(TraceError::NoRoot)?;
    let root_id = records[root_index].span_id.clone();
    for &i in &orphan_rows {
        parent[i] = Some(root_index);
        records[i].parent_id = Some(root_id.clone());
    }

    let mut children = vec![Vec::new(); records.len()];
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(i);
        }
    }
    for kids in &mut children {
        kids.sort_by(|&a, &b| {
            (records[a].start, &records[a].span_id).cmp(&(records[b].start, &records[b].span_id))
        });
    }

    Ok(Trace {
        trace_id,
        spans: records,
        root: root_id,
        root_index,
        children,
    })
}

/// Measure of the union of `[start, end]` intervals.
pub fn union_duration(intervals: &[(i64, i64)]) -> i64 {
    let mut sorted: Vec<(i64, i64)> = intervals.iter().copied().filter(|(s, e)| e > s).collect();
    sorted.sort_unstable();
    let mut total = 0;
    let mut current: Option<(i64, i64)> = None;
    for (s, e) in sorted {
        match current {
            Some((cs, ce)) if s <= ce => current = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                current = Some((s, e));
            }
            None => current = Some((s, e)),
        }
    }
    if let Some((cs, ce)) = current {
        total += ce - cs;
    }
    total
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecomposedSpan {
    pub span_id: String,
    pub identity: SpanIdentity,
    pub duration: i64,
    pub child_waiting: i64,
    pub self_segment: i64,
}

/// Split each span's duration into time spent waiting on children and time
/// spent in the span itself. Child intervals are clipped to the parent.
/// Output is in tree preorder.
pub fn decompose(trace: &Trace) -> Vec<DecomposedSpan> {
    trace
        .preorder()
        .into_iter()
        .map(|i| {
            let span = &trace.spans[i];
            let (ps, pe) = (span.start, span.end());
            let clipped: Vec<(i64, i64)> = trace
                .children_of(i)
                .iter()
                .map(|&c| {
                    let child = &trace.spans[c];
                    (child.start.clamp(ps, pe), child.end().clamp(ps, pe))
                })
                .collect();
            let child_waiting = union_duration(&clipped);
            DecomposedSpan {
                span_id: span.span_id.clone(),
                identity: span.identity.clone(),
                duration: span.duration,
                child_waiting,
                self_segment: span.duration - child_waiting,
            }
        })
        .collect()
}

pub fn end_to_end_latency(trace: &Trace) -> i64 {
    trace.root_span().duration
}

// ---------------------------------------------------------------------------
// JSONL trace format

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SpanLine {
    trace_id: String,
    span_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent_id: Option<String>,
    service: String,
    operation: String,
    #[serde(default)]
    url: String,
    start_us: i64,
    duration_us: i64,
    #[serde(default)]
    tags: BTreeMap<String, String>,
}

impl From<&SpanRecord> for SpanLine {
    fn from(r: &SpanRecord) -> Self {
        Self {
            trace_id: r.trace_id.clone(),
            span_id: r.span_id.clone(),
            parent_id: r.parent_id.clone(),
            service: r.identity.service.clone(),
            operation: r.identity.operation.clone(),
            url: r.identity.url.clone(),
            start_us: r.start,
            duration_us: r.duration,
            tags: r.tags.clone(),
        }
    }
}

impl From<SpanLine> for SpanRecord {
    fn from(l: SpanLine) -> Self {
        Self {
            trace_id: l.trace_id,
            span_id: l.span_id,
            parent_id: l.parent_id,
            identity: SpanIdentity {
                service: l.service,
                operation: l.operation,
                url: l.url,
            },
            start: l.start_us,
            duration: l.duration_us,
            tags: l.tags,
        }
    }
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("trace {trace_id}: {source}")]
    Trace {
        trace_id: String,
        #[source]
        source: TraceError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl JsonlError {
    pub fn line(&self) -> Option<usize> {
        match self {
            JsonlError::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Read span lines (1-based line numbers in errors). Blank lines are skipped.
pub fn read_span_records<R: BufRead>(reader: R) -> Result<Vec<SpanRecord>, JsonlError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SpanLine = serde_json::from_str(&line).map_err(|source| JsonlError::Parse {
            line: n + 1,
            source,
        })?;
        out.push(parsed.into());
    }
    Ok(out)
}

/// Group records by trace id (first-appearance order) and build each trace.
pub fn group_traces(
    records: Vec<SpanRecord>,
    orphans: OrphanPolicy,
) -> Result<Vec<Trace>, JsonlError> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<SpanRecord>> = HashMap::new();
    for r in records {
        let entry = groups.entry(r.trace_id.clone()).or_insert_with(|| {
            order.push(r.trace_id.clone());
            Vec::new()
        });
        entry.push(r);
    }
    order
        .into_iter()
        .map(|id| {
            let spans = groups.remove(&id).unwrap_or_default();
            build_trace_with(spans, orphans).map_err(|source| JsonlError::Trace {
                trace_id: id,
                source,
            })
        })
        .collect()
}

pub fn read_traces<R: BufRead>(reader: R, orphans: OrphanPolicy) -> Result<Vec<Trace>, JsonlError> {
    group_traces(read_span_records(reader)?, orphans)
}

/// Write traces as JSONL, one span per line, in tree preorder.
pub fn write_traces<W: Write>(mut writer: W, traces: &[Trace]) -> std::io::Result<()> {
    for trace in traces {
        for i in trace.preorder() {
            let line = SpanLine::from(&trace.spans[i]);
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
        }
    }
    Ok(())
}
