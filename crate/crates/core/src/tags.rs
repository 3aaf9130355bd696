//! Tag/latency correlation.
//!
//! Each trace becomes one row; each `identity.tag_key` pair seen in the batch
//! becomes one column. Categorical tags are label-encoded (0..k−1 in
//! lexicographic order), which imposes an arbitrary order on unordered
//! categories. Correlation is plain Pearson r against end-to-end latency.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::trace_model::{end_to_end_latency, Trace};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TagError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagColumn {
    /// `service/operation[ url].tag_key`
    pub name: String,
    pub kind: ColumnKind,
    /// Sorted distinct values of a categorical column (code = index).
    pub categories: Vec<String>,
    /// Code used for traces lacking the tag: `k` for categorical columns,
    /// one above the largest value for numeric ones.
    pub missing_code: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagMatrix {
    pub trace_ids: Vec<String>,
    pub columns: Vec<TagColumn>,
    /// End-to-end latency (µs) per row.
    pub target: Vec<f64>,
}

impl TagMatrix {
    pub fn rows(&self) -> usize {
        self.target.len()
    }

    pub fn column(&self, name: &str) -> Option<&TagColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Tag values of one trace, first occurrence of each column in preorder.
fn trace_tags(trace: &Trace) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for i in trace.preorder() {
        let s = &trace.spans[i];
        for (k, v) in &s.tags {
            out.entry(format!("{}.{}", s.identity, k))
                .or_insert_with(|| v.clone());
        }
    }
    out
}

/// Rows are ordered by trace id so the matrix does not depend on input order.
pub fn build_tag_matrix(traces: &[Trace]) -> TagMatrix {
    let mut rows: Vec<(&str, BTreeMap<String, String>, f64)> = traces
        .iter()
        .map(|t| {
            (
                t.trace_id.as_str(),
                trace_tags(t),
                end_to_end_latency(t) as f64,
            )
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(b.0));

    let keys: BTreeSet<&String> = rows.iter().flat_map(|r| r.1.keys()).collect();
    let columns = keys
        .into_iter()
        .map(|key| {
            let present: Vec<Option<&String>> = rows.iter().map(|r| r.1.get(key)).collect();
            let numbers: Option<Vec<f64>> = present
                .iter()
                .flatten()
                .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect();
            match numbers {
                Some(nums) => {
                    let missing = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
                    TagColumn {
                        name: key.clone(),
                        kind: ColumnKind::Numeric,
                        categories: Vec::new(),
                        missing_code: missing,
                        values: present
                            .iter()
                            .map(|v| {
                                v.map_or(missing, |s| s.trim().parse().expect("checked numeric"))
                            })
                            .collect(),
                    }
                }
                None => {
                    let categories: Vec<String> = present
                        .iter()
                        .flatten()
                        .map(|s| (*s).clone())
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    let missing = categories.len() as f64;
                    let values = present
                        .iter()
                        .map(|v| {
                            v.map_or(missing, |s| {
                                categories.binary_search(s).expect("known category") as f64
                            })
                        })
                        .collect();
                    TagColumn {
                        name: key.clone(),
                        kind: ColumnKind::Categorical,
                        categories,
                        missing_code: missing,
                        values,
                    }
                }
            }
        })
        .collect();

    TagMatrix {
        trace_ids: rows.iter().map(|r| r.0.to_string()).collect(),
        columns,
        target: rows.iter().map(|r| r.2).collect(),
    }
}

/// Pearson r; 0 when either vector has zero variance (or fewer than two
/// points).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, TagError> {
    if x.len() != y.len() {
        return Err(TagError::LengthMismatch(x.len(), y.len()));
    }
    Ok(pearson_unchecked(x, y))
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

fn has_variance(xs: &[f64]) -> bool {
    xs.windows(2).any(|w| w[0] != w[1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEntry {
    pub column: String,
    pub r: f64,
    pub n: usize,
    pub significant: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub threshold: f64,
    /// Sorted by |r| descending, then by column name.
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationReport {
    pub fn significant(&self) -> impl Iterator<Item = &CorrelationEntry> {
        self.entries.iter().filter(|e| e.significant)
    }

    pub fn rank_of(&self, column: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.column == column)
            .map(|i| i + 1)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["column", "r", "n", "significant"])?;
        for e in &self.entries {
            w.write_record([
                e.column.clone(),
                format!("{:.6}", e.r),
                e.n.to_string(),
                e.significant.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn correlation_report(matrix: &TagMatrix, threshold: f64) -> CorrelationReport {
    let target_varies = has_variance(&matrix.target);
    let mut entries: Vec<CorrelationEntry> = matrix
        .columns
        .iter()
        .map(|c| {
            let degenerate = !target_varies || !has_variance(&c.values);
            let r = if degenerate {
                0.0
            } else {
                pearson_unchecked(&c.values, &matrix.target)
            };
            CorrelationEntry {
                column: c.name.clone(),
                r,
                n: c.values.len(),
                significant: !degenerate && r.abs() >= threshold,
                degenerate,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.r.abs()
            .total_cmp(&a.r.abs())
            .then_with(|| a.column.cmp(&b.column))
    });
    CorrelationReport { threshold, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::{build_trace, SpanIdentity, SpanRecord};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn trace(id: &str, latency: i64, tags: &[(&str, &str)]) -> Trace {
        build_trace(vec![SpanRecord {
            trace_id: id.into(),
            span_id: "r".into(),
            parent_id: None,
            identity: SpanIdentity::new("front", "get", "").unwrap(),
            start: 0,
            duration: latency,
            tags: tags
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }])
        .unwrap()
    }

    #[test]
    fn pearson_examples() {
        assert_relative_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_relative_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[3.0, 2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(
            pearson(&[1.0], &[1.0, 2.0]),
            Err(TagError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn encodings() {
        let ts = vec![
            trace("a", 10, &[("version", "v2"), ("n", "10")]),
            trace("b", 20, &[("version", "v1"), ("n", "2")]),
            trace("c", 30, &[("n", "3")]),
        ];
        let m = build_tag_matrix(&ts);
        let v = m.column("front/get.version").unwrap();
        assert_eq!(v.kind, ColumnKind::Categorical);
        assert_eq!(v.categories, vec!["v1", "v2"]);
        assert_eq!(v.values, vec![1.0, 0.0, 2.0]);
        let n = m.column("front/get.n").unwrap();
        assert_eq!(n.kind, ColumnKind::Numeric);
        assert_eq!(n.values, vec![10.0, 2.0, 3.0]);
        assert!(m.column("front/get.absent").is_none());
        assert_eq!(m.target, vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn order_independent() {
        let a = vec![trace("x", 5, &[("k", "p")]), trace("y", 7, &[("k", "q")])];
        let b = vec![a[1].clone(), a[0].clone()];
        assert_eq!(build_tag_matrix(&a), build_tag_matrix(&b));
    }

    #[test]
    fn report_ranks_and_flags() {
        let ts: Vec<Trace> = (0..10)
            .map(|i| {
                let lat = 100 + i * 10;
                let level = i.to_string();
                let other = if i % 3 == 0 { "a" } else { "b" };
                trace(
                    &format!("t{i}"),
                    lat,
                    &[("level", &level), ("const", "c"), ("other", other)],
                )
            })
            .collect();
        let rep = correlation_report(&build_tag_matrix(&ts), DEFAULT_THRESHOLD);
        assert_eq!(rep.entries[0].column, "front/get.level");
        assert_relative_eq!(rep.entries[0].r, 1.0, epsilon = 1e-12);
        let c = rep
            .entries
            .iter()
            .find(|e| e.column == "front/get.const")
            .unwrap();
        assert!(c.degenerate && c.r == 0.0 && !c.significant);

        let flat: Vec<Trace> = (0..4)
            .map(|i| trace(&format!("t{i}"), 100 + i, &[("const", "c")]))
            .collect();
        assert_eq!(
            correlation_report(&build_tag_matrix(&flat), 0.5)
                .significant()
                .count(),
            0
        );
    }

    proptest! {
        #[test]
        fn pearson_properties(
            pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40),
            scale in 0.1f64..10.0,
            shift in -100.0f64..100.0,
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let r = pearson(&x, &y).unwrap();
            prop_assert!(r.abs() <= 1.0);
            prop_assert!((r - pearson(&y, &x).unwrap()).abs() < 1e-12);
            let xs: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
            prop_assert!((pearson(&xs, &y).unwrap() - r).abs() < 1e-9);
            let xn: Vec<f64> = x.iter().map(|v| -v * scale + shift).collect();
            prop_assert!((pearson(&xn, &y).unwrap() + r).abs() < 1e-9);
        }
    }
}
