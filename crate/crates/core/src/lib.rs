//! Span-level adaptive sampling for distributed tracing.
//!
//! Beta beliefs over per-span utility drive a Monte-Carlo, probability-matching
//! policy that decides which spans to record.

pub mod abs;
pub mod baselines;
pub mod belief;
pub mod experiment;
pub mod simulator;
pub mod tags;
pub mod trace_model;
pub mod utility;
