//! Beta beliefs over normalized span utility and the batched update rule.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace_model::SpanIdentity;
use crate::utility::UtilityEstimate;

/// Lower bound applied to both parameters after every update.
pub const PARAM_FLOOR: f64 = 1e-9;
pub const DEFAULT_LAMBDA: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("normalized utility {value} for {identity} is outside [0, 1]")]
    NormalizationOutOfRange { identity: String, value: f64 },
    #[error("lambda {0} must lie in (0, 1]")]
    InvalidLambda(f64),
    #[error("unknown update mode {0:?}")]
    UnknownMode(String),
    #[error("invalid belief for {identity}: alpha {alpha}, beta {beta}")]
    InvalidParameters {
        identity: String,
        alpha: f64,
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBelief {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BetaBelief {
    fn default() -> Self {
        init_belief()
    }
}

impl BetaBelief {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn posterior_mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn posterior_variance(&self) -> f64 {
        posterior_variance(self)
    }

    /// One update step under `mode` with forgetting factor `lambda`.
    pub fn updated(&self, u: f64, lambda: f64, mode: UpdateMode) -> Self {
        let keep = 1.0 - lambda;
        let (a, b) = match mode {
            UpdateMode::VerbatimEwma => (
                keep * self.alpha + lambda * u,
                keep * self.beta + lambda * (1.0 - u),
            ),
            UpdateMode::DiscountedCount => (keep * self.alpha + u, keep * self.beta + (1.0 - u)),
        };
        Self {
            alpha: a.max(PARAM_FLOOR),
            beta: b.max(PARAM_FLOOR),
        }
    }
}

/// Uninformative Beta(1, 1) prior.
pub fn init_belief() -> BetaBelief {
    BetaBelief {
        alpha: 1.0,
        beta: 1.0,
    }
}

pub fn posterior_variance(b: &BetaBelief) -> f64 {
    let s = b.alpha + b.beta;
    b.alpha * b.beta / (s * s * (s + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// α ← (1−λ)α + λu, β ← (1−λ)β + λ(1−u).
    #[default]
    VerbatimEwma,
    /// α ← (1−λ)α + u, β ← (1−λ)β + (1−u); effective sample size 1/λ.
    DiscountedCount,
}

impl UpdateMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            UpdateMode::VerbatimEwma => "verbatim_ewma",
            UpdateMode::DiscountedCount => "discounted_count",
        }
    }
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UpdateMode {
    type Err = BeliefError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verbatim_ewma" | "verbatim" => Ok(Self::VerbatimEwma),
            "discounted_count" | "discounted" => Ok(Self::DiscountedCount),
            other => Err(BeliefError::UnknownMode(other.to_string())),
        }
    }
}

/// All learned state: one belief per identity ever observed.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefStore {
    pub epoch: u64,
    pub lambda: f64,
    pub mode: UpdateMode,
    pub beliefs: BTreeMap<SpanIdentity, BetaBelief>,
}

impl Default for BeliefStore {
    fn default() -> Self {
        Self {
            epoch: 0,
            lambda: DEFAULT_LAMBDA,
            mode: UpdateMode::default(),
            beliefs: BTreeMap::new(),
        }
    }
}

impl BeliefStore {
    pub fn new(lambda: f64, mode: UpdateMode) -> Result<Self, BeliefError> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(BeliefError::InvalidLambda(lambda));
        }
        Ok(Self {
            lambda,
            mode,
            ..Self::default()
        })
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn get(&self, id: &SpanIdentity) -> Option<&BetaBelief> {
        self.beliefs.get(id)
    }

    /// Register identities at the prior without updating them.
    pub fn observe<'a>(&mut self, ids: impl IntoIterator<Item = &'a SpanIdentity>) {
        for id in ids {
            self.beliefs.entry(id.clone()).or_insert_with(init_belief);
        }
    }

    /// Apply one batch of normalized utilities. Identities absent from the
    /// batch keep their beliefs. Inputs are validated before anything changes.
    pub fn update_epoch(&mut self, estimates: &[UtilityEstimate]) -> Result<(), BeliefError> {
        for e in estimates {
            if !(0.0..=1.0).contains(&e.normalized) {
                return Err(BeliefError::NormalizationOutOfRange {
                    identity: e.identity.to_string(),
                    value: e.normalized,
                });
            }
        }
        for e in estimates {
            let b = self
                .beliefs
                .entry(e.identity.clone())
                .or_insert_with(init_belief);
            *b = b.updated(e.normalized, self.lambda, self.mode);
        }
        self.epoch += 1;
        Ok(())
    }

    pub fn to_snapshot(&self) -> BeliefSnapshot {
        BeliefSnapshot {
            epoch: self.epoch,
            lambda: self.lambda,
            mode: self.mode,
            beliefs: self
                .beliefs
                .iter()
                .map(|(id, b)| BeliefEntry {
                    service: id.service.clone(),
                    operation: id.operation.clone(),
                    url: id.url.clone(),
                    alpha: b.alpha,
                    beta: b.beta,
                })
                .collect(),
        }
    }

    pub fn from_snapshot(s: BeliefSnapshot) -> Result<Self, BeliefError> {
        let mut store = Self::new(s.lambda, s.mode)?;
        store.epoch = s.epoch;
        for e in s.beliefs {
            let id = SpanIdentity {
                service: e.service,
                operation: e.operation,
                url: e.url,
            };
            if !(e.alpha > 0.0 && e.beta > 0.0 && e.alpha.is_finite() && e.beta.is_finite()) {
                return Err(BeliefError::InvalidParameters {
                    identity: id.to_string(),
                    alpha: e.alpha,
                    beta: e.beta,
                });
            }
            store.beliefs.insert(id, BetaBelief::new(e.alpha, e.beta));
        }
        Ok(store)
    }
}

/// Persisted form of a [`BeliefStore`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub epoch: u64,
    pub lambda: f64,
    pub mode: UpdateMode,
    pub beliefs: Vec<BeliefEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefEntry {
    pub service: String,
    pub operation: String,
    #[serde(default)]
    pub url: String,
    pub alpha: f64,
    pub beta: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn est(op: &str, u: f64) -> UtilityEstimate {
        UtilityEstimate {
            identity: SpanIdentity::new("s", op, "").unwrap(),
            sample_count: 2,
            raw: u,
            normalized: u,
        }
    }

    #[test]
    fn prior() {
        let b = init_belief();
        assert_eq!((b.alpha, b.beta), (1.0, 1.0));
        assert_eq!(b.posterior_mean(), 0.5);
        assert_relative_eq!(b.posterior_variance(), 1.0 / 12.0);
    }

    #[test]
    fn update_arithmetic() {
        let b = init_belief().updated(1.0, 0.5, UpdateMode::VerbatimEwma);
        assert_eq!((b.alpha, b.beta), (1.0, 0.5));
        let b = init_belief().updated(0.5, 1.0, UpdateMode::VerbatimEwma);
        assert_eq!((b.alpha, b.beta), (0.5, 0.5));
        let b = init_belief().updated(1.0, 0.5, UpdateMode::DiscountedCount);
        assert_eq!((b.alpha, b.beta), (1.5, 0.5));
    }

    #[test]
    fn floor_applies() {
        let b = init_belief().updated(1.0, 1.0, UpdateMode::VerbatimEwma);
        assert_eq!(b.beta, PARAM_FLOOR);
    }

    #[test]
    fn variance_closed_form() {
        assert_relative_eq!(posterior_variance(&BetaBelief::new(2.0, 2.0)), 0.05);
        // 71·31 / (102² · 103)
        let v = posterior_variance(&BetaBelief::new(71.0, 31.0));
        assert_relative_eq!(v, 2201.0 / 1_071_612.0);
        assert!((v - 0.0021).abs() < 5e-5);
    }

    #[test]
    fn store_update_rules() {
        let mut store = BeliefStore::new(0.5, UpdateMode::VerbatimEwma).unwrap();
        store.update_epoch(&[est("a", 1.0), est("b", 0.0)]).unwrap();
        assert_eq!(store.epoch, 1);
        store.update_epoch(&[est("a", 1.0)]).unwrap();
        let b = store.get(&est("b", 0.0).identity).unwrap();
        assert_eq!((b.alpha, b.beta), (0.5, 1.0));
        assert_eq!(store.epoch, 2);

        let before = store.clone();
        let err = store
            .update_epoch(&[est("a", 0.3), est("c", 1.5)])
            .unwrap_err();
        assert!(matches!(err, BeliefError::NormalizationOutOfRange { .. }));
        assert_eq!(store, before);
        assert!(BeliefStore::new(0.0, UpdateMode::VerbatimEwma).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut store = BeliefStore::new(0.3, UpdateMode::DiscountedCount).unwrap();
        store.update_epoch(&[est("a", 0.7), est("b", 0.1)]).unwrap();
        let json = serde_json::to_string(&store.to_snapshot()).unwrap();
        assert!(json.contains("\"mode\":\"discounted_count\""));
        let back = BeliefStore::from_snapshot(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, store);
    }

    proptest! {
        #[test]
        fn updates_are_identity_local(u in 0.0f64..=1.0, v in 0.0f64..=1.0, lambda in 0.01f64..=1.0) {
            let mut store = BeliefStore::new(lambda, UpdateMode::VerbatimEwma).unwrap();
            store.update_epoch(&[est("a", u), est("b", v)]).unwrap();
            let b_before = *store.get(&est("b", 0.0).identity).unwrap();
            store.update_epoch(&[est("a", 1.0 - u)]).unwrap();
            prop_assert_eq!(*store.get(&est("b", 0.0).identity).unwrap(), b_before);
        }

        #[test]
        fn verbatim_mass_contracts_toward_one(u in 0.0f64..=1.0, lambda in 0.05f64..0.95) {
            let mut b = init_belief();
            let mut gap = (b.alpha + b.beta - 1.0).abs();
            for _ in 0..30 {
                b = b.updated(u, lambda, UpdateMode::VerbatimEwma);
                let next = (b.alpha + b.beta - 1.0).abs();
                if b.alpha > PARAM_FLOOR && b.beta > PARAM_FLOOR {
                    prop_assert!((next - gap * (1.0 - lambda)).abs() < 1e-12);
                }
                gap = next;
            }
        }
    }
}
