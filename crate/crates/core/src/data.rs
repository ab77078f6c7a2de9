//! Instance records, pools of trained instances, and run configuration.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label used for the unmutated model.
pub const IDENTITY: &str = "identity";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum MetricKind {
    Accuracy,
    Error,
    Angle,
    Custom,
}

impl MetricKind {
    pub fn default_orientation(self) -> Orientation {
        match self {
            MetricKind::Accuracy | MetricKind::Custom => Orientation::HigherBetter,
            MetricKind::Error | MetricKind::Angle => Orientation::LowerBetter,
        }
    }

    /// Range a metric of this kind must fall in unless a pool declares its own.
    pub fn default_range(self) -> MetricRange {
        match self {
            MetricKind::Accuracy => MetricRange { lo: 0.0, hi: 1.0 },
            MetricKind::Error => MetricRange { lo: 0.0, hi: f64::INFINITY },
            MetricKind::Angle => MetricRange { lo: 0.0, hi: 360.0 },
            MetricKind::Custom => MetricRange { lo: f64::NEG_INFINITY, hi: f64::INFINITY },
        }
    }
}

/// Closed interval a metric must lie in. Violations are rejected, never clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MetricRange {
    pub lo: f64,
    pub hi: f64,
}

impl MetricRange {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Evaluation of one trained instance on the fixed test set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct InstanceRecord {
    pub instance_id: String,
    /// Training seed; metadata only.
    pub seed: Option<u64>,
    pub metric: f64,
    /// Per-test-input correctness, when available.
    pub outcomes: Option<Vec<bool>>,
}

impl InstanceRecord {
    pub fn new(instance_id: impl Into<String>, metric: f64) -> Self {
        Self { instance_id: instance_id.into(), seed: None, metric, outcomes: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_outcomes(mut self, outcomes: Vec<bool>) -> Self {
        self.outcomes = Some(outcomes);
        self
    }
}

fn outcome_mean(outcomes: &[bool]) -> f64 {
    outcomes.iter().filter(|&&o| o).count() as f64 / outcomes.len() as f64
}

/// Fills `metric` with the fraction of correct outcomes for every record.
pub fn derive_metric(records: &mut [InstanceRecord]) -> Result<()> {
    for rec in records.iter_mut() {
        match rec.outcomes.as_deref() {
            None => {
                return Err(Error::data(format!("instance {}: no outcomes to derive a metric from", rec.instance_id)))
            }
            Some([]) => return Err(Error::data(format!("instance {}: empty outcomes vector", rec.instance_id))),
            Some(o) => rec.metric = outcome_mean(o),
        }
    }
    Ok(())
}

/// Descriptive header of a pool: what was mutated, how, and how the metric reads.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PoolMeta {
    pub label: String,
    pub mutation_operator: String,
    pub magnitude: Option<String>,
    pub metric_kind: MetricKind,
    pub orientation: Orientation,
    pub range: MetricRange,
}

impl PoolMeta {
    pub fn new(label: impl Into<String>, mutation_operator: impl Into<String>, metric_kind: MetricKind) -> Self {
        Self {
            label: label.into(),
            mutation_operator: mutation_operator.into(),
            magnitude: None,
            metric_kind,
            orientation: metric_kind.default_orientation(),
            range: metric_kind.default_range(),
        }
    }

    pub fn identity(label: impl Into<String>, metric_kind: MetricKind) -> Self {
        Self::new(label, IDENTITY, metric_kind)
    }

    pub fn with_magnitude(mut self, magnitude: impl Into<String>) -> Self {
        self.magnitude = Some(magnitude.into());
        self
    }
}

/// Validated population of trained-instance evaluations for one
/// (model, mutation, magnitude) triple. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub struct InstancePool {
    meta: PoolMeta,
    records: Vec<InstanceRecord>,
}

impl InstancePool {
    /// Validates `records` against the pool invariants.
    ///
    /// Errors name the offending row (0-based record index).
    pub fn new(meta: PoolMeta, records: Vec<InstanceRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::data(format!("pool '{}': empty pool", meta.label)));
        }
        let mut seen = BTreeSet::new();
        let mut outcome_len = None;
        for (row, rec) in records.iter().enumerate() {
            if rec.instance_id.is_empty() {
                return Err(Error::data(format!("pool '{}', row {row}: missing instance_id", meta.label)));
            }
            if !seen.insert(rec.instance_id.as_str()) {
                return Err(Error::data(format!(
                    "pool '{}', row {row}: duplicate instance_id '{}'",
                    meta.label, rec.instance_id
                )));
            }
            if !rec.metric.is_finite() {
                return Err(Error::data(format!(
                    "pool '{}', row {row}: non-finite metric for '{}'",
                    meta.label, rec.instance_id
                )));
            }
            if !meta.range.contains(rec.metric) {
                return Err(Error::data(format!(
                    "pool '{}', row {row}: metric {} outside declared range [{}, {}]",
                    meta.label, rec.metric, meta.range.lo, meta.range.hi
                )));
            }
            if let Some(outcomes) = &rec.outcomes {
                match outcome_len {
                    None => outcome_len = Some(outcomes.len()),
                    Some(len) if len != outcomes.len() => {
                        return Err(Error::data(format!(
                            "pool '{}', row {row}: ragged outcomes ({} vs {len})",
                            meta.label,
                            outcomes.len()
                        )))
                    }
                    Some(_) => {}
                }
                if outcomes.is_empty() {
                    return Err(Error::data(format!("pool '{}', row {row}: empty outcomes vector", meta.label)));
                }
                if meta.metric_kind == MetricKind::Accuracy {
                    let derived = outcome_mean(outcomes);
                    if libm::fabs(derived - rec.metric) > 1e-12 {
                        return Err(Error::data(format!(
                            "pool '{}', row {row}: metric {} disagrees with outcomes ({derived})",
                            meta.label, rec.metric
                        )));
                    }
                }
            } else if outcome_len.is_some() {
                return Err(Error::data(format!(
                    "pool '{}', row {row}: outcomes missing while other rows have them",
                    meta.label
                )));
            }
        }
        Ok(Self { meta, records })
    }

    pub fn meta(&self) -> &PoolMeta {
        &self.meta
    }

    pub fn label(&self) -> &str {
        &self.meta.label
    }

    pub fn is_identity(&self) -> bool {
        self.meta.mutation_operator == IDENTITY
    }

    pub fn records(&self) -> &[InstanceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn metrics(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.metric).collect()
    }

    /// Builds a sub-pool from record indices (which must be distinct).
    pub fn subset(&self, indices: &[usize], label: impl Into<String>) -> Result<Self> {
        let mut meta = self.meta.clone();
        meta.label = label.into();
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Self::new(meta, records)
    }

    /// Disjoint 50/50 split by sorted `instance_id`: the lexicographically
    /// smaller half first. Both halves are identity pools. With an odd count
    /// the extra record goes to the second half.
    pub fn split_halves(&self) -> Result<(Self, Self)> {
        if self.records.len() < 2 {
            return Err(Error::data(format!("pool '{}': need at least 2 records to split", self.meta.label)));
        }
        let mut order: Vec<usize> = (0..self.records.len()).collect();
        order.sort_by(|&a, &b| self.records[a].instance_id.cmp(&self.records[b].instance_id));
        let half = self.records.len() / 2;
        let mut first = self.subset(&order[..half], format!("{}-A", self.meta.label))?;
        let mut second = self.subset(&order[half..], format!("{}-B", self.meta.label))?;
        first.meta.mutation_operator = IDENTITY.to_string();
        second.meta.mutation_operator = IDENTITY.to_string();
        Ok((first, second))
    }
}

/// Parameters of one probabilistic mutation-testing run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct RunConfig {
    /// Trials per Binomial experiment (N).
    #[cfg_attr(feature = "serde", serde(alias = "N"))]
    pub trials: u32,
    /// Bootstrap repetitions (B).
    #[cfg_attr(feature = "serde", serde(alias = "B"))]
    pub bootstraps: u32,
    /// Healthy instances per trial.
    pub n1: usize,
    /// Mutant instances per trial.
    pub n2: usize,
    pub prior_a: f64,
    pub prior_b: f64,
    pub ci_level: f64,
    /// Mutation-score threshold on the similarity ratio.
    pub theta: f64,
    pub master_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            bootstraps: 100,
            n1: 20,
            n2: 20,
            prior_a: 1.0,
            prior_b: 1.0,
            ci_level: 0.95,
            theta: 1.15,
            master_seed: 0,
        }
    }
}

impl RunConfig {
    /// The neutral Beta(1/3, 1/3) prior alternative.
    pub fn with_neutral_prior(mut self) -> Self {
        self.prior_a = 1.0 / 3.0;
        self.prior_b = 1.0 / 3.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.bootstraps == 0 || self.n1 == 0 || self.n2 == 0 {
            return Err(Error::config("trials, bootstraps, n1 and n2 must all be at least 1"));
        }
        if !(self.prior_a > 0.0 && self.prior_a.is_finite() && self.prior_b > 0.0 && self.prior_b.is_finite()) {
            return Err(Error::config(format!(
                "prior parameters must be positive and finite (got {}, {})",
                self.prior_a, self.prior_b
            )));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::config(format!("ci_level must lie in (0, 1), got {}", self.ci_level)));
        }
        if self.theta.is_nan() || self.theta <= 0.0 {
            return Err(Error::config(format!("theta must be positive, got {}", self.theta)));
        }
        Ok(())
    }

    /// Checks the configuration against the pool sizes it will sample from.
    pub fn validate_for(&self, healthy_len: usize, mutant_len: usize) -> Result<()> {
        self.validate()?;
        if self.n1 > healthy_len {
            return Err(Error::config(format!("n1 = {} exceeds healthy pool size {healthy_len}", self.n1)));
        }
        if self.n2 > mutant_len {
            return Err(Error::config(format!("n2 = {} exceeds mutant pool size {mutant_len}", self.n2)));
        }
        Ok(())
    }
}
