//! Rerun experiment showing that a single mutation test is flaky.
//!
//! The healthy pool is split at random into two disjoint halves; the first half
//! plays "healthy", the second half plays an "unknown" pool that is in truth
//! healthy. `k` instances from the healthy half are tested against `k` from the
//! unknown pool, `n_samplings` times, and the kill rate is averaged. The whole
//! procedure repeats for `n_partitions` random splits. Real mutant pools are
//! tested against the same healthy halves. A stable test would give rates of
//! exactly 0 or 1.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::data::InstancePool;
use crate::error::{Error, Result};
use crate::mutation_test::MutationTest;
use crate::posterior::count_kills;
use crate::rng::SplitStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FlakinessConfig {
    /// Instances per side in each comparison.
    pub k: usize,
    pub n_samplings: u32,
    pub n_partitions: usize,
}

impl Default for FlakinessConfig {
    fn default() -> Self {
        Self { k: 20, n_samplings: 100, n_partitions: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FlakinessColumn {
    pub label: String,
    /// Kill rate of each partition repetition.
    pub per_partition: Vec<f64>,
    pub mean_kill_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FlakinessTable {
    pub config: FlakinessConfig,
    /// Healthy half against the other healthy half.
    pub identity: FlakinessColumn,
    /// One column per unknown pool, in input order.
    pub unknowns: Vec<FlakinessColumn>,
}

/// Runs the rerun experiment. Partition `p` draws from `stream.split(p)`:
/// the split itself from `split(0)`, column `c` (identity first) from `split(1 + c)`.
pub fn flakiness(
    healthy: &InstancePool,
    unknowns: &[InstancePool],
    test: &MutationTest,
    cfg: &FlakinessConfig,
    stream: &SplitStream,
) -> Result<FlakinessTable> {
    let half = healthy.len() / 2;
    if cfg.k == 0 || cfg.n_samplings == 0 || cfg.n_partitions == 0 {
        return Err(Error::config("k, n_samplings and n_partitions must all be at least 1"));
    }
    if cfg.k > half {
        return Err(Error::config(format!("k = {} exceeds half of the healthy pool ({half})", cfg.k)));
    }
    if let Some(small) = unknowns.iter().find(|u| u.len() < cfg.k) {
        return Err(Error::config(format!("k = {} exceeds size {} of pool '{}'", cfg.k, small.len(), small.label())));
    }
    test.check_sizes(cfg.k, cfg.k)?;

    let metrics = healthy.metrics();
    let unknown_metrics: Vec<Vec<f64>> = unknowns.iter().map(InstancePool::metrics).collect();
    let columns = 1 + unknowns.len();
    let mut rates = vec![Vec::with_capacity(cfg.n_partitions); columns];
    let mut perm = vec![0usize; metrics.len()];
    let mut idx = Vec::with_capacity(metrics.len());

    for p in 0..cfg.n_partitions {
        let part = stream.split(p as u64);
        part.split(0).sample_without_replacement(&mut perm, metrics.len(), &mut idx);
        let first: Vec<f64> = idx[..half].iter().map(|&i| metrics[i]).collect();
        let second: Vec<f64> = idx[half..].iter().map(|&i| metrics[i]).collect();
        for c in 0..columns {
            let unknown = if c == 0 { &second } else { &unknown_metrics[c - 1] };
            let outcome = count_kills(&first, unknown, test, cfg.k, cfg.k, cfg.n_samplings, &part.split(1 + c as u64))?;
            rates[c].push(outcome.kills as f64 / outcome.trials as f64);
        }
    }

    let mut labels = core::iter::once(format!("{}-identity", healthy.label()))
        .chain(unknowns.iter().map(|u| String::from(u.label())));
    let mut cols: Vec<FlakinessColumn> = rates
        .into_iter()
        .map(|per_partition| {
            let mean_kill_prob = per_partition.iter().sum::<f64>() / per_partition.len() as f64;
            FlakinessColumn { label: labels.next().expect("one label per column"), per_partition, mean_kill_prob }
        })
        .collect();
    let identity = cols.remove(0);
    Ok(FlakinessTable { config: *cfg, identity, unknowns: cols })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{InstanceRecord, MetricKind, PoolMeta};

    fn pool(label: &str, base: f64, n: usize) -> InstancePool {
        let recs = (0..n).map(|i| InstanceRecord::new(format!("{label}{i}"), base + 1e-3 * (i % 7) as f64)).collect();
        InstancePool::new(PoolMeta::new(label, "TRD", MetricKind::Accuracy), recs).unwrap()
    }

    #[test]
    fn k_larger_than_half_is_rejected() {
        let cfg = FlakinessConfig { k: 11, n_samplings: 1, n_partitions: 1 };
        let err = flakiness(&pool("h", 0.9, 20), &[], &MutationTest::statistical(), &cfg, &SplitStream::new(0));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn single_deterministic_verdict() {
        let cfg = FlakinessConfig { k: 5, n_samplings: 1, n_partitions: 1 };
        let h = pool("h", 0.9, 20);
        let unknowns = [pool("m", 0.5, 20)];
        let a = flakiness(&h, &unknowns, &MutationTest::statistical(), &cfg, &SplitStream::new(9)).unwrap();
        let b = flakiness(&h, &unknowns, &MutationTest::statistical(), &cfg, &SplitStream::new(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.identity.mean_kill_prob == 0.0 || a.identity.mean_kill_prob == 1.0);
        assert_eq!(a.unknowns[0].mean_kill_prob, 1.0);
    }
}
