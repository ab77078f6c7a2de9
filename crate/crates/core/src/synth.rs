//! Synthetic instance populations with known generating laws, and a
//! brute-force Monte-Carlo oracle for the kill probability.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::data::{derive_metric, InstancePool, InstanceRecord, PoolMeta, RunConfig};
use crate::error::{Error, Result};
use crate::mutation_test::{run_test_metrics, MutationTest};
use crate::rng::SplitStream;

/// Draw attempts per record before truncated-normal sampling gives up.
pub const REJECTION_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(tag = "law", rename_all = "kebab-case"))]
pub enum MetricLaw {
    /// Normal(mu, sigma) conditioned on `[lo, hi]`, sampled by rejection.
    TruncatedNormal { mu: f64, sigma: f64, lo: f64, hi: f64 },
    /// Each of `t_len` test inputs is answered correctly with probability `p`.
    PerInputBernoulli { p: f64, t_len: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PopulationSpec {
    pub size: usize,
    pub law: MetricLaw,
    pub meta: PoolMeta,
    /// Instance ids are `<id_prefix><index>`, zero-padded to four digits.
    pub id_prefix: String,
}

impl PopulationSpec {
    /// Truncated normal bounded by the pool's declared metric range.
    pub fn truncated_normal(meta: PoolMeta, size: usize, mu: f64, sigma: f64) -> Self {
        let (lo, hi) = (meta.range.lo, meta.range.hi);
        let id_prefix = format!("{}-", meta.label);
        Self { size, law: MetricLaw::TruncatedNormal { mu, sigma, lo, hi }, meta, id_prefix }
    }

    pub fn bernoulli(meta: PoolMeta, size: usize, p: f64, t_len: usize) -> Self {
        let id_prefix = format!("{}-", meta.label);
        Self { size, law: MetricLaw::PerInputBernoulli { p, t_len }, meta, id_prefix }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::config("population size must be at least 1"));
        }
        match self.law {
            MetricLaw::TruncatedNormal { mu, sigma, lo, hi } => {
                if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) || lo.partial_cmp(&hi) != Some(core::cmp::Ordering::Less) {
                    return Err(Error::config(format!(
                        "invalid truncated normal (mu {mu}, sigma {sigma}, bounds [{lo}, {hi}])"
                    )));
                }
            }
            MetricLaw::PerInputBernoulli { p, t_len } => {
                if !(0.0..=1.0).contains(&p) || t_len == 0 {
                    return Err(Error::config(format!("invalid per-input Bernoulli (p {p}, length {t_len})")));
                }
            }
        }
        Ok(())
    }
}

fn truncated_normal(stream: &mut SplitStream, mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<f64> {
    for _ in 0..REJECTION_CAP {
        let x = mu + sigma * stream.standard_normal();
        if x >= lo && x <= hi {
            return Ok(x);
        }
    }
    Err(Error::Rejection { attempts: REJECTION_CAP })
}

/// Draws `spec.size` i.i.d. records; record `i` uses `stream.split(i)`.
pub fn gen_population(spec: &PopulationSpec, stream: &SplitStream) -> Result<InstancePool> {
    spec.validate()?;
    let mut records = Vec::with_capacity(spec.size);
    for i in 0..spec.size {
        let mut s = stream.split(i as u64);
        let id = format!("{}{i:04}", spec.id_prefix);
        let record = match spec.law {
            MetricLaw::TruncatedNormal { mu, sigma, lo, hi } => {
                InstanceRecord::new(id, truncated_normal(&mut s, mu, sigma, lo, hi)?)
            }
            MetricLaw::PerInputBernoulli { p, t_len } => {
                let outcomes = (0..t_len).map(|_| s.next_f64() < p).collect();
                InstanceRecord::new(id, f64::NAN).with_outcomes(outcomes)
            }
        };
        records.push(record.with_seed(i as u64));
    }
    if matches!(spec.law, MetricLaw::PerInputBernoulli { .. }) {
        derive_metric(&mut records)?;
    }
    InstancePool::new(spec.meta.clone(), records)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OracleEstimate {
    pub estimate: f64,
    pub se: f64,
    pub trials: usize,
}

// Knuth's selection sampling: one pass, keeps each index with probability
// (still needed) / (still available). Output is in increasing index order.
fn selection_sample(values: &[f64], k: usize, stream: &mut SplitStream, out: &mut Vec<f64>) {
    out.clear();
    let n = values.len();
    for (seen, &v) in values.iter().enumerate() {
        let needed = k - out.len();
        if needed == 0 {
            break;
        }
        if ((n - seen) as f64) * stream.next_f64() < needed as f64 {
            out.push(v);
        }
    }
}

/// Plain Monte-Carlo estimate of the kill probability on the given pools:
/// `n_mc` trials, no bootstrap, no posterior. Samples with a different
/// algorithm from [`crate::posterior::run_trials`] so the two can check each other.
pub fn brute_force_kill_prob(
    healthy: &InstancePool,
    mutant: &InstancePool,
    test: &MutationTest,
    cfg: &RunConfig,
    n_mc: usize,
    stream: &SplitStream,
) -> Result<OracleEstimate> {
    if n_mc < 10_000 {
        return Err(Error::config(format!("oracle needs at least 10000 trials, got {n_mc}")));
    }
    cfg.validate_for(healthy.len(), mutant.len())?;
    let (h, m) = (healthy.metrics(), mutant.metrics());
    let mut s = stream.clone();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut kills = 0usize;
    for _ in 0..n_mc {
        selection_sample(&h, cfg.n1, &mut s, &mut xs);
        selection_sample(&m, cfg.n2, &mut s, &mut ys);
        kills += run_test_metrics(test, &xs, &ys)?.killed as usize;
    }
    let p = kills as f64 / n_mc as f64;
    Ok(OracleEstimate { estimate: p, se: libm::sqrt(p * (1.0 - p) / n_mc as f64), trials: n_mc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MetricKind;

    fn healthy_meta() -> PoolMeta {
        PoolMeta::identity("healthy", MetricKind::Accuracy)
    }

    #[test]
    fn mnist_shaped_population() {
        let spec = PopulationSpec::truncated_normal(healthy_meta(), 200, 0.9915, 0.0006);
        let pool = gen_population(&spec, &SplitStream::new(3)).unwrap();
        assert_eq!(pool.len(), 200);
        let mean = pool.metrics().iter().sum::<f64>() / 200.0;
        assert!((mean - 0.9915).abs() < 3.0 * 0.0006 / libm::sqrt(200.0));
        assert!(pool.metrics().iter().all(|&m| (0.0..=1.0).contains(&m)));
    }

    #[test]
    fn vanishing_sigma() {
        let spec = PopulationSpec::truncated_normal(healthy_meta(), 20, 0.9, 1e-12);
        let pool = gen_population(&spec, &SplitStream::new(3)).unwrap();
        assert!(pool.metrics().iter().all(|&m| (m - 0.9).abs() < 1e-10));
    }

    #[test]
    fn bernoulli_population() {
        let spec = PopulationSpec::bernoulli(healthy_meta(), 10, 0.5, 100);
        let pool = gen_population(&spec, &SplitStream::new(4)).unwrap();
        for r in pool.records() {
            let o = r.outcomes.as_ref().unwrap();
            assert_eq!(o.len(), 100);
            assert_eq!(r.metric, o.iter().filter(|&&b| b).count() as f64 / 100.0);
        }
    }

    #[test]
    fn pathological_truncation_fails() {
        let mut spec = PopulationSpec::truncated_normal(healthy_meta(), 1, 0.0, 1e-3);
        spec.law = MetricLaw::TruncatedNormal { mu: 0.0, sigma: 1e-3, lo: 0.9, hi: 1.0 };
        assert!(matches!(gen_population(&spec, &SplitStream::new(1)), Err(Error::Rejection { .. })));
    }

    #[test]
    fn selection_sample_is_uniform_subset() {
        let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut s = SplitStream::new(8);
        let mut counts = [0usize; 10];
        let mut out = Vec::new();
        for _ in 0..20_000 {
            selection_sample(&values, 3, &mut s, &mut out);
            assert_eq!(out.len(), 3);
            for &v in &out {
                counts[v as usize] += 1;
            }
        }
        // each index appears with probability 3/10
        for c in counts {
            assert!((5_700..6_300).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn oracle_degenerate_pools() {
        let single = |label: &str| {
            InstancePool::new(PoolMeta::identity(label, MetricKind::Accuracy), alloc::vec![InstanceRecord::new("a", 0.9)])
                .unwrap()
        };
        let cfg = RunConfig { n1: 1, n2: 1, ..RunConfig::default() };
        let est = brute_force_kill_prob(&single("h"), &single("m"), &MutationTest::pointwise(), &cfg, 10_000, &SplitStream::new(1))
            .unwrap();
        assert_eq!((est.estimate, est.se), (0.0, 0.0));
        assert!(brute_force_kill_prob(&single("h"), &single("m"), &MutationTest::pointwise(), &cfg, 10, &SplitStream::new(1))
            .is_err());
    }
}
