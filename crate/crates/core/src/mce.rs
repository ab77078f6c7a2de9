//! Monte-Carlo error of the bagged posterior and the sample-size trade-off.
//!
//! Two errors are tracked. The bagging error is the spread of posterior
//! summaries (mean `μ`, variance `var`) across independent replications of
//! Bayes bagging on the same pools, estimated with the delete-1 jackknife. The
//! representativity error is the spread of those estimates across different
//! sampled populations of the same size.

use alloc::format;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::data::{InstancePool, RunConfig};
use crate::error::{Error, Result};
use crate::mutation_test::MutationTest;
use crate::posterior::bag_metrics;
use crate::rng::SplitStream;
use crate::special::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct JackknifeEstimate {
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
}

/// Delete-1 jackknife of the mean, with a normal confidence interval.
pub fn jackknife_error(values: &[f64], level: f64) -> Result<JackknifeEstimate> {
    let r = values.len();
    if r < 2 {
        return Err(Error::InsufficientData { needed: 2, got: r });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let rf = r as f64;
    let total: f64 = values.iter().sum();
    let estimate = total / rf;
    let loo: Vec<f64> = values.iter().map(|v| (total - v) / (rf - 1.0)).collect();
    let loo_mean = loo.iter().sum::<f64>() / rf;
    let ss: f64 = loo.iter().map(|t| (t - loo_mean) * (t - loo_mean)).sum();
    let se = libm::sqrt((rf - 1.0) / rf * ss);
    let z = normal_quantile(0.5 + 0.5 * level);
    Ok(JackknifeEstimate { estimate, se, ci_lo: estimate - z * se, ci_hi: estimate + z * se, level })
}

/// Mean and variance of one bagged posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PosteriorMoments {
    pub mu: f64,
    pub var: f64,
}

fn replicate_metrics(
    healthy: &[f64],
    mutant: &[f64],
    test: &MutationTest,
    cfg: &RunConfig,
    n_reps: usize,
    stream: &SplitStream,
) -> Result<Vec<PosteriorMoments>> {
    if n_reps < 2 {
        return Err(Error::config(format!("need at least 2 replicates, got {n_reps}")));
    }
    (0..n_reps)
        .map(|r| replicate_one(healthy, mutant, test, cfg, stream, r))
        .collect()
}

/// Replicate `r` of Bayes bagging, drawn from `stream.split(r)`.
pub fn replicate_one(
    healthy: &[f64],
    mutant: &[f64],
    test: &MutationTest,
    cfg: &RunConfig,
    stream: &SplitStream,
    r: usize,
) -> Result<PosteriorMoments> {
    let bag = bag_metrics(healthy, mutant, test, cfg, &stream.split(r as u64))?;
    Ok(PosteriorMoments { mu: bag.mean(), var: bag.variance() })
}

/// `n_reps` independent bagged posteriors on the same pools.
pub fn replicate_bagged(
    healthy: &InstancePool,
    mutant: &InstancePool,
    test: &MutationTest,
    cfg: &RunConfig,
    n_reps: usize,
    stream: &SplitStream,
) -> Result<Vec<PosteriorMoments>> {
    replicate_metrics(&healthy.metrics(), &mutant.metrics(), test, cfg, n_reps, stream)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MceReport {
    pub mu: JackknifeEstimate,
    pub var: JackknifeEstimate,
    pub replicates: usize,
}

impl MceReport {
    pub fn from_replicates(reps: &[PosteriorMoments], level: f64) -> Result<Self> {
        let mus: Vec<f64> = reps.iter().map(|m| m.mu).collect();
        let vars: Vec<f64> = reps.iter().map(|m| m.var).collect();
        Ok(Self { mu: jackknife_error(&mus, level)?, var: jackknife_error(&vars, level)?, replicates: reps.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TradeoffCell {
    pub size: usize,
    pub pop_draw: usize,
    pub report: MceReport,
}

/// Averages over the population draws of one sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SizeSummary {
    pub size: usize,
    pub mean_estimate_mu: f64,
    pub mean_ci_lo_mu: f64,
    pub mean_ci_hi_mu: f64,
    pub mean_se_mu: f64,
    /// Standard deviation of `estimate_mu` across population draws.
    pub dispersion_mu: f64,
    pub mean_estimate_var: f64,
    pub mean_ci_lo_var: f64,
    pub mean_ci_hi_var: f64,
    pub mean_se_var: f64,
    pub dispersion_var: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TradeoffReport {
    pub sizes: Vec<usize>,
    pub n_pop: usize,
    pub n_reps: usize,
    /// Ordered by size, then population draw.
    pub cells: Vec<TradeoffCell>,
    pub summary: Vec<SizeSummary>,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1.0)))
}

impl TradeoffReport {
    /// Assembles a report from cells in (size, draw) order.
    pub fn from_cells(sizes: Vec<usize>, n_pop: usize, n_reps: usize, cells: Vec<TradeoffCell>) -> Self {
        let summary = sizes
            .iter()
            .map(|&size| {
                let row: Vec<&TradeoffCell> = cells.iter().filter(|c| c.size == size).collect();
                let pick = |f: fn(&MceReport) -> f64| row.iter().map(move |c| f(&c.report));
                let (mean_estimate_mu, dispersion_mu) = mean_sd(pick(|r| r.mu.estimate));
                let (mean_estimate_var, dispersion_var) = mean_sd(pick(|r| r.var.estimate));
                SizeSummary {
                    size,
                    mean_estimate_mu,
                    mean_ci_lo_mu: mean_sd(pick(|r| r.mu.ci_lo)).0,
                    mean_ci_hi_mu: mean_sd(pick(|r| r.mu.ci_hi)).0,
                    mean_se_mu: mean_sd(pick(|r| r.mu.se)).0,
                    dispersion_mu,
                    mean_estimate_var,
                    mean_ci_lo_var: mean_sd(pick(|r| r.var.ci_lo)).0,
                    mean_ci_hi_var: mean_sd(pick(|r| r.var.ci_hi)).0,
                    mean_se_var: mean_sd(pick(|r| r.var.se)).0,
                    dispersion_var,
                }
            })
            .collect();
        Self { sizes, n_pop, n_reps, cells, summary }
    }
}

/// Validates trade-off study inputs.
pub fn check_tradeoff(sizes: &[usize], n_pop: usize, healthy_len: usize, mutant_len: usize, cfg: &RunConfig) -> Result<()> {
    if sizes.is_empty() || n_pop == 0 {
        return Err(Error::config("trade-off study needs at least one size and one population draw"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("trade-off sizes must be strictly increasing"));
    }
    let largest = *sizes.last().expect("non-empty");
    if largest > healthy_len.min(mutant_len) {
        return Err(Error::config(format!(
            "largest sample size {largest} exceeds pool sizes ({healthy_len}, {mutant_len})"
        )));
    }
    cfg.validate_for(sizes[0], sizes[0])
}

/// One (size, population draw) cell, drawn from `stream.split(size_index).split(pop_draw)`.
#[allow(clippy::too_many_arguments)]
pub fn tradeoff_cell(
    healthy: &[f64],
    mutant: &[f64],
    test: &MutationTest,
    cfg: &RunConfig,
    sizes: &[usize],
    size_index: usize,
    pop_draw: usize,
    n_reps: usize,
    stream: &SplitStream,
) -> Result<TradeoffCell> {
    let size = sizes[size_index];
    let cell = stream.split(size_index as u64).split(pop_draw as u64);
    let mut perm = Vec::new();
    let mut idx = Vec::with_capacity(size);
    let mut draw = |values: &[f64], mut s: SplitStream| {
        perm.resize(values.len(), 0);
        s.sample_without_replacement(&mut perm, size, &mut idx);
        idx.iter().map(|&i| values[i]).collect::<Vec<f64>>()
    };
    let sub_h = draw(healthy, cell.split(0));
    let sub_m = draw(mutant, cell.split(1));
    let reps = replicate_metrics(&sub_h, &sub_m, test, cfg, n_reps, &cell.split(2))?;
    Ok(TradeoffCell { size, pop_draw, report: MceReport::from_replicates(&reps, cfg.ci_level)? })
}

/// For every size and each of `n_pop` population draws (subsets without
/// replacement of both pools), replicate Bayes bagging `n_reps` times and
/// jackknife the replicate summaries.
#[allow(clippy::too_many_arguments)]
pub fn tradeoff_study(
    healthy: &InstancePool,
    mutant: &InstancePool,
    test: &MutationTest,
    cfg: &RunConfig,
    sizes: &[usize],
    n_pop: usize,
    n_reps: usize,
    stream: &SplitStream,
) -> Result<TradeoffReport> {
    check_tradeoff(sizes, n_pop, healthy.len(), mutant.len(), cfg)?;
    let (h, m) = (healthy.metrics(), mutant.metrics());
    let mut cells = Vec::with_capacity(sizes.len() * n_pop);
    for i in 0..sizes.len() {
        for j in 0..n_pop {
            cells.push(tradeoff_cell(&h, &m, test, cfg, sizes, i, j, n_reps, stream)?);
        }
    }
    Ok(TradeoffReport::from_cells(sizes.to_vec(), n_pop, n_reps, cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackknife_examples() {
        let c = jackknife_error(&[0.3; 7], 0.95).unwrap();
        assert_eq!(c.se, 0.0);
        let j = jackknife_error(&[0.0, 1.0], 0.95).unwrap();
        assert!((j.estimate - 0.5).abs() < 1e-15 && (j.se - 0.5).abs() < 1e-15);
        let j = jackknife_error(&[1.0, 2.0, 3.0], 0.95).unwrap();
        assert!((j.se - libm::sqrt(1.0 / 3.0)).abs() < 1e-15);
        assert!(j.ci_lo < j.estimate && j.estimate < j.ci_hi);
        assert!((j.ci_hi - j.estimate - 1.959_963_984_540_054 * j.se).abs() < 1e-12);
        assert!(jackknife_error(&[1.0], 0.95).is_err());
    }

    #[test]
    fn tradeoff_input_checks() {
        let cfg = RunConfig::default();
        assert!(check_tradeoff(&[25, 70], 2, 100, 100, &cfg).is_ok());
        assert!(check_tradeoff(&[70, 25], 2, 100, 100, &cfg).is_err());
        assert!(check_tradeoff(&[25, 170], 2, 100, 200, &cfg).is_err());
        assert!(check_tradeoff(&[10, 70], 2, 100, 100, &cfg).is_err());
    }
}
