//! Multi-threaded drivers. Each work item draws from its own substream, so
//! results are identical to the serial core functions for any thread count.

use pmt_core::mce::{check_tradeoff, replicate_one, tradeoff_cell, PosteriorMoments};
use pmt_core::posterior::{bag_component, Provenance};
use pmt_core::{
    BaggedPosterior, InstancePool, MutationTest, Result, RunConfig, SplitStream, TradeoffReport,
};
use rayon::prelude::*;

/// Parallel [`pmt_core::bayes_bag`] over bootstrap repetitions.
pub fn bayes_bag(
    healthy: &InstancePool,
    mutant: &InstancePool,
    test: &MutationTest,
    cfg: &RunConfig,
    stream: &SplitStream,
) -> Result<BaggedPosterior> {
    cfg.validate_for(healthy.len(), mutant.len())?;
    test.check_sizes(cfg.n1, cfg.n2)?;
    let (h, m) = (healthy.metrics(), mutant.metrics());
    let components = (0..cfg.bootstraps)
        .into_par_iter()
        .map(|b| bag_component(&h, &m, test, cfg, stream, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(BaggedPosterior::from_components(components)?.with_provenance(Provenance {
        master_seed: cfg.master_seed,
        healthy_label: healthy.label().into(),
        mutant_label: mutant.label().into(),
        config: cfg.clone(),
    }))
}

/// Parallel [`pmt_core::replicate_bagged`].
pub fn replicate_bagged(
    healthy: &InstancePool,
    mutant: &InstancePool,
    test: &MutationTest,
    cfg: &RunConfig,
    n_reps: usize,
    stream: &SplitStream,
) -> Result<Vec<PosteriorMoments>> {
    if n_reps < 2 {
        return Err(pmt_core::Error::Config(format!("need at least 2 replicates, got {n_reps}")));
    }
    cfg.validate_for(healthy.len(), mutant.len())?;
    let (h, m) = (healthy.metrics(), mutant.metrics());
    (0..n_reps).into_par_iter().map(|r| replicate_one(&h, &m, test, cfg, stream, r)).collect()
}

/// Parallel [`pmt_core::tradeoff_study`] over (size, population draw) cells.
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
    let cells = (0..sizes.len() * n_pop)
        .into_par_iter()
        .map(|c| tradeoff_cell(&h, &m, test, cfg, sizes, c / n_pop, c % n_pop, n_reps, stream))
        .collect::<Result<Vec<_>>>()?;
    Ok(TradeoffReport::from_cells(sizes.to_vec(), n_pop, n_reps, cells))
}
