//! Probabilistic mutation testing for stochastic learned models.
//!
//! A mutation test applied to trained model instances is itself random: which
//! instances get compared decides the verdict. This crate estimates the full
//! posterior of the kill probability `π` by repeating the test over resampled
//! instances, aggregates bootstrap posteriors into a bagged mixture, and turns
//! that mixture into a graded kill decision through Hellinger similarity to
//! the two ideal posteriors (never killed / always killed).
//!
//! The crate is `no_std` and needs only `alloc`. File formats, configuration
//! files, parallel fan-out and the command-line surface live in the `pmt`
//! companion crate.
//!
//! Module map:
//!
//! - [`data`]: instance records, pools, run configuration.
//! - [`mutation_test`]: the pluggable test functions (Cohen's d + pooled t-test, pointwise delta).
//! - [`posterior`]: repeated trials, Beta posteriors, Bayes bagging, point estimates, credible intervals.
//! - [`decision`]: Hellinger distances, similarity ratio, effect scale, mutation score.
//! - [`mce`]: jackknife Monte-Carlo error and the sample-size trade-off study.
//! - [`synth`]: synthetic populations and the brute-force kill-probability oracle.
//! - [`flakiness`]: the healthy-split rerun experiment that exposes flaky verdicts.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod decision;
mod error;
pub mod flakiness;
pub mod mce;
pub mod posterior;
pub mod quad;
pub mod rng;
pub mod special;
pub mod synth;

pub use data::{InstancePool, InstanceRecord, MetricKind, Orientation, RunConfig};
pub use decision::{
    classify_effect, hellinger_beta, hellinger_numeric, mutation_score, similarity_ratio,
    EffectClass, EffectReport, EffectScale, IdealPosteriors, Verdict, VerdictPolicy,
};
pub use error::{Error, Result};
pub use mce::{jackknife_error, replicate_bagged, tradeoff_study, JackknifeEstimate, MceReport, TradeoffReport};
pub use mutation_test::{cohens_d, run_test, two_sample_p_value, MutationTest, TestKind, TestVerdict};
pub use posterior::{
    bayes_bag, beta_posterior, credible_interval, map_estimate, mmse, run_trials, BaggedPosterior,
    BetaDist, CredibleInterval, IntervalKind, TrialOutcome,
};
pub use rng::SplitStream;
