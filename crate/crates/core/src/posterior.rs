//! From repeated mutation tests to a posterior over the kill probability `π`.
//!
//! Each trial draws `n1` healthy and `n2` mutant instances without replacement
//! and applies the mutation test; `k` kills out of `N` trials give the
//! conjugate posterior `Beta(a + k, N − k + b)`. Bayes bagging repeats this on
//! `B` bootstrap resamples of both pools and keeps the equal-weight mixture of
//! the `B` posteriors.
//!
//! Substream layout (all relative to the stream handed in):
//! trial `t` uses `split(t)`; bootstrap `b` uses `split(b)`, within which the
//! healthy resample uses `split(0)`, the mutant resample `split(1)` and the
//! trials `split(2)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, log1p};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::data::{InstancePool, RunConfig};
use crate::error::{Error, Result};
use crate::mutation_test::{run_test_metrics, MutationTest};
use crate::quad::{integrate, QuadConfig};
use crate::rng::SplitStream;
use crate::special::{ln_beta, reg_inc_beta};

/// A probability density on `[0, 1]`.
pub trait Density {
    fn ln_pdf(&self, x: f64) -> f64;

    fn pdf(&self, x: f64) -> f64 {
        exp(self.ln_pdf(x))
    }
}

impl<F: Fn(f64) -> f64> Density for F {
    fn ln_pdf(&self, x: f64) -> f64 {
        log(self(x))
    }

    fn pdf(&self, x: f64) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrialOutcome {
    /// Trials that returned "mutant".
    pub kills: u32,
    pub trials: u32,
}

impl TrialOutcome {
    pub fn new(kills: u32, trials: u32) -> Result<Self> {
        if kills > trials {
            return Err(Error::data(alloc::format!("{kills} kills out of {trials} trials")));
        }
        Ok(Self { kills, trials })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BetaDist {
    pub alpha: f64,
    pub beta: f64,
}

// c * ln(x) with 0 * ln(0) = 0
fn xlogy(c: f64, x: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * log(x)
    }
}

impl BetaDist {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::data(alloc::format!("invalid Beta({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    /// `E[X²]`.
    pub fn second_moment(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * (self.alpha + 1.0) / (s * (s + 1.0))
    }

    /// Interior mode; `None` unless both parameters exceed 1.
    pub fn mode(&self) -> Option<f64> {
        (self.alpha > 1.0 && self.beta > 1.0).then(|| (self.alpha - 1.0) / (self.alpha + self.beta - 2.0))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        reg_inc_beta(self.alpha, self.beta, x)
    }

    /// Beta matching a given mean and variance (requires `var < mean (1 − mean)`).
    pub fn from_moments(mean: f64, var: f64) -> Result<Self> {
        let common = mean * (1.0 - mean) / var - 1.0;
        Self::new(mean * common, (1.0 - mean) * common)
    }
}

impl Density for BetaDist {
    fn ln_pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return f64::NEG_INFINITY;
        }
        xlogy(self.alpha - 1.0, x) + if self.beta == 1.0 { 0.0 } else { (self.beta - 1.0) * log1p(-x) }
            - ln_beta(self.alpha, self.beta)
    }
}

/// Conjugate update: `Beta(a + k, N − k + b)`.
pub fn beta_posterior(outcome: TrialOutcome, prior_a: f64, prior_b: f64) -> Result<BetaDist> {
    BetaDist::new(prior_a + outcome.kills as f64, (outcome.trials - outcome.kills) as f64 + prior_b)
}

/// Where a bagged posterior came from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Provenance {
    pub master_seed: u64,
    pub healthy_label: String,
    pub mutant_label: String,
    pub config: RunConfig,
}

/// Equal-weight mixture of Beta posteriors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BaggedPosterior {
    components: Vec<BetaDist>,
    provenance: Option<Provenance>,
}

impl BaggedPosterior {
    pub fn from_components(components: Vec<BetaDist>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::data("bagged posterior needs at least one component"));
        }
        Ok(Self { components, provenance: None })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn components(&self) -> &[BetaDist] {
        &self.components
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(BetaDist::mean).sum::<f64>() / self.components.len() as f64
    }

    /// Mixture variance: mean component variance plus variance of component means.
    pub fn variance(&self) -> f64 {
        let b = self.components.len() as f64;
        let mean = self.mean();
        let within = self.components.iter().map(BetaDist::variance).sum::<f64>() / b;
        let between = self.components.iter().map(|c| (c.mean() - mean) * (c.mean() - mean)).sum::<f64>() / b;
        within + between
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.cdf(x)).sum::<f64>() / self.components.len() as f64
    }

    /// Inverse CDF by safeguarded Newton iteration inside a shrinking bracket.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut x = self.mean().clamp(1e-12, 1.0 - 1e-12);
        for _ in 0..200 {
            let f = self.cdf(x) - p;
            if f == 0.0 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 1e-15 || libm::fabs(f) < 1e-15 {
                break;
            }
            let d = self.pdf(x);
            let newton = x - f / d;
            x = if d.is_finite() && d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }

    /// Moment-matched single Beta; a diagnostic, never the decision operand.
    pub fn moment_matched(&self) -> Result<BetaDist> {
        BetaDist::from_moments(self.mean(), self.variance())
    }

    /// Numerically integrated total mass (should be 1).
    pub fn total_mass(&self) -> Result<f64> {
        Ok(integrate(|x| self.pdf(x), 0.0, 1.0, &QuadConfig::default())?.value)
    }
}

impl Density for BaggedPosterior {
    fn ln_pdf(&self, x: f64) -> f64 {
        // log-sum-exp over components
        let mut buf = [0.0f64; 64];
        let lns: Vec<f64>;
        let terms: &[f64] = if self.components.len() <= buf.len() {
            for (slot, c) in buf.iter_mut().zip(&self.components) {
                *slot = c.ln_pdf(x);
            }
            &buf[..self.components.len()]
        } else {
            lns = self.components.iter().map(|c| c.ln_pdf(x)).collect();
            &lns
        };
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return max;
        }
        let sum: f64 = terms.iter().map(|&t| exp(t - max)).sum();
        max + log(sum / self.components.len() as f64)
    }

    fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.pdf(x)).sum::<f64>() / self.components.len() as f64
    }
}

/// Counts kills over `trials` independent trials on raw metric vectors.
pub fn count_kills(
    healthy: &[f64],
    mutant: &[f64],
    test: &MutationTest,
    n1: usize,
    n2: usize,
    trials: u32,
    stream: &SplitStream,
) -> Result<TrialOutcome> {
    if n1 > healthy.len() || n2 > mutant.len() {
        return Err(Error::config(alloc::format!(
            "sample sizes ({n1}, {n2}) exceed pool sizes ({}, {})",
            healthy.len(),
            mutant.len()
        )));
    }
    test.check_sizes(n1, n2)?;
    let mut perm_h = vec![0usize; healthy.len()];
    let mut perm_m = vec![0usize; mutant.len()];
    let (mut idx_h, mut idx_m) = (Vec::with_capacity(n1), Vec::with_capacity(n2));
    let (mut xs, mut ys) = (Vec::with_capacity(n1), Vec::with_capacity(n2));
    let mut kills = 0;
    for t in 0..trials {
        let mut s = stream.split(t as u64);
        s.sample_without_replacement(&mut perm_h, n1, &mut idx_h);
        s.sample_without_replacement(&mut perm_m, n2, &mut idx_m);
        xs.clear();
        xs.extend(idx_h.iter().map(|&i| healthy[i]));
        ys.clear();
        ys.extend(idx_m.iter().map(|&i| mutant[i]));
        if run_test_metrics(test, &xs, &ys)?.killed {
            kills += 1;
        }
    }
    Ok(TrialOutcome { kills, trials })
}

/// `N` resampled mutation tests between two pools.
pub fn run_trials(
    healthy: &InstancePool,
    mutant: &InstancePool,
    test: &MutationTest,
    cfg: &RunConfig,
    stream: &SplitStream,
) -> Result<TrialOutcome> {
    cfg.validate_for(healthy.len(), mutant.len())?;
    count_kills(&healthy.metrics(), &mutant.metrics(), test, cfg.n1, cfg.n2, cfg.trials, stream)
}

fn bootstrap_resample(values: &[f64], stream: &mut SplitStream, out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..values.len()).map(|_| values[stream.index(values.len())]));
}

/// Posterior of bootstrap repetition `b`: resample both pools with
/// replacement at their original sizes, run the trials, update the prior.
///
/// Exposed so callers can evaluate repetitions in any order or in parallel;
/// [`bayes_bag`] is the serial loop over `b = 0..B`.
pub fn bag_component(
    healthy: &[f64],
    mutant: &[f64],
    test: &MutationTest,
    cfg: &RunConfig,
    stream: &SplitStream,
    b: u32,
) -> Result<BetaDist> {
    let sub = stream.split(b as u64);
    let mut resampled_h = Vec::with_capacity(healthy.len());
    let mut resampled_m = Vec::with_capacity(mutant.len());
    bootstrap_resample(healthy, &mut sub.split(0), &mut resampled_h);
    bootstrap_resample(mutant, &mut sub.split(1), &mut resampled_m);
    let outcome = count_kills(&resampled_h, &resampled_m, test, cfg.n1, cfg.n2, cfg.trials, &sub.split(2))?;
    beta_posterior(outcome, cfg.prior_a, cfg.prior_b)
}

/// Bayes bagging over raw metric vectors (no provenance attached).
pub fn bag_metrics(
    healthy: &[f64],
    mutant: &[f64],
    test: &MutationTest,
    cfg: &RunConfig,
    stream: &SplitStream,
) -> Result<BaggedPosterior> {
    cfg.validate_for(healthy.len(), mutant.len())?;
    test.check_sizes(cfg.n1, cfg.n2)?;
    let components = (0..cfg.bootstraps)
        .map(|b| bag_component(healthy, mutant, test, cfg, stream, b))
        .collect::<Result<Vec<_>>>()?;
    BaggedPosterior::from_components(components)
}

/// Bayes-bagged posterior of the kill probability.
pub fn bayes_bag(
    healthy: &InstancePool,
    mutant: &InstancePool,
    test: &MutationTest,
    cfg: &RunConfig,
    stream: &SplitStream,
) -> Result<BaggedPosterior> {
    let bag = bag_metrics(&healthy.metrics(), &mutant.metrics(), test, cfg, stream)?;
    Ok(bag.with_provenance(Provenance {
        master_seed: cfg.master_seed,
        healthy_label: healthy.label().into(),
        mutant_label: mutant.label().into(),
        config: cfg.clone(),
    }))
}

/// Posterior mean (MMSE point estimate).
pub fn mmse(p: &BaggedPosterior) -> f64 {
    p.mean()
}

/// Posterior mode: a 1e-4 grid scan refined by golden-section search to 1e-8.
/// On a plateau the leftmost maximiser wins.
pub fn map_estimate(p: &BaggedPosterior) -> f64 {
    const STEPS: usize = 10_000;
    let h = 1.0 / STEPS as f64;
    let grid: Vec<f64> = (0..=STEPS).map(|i| p.pdf(i as f64 * h)).collect();
    let mut best = 0;
    for (i, &v) in grid.iter().enumerate() {
        if v > grid[best] {
            best = i;
        }
    }
    let peak = grid[best];
    let x_best = best as f64 * h;
    if !peak.is_finite() {
        return x_best;
    }
    let flat = |j: Option<usize>| j.and_then(|j| grid.get(j)).is_some_and(|&v| libm::fabs(v - peak) <= 1e-12 * peak);
    if flat(best.checked_sub(1)) || flat(Some(best + 1)) {
        return x_best;
    }

    let mut a = best.saturating_sub(1) as f64 * h;
    let mut b = ((best + 1).min(STEPS)) as f64 * h;
    let inv_phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (p.pdf(c), p.pdf(d));
    while b - a > 1e-8 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = p.pdf(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = p.pdf(d);
        }
    }
    let x = 0.5 * (a + b);
    if p.pdf(x) >= peak {
        x
    } else {
        x_best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum IntervalKind {
    EqualTailed,
    Hdi,
    MeanCentered,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CredibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub kind: IntervalKind,
    /// Posterior mass inside `[lo, hi]` from the mixture CDF.
    pub mass: f64,
    /// The density has several modes; an HDI would be a union, and the
    /// reported interval is the shortest single one.
    pub multimodal: bool,
}

impl CredibleInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn count_modes(p: &BaggedPosterior) -> usize {
    const STEPS: usize = 1000;
    let f: Vec<f64> = (0..=STEPS).map(|i| p.pdf(i as f64 / STEPS as f64)).collect();
    let mut modes = 0;
    for i in 0..=STEPS {
        let left = if i == 0 { f64::NEG_INFINITY } else { f[i - 1] };
        let right = if i == STEPS { f64::NEG_INFINITY } else { f[i + 1] };
        if f[i] > left && f[i] >= right && f[i] > 0.0 {
            modes += 1;
        }
    }
    modes
}

/// Credible interval of the bagged posterior at `level`.
pub fn credible_interval(p: &BaggedPosterior, level: f64, kind: IntervalKind) -> Result<CredibleInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(alloc::format!("credible level must lie in (0, 1), got {level}")));
    }
    let multimodal = count_modes(p) > 1;
    let (lo, hi) = match kind {
        IntervalKind::EqualTailed => {
            let tail = 0.5 * (1.0 - level);
            (p.quantile(tail), p.quantile(1.0 - tail))
        }
        IntervalKind::Hdi => hdi(p, level),
        IntervalKind::MeanCentered => mean_centered(p, level),
    };
    let mass = p.cdf(hi) - p.cdf(lo);
    if libm::fabs(mass - level) > 1e-6 {
        return Err(Error::Tolerance(alloc::format!(
            "{kind:?} interval [{lo}, {hi}] holds mass {mass}, expected {level}"
        )));
    }
    Ok(CredibleInterval { lo, hi, level, kind, mass, multimodal })
}

/// Shortest `[Q(u), Q(u + level)]` over lower-tail probabilities `u`: a coarse
/// sweep followed by golden-section refinement around the best sweep point.
fn hdi(p: &BaggedPosterior, level: f64) -> (f64, f64) {
    const SWEEP: usize = 64;
    let span = 1.0 - level;
    let width = |u: f64| p.quantile(u + level) - p.quantile(u);
    let us: Vec<f64> = (0..=SWEEP).map(|i| span * i as f64 / SWEEP as f64).collect();
    let widths: Vec<f64> = us.iter().map(|&u| width(u)).collect();
    let best = (0..=SWEEP).fold(0, |b, i| if widths[i] < widths[b] { i } else { b });

    let mut a = us[best.saturating_sub(1)];
    let mut b = us[(best + 1).min(SWEEP)];
    let inv_phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut wc, mut wd) = (width(c), width(d));
    while b - a > 1e-10 {
        if wc <= wd {
            b = d;
            d = c;
            wd = wc;
            c = b - inv_phi * (b - a);
            wc = width(c);
        } else {
            a = c;
            c = d;
            wc = wd;
            d = a + inv_phi * (b - a);
            wd = width(d);
        }
    }
    let mut u = 0.5 * (a + b);
    if widths[best] < width(u) {
        u = us[best];
    }
    (p.quantile(u), p.quantile(u + level))
}

/// `[m − w, m + w] ∩ [0, 1]` around the posterior mean, with the smallest
/// half-width `w` whose mass reaches `level`.
fn mean_centered(p: &BaggedPosterior, level: f64) -> (f64, f64) {
    let m = p.mean();
    let bounds = |w: f64| ((m - w).max(0.0), (m + w).min(1.0));
    let mass = |w: f64| {
        let (lo, hi) = bounds(w);
        p.cdf(hi) - p.cdf(lo)
    };
    let (mut a, mut b) = (0.0, m.max(1.0 - m));
    while b - a > 1e-14 {
        let mid = 0.5 * (a + b);
        if mass(mid) >= level {
            b = mid;
        } else {
            a = mid;
        }
    }
    bounds(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(a: f64, b: f64) -> BaggedPosterior {
        BaggedPosterior::from_components(vec![BetaDist::new(a, b).unwrap()]).unwrap()
    }

    #[test]
    fn conjugate_examples() {
        let post = |k| beta_posterior(TrialOutcome::new(k, 100).unwrap(), 1.0, 1.0).unwrap();
        assert_eq!(post(0), BetaDist { alpha: 1.0, beta: 101.0 });
        assert_eq!(post(100), BetaDist { alpha: 101.0, beta: 1.0 });
        assert_eq!(post(45), BetaDist { alpha: 46.0, beta: 56.0 });
        assert!((post(45).mean() - 46.0 / 102.0).abs() < 1e-15);
        assert!(TrialOutcome::new(5, 4).is_err());
    }

    #[test]
    fn point_estimates() {
        assert!((mmse(&single(46.0, 56.0)) - 46.0 / 102.0).abs() < 1e-15);
        let two = BaggedPosterior::from_components(vec![BetaDist::new(2.0, 2.0).unwrap(), BetaDist::new(4.0, 2.0).unwrap()])
            .unwrap();
        assert!((mmse(&two) - 7.0 / 12.0).abs() < 1e-15);
        let sym = BaggedPosterior::from_components(vec![BetaDist::new(3.0, 7.0).unwrap(), BetaDist::new(7.0, 3.0).unwrap()])
            .unwrap();
        assert!((mmse(&sym) - 0.5).abs() < 1e-15);

        assert!((map_estimate(&single(46.0, 56.0)) - 0.45).abs() < 1e-8);
        assert_eq!(map_estimate(&single(1.0, 1.0)), 0.0);
    }

    #[test]
    fn equal_tailed_uniform() {
        let ci = credible_interval(&single(1.0, 1.0), 0.95, IntervalKind::EqualTailed).unwrap();
        assert!((ci.lo - 0.025).abs() < 1e-12 && (ci.hi - 0.975).abs() < 1e-12, "{ci:?}");
    }

    #[test]
    fn equal_tailed_against_scipy() {
        let ci = credible_interval(&single(101.0, 1.0), 0.95, IntervalKind::EqualTailed).unwrap();
        assert!((ci.lo - 0.964_135_379_609_996_3).abs() < 1e-10, "{ci:?}");
        assert!((ci.hi - 0.999_749_360_049_260_7).abs() < 1e-10, "{ci:?}");
        let ci = credible_interval(&single(51.0, 51.0), 0.95, IntervalKind::EqualTailed).unwrap();
        assert!((ci.lo + ci.hi - 1.0).abs() < 1e-10);
        assert!((ci.lo - 0.403_643_067_509_506_85).abs() < 1e-10);
    }

    #[test]
    fn hdi_is_shortest() {
        let p = single(46.0, 56.0);
        let hdi = credible_interval(&p, 0.9, IntervalKind::Hdi).unwrap();
        let et = credible_interval(&p, 0.9, IntervalKind::EqualTailed).unwrap();
        assert!(hdi.width() <= et.width() + 1e-12);
        // endpoints of a unimodal HDI have equal density
        assert!((p.pdf(hdi.lo) - p.pdf(hdi.hi)).abs() < 1e-4 * p.pdf(hdi.lo));
        assert!(!hdi.multimodal);

        // Beta(101, 1) is increasing, so the HDI hugs 1.
        let hdi = credible_interval(&single(101.0, 1.0), 0.95, IntervalKind::Hdi).unwrap();
        assert!((hdi.hi - 1.0).abs() < 1e-9);
        assert!((hdi.lo - libm::pow(0.05, 1.0 / 101.0)).abs() < 1e-8);
    }

    #[test]
    fn multimodal_flag() {
        let p = BaggedPosterior::from_components(vec![BetaDist::new(2.0, 8.0).unwrap(), BetaDist::new(8.0, 2.0).unwrap()])
            .unwrap();
        let ci = credible_interval(&p, 0.5, IntervalKind::Hdi).unwrap();
        assert!(ci.multimodal);
        assert!((ci.mass - 0.5).abs() < 1e-6);
    }

    #[test]
    fn mean_centered_contains_mean() {
        let p = single(3.0, 30.0);
        let ci = credible_interval(&p, 0.95, IntervalKind::MeanCentered).unwrap();
        assert!(ci.lo <= p.mean() && p.mean() <= ci.hi);
        // clipped at zero on the left
        assert_eq!(ci.lo, 0.0);
        assert!((ci.mass - 0.95).abs() < 1e-6);
    }

    #[test]
    fn bad_level() {
        assert!(credible_interval(&single(2.0, 2.0), 1.0, IntervalKind::Hdi).is_err());
    }
}
