//! Graded kill decisions from a bagged posterior.
//!
//! The observed posterior `P` is compared with the two ideal posteriors that
//! would follow if every trial had returned "not mutant" (`Q_H`) or "mutant"
//! (`Q_M`). The similarity ratio `R = H(P, Q_H) / H(P, Q_M)` exceeds 1 when
//! `P` looks more like the always-killed ideal. `R` is graded on a symmetric
//! empirical scale anchored at 0.82 (and its reciprocal-style mirror 1.22).

use alloc::format;
use alloc::string::String;

use libm::{exp, expm1, fabs, sqrt};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{BaggedPosterior, BetaDist, Density};
use crate::quad::{integrate, QuadConfig};
use crate::special::ln_beta;

/// Closed-form Hellinger distance between two Beta distributions, computed
/// through log-beta functions.
pub fn hellinger_beta(p: &BetaDist, q: &BetaDist) -> f64 {
    let ln_bc = ln_beta(0.5 * (p.alpha + q.alpha), 0.5 * (p.beta + q.beta))
        - 0.5 * (ln_beta(p.alpha, p.beta) + ln_beta(q.alpha, q.beta));
    // 1 - BC, accurate when BC is close to 1
    let radicand = -expm1(ln_bc);
    if radicand <= 0.0 {
        debug_assert!(radicand > -1e-12, "Bhattacharyya coefficient above 1: {radicand}");
        return 0.0;
    }
    sqrt(radicand).min(1.0)
}

/// Hellinger distance between two densities on `[0, 1]` by adaptive quadrature
/// of the Bhattacharyya integrand `sqrt(p q)`.
///
/// Both densities must integrate to 1 within 1e-6; this is checked.
pub fn hellinger_numeric<P: Density + ?Sized, Q: Density + ?Sized>(p: &P, q: &Q) -> Result<f64> {
    let cfg = QuadConfig::default();
    for (name, mass) in [
        ("first", integrate(|x| p.pdf(x), 0.0, 1.0, &cfg)?.value),
        ("second", integrate(|x| q.pdf(x), 0.0, 1.0, &cfg)?.value),
    ] {
        if fabs(mass - 1.0) > 1e-6 {
            return Err(Error::Tolerance(format!("{name} density integrates to {mass}, not 1")));
        }
    }
    let bc = integrate(|x| exp(0.5 * (p.ln_pdf(x) + q.ln_pdf(x))), 0.0, 1.0, &cfg)?.value;
    Ok(sqrt((1.0 - bc).max(0.0)).min(1.0))
}

/// Posteriors under the all-"not mutant" and all-"mutant" trial outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IdealPosteriors {
    pub q_not_killed: BetaDist,
    pub q_killed: BetaDist,
}

impl IdealPosteriors {
    pub fn new(trials: u32, prior_a: f64, prior_b: f64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::config("ideal posteriors need at least one trial"));
        }
        let n = trials as f64;
        Ok(Self {
            q_not_killed: BetaDist::new(prior_a, n + prior_b)?,
            q_killed: BetaDist::new(n + prior_a, prior_b)?,
        })
    }
}

/// Effect strength of a similarity ratio, ordered from strongest evidence
/// against killing to strongest evidence for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum EffectClass {
    VeryStrongNotKilled,
    StrongNotKilled,
    MediumNotKilled,
    WeakNotKilled,
    Negligible,
    WeakKilled,
    MediumKilled,
    StrongKilled,
    VeryStrongKilled,
}

impl EffectClass {
    /// Table mark: `++`, `+`, `±`, `-` or `o`.
    pub fn mark(self) -> &'static str {
        use EffectClass::*;
        match self {
            VeryStrongNotKilled | VeryStrongKilled => "++",
            StrongNotKilled | StrongKilled => "+",
            MediumNotKilled | MediumKilled => "±",
            WeakNotKilled | WeakKilled => "-",
            Negligible => "o",
        }
    }

    pub fn as_str(self) -> &'static str {
        use EffectClass::*;
        match self {
            VeryStrongNotKilled => "very-strong-not-killed",
            StrongNotKilled => "strong-not-killed",
            MediumNotKilled => "medium-not-killed",
            WeakNotKilled => "weak-not-killed",
            Negligible => "negligible",
            WeakKilled => "weak-killed",
            MediumKilled => "medium-killed",
            StrongKilled => "strong-killed",
            VeryStrongKilled => "very-strong-killed",
        }
    }
}

/// Band edges of the effect scale.
///
/// Below 1 a band owns its lower edge (`[0.82, 0.87)` is strong); above 1 it
/// owns its upper edge (`(1.15, 1.22]` is strong); `[0.97, 1.03]` is negligible.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EffectScale {
    /// Lower edges of strong, medium, weak and negligible.
    pub below: [f64; 4],
    /// Upper edges of negligible, weak, medium and strong.
    pub above: [f64; 4],
}

impl Default for EffectScale {
    fn default() -> Self {
        Self { below: [0.82, 0.87, 0.92, 0.97], above: [1.03, 1.09, 1.15, 1.22] }
    }
}

impl EffectScale {
    pub fn classify(&self, ratio: f64) -> EffectClass {
        use EffectClass::*;
        if ratio.is_nan() {
            return Negligible;
        }
        let [s, m, w, n] = self.below;
        let [n_hi, w_hi, m_hi, s_hi] = self.above;
        if ratio < s {
            VeryStrongNotKilled
        } else if ratio < m {
            StrongNotKilled
        } else if ratio < w {
            MediumNotKilled
        } else if ratio < n {
            WeakNotKilled
        } else if ratio <= n_hi {
            Negligible
        } else if ratio <= w_hi {
            WeakKilled
        } else if ratio <= m_hi {
            MediumKilled
        } else if ratio <= s_hi {
            StrongKilled
        } else {
            VeryStrongKilled
        }
    }
}

/// Grades a similarity ratio on the default scale.
pub fn classify_effect(ratio: f64) -> EffectClass {
    EffectScale::default().classify(ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum Verdict {
    LikelyKilled,
    LikelyNotKilled,
    Inconclusive,
}

impl Verdict {
    /// Inconclusive verdicts count as not killed.
    pub fn counts_as_killed(self) -> bool {
        self == Verdict::LikelyKilled
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VerdictPolicy {
    pub killed_from: EffectClass,
    pub not_killed_up_to: EffectClass,
}

impl Default for VerdictPolicy {
    fn default() -> Self {
        Self { killed_from: EffectClass::StrongKilled, not_killed_up_to: EffectClass::StrongNotKilled }
    }
}

impl VerdictPolicy {
    pub fn verdict(&self, class: EffectClass) -> Verdict {
        if class >= self.killed_from {
            Verdict::LikelyKilled
        } else if class <= self.not_killed_up_to {
            Verdict::LikelyNotKilled
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Closed-form side calculations on the moment-matched Beta projection.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Diagnostics {
    pub moment_matched: BetaDist,
    pub projected_h_to_not_killed: f64,
    pub projected_h_to_killed: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EffectReport {
    /// `H(P, Q_H) / H(P, Q_M)`; `+∞` when `P` coincides with the killed ideal.
    pub ratio: f64,
    pub effect_class: EffectClass,
    pub verdict: Verdict,
    pub h_to_not_killed: f64,
    pub h_to_killed: f64,
    pub diagnostics: Option<Diagnostics>,
}

impl EffectReport {
    /// Two decimals, capped at `>2`.
    pub fn display_ratio(&self) -> String {
        display_ratio(self.ratio)
    }
}

pub fn display_ratio(ratio: f64) -> String {
    if ratio > 2.0 {
        String::from(">2")
    } else {
        format!("{ratio:.2}")
    }
}

/// Similarity ratio with the default scale and verdict policy.
pub fn similarity_ratio(p: &BaggedPosterior, ideals: &IdealPosteriors) -> Result<EffectReport> {
    similarity_ratio_with(p, ideals, &EffectScale::default(), &VerdictPolicy::default())
}

pub fn similarity_ratio_with(
    p: &BaggedPosterior,
    ideals: &IdealPosteriors,
    scale: &EffectScale,
    policy: &VerdictPolicy,
) -> Result<EffectReport> {
    let h_to_not_killed = hellinger_numeric(p, &ideals.q_not_killed)?;
    let h_to_killed = hellinger_numeric(p, &ideals.q_killed)?;
    let ratio = if h_to_killed > 0.0 { h_to_not_killed / h_to_killed } else { f64::INFINITY };
    let effect_class = scale.classify(ratio);
    let diagnostics = p.moment_matched().ok().map(|mm| Diagnostics {
        moment_matched: mm,
        projected_h_to_not_killed: hellinger_beta(&mm, &ideals.q_not_killed),
        projected_h_to_killed: hellinger_beta(&mm, &ideals.q_killed),
    });
    Ok(EffectReport {
        ratio,
        effect_class,
        verdict: policy.verdict(effect_class),
        h_to_not_killed,
        h_to_killed,
        diagnostics,
    })
}

/// Fraction of ratios strictly above `theta`.
pub fn mutation_score_of_ratios(ratios: &[f64], theta: f64) -> Result<f64> {
    if ratios.is_empty() {
        return Err(Error::data("mutation score of an empty set of mutations"));
    }
    if theta.is_nan() || theta <= 0.0 {
        return Err(Error::config(format!("theta must be positive, got {theta}")));
    }
    Ok(ratios.iter().filter(|&&r| r > theta).count() as f64 / ratios.len() as f64)
}

/// Extended mutation score: fraction of mutations with `R > θ`.
pub fn mutation_score(reports: &[EffectReport], theta: f64) -> Result<f64> {
    let ratios: alloc::vec::Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    mutation_score_of_ratios(&ratios, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use EffectClass::*;

    fn beta(a: f64, b: f64) -> BetaDist {
        BetaDist::new(a, b).unwrap()
    }

    #[test]
    fn hellinger_closed_form_examples() {
        assert_eq!(hellinger_beta(&beta(3.0, 4.0), &beta(3.0, 4.0)), 0.0);
        // 1 - (2/3)/sqrt(1/2)
        let h = hellinger_beta(&beta(1.0, 1.0), &beta(2.0, 1.0));
        assert!((h - 0.239_146_311_738_100_53).abs() < 1e-14, "{h}");
        assert!(hellinger_beta(&beta(1.0, 101.0), &beta(101.0, 1.0)) > 1.0 - 1e-6);
    }

    #[test]
    fn hellinger_numeric_examples() {
        let uniform = |_x: f64| 1.0;
        assert!(hellinger_numeric(&uniform, &uniform).unwrap() < 1e-7);
        let mix = BaggedPosterior::from_components(vec![beta(2.0, 2.0), beta(2.0, 2.0)]).unwrap();
        assert!(hellinger_numeric(&mix, &beta(2.0, 2.0)).unwrap() < 1e-7);
        let closed = hellinger_beta(&beta(5.0, 40.0), &beta(9.0, 30.0));
        let numeric = hellinger_numeric(&beta(5.0, 40.0), &beta(9.0, 30.0)).unwrap();
        assert!((closed - numeric).abs() < 1e-8);
    }

    #[test]
    fn unnormalised_density_is_rejected() {
        let half = |_x: f64| 0.5;
        assert!(matches!(hellinger_numeric(&half, &beta(2.0, 2.0)), Err(Error::Tolerance(_))));
    }

    #[test]
    fn scale_examples() {
        assert_eq!(classify_effect(0.72), VeryStrongNotKilled);
        assert_eq!(classify_effect(1.05), WeakKilled);
        assert_eq!(classify_effect(1.00), Negligible);
        assert_eq!(classify_effect(0.82), StrongNotKilled);
        assert_eq!(classify_effect(0.97), Negligible);
        assert_eq!(classify_effect(1.03), Negligible);
        assert_eq!(classify_effect(1.15), MediumKilled);
        assert_eq!(classify_effect(1.22), StrongKilled);
        assert_eq!(classify_effect(f64::INFINITY), VeryStrongKilled);
        assert_eq!(classify_effect(0.0), VeryStrongNotKilled);
    }

    #[test]
    fn verdict_policy() {
        let p = VerdictPolicy::default();
        assert_eq!(p.verdict(StrongKilled), Verdict::LikelyKilled);
        assert_eq!(p.verdict(MediumKilled), Verdict::Inconclusive);
        assert_eq!(p.verdict(StrongNotKilled), Verdict::LikelyNotKilled);
        assert!(!Verdict::Inconclusive.counts_as_killed());
    }

    #[test]
    fn ratio_of_ideal_not_killed_is_zero() {
        let ideals = IdealPosteriors::new(100, 1.0, 1.0).unwrap();
        let p = BaggedPosterior::from_components(vec![ideals.q_not_killed]).unwrap();
        let rep = similarity_ratio(&p, &ideals).unwrap();
        assert!(rep.ratio < 1e-6, "{rep:?}");
        assert_eq!(rep.effect_class, VeryStrongNotKilled);
        assert_eq!(rep.verdict, Verdict::LikelyNotKilled);

        let p = BaggedPosterior::from_components(vec![ideals.q_killed]).unwrap();
        let rep = similarity_ratio(&p, &ideals).unwrap();
        assert!(rep.ratio > 1e3);
        assert_eq!(rep.display_ratio(), ">2");
        assert_eq!(rep.effect_class, VeryStrongKilled);
    }

    #[test]
    fn score_examples() {
        assert!((mutation_score_of_ratios(&[2.5, 1.0, 0.9], 1.15).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mutation_score_of_ratios(&[2.0, 3.0], 1.15).unwrap(), 1.0);
        assert!(mutation_score_of_ratios(&[], 1.15).is_err());
        assert_eq!(display_ratio(0.914), "0.91");
    }
}
