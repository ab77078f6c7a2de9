use pmt_core::data::PoolMeta;
use pmt_core::decision::mutation_score_of_ratios;
use pmt_core::posterior::{bag_metrics, Density};
use pmt_core::quad::{integrate, QuadConfig};
use pmt_core::synth::{gen_population, PopulationSpec};
use pmt_core::{
    beta_posterior, classify_effect, cohens_d, credible_interval, hellinger_beta, jackknife_error, two_sample_p_value,
    BaggedPosterior, BetaDist, IntervalKind, MetricKind, MutationTest, RunConfig, SplitStream, TrialOutcome,
};
use proptest::prelude::*;

fn sample(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn beta() -> impl Strategy<Value = BetaDist> {
    (1.0f64..200.0, 1.0f64..200.0).prop_map(|(a, b)| BetaDist::new(a, b).unwrap())
}

fn mixture() -> impl Strategy<Value = BaggedPosterior> {
    prop::collection::vec((0.5f64..150.0, 0.5f64..150.0), 1..12).prop_map(|ps| {
        BaggedPosterior::from_components(ps.into_iter().map(|(a, b)| BetaDist::new(a, b).unwrap()).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn p_value_symmetric_and_d_antisymmetric(x in sample(2..30), y in sample(2..30)) {
        let (pxy, pyx) = (two_sample_p_value(&x, &y).unwrap(), two_sample_p_value(&y, &x).unwrap());
        prop_assert!((pxy - pyx).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&pxy));
        let (dxy, dyx) = (cohens_d(&x, &y).unwrap(), cohens_d(&y, &x).unwrap());
        if dxy.is_finite() {
            prop_assert!((dxy + dyx).abs() < 1e-9);
        }
    }

    #[test]
    fn verdict_invariant_under_positive_affine_maps(
        x in sample(5..25), y in sample(5..25), scale in 0.01f64..100.0, shift in -50.0f64..50.0,
    ) {
        let test = MutationTest::statistical();
        let map = |v: &[f64]| v.iter().map(|a| scale * a + shift).collect::<Vec<_>>();
        let before = pmt_core::mutation_test::run_test_metrics(&test, &x, &y).unwrap();
        let after = pmt_core::mutation_test::run_test_metrics(&test, &map(&x), &map(&y)).unwrap();
        let (p0, p1) = (before.p_value.unwrap(), after.p_value.unwrap());
        // verdicts agree away from the thresholds
        prop_assert!((p0 - p1).abs() < 1e-8);
        let near = (p0 - 0.05).abs() < 1e-8 || (before.effect_size.unwrap().abs() - 0.5).abs() < 1e-8;
        if !near {
            prop_assert_eq!(before.killed, after.killed);
        }
    }

    #[test]
    fn posterior_mean_lies_between_prior_mean_and_rate(k in 0u32..=100, a in 0.1f64..5.0, b in 0.1f64..5.0) {
        let post = beta_posterior(TrialOutcome::new(k, 100).unwrap(), a, b).unwrap();
        prop_assert_eq!(post.alpha, a + k as f64);
        prop_assert_eq!(post.beta, (100 - k) as f64 + b);
        let prior = a / (a + b);
        let rate = k as f64 / 100.0;
        let (lo, hi) = (prior.min(rate), prior.max(rate));
        prop_assert!(post.mean() >= lo - 1e-15 && post.mean() <= hi + 1e-15);
    }

    #[test]
    fn mixture_cdf_is_a_distribution_function(p in mixture()) {
        prop_assert_eq!(p.cdf(0.0), 0.0);
        prop_assert!((p.cdf(1.0) - 1.0).abs() < 1e-15);
        let mut last = 0.0;
        for i in 0..=200 {
            let c = p.cdf(i as f64 / 200.0);
            prop_assert!(c >= last - 1e-15);
            last = c;
        }
    }

    #[test]
    fn mixture_variance_identity(p in mixture()) {
        let b = p.components().len() as f64;
        let second = p.components().iter().map(BetaDist::second_moment).sum::<f64>() / b;
        prop_assert!((p.variance() - (second - p.mean() * p.mean())).abs() < 1e-12);
    }

    #[test]
    fn credible_mass_by_quadrature(p in mixture(), level in 0.5f64..0.99) {
        for kind in [IntervalKind::EqualTailed, IntervalKind::Hdi, IntervalKind::MeanCentered] {
            let ci = credible_interval(&p, level, kind).unwrap();
            let mass = integrate(|x| p.pdf(x), ci.lo, ci.hi, &QuadConfig::default()).unwrap().value;
            prop_assert!((mass - level).abs() < 1e-6, "{:?}: mass {} level {}", kind, mass, level);
        }
    }

    #[test]
    fn hdi_never_wider_than_equal_tailed(p in mixture()) {
        let et = credible_interval(&p, 0.95, IntervalKind::EqualTailed).unwrap();
        let hdi = credible_interval(&p, 0.95, IntervalKind::Hdi).unwrap();
        prop_assert!(hdi.width() <= et.width() + 1e-9);
    }

    #[test]
    fn hellinger_symmetric_and_bounded(p in beta(), q in beta()) {
        let (pq, qp) = (hellinger_beta(&p, &q), hellinger_beta(&q, &p));
        prop_assert!((pq - qp).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert_eq!(hellinger_beta(&p, &p), 0.0);
    }

    #[test]
    fn classification_is_monotone(r1 in 0.0f64..3.0, r2 in 0.0f64..3.0) {
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        prop_assert!(classify_effect(lo) <= classify_effect(hi));
    }

    #[test]
    fn score_ignores_order(mut ratios in prop::collection::vec(0.0f64..3.0, 1..20), theta in 0.5f64..2.0) {
        let before = mutation_score_of_ratios(&ratios, theta).unwrap();
        ratios.reverse();
        prop_assert_eq!(before, mutation_score_of_ratios(&ratios, theta).unwrap());
        ratios.sort_by(f64::total_cmp);
        prop_assert_eq!(before, mutation_score_of_ratios(&ratios, theta).unwrap());
    }

    #[test]
    fn jackknife_se_of_mean(values in prop::collection::vec(-1e3f64..1e3, 2..60)) {
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0)).sqrt();
        let j = jackknife_error(&values, 0.95).unwrap();
        prop_assert!((j.se - sd / r.sqrt()).abs() <= 1e-12 * sd.max(1.0));
    }

    #[test]
    fn generated_pools_are_valid(size in 1usize..60, mu in 0.0f64..1.0, sigma in 0.001f64..0.3, seed: u64) {
        let meta = PoolMeta::identity("h", MetricKind::Accuracy);
        let pool = gen_population(&PopulationSpec::truncated_normal(meta.clone(), size, mu, sigma), &SplitStream::new(seed)).unwrap();
        prop_assert_eq!(pool.len(), size);
        prop_assert!(pmt_core::InstancePool::new(meta, pool.records().to_vec()).is_ok());
    }
}

fn small_cfg() -> RunConfig {
    RunConfig { trials: 30, bootstraps: 10, n1: 5, n2: 5, ..RunConfig::default() }
}

#[test]
fn bagging_is_deterministic_per_seed() {
    let h: Vec<f64> = (0..40).map(|i| 0.9 + 0.001 * (i % 11) as f64).collect();
    let m: Vec<f64> = (0..40).map(|i| 0.899 + 0.001 * (i % 13) as f64).collect();
    let test = MutationTest::statistical();
    let a = bag_metrics(&h, &m, &test, &small_cfg(), &SplitStream::new(5)).unwrap();
    let b = bag_metrics(&h, &m, &test, &small_cfg(), &SplitStream::new(5)).unwrap();
    let c = bag_metrics(&h, &m, &test, &small_cfg(), &SplitStream::new(6)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn all_zero_trials_collapse() {
    let h = vec![0.9; 30];
    let cfg = RunConfig { trials: 100, bootstraps: 20, ..RunConfig::default() };
    let bag = bag_metrics(&h, &h, &MutationTest::statistical(), &cfg, &SplitStream::new(1)).unwrap();
    assert!(bag.components().iter().all(|c| *c == BetaDist::new(1.0, 101.0).unwrap()));
}
