use negbound::numeric::harmonic;
use negbound::probkit::*;
use proptest::prelude::*;

fn uniform(n: usize) -> ClassDistribution {
    ClassDistribution::uniform(n).unwrap()
}

/// |a − b| within `sigmas` standard errors, taking the larger of the
/// empirical and the exact-value standard error.
fn within_sigmas(exact: f64, est: &ProbEstimate, trials: u64, sigmas: f64) -> bool {
    let se_exact = (exact * (1.0 - exact) / trials as f64).sqrt();
    (est.value - exact).abs() <= sigmas * est.stderr.max(se_exact)
}

#[test]
fn dp_and_inclusion_exclusion_agree() {
    for n in [2usize, 4, 10, 100] {
        for draws in n as u64..=8 * n as u64 {
            let dp = uniform_cover_dp(n, draws);
            let ie = uniform_cover_inclusion_exclusion(n, draws).unwrap();
            assert!((dp - ie).abs() < 1e-10, "n={n} d={draws}: {dp} vs {ie}");
        }
    }
}

#[test]
fn float_inclusion_exclusion_agrees_where_it_answers() {
    let mut answered = 0;
    for n in [2usize, 4, 10, 100] {
        for draws in n as u64..=8 * n as u64 {
            if let Ok(v) = uniform_cover_inclusion_exclusion_f64(n, draws) {
                answered += 1;
                let dp = uniform_cover_dp(n, draws);
                assert!((v - dp).abs() < 1e-7 * dp, "n={n} d={draws}: {v} vs {dp}");
            }
        }
    }
    assert!(answered > 100);
}

#[test]
fn simulation_brackets_exact_values() {
    for n in [2usize, 4, 10] {
        let trials = 200_000;
        let sample = simulate_stopping_times(&uniform(n), Some(8 * n as u64), 8 * n + 1, trials, 11);
        for draws in n as u64..=8 * n as u64 {
            let est = ProbEstimate {
                value: sample.completed_within(draws) as f64 / trials as f64,
                stderr: 0.0,
                method: Method::MonteCarlo,
            };
            let exact = uniform_cover_dp(n, draws);
            assert!(within_sigmas(exact, &est, trials, 4.5), "n={n} d={draws}: {} vs {exact}", est.value);
        }
    }
}

#[test]
fn mc_small_examples() {
    let d4 = uniform(4);
    let e = mc_all_classes(&d4, 4, 1_000_000, 1).unwrap();
    assert!((e.value - 0.09375).abs() <= 4.0 * e.stderr);
    assert!(e.stderr < 0.0003);
    assert_eq!(mc_all_classes(&d4, 0, 1000, 1).unwrap().value, 0.0);
    assert_eq!(mc_all_classes(&uniform(1), 1, 1000, 1).unwrap().value, 1.0);
    let again = mc_all_classes(&d4, 4, 1_000_000, 1).unwrap();
    assert_eq!(e, again);
    assert!(mc_all_classes(&d4, 4, 0, 1).is_err());
}

#[test]
fn pmf_prefix_sums_equal_cdf() {
    for n in [2usize, 4, 10, 30] {
        let d = uniform(n);
        let mut acc = 0.0;
        for draws in 1..=10 * n as u64 {
            acc += coupon_pmf(&d, draws).unwrap();
            let cdf = all_classes_probability(&d, draws).unwrap().value;
            assert!((acc - cdf).abs() < 1e-9, "n={n} d={draws}: {acc} vs {cdf}");
        }
    }
}

#[test]
fn expected_draws_matches_harmonic_closed_form() {
    for n in 1..=200u64 {
        let e = expected_draws(&uniform(n as usize)).unwrap();
        let closed = n as f64 * harmonic(n);
        assert!((e.value - closed).abs() < 1e-6, "n={n}: {} vs {closed}", e.value);
        assert!(e.stderr <= EXPECTED_DRAWS_TOLERANCE);
    }
}

#[test]
fn cover_probability_reaches_one() {
    for n in [2usize, 4, 10, 100] {
        let nf = n as f64;
        let draws = (20.0 * nf * nf.ln()).ceil() as u64;
        assert!(all_classes_probability(&uniform(n), draws).unwrap().value >= 1.0 - 1e-6);
    }
}

#[test]
fn non_uniform_routes_agree() {
    let d = ClassDistribution::new(vec![0.35, 0.25, 0.2, 0.1, 0.06, 0.04]).unwrap();
    for draws in [6u64, 10, 20, 40, 80] {
        let dp = all_classes_probability_with(&d, draws, CoverMethod::Dp).unwrap().value;
        let ie = all_classes_probability_with(&d, draws, CoverMethod::InclusionExclusion)
            .unwrap()
            .value;
        assert!((dp - ie).abs() < 1e-10, "d={draws}: {dp} vs {ie}");
        let mc = mc_all_classes(&d, draws, 200_000, 5).unwrap();
        assert!(within_sigmas(dp, &mc, 200_000, 4.0), "d={draws}: {mc:?} vs {dp}");
    }
    let e = expected_draws(&d).unwrap();
    let mc = mc_expected_draws(&d, 200_000, 9).unwrap();
    assert!((e.value - mc.value).abs() < 4.0 * mc.stderr, "{e:?} vs {mc:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coverage_monotone_in_draws(n in 1usize..40) {
        let d = uniform(n);
        let mut prev = 0.0;
        for draws in 0..50u64 {
            let v = all_classes_probability(&d, draws).unwrap().value;
            prop_assert!(v >= prev - 1e-15);
            prop_assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn collision_monotone_in_k(weights in prop::collection::vec(0.05f64..1.0, 1..12)) {
        let total: f64 = weights.iter().sum();
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let fix: f64 = probs.iter().sum();
        probs[0] += 1.0 - fix;
        let d = ClassDistribution::new(probs).unwrap();
        let mut prev = 0.0;
        for k in 0..50u64 {
            let v = collision_probability(&d, k).value;
            prop_assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn allocation_dp_agrees_with_subset_sum(
        weights in prop::collection::vec(0.05f64..1.0, 1..7),
        draws in 0u64..40,
    ) {
        let total: f64 = weights.iter().sum();
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let fix: f64 = probs.iter().sum();
        probs[0] += 1.0 - fix;
        let d = ClassDistribution::new(probs).unwrap();
        let a = cover_allocation_dp(&d, draws);
        let s = cover_subset_inclusion_exclusion(&d, draws);
        if let Ok(s) = s {
            prop_assert!((a - s).abs() < 1e-10);
        }
    }
}
