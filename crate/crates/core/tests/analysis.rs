use negbound::analysis::*;
use negbound::datamodel::EmbeddingSet;
use negbound::Error;
use proptest::prelude::*;

#[test]
fn cosine_histogram_examples() {
    let same = EmbeddingSet::from_rows(&vec![vec![0.6, 0.8]; 5], vec![0; 5], 1, true).unwrap();
    let h = within_class_cosine_histogram(&same, 0, None).unwrap();
    assert_eq!(h.total, 10);
    assert_eq!(h.n_bins(), 3);
    assert_eq!(*h.counts.last().unwrap(), 10);
    assert_eq!(*h.bin_edges.last().unwrap(), 1.0);

    let ortho = EmbeddingSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 0], 1, true).unwrap();
    assert_eq!(within_class_cosines(&ortho, 0).unwrap(), vec![0.0]);

    let s = 0.75f64.sqrt();
    let three = EmbeddingSet::from_rows(
        &[vec![1.0, 0.0], vec![0.5, s], vec![0.5, s]],
        vec![0, 0, 0],
        1,
        true,
    )
    .unwrap();
    let cos = within_class_cosines(&three, 0).unwrap();
    assert_eq!(cos.len(), 3);
    assert_eq!(within_class_cosine_histogram(&three, 0, None).unwrap().total, 3);

    let single = EmbeddingSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1], 2, true).unwrap();
    assert!(within_class_cosine_histogram(&single, 0, None).is_err());
}

#[test]
fn norm_histogram_examples() {
    let raw = EmbeddingSet::from_rows(&[vec![3.0, 0.0], vec![0.0, 4.0], vec![3.0, 4.0]], vec![0, 0, 0], 1, false)
        .unwrap();
    let h = norm_histogram(&raw, None).unwrap();
    assert_eq!(h.total, 3);
    assert_eq!(h.n_bins(), 1);
    let flat = EmbeddingSet::from_rows(&vec![vec![2.0, 0.0]; 9], vec![0; 9], 1, false).unwrap();
    let h = norm_histogram(&flat, None).unwrap();
    assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
    let empty = EmbeddingSet::new(vec![], 2, vec![], 1, false).unwrap();
    assert!(norm_histogram(&empty, None).is_err());
    let unit = EmbeddingSet::from_rows(&[vec![1.0, 0.0]], vec![0], 1, true).unwrap();
    assert!(norm_histogram(&unit, None).is_err());
    let range = shared_norm_range(&[&raw, &flat]).unwrap();
    assert_eq!(range, (2.0, 5.0));
    let a = norm_histogram(&raw, Some(range)).unwrap();
    let b = norm_histogram(&flat, Some(range)).unwrap();
    assert_eq!(a.bin_edges.len(), 2);
    // ⌊√3⌋ and ⌊√9⌋ bins on the shared range.
    assert_eq!(b.bin_edges.len(), 4);
    assert!(matches!(wasserstein1(&a, &b), Err(Error::EdgeMismatch)));
}

#[test]
fn wasserstein_examples() {
    let a = Histogram::from_values(&[0.1, 0.2], 0.0, 1.0, 4).unwrap();
    assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
    let b = Histogram::from_values(&[0.3, 0.4], 0.0, 1.0, 4).unwrap();
    assert!((wasserstein1(&a, &b).unwrap() - 0.25).abs() < 1e-15);
    let c = Histogram::from_values(&[0.3], 0.0, 1.0, 5).unwrap();
    assert!(matches!(wasserstein1(&a, &c), Err(Error::EdgeMismatch)));
}

#[test]
fn relative_change_examples() {
    assert_eq!(relative_change_curve(0.5, &[0.5, 0.5, 1.0]).unwrap(), vec![1.0, 1.0, 2.0]);
    assert!(relative_change_curve(0.0, &[1.0]).is_err());
}

#[test]
fn constant_scores_uniform_optimum() {
    for n in [3, 4, 5] {
        let r = verify_constant_scores(n, 2, 200_000, 1.0, 7).unwrap();
        assert!(r.enumerated);
        assert!(r.spread < 1e-4, "{r:?}");
        assert!(r.gradient_norm_at_uniform < 1e-10);
        assert!(r.loss_at_optimum <= r.loss_at_uniform + 1e-12);
    }
    let r = verify_constant_scores(3, 1, 200_000, 1.0, 3).unwrap();
    assert!(r.spread < 1e-4);
    assert!(matches!(verify_constant_scores(4, 3, 1, 1.0, 0), Err(Error::NoConvergence { .. })));
}

fn random_hist(masses: &[u8]) -> Histogram {
    let values: Vec<f64> = masses
        .iter()
        .enumerate()
        .flat_map(|(i, &m)| std::iter::repeat((i as f64 + 0.5) / masses.len() as f64).take(m as usize))
        .collect();
    Histogram::from_values(&values, 0.0, 1.0, masses.len()).unwrap()
}

proptest! {
    #[test]
    fn w1_is_a_metric(
        a in prop::collection::vec(0u8..5, 6),
        b in prop::collection::vec(0u8..5, 6),
        c in prop::collection::vec(0u8..5, 6),
    ) {
        prop_assume!(a.iter().any(|&x| x > 0) && b.iter().any(|&x| x > 0) && c.iter().any(|&x| x > 0));
        let (ha, hb, hc) = (random_hist(&a), random_hist(&b), random_hist(&c));
        let ab = wasserstein1(&ha, &hb).unwrap();
        prop_assert!((ab - wasserstein1(&hb, &ha).unwrap()).abs() < 1e-15);
        prop_assert!(ab <= wasserstein1(&ha, &hc).unwrap() + wasserstein1(&hc, &hb).unwrap() + 1e-12);
    }

    #[test]
    fn uniform_gradient_vanishes(n in 2usize..6, k in 1usize..5) {
        let f = subset_family(n, k, 0).unwrap();
        prop_assume!(f.enumerated);
        let g = f.gradient(&vec![0.0; n]);
        prop_assert!(g.iter().all(|v| v.abs() < 1e-10), "{:?}", g);
    }

    #[test]
    fn shifting_scores_leaves_loss_unchanged(shift in -5.0f64..5.0, q in prop::collection::vec(-2.0f64..2.0, 4)) {
        let f = subset_family(4, 2, 0).unwrap();
        let moved: Vec<f64> = q.iter().map(|v| v + shift).collect();
        prop_assert!((f.loss(&q) - f.loss(&moved)).abs() < 1e-12);
    }
}
