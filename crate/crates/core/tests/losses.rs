use negbound::datamodel::*;
use negbound::losses::*;
use negbound::numeric::l2_norm;
use negbound::rng::{stream, Purpose};
use proptest::prelude::*;
use rand::Rng;

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = l2_norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn info_nce_examples() {
    let z = [1.0, 0.0];
    let same = [0.6, 0.8];
    assert!((info_nce(&z, &[&same, &same], 1.0) - 2f64.ln()).abs() < 1e-15);
    let v = info_nce(&z, &[&[1.0, 0.0], &[-1.0, 0.0]], 1.0);
    assert!((v - (1.0 + (-2f64).exp()).ln()).abs() < 1e-15);
    assert!((v - 0.1269).abs() < 1e-4);
}

#[test]
fn temperature_doubling_is_exact() {
    let mut rng = stream(1, Purpose::Synthetic, &[]);
    for _ in 0..200 {
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cands: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let halved: Vec<Vec<f64>> = cands.iter().map(|c| c.iter().map(|x| x / 2.0).collect()).collect();
        let a = info_nce(&z, &cands.iter().map(Vec::as_slice).collect::<Vec<_>>(), 2.0);
        let b = info_nce(&z, &halved.iter().map(Vec::as_slice).collect::<Vec<_>>(), 1.0);
        assert_eq!(a, b);
    }
}

fn constant_set(n: usize, classes: usize) -> EmbeddingSet {
    let rows = vec![vec![0.0, 1.0, 0.0]; n];
    EmbeddingSet::from_rows(&rows, (0..n).map(|i| i % classes).collect(), classes, true).unwrap()
}

#[test]
fn constant_encoder_gives_log_k_plus_one() {
    let set = constant_set(40, 4);
    let est = estimate_l_info(&set, &AugmentationSpec::identity(), 15, 1.0, 500, 0, None).unwrap();
    assert!((est.value - 16f64.ln()).abs() < 1e-12);
    assert!(est.stderr < 1e-12);
    let again = estimate_l_info(&set, &AugmentationSpec::identity(), 15, 1.0, 500, 0, None).unwrap();
    assert_eq!(est, again);
}

#[test]
fn mean_classifier_examples() {
    let set = EmbeddingSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1], 2, true).unwrap();
    let means = MeanRepresentations::from_class_means(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let l = mean_classifier_loss(&set, &means, 1.0, None).unwrap();
    assert!((l.value - (1.0 + (-1f64).exp()).ln()).abs() < 1e-15);
    assert!((l.value - 0.3133).abs() < 1e-4);
    let only = mean_classifier_loss(&set, &means, 1.0, Some(&[0])).unwrap();
    assert_eq!(only.value, 0.0);
    assert_eq!(only.n_samples, 1);
    assert!(mean_classifier_loss(&set, &means, 1.0, Some(&[])).is_err());
}

#[test]
fn duplicated_bag_costs_log_copies() {
    let means = MeanRepresentations::from_class_means(vec![vec![0.6, 0.8], vec![0.0, 1.0]]).unwrap();
    let z = [0.28, 0.96];
    for copies in 1..9 {
        let bag = vec![1; copies];
        let v = sub_class_loss(&z, 1, &bag, &means, 0.7);
        assert!((v - (copies as f64).ln()).abs() < 1e-14, "{copies}: {v}");
    }
}

#[test]
fn gap_term_examples() {
    let set = constant_set(12, 3);
    let m = compute_class_means(&set, &AugmentationSpec::identity(), 1, 0).unwrap();
    assert_eq!(gap_term_d(&set, &m, 1.0).unwrap().value, 0.0);

    let rows: Vec<Vec<f64>> = (0..20).map(|i| unit(vec![1.0, i as f64 * 0.1, (i % 3) as f64])).collect();
    let set = EmbeddingSet::from_rows(&rows, (0..20).map(|i| i % 2).collect(), 2, true).unwrap();
    let m = compute_class_means(&set, &AugmentationSpec::identity(), 1, 0).unwrap();
    let t = 0.5;
    let d = gap_term_d(&set, &m, t).unwrap();
    let direct: f64 = (0..20)
        .map(|i| {
            let mu = m.class_mean(set.label(i));
            (set.row(i).iter().zip(mu).map(|(a, b)| a * b).sum::<f64>() - 1.0) / t
        })
        .sum::<f64>()
        / 20.0;
    assert!((d.value - direct).abs() < 1e-12);
    assert!(d.value <= 0.0);
}

#[test]
fn probe_matches_mean_classifier_at_start_and_separates() {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut rng = stream(4, Purpose::Synthetic, &[]);
    for i in 0..60 {
        let c = i % 2;
        let sign = if c == 0 { 1.0 } else { -1.0 };
        rows.push(unit(vec![sign * rng.random_range(0.2..1.0), rng.random_range(-1.0..1.0)]));
        labels.push(c);
    }
    let set = EmbeddingSet::from_rows(&rows, labels, 2, true).unwrap();
    let means = compute_class_means(&set, &AugmentationSpec::identity(), 1, 0).unwrap();
    let fit = train_linear_probe(&set, Some(&means), 1.0, &ProbeConfig::default()).unwrap();
    assert_eq!(fit.initial_loss, mean_classifier_loss(&set, &means, 1.0, None).unwrap().value);
    assert!(fit.final_loss.value <= fit.initial_loss + 1e-6);
    assert_eq!(fit.train_accuracy, 1.0);
}

fn random_tuple(seed: u64, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = stream(seed, Purpose::Synthetic, &[k as u64]);
    let mut draw = || unit((0..5).map(|_| rng.random_range(-1.0..1.0)).collect());
    let z = draw();
    let c = (0..=k).map(|_| draw()).collect();
    (z, c)
}

proptest! {
    #[test]
    fn removing_negatives_never_increases_loss(seed in 0u64..10_000, k in 1usize..20, mask in any::<u32>()) {
        let (z, cands) = random_tuple(seed, k);
        let all: Vec<&[f64]> = cands.iter().map(Vec::as_slice).collect();
        let kept: Vec<&[f64]> = std::iter::once(all[0])
            .chain(all[1..].iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, c)| *c))
            .collect();
        prop_assert!(info_nce(&z, &kept, 0.5) <= info_nce(&z, &all, 0.5) + 1e-12);
    }

    #[test]
    fn split_is_subadditive(seed in 0u64..10_000, k in 2usize..20, mask in any::<u32>()) {
        let (z, cands) = random_tuple(seed, k);
        let all: Vec<&[f64]> = cands.iter().map(Vec::as_slice).collect();
        let (mut a, mut b) = (vec![all[0]], vec![all[0]]);
        for (i, c) in all[1..].iter().enumerate() {
            if mask & (1 << i) != 0 { a.push(c) } else { b.push(c) }
        }
        prop_assert!(info_nce(&z, &all, 1.0) <= info_nce(&z, &a, 1.0) + info_nce(&z, &b, 1.0) + 1e-12);
    }

    #[test]
    fn temperature_scaling_identity(seed in 0u64..10_000, k in 1usize..12, t in 0.05f64..5.0) {
        let (z, cands) = random_tuple(seed, k);
        let scaled: Vec<Vec<f64>> = cands.iter().map(|c| c.iter().map(|x| x / t).collect()).collect();
        let a = info_nce(&z, &cands.iter().map(Vec::as_slice).collect::<Vec<_>>(), t);
        let b = info_nce(&z, &scaled.iter().map(Vec::as_slice).collect::<Vec<_>>(), 1.0);
        prop_assert!((a - b).abs() < 1e-12);
    }
}
