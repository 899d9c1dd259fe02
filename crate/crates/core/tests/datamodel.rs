use negbound::datamodel::*;
use negbound::numeric::l2_norm;
use negbound::probkit::collision_probability;
use negbound::rng::{stream, Purpose};
use negbound::Error;
use proptest::prelude::*;

fn uniform_set(n_classes: usize, per_class: usize, dim: usize) -> EmbeddingSet {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..n_classes {
        for i in 0..per_class {
            let mut v = vec![0.1; dim];
            v[c % dim] += 1.0 + i as f64 * 0.01;
            let n = l2_norm(&v);
            rows.push(v.iter().map(|x| x / n).collect());
            labels.push(c);
        }
    }
    EmbeddingSet::from_rows(&rows, labels, n_classes, true).unwrap()
}

#[test]
fn three_by_two_round_trip_both_formats() {
    let set = EmbeddingSet::from_rows(
        &[vec![0.25, -1.5], vec![3.0e-5, 7.125], vec![-2.0, 0.333333333]],
        vec![1, 0, 1],
        2,
        false,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, fmt) in [("a.tsv", Format::Tsv), ("a.bin", Format::Packed)] {
        let p = dir.path().join(name);
        save_embeddings(&set, &p, fmt).unwrap();
        let back = load_embeddings(&p, fmt).unwrap();
        assert_eq!(back.labels(), set.labels());
        for (a, b) in back.features().iter().zip(set.features()) {
            assert!((a - b).abs() <= 1e-7 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn nan_row_and_short_row_are_reported() {
    let err = EmbeddingSet::new(vec![1.0, 0.0, f64::NAN, 1.0], 2, vec![0, 0], 1, false).unwrap_err();
    assert!(matches!(err, Error::NonFinite { row: 1 }));
    let text = "#negbound-embeddings v1 n=2 h=4 c=1 normalized=0\n0\t1\t2\t3\t4\n0\t1\t2\t3\n";
    let err = io::read_tsv(text.as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
}

#[test]
fn normalisation_examples() {
    let set = EmbeddingSet::from_rows(&[vec![3.0, 4.0], vec![0.6, 0.8]], vec![0, 0], 1, false).unwrap();
    let n = l2_normalize(&set).unwrap();
    assert!(n.is_normalized());
    assert!((n.row(0)[0] - 0.6).abs() < 1e-15 && (n.row(0)[1] - 0.8).abs() < 1e-15);
    assert!((n.row(1)[0] - 0.6).abs() < 1e-12);
    let zero = EmbeddingSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]], vec![0, 0], 1, false).unwrap();
    assert!(matches!(l2_normalize(&zero), Err(Error::ZeroNorm { row: 1 })));
}

#[test]
fn augmentation_examples() {
    let x = vec![0.3, -0.2, 0.9];
    let mut rng = stream(1, Purpose::Augment, &[]);
    assert_eq!(apply_augmentation(&x, &AugmentationSpec::identity(), &mut rng).unwrap(), x);
    let spec = AugmentationSpec::gaussian(0.1, false);
    let a = apply_augmentation(&x, &spec, &mut stream(5, Purpose::Augment, &[2])).unwrap();
    let b = apply_augmentation(&x, &spec, &mut stream(5, Purpose::Augment, &[2])).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, x);

    let ones = vec![1.0; 100_000];
    let d = apply_augmentation(&ones, &AugmentationSpec::dropout(0.2, false), &mut rng).unwrap();
    let frac = d.iter().filter(|v| **v == 0.0).count() as f64 / ones.len() as f64;
    assert!((frac - 0.2).abs() < 0.005, "{frac}");
}

#[test]
fn batches_replay_and_single_class() {
    let set = uniform_set(10, 20, 12);
    let sampler = BatchSampler::new(&set, AugmentationSpec::gaussian(0.05, true), 31, None).unwrap();
    let a = sample_batch(&sampler, 3, 17).unwrap();
    let b = sample_batch(&sampler, 3, 17).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.k(), 31);
    assert_eq!(a.candidates().len(), 32);

    let one = uniform_set(1, 5, 3);
    let s1 = BatchSampler::new(&one, AugmentationSpec::identity(), 4, None).unwrap();
    let b = sample_batch(&s1, 0, 0).unwrap();
    assert_eq!(b.anchor_class, 0);
    assert!(b.negative_classes.iter().all(|&c| c == 0));
}

#[test]
fn empirical_collision_rate_matches_closed_form() {
    let set = uniform_set(10, 3, 10);
    let sampler = BatchSampler::new(&set, AugmentationSpec::identity(), 31, None).unwrap();
    let trials = 100_000;
    let hits = (0..trials)
        .filter(|&i| {
            let mut rng = stream(9, Purpose::Batch, &[i as u64]);
            let (c, negs) = sampler.tuples().sample_classes(&mut rng);
            negs.contains(&c)
        })
        .count();
    let rate = hits as f64 / trials as f64;
    let exact = collision_probability(&set.empirical_distribution().unwrap(), 31).value;
    assert!((exact - 0.9618).abs() < 1e-3);
    assert!((rate - exact).abs() < 0.003, "{rate} vs {exact}");
}

#[test]
fn anchor_class_frequencies_follow_override() {
    let set = uniform_set(4, 5, 4);
    let dist = negbound::probkit::ClassDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let sampler = TupleSampler::new(set.class_members(), 1, Some(dist.clone())).unwrap();
    let n = 1_000_000u64;
    let mut counts = [0u64; 4];
    let mut rng = stream(2, Purpose::Batch, &[]);
    for _ in 0..n {
        counts[sampler.sample_classes(&mut rng).0] += 1;
    }
    for (c, &p) in dist.probs().iter().enumerate() {
        let f = counts[c] as f64 / n as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() < 4.0 * sd, "class {c}: {f} vs {p}");
    }
}

#[test]
fn class_mean_examples() {
    let set = EmbeddingSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 0], 1, true).unwrap();
    let m = compute_class_means(&set, &AugmentationSpec::identity(), 1, 0).unwrap();
    assert_eq!(m.class_mean(0), &[0.5, 0.5]);
    let set = uniform_set(3, 4, 5);
    let m1 = compute_class_means(&set, &AugmentationSpec::identity(), 1, 0).unwrap();
    let m10 = compute_class_means(&set, &AugmentationSpec::identity(), 10, 0).unwrap();
    for (a, b) in m1.class_means.iter().zip(&m10.class_means) {
        assert!((a - b).abs() < 1e-15);
    }
    let spec = AugmentationSpec::gaussian(0.1, true);
    assert_eq!(
        compute_class_means(&set, &spec, 10, 4).unwrap(),
        compute_class_means(&set, &spec, 10, 4).unwrap()
    );
    let gap = set.with_class_count(4).unwrap();
    assert!(matches!(compute_class_means(&gap, &spec, 1, 0), Err(Error::EmptyClass(3))));
}

proptest! {
    #[test]
    fn tsv_round_trip_preserves_values(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..12),
        seed in 0u64..1000,
    ) {
        let labels: Vec<usize> = (0..rows.len()).map(|i| (i + seed as usize) % 3).collect();
        let set = EmbeddingSet::from_rows(&rows, labels, 3, false).unwrap();
        let mut buf = Vec::new();
        io::write_tsv(&set, &mut buf).unwrap();
        let back = io::read_tsv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.labels(), set.labels());
        for (a, b) in back.features().iter().zip(set.features()) {
            prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300));
        }
        let mut packed = Vec::new();
        io::write_packed(&set, &mut packed).unwrap();
        let back = io::read_packed(packed.as_slice()).unwrap();
        for (a, b) in back.features().iter().zip(set.features()) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
    }
}
