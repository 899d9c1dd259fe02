//! Labelled embedding sets, augmentations and contrastive batch sampling.

pub mod io;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, l2_norm, CompensatedSum};
use crate::probkit::{ClassDistribution, ClassSampler};
use crate::rng::{stream, Purpose};

pub use io::{load_embeddings, save_embeddings, Format};

pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;
pub const MAX_DROPOUT_RETRIES: usize = 100;

/// N labelled feature rows of dimension h, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    n_classes: usize,
    normalized: bool,
    class_counts: Vec<usize>,
}

impl EmbeddingSet {
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<usize>,
        n_classes: usize,
        normalized: bool,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        if n_classes == 0 {
            return Err(Error::InvalidArgument("at least one class is required".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature values do not form {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        let mut class_counts = vec![0; n_classes];
        for (row, &y) in labels.iter().enumerate() {
            if y >= n_classes {
                return Err(Error::InvalidArgument(format!(
                    "row {row}: class id {y} is not below the class count {n_classes}"
                )));
            }
            class_counts[y] += 1;
            let x = &features[row * dim..(row + 1) * dim];
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row });
            }
            if normalized {
                let norm = l2_norm(x);
                if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                    return Err(Error::InvalidArgument(format!(
                        "row {row}: norm {norm} is not 1 but the set is marked normalized"
                    )));
                }
            }
        }
        Ok(Self {
            features,
            dim,
            labels,
            n_classes,
            normalized,
            class_counts,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, n_classes: usize, normalized: bool) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(format!("row {r} has a different dimension")));
        }
        Self::new(rows.concat(), dim, labels, n_classes, normalized)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Row indices of each class, in row order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.n_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            members[y].push(i);
        }
        members
    }

    /// Class frequencies of the set. Fails if a class has no rows.
    pub fn empirical_distribution(&self) -> Result<ClassDistribution> {
        ClassDistribution::from_counts(&self.class_counts)
    }

    /// The same rows with the class count raised to `n_classes`.
    pub fn with_class_count(&self, n_classes: usize) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.dim,
            self.labels.clone(),
            n_classes,
            self.normalized,
        )
    }

    /// The rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, self.dim, labels, self.n_classes, self.normalized)
    }
}

/// Scales every row to unit length.
pub fn l2_normalize(set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let mut features = Vec::with_capacity(set.features.len());
    for (row, x) in set.rows().enumerate() {
        let norm = l2_norm(x);
        if norm == 0.0 {
            return Err(Error::ZeroNorm { row });
        }
        features.extend(x.iter().map(|v| v / norm));
    }
    EmbeddingSet::new(features, set.dim, set.labels.clone(), set.n_classes, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationKind {
    GaussianNoise,
    CoordinateDropout,
    Compose,
}

/// Stochastic perturbation applied to a vector before it is compared.
/// `Compose` applies dropout first, then noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationSpec {
    pub kind: AugmentationKind,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub drop_rate: f64,
    #[serde(default)]
    pub renormalize: bool,
}

impl AugmentationSpec {
    pub fn identity() -> Self {
        Self::gaussian(0.0, false)
    }

    pub fn gaussian(sigma: f64, renormalize: bool) -> Self {
        Self {
            kind: AugmentationKind::GaussianNoise,
            sigma,
            drop_rate: 0.0,
            renormalize,
        }
    }

    pub fn dropout(drop_rate: f64, renormalize: bool) -> Self {
        Self {
            kind: AugmentationKind::CoordinateDropout,
            sigma: 0.0,
            drop_rate,
            renormalize,
        }
    }

    pub fn compose(drop_rate: f64, sigma: f64, renormalize: bool) -> Self {
        Self {
            kind: AugmentationKind::Compose,
            sigma,
            drop_rate,
            renormalize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(Error::InvalidArgument(format!(
                "drop_rate must lie in [0, 1), got {}",
                self.drop_rate
            )));
        }
        Ok(())
    }

    fn uses_noise(&self) -> bool {
        matches!(self.kind, AugmentationKind::GaussianNoise | AugmentationKind::Compose) && self.sigma > 0.0
    }

    fn uses_dropout(&self) -> bool {
        matches!(self.kind, AugmentationKind::CoordinateDropout | AugmentationKind::Compose)
            && self.drop_rate > 0.0
    }

    /// True when applying the augmentation never changes its input (up to renormalising
    /// an already unit-length vector).
    pub fn is_deterministic(&self) -> bool {
        !self.uses_noise() && !self.uses_dropout()
    }
}

/// Applies one random draw of `spec` to `x`.
pub fn apply_augmentation<R: Rng + ?Sized>(x: &[f64], spec: &AugmentationSpec, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.len());
    apply_augmentation_into(x, spec, rng, &mut out)?;
    Ok(out)
}

/// As [`apply_augmentation`], writing into `out` (cleared first).
pub fn apply_augmentation_into<R: Rng + ?Sized>(
    x: &[f64],
    spec: &AugmentationSpec,
    rng: &mut R,
    out: &mut Vec<f64>,
) -> Result<()> {
    let dropout = spec.uses_dropout();
    let noise = spec.uses_noise();
    for _attempt in 0..=MAX_DROPOUT_RETRIES {
        out.clear();
        out.extend_from_slice(x);
        if dropout {
            for v in out.iter_mut() {
                if rng.random::<f64>() < spec.drop_rate {
                    *v = 0.0;
                }
            }
        }
        if noise {
            for v in out.iter_mut() {
                let e: f64 = rng.sample(StandardNormal);
                *v += spec.sigma * e;
            }
        }
        if !spec.renormalize {
            return Ok(());
        }
        let norm = l2_norm(out);
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
            return Ok(());
        }
        if !dropout {
            return Err(Error::ZeroNorm { row: 0 });
        }
    }
    Err(Error::DropoutExhausted {
        retries: MAX_DROPOUT_RETRIES,
    })
}

/// One Definition-style tuple: anchor and positive views of the same sample
/// plus K negatives, each tagged with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
    pub anchor_class: usize,
    pub negative_classes: Vec<usize>,
    pub anchor_index: usize,
    pub negative_indices: Vec<usize>,
}

impl ContrastiveBatch {
    pub fn k(&self) -> usize {
        self.negatives.len()
    }

    /// Positive first, then negatives.
    pub fn candidates(&self) -> Vec<&[f64]> {
        std::iter::once(self.positive.as_slice())
            .chain(self.negatives.iter().map(Vec::as_slice))
            .collect()
    }
}

/// Class and row indices of one tuple, before any augmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleIndices {
    pub anchor_class: usize,
    pub anchor_index: usize,
    pub negative_classes: Vec<usize>,
    pub negative_indices: Vec<usize>,
}

/// Draws anchor and negative classes from ρ and a uniformly chosen member of
/// each drawn class.
#[derive(Debug, Clone)]
pub struct TupleSampler {
    k: usize,
    dist: ClassDistribution,
    sampler: ClassSampler,
    members: Vec<Vec<usize>>,
}

impl TupleSampler {
    /// `members[c]` lists the rows of class c. Without an explicit
    /// distribution the class frequencies of `members` are used.
    pub fn new(members: Vec<Vec<usize>>, k: usize, dist: Option<ClassDistribution>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("at least one negative is required".into()));
        }
        let dist = match dist {
            Some(d) => {
                if d.len() != members.len() {
                    return Err(Error::InvalidArgument(format!(
                        "class distribution has {} entries but the data has {} classes",
                        d.len(),
                        members.len()
                    )));
                }
                d
            }
            None => {
                let counts: Vec<usize> = members.iter().map(Vec::len).collect();
                ClassDistribution::from_counts(&counts)?
            }
        };
        // Every class with positive probability must be drawable.
        if let Some(c) = members.iter().position(Vec::is_empty) {
            return Err(Error::EmptyClass(c));
        }
        let sampler = dist.sampler();
        Ok(Self {
            k,
            dist,
            sampler,
            members,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn distribution(&self) -> &ClassDistribution {
        &self.dist
    }

    pub fn sample_classes<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<usize>) {
        let anchor = self.sampler.sample(rng);
        let negs = (0..self.k).map(|_| self.sampler.sample(rng)).collect();
        (anchor, negs)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TupleIndices {
        let (anchor_class, negative_classes) = self.sample_classes(rng);
        let pick = |c: usize, rng: &mut R| {
            let m = &self.members[c];
            m[rng.random_range(0..m.len())]
        };
        let anchor_index = pick(anchor_class, rng);
        let negative_indices = negative_classes.iter().map(|&c| pick(c, rng)).collect();
        TupleIndices {
            anchor_class,
            anchor_index,
            negative_classes,
            negative_indices,
        }
    }
}

/// Samples [`ContrastiveBatch`]es from an [`EmbeddingSet`].
#[derive(Debug, Clone)]
pub struct BatchSampler<'a> {
    set: &'a EmbeddingSet,
    spec: AugmentationSpec,
    tuples: TupleSampler,
}

impl<'a> BatchSampler<'a> {
    pub fn new(
        set: &'a EmbeddingSet,
        spec: AugmentationSpec,
        k: usize,
        dist: Option<ClassDistribution>,
    ) -> Result<Self> {
        spec.validate()?;
        let tuples = TupleSampler::new(set.class_members(), k, dist)?;
        Ok(Self { set, spec, tuples })
    }

    pub fn tuples(&self) -> &TupleSampler {
        &self.tuples
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ContrastiveBatch> {
        let t = self.tuples.sample(rng);
        let x = self.set.row(t.anchor_index);
        let anchor = apply_augmentation(x, &self.spec, rng)?;
        let positive = apply_augmentation(x, &self.spec, rng)?;
        let negatives = t
            .negative_indices
            .iter()
            .map(|&i| apply_augmentation(self.set.row(i), &self.spec, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(ContrastiveBatch {
            anchor,
            positive,
            negatives,
            anchor_class: t.anchor_class,
            negative_classes: t.negative_classes,
            anchor_index: t.anchor_index,
            negative_indices: t.negative_indices,
        })
    }
}

/// One contrastive batch drawn with the keyed stream for `index`.
pub fn sample_batch(
    sampler: &BatchSampler<'_>,
    seed: u64,
    index: u64,
) -> Result<ContrastiveBatch> {
    let mut rng = stream(seed, Purpose::Batch, &[index]);
    sampler.sample(&mut rng)
}

/// Augmentation-averaged representations per sample and per class.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRepresentations {
    pub dim: usize,
    /// |C|×h, row-major.
    pub class_means: Vec<f64>,
    /// N×h, row-major, when available.
    pub per_sample_means: Option<Vec<f64>>,
    pub augmentations_per_sample: usize,
}

impl MeanRepresentations {
    pub fn n_classes(&self) -> usize {
        self.class_means.len() / self.dim
    }

    pub fn class_mean(&self, c: usize) -> &[f64] {
        &self.class_means[c * self.dim..(c + 1) * self.dim]
    }

    pub fn sample_mean(&self, i: usize) -> Option<&[f64]> {
        self.per_sample_means
            .as_ref()
            .map(|m| &m[i * self.dim..(i + 1) * self.dim])
    }

    /// Class means given directly, e.g. as classifier weights.
    pub fn from_class_means(class_means: Vec<Vec<f64>>) -> Result<Self> {
        let dim = class_means.first().map_or(0, Vec::len);
        if dim == 0 || class_means.iter().any(|m| m.len() != dim) {
            return Err(Error::InvalidArgument("class means must share a positive dimension".into()));
        }
        Ok(Self {
            dim,
            class_means: class_means.concat(),
            per_sample_means: None,
            augmentations_per_sample: 0,
        })
    }
}

/// Averages `m` augmentations of every row (stream keyed by row index), then
/// averages those per-sample means within each class.
pub fn compute_class_means(
    set: &EmbeddingSet,
    spec: &AugmentationSpec,
    m: usize,
    seed: u64,
) -> Result<MeanRepresentations> {
    if m == 0 {
        return Err(Error::InvalidArgument("at least one augmentation per sample is required".into()));
    }
    spec.validate()?;
    if let Some(c) = set.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(c));
    }
    let dim = set.dim();
    let per_sample: Vec<Vec<f64>> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::ClassMeans, &[i as u64]);
            let mut acc: Vec<CompensatedSum> = vec![CompensatedSum::new(); dim];
            let mut buf = Vec::with_capacity(dim);
            for _ in 0..m {
                apply_augmentation_into(set.row(i), spec, &mut rng, &mut buf)?;
                for (a, v) in acc.iter_mut().zip(&buf) {
                    a.add(*v);
                }
            }
            Ok(acc.iter().map(|a| a.value() / m as f64).collect())
        })
        .collect::<Result<_>>()?;
    let mut sums = vec![CompensatedSum::new(); set.n_classes() * dim];
    for (i, mu) in per_sample.iter().enumerate() {
        let c = set.label(i);
        for (a, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(mu) {
            a.add(*v);
        }
    }
    let class_means = sums
        .iter()
        .enumerate()
        .map(|(j, s)| s.value() / set.class_counts()[j / dim] as f64)
        .collect();
    Ok(MeanRepresentations {
        dim,
        class_means,
        per_sample_means: Some(per_sample.concat()),
        augmentations_per_sample: m,
    })
}

/// Cosine similarity of two non-zero vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (l2_norm(a) * l2_norm(b))
}
