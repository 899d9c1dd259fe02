//! Feature diagnostics (cosine and norm histograms, histogram Wasserstein
//! distances) and a numerical check that uniform constant class scores
//! minimise the expected sub-class loss.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::datamodel::{cosine, EmbeddingSet};
use crate::error::{Error, Result};
use crate::numeric::{l2_norm, log_sum_exp, softmax, CompensatedSum};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    /// `n_bins` equal-width bins on [lo, hi]; the last bin is closed.
    pub fn from_values(values: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidArgument("a histogram needs at least one bin".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidArgument(format!("invalid histogram range [{lo}, {hi}]")));
        }
        let width = (hi - lo) / n_bins as f64;
        let bin_edges: Vec<f64> = (0..=n_bins)
            .map(|i| if i == n_bins { hi } else { lo + i as f64 * width })
            .collect();
        let mut counts = vec![0u64; n_bins];
        for &v in values {
            if !(v >= lo && v <= hi) {
                return Err(Error::InvalidArgument(format!("value {v} outside [{lo}, {hi}]")));
            }
            let b = (((v - lo) / width) as usize).min(n_bins - 1);
            counts[b] += 1;
        }
        Ok(Self {
            bin_edges,
            counts,
            total: values.len() as u64,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Bin masses summing to one.
    pub fn normalized(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }
}

/// ⌊√n⌋, at least 1.
pub fn sqrt_bins(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(1)
}

/// Cosine similarities of all unordered pairs of members of `class`.
pub fn within_class_cosines(set: &EmbeddingSet, class: usize) -> Result<Vec<f64>> {
    if class >= set.n_classes() {
        return Err(Error::InvalidArgument(format!("class {class} out of range")));
    }
    let members = &set.class_members()[class];
    if members.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "class {class} has {} member(s); at least two are needed",
            members.len()
        )));
    }
    let mut out = Vec::with_capacity(members.len() * (members.len() - 1) / 2);
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            out.push(cosine(set.row(i), set.row(j)).clamp(-1.0, 1.0));
        }
    }
    Ok(out)
}

/// Histogram of within-class pair cosines on [−1, 1], ⌊√pairs⌋ bins by default.
pub fn within_class_cosine_histogram(set: &EmbeddingSet, class: usize, n_bins: Option<usize>) -> Result<Histogram> {
    let values = within_class_cosines(set, class)?;
    let bins = n_bins.unwrap_or_else(|| sqrt_bins(values.len()));
    Histogram::from_values(&values, -1.0, 1.0, bins)
}

pub fn row_norms(set: &EmbeddingSet) -> Vec<f64> {
    set.rows().map(l2_norm).collect()
}

/// Smallest and largest row norm over several sets. A degenerate range is
/// widened by half a unit on each side.
pub fn shared_norm_range(sets: &[&EmbeddingSet]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in sets {
        for n in row_norms(s) {
            lo = lo.min(n);
            hi = hi.max(n);
        }
    }
    if !lo.is_finite() {
        return Err(Error::InvalidArgument("no rows to take norms of".into()));
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return Ok((lo - 0.5, hi + 0.5));
    }
    Ok((lo, hi))
}

/// Histogram of the row norms of an unnormalised set, ⌊√N⌋ bins, on `range`
/// (the set's own range if `None`).
pub fn norm_histogram(set: &EmbeddingSet, range: Option<(f64, f64)>) -> Result<Histogram> {
    if set.is_normalized() {
        return Err(Error::InvalidArgument(
            "norm histograms need unnormalized representations".into(),
        ));
    }
    if set.is_empty() {
        return Err(Error::InvalidArgument("empty embedding set".into()));
    }
    let (lo, hi) = match range {
        Some(r) => r,
        None => shared_norm_range(&[set])?,
    };
    Histogram::from_values(&row_norms(set), lo, hi, sqrt_bins(set.len()))
}

/// First Wasserstein distance between two histograms on the same edges:
/// Σ |F₁ − F₂| times the gap between consecutive bin midpoints.
pub fn wasserstein1(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    if h1.bin_edges != h2.bin_edges {
        return Err(Error::EdgeMismatch);
    }
    if h1.total == 0 || h2.total == 0 {
        return Err(Error::InvalidArgument("histogram with no mass".into()));
    }
    let mid = h1.midpoints();
    let (p, q) = (h1.normalized(), h2.normalized());
    let (mut f1, mut f2) = (0.0, 0.0);
    let mut acc = CompensatedSum::new();
    for i in 0..mid.len().saturating_sub(1) {
        f1 += p[i];
        f2 += q[i];
        acc.add((f1 - f2).abs() * (mid[i + 1] - mid[i]));
    }
    Ok(acc.value())
}

/// Each distance divided by `reference`.
pub fn relative_change_curve(reference: f64, distances: &[f64]) -> Result<Vec<f64>> {
    if !(reference.is_finite() && reference > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reference distance must be positive, got {reference}"
        )));
    }
    Ok(distances.iter().map(|d| d / reference).collect())
}

/// Weighted (anchor class, bag) pairs arising from one anchor draw and `k`
/// negative draws under uniform class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFamily {
    pub n_classes: usize,
    /// (anchor class, bitmask of distinct classes) → probability.
    pub weights: Vec<(usize, u64, f64)>,
    pub enumerated: bool,
}

/// Full enumeration up to this many sequences; sampling beyond.
pub const ENUMERATION_LIMIT: u64 = 1 << 22;
pub const SUBSET_SAMPLES: usize = 200_000;

pub fn subset_family(n_classes: usize, k: usize, seed: u64) -> Result<SubsetFamily> {
    if n_classes == 0 || n_classes > 64 {
        return Err(Error::InvalidArgument("need between 1 and 64 classes".into()));
    }
    let mut counts: BTreeMap<(usize, u64), u64> = BTreeMap::new();
    let sequences = (n_classes as u64).checked_pow(k as u32 + 1);
    let enumerated = matches!(sequences, Some(s) if s <= ENUMERATION_LIMIT);
    let total = if enumerated {
        let total = sequences.unwrap_or(0);
        let mut seq = vec![0usize; k + 1];
        for _ in 0..total {
            let mask = seq.iter().fold(0u64, |m, &c| m | (1 << c));
            *counts.entry((seq[0], mask)).or_default() += 1;
            for d in seq.iter_mut().rev() {
                *d += 1;
                if *d < n_classes {
                    break;
                }
                *d = 0;
            }
        }
        total
    } else {
        let mut rng = stream(seed, Purpose::SubsetSampling, &[n_classes as u64, k as u64]);
        for _ in 0..SUBSET_SAMPLES {
            let c = rng.random_range(0..n_classes);
            let mut mask = 1u64 << c;
            for _ in 0..k {
                mask |= 1 << rng.random_range(0..n_classes);
            }
            *counts.entry((c, mask)).or_default() += 1;
        }
        SUBSET_SAMPLES as u64
    };
    Ok(SubsetFamily {
        n_classes,
        weights: counts
            .into_iter()
            .map(|((c, m), n)| (c, m, n as f64 / total as f64))
            .collect(),
        enumerated,
    })
}

impl SubsetFamily {
    fn bag(&self, mask: u64) -> Vec<usize> {
        (0..self.n_classes).filter(|&j| mask & (1 << j) != 0).collect()
    }

    /// Expected sub-class loss of constant scores `q`.
    pub fn loss(&self, q: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for &(c, mask, w) in &self.weights {
            let logits: Vec<f64> = self.bag(mask).iter().map(|&j| q[j]).collect();
            acc.add(w * (log_sum_exp(&logits) - q[c]));
        }
        acc.value()
    }

    /// Gradient of [`Self::loss`]: Σ w·(softmax over the bag − e_anchor).
    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let mut g = vec![CompensatedSum::new(); self.n_classes];
        for &(c, mask, w) in &self.weights {
            let bag = self.bag(mask);
            let logits: Vec<f64> = bag.iter().map(|&j| q[j]).collect();
            for (&j, p) in bag.iter().zip(softmax(&logits)) {
                g[j].add(w * p);
            }
            g[c].add(-w);
        }
        g.iter().map(CompensatedSum::value).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantScoreCheck {
    pub n_classes: usize,
    pub k: usize,
    pub enumerated: bool,
    pub n_pairs: usize,
    pub optimum: Vec<f64>,
    /// max − min of the optimum.
    pub spread: f64,
    pub loss_at_optimum: f64,
    pub loss_at_uniform: f64,
    pub gradient_norm_at_uniform: f64,
    /// Gradient norm at the returned optimum.
    pub residual: f64,
    pub steps: usize,
}

/// Gradient-norm target for [`verify_constant_scores`].
pub const STATIONARITY_TOLERANCE: f64 = 1e-12;

/// Gradient descent on the expected sub-class loss over constant class
/// scores from a random start.
pub fn verify_constant_scores(
    n_classes: usize,
    k: usize,
    max_steps: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<ConstantScoreCheck> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if !(learning_rate.is_finite() && learning_rate > 0.0) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    let family = subset_family(n_classes, k, seed)?;
    let uniform = vec![0.0; n_classes];
    let grad_u = family.gradient(&uniform);
    let mut rng = stream(seed, Purpose::ScoreInit, &[n_classes as u64, k as u64]);
    let mut q: Vec<f64> = (0..n_classes).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut residual = f64::INFINITY;
    let mut steps = 0;
    while steps < max_steps {
        let g = family.gradient(&q);
        residual = l2_norm(&g);
        if residual < STATIONARITY_TOLERANCE {
            break;
        }
        q.iter_mut().zip(&g).for_each(|(v, d)| *v -= learning_rate * d);
        steps += 1;
    }
    if residual >= STATIONARITY_TOLERANCE {
        residual = l2_norm(&family.gradient(&q));
        if residual >= STATIONARITY_TOLERANCE {
            return Err(Error::NoConvergence { steps, residual });
        }
    }
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = q.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConstantScoreCheck {
        n_classes,
        k,
        enumerated: family.enumerated,
        n_pairs: family.weights.len(),
        loss_at_optimum: family.loss(&q),
        loss_at_uniform: family.loss(&uniform),
        gradient_norm_at_uniform: l2_norm(&grad_u),
        optimum: q,
        spread: max - min,
        residual,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_masses_one_apart() {
        let a = Histogram::from_values(&[0.0], -0.5, 1.5, 2).unwrap();
        let b = Histogram::from_values(&[1.0], -0.5, 1.5, 2).unwrap();
        assert!((wasserstein1(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn three_classes_pairs_cost_ln2_at_uniform() {
        let f = subset_family(3, 1, 0).unwrap();
        assert!(f.enumerated);
        let pairs: Vec<_> = f.weights.iter().filter(|w| w.1.count_ones() == 2).collect();
        assert_eq!(pairs.len(), 6);
        let q = [0.3; 3];
        for &&(c, mask, _) in &pairs {
            let logits: Vec<f64> = f.bag(mask).iter().map(|&j| q[j]).collect();
            assert!((log_sum_exp(&logits) - q[c] - 2f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn small_case_converges_to_uniform() {
        let r = verify_constant_scores(3, 1, 100_000, 1.0, 1).unwrap();
        assert!(r.spread < 1e-4, "{r:?}");
        assert!(r.gradient_norm_at_uniform < 1e-12);
    }
}
