//! Contrastive and supervised losses, and their sample estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{sample_batch, AugmentationSpec, BatchSampler, EmbeddingSet, MeanRepresentations};
use crate::error::{Error, Result};
use crate::numeric::{argmax, dot, log_sum_exp, mean_and_stderr, softmax};
use crate::probkit::ClassDistribution;

/// Sample rows are processed in blocks of this size; block results are
/// combined in block order, so sums do not depend on the thread count.
const BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub temperature: f64,
}

impl LossEstimate {
    pub fn from_values(values: &[f64], temperature: f64) -> Self {
        let (value, stderr) = mean_and_stderr(values);
        Self {
            value,
            stderr,
            n_samples: values.len(),
            temperature,
        }
    }

    pub fn exact(value: f64, temperature: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            n_samples: 0,
            temperature,
        }
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("temperature must be positive, got {t}")))
    }
}

/// −ln softmax of the first logit.
pub fn info_nce_from_logits(logits: &[f64]) -> f64 {
    log_sum_exp(logits) - logits[0]
}

/// InfoNCE loss of `anchor` against `candidates`, positive first.
pub fn info_nce(anchor: &[f64], candidates: &[&[f64]], t: f64) -> f64 {
    let logits: Vec<f64> = candidates.iter().map(|c| dot(anchor, c) / t).collect();
    info_nce_from_logits(&logits)
}

/// Cross-entropy of the mean classifier restricted to the classes in `bag`
/// (duplicates allowed); the target is the first occurrence of `label`.
pub fn sub_class_loss(z: &[f64], label: usize, bag: &[usize], means: &MeanRepresentations, t: f64) -> f64 {
    let target = bag
        .iter()
        .position(|&c| c == label)
        .expect("the sample's own class must be in the bag");
    let logits: Vec<f64> = bag.iter().map(|&c| dot(z, means.class_mean(c)) / t).collect();
    log_sum_exp(&logits) - logits[target]
}

fn ordered_values<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .flat_map_iter(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(n);
            (lo..hi).map(&f).collect::<Vec<_>>()
        })
        .collect()
}

/// Mean InfoNCE over `n_batches` independently sampled tuples, batch `i`
/// using the keyed stream (seed, i).
pub fn estimate_l_info(
    set: &EmbeddingSet,
    spec: &AugmentationSpec,
    k: usize,
    t: f64,
    n_batches: usize,
    seed: u64,
    dist: Option<ClassDistribution>,
) -> Result<LossEstimate> {
    check_temperature(t)?;
    if n_batches == 0 {
        return Err(Error::InvalidArgument("at least one batch is required".into()));
    }
    let sampler = BatchSampler::new(set, *spec, k, dist)?;
    let values: Vec<f64> = (0..n_batches)
        .into_par_iter()
        .map(|i| {
            let b = sample_batch(&sampler, seed, i as u64)?;
            Ok(info_nce(&b.anchor, &b.candidates(), t))
        })
        .collect::<Result<_>>()?;
    Ok(LossEstimate::from_values(&values, t))
}

/// Logits W·z/t + b for a linear classifier with rows of `weights`.
fn class_logits(z: &[f64], weights: &[f64], bias: &[f64], dim: usize, t: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        weights
            .chunks_exact(dim)
            .zip(bias)
            .map(|(w, b)| dot(z, w) / t + b),
    );
}

fn subset_mask(n_classes: usize, subset: Option<&[usize]>) -> Result<Vec<bool>> {
    match subset {
        None => Ok(vec![true; n_classes]),
        Some(s) => {
            let mut mask = vec![false; n_classes];
            for &c in s {
                if c >= n_classes {
                    return Err(Error::InvalidArgument(format!("class {c} is out of range")));
                }
                mask[c] = true;
            }
            Ok(mask)
        }
    }
}

/// Per-sample cross-entropy of a linear classifier, optionally restricted to
/// a class subset (samples outside it are skipped).
fn linear_cross_entropy(
    set: &EmbeddingSet,
    weights: &[f64],
    bias: &[f64],
    t: f64,
    subset: Option<&[usize]>,
) -> Result<Vec<f64>> {
    let n_classes = bias.len();
    if set.n_classes() > n_classes {
        return Err(Error::InvalidArgument(format!(
            "classifier has {n_classes} classes but the data has {}",
            set.n_classes()
        )));
    }
    let mask = subset_mask(n_classes, subset)?;
    let classes: Vec<usize> = (0..n_classes).filter(|&c| mask[c]).collect();
    let dim = set.dim();
    let (w_sub, b_sub): (Vec<f64>, Vec<f64>) = if subset.is_some() {
        (
            classes.iter().flat_map(|&c| weights[c * dim..(c + 1) * dim].iter().copied()).collect(),
            classes.iter().map(|&c| bias[c]).collect(),
        )
    } else {
        (weights.to_vec(), bias.to_vec())
    };
    let slot: Vec<Option<usize>> = {
        let mut s = vec![None; n_classes];
        for (i, &c) in classes.iter().enumerate() {
            s[c] = Some(i);
        }
        s
    };
    let scored: Vec<usize> = (0..set.len()).filter(|&i| mask[set.label(i)]).collect();
    if scored.is_empty() {
        return Err(Error::InvalidArgument("no sample has a label inside the class subset".into()));
    }
    Ok(ordered_values(scored.len(), |j| {
        let i = scored[j];
        let mut logits = Vec::with_capacity(classes.len());
        class_logits(set.row(i), &w_sub, &b_sub, dim, t, &mut logits);
        let target = slot[set.label(i)].expect("masked");
        log_sum_exp(&logits) - logits[target]
    }))
}

/// Cross-entropy of the classifier whose class-c weight is μ_c.
pub fn mean_classifier_loss(
    set: &EmbeddingSet,
    means: &MeanRepresentations,
    t: f64,
    subset: Option<&[usize]>,
) -> Result<LossEstimate> {
    check_temperature(t)?;
    check_dims(set, means)?;
    let bias = vec![0.0; means.n_classes()];
    let values = linear_cross_entropy(set, &means.class_means, &bias, t, subset)?;
    Ok(LossEstimate::from_values(&values, t))
}

fn check_dims(set: &EmbeddingSet, means: &MeanRepresentations) -> Result<()> {
    if set.dim() != means.dim {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension {} differs from class-mean dimension {}",
            set.dim(),
            means.dim
        )));
    }
    Ok(())
}

/// Accuracy of the nearest-mean (largest inner product) classifier.
pub fn mean_classifier_accuracy(set: &EmbeddingSet, means: &MeanRepresentations) -> Result<f64> {
    check_dims(set, means)?;
    let bias = vec![0.0; means.n_classes()];
    Ok(linear_accuracy(set, &means.class_means, &bias, 1.0))
}

fn linear_accuracy(set: &EmbeddingSet, weights: &[f64], bias: &[f64], t: f64) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let hits = ordered_values(set.len(), |i| {
        let mut logits = Vec::with_capacity(bias.len());
        class_logits(set.row(i), weights, bias, set.dim(), t, &mut logits);
        f64::from(u8::from(argmax(&logits) == set.label(i)))
    });
    hits.iter().sum::<f64>() / set.len() as f64
}

/// (1/t)·mean over samples of μ(x)·(μ_c − μ(x)).
pub fn gap_term_d(set: &EmbeddingSet, means: &MeanRepresentations, t: f64) -> Result<LossEstimate> {
    check_temperature(t)?;
    check_dims(set, means)?;
    if means.per_sample_means.is_none() {
        return Err(Error::InvalidArgument("per-sample means are required for the gap term".into()));
    }
    if set.is_empty() {
        return Err(Error::InvalidArgument("empty embedding set".into()));
    }
    let values = ordered_values(set.len(), |i| {
        let mu_x = means.sample_mean(i).expect("checked");
        let mu_c = means.class_mean(set.label(i));
        (dot(mu_x, mu_c) - dot(mu_x, mu_x)) / t
    });
    Ok(LossEstimate::from_values(&values, t))
}

/// Multinomial logistic regression W·z/t + b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub temperature: f64,
}

impl LinearProbe {
    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn predict(&self, z: &[f64]) -> usize {
        let mut logits = Vec::with_capacity(self.bias.len());
        class_logits(z, &self.weights, &self.bias, self.dim, self.temperature, &mut logits);
        argmax(&logits)
    }

    pub fn loss(&self, set: &EmbeddingSet) -> Result<LossEstimate> {
        let v = linear_cross_entropy(set, &self.weights, &self.bias, self.temperature, None)?;
        Ok(LossEstimate::from_values(&v, self.temperature))
    }

    pub fn accuracy(&self, set: &EmbeddingSet) -> f64 {
        linear_accuracy(set, &self.weights, &self.bias, self.temperature)
    }

    fn mean_loss_and_gradient(&self, set: &EmbeddingSet) -> (f64, Vec<f64>, Vec<f64>) {
        let dim = self.dim;
        let nc = self.n_classes();
        let n = set.len();
        let blocks: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..n.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut loss = 0.0;
                let mut gw = vec![0.0; nc * dim];
                let mut gb = vec![0.0; nc];
                let mut logits = Vec::with_capacity(nc);
                for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                    let z = set.row(i);
                    let y = set.label(i);
                    class_logits(z, &self.weights, &self.bias, dim, self.temperature, &mut logits);
                    loss += log_sum_exp(&logits) - logits[y];
                    let p = softmax(&logits);
                    for c in 0..nc {
                        let g = p[c] - f64::from(u8::from(c == y));
                        gb[c] += g;
                        let g = g / self.temperature;
                        for (w, x) in gw[c * dim..(c + 1) * dim].iter_mut().zip(z) {
                            *w += g * x;
                        }
                    }
                }
                (loss, gw, gb)
            })
            .collect();
        let mut loss = 0.0;
        let mut gw = vec![0.0; nc * dim];
        let mut gb = vec![0.0; nc];
        for (l, w, b) in blocks {
            loss += l;
            gw.iter_mut().zip(&w).for_each(|(a, v)| *a += v);
            gb.iter_mut().zip(&b).for_each(|(a, v)| *a += v);
        }
        let inv = 1.0 / n as f64;
        gw.iter_mut().for_each(|v| *v *= inv);
        gb.iter_mut().for_each(|v| *v *= inv);
        (loss * inv, gw, gb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Stop once an accepted step improves the loss by less than this.
    pub tolerance: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 1.0,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTraining {
    pub probe: LinearProbe,
    pub initial_loss: f64,
    pub final_loss: LossEstimate,
    pub train_accuracy: f64,
    pub iterations: usize,
    pub loss_trace: Vec<f64>,
}

/// Full-batch gradient descent on the cross-entropy of a linear classifier.
/// Starts at W = class means (zeros without them), b = 0. A step that raises
/// the loss is retried with half the step size, so the loss never increases.
pub fn train_linear_probe(
    set: &EmbeddingSet,
    init: Option<&MeanRepresentations>,
    t: f64,
    config: &ProbeConfig,
) -> Result<ProbeTraining> {
    check_temperature(t)?;
    if let Some(c) = set.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(c));
    }
    let nc = set.n_classes();
    let dim = set.dim();
    let weights = match init {
        Some(m) => {
            check_dims(set, m)?;
            if m.n_classes() != nc {
                return Err(Error::InvalidArgument("class-mean count differs from the data".into()));
            }
            m.class_means.clone()
        }
        None => vec![0.0; nc * dim],
    };
    let mut probe = LinearProbe {
        dim,
        weights,
        bias: vec![0.0; nc],
        temperature: t,
    };
    let (mut loss, mut gw, mut gb) = probe.mean_loss_and_gradient(set);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { iteration: 0 });
    }
    let initial_loss = loss;
    let mut trace = vec![loss];
    let mut step = config.learning_rate;
    let mut iterations = 0;
    'outer: for iter in 1..=config.epochs {
        iterations = iter;
        loop {
            let candidate = LinearProbe {
                dim,
                weights: probe.weights.iter().zip(&gw).map(|(w, g)| w - step * g).collect(),
                bias: probe.bias.iter().zip(&gb).map(|(b, g)| b - step * g).collect(),
                temperature: t,
            };
            let (new_loss, ngw, ngb) = candidate.mean_loss_and_gradient(set);
            if new_loss.is_nan() {
                return Err(Error::NonFiniteLoss { iteration: iter });
            }
            if new_loss <= loss {
                let improvement = loss - new_loss;
                probe = candidate;
                loss = new_loss;
                gw = ngw;
                gb = ngb;
                trace.push(loss);
                step *= 1.25;
                if improvement < config.tolerance {
                    break 'outer;
                }
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                break 'outer;
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { iteration: iterations });
    }
    let final_loss = probe.loss(set)?;
    let train_accuracy = probe.accuracy(set);
    Ok(ProbeTraining {
        probe,
        initial_loss,
        final_loss,
        train_accuracy,
        iterations,
        loss_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class() -> (EmbeddingSet, MeanRepresentations) {
        let set = EmbeddingSet::from_rows(&[vec![1.0, 0.0]], vec![0], 2, true).unwrap();
        let means = MeanRepresentations::from_class_means(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        (set, means)
    }

    #[test]
    fn info_nce_scalar_cases() {
        let z = [1.0, 0.0];
        let same = [0.5, 0.5];
        let l = info_nce(&z, &[&same, &same], 1.0);
        assert!((l - 2f64.ln()).abs() < 1e-15);
        let pos = [1.0, 0.0];
        let neg = [-1.0, 0.0];
        let l = info_nce(&z, &[&pos, &neg], 1.0);
        assert!((l - (1.0 + (-2.0f64).exp()).ln()).abs() < 1e-15);
        let half: Vec<f64> = neg.iter().map(|v| v / 2.0).collect();
        let half_pos: Vec<f64> = pos.iter().map(|v| v / 2.0).collect();
        assert_eq!(info_nce(&z, &[&pos, &neg], 2.0), info_nce(&z, &[&half_pos, &half], 1.0));
    }

    #[test]
    fn mean_classifier_cases() {
        let (set, means) = two_class();
        let l = mean_classifier_loss(&set, &means, 1.0, None).unwrap();
        assert!((l.value - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-15);
        assert_eq!(mean_classifier_loss(&set, &means, 1.0, Some(&[0])).unwrap().value, 0.0);
        assert!(mean_classifier_loss(&set, &means, 1.0, Some(&[1])).is_err());
        let z = [0.3, 0.7];
        for col in 0..5 {
            let bag = vec![1usize; col + 1];
            let v = sub_class_loss(&z, 1, &bag, &means, 0.7);
            assert!((v - ((col + 1) as f64).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn gap_term_vanishes_for_constant_rows() {
        let set = EmbeddingSet::from_rows(&[vec![0.6, 0.8], vec![0.6, 0.8]], vec![0, 1], 2, true).unwrap();
        let m = crate::datamodel::compute_class_means(&set, &AugmentationSpec::identity(), 2, 0).unwrap();
        assert_eq!(gap_term_d(&set, &m, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn probe_starts_at_mean_classifier_and_descends() {
        let rows = vec![vec![1.0, 0.1], vec![0.9, -0.2], vec![-0.1, 1.0], vec![0.2, 0.8]];
        let set = EmbeddingSet::from_rows(&rows, vec![0, 0, 1, 1], 2, false).unwrap();
        let means = crate::datamodel::compute_class_means(&set, &AugmentationSpec::identity(), 1, 0).unwrap();
        let mc = mean_classifier_loss(&set, &means, 1.0, None).unwrap();
        let tr = train_linear_probe(&set, Some(&means), 1.0, &ProbeConfig::default()).unwrap();
        assert_eq!(tr.initial_loss, mc.value);
        assert!(tr.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(tr.final_loss.value <= mc.value + 1e-6);
        assert_eq!(tr.train_accuracy, 1.0);
    }

    #[test]
    fn argmax_ties_go_to_smallest_class() {
        let probe = LinearProbe {
            dim: 1,
            weights: vec![1.0, 1.0, 1.0],
            bias: vec![0.0; 3],
            temperature: 1.0,
        };
        assert_eq!(probe.predict(&[0.5]), 0);
    }
}
