//! Synthetic latent-class data and a small contrastive encoder trained with
//! plain SGD on the InfoNCE loss.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{evaluate_sweep, BoundReport, EvalProtocol};
use crate::datamodel::{apply_augmentation, AugmentationSpec, EmbeddingSet, MeanRepresentations, TupleSampler};
use crate::error::{Error, Result};
use crate::losses::{mean_classifier_accuracy, mean_classifier_loss, train_linear_probe, ProbeConfig};
use crate::numeric::{dot, l2_norm, log_sum_exp, mean_and_stderr, softmax, CompensatedSum};
use crate::rng::{stream, Purpose};

/// Tuples per parallel work unit; partial gradients are added in unit order.
const TUPLE_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_classes: usize,
    pub samples_per_class: usize,
    pub input_dim: usize,
    /// Width of the ReLU hidden layer; 0 gives a linear encoder.
    pub hidden_dim: usize,
    pub embed_dim: usize,
    /// Each class centre sits at this distance from the origin along its own axis.
    pub cluster_separation: f64,
    pub cluster_sigma: f64,
    pub validation_fraction: f64,
    /// Applied to raw inputs during training and class-mean estimation.
    pub augmentation: AugmentationSpec,
    pub k_negatives: usize,
    pub temperature: f64,
    pub epochs: usize,
    pub batch_pairs_per_step: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Augmentations averaged per training sample for the mean classifier.
    pub m_augmentations: usize,
    /// Temperature of the mean classifier and the probe.
    pub eval_temperature: f64,
    pub probe: ProbeConfig,
    /// Also fit a probe on the hidden-layer features.
    pub eval_pre_projection: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_classes: 10,
            samples_per_class: 500,
            input_dim: 16,
            hidden_dim: 32,
            embed_dim: 16,
            cluster_separation: 4.0,
            cluster_sigma: 1.0,
            validation_fraction: 0.1,
            augmentation: AugmentationSpec::gaussian(0.5, false),
            k_negatives: 31,
            temperature: 0.5,
            epochs: 30,
            batch_pairs_per_step: 32,
            learning_rate: 0.5,
            seed: 0,
            m_augmentations: 10,
            eval_temperature: 1.0,
            probe: ProbeConfig::default(),
            eval_pre_projection: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_classes", self.n_classes),
            ("samples_per_class", self.samples_per_class),
            ("input_dim", self.input_dim),
            ("embed_dim", self.embed_dim),
            ("k_negatives", self.k_negatives),
            ("batch_pairs_per_step", self.batch_pairs_per_step),
            ("m_augmentations", self.m_augmentations),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if self.input_dim < self.n_classes {
            return Err(Error::InvalidArgument(format!(
                "input_dim {} is smaller than n_classes {}; class centres need one axis each",
                self.input_dim, self.n_classes
            )));
        }
        for (name, v) in [
            ("cluster_separation", self.cluster_separation),
            ("cluster_sigma", self.cluster_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0")));
            }
        }
        for (name, v) in [
            ("temperature", self.temperature),
            ("eval_temperature", self.eval_temperature),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument("validation_fraction must lie in [0, 1)".into()));
        }
        self.augmentation.validate()
    }

    /// Validation samples per class.
    pub fn validation_per_class(&self) -> usize {
        (self.samples_per_class as f64 * self.validation_fraction).round() as usize
    }
}

/// Raw labelled inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub dim: usize,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            m[y].push(i);
        }
        m
    }

    fn subset(&self, idx: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            inputs.extend_from_slice(self.row(i));
        }
        Self {
            inputs,
            dim: self.dim,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train: Dataset,
    pub validation: Dataset,
    /// |C|×input_dim class centres.
    pub centers: Vec<f64>,
}

/// Gaussian classes centred at separation·e_c, split per class into
/// training and validation parts.
pub fn generate_synthetic(config: &TrainConfig) -> Result<SyntheticData> {
    config.validate()?;
    let (nc, dim, per) = (config.n_classes, config.input_dim, config.samples_per_class);
    let mut centers = vec![0.0; nc * dim];
    for c in 0..nc {
        centers[c * dim + c] = config.cluster_separation;
    }
    let mut inputs = Vec::with_capacity(nc * per * dim);
    let mut labels = Vec::with_capacity(nc * per);
    for c in 0..nc {
        for i in 0..per {
            let mut rng = stream(config.seed, Purpose::Synthetic, &[c as u64, i as u64]);
            for d in 0..dim {
                let e: f64 = rng.sample(StandardNormal);
                inputs.push(centers[c * dim + d] + config.cluster_sigma * e);
            }
            labels.push(c);
        }
    }
    let all = Dataset {
        inputs,
        dim,
        labels,
        n_classes: nc,
    };
    let n_val = config.validation_per_class();
    let (mut train_idx, mut val_idx) = (Vec::new(), Vec::new());
    for c in 0..nc {
        let mut idx: Vec<usize> = (c * per..(c + 1) * per).collect();
        idx.shuffle(&mut stream(config.seed, Purpose::Split, &[c as u64]));
        let (v, t) = idx.split_at(n_val.min(per.saturating_sub(1)));
        let mut v = v.to_vec();
        let mut t = t.to_vec();
        v.sort_unstable();
        t.sort_unstable();
        val_idx.extend(v);
        train_idx.extend(t);
    }
    Ok(SyntheticData {
        train: all.subset(&train_idx),
        validation: all.subset(&val_idx),
        centers,
    })
}

/// Accuracy of assigning each input to the closest class centre.
pub fn nearest_center_accuracy(data: &Dataset, centers: &[f64]) -> f64 {
    let dim = data.dim;
    let hits = (0..data.len())
        .filter(|&i| {
            let x = data.row(i);
            let best = centers
                .chunks_exact(dim)
                .map(|c| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(j, _)| j)
                .unwrap_or(0);
            best == data.labels[i]
        })
        .count();
    hits as f64 / data.len().max(1) as f64
}

/// Initial hidden bias; keeps units active for inputs near the origin.
pub const HIDDEN_BIAS_INIT: f64 = 0.1;

/// x → W₂·relu(W₁x + b₁) + b₂ (or x → Wx + b), followed by L2 normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub params: Vec<f64>,
}

struct Forward {
    pre: Vec<f64>,
    act: Vec<f64>,
    out: Vec<f64>,
    z: Vec<f64>,
    norm: f64,
}

impl Encoder {
    pub fn n_params(input_dim: usize, hidden_dim: usize, embed_dim: usize) -> usize {
        if hidden_dim == 0 {
            embed_dim * input_dim + embed_dim
        } else {
            hidden_dim * input_dim + hidden_dim + embed_dim * hidden_dim + embed_dim
        }
    }

    /// He-style Gaussian weights, hidden biases at [`HIDDEN_BIAS_INIT`],
    /// output biases at zero.
    pub fn init(input_dim: usize, hidden_dim: usize, embed_dim: usize, seed: u64) -> Self {
        let mut rng = stream(seed, Purpose::EncoderInit, &[]);
        let mut params = vec![0.0; Self::n_params(input_dim, hidden_dim, embed_dim)];
        let mut fill = |slice: &mut [f64], fan_in: usize| {
            let scale = (2.0 / fan_in as f64).sqrt();
            for v in slice {
                let e: f64 = rng.sample(StandardNormal);
                *v = scale * e;
            }
        };
        if hidden_dim == 0 {
            fill(&mut params[..embed_dim * input_dim], input_dim);
        } else {
            let w1 = hidden_dim * input_dim;
            fill(&mut params[..w1], input_dim);
            params[w1..w1 + hidden_dim].fill(HIDDEN_BIAS_INIT);
            let w2_start = w1 + hidden_dim;
            fill(&mut params[w2_start..w2_start + embed_dim * hidden_dim], hidden_dim);
        }
        Self {
            input_dim,
            hidden_dim,
            embed_dim,
            params,
        }
    }

    fn layer(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(w.chunks_exact(x.len()).zip(b).map(|(row, bias)| dot(row, x) + bias));
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let (i, h, e) = (self.input_dim, self.hidden_dim, self.embed_dim);
        if h == 0 {
            (0, e * i, 0, 0)
        } else {
            let b1 = h * i;
            let w2 = b1 + h;
            let b2 = w2 + e * h;
            (b1, w2, b2, 0)
        }
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let (i, h, e) = (self.input_dim, self.hidden_dim, self.embed_dim);
        let mut pre = Vec::new();
        let mut act = Vec::new();
        let mut out = Vec::with_capacity(e);
        if h == 0 {
            Self::layer(&self.params[..e * i], &self.params[e * i..e * i + e], x, &mut out);
        } else {
            let (b1, w2, b2, _) = self.offsets();
            Self::layer(&self.params[..b1], &self.params[b1..w2], x, &mut pre);
            act.extend(pre.iter().map(|v| v.max(0.0)));
            Self::layer(&self.params[w2..b2], &self.params[b2..b2 + e], &act, &mut out);
        }
        let norm = l2_norm(&out);
        let z = out.iter().map(|v| v / norm).collect();
        Forward { pre, act, out, z, norm }
    }

    /// Unnormalised encoder output.
    pub fn raw(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).out
    }

    /// Hidden-layer activations (the input itself for a linear encoder).
    pub fn hidden(&self, x: &[f64]) -> Vec<f64> {
        if self.hidden_dim == 0 {
            x.to_vec()
        } else {
            self.forward(x).act
        }
    }

    /// Normalised representation; fails on a zero output.
    pub fn embed(&self, x: &[f64]) -> Option<Vec<f64>> {
        let f = self.forward(x);
        (f.norm > 0.0 && f.norm.is_finite()).then_some(f.z)
    }

    /// Adds ∂L/∂params to `grad` given ∂L/∂z for the normalised output.
    fn backward(&self, x: &[f64], f: &Forward, dz: &[f64], grad: &mut [f64]) {
        let (i, h, e) = (self.input_dim, self.hidden_dim, self.embed_dim);
        let proj = dot(dz, &f.z);
        let du: Vec<f64> = dz.iter().zip(&f.z).map(|(g, z)| (g - proj * z) / f.norm).collect();
        if h == 0 {
            for r in 0..e {
                let row = &mut grad[r * i..(r + 1) * i];
                row.iter_mut().zip(x).for_each(|(g, xv)| *g += du[r] * xv);
                grad[e * i + r] += du[r];
            }
            return;
        }
        let (b1, w2, b2, _) = self.offsets();
        let mut dact = vec![0.0; h];
        for r in 0..e {
            let w_row = &self.params[w2 + r * h..w2 + (r + 1) * h];
            let g_row = &mut grad[w2 + r * h..w2 + (r + 1) * h];
            for k in 0..h {
                g_row[k] += du[r] * f.act[k];
                dact[k] += du[r] * w_row[k];
            }
            grad[b2 + r] += du[r];
        }
        for k in 0..h {
            if f.pre[k] <= 0.0 {
                continue;
            }
            let d = dact[k];
            let row = &mut grad[k * i..(k + 1) * i];
            row.iter_mut().zip(x).for_each(|(g, xv)| *g += d * xv);
            grad[b1 + k] += d;
        }
    }

    fn embedding_set(&self, data: &Dataset, normalized: bool) -> Result<EmbeddingSet> {
        let rows: Vec<Vec<f64>> = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let f = self.forward(data.row(i));
                if normalized {
                    if !(f.norm > 0.0 && f.norm.is_finite()) {
                        return Err(Error::ZeroNorm { row: i });
                    }
                    Ok(f.z)
                } else {
                    Ok(f.out)
                }
            })
            .collect::<Result<_>>()?;
        let mut features = Vec::with_capacity(rows.len() * self.embed_dim);
        rows.iter().for_each(|r| features.extend_from_slice(r));
        EmbeddingSet::new(features, self.embed_dim, data.labels.clone(), data.n_classes, normalized)
    }

    /// Normalised representations of every row.
    pub fn embed_dataset(&self, data: &Dataset) -> Result<EmbeddingSet> {
        self.embedding_set(data, true)
    }

    /// Encoder outputs before normalisation.
    pub fn raw_dataset(&self, data: &Dataset) -> Result<EmbeddingSet> {
        self.embedding_set(data, false)
    }

    pub fn hidden_dataset(&self, data: &Dataset) -> Result<EmbeddingSet> {
        let dim = if self.hidden_dim == 0 { self.input_dim } else { self.hidden_dim };
        let mut features = Vec::with_capacity(data.len() * dim);
        for i in 0..data.len() {
            features.extend(self.hidden(data.row(i)));
        }
        EmbeddingSet::new(features, dim, data.labels.clone(), data.n_classes, false)
    }
}

/// Augmented inputs of one tuple: anchor and positive views of one sample,
/// then one view of each negative sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTuple {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn prepare_tuple<R: Rng + ?Sized>(
    data: &Dataset,
    sampler: &TupleSampler,
    spec: &AugmentationSpec,
    rng: &mut R,
) -> Result<PreparedTuple> {
    let t = sampler.sample(rng);
    let x = data.row(t.anchor_index);
    Ok(PreparedTuple {
        anchor: apply_augmentation(x, spec, rng)?,
        positive: apply_augmentation(x, spec, rng)?,
        negatives: t
            .negative_indices
            .iter()
            .map(|&i| apply_augmentation(data.row(i), spec, rng))
            .collect::<Result<_>>()?,
    })
}

/// InfoNCE loss of one tuple; adds its parameter gradient to `grad` if given.
pub fn tuple_loss(enc: &Encoder, tuple: &PreparedTuple, t: f64, grad: Option<&mut [f64]>) -> f64 {
    let fa = enc.forward(&tuple.anchor);
    let cands: Vec<(&[f64], Forward)> = std::iter::once(tuple.positive.as_slice())
        .chain(tuple.negatives.iter().map(Vec::as_slice))
        .map(|x| (x, enc.forward(x)))
        .collect();
    let logits: Vec<f64> = cands.iter().map(|(_, f)| dot(&fa.z, &f.z) / t).collect();
    let loss = log_sum_exp(&logits) - logits[0];
    if let Some(grad) = grad {
        let p = softmax(&logits);
        let e = enc.embed_dim;
        let mut dz_anchor = vec![0.0; e];
        for (j, (x, f)) in cands.iter().enumerate() {
            let g = (p[j] - f64::from(u8::from(j == 0))) / t;
            dz_anchor.iter_mut().zip(&f.z).for_each(|(d, z)| *d += g * z);
            let dz: Vec<f64> = fa.z.iter().map(|z| g * z).collect();
            enc.backward(x, f, &dz, grad);
        }
        enc.backward(&tuple.anchor, &fa, &dz_anchor, grad);
    }
    loss
}

/// Per-tuple losses and the mean gradient over `tuples`.
pub fn batch_loss_and_gradient(enc: &Encoder, tuples: &[PreparedTuple], t: f64) -> (Vec<f64>, Vec<f64>) {
    let n_params = enc.params.len();
    let parts: Vec<(Vec<f64>, Vec<f64>)> = tuples
        .par_chunks(TUPLE_CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; n_params];
            let losses = chunk.iter().map(|tp| tuple_loss(enc, tp, t, Some(&mut g))).collect();
            (losses, g)
        })
        .collect();
    let mut grad = vec![0.0; n_params];
    let mut losses = Vec::with_capacity(tuples.len());
    for (l, g) in parts {
        losses.extend(l);
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let inv = 1.0 / tuples.len().max(1) as f64;
    grad.iter_mut().for_each(|v| *v *= inv);
    (losses, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub encoder: Encoder,
    pub loss_trace: Vec<EpochLoss>,
    pub train_embeddings: EmbeddingSet,
    pub validation_embeddings: EmbeddingSet,
    /// Encoder outputs of the training split before normalisation.
    pub train_raw: EmbeddingSet,
    pub mean_acc: Option<f64>,
    pub probe_acc: Option<f64>,
}

/// Loss above which training counts as diverged.
pub fn divergence_limit(k: usize) -> f64 {
    10.0 * ((k + 1) as f64).ln()
}

/// SGD on tuples drawn from the training split. Tuple `j` of step `s` in
/// epoch `e` uses the stream keyed by (seed, e, s, j).
pub fn train_encoder(config: &TrainConfig, data: &SyntheticData) -> Result<TrainResult> {
    config.validate()?;
    let train = &data.train;
    let mut enc = Encoder::init(train.dim, config.hidden_dim, config.embed_dim, config.seed);
    let sampler = TupleSampler::new(train.class_members(), config.k_negatives, None)?;
    let steps = train.len().div_ceil(config.batch_pairs_per_step);
    let limit = divergence_limit(config.k_negatives);
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut epoch_losses = Vec::with_capacity(train.len());
        for step in 0..steps {
            let n = config
                .batch_pairs_per_step
                .min(train.len() - step * config.batch_pairs_per_step);
            let tuples: Vec<PreparedTuple> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let mut rng = stream(
                        config.seed,
                        Purpose::Training,
                        &[epoch as u64, step as u64, j as u64],
                    );
                    prepare_tuple(train, &sampler, &config.augmentation, &mut rng)
                })
                .collect::<Result<_>>()?;
            let (losses, grad) = batch_loss_and_gradient(&enc, &tuples, config.temperature);
            if losses.iter().any(|l| !l.is_finite()) || grad.iter().any(|g| !g.is_finite()) {
                let loss = f64::NAN;
                return Err(Error::Diverged {
                    epoch,
                    loss,
                    limit,
                    trace: trace.iter().map(|e: &EpochLoss| e.loss).collect(),
                });
            }
            enc.params
                .iter_mut()
                .zip(&grad)
                .for_each(|(p, g)| *p -= config.learning_rate * g);
            epoch_losses.extend(losses);
        }
        let (loss, stderr) = mean_and_stderr(&epoch_losses);
        trace.push(EpochLoss { epoch, loss, stderr });
        log::debug!("epoch {epoch}: loss {loss:.4} ± {stderr:.4}");
        if loss > limit {
            return Err(Error::Diverged {
                epoch,
                loss,
                limit,
                trace: trace.iter().map(|e| e.loss).collect(),
            });
        }
    }
    Ok(TrainResult {
        train_embeddings: enc.embed_dataset(&data.train)?,
        validation_embeddings: enc.embed_dataset(&data.validation)?,
        train_raw: enc.raw_dataset(&data.train)?,
        encoder: enc,
        loss_trace: trace,
        mean_acc: None,
        probe_acc: None,
    })
}

/// Mean over `m` input-space augmentations of the normalised representation
/// of every row, and the per-class average of those.
pub fn augmented_means(
    enc: &Encoder,
    data: &Dataset,
    spec: &AugmentationSpec,
    m: usize,
    seed: u64,
) -> Result<MeanRepresentations> {
    let e = enc.embed_dim;
    let per_sample: Vec<Vec<f64>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::ClassMeans, &[i as u64]);
            let mut acc = vec![CompensatedSum::new(); e];
            for _ in 0..m {
                let x = apply_augmentation(data.row(i), spec, &mut rng)?;
                let z = enc.embed(&x).ok_or(Error::ZeroNorm { row: i })?;
                acc.iter_mut().zip(&z).for_each(|(a, v)| a.add(*v));
            }
            Ok(acc.iter().map(|a| a.value() / m as f64).collect())
        })
        .collect::<Result<_>>()?;
    let members = data.class_members();
    let mut class_means = Vec::with_capacity(data.n_classes * e);
    for (c, mem) in members.iter().enumerate() {
        if mem.is_empty() {
            return Err(Error::EmptyClass(c));
        }
        for d in 0..e {
            let s: CompensatedSum = mem.iter().map(|&i| per_sample[i][d]).collect();
            class_means.push(s.value() / mem.len() as f64);
        }
    }
    Ok(MeanRepresentations {
        dim: e,
        class_means,
        per_sample_means: Some(per_sample.concat()),
        augmentations_per_sample: m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierEval {
    pub mean_acc: f64,
    pub probe_acc: f64,
    /// Cross-entropies on the training split, at the evaluation temperature.
    pub mean_train_loss: f64,
    pub probe_train_loss: f64,
    pub pre_projection_probe_acc: Option<f64>,
}

/// Mean classifier from augmented training means and a linear probe fit on
/// training representations, both scored on the validation split.
pub fn evaluate_classifiers(config: &TrainConfig, result: &TrainResult, data: &SyntheticData) -> Result<ClassifierEval> {
    let means = augmented_means(
        &result.encoder,
        &data.train,
        &config.augmentation,
        config.m_augmentations,
        config.seed,
    )?;
    let t = config.eval_temperature;
    let mean_acc = mean_classifier_accuracy(&result.validation_embeddings, &means)?;
    let mean_train_loss = mean_classifier_loss(&result.train_embeddings, &means, t, None)?.value;
    let probe = train_linear_probe(&result.train_embeddings, Some(&means), t, &config.probe)?;
    let probe_acc = probe.probe.accuracy(&result.validation_embeddings);
    let pre_projection_probe_acc = if config.eval_pre_projection {
        let tr = result.encoder.hidden_dataset(&data.train)?;
        let va = result.encoder.hidden_dataset(&data.validation)?;
        let p = train_linear_probe(&tr, None, 1.0, &config.probe)?;
        Some(p.probe.accuracy(&va))
    } else {
        None
    };
    Ok(ClassifierEval {
        mean_acc,
        probe_acc,
        mean_train_loss,
        probe_train_loss: probe.final_loss.value,
        pre_projection_probe_acc,
    })
}

/// A trained encoder together with its classifier scores and bound reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyRun {
    pub result: TrainResult,
    pub classifiers: ClassifierEval,
    pub reports: Vec<BoundReport>,
}

/// Generates data, trains, scores the classifiers and evaluates the bounds on
/// the validation split for each K in `eval_ks` (the training K if `None`).
pub fn run_toy(config: &TrainConfig, protocol: &EvalProtocol, eval_ks: Option<&[usize]>) -> Result<ToyRun> {
    let data = generate_synthetic(config)?;
    let mut result = train_encoder(config, &data)?;
    let classifiers = evaluate_classifiers(config, &result, &data)?;
    result.mean_acc = Some(classifiers.mean_acc);
    result.probe_acc = Some(classifiers.probe_acc);
    let ks = eval_ks.map_or_else(|| vec![config.k_negatives], <[usize]>::to_vec);
    let mut reports = evaluate_sweep(
        &result.validation_embeddings,
        Some(&result.train_embeddings),
        &ks,
        protocol,
    )?;
    for r in &mut reports {
        r.mean_acc = Some(classifiers.mean_acc);
        r.probe_acc = Some(classifiers.probe_acc);
    }
    Ok(ToyRun {
        result,
        classifiers,
        reports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub n_params: usize,
}

/// Gradients smaller than this are compared in absolute terms.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient of the mean tuple loss with central
/// differences of step `h`, over every parameter.
pub fn gradient_check(config: &TrainConfig, n_tuples: usize, h: f64) -> Result<GradientCheck> {
    let data = generate_synthetic(config)?;
    let enc = Encoder::init(data.train.dim, config.hidden_dim, config.embed_dim, config.seed);
    let sampler = TupleSampler::new(data.train.class_members(), config.k_negatives, None)?;
    let tuples: Vec<PreparedTuple> = (0..n_tuples)
        .map(|j| {
            let mut rng = stream(config.seed, Purpose::Training, &[u64::MAX, j as u64]);
            prepare_tuple(&data.train, &sampler, &config.augmentation, &mut rng)
        })
        .collect::<Result<_>>()?;
    let (losses, analytic) = batch_loss_and_gradient(&enc, &tuples, config.temperature);
    if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFiniteLoss { iteration: i });
    }
    let mean_loss = |e: &Encoder| {
        tuples.iter().map(|tp| tuple_loss(e, tp, config.temperature, None)).sum::<f64>() / n_tuples as f64
    };
    let mut worst: f64 = 0.0;
    let mut probe = enc.clone();
    for p in 0..enc.params.len() {
        let orig = probe.params[p];
        probe.params[p] = orig + h;
        let up = mean_loss(&probe);
        probe.params[p] = orig - h;
        let down = mean_loss(&probe);
        probe.params[p] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[p];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADIENT_CHECK_FLOOR);
        worst = if rel.is_nan() { f64::INFINITY } else { worst.max(rel) };
    }
    Ok(GradientCheck {
        max_relative_error: worst,
        n_params: enc.params.len(),
    })
}

/// A configuration small enough for exhaustive finite differences.
pub fn micro_config() -> TrainConfig {
    TrainConfig {
        n_classes: 3,
        samples_per_class: 2,
        input_dim: 4,
        hidden_dim: 8,
        embed_dim: 3,
        validation_fraction: 0.0,
        k_negatives: 3,
        augmentation: AugmentationSpec::gaussian(0.3, false),
        epochs: 1,
        batch_pairs_per_step: 5,
        ..TrainConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_too_few_input_dims() {
        let c = TrainConfig {
            input_dim: 5,
            ..TrainConfig::default()
        };
        assert!(generate_synthetic(&c).is_err());
    }

    #[test]
    fn zero_sigma_gives_centres() {
        let c = TrainConfig {
            cluster_sigma: 0.0,
            samples_per_class: 10,
            ..TrainConfig::default()
        };
        let d = generate_synthetic(&c).unwrap();
        for i in 0..d.train.len() {
            let y = d.train.labels[i];
            assert_eq!(d.train.row(i), &d.centers[y * 16..(y + 1) * 16]);
        }
        assert_eq!(d.validation.len(), 10);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = gradient_check(&micro_config(), 5, 1e-5).unwrap();
        assert!(g.max_relative_error < 1e-4, "{g:?}");
        let linear = TrainConfig {
            hidden_dim: 0,
            ..micro_config()
        };
        let g = gradient_check(&linear, 5, 1e-5).unwrap();
        assert!(g.max_relative_error < 1e-4, "{g:?}");
    }
}
