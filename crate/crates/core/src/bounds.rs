//! Lower bounds on the InfoNCE loss built from mean-classifier losses,
//! the collision upper bound, and supervised-loss bounds obtained by
//! solving the lower bounds for their covers-all term.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::datamodel::{
    apply_augmentation, compute_class_means, sample_batch, AugmentationSpec, BatchSampler, EmbeddingSet,
    MeanRepresentations,
};
use crate::error::{Error, Result};
use crate::losses::{
    gap_term_d, info_nce, mean_classifier_accuracy, sub_class_loss, train_linear_probe, LossEstimate, ProbeConfig,
};
use crate::numeric::{dot, mean_and_stderr, CompensatedSum};
use crate::probkit::{
    class_level_mc, class_level_probs, ClassDistribution, ClassLevelProbs, DrawsConvention, Method,
    DEFAULT_MC_SEED, DEFAULT_MC_TRIALS,
};
use crate::rng::{stream, Purpose};

/// Denominators below this make a supervised upper bound infinite.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Collision count and distinct classes of one tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollisionStats {
    pub col: usize,
    /// Sorted distinct classes among the anchor and negatives.
    pub c_sub: Vec<usize>,
    pub covers_all: bool,
}

pub fn collision_stats(anchor_class: usize, negative_classes: &[usize], n_classes: usize) -> CollisionStats {
    let col = negative_classes.iter().filter(|&&c| c == anchor_class).count();
    let mut c_sub: Vec<usize> = std::iter::once(anchor_class)
        .chain(negative_classes.iter().copied())
        .collect();
    c_sub.sort_unstable();
    c_sub.dedup();
    let covers_all = c_sub.len() == n_classes;
    CollisionStats { col, c_sub, covers_all }
}

/// Number of distinct classes among the first `draws` of (anchor, negatives…).
fn distinct_leading(anchor_class: usize, negative_classes: &[usize], draws: usize) -> usize {
    let mut v: Vec<usize> = std::iter::once(anchor_class)
        .chain(negative_classes.iter().copied())
        .take(draws)
        .collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Everything the bounds need from one sampled tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchScore {
    pub info_nce: f64,
    /// Mean-classifier loss of the anchor over its tuple's distinct classes.
    pub sub_loss: f64,
    pub col: usize,
    pub distinct: usize,
    /// All classes among anchor and all negatives.
    pub covers_all: bool,
    /// All classes among the leading draws selected by the draws convention.
    pub covers_all_leading: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub k: usize,
    pub temperature: f64,
    pub n_batches: usize,
    pub seed: u64,
    pub convention: DrawsConvention,
    pub augmentation: AugmentationSpec,
    pub class_distribution: Option<ClassDistribution>,
}

impl EvalSettings {
    pub fn new(k: usize, n_batches: usize, seed: u64) -> Self {
        Self {
            k,
            temperature: 1.0,
            n_batches,
            seed,
            convention: DrawsConvention::default(),
            augmentation: AugmentationSpec::identity(),
            class_distribution: None,
        }
    }
}

/// ⌊n/(K+1)⌋·(K+1)·epochs tuples.
pub fn default_batch_count(n_samples: usize, k: usize, epochs: usize) -> usize {
    (n_samples / (k + 1)) * (k + 1) * epochs
}

/// Samples and scores `n_batches` tuples; tuple i uses the stream keyed by
/// (seed, i), so any single tuple can be regenerated alone.
pub fn score_batches(
    set: &EmbeddingSet,
    means: &MeanRepresentations,
    settings: &EvalSettings,
) -> Result<Vec<BatchScore>> {
    if settings.k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if !(settings.temperature > 0.0) {
        return Err(Error::InvalidArgument("temperature must be positive".into()));
    }
    if means.n_classes() < set.n_classes() || means.dim != set.dim() {
        return Err(Error::InvalidArgument("class means do not match the embedding set".into()));
    }
    let sampler = BatchSampler::new(
        set,
        settings.augmentation,
        settings.k,
        settings.class_distribution.clone(),
    )?;
    let n_classes = set.n_classes();
    let leading = settings.convention.draws(settings.k);
    let t = settings.temperature;
    (0..settings.n_batches)
        .into_par_iter()
        .map(|i| {
            let b = sample_batch(&sampler, settings.seed, i as u64)?;
            let stats = collision_stats(b.anchor_class, &b.negative_classes, n_classes);
            Ok(BatchScore {
                info_nce: info_nce(&b.anchor, &b.candidates(), t),
                sub_loss: sub_class_loss(&b.anchor, b.anchor_class, &stats.c_sub, means, t),
                col: stats.col,
                distinct: stats.c_sub.len(),
                covers_all: stats.covers_all,
                covers_all_leading: distinct_leading(b.anchor_class, &b.negative_classes, leading)
                    == n_classes,
            })
        })
        .collect()
}

/// Class-level coefficients: exact where affordable, otherwise simulated.
pub fn class_coefficients(
    dist: &ClassDistribution,
    k: usize,
    convention: DrawsConvention,
) -> Result<(ClassLevelProbs, Method)> {
    match class_level_probs(dist, k, convention) {
        Ok(p) => Ok((p, Method::ClosedForm)),
        Err(Error::InvalidArgument(_)) => {
            let mc = class_level_mc(dist, k, convention, DEFAULT_MC_TRIALS, DEFAULT_MC_SEED)?;
            Ok((
                ClassLevelProbs {
                    k,
                    cover_draws: convention.draws(k),
                    tau: mc.tau.value,
                    upsilon: mc.upsilon.value,
                    covers_given_no_collision: mc.covers_given_no_collision.value,
                    expected_log_collision: mc.expected_log_collision,
                },
                Method::MonteCarlo,
            ))
        }
        Err(e) => Err(e),
    }
}

/// A coefficient times a conditional expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Term {
    pub coefficient: f64,
    /// Mean over the conditioning slice; `None` when the slice had no tuples.
    pub conditional: Option<f64>,
    pub conditional_stderr: f64,
    pub n_samples: usize,
}

impl Term {
    fn from_slice(coefficient: f64, values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                coefficient,
                conditional: None,
                conditional_stderr: 0.0,
                n_samples: 0,
            };
        }
        let (m, se) = mean_and_stderr(values);
        Self {
            coefficient,
            conditional: Some(m),
            conditional_stderr: se,
            n_samples: values.len(),
        }
    }

    fn exact(coefficient: f64, conditional: f64) -> Self {
        Self {
            coefficient,
            conditional: Some(conditional),
            conditional_stderr: 0.0,
            n_samples: 0,
        }
    }

    /// Coefficient-weighted value. A zero coefficient gives exactly zero even
    /// for an empty slice; a positive coefficient with no data gives `None`.
    pub fn value(&self) -> Option<f64> {
        if self.coefficient == 0.0 {
            Some(0.0)
        } else {
            self.conditional.map(|c| self.coefficient * c)
        }
    }

    pub fn stderr(&self) -> f64 {
        self.coefficient * self.conditional_stderr
    }

    pub fn is_absent(&self) -> bool {
        self.value().is_none()
    }

    pub fn as_estimate(&self, temperature: f64) -> Option<LossEstimate> {
        self.value().map(|v| LossEstimate {
            value: v,
            stderr: self.stderr(),
            n_samples: self.n_samples,
            temperature,
        })
    }
}

/// Terms of one lower bound. `total` is `None` (partial) when any term with
/// a positive coefficient had no data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTerms {
    pub sup: Term,
    pub sub: Term,
    pub collision: Term,
    pub d_f: f64,
    pub total: Option<f64>,
    pub total_stderr: f64,
}

impl BoundTerms {
    fn assemble(sup: Term, sub: Term, collision: Term, d_f: &LossEstimate) -> Self {
        let parts = [sup.value(), sub.value(), collision.value()];
        let total = if parts.iter().all(Option::is_some) {
            let mut s = CompensatedSum::new();
            parts.iter().for_each(|p| s.add(p.unwrap()));
            s.add(d_f.value);
            Some(s.value())
        } else {
            None
        };
        let total_stderr = (sup.stderr().powi(2) + sub.stderr().powi(2) + collision.stderr().powi(2)
            + d_f.stderr.powi(2))
        .sqrt();
        Self {
            sup,
            sub,
            collision,
            d_f: d_f.value,
            total,
            total_stderr,
        }
    }

    pub fn is_partial(&self) -> bool {
        self.total.is_none()
    }

    /// Total with every absent conditional replaced by `fill`.
    pub fn completed_total(&self, fill: f64) -> f64 {
        self.total.unwrap_or_else(|| {
            let mut s = CompensatedSum::new();
            for t in [&self.sup, &self.sub, &self.collision] {
                s.add(t.value().unwrap_or(t.coefficient * fill));
            }
            s.add(self.d_f);
            s.value()
        })
    }
}

/// Largest possible ℓ_sub for unit anchors and class means of norm ≤ 1:
/// ln|C| + 2/t.
pub fn sub_loss_ceiling(n_classes: usize, temperature: f64) -> f64 {
    (n_classes as f64).ln() + 2.0 / temperature
}

/// (1−τ)·E[ℓ_sub | Col=0] split into its covers-all and not-covers-all
/// slices, plus τ·E[ln(Col+1) | Col≠0] and the gap term.
pub fn curl_bound(scores: &[BatchScore], coeffs: &ClassLevelProbs, d_f: &LossEstimate) -> BoundTerms {
    let no_col = 1.0 - coeffs.tau;
    let p = coeffs.covers_given_no_collision;
    let sup_vals: Vec<f64> = scores
        .iter()
        .filter(|s| s.col == 0 && s.covers_all)
        .map(|s| s.sub_loss)
        .collect();
    let sub_vals: Vec<f64> = scores
        .iter()
        .filter(|s| s.col == 0 && !s.covers_all)
        .map(|s| s.sub_loss)
        .collect();
    let sup = Term::from_slice(no_col * p, &sup_vals);
    let sub = Term::from_slice(no_col * (1.0 - p), &sub_vals);
    let collision = if coeffs.tau > 0.0 {
        Term::exact(coeffs.tau, coeffs.expected_log_collision / coeffs.tau)
    } else {
        Term::exact(0.0, 0.0)
    };
    BoundTerms::assemble(sup, sub, collision, d_f)
}

/// ½{υ·E[ℓ_sub(C) | covers all] + (1−υ)·E[ℓ_sub(C_sub) | not] + E[ln(Col+1)]} + d(f).
pub fn proposed_bound(scores: &[BatchScore], coeffs: &ClassLevelProbs, d_f: &LossEstimate) -> BoundTerms {
    let u = coeffs.upsilon;
    let sup_vals: Vec<f64> = scores
        .iter()
        .filter(|s| s.covers_all_leading)
        .map(|s| s.sub_loss)
        .collect();
    let sub_vals: Vec<f64> = scores
        .iter()
        .filter(|s| !s.covers_all_leading)
        .map(|s| s.sub_loss)
        .collect();
    let sup = Term::from_slice(0.5 * u, &sup_vals);
    let sub = Term::from_slice(0.5 * (1.0 - u), &sub_vals);
    let collision = Term::exact(0.5, coeffs.expected_log_collision);
    BoundTerms::assemble(sup, sub, collision, d_f)
}

/// A supervised-loss upper bound that may be infinite or not computable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperBound {
    Finite(f64),
    Infinite,
    Unavailable,
}

impl UpperBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            UpperBound::Finite(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, UpperBound::Infinite)
    }
}

impl std::fmt::Display for UpperBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpperBound::Finite(v) => write!(f, "{v:.6}"),
            UpperBound::Infinite => f.write_str("inf"),
            UpperBound::Unavailable => f.write_str("NA"),
        }
    }
}

impl Serialize for UpperBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            UpperBound::Finite(v) => s.serialize_f64(*v),
            UpperBound::Infinite => s.serialize_str("inf"),
            UpperBound::Unavailable => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Curl,
    Proposed,
}

/// Tuple counts per conditioning event, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SliceCounts {
    pub batches: usize,
    pub no_collision: usize,
    pub no_collision_covers_all: usize,
    pub covers_all_leading: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub k_plus_1: usize,
    pub n_classes: usize,
    pub temperature: f64,
    pub convention: DrawsConvention,
    pub coefficient_method: Method,
    pub l_info: LossEstimate,
    pub d_f: LossEstimate,
    pub tau: f64,
    pub upsilon: f64,
    pub covers_given_no_collision: f64,
    pub expected_log_collision: f64,
    pub curl: BoundTerms,
    pub proposed: BoundTerms,
    pub collision_upper_bound: Option<LossEstimate>,
    pub sup_ub_curl: UpperBound,
    pub sup_ub_proposed: UpperBound,
    pub mean_acc: Option<f64>,
    pub probe_acc: Option<f64>,
    pub counts: SliceCounts,
    pub notes: Vec<String>,
}

impl BoundReport {
    /// √(bound stderr² + L_info stderr²).
    pub fn combined_stderr(&self, variant: Variant) -> f64 {
        let terms = match variant {
            Variant::Curl => &self.curl,
            Variant::Proposed => &self.proposed,
        };
        (terms.total_stderr.powi(2) + self.l_info.stderr.powi(2)).sqrt()
    }

    /// Total the inequality is checked against. A partial total is completed
    /// with the largest value any absent conditional could take.
    pub fn checked_total(&self, variant: Variant) -> f64 {
        let terms = match variant {
            Variant::Curl => &self.curl,
            Variant::Proposed => &self.proposed,
        };
        terms.completed_total(sub_loss_ceiling(self.n_classes, self.temperature))
    }

    /// checked total ≤ L_info + `sigmas`·combined stderr.
    pub fn lower_bound_holds(&self, variant: Variant, sigmas: f64) -> bool {
        self.checked_total(variant) <= self.l_info.value + sigmas * self.combined_stderr(variant)
    }
}

/// Solves a lower bound for its covers-all conditional expectation, giving an
/// upper bound on the supervised mean-classifier loss. An absent
/// not-covers-all slice enters at its floor 0, which keeps the result an
/// upper bound.
pub fn sup_upper_bound(report: &BoundReport, variant: Variant) -> UpperBound {
    let l = report.l_info.value;
    let d = report.d_f.value;
    match variant {
        Variant::Proposed => {
            let u = report.upsilon;
            if u < DENOMINATOR_FLOOR {
                return UpperBound::Infinite;
            }
            let sub = if 1.0 - u > 0.0 {
                (1.0 - u) * report.proposed.sub.conditional.unwrap_or(0.0)
            } else {
                0.0
            };
            UpperBound::Finite((2.0 * (l - d) - sub - report.expected_log_collision) / u)
        }
        Variant::Curl => {
            let no_col = 1.0 - report.tau;
            let p = report.covers_given_no_collision;
            let denom = no_col * p;
            if denom < DENOMINATOR_FLOOR {
                return UpperBound::Infinite;
            }
            let sub_coeff = no_col * (1.0 - p);
            let sub = if sub_coeff > 0.0 {
                sub_coeff * report.curl.sub.conditional.unwrap_or(0.0)
            } else {
                0.0
            };
            UpperBound::Finite((l - d - report.expected_log_collision - sub) / denom)
        }
    }
}

/// Evaluates L_info, d(f) and both lower bounds on `set`. `means` supplies
/// the class means μ_c and the per-sample means μ(x) of the rows of `set`.
pub fn evaluate_bounds(
    set: &EmbeddingSet,
    means: &MeanRepresentations,
    settings: &EvalSettings,
) -> Result<BoundReport> {
    let scores = score_batches(set, means, settings)?;
    let dist = match &settings.class_distribution {
        Some(d) => d.clone(),
        None => set.empirical_distribution()?,
    };
    let (coeffs, coefficient_method) = class_coefficients(&dist, settings.k, settings.convention)?;
    let t = settings.temperature;
    let d_f = gap_term_d(set, means, t)?;
    report_from_scores(&scores, &coeffs, coefficient_method, d_f, settings, dist.len())
}

/// Assembles a report from already scored tuples.
pub fn report_from_scores(
    scores: &[BatchScore],
    coeffs: &ClassLevelProbs,
    coefficient_method: Method,
    d_f: LossEstimate,
    settings: &EvalSettings,
    n_classes: usize,
) -> Result<BoundReport> {
    let t = settings.temperature;
    let infos: Vec<f64> = scores.iter().map(|s| s.info_nce).collect();
    let l_info = LossEstimate::from_values(&infos, t);
    let curl = curl_bound(scores, coeffs, &d_f);
    let proposed = proposed_bound(scores, coeffs, &d_f);

    let sliced = [curl.sup, curl.sub, proposed.sup, proposed.sub];
    if sliced.iter().all(|s| s.coefficient == 0.0 || s.conditional.is_none())
        && sliced.iter().any(|s| s.coefficient > 0.0)
    {
        return Err(Error::AllSlicesEmpty { k: settings.k });
    }

    let counts = SliceCounts {
        batches: scores.len(),
        no_collision: scores.iter().filter(|s| s.col == 0).count(),
        no_collision_covers_all: scores.iter().filter(|s| s.col == 0 && s.covers_all).count(),
        covers_all_leading: scores.iter().filter(|s| s.covers_all_leading).count(),
    };
    let mut notes = Vec::new();
    for (name, terms) in [("curl", &curl), ("proposed", &proposed)] {
        for (slice, term) in [("sup", &terms.sup), ("sub", &terms.sub)] {
            if term.is_absent() {
                notes.push(format!(
                    "{name} {slice} slice had no tuples at K+1={}; its coefficient is {:.3e} and the total is partial",
                    settings.k + 1,
                    term.coefficient
                ));
            }
        }
    }
    if let Some(n) = crate::probkit::reference_coverage_note(n_classes, coeffs.cover_draws as u64, coeffs.upsilon) {
        notes.push(n);
    }
    let mut report = BoundReport {
        k_plus_1: settings.k + 1,
        n_classes,
        temperature: t,
        convention: settings.convention,
        coefficient_method,
        l_info,
        d_f,
        tau: coeffs.tau,
        upsilon: coeffs.upsilon,
        covers_given_no_collision: coeffs.covers_given_no_collision,
        expected_log_collision: coeffs.expected_log_collision,
        curl,
        proposed,
        collision_upper_bound: None,
        sup_ub_curl: UpperBound::Unavailable,
        sup_ub_proposed: UpperBound::Unavailable,
        mean_acc: None,
        probe_acc: None,
        counts,
        notes,
    };
    report.sup_ub_curl = sup_upper_bound(&report, Variant::Curl);
    report.sup_ub_proposed = sup_upper_bound(&report, Variant::Proposed);
    Ok(report)
}

/// Within-class spread estimate, overall and per class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionUpperBound {
    pub estimate: LossEstimate,
    /// (1/N_c)Σ_{i∈c}(1/N_c)Σ_{j∈c, j≠i}|…| per class; `None` for empty classes.
    pub per_class: Vec<Option<f64>>,
    pub singleton_classes: Vec<usize>,
}

/// (1/N)Σ_i (1/N_{y_i}) Σ_{j≠i, y_j=y_i} |z_i·(z_j − z_i⁺)| with two
/// independent augmentations z_i, z_i⁺ per sample (stream keyed by row).
pub fn collision_upper_bound(
    set: &EmbeddingSet,
    spec: &AugmentationSpec,
    seed: u64,
) -> Result<CollisionUpperBound> {
    spec.validate()?;
    if set.is_empty() {
        return Err(Error::InvalidArgument("empty embedding set".into()));
    }
    if set.class_counts().iter().all(|&n| n < 2) {
        return Err(Error::InvalidArgument("no class has two or more samples".into()));
    }
    let views: Vec<(Vec<f64>, Vec<f64>)> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::CollisionBound, &[i as u64]);
            let a = apply_augmentation(set.row(i), spec, &mut rng)?;
            let b = apply_augmentation(set.row(i), spec, &mut rng)?;
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    let members = set.class_members();
    let inner: Vec<f64> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let y = set.label(i);
            let (z, z_pos) = &views[i];
            let zz = dot(z, z_pos);
            let mut acc = CompensatedSum::new();
            for &j in &members[y] {
                if j != i {
                    acc.add((dot(z, &views[j].0) - zz).abs());
                }
            }
            acc.value() / members[y].len() as f64
        })
        .collect();
    let singleton_classes: Vec<usize> = (0..set.n_classes())
        .filter(|&c| set.class_counts()[c] == 1)
        .collect();
    if !singleton_classes.is_empty() {
        log::info!("classes {singleton_classes:?} have one sample and contribute zero");
    }
    let per_class = members
        .iter()
        .map(|m| {
            (!m.is_empty()).then(|| m.iter().map(|&i| inner[i]).sum::<f64>() / m.len() as f64)
        })
        .collect();
    Ok(CollisionUpperBound {
        estimate: LossEstimate::from_values(&inner, 1.0),
        per_class,
        singleton_classes,
    })
}

/// ln(Col+1) ≤ α + β·spread with α = ln(Col+1), β = (Col+1)/t.
pub fn collision_inequality_holds(col: usize, t: f64, spread: f64) -> bool {
    let lhs = ((col + 1) as f64).ln();
    let alpha = lhs;
    let beta = (col + 1) as f64 / t;
    lhs <= alpha + beta * spread
}


/// Settings shared by every K of one evaluation sweep.
#[derive(Debug, Clone, PartialEq, serde::Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    pub temperature: f64,
    /// Embedding-space augmentation for tuples, means and the collision bound.
    pub augmentation: AugmentationSpec,
    pub m_augmentations: usize,
    /// Passes over the evaluation set when `n_batches` is not given.
    pub epochs: usize,
    pub n_batches: Option<usize>,
    pub convention: DrawsConvention,
    pub seed: u64,
    pub probe: ProbeConfig,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            augmentation: AugmentationSpec::gaussian(0.1, true),
            m_augmentations: 10,
            epochs: 10,
            n_batches: None,
            convention: DrawsConvention::default(),
            seed: 0,
            probe: ProbeConfig::default(),
        }
    }
}

/// Per-sample means of `eval_set` with class means taken from `train_set`
/// when given, from `eval_set` otherwise.
pub fn evaluation_means(
    eval_set: &EmbeddingSet,
    train_set: Option<&EmbeddingSet>,
    protocol: &EvalProtocol,
) -> Result<MeanRepresentations> {
    let mut means = compute_class_means(eval_set, &protocol.augmentation, protocol.m_augmentations, protocol.seed)?;
    if let Some(train) = train_set {
        if train.dim() != eval_set.dim() || train.n_classes() != eval_set.n_classes() {
            return Err(Error::InvalidArgument(
                "training and evaluation embeddings differ in dimension or class count".into(),
            ));
        }
        let tm = compute_class_means(
            train,
            &protocol.augmentation,
            protocol.m_augmentations,
            protocol.seed ^ TRAIN_MEANS_SALT,
        )?;
        means.class_means = tm.class_means;
    }
    Ok(means)
}

const TRAIN_MEANS_SALT: u64 = 0x7261_696e;

/// One report per entry of `ks`, with accuracies and the collision upper
/// bound attached. The probe is fit on `train_set` when given.
pub fn evaluate_sweep(
    eval_set: &EmbeddingSet,
    train_set: Option<&EmbeddingSet>,
    ks: &[usize],
    protocol: &EvalProtocol,
) -> Result<Vec<BoundReport>> {
    if let Some(&k) = ks.iter().find(|&&k| k == 0) {
        return Err(Error::InvalidArgument(format!("K must be at least 1, got {k}")));
    }
    let means = evaluation_means(eval_set, train_set, protocol)?;
    let mean_acc = mean_classifier_accuracy(eval_set, &means)?;
    let probe_acc = match train_set {
        Some(train) => {
            let fit = train_linear_probe(train, Some(&means), protocol.temperature, &protocol.probe)?;
            Some(fit.probe.accuracy(eval_set))
        }
        None => None,
    };
    let collision = if eval_set.class_counts().iter().any(|&n| n >= 2) {
        Some(collision_upper_bound(eval_set, &protocol.augmentation, protocol.seed)?.estimate)
    } else {
        None
    };
    ks.iter()
        .map(|&k| {
            let n_batches = protocol
                .n_batches
                .unwrap_or_else(|| default_batch_count(eval_set.len(), k, protocol.epochs));
            let settings = EvalSettings {
                k,
                temperature: protocol.temperature,
                n_batches,
                seed: protocol.seed,
                convention: protocol.convention,
                augmentation: protocol.augmentation,
                class_distribution: None,
            };
            let mut report = evaluate_bounds(eval_set, &means, &settings)?;
            report.mean_acc = Some(mean_acc);
            report.probe_acc = probe_acc;
            report.collision_upper_bound = collision;
            Ok(report)
        })
        .collect()
}

/// Column order of the report table.
pub const CSV_COLUMNS: [&str; 17] = [
    "k_plus_1",
    "tau",
    "upsilon",
    "mu_acc",
    "linear_acc",
    "L_info",
    "d_f",
    "curl_total",
    "curl_collision",
    "curl_sup",
    "curl_sub",
    "prop_total",
    "prop_sup",
    "prop_sub",
    "collision_bound",
    "sup_ub_curl",
    "sup_ub_proposed",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn ub_cell(u: UpperBound) -> String {
    match u {
        UpperBound::Finite(v) => v.to_string(),
        other => other.to_string(),
    }
}

impl BoundReport {
    /// Cells in [`CSV_COLUMNS`] order. Absent or partial entries are `NA`.
    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.k_plus_1.to_string(),
            self.tau.to_string(),
            self.upsilon.to_string(),
            cell(self.mean_acc),
            cell(self.probe_acc),
            self.l_info.value.to_string(),
            self.d_f.value.to_string(),
            cell(self.curl.total),
            cell(self.curl.collision.value()),
            cell(self.curl.sup.value()),
            cell(self.curl.sub.value()),
            cell(self.proposed.total),
            cell(self.proposed.sup.value()),
            cell(self.proposed.sub.value()),
            cell(self.collision_upper_bound.map(|c| c.value)),
            ub_cell(self.sup_ub_curl),
            ub_cell(self.sup_ub_proposed),
        ]
    }
}

/// Writes a header and one row per report.
pub fn write_csv<W: std::io::Write>(reports: &[BoundReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    out.write_record(CSV_COLUMNS).map_err(to_io)?;
    for r in reports {
        out.write_record(r.csv_row()).map_err(to_io)?;
    }
    out.flush()?;
    Ok(())
}
