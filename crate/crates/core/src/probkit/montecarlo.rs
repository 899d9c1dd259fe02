//! Monte-Carlo simulation of coupon collection and class-level collision
//! events. Work is split over a fixed number of shards, each with its own
//! keyed stream, and merged with integer arithmetic so results do not
//! depend on thread scheduling.

use rand::Rng;
use rayon::prelude::*;

use super::{ClassDistribution, ClassSampler};
use crate::rng::{stream, Purpose};

pub const MC_SHARDS: u64 = 64;

pub(crate) fn shard_sizes(trials: u64) -> Vec<(u64, u64)> {
    let base = trials / MC_SHARDS;
    let rem = trials % MC_SHARDS;
    (0..MC_SHARDS)
        .map(|s| (s, base + u64::from(s < rem)))
        .filter(|&(_, n)| n > 0)
        .collect()
}

/// Outcome counts of repeated coupon-collection runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoppingTimeSample {
    pub trials: u64,
    /// `histogram[t]` counts runs that completed at exactly `t` draws.
    pub histogram: Vec<u64>,
    /// Runs that had not completed when the draw limit was reached.
    pub unfinished: u64,
    /// Sum and sum of squares of completion times (only meaningful without a limit).
    pub sum: u128,
    pub sum_sq: u128,
}

impl StoppingTimeSample {
    fn empty(hist_len: usize) -> Self {
        Self {
            trials: 0,
            histogram: vec![0; hist_len],
            unfinished: 0,
            sum: 0,
            sum_sq: 0,
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        self.trials += other.trials;
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        self.unfinished += other.unfinished;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    /// Fraction of runs completed within `draws` draws.
    pub fn completed_within(&self, draws: u64) -> u64 {
        let upto = (draws as usize + 1).min(self.histogram.len());
        self.histogram[..upto].iter().sum()
    }
}

/// Simulates `trials` collection runs, stopping each after `limit` draws
/// when a limit is given. Completion times above `hist_len − 1` are kept in
/// the sums only.
pub fn simulate_stopping_times(
    dist: &ClassDistribution,
    limit: Option<u64>,
    hist_len: usize,
    trials: u64,
    seed: u64,
) -> StoppingTimeSample {
    let n = dist.len();
    let sampler = dist.sampler();
    let shards: Vec<StoppingTimeSample> = shard_sizes(trials)
        .into_par_iter()
        .map(|(shard, count)| {
            let mut rng = stream(seed, Purpose::MonteCarlo, &[shard]);
            let mut out = StoppingTimeSample::empty(hist_len);
            let mut stamp = vec![u64::MAX; n];
            for trial in 0..count {
                let mut seen = 0usize;
                let mut draws = 0u64;
                let finished = loop {
                    if seen == n {
                        break true;
                    }
                    if limit.is_some_and(|l| draws >= l) {
                        break false;
                    }
                    let c = sampler.sample(&mut rng);
                    draws += 1;
                    if stamp[c] != trial {
                        stamp[c] = trial;
                        seen += 1;
                    }
                };
                out.trials += 1;
                if finished {
                    if (draws as usize) < hist_len {
                        out.histogram[draws as usize] += 1;
                    }
                    out.sum += u128::from(draws);
                    out.sum_sq += u128::from(draws) * u128::from(draws);
                } else {
                    out.unfinished += 1;
                }
            }
            out
        })
        .collect();
    shards
        .iter()
        .fold(StoppingTimeSample::empty(hist_len), |acc, s| acc.merge(s))
}

/// Counts gathered by simulating (anchor class, K negative classes) tuples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassLevelCounts {
    pub trials: u64,
    pub collided: u64,
    pub covered: u64,
    pub no_collision: u64,
    pub no_collision_covered: u64,
    /// Σ ln(Col+1) and Σ ln(Col+1)², kept as exact integer histograms of Col.
    pub col_histogram: Vec<u64>,
}

/// Simulates anchor and `k` negative classes. `cover_draws` is the number of
/// leading class draws (anchor first) used for the covers-all event.
pub fn simulate_class_level(
    dist: &ClassDistribution,
    k: usize,
    cover_draws: usize,
    trials: u64,
    seed: u64,
) -> ClassLevelCounts {
    let n = dist.len();
    let sampler = dist.sampler();
    let shards: Vec<ClassLevelCounts> = shard_sizes(trials)
        .into_par_iter()
        .map(|(shard, count)| {
            let mut rng = stream(seed, Purpose::ClassLevel, &[shard]);
            let mut out = ClassLevelCounts {
                col_histogram: vec![0; k + 1],
                ..Default::default()
            };
            let mut stamp = vec![u64::MAX; n];
            for trial in 0..count {
                let anchor = sampler.sample(&mut rng);
                stamp[anchor] = trial;
                let mut seen = 1usize;
                let mut seen_at_cover = if cover_draws <= 1 { Some(seen) } else { None };
                let mut col = 0usize;
                for j in 0..k {
                    let c = sampler.sample(&mut rng);
                    if c == anchor {
                        col += 1;
                    }
                    if stamp[c] != trial {
                        stamp[c] = trial;
                        seen += 1;
                    }
                    if j + 2 == cover_draws {
                        seen_at_cover = Some(seen);
                    }
                }
                let seen_at_cover = seen_at_cover.unwrap_or(seen);
                out.trials += 1;
                out.col_histogram[col] += 1;
                if col > 0 {
                    out.collided += 1;
                } else {
                    out.no_collision += 1;
                    if seen == n {
                        out.no_collision_covered += 1;
                    }
                }
                if cover_draws > 0 && seen_at_cover == n {
                    out.covered += 1;
                }
            }
            out
        })
        .collect();
    let mut total = ClassLevelCounts {
        col_histogram: vec![0; k + 1],
        ..Default::default()
    };
    for s in &shards {
        total.trials += s.trials;
        total.collided += s.collided;
        total.covered += s.covered;
        total.no_collision += s.no_collision;
        total.no_collision_covered += s.no_collision_covered;
        for (a, b) in total.col_histogram.iter_mut().zip(&s.col_histogram) {
            *a += b;
        }
    }
    total
}

impl ClassSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            ClassSampler::Single => 0,
            ClassSampler::Uniform(n) => rng.random_range(0..*n),
            ClassSampler::Weighted(w) => rand::distr::Distribution::sample(w, rng),
        }
    }
}
