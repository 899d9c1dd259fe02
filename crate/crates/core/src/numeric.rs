//! Numerical building blocks: compensated summation, log-sum-exp and
//! log-space combinatorics.

/// Running sum with Neumaier compensation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        s.extend(iter);
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Sums terms in order of increasing magnitude with compensation.
pub fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    compensated_sum(terms)
}

/// Mean and standard error of the mean (sample standard deviation / sqrt(n)).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `ln Σ exp(x_i)`, shifted by the maximum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s = compensated_sum(xs.iter().map(|x| (x - max).exp()));
    max + s.ln()
}

/// Softmax probabilities, max-shifted.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

/// `-ln softmax(logits)[target]`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> f64 {
    log_sum_exp(logits) - logits[target]
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Table of `ln n!` for `n = 0..=max`.
#[derive(Debug, Clone)]
pub struct LnFactorials(Vec<f64>);

impl LnFactorials {
    pub fn up_to(max: usize) -> Self {
        let mut table = Vec::with_capacity(max + 1);
        let mut acc = CompensatedSum::new();
        table.push(0.0);
        for n in 1..=max {
            acc.add((n as f64).ln());
            table.push(acc.value());
        }
        Self(table)
    }

    #[inline]
    pub fn ln_factorial(&self, n: usize) -> f64 {
        self.0[n]
    }

    #[inline]
    pub fn ln_binomial(&self, n: usize, k: usize) -> f64 {
        debug_assert!(k <= n);
        self.0[n] - self.0[k] - self.0[n - k]
    }
}

/// `ln C(n, k)` by direct accumulation; fine for one-off calls.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    compensated_sum((1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()))
}

/// `H_n = Σ_{i=1}^n 1/i`.
pub fn harmonic(n: u64) -> f64 {
    // smallest terms first
    compensated_sum((1..=n).rev().map(|i| 1.0 / i as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1.0e16, 1.0, -1.0e16];
        v.extend(std::iter::repeat(1.0).take(9));
        assert_eq!(compensated_sum(v), 10.0);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let xs = [1000.0, 1000.0];
        assert!((log_sum_exp(&xs) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let ys = [-1000.0, -1000.0, -1000.0];
        assert!((log_sum_exp(&ys) - (-1000.0 + 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.5, 0.9, 0.9, 0.1]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }

    #[test]
    fn binomials_match_table() {
        let t = LnFactorials::up_to(200);
        for (n, k) in [(10u64, 3u64), (100, 50), (200, 1), (7, 7)] {
            let a = ln_binomial(n, k);
            let b = t.ln_binomial(n as usize, k as usize);
            assert!((a - b).abs() < 1e-10, "{n} {k}");
        }
        assert!((ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn harmonic_small() {
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
        assert_eq!(harmonic(0), 0.0);
    }

    #[test]
    fn mean_stderr() {
        let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
