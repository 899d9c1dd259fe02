//! Exact and log-space evaluation of coverage probabilities.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, sorted_sum, LnFactorials};

/// Denominators above this many bits switch to the floating-point path.
pub(crate) const EXACT_BITS: u64 = 200_000;

/// Largest number of digits that may cancel in the floating-point
/// alternating sum before the result is refused.
pub(crate) const MAX_DIGITS_LOST: f64 = 6.0;

fn scale_pow2(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= (2.0f64).powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= (2.0f64).powi(-1000);
        e += 1000;
    }
    x * (2.0f64).powi(e as i32)
}

fn ratio_to_f64(num: &BigInt, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let negative = num.sign() == num_bigint::Sign::Minus;
    let num = num.magnitude();
    // Keep ~64 significant bits in the quotient before converting.
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    let mag = scale_pow2(q.to_f64().unwrap_or(f64::INFINITY), -shift);
    if negative {
        -mag
    } else {
        mag
    }
}

/// Σ_{m=0}^{terms} C(terms, m)(−1)^m ((base − m)/denom)^exponent, evaluated
/// with exact integer arithmetic.
pub(crate) fn alternating_power_sum_exact(terms: u64, base: u64, denom: u64, exponent: u64) -> f64 {
    let mut binom = BigInt::one();
    let mut total = BigInt::zero();
    for m in 0..=terms {
        let b = base.saturating_sub(m);
        if b > 0 || exponent == 0 {
            let term = &binom * BigInt::from(b).pow(exponent as u32);
            if m % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
        if m < terms {
            binom = binom * BigInt::from(terms - m) / BigInt::from(m + 1);
        }
    }
    let den = BigUint::from(denom).pow(exponent as u32);
    ratio_to_f64(&total, &den)
}

/// Same sum in floating point with log-space binomials. Fails with
/// [`Error::Cancellation`] when too many significant digits are lost.
pub(crate) fn alternating_power_sum_f64(
    terms: u64,
    base: u64,
    denom: u64,
    exponent: u64,
) -> Result<f64> {
    let lf = LnFactorials::up_to(terms as usize);
    let mut signed = Vec::with_capacity(terms as usize + 1);
    for m in 0..=terms {
        let b = base.saturating_sub(m);
        let log_mag = if b == 0 {
            if exponent == 0 {
                lf.ln_binomial(terms as usize, m as usize)
            } else {
                continue;
            }
        } else {
            lf.ln_binomial(terms as usize, m as usize)
                + exponent as f64 * (b as f64 / denom as f64).ln()
        };
        let mag = log_mag.exp();
        signed.push(if m % 2 == 0 { mag } else { -mag });
    }
    let abs_total: f64 = sorted_sum(signed.iter().map(|x| x.abs()).collect());
    let value = sorted_sum(signed);
    let digits_lost = if value == 0.0 {
        f64::INFINITY
    } else {
        (abs_total / value.abs()).log10()
    };
    if abs_total > 0.0 && digits_lost > MAX_DIGITS_LOST {
        return Err(Error::Cancellation { digits_lost });
    }
    Ok(value)
}

pub(crate) fn exact_is_affordable(denom: u64, exponent: u64) -> bool {
    (exponent as f64) * (denom as f64).log2() <= EXACT_BITS as f64
}

/// Alternating sum using exact arithmetic when the numbers stay small
/// enough, floating point otherwise.
pub(crate) fn alternating_power_sum(terms: u64, base: u64, denom: u64, exponent: u64) -> Result<f64> {
    if exact_is_affordable(denom, exponent) {
        Ok(alternating_power_sum_exact(terms, base, denom, exponent))
    } else {
        alternating_power_sum_f64(terms, base, denom, exponent)
    }
}

/// Probability that `draws` i.i.d. draws from `probs` hit every entry at
/// least once, by summing multinomial allocations with at least one draw per
/// class. All terms are positive so no cancellation occurs.
/// Cost is about `len · draws² / 2` log-space operations.
pub(crate) fn allocation_cover_probability(probs: &[f64], draws: usize) -> f64 {
    let n = probs.len();
    if draws < n {
        return 0.0;
    }
    let lf = LnFactorials::up_to(draws);
    // g[t]: ln P(t draws all land in the classes seen so far and cover each),
    // up to the multinomial normalisation t!.
    // Work with ln(g[t] / t!) so the recurrence is a plain convolution.
    let neg_inf = f64::NEG_INFINITY;
    let mut g = vec![neg_inf; draws + 1];
    g[0] = 0.0;
    let mut terms = Vec::with_capacity(draws);
    for (c, &p) in probs.iter().enumerate() {
        let lp = p.ln();
        let mut next = vec![neg_inf; draws + 1];
        let min_t = c + 1;
        // Classes after this one still need at least one draw each.
        let max_t = draws - (n - c - 1);
        for (t, slot) in next.iter_mut().enumerate().take(max_t + 1).skip(min_t) {
            terms.clear();
            for j in 1..=(t - c) {
                let prev = g[t - j];
                if prev == neg_inf {
                    continue;
                }
                terms.push(prev + j as f64 * lp - lf.ln_factorial(j));
            }
            if !terms.is_empty() {
                *slot = log_sum_exp(&terms);
            }
        }
        g = next;
    }
    let v = (g[draws] + lf.ln_factorial(draws)).exp();
    v.min(1.0)
}

/// Inclusion–exclusion over every subset of classes:
/// Σ_S (−1)^{|S|} (1 − ρ(S))^draws. Only sensible for small class counts.
pub(crate) fn subset_cover_probability(probs: &[f64], draws: u64) -> Result<f64> {
    let n = probs.len();
    if n > 20 {
        return Err(Error::InvalidArgument(format!(
            "subset inclusion-exclusion needs at most 20 classes, got {n}"
        )));
    }
    if (draws as usize) < n {
        return Ok(0.0);
    }
    let mut signed = Vec::with_capacity(1 << n);
    for mask in 0u32..(1u32 << n) {
        let mass: f64 = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| probs[i]).sum();
        let rest = (1.0 - mass).max(0.0);
        let mag = if draws == 0 { 1.0 } else { rest.powf(draws as f64) };
        signed.push(if mask.count_ones() % 2 == 0 { mag } else { -mag });
    }
    let abs_total = sorted_sum(signed.iter().map(|x| x.abs()).collect());
    let value = sorted_sum(signed);
    if value != 0.0 {
        let digits_lost = (abs_total / value.abs()).log10();
        if digits_lost > MAX_DIGITS_LOST {
            return Err(Error::Cancellation { digits_lost });
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_coupons_four_draws() {
        let v = alternating_power_sum_exact(4, 4, 4, 4);
        assert!((v - 0.09375).abs() < 1e-16);
        let f = alternating_power_sum_f64(4, 4, 4, 4).unwrap();
        assert!((f - 0.09375).abs() < 1e-14);
        let a = allocation_cover_probability(&[0.25; 4], 4);
        assert!((a - 0.09375).abs() < 1e-14);
        let s = subset_cover_probability(&[0.25; 4], 4).unwrap();
        assert!((s - 0.09375).abs() < 1e-14);
    }

    #[test]
    fn float_path_refuses_heavy_cancellation() {
        let err = alternating_power_sum_f64(100, 100, 100, 128).unwrap_err();
        assert!(matches!(err, Error::Cancellation { .. }));
    }

    #[test]
    fn tiny_ratio_does_not_underflow_early() {
        // 2^-1500 is below f64 range, but 100-coupon probabilities near 1e-22 are fine.
        let v = alternating_power_sum_exact(100, 100, 100, 128);
        assert!(v > 1e-23 && v < 1e-21, "{v}");
    }

    #[test]
    fn allocation_matches_subset_for_skewed_probs() {
        let p = [0.5, 0.3, 0.15, 0.05];
        for d in 0..40 {
            let a = allocation_cover_probability(&p, d);
            let s = subset_cover_probability(&p, d as u64).unwrap();
            assert!((a - s).abs() < 1e-12, "d={d}: {a} vs {s}");
        }
    }
}
