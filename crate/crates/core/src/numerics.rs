//! Compensated summation and log-domain helpers.

use crate::scalar::Real;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy)]
pub struct KahanSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Real> Default for KahanSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> KahanSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::ZERO,
            compensation: T::ZERO,
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn total(&self) -> T {
        self.sum + self.compensation
    }
}

impl<T: Real> FromIterator<T> for KahanSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `ln Σ exp(xᵢ)`; `-∞` for an empty slice or when every term is `-∞`.
pub fn log_sum_exp<T: Real>(terms: &[T]) -> T {
    let max = terms.iter().copied().fold(T::NEG_INFINITY, |a, b| a.max(b));
    if max == T::NEG_INFINITY {
        return T::NEG_INFINITY;
    }
    if max == T::INFINITY {
        return T::INFINITY;
    }
    let acc: KahanSum<T> = terms.iter().map(|&x| (x - max).exp()).collect();
    max + acc.total().ln()
}

/// `k·ln(p)` with the convention `0·ln 0 = 0`.
#[inline]
pub fn xlny<T: Real>(k: T, p: T) -> T {
    if k == T::ZERO {
        T::ZERO
    } else if p == T::ZERO {
        T::NEG_INFINITY
    } else {
        k * p.ln()
    }
}

/// `ln C(n, k)` for every `k` in `0..=n`, accumulated from running sums of
/// logarithms.
pub fn ln_binomial_row<T: Real>(n: usize) -> Vec<T> {
    let mut row = Vec::with_capacity(n + 1);
    let mut acc = KahanSum::new();
    row.push(T::ZERO);
    for k in 0..n {
        acc.add(T::of_usize(n - k).ln() - T::of_usize(k + 1).ln());
        row.push(acc.total());
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut acc = KahanSum::<f64>::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        assert!((acc.total() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let w = log_sum_exp(&[0.0f64.ln(), 0.5f64.ln(), 0.25f64.ln()]);
        assert!((w.exp() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn xlny_zero_conventions() {
        assert_eq!(xlny(0.0, 0.0), 0.0);
        assert_eq!(xlny(2.0, 0.0), f64::NEG_INFINITY);
        assert!((xlny(2.0f64, 0.5) - 2.0 * 0.5f64.ln()).abs() < 1e-16);
    }

    #[test]
    fn binomial_row_matches_integers() {
        let row = ln_binomial_row::<f64>(20);
        let mut exact = 1u64;
        for (k, v) in row.iter().enumerate() {
            assert!(
                (v.exp() - exact as f64).abs() / (exact as f64) < 1e-13,
                "k = {k}"
            );
            exact = exact * (20 - k as u64) / (k as u64 + 1);
        }
    }
}
