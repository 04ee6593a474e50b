//! Shared numerical primitives: stable log-sum-exp, compensated summation,
//! log-binomials, and small combinatorial helpers.

use statrs::function::gamma::ln_gamma;

/// Numerically stable `ln(sum(exp(x_i)))` using the shift-by-max trick.
///
/// Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        // either all -inf, or at least one +inf
        return max;
    }
    let sum: f64 = values.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Neumaier's compensated summation. One pass, O(1) extra state.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// `ln C(n, k)` via log-gamma, valid for n up to at least 1e7.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Double factorial `k!! = k (k-2) (k-4) ...` with `0!! = (-1)!! = 1`.
pub fn double_factorial(k: i64) -> f64 {
    let mut acc = 1.0;
    let mut m = k;
    while m > 1 {
        acc *= m as f64;
        m -= 2;
    }
    acc
}

/// Two-sided standard-normal quantile for a confidence level in (0, 1),
/// e.g. `0.95 -> 1.959963...`.
pub fn two_sided_normal_quantile(level: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    normal.inverse_cdf(0.5 + level / 2.0)
}
