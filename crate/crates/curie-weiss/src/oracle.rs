//! Independent oracles: exhaustive configuration enumeration for small groups
//! and a one-dimensional quadrature route to the spin correlations.
//!
//! Neither path goes through the exchangeability reduction used by
//! [`crate::model`], so these serve as ground truth in tests and during
//! constant calibration. The quadrature evaluates the integral form
//!
//! ```text
//! E X_1 ... X_k = int exp(-N (z^2/(2b) - ln cosh z)) tanh^k z dz
//!               / int exp(-N (z^2/(2b) - ln cosh z)) dz
//! ```
//!
//! which is exact for every N and every coupling b > 0, not just in the
//! large-N limit.

use crate::cw;
use crate::error::{Error, Result};

const MAX_BRUTE_FORCE_N: u64 = 20;

fn check_brute_force_n(group_size: u64) -> Result<()> {
    if group_size == 0 || group_size > MAX_BRUTE_FORCE_N {
        return Err(Error::invalid(format!(
            "brute force enumeration supports 1 <= N <= {MAX_BRUTE_FORCE_N}, got {group_size}"
        )));
    }
    Ok(())
}

/// Margin of configuration bits: each set bit is a +1 spin.
fn margin_of(config: u64, group_size: u64) -> i64 {
    2 * config.count_ones() as i64 - group_size as i64
}

/// E S^k by summing over all 2^N spin configurations.
pub fn brute_force_moment(beta: f64, group_size: u64, k: u32) -> Result<f64> {
    check_brute_force_n(group_size)?;
    let nf = group_size as f64;
    let mut z = 0.0;
    let mut acc = 0.0;
    for config in 0u64..(1u64 << group_size) {
        let s = margin_of(config, group_size) as f64;
        let w = (beta * s * s / (2.0 * nf)).exp();
        z += w;
        acc += w * s.powi(k as i32);
    }
    Ok(acc / z)
}

/// E |S| by exhaustive enumeration.
pub fn brute_force_abs_moment(beta: f64, group_size: u64) -> Result<f64> {
    check_brute_force_n(group_size)?;
    let nf = group_size as f64;
    let mut z = 0.0;
    let mut acc = 0.0;
    for config in 0u64..(1u64 << group_size) {
        let s = margin_of(config, group_size) as f64;
        let w = (beta * s * s / (2.0 * nf)).exp();
        z += w;
        acc += w * s.abs();
    }
    Ok(acc / z)
}

/// ln Z by exhaustive enumeration.
pub fn brute_force_log_partition(beta: f64, group_size: u64) -> Result<f64> {
    check_brute_force_n(group_size)?;
    let nf = group_size as f64;
    let mut z = 0.0;
    for config in 0u64..(1u64 << group_size) {
        let s = margin_of(config, group_size) as f64;
        z += (beta * s * s / (2.0 * nf)).exp();
    }
    Ok(z.ln())
}

/// P(S = s) by exhaustive enumeration.
pub fn brute_force_margin_prob(beta: f64, group_size: u64, margin: i64) -> Result<f64> {
    check_brute_force_n(group_size)?;
    let nf = group_size as f64;
    let mut z = 0.0;
    let mut hits = 0.0;
    for config in 0u64..(1u64 << group_size) {
        let s = margin_of(config, group_size);
        let w = ((beta * (s * s) as f64) / (2.0 * nf)).exp();
        z += w;
        if s == margin {
            hits += w;
        }
    }
    Ok(hits / z)
}

/// Exact pair correlation E X_1 X_2 recovered from the exact second moment
/// via E S^2 = N + N (N-1) E X_1 X_2.
pub fn exact_pair_correlation(beta: f64, group_size: u64) -> Result<f64> {
    if group_size < 2 {
        return Err(Error::invalid("pair correlation needs N >= 2"));
    }
    let n = group_size as f64;
    let e2 = crate::model::exact_moment(beta, group_size, 2)?;
    Ok((e2 - n) / (n * (n - 1.0)))
}

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
const XGK: [f64; 15] = [
    -0.9914553711208126,
    -0.9491079123427585,
    -0.8648644233597691,
    -0.7415311855993944,
    -0.5860872354676911,
    -0.4058451513773972,
    -0.2077849550078985,
    0.0,
    0.2077849550078985,
    0.4058451513773972,
    0.5860872354676911,
    0.7415311855993944,
    0.8648644233597691,
    0.9491079123427585,
    0.9914553711208126,
];
const WGK: [f64; 15] = [
    0.022935322010529224,
    0.06309209262997856,
    0.10479001032225018,
    0.14065325971552592,
    0.1690047266392679,
    0.1903505780647854,
    0.20443294007529889,
    0.20948214108472782,
    0.20443294007529889,
    0.1903505780647854,
    0.1690047266392679,
    0.14065325971552592,
    0.10479001032225018,
    0.06309209262997856,
    0.022935322010529224,
];
const WG: [f64; 7] = [
    0.1294849661688697,
    0.27970539148927664,
    0.3818300505051189,
    0.4179591836734694,
    0.3818300505051189,
    0.27970539148927664,
    0.1294849661688697,
];

/// One Gauss-Kronrod 15(7) panel: (kronrod value, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let v = f(center + half * x);
        kronrod += wk * v;
        if i % 2 == 1 {
            gauss += WG[i / 2] * v;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Adaptive bisection driven by the embedded-rule error estimate.
fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<f64> {
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    let mut err_total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (value, err) = gk15(f, lo, hi);
        let tol = (rel_tol * value.abs()).max(abs_floor);
        if err <= tol || depth >= 52 {
            total += value;
            err_total += err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    let allowed = (rel_tol * total.abs()).max(abs_floor * 64.0);
    if err_total > allowed {
        return Err(Error::QuadratureFailure {
            tolerance: rel_tol,
            estimated: err_total / total.abs().max(f64::MIN_POSITIVE),
        });
    }
    Ok(total)
}

/// Exact correlation E X_1 ... X_k (k even) via one-dimensional quadrature
/// of the transformed spin sum.
///
/// The exponent `N (F(z) - F_min)` is used with `F(z) = z^2/(2 beta) -
/// ln cosh z` and `F_min` its minimum, so the integrand is O(1). The domain
/// is cut at `z*` with `N (F(z*) - F_min) >= 40`, discarding a tail below
/// 1e-14 of the total mass. Couplings in (0, 1) close to 1 are fine: the two
/// wells merge but the quadrature does not rely on any well separation.
pub fn hs_correlation(beta: f64, group_size: u64, k: u32) -> Result<f64> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::invalid(format!(
            "hs_correlation requires finite beta > 0, got {beta}"
        )));
    }
    if k == 0 || !k.is_multiple_of(2) {
        return Err(Error::invalid(format!("k must be even and >= 2, got {k}")));
    }
    if u64::from(k) > group_size {
        return Err(Error::invalid(format!(
            "correlation order k={k} exceeds group size {group_size}"
        )));
    }
    let n = group_size as f64;
    let f_exponent = |z: f64| z * z / (2.0 * beta) - z.cosh().ln();

    // Minimizer: z = 0 for beta <= 1, otherwise artanh(m(beta)).
    let z_min = if beta > 1.0 {
        cw::magnetization(beta)?.atanh()
    } else {
        0.0
    };
    let f_min = f_exponent(z_min);

    // Cut the domain once the rescaled exponent is >= 40.
    let mut z_star = z_min + 1.0;
    while n * (f_exponent(z_star) - f_min) < 40.0 {
        z_star *= 2.0;
        if z_star > 1e6 {
            return Err(Error::invalid("failed to truncate quadrature domain"));
        }
    }

    // Both integrands are even; integrate [0, z*] with panel breaks at the
    // positive minimizer where the mass concentrates.
    let numerator_f = |z: f64| (-n * (f_exponent(z) - f_min)).exp() * z.tanh().powi(k as i32);
    let denominator_f = |z: f64| (-n * (f_exponent(z) - f_min)).exp();

    let breaks: Vec<f64> = if z_min > 0.0 {
        vec![0.0, 0.5 * z_min, z_min, 0.5 * (z_min + z_star), z_star]
    } else {
        vec![0.0, 0.25 * z_star, z_star]
    };
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for w in breaks.windows(2) {
        numerator += adaptive_gk(&numerator_f, w[0], w[1], 1e-12, 1e-300)?;
        denominator += adaptive_gk(&denominator_f, w[0], w[1], 1e-12, 1e-300)?;
    }
    Ok(numerator / denominator)
}
