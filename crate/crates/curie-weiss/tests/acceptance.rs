//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured numbers (run with `--nocapture` to see them).
//!
//! Every Monte Carlo check runs on fixed seeds with deterministic
//! per-replication substreams, so the suite is reproducible bit for bit.

use std::collections::HashMap;

use rayon::prelude::*;

use curie_weiss::cw;
use curie_weiss::estimator::{self, Estimate};
use curie_weiss::ldp::{self, DiscreteLaw};
use curie_weiss::model::{self, ModelSpec};
use curie_weiss::oracle;
use curie_weiss::regimes::{self, build_intervals, ErrorConstants};
use curie_weiss::weights;

fn rep_seed(base: u64, rep: usize) -> u64 {
    base ^ (rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn three_se_band(frequency: f64, replications: usize) -> f64 {
    3.0 * (frequency * (1.0 - frequency) / replications as f64).sqrt()
}

/// Criterion 1: log-partition and moments (k <= 6) match exhaustive 2^N
/// enumeration for all N <= 16, couplings in {-1, 0, 0.5, 1, 1.5, 2},
/// relative error <= 1e-10.
#[test]
fn criterion_01_exactness_against_enumeration() {
    let betas = [-1.0, 0.0, 0.5, 1.0, 1.5, 2.0];
    let mut worst: f64 = 0.0;
    for &beta in &betas {
        for n in 1..=16u64 {
            let lz = model::log_partition(beta, n).unwrap();
            let lz_brute = oracle::brute_force_log_partition(beta, n).unwrap();
            worst = worst.max((lz - lz_brute).abs() / lz_brute.abs());
            let scale2 = oracle::brute_force_moment(beta, n, 2).unwrap();
            for k in 1..=6u32 {
                let fast = model::exact_moment(beta, n, k).unwrap();
                let brute = oracle::brute_force_moment(beta, n, k).unwrap();
                // odd moments vanish; compare against the natural |S|^k scale
                let scale = brute.abs().max(scale2.powf(k as f64 / 2.0));
                worst = worst.max((fast - brute).abs() / scale);
            }
        }
    }
    println!("criterion 1: worst relative error {worst:.3e} (tolerance 1e-10)");
    assert!(worst <= 1e-10, "criterion 1 FAIL: worst error {worst:.3e}");
    println!("criterion 1: PASS");
}

/// Criterion 2: high-temperature envelope at beta = 0.5 with the calibrated
/// constant, for every N in 2..=2000; deviation shrinks monotonically inside
/// the envelope; log-log decay slope within -0.5 +- 0.15.
#[test]
fn criterion_02_high_temperature_envelope_and_decay() {
    let constants = *ErrorConstants::default_calibrated();
    let beta = 0.5;
    let target = 1.0 / (1.0 - beta);
    let mut devs = Vec::with_capacity(1999);
    let mut envelope_ok = true;
    for n in 2..=2000u64 {
        let nf = n as f64;
        let dev = (model::exact_moment(beta, n, 2).unwrap() / nf - target).abs();
        let env = regimes::moment_error_envelope(constants, beta, n, 1).unwrap();
        if dev > env {
            envelope_ok = false;
        }
        devs.push(dev);
    }
    let monotone_ok = devs.windows(2).all(|w| w[1] <= w[0] + 1e-12);

    // least-squares slope of ln|dev| against ln N
    let ln_n: Vec<f64> = (2..=2000u64).map(|n| (n as f64).ln()).collect();
    let ln_d: Vec<f64> = devs.iter().map(|d| d.ln()).collect();
    let mx = ln_n.iter().sum::<f64>() / ln_n.len() as f64;
    let my = ln_d.iter().sum::<f64>() / ln_d.len() as f64;
    let sxy: f64 = ln_n.iter().zip(&ln_d).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = ln_n.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let slope_ok = (-0.65..=-0.35).contains(&slope);

    println!(
        "criterion 2: envelope {} | monotone {} | log-log slope {:.3} in [-0.65, -0.35]: {}",
        if envelope_ok { "PASS" } else { "FAIL" },
        if monotone_ok { "PASS" } else { "FAIL" },
        slope,
        if slope_ok { "PASS" } else { "FAIL" },
    );
    assert!(envelope_ok, "criterion 2 FAIL: envelope violated");
    assert!(monotone_ok, "criterion 2 FAIL: |E S^2/N - 2| not monotone");
    // The exact deviation decays like ~4/N (dev*N -> -3.99 along this very
    // grid), a full order faster than the 1/sqrt(N) envelope; the envelope
    // is a bound, not a sharp rate, so this sub-check cannot be satisfied
    // by any correct implementation.
    assert!(
        slope_ok,
        "criterion 2 FAIL: measured log-log slope {slope:.3}; the exact deviation \
         decays like 1/N (dev*N -> {:.3} at N=2000), so a slope in -0.5 +- 0.15 \
         is unattainable even though the 1/sqrt(N) envelope holds everywhere",
        devs[1998] * 2000.0
    );
    println!("criterion 2: PASS");
}

/// Criterion 3: low-temperature envelope at beta = 2 for every N in
/// 2..=2000 with the calibrated constant.
#[test]
fn criterion_03_low_temperature_envelope() {
    let constants = *ErrorConstants::default_calibrated();
    let beta = 2.0;
    let m = cw::magnetization(beta).unwrap();
    let target = m * m;
    let mut worst_ratio: f64 = 0.0;
    for n in 2..=2000u64 {
        let nf = n as f64;
        let dev = (model::exact_moment(beta, n, 2).unwrap() / (nf * nf) - target).abs();
        let env = regimes::moment_error_envelope(constants, beta, n, 1).unwrap();
        worst_ratio = worst_ratio.max(dev / env);
    }
    println!("criterion 3: worst deviation/envelope ratio {worst_ratio:.3}");
    assert!(worst_ratio <= 1.0, "criterion 3 FAIL: ratio {worst_ratio:.3}");
    println!("criterion 3: PASS");
}

/// Criterion 4: the quadrature oracle agrees with the exact pair
/// correlation (E S^2 - N)/(N(N-1)) to 1e-8 for beta in {0.5, 2},
/// N in {10, 50, 200}.
#[test]
fn criterion_04_quadrature_oracle() {
    let mut worst: f64 = 0.0;
    for &beta in &[0.5, 2.0] {
        for &n in &[10u64, 50, 200] {
            let hs = oracle::hs_correlation(beta, n, 2).unwrap();
            let exact = oracle::exact_pair_correlation(beta, n).unwrap();
            worst = worst.max((hs - exact).abs());
        }
    }
    println!("criterion 4: worst |quadrature - exact| = {worst:.3e} (tolerance 1e-8)");
    assert!(worst <= 1e-8, "criterion 4 FAIL: {worst:.3e}");
    println!("criterion 4: PASS");
}

/// Criterion 5: the closed-form entropy function matches the numeric
/// Legendre transform at 1000 grid points to 1e-12, and the Legendre
/// transform of tested squared-margin laws vanishes at the mean, is
/// positive elsewhere, and convex by discrete second differences.
#[test]
fn criterion_05_entropy_functions() {
    let rad = DiscreteLaw::rademacher();
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let x = -1.0 + 2.0 * i as f64 / 999.0;
        worst = worst.max((rad.legendre(x) - ldp::rademacher_entropy(x)).abs());
    }
    assert!(worst <= 1e-12, "criterion 5 FAIL: closed form mismatch {worst:.3e}");

    for &(beta, n) in &[(0.0, 12u64), (0.5, 40), (1.5, 100)] {
        let law = DiscreteLaw::squared_margin(beta, n).unwrap();
        let mean = law.mean();
        assert!(law.legendre(mean) <= 1e-12, "nonzero at the mean");
        let lo = law.min_value();
        let hi = law.max_value();
        let step = (hi - lo) / 40.0;
        for i in 0..=40 {
            let x = lo + step * i as f64;
            if (x - mean).abs() > step {
                assert!(law.legendre(x) > 0.0, "beta={beta} n={n} x={x}");
            }
            if (1..=39).contains(&i) {
                let dd = law.legendre(x + step) - 2.0 * law.legendre(x) + law.legendre(x - step);
                assert!(dd >= -1e-9, "convexity violated at beta={beta} n={n} x={x}");
            }
        }
    }
    println!("criterion 5: PASS (closed-form gap {worst:.3e}, tolerance 1e-12)");
}

/// Criterion 6: at beta = 0.5, N = 500, boundaries (0.8, 1.25), the Monte
/// Carlo frequency of low-temperature or inconclusive labels over 1e4
/// replications at each n in {20, 50, 100} stays within
/// exp(-eta_2 n) + 3 binomial SE.
#[test]
fn criterion_06_misidentification_bound() {
    let beta = 0.5;
    let n_group = 500u64;
    let replications = 10_000usize;
    let iv = build_intervals(0.8, 1.25, n_group, *ErrorConstants::default_calibrated()).unwrap();
    let eta2 = ldp::regime_misid_bound(&iv, beta).unwrap();
    let spec = ModelSpec::single(n_group, beta).unwrap();

    for (si, &n_obs) in [20usize, 50, 100].iter().enumerate() {
        let bad: usize = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let seed = rep_seed(0xC61 + si as u64, rep);
                let sample = model::sample(&spec, n_obs, seed).unwrap();
                let t = estimator::statistic_t(&sample)[0];
                match estimator::estimate_beta_inf(t, &iv) {
                    Estimate::LowTemp(_) | Estimate::Inconclusive => 1,
                    Estimate::HighTemp(_) => 0,
                }
            })
            .sum();
        let frequency = bad as f64 / replications as f64;
        let bound = (-eta2 * n_obs as f64).exp();
        let allowed = bound + three_se_band(frequency, replications);
        println!(
            "criterion 6 (n={n_obs}): frequency {frequency:.2e} vs bound {bound:.3e} + 3SE {:.2e}",
            allowed - bound
        );
        assert!(
            frequency <= allowed,
            "criterion 6 FAIL at n={n_obs}: {frequency:.3e} > {allowed:.3e} (eta2={eta2:.3})"
        );
    }
    println!("criterion 6: PASS (eta2 = {eta2:.3})");
}

fn replicate_estimates(
    spec: &ModelSpec,
    iv: &curie_weiss::RegimeIntervals,
    n_obs: usize,
    replications: usize,
    base_seed: u64,
) -> Vec<f64> {
    (0..replications)
        .into_par_iter()
        .map(|rep| {
            let sample = model::sample(spec, n_obs, rep_seed(base_seed, rep)).unwrap();
            let t = estimator::statistic_t(&sample)[0];
            estimator::estimate_beta_inf(t, iv)
                .value()
                .expect("conclusive estimate expected at this sample size")
        })
        .collect()
}

/// Criterion 7: at beta = 0.5, N = 500, n = 5000, 2000 replications, the
/// estimator's mean sits within 3 SE of the pseudo-true value, the variance
/// of sqrt(n)(estimate - pseudo-true) is within 10% of the theoretical
/// value, and 95% CI coverage lands in [0.93, 0.97]. At beta = 2 the
/// low-temperature variance formula passes within 15%.
#[test]
fn criterion_07_consistency_clt_coverage() {
    let n_group = 500u64;
    let n_obs = 5000usize;
    let replications = 2000usize;
    let constants = *ErrorConstants::default_calibrated();
    let iv = build_intervals(0.8, 1.25, n_group, constants).unwrap();

    // high-temperature group
    let beta = 0.5;
    let spec = ModelSpec::single(n_group, beta).unwrap();
    let bt = estimator::pseudo_true_beta(beta, n_group, &iv).unwrap();
    let estimates = replicate_estimates(&spec, &iv, n_obs, replications, 0xACC7);
    let r = replications as f64;
    let mean = estimates.iter().sum::<f64>() / r;
    let var_hat = estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let se_mean = (var_hat / r).sqrt();
    println!(
        "criterion 7 (beta=0.5): mean {mean:.6} vs pseudo-true {bt:.6} (3 SE = {:.2e})",
        3.0 * se_mean
    );
    assert!(
        (mean - bt).abs() <= 3.0 * se_mean,
        "criterion 7 FAIL: bias {:.3e} exceeds 3 SE {:.3e}",
        (mean - bt).abs(),
        3.0 * se_mean
    );

    let sigma2_ref = ldp::asymptotic_variance(beta, n_group, &iv).unwrap();
    let var_scaled = var_hat * n_obs as f64;
    println!(
        "criterion 7 (beta=0.5): n*var = {var_scaled:.4} vs theoretical {sigma2_ref:.4}"
    );
    assert!(
        (var_scaled / sigma2_ref - 1.0).abs() <= 0.10,
        "criterion 7 FAIL: variance off by {:.1}%",
        100.0 * (var_scaled / sigma2_ref - 1.0).abs()
    );

    let covered: usize = estimates
        .par_iter()
        .map(|&v| {
            let (lo, hi) =
                ldp::confidence_interval(Estimate::HighTemp(v), n_obs, n_group, 0.95).unwrap();
            (lo <= bt && bt <= hi) as usize
        })
        .sum();
    let coverage = covered as f64 / r;
    println!("criterion 7 (beta=0.5): coverage {coverage:.4} (target [0.93, 0.97])");
    assert!(
        (0.93..=0.97).contains(&coverage),
        "criterion 7 FAIL: coverage {coverage:.4}"
    );

    // low-temperature group: variance formula with m'
    let beta_low = 2.0;
    let spec_low = ModelSpec::single(n_group, beta_low).unwrap();
    let bt_low = estimator::pseudo_true_beta(beta_low, n_group, &iv).unwrap();
    let est_low = replicate_estimates(&spec_low, &iv, n_obs, replications, 0xACC8);
    let mean_low = est_low.iter().sum::<f64>() / r;
    let var_low = est_low.iter().map(|v| (v - mean_low).powi(2)).sum::<f64>() / (r - 1.0);
    let sigma2_low = ldp::asymptotic_variance(beta_low, n_group, &iv).unwrap();
    let var_low_scaled = var_low * n_obs as f64;
    println!(
        "criterion 7 (beta=2): n*var = {var_low_scaled:.5} vs theoretical {sigma2_low:.5}, \
         pseudo-true {bt_low:.6}"
    );
    assert!(
        (var_low_scaled / sigma2_low - 1.0).abs() <= 0.15,
        "criterion 7 FAIL: low-temperature variance off by {:.1}%",
        100.0 * (var_low_scaled / sigma2_low - 1.0).abs()
    );
    println!("criterion 7: PASS");
}

/// Criterion 8: the pseudo-true coupling approaches the true one
/// monotonically along N in {100, 1000, 10000} and lands within 0.01 at
/// N = 10000, for beta in {0.5, 2}.
#[test]
fn criterion_08_pseudo_true_convergence() {
    let constants = *ErrorConstants::default_calibrated();
    for &beta in &[0.5, 2.0] {
        let mut prev = f64::INFINITY;
        for &n in &[100u64, 1000, 10_000] {
            let iv = build_intervals(0.8, 1.25, n, constants).unwrap();
            let bt = estimator::pseudo_true_beta(beta, n, &iv).unwrap();
            let gap = (bt - beta).abs();
            println!("criterion 8: beta={beta} N={n} |pseudo-true - beta| = {gap:.6}");
            assert!(gap < prev, "criterion 8 FAIL: gap not decreasing at N={n}");
            prev = gap;
        }
        assert!(prev < 0.01, "criterion 8 FAIL: gap {prev:.4} at N=10000");
    }
    println!("criterion 8: PASS");
}

/// Criterion 9: exact/asymptotic weight ratio within 2% at N = 1e4 for
/// beta in {0.5, 2}; low-temperature dominance and the vanishing
/// high-temperature share along N in {1e3..1e6}; closed-form democracy
/// deficit matches Monte Carlo within 5 SE at 1e5 draws.
#[test]
fn criterion_09_optimal_weights() {
    for &beta in &[0.5, 2.0] {
        let spec = ModelSpec::single(10_000, beta).unwrap();
        let exact = weights::optimal_weights_exact(&spec).unwrap().weights()[0];
        let asym = weights::optimal_weights_asymptotic(&spec).unwrap().weights()[0];
        let ratio = exact / asym;
        println!("criterion 9: beta={beta} exact/asymptotic = {ratio:.6}");
        assert!(
            (ratio - 1.0).abs() <= 0.02,
            "criterion 9 FAIL: ratio {ratio:.4} at beta={beta}"
        );
    }

    // dominance and vanishing share on the two-group matrix
    let mut prev_share = 1.0;
    for &n in &[1_000u64, 10_000, 100_000, 1_000_000] {
        let spec = ModelSpec::new(vec![n, n], vec![0.5, 2.0]).unwrap();
        let w = weights::optimal_weights_asymptotic(&spec).unwrap();
        let (hi_t, lo_t) = (w.weights()[0], w.weights()[1]);
        assert!(
            hi_t < lo_t,
            "criterion 9 FAIL: no dominance at N={n} ({hi_t} vs {lo_t})"
        );
        let share = hi_t / (hi_t + lo_t);
        assert!(share < prev_share, "criterion 9 FAIL: share not vanishing at N={n}");
        prev_share = share;
    }
    println!("criterion 9: high-temperature share at N=1e6: {prev_share:.3e}");

    // Monte Carlo deficit agreement
    let spec = ModelSpec::new(vec![50, 75], vec![0.5, 2.0]).unwrap();
    let w = weights::optimal_weights_exact(&spec).unwrap();
    let closed = weights::democracy_deficit(&spec, w.weights()).unwrap();
    let draws = 100_000usize;
    let sample = model::sample(&spec, draws, 0xDEF1C17).unwrap();
    let gaps: Vec<f64> = sample
        .margins()
        .par_iter()
        .map(|row| {
            let o = weights::council_outcome(row, w.weights()).unwrap();
            let gap = o.popular_margin as f64 - o.weighted_vote;
            gap * gap
        })
        .collect();
    let mc = gaps.iter().sum::<f64>() / draws as f64;
    let var = gaps.iter().map(|g| (g - mc).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
    let se = (var / draws as f64).sqrt();
    println!("criterion 9: deficit closed-form {closed:.4} vs MC {mc:.4} (5 SE = {:.4})", 5.0 * se);
    assert!(
        (mc - closed).abs() <= 5.0 * se,
        "criterion 9 FAIL: deficit gap {:.4} exceeds {:.4}",
        (mc - closed).abs(),
        5.0 * se
    );
    println!("criterion 9: PASS");
}

/// Exact law of the n-fold sum of S^2 values (integer support), for tiny
/// groups: the ground truth for the Chernoff check.
fn sum_of_squared_margins_tail(beta: f64, n_group: u64, n_fold: usize, threshold: f64) -> f64 {
    let dist = model::magnetization_distribution(beta, n_group).unwrap();
    let mut base: HashMap<i64, f64> = HashMap::new();
    for s in dist.support() {
        *base.entry(s * s).or_insert(0.0) += dist.prob(s);
    }
    let mut acc = base.clone();
    for _ in 1..n_fold {
        let mut next: HashMap<i64, f64> = HashMap::new();
        for (&a, &pa) in &acc {
            for (&b, &pb) in &base {
                *next.entry(a + b).or_insert(0.0) += pa * pb;
            }
        }
        acc = next;
    }
    acc.iter()
        .filter(|(&sum, _)| sum as f64 >= threshold)
        .map(|(_, &p)| p)
        .sum()
}

/// Criterion 10: for N <= 12 and n <= 4, the exact tail P(T >= a) never
/// exceeds exp(-n L*(a)) for a above the mean, across a 20-point grid.
#[test]
fn criterion_10_chernoff_tail_validity() {
    let mut worst_margin = f64::NEG_INFINITY;
    for &beta in &[0.5, 2.0] {
        for &n_group in &[5u64, 12] {
            let law = DiscreteLaw::squared_margin(beta, n_group).unwrap();
            let mean = law.mean();
            let max = (n_group * n_group) as f64;
            for n_fold in 1..=4usize {
                for j in 1..=20 {
                    let a = mean + (max - mean) * j as f64 / 21.0;
                    let tail = sum_of_squared_margins_tail(beta, n_group, n_fold, a * n_fold as f64);
                    let bound = (-(n_fold as f64) * law.legendre(a)).exp();
                    worst_margin = worst_margin.max(tail - bound);
                    assert!(
                        tail <= bound * (1.0 + 1e-9) + 1e-300,
                        "criterion 10 FAIL: beta={beta} N={n_group} n={n_fold} a={a}: \
                         tail {tail:.3e} > bound {bound:.3e}"
                    );
                }
            }
        }
    }
    println!("criterion 10: PASS (max tail-bound margin {worst_margin:.3e})");
}
