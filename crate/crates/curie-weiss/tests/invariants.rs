//! Monte Carlo invariants that sit between the per-module unit tests and
//! the acceptance suite: estimator concentration across sample sizes, the
//! CLT of the statistic, coverage at a second sample size, the method-of-
//! moments limits, and the full study harness across every target.

use rayon::prelude::*;

use curie_weiss::estimator::{self, Estimate};
use curie_weiss::ldp;
use curie_weiss::model::{self, ModelSpec};
use curie_weiss::regimes::{build_intervals, ErrorConstants};
use curie_weiss::study::{run_study, StudyConfig, StudyTarget};

fn rep_seed(base: u64, rep: usize) -> u64 {
    base ^ (rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn median_abs_deviation(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = values[values.len() / 2];
    let mut devs: Vec<f64> = values.iter().map(|v| (v - median).abs()).collect();
    devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    devs[devs.len() / 2]
}

/// The estimator concentrates at the pseudo-true coupling as the sample
/// grows through {1e2, 1e3, 1e4}; the spread shrinks by about sqrt(10) per
/// step.
#[test]
fn estimator_concentration_scales_with_sample_size() {
    let n_group = 200u64;
    let beta = 0.5;
    let replications = 1000usize;
    let iv = build_intervals(0.8, 1.25, n_group, *ErrorConstants::default_calibrated()).unwrap();
    let bt = estimator::pseudo_true_beta(beta, n_group, &iv).unwrap();
    let spec = ModelSpec::single(n_group, beta).unwrap();

    let mut mads = Vec::new();
    for (si, &n_obs) in [100usize, 1000, 10_000].iter().enumerate() {
        let mut values: Vec<f64> = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let s = model::sample(&spec, n_obs, rep_seed(0x11AD + si as u64, rep)).unwrap();
                let t = estimator::statistic_t(&s)[0];
                estimator::estimate_beta_inf(t, &iv).value().unwrap()
            })
            .collect();
        let median = {
            let mut v = values.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        assert!(
            (median - bt).abs() < 0.05,
            "median {median} far from pseudo-true {bt} at n={n_obs}"
        );
        mads.push(median_abs_deviation(&mut values));
    }
    for w in mads.windows(2) {
        let ratio = w[0] / w[1];
        assert!(
            (2.2..=4.5).contains(&ratio),
            "spread ratio {ratio:.2} not compatible with sqrt(10) per decade: {mads:?}"
        );
    }
}

/// Standardized statistic sqrt(n)(T - E S^2)/sd(S^2) passes a normal moment
/// test at n = 1e4 over 1e4 replications.
#[test]
fn statistic_standardized_moments_look_normal() {
    let n_group = 200u64;
    let beta = 0.5;
    let n_obs = 10_000usize;
    let replications = 10_000usize;
    let spec = ModelSpec::single(n_group, beta).unwrap();
    let mean_ref = model::exact_moment(beta, n_group, 2).unwrap();
    let sd_ref = model::variance_s2(beta, n_group).unwrap().sqrt();
    let scale = (n_obs as f64).sqrt() / sd_ref;

    let z: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let s = model::sample(&spec, n_obs, rep_seed(0xC17, rep)).unwrap();
            (estimator::statistic_t(&s)[0] - mean_ref) * scale
        })
        .collect();
    let r = replications as f64;
    let mean = z.iter().sum::<f64>() / r;
    let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r;
    let sd = var.sqrt();
    let skew = z.iter().map(|x| ((x - mean) / sd).powi(3)).sum::<f64>() / r;
    let kurt = z.iter().map(|x| ((x - mean) / sd).powi(4)).sum::<f64>() / r - 3.0;
    assert!(mean.abs() < 5.0 / r.sqrt(), "standardized mean {mean}");
    assert!((var - 1.0).abs() < 0.05, "standardized variance {var}");
    assert!(skew.abs() < 0.1, "skewness {skew}");
    assert!(kurt.abs() < 0.2, "excess kurtosis {kurt}");
}

/// Coverage at the sample size used by the interval examples (n = 2000).
#[test]
fn coverage_at_moderate_sample_size() {
    let n_group = 500u64;
    let beta = 0.5;
    let n_obs = 2000usize;
    let replications = 2000usize;
    let iv = build_intervals(0.8, 1.25, n_group, *ErrorConstants::default_calibrated()).unwrap();
    let bt = estimator::pseudo_true_beta(beta, n_group, &iv).unwrap();
    let spec = ModelSpec::single(n_group, beta).unwrap();
    let covered: usize = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let s = model::sample(&spec, n_obs, rep_seed(0xC0F, rep)).unwrap();
            let t = estimator::statistic_t(&s)[0];
            let e = estimator::estimate_beta_inf(t, &iv);
            let (lo, hi) = ldp::confidence_interval(e, n_obs, n_group, 0.95).unwrap();
            (lo <= bt && bt <= hi) as usize
        })
        .sum();
    let coverage = covered as f64 / replications as f64;
    assert!(
        (0.93..=0.97).contains(&coverage),
        "coverage {coverage} outside [0.93, 0.97]"
    );
}

/// Misidentification frequency at one sample size stays under the Chernoff
/// bound with binomial slack (companion to the acceptance criterion, at a
/// group size where the event is actually observable).
#[test]
fn misidentification_frequency_under_bound_small_group() {
    let n_group = 150u64;
    let beta = 0.5;
    let n_obs = 20usize;
    let replications = 10_000usize;
    let iv = build_intervals(0.8, 1.25, n_group, *ErrorConstants::default_calibrated()).unwrap();
    let eta = ldp::regime_misid_bound(&iv, beta).unwrap();
    let spec = ModelSpec::single(n_group, beta).unwrap();
    let bad: usize = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let s = model::sample(&spec, n_obs, rep_seed(0x3111, rep)).unwrap();
            let t = estimator::statistic_t(&s)[0];
            matches!(
                estimator::estimate_beta_inf(t, &iv),
                Estimate::LowTemp(_) | Estimate::Inconclusive
            ) as usize
        })
        .sum();
    let frequency = bad as f64 / replications as f64;
    let bound = (-eta * n_obs as f64).exp();
    let slack = 3.0 * (frequency * (1.0 - frequency) / replications as f64).sqrt();
    assert!(
        frequency <= bound + slack,
        "frequency {frequency:.3e} > bound {bound:.3e} + {slack:.3e}"
    );
}

/// Empirical moments of the rescaled margin converge to the limiting
/// normal moments (2k-1)!!/(1-beta)^k for k = 1, 2, staying within a
/// 5-SE band of the exact finite-N moments along the way.
#[test]
fn method_of_moments_limits() {
    let beta = 0.5;
    let draws = 100_000usize;
    let limits = [2.0, 12.0]; // (2k-1)!!/(1-beta)^k for k=1,2
    let mut prev_gap = [f64::INFINITY; 2];
    for (si, &n_group) in [100u64, 1000, 10_000].iter().enumerate() {
        let spec = ModelSpec::single(n_group, beta).unwrap();
        let sample = model::sample(&spec, draws, rep_seed(0x101, si)).unwrap();
        let nf = n_group as f64;
        for (ki, &k) in [2u32, 4].iter().enumerate() {
            let rescaled: Vec<f64> = sample
                .margins()
                .iter()
                .map(|r| (r[0] as f64 / nf.sqrt()).powi(k as i32))
                .collect();
            let emp = rescaled.iter().sum::<f64>() / draws as f64;
            let exact = model::exact_moment(beta, n_group, k).unwrap() / nf.powi(k as i32 / 2);
            let var = rescaled.iter().map(|x| (x - emp).powi(2)).sum::<f64>()
                / (draws as f64 - 1.0);
            let se = (var / draws as f64).sqrt();
            assert!(
                (emp - exact).abs() <= 5.0 * se,
                "k={k} N={n_group}: empirical {emp} vs exact {exact} (5 SE = {})",
                5.0 * se
            );
            let gap = (exact - limits[ki]).abs();
            assert!(
                gap < prev_gap[ki],
                "k={k}: exact moment not converging to the limit at N={n_group}"
            );
            prev_gap[ki] = gap;
        }
    }
    assert!(prev_gap[0] < 0.01 && prev_gap[1] < 0.2, "gaps {prev_gap:?}");
}

/// Atypical estimates (negative or infinite) occur no more often than the
/// 2 exp(-theta n) bound allows. A small group makes the event observable.
#[test]
fn atypical_estimate_bound_validated_by_monte_carlo() {
    let n_group = 10u64;
    let beta = 0.5;
    let replications = 20_000usize;
    let theta = ldp::atypical_estimate_bound(beta, n_group).unwrap();
    let spec = ModelSpec::single(n_group, beta).unwrap();
    let n = n_group as f64;
    for (si, &n_obs) in [5usize, 20].iter().enumerate() {
        let atypical: usize = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let s = model::sample(&spec, n_obs, rep_seed(0xA717 + si as u64, rep)).unwrap();
                let t = estimator::statistic_t(&s)[0];
                // negative estimate iff T < N, infinite iff T = N^2
                (t < n || t >= n * n) as usize
            })
            .sum();
        let frequency = atypical as f64 / replications as f64;
        let bound = 2.0 * (-theta * n_obs as f64).exp();
        let slack = 3.0 * (frequency * (1.0 - frequency) / replications as f64).sqrt();
        assert!(
            frequency <= bound + slack,
            "n={n_obs}: atypical frequency {frequency:.4} > 2 exp(-theta n) = {bound:.4}"
        );
        // the event does occur at this scale, so the bound is actually exercised
        if n_obs == 5 {
            assert!(frequency > 0.0, "event never observed; test is vacuous");
        }
    }
}

/// The planned sample size really delivers the requested error probability:
/// simulate at the worst-case boundary coupling and compare the observed
/// misidentification frequency against epsilon.
#[test]
fn planned_sample_size_validated_by_monte_carlo() {
    let n_group = 500u64;
    let epsilon = 1e-3;
    let replications = 10_000usize;
    let iv = build_intervals(0.8, 1.25, n_group, *ErrorConstants::default_calibrated()).unwrap();
    let n_star = ldp::plan_sample_size(&iv, epsilon).unwrap() as usize;

    // worst case within the high-temperature regime is the boundary b1
    let spec = ModelSpec::single(n_group, 0.8).unwrap();
    let bad: usize = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let s = model::sample(&spec, n_star, rep_seed(0x91A4, rep)).unwrap();
            let t = estimator::statistic_t(&s)[0];
            matches!(estimator::estimate_beta_inf(t, &iv), Estimate::LowTemp(_)) as usize
        })
        .sum();
    let frequency = bad as f64 / replications as f64;
    let slack = 3.0 * (epsilon * (1.0 - epsilon) / replications as f64).sqrt();
    assert!(
        frequency < epsilon + slack,
        "planned n={n_star} misses epsilon={epsilon}: frequency {frequency}"
    );
}

/// The full study harness passes every target on a healthy two-group model.
#[test]
fn study_harness_all_targets_pass() {
    let spec = ModelSpec::new(vec![500, 500], vec![0.5, 2.0]).unwrap();
    let cfg = StudyConfig {
        replications: 800,
        sample_sizes: vec![500],
        seed: 2024,
        ..StudyConfig::new(
            spec,
            vec![
                StudyTarget::Consistency,
                StudyTarget::Coverage,
                StudyTarget::Misid,
                StudyTarget::Clt,
                StudyTarget::Tails,
            ],
        )
    };
    let report = run_study(&cfg).unwrap();
    for r in &report.results {
        assert!(
            r.pass,
            "target {:?} failed for group {} (n={}): {:?}",
            r.target, r.group, r.sample_size, r.metrics
        );
    }
    assert!(report.all_pass);
}
