//! Reproducible Monte Carlo studies: simulate, estimate, and compare the
//! empirical behaviour of the estimators against their theoretical targets
//! (pseudo-true values, limiting variances, coverage, misidentification
//! bounds, and tail rates). Replications run in parallel on deterministic
//! per-replication substreams, so a seed pins the whole report.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{self, Estimate};
use crate::ldp;
use crate::model::{self, ModelSpec};
use crate::regimes::{build_intervals, ErrorConstants, RegimeIntervals, RegimeLabel};

/// What a study should check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyTarget {
    /// Median of the estimates concentrates at the pseudo-true coupling.
    Consistency,
    /// Confidence intervals cover the pseudo-true coupling at nominal rate.
    Coverage,
    /// Wrong-regime and inconclusive labels stay under the Chernoff bound.
    Misid,
    /// Standardized estimates pass a normal moment test.
    Clt,
    /// Upper-tail frequencies respect the large-deviations rate.
    Tails,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub spec: ModelSpec,
    pub b1: f64,
    pub b2: f64,
    pub constants: ErrorConstants,
    pub replications: usize,
    pub sample_sizes: Vec<usize>,
    pub seed: u64,
    pub targets: Vec<StudyTarget>,
    pub confidence_level: f64,
    /// Allowed deviation of empirical coverage from the nominal level.
    pub coverage_band: f64,
}

impl StudyConfig {
    pub fn new(spec: ModelSpec, targets: Vec<StudyTarget>) -> Self {
        StudyConfig {
            spec,
            b1: crate::regimes::DEFAULT_B1,
            b2: crate::regimes::DEFAULT_B2,
            constants: *ErrorConstants::default_calibrated(),
            replications: 2000,
            sample_sizes: vec![100, 1000],
            seed: 0,
            targets,
            confidence_level: 0.95,
            coverage_band: 0.02,
        }
    }
}

/// Numbers backing one target check.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetMetrics {
    Consistency {
        pseudo_true: f64,
        mean: f64,
        median: f64,
        median_abs_deviation: f64,
        interquartile_range: f64,
        conclusive_fraction: f64,
        tolerance: f64,
    },
    Coverage {
        coverage: f64,
        level: f64,
        band: f64,
    },
    Misid {
        frequency: f64,
        chernoff_bound: f64,
        eta: f64,
        three_se: f64,
    },
    Clt {
        reference_variance: f64,
        standardized_mean: f64,
        standardized_variance: f64,
        skewness: f64,
        excess_kurtosis: f64,
    },
    Tails {
        delta: f64,
        rate_at_threshold: f64,
        frequency: f64,
        chernoff_bound: f64,
        empirical_rate: Option<f64>,
        three_se: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetResult {
    pub target: StudyTarget,
    pub group: usize,
    pub group_size: u64,
    pub true_coupling: f64,
    pub sample_size: usize,
    pub pass: bool,
    pub metrics: TargetMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub seed: u64,
    pub replications: usize,
    pub results: Vec<TargetResult>,
    pub all_pass: bool,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one (sample-size, replication) cell, independent of scheduling.
fn replication_seed(base: u64, size_index: usize, replication: usize) -> u64 {
    splitmix64(splitmix64(base ^ ((size_index as u64) << 40)) ^ replication as u64)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Run every configured target for every group and sample size.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    if config.replications == 0 {
        return Err(Error::invalid("study needs at least one replication"));
    }
    if config.sample_sizes.is_empty() {
        return Err(Error::invalid("study needs at least one sample size"));
    }
    let groups = config.spec.num_groups();
    let intervals: Vec<RegimeIntervals> = config
        .spec
        .group_sizes()
        .iter()
        .map(|&n| build_intervals(config.b1, config.b2, n, config.constants))
        .collect::<Result<_>>()?;
    let pseudo_true: Vec<f64> = config
        .spec
        .couplings()
        .iter()
        .zip(config.spec.group_sizes())
        .zip(&intervals)
        .map(|((&beta, &n), iv)| estimator::pseudo_true_beta(beta, n, iv))
        .collect::<Result<_>>()?;

    let mut results = Vec::new();
    for (si, &n_obs) in config.sample_sizes.iter().enumerate() {
        // per replication, per group
        let estimates: Vec<Vec<Estimate>> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(config.seed, si, rep);
                let sample = model::sample(&config.spec, n_obs, seed)?;
                let t = estimator::statistic_t(&sample);
                Ok(t.iter()
                    .zip(&intervals)
                    .map(|(&t_g, iv)| estimator::estimate_beta_inf(t_g, iv))
                    .collect())
            })
            .collect::<Result<_>>()?;

        for g in 0..groups {
            let beta = config.spec.couplings()[g];
            let size = config.spec.group_sizes()[g];
            let iv = &intervals[g];
            let bt = pseudo_true[g];
            let per_group: Vec<Estimate> = estimates.iter().map(|row| row[g]).collect();
            for &target in &config.targets {
                let (pass, metrics) = match target {
                    StudyTarget::Consistency => check_consistency(&per_group, bt),
                    StudyTarget::Coverage => check_coverage(&per_group, bt, n_obs, size, config),
                    StudyTarget::Misid => check_misid(&per_group, beta, iv, n_obs)?,
                    StudyTarget::Clt => check_clt(&per_group, beta, bt, size, iv, n_obs)?,
                    StudyTarget::Tails => check_tails(&per_group, beta, bt, iv, n_obs)?,
                };
                results.push(TargetResult {
                    target,
                    group: g,
                    group_size: size,
                    true_coupling: beta,
                    sample_size: n_obs,
                    pass,
                    metrics,
                });
            }
        }
    }
    Ok(StudyReport {
        schema_version: estimator::REPORT_SCHEMA_VERSION,
        seed: config.seed,
        replications: config.replications,
        all_pass: results.iter().all(|r| r.pass),
        results,
    })
}

fn finite_values(estimates: &[Estimate]) -> Vec<f64> {
    estimates
        .iter()
        .filter_map(|e| e.value())
        .filter(|v| v.is_finite())
        .collect()
}

fn check_consistency(estimates: &[Estimate], pseudo_true: f64) -> (bool, TargetMetrics) {
    let mut values = finite_values(estimates);
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let conclusive_fraction = values.len() as f64 / estimates.len() as f64;
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let median = quantile(&values, 0.5);
    let iqr = quantile(&values, 0.75) - quantile(&values, 0.25);
    let mut deviations: Vec<f64> = values.iter().map(|v| (v - median).abs()).collect();
    deviations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mad = quantile(&deviations, 0.5);
    let tolerance = 3.0 * iqr / (values.len().max(1) as f64).sqrt();
    let pass = !values.is_empty() && (median - pseudo_true).abs() <= tolerance;
    (
        pass,
        TargetMetrics::Consistency {
            pseudo_true,
            mean,
            median,
            median_abs_deviation: mad,
            interquartile_range: iqr,
            conclusive_fraction,
            tolerance,
        },
    )
}

fn check_coverage(
    estimates: &[Estimate],
    pseudo_true: f64,
    n_obs: usize,
    group_size: u64,
    config: &StudyConfig,
) -> (bool, TargetMetrics) {
    let level = config.confidence_level;
    let (covered, usable) = estimates
        .par_iter()
        .map(|&e| {
            match ldp::confidence_interval(e, n_obs, group_size, level) {
                Ok((lo, hi)) => ((lo <= pseudo_true && pseudo_true <= hi) as u64, 1u64),
                Err(_) => (0, 0),
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let coverage = if usable > 0 {
        covered as f64 / usable as f64
    } else {
        f64::NAN
    };
    let pass = usable > 0 && (coverage - level).abs() <= config.coverage_band;
    (
        pass,
        TargetMetrics::Coverage {
            coverage,
            level,
            band: config.coverage_band,
        },
    )
}

fn check_misid(
    estimates: &[Estimate],
    beta: f64,
    intervals: &RegimeIntervals,
    n_obs: usize,
) -> Result<(bool, TargetMetrics)> {
    let truth = intervals.classify_coupling(beta)?;
    let bad = estimates
        .iter()
        .filter(|e| {
            matches!(
                (truth, e.regime()),
                (RegimeLabel::HighTemp, Some(RegimeLabel::LowTemp))
                    | (RegimeLabel::LowTemp, Some(RegimeLabel::HighTemp))
                    | (_, None)
            )
        })
        .count();
    let r = estimates.len() as f64;
    let frequency = bad as f64 / r;
    let eta = ldp::regime_misid_bound(intervals, beta)?;
    let chernoff_bound = (-eta * n_obs as f64).exp();
    let three_se = 3.0 * (frequency * (1.0 - frequency) / r).sqrt();
    let pass = frequency <= chernoff_bound + three_se;
    Ok((
        pass,
        TargetMetrics::Misid {
            frequency,
            chernoff_bound,
            eta,
            three_se,
        },
    ))
}

fn check_clt(
    estimates: &[Estimate],
    beta: f64,
    pseudo_true: f64,
    group_size: u64,
    intervals: &RegimeIntervals,
    n_obs: usize,
) -> Result<(bool, TargetMetrics)> {
    let sigma2 = ldp::asymptotic_variance(beta, group_size, intervals)?;
    let scale = (n_obs as f64 / sigma2).sqrt();
    let z: Vec<f64> = finite_values(estimates)
        .into_iter()
        .map(|v| (v - pseudo_true) * scale)
        .collect();
    let r = z.len() as f64;
    let mean = z.iter().sum::<f64>() / r;
    let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r;
    let sd = var.sqrt();
    let skew = z.iter().map(|x| ((x - mean) / sd).powi(3)).sum::<f64>() / r;
    let kurt = z.iter().map(|x| ((x - mean) / sd).powi(4)).sum::<f64>() / r - 3.0;
    let pass = mean.abs() <= 5.0 / r.sqrt()
        && (var - 1.0).abs() <= 0.15
        && skew.abs() <= 0.1 + 3.0 * (6.0 / r).sqrt()
        && kurt.abs() <= 0.2 + 3.0 * (24.0 / r).sqrt();
    Ok((
        pass,
        TargetMetrics::Clt {
            reference_variance: sigma2,
            standardized_mean: mean,
            standardized_variance: var,
            skewness: skew,
            excess_kurtosis: kurt,
        },
    ))
}

fn check_tails(
    estimates: &[Estimate],
    beta: f64,
    pseudo_true: f64,
    intervals: &RegimeIntervals,
    n_obs: usize,
) -> Result<(bool, TargetMetrics)> {
    // pick the threshold so the event has rate about 4/n: observable with
    // thousands of replications, yet still a genuine tail
    let sigma2 = ldp::asymptotic_variance(beta, intervals.group_size(), intervals)?;
    let mut delta = (sigma2 / n_obs as f64).sqrt();
    let target_rate = 4.0 / n_obs as f64;
    let mut rate = 0.0;
    for _ in 0..200 {
        let b = pseudo_true + delta;
        match intervals.theta_inf(b) {
            Ok(_) => {
                rate = ldp::estimator_rate(intervals, beta, b)?;
                if rate >= target_rate {
                    break;
                }
                delta *= 1.25;
            }
            // crossed into the gap: keep the last in-domain threshold
            Err(_) => {
                delta /= 1.25;
                rate = ldp::estimator_rate(intervals, beta, pseudo_true + delta)?;
                break;
            }
        }
    }
    let threshold = pseudo_true + delta;
    let hits = estimates
        .iter()
        .filter_map(|e| e.value())
        .filter(|&v| v >= threshold)
        .count();
    let r = estimates.len() as f64;
    let frequency = hits as f64 / r;
    let chernoff_bound = (-rate * n_obs as f64).exp();
    let three_se = 3.0 * (frequency * (1.0 - frequency) / r).sqrt();
    let empirical_rate = if hits > 0 {
        Some(-frequency.ln() / n_obs as f64)
    } else {
        None
    };
    let pass = frequency <= chernoff_bound + three_se;
    Ok((
        pass,
        TargetMetrics::Tails {
            delta,
            rate_at_threshold: rate,
            frequency,
            chernoff_bound,
            empirical_rate,
            three_se,
        },
    ))
}
