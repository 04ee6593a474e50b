//! Implementations of the six subcommands.

use std::path::{Path, PathBuf};

use serde::Serialize;

use curie_weiss::estimator::{self, ReportOptions, WeightEstimate};
use curie_weiss::model::{self, ModelSpec};
use curie_weiss::regimes::{self, build_intervals};
use curie_weiss::study::{run_study, StudyConfig, StudyReport, StudyTarget};
use curie_weiss::{ldp, oracle, weights as w, Error};

use crate::config::{
    ConstantsFile, ConstantsGrid, ResolvedIntervals, RunConfig,
};
use crate::{io, CliError};

const SCHEMA_VERSION: u32 = 1;

fn require_model(cfg: &RunConfig) -> Result<(&[u64], Option<&[f64]>), CliError> {
    let model = cfg
        .model
        .as_ref()
        .ok_or_else(|| CliError::input("config must provide a `model` section"))?;
    Ok((
        &model.group_sizes,
        model.couplings.as_deref(),
    ))
}

fn model_spec(cfg: &RunConfig) -> Result<ModelSpec, CliError> {
    let (sizes, couplings) = require_model(cfg)?;
    let couplings = couplings
        .ok_or_else(|| CliError::input("this command needs `model.couplings` in the config"))?;
    ModelSpec::new(sizes.to_vec(), couplings.to_vec()).map_err(CliError::Lib)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::input(format!("serialize: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::input(format!("write {}: {e}", path.display())))
}

pub fn simulate(
    cfg: &RunConfig,
    out_dir: &Path,
    seed: u64,
    n_flag: Option<usize>,
    spins: bool,
) -> Result<u8, CliError> {
    let spec = model_spec(cfg)?;
    let n = n_flag
        .or(cfg.n)
        .ok_or_else(|| CliError::input("simulate needs --n or `n` in the config"))?;
    if n == 0 {
        return Err(CliError::input("simulate needs n >= 1"));
    }
    let want_spins = spins || cfg.spins.unwrap_or(false);

    let margins_path = out_dir.join("margins.csv");
    if want_spins {
        let (sample, spin_data) = model::sample_with_spins(&spec, n, seed)?;
        io::write_margins(&margins_path, &sample)?;
        let spins_path = out_dir.join("spins.csv");
        io::write_spins(&spins_path, &spin_data)?;
        println!("wrote {} and {}", margins_path.display(), spins_path.display());
    } else {
        let sample = model::sample(&spec, n, seed)?;
        io::write_margins(&margins_path, &sample)?;
        println!("wrote {}", margins_path.display());
    }
    for (g, (&size, &beta)) in spec
        .group_sizes()
        .iter()
        .zip(spec.couplings())
        .enumerate()
    {
        let e2 = model::exact_moment(beta, size, 2)?;
        println!("group {g}: N={size} beta={beta} exact E S^2 = {e2:.6}");
    }
    Ok(0)
}

pub fn estimate(
    cfg: &RunConfig,
    resolved: &ResolvedIntervals,
    out_dir: &Path,
    data_flag: Option<PathBuf>,
    exact_mle_flag: bool,
    level_flag: Option<f64>,
) -> Result<u8, CliError> {
    let (sizes, couplings) = require_model(cfg)?;
    let data = data_flag
        .or_else(|| cfg.data.clone())
        .ok_or_else(|| CliError::input("estimate needs --data or `data` in the config"))?;
    let sample = io::read_sample(&data, sizes)?;
    let options = ReportOptions {
        include_exact_mle: exact_mle_flag || cfg.exact_mle.unwrap_or(false),
        confidence_level: Some(level_flag.or(cfg.confidence_level).unwrap_or(0.95)),
        true_couplings: couplings.map(|c| c.to_vec()),
        include_misid_bounds: true,
    };
    let report = estimator::build_report(
        &sample,
        resolved.b1,
        resolved.b2,
        resolved.constants,
        &resolved.source,
        &options,
    )?;
    write_json(&out_dir.join("estimate.json"), &report)?;
    for g in &report.groups {
        let estimate = match g.estimate.value() {
            Some(v) => format!("{v:.6}"),
            None => "u (inconclusive)".to_string(),
        };
        let ci = match g.confidence_interval {
            Some((lo, hi)) => format!(" ci=[{lo:.6}, {hi:.6}]"),
            None => String::new(),
        };
        println!(
            "group {}: N={} T={:.4} beta_hat={estimate}{ci}",
            g.group, g.group_size, g.statistic_t
        );
    }
    println!("report: {}", out_dir.join("estimate.json").display());
    Ok(if report.any_inconclusive { 2 } else { 0 })
}

#[derive(Serialize)]
struct PlanGroup {
    group: usize,
    group_size: u64,
    eta_into_low: f64,
    eta_into_high: f64,
    required_n: u64,
}

#[derive(Serialize)]
struct PlanReport {
    schema_version: u32,
    epsilon: f64,
    b1: f64,
    b2: f64,
    groups: Vec<PlanGroup>,
    required_n: u64,
}

pub fn plan(
    cfg: &RunConfig,
    resolved: &ResolvedIntervals,
    out_dir: &Path,
    epsilon_flag: Option<f64>,
) -> Result<u8, CliError> {
    let (sizes, _) = require_model(cfg)?;
    let epsilon = epsilon_flag
        .or(cfg.epsilon)
        .ok_or_else(|| CliError::input("plan needs --epsilon or `epsilon` in the config"))?;
    let mut groups = Vec::new();
    let mut required = 1u64;
    for (g, &size) in sizes.iter().enumerate() {
        let iv = build_intervals(resolved.b1, resolved.b2, size, resolved.constants)?;
        let (eta_into_low, eta_into_high) = ldp::worst_case_misid_bounds(&iv)?;
        let n = ldp::plan_sample_size(&iv, epsilon)?;
        required = required.max(n);
        groups.push(PlanGroup {
            group: g,
            group_size: size,
            eta_into_low,
            eta_into_high,
            required_n: n,
        });
    }
    let report = PlanReport {
        schema_version: SCHEMA_VERSION,
        epsilon,
        b1: resolved.b1,
        b2: resolved.b2,
        groups,
        required_n: required,
    };
    write_json(&out_dir.join("plan.json"), &report)?;
    println!("required sample size: n = {required} (epsilon = {epsilon})");
    Ok(0)
}

#[derive(Serialize)]
struct WeightedVectorReport {
    provenance: String,
    weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    democracy_deficit: Option<f64>,
}

#[derive(Serialize)]
struct EstimatedWeightsReport {
    statistic_t: Vec<f64>,
    estimates: Vec<estimator::Estimate>,
    weights: Vec<WeightEstimate>,
}

#[derive(Serialize)]
struct WeightsReport {
    schema_version: u32,
    group_sizes: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    couplings: Option<Vec<f64>>,
    vectors: Vec<WeightedVectorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimated: Option<EstimatedWeightsReport>,
}

pub fn weights(
    cfg: &RunConfig,
    resolved: &ResolvedIntervals,
    out_dir: &Path,
    data_flag: Option<PathBuf>,
) -> Result<u8, CliError> {
    let (sizes, couplings) = require_model(cfg)?;
    let data = data_flag.or_else(|| cfg.data.clone());
    if couplings.is_none() && data.is_none() {
        return Err(CliError::input(
            "weights needs `model.couplings` (known model) or --data (estimated)",
        ));
    }

    let mut vectors = Vec::new();
    if let Some(betas) = couplings {
        let spec = ModelSpec::new(sizes.to_vec(), betas.to_vec()).map_err(CliError::Lib)?;
        let mut push = |v: w::WeightVector| -> Result<(), CliError> {
            let deficit = w::democracy_deficit(&spec, v.weights())?;
            vectors.push(WeightedVectorReport {
                provenance: provenance_name(v.provenance()),
                weights: v.weights().to_vec(),
                democracy_deficit: Some(deficit),
            });
            Ok(())
        };
        push(w::optimal_weights_exact(&spec)?)?;
        push(w::optimal_weights_asymptotic(&spec)?)?;
        push(w::deficit_minimizing_weights(&spec)?)?;
        for kind in [
            w::BaselineKind::Proportional,
            w::BaselineKind::SquareRoot,
            w::BaselineKind::Equal,
        ] {
            push(w::baseline_weights(&spec, kind)?)?;
        }
    }

    let mut any_inconclusive = false;
    let estimated = match data {
        Some(path) => {
            let sample = io::read_sample(&path, sizes)?;
            let t = estimator::statistic_t(&sample);
            let mut estimates = Vec::new();
            let mut west = Vec::new();
            for (&t_g, &size) in t.iter().zip(sizes) {
                let iv = build_intervals(resolved.b1, resolved.b2, size, resolved.constants)?;
                let e = estimator::estimate_beta_inf(t_g, &iv);
                let we = estimator::estimate_weight(t_g, &iv);
                any_inconclusive |= e.is_inconclusive();
                estimates.push(e);
                west.push(we);
            }
            Some(EstimatedWeightsReport {
                statistic_t: t,
                estimates,
                weights: west,
            })
        }
        None => None,
    };

    let report = WeightsReport {
        schema_version: SCHEMA_VERSION,
        group_sizes: sizes.to_vec(),
        couplings: couplings.map(|c| c.to_vec()),
        vectors,
        estimated,
    };
    write_json(&out_dir.join("weights.json"), &report)?;
    write_weights_csv(&out_dir.join("weights.csv"), &report)?;
    for v in &report.vectors {
        println!(
            "{}: weights={:?} deficit={:.6}",
            v.provenance,
            v.weights,
            v.democracy_deficit.unwrap_or(f64::NAN)
        );
    }
    if let Some(est) = &report.estimated {
        for (g, we) in est.weights.iter().enumerate() {
            match we.value() {
                Some(v) => println!("estimated: group {g} w_hat={v:.6}"),
                None => println!("estimated: group {g} w_hat=u (inconclusive)"),
            }
        }
    }
    println!("report: {}", out_dir.join("weights.json").display());
    Ok(if any_inconclusive { 2 } else { 0 })
}

fn provenance_name(p: w::Provenance) -> String {
    match p {
        w::Provenance::Exact => "exact".into(),
        w::Provenance::Asymptotic => "asymptotic".into(),
        w::Provenance::Estimated => "estimated".into(),
        w::Provenance::QuadraticMinimizer => "quadratic_minimizer".into(),
        w::Provenance::Baseline(w::BaselineKind::Proportional) => "baseline_proportional".into(),
        w::Provenance::Baseline(w::BaselineKind::SquareRoot) => "baseline_square_root".into(),
        w::Provenance::Baseline(w::BaselineKind::Equal) => "baseline_equal".into(),
    }
}

fn write_weights_csv(path: &Path, report: &WeightsReport) -> Result<(), CliError> {
    use std::io::Write;
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    let io_err = |e: std::io::Error| CliError::input(format!("write {}: {e}", path.display()));
    let mut header = String::from("group,group_size,coupling");
    for v in &report.vectors {
        header.push(',');
        header.push_str(&format!("w_{}", v.provenance));
    }
    if report.estimated.is_some() {
        header.push_str(",beta_hat,w_estimated");
    }
    writeln!(out, "{header}").map_err(io_err)?;
    for (g, &size) in report.group_sizes.iter().enumerate() {
        let coupling = report
            .couplings
            .as_ref()
            .map(|c| c[g].to_string())
            .unwrap_or_default();
        let mut row = format!("{g},{size},{coupling}");
        for v in &report.vectors {
            row.push(',');
            row.push_str(&v.weights[g].to_string());
        }
        if let Some(est) = &report.estimated {
            // f64 displays infinities as "inf"/"-inf", matching the JSON forms
            let beta = match est.estimates[g].value() {
                Some(v) => v.to_string(),
                None => "u".to_string(),
            };
            let weight = match est.weights[g].value() {
                Some(v) => v.to_string(),
                None => "u".to_string(),
            };
            row.push_str(&format!(",{beta},{weight}"));
        }
        writeln!(out, "{row}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn calibrate(
    cfg: &RunConfig,
    resolved: &ResolvedIntervals,
    out_dir: &Path,
) -> Result<u8, CliError> {
    let grid = cfg.calibration.clone();
    let betas_high = grid
        .as_ref()
        .and_then(|g| g.betas_high.clone())
        .unwrap_or_else(|| regimes::DEFAULT_CALIBRATION_BETAS_HIGH.to_vec());
    let betas_low = grid
        .as_ref()
        .and_then(|g| g.betas_low.clone())
        .unwrap_or_else(|| regimes::DEFAULT_CALIBRATION_BETAS_LOW.to_vec());
    let sizes = grid
        .as_ref()
        .and_then(|g| g.sizes.clone())
        .unwrap_or_else(regimes::default_calibration_sizes);
    let betas: Vec<f64> = betas_high.iter().chain(&betas_low).copied().collect();
    let constants = regimes::calibrate_constants(&betas, &sizes)?;
    let file = ConstantsFile {
        schema_version: SCHEMA_VERSION,
        b1: resolved.b1,
        b2: resolved.b2,
        d_high: constants.d_high,
        d_low: constants.d_low,
        grid: ConstantsGrid {
            betas_high,
            betas_low,
            sizes,
        },
    };
    let path = out_dir.join("constants.json");
    write_json(&path, &file)?;
    println!(
        "calibrated d_high={:.6} d_low={:.6} -> {}",
        constants.d_high,
        constants.d_low,
        path.display()
    );
    Ok(0)
}

#[derive(Serialize)]
struct VerifyCheck {
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct VerifyReport {
    schema_version: u32,
    profile: String,
    checks: Vec<VerifyCheck>,
    study: StudyReport,
    all_pass: bool,
}

pub fn verify(
    cfg: &RunConfig,
    resolved: &ResolvedIntervals,
    out_dir: &Path,
    seed: u64,
    full: bool,
) -> Result<u8, CliError> {
    let mut checks = Vec::new();

    // enumeration oracle vs exchangeability reduction
    {
        let mut worst: f64 = 0.0;
        for &beta in &[-1.0, 0.0, 0.5, 1.0, 1.5, 2.0] {
            for n in 2..=12u64 {
                let lz = model::log_partition(beta, n)?;
                let lz_brute = oracle::brute_force_log_partition(beta, n)?;
                worst = worst.max((lz - lz_brute).abs() / lz_brute.abs());
                for k in [2u32, 4] {
                    let m = model::exact_moment(beta, n, k)?;
                    let b = oracle::brute_force_moment(beta, n, k)?;
                    worst = worst.max((m - b).abs() / b.abs());
                }
            }
        }
        checks.push(VerifyCheck {
            name: "oracle_enumeration".into(),
            pass: worst <= 1e-10,
            detail: format!("worst relative error {worst:.3e} (tolerance 1e-10)"),
        });
    }

    // quadrature oracle vs exact pair correlation
    {
        let mut worst: f64 = 0.0;
        for &beta in &[0.5, 2.0] {
            for &n in &[10u64, 50] {
                let hs = oracle::hs_correlation(beta, n, 2)?;
                let exact = oracle::exact_pair_correlation(beta, n)?;
                worst = worst.max((hs - exact).abs());
            }
        }
        checks.push(VerifyCheck {
            name: "oracle_quadrature".into(),
            pass: worst <= 1e-8,
            detail: format!("worst absolute error {worst:.3e} (tolerance 1e-8)"),
        });
    }

    // moment envelopes under the active constants
    {
        let mut sizes: Vec<u64> = (2..=64).collect();
        sizes.extend([100, 200, 500, 1000, 2000]);
        let mut failures = 0usize;
        let mut worst_ratio: f64 = 0.0;
        for &beta in regimes::DEFAULT_CALIBRATION_BETAS_HIGH
            .iter()
            .chain(regimes::DEFAULT_CALIBRATION_BETAS_LOW)
        {
            for &n in &sizes {
                let nf = n as f64;
                let e2 = model::exact_moment(beta, n, 2)?;
                let env = regimes::moment_error_envelope(resolved.constants, beta, n, 1)?;
                let dev = if beta < 1.0 {
                    (e2 / nf - 1.0 / (1.0 - beta)).abs()
                } else {
                    let m = curie_weiss::cw::magnetization(beta)?;
                    (e2 / (nf * nf) - m * m).abs()
                };
                worst_ratio = worst_ratio.max(dev / env);
                if dev > env {
                    failures += 1;
                }
            }
        }
        checks.push(VerifyCheck {
            name: "moment_envelopes".into(),
            pass: failures == 0,
            detail: format!(
                "{failures} envelope violations; worst deviation/envelope ratio {worst_ratio:.3}"
            ),
        });
    }

    // separation of the active interval configuration at common sizes
    {
        let mut failing = Vec::new();
        for &n in &[500u64, 1000, 10_000] {
            if let Err(e) = build_intervals(resolved.b1, resolved.b2, n, resolved.constants) {
                if matches!(e, Error::SeparationViolated { .. }) {
                    failing.push(n);
                }
            }
        }
        checks.push(VerifyCheck {
            name: "separation".into(),
            pass: failing.is_empty(),
            detail: if failing.is_empty() {
                format!("b1={}, b2={} separate at N in {{500, 1000, 10000}}", resolved.b1, resolved.b2)
            } else {
                format!("separation fails at N in {failing:?}")
            },
        });
    }

    // Monte Carlo study
    let vcfg = cfg.verify.clone().unwrap_or_default();
    let group_size = vcfg.group_size.unwrap_or(500);
    let spec = match &cfg.model {
        Some(m) if m.couplings.is_some() => {
            ModelSpec::new(m.group_sizes.clone(), m.couplings.clone().unwrap())
                .map_err(CliError::Lib)?
        }
        _ => ModelSpec::new(vec![group_size, group_size], vec![0.5, 2.0])
            .map_err(CliError::Lib)?,
    };
    let mut targets = vec![StudyTarget::Consistency, StudyTarget::Misid];
    if full {
        targets.extend([StudyTarget::Coverage, StudyTarget::Clt, StudyTarget::Tails]);
    }
    let study_cfg = StudyConfig {
        replications: vcfg.replications.unwrap_or(if full { 2000 } else { 500 }),
        sample_sizes: vcfg
            .sample_sizes
            .unwrap_or_else(|| if full { vec![100, 1000] } else { vec![200] }),
        seed: vcfg.seed.unwrap_or(seed),
        b1: resolved.b1,
        b2: resolved.b2,
        constants: resolved.constants,
        ..StudyConfig::new(spec, targets)
    };
    let study = run_study(&study_cfg)?;
    checks.push(VerifyCheck {
        name: "monte_carlo_study".into(),
        pass: study.all_pass,
        detail: format!(
            "{} of {} target checks passed",
            study.results.iter().filter(|r| r.pass).count(),
            study.results.len()
        ),
    });

    let all_pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        schema_version: SCHEMA_VERSION,
        profile: if full { "full" } else { "default" }.into(),
        checks,
        study,
        all_pass,
    };
    write_json(&out_dir.join("verify.json"), &report)?;
    for c in &report.checks {
        println!("check {}: {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    if all_pass {
        Ok(0)
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        eprintln!("failed checks: {failed:?}");
        Ok(3)
    }
}
