//! The sufficient statistic T, the large-population coupling estimator with
//! its inconclusive gap, the exact-moment maximum-likelihood estimator, the
//! pseudo-true values both estimators drift to at fixed group size, and the
//! plug-in council-weight estimator.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::cw;
use crate::error::{Error, Result};
use crate::ldp;
use crate::model::{self, VotingSample};
use crate::numeric::CompensatedSum;
use crate::regimes::{build_intervals, ErrorConstants, RegimeIntervals, RegimeLabel};

/// Result of the approximation-based coupling estimator for one group.
///
/// `HighTemp` values may be negative or `-inf`, `LowTemp` values may be
/// `+inf`; both kinds of extreme are reported as-is rather than clamped,
/// with [`Estimate::is_atypical`] as the warning flag. `Inconclusive` means
/// the statistic fell in the critical gap where the two moment
/// approximations overlap and no value can be assigned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    HighTemp(f64),
    LowTemp(f64),
    Inconclusive,
}

impl Estimate {
    pub fn value(&self) -> Option<f64> {
        match self {
            Estimate::HighTemp(v) | Estimate::LowTemp(v) => Some(*v),
            Estimate::Inconclusive => None,
        }
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, Estimate::Inconclusive)
    }

    /// Negative or infinite realisations; possible but exponentially rare.
    pub fn is_atypical(&self) -> bool {
        match self {
            Estimate::HighTemp(v) => *v < 0.0 || v.is_infinite(),
            Estimate::LowTemp(v) => v.is_infinite(),
            Estimate::Inconclusive => false,
        }
    }

    pub fn regime(&self) -> Option<RegimeLabel> {
        match self {
            Estimate::HighTemp(_) => Some(RegimeLabel::HighTemp),
            Estimate::LowTemp(_) => Some(RegimeLabel::LowTemp),
            Estimate::Inconclusive => None,
        }
    }
}

impl Serialize for Estimate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Estimate", 2)?;
        match self {
            Estimate::HighTemp(v) => {
                s.serialize_field("regime", "high_temp")?;
                s.serialize_field("value", &ExtReal(*v))?;
            }
            Estimate::LowTemp(v) => {
                s.serialize_field("regime", "low_temp")?;
                s.serialize_field("value", &ExtReal(*v))?;
            }
            Estimate::Inconclusive => {
                s.serialize_field("regime", "inconclusive")?;
                s.serialize_field("value", &Option::<f64>::None)?;
            }
        }
        s.end()
    }
}

/// f64 wrapper that serializes infinities as the strings "inf"/"-inf"
/// (plain JSON numbers otherwise), since JSON has no infinity literal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtReal(pub f64);

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            serializer.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            serializer.serialize_str("-inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

/// Per-group mean of the squared margins: T_g = (1/n) sum_t S_g(t)^2.
pub fn statistic_t(sample: &VotingSample) -> Vec<f64> {
    let n = sample.num_observations() as f64;
    let mut sums = vec![CompensatedSum::default(); sample.num_groups()];
    for row in sample.margins() {
        for (acc, &s) in sums.iter_mut().zip(row) {
            let sf = s as f64;
            acc.add(sf * sf);
        }
    }
    sums.into_iter().map(|acc| acc.value() / n).collect()
}

/// The approximation-based estimator for one group: case split on which
/// statistic interval T falls in.
///
/// - T in J_h: `1 - N/T` (can be negative, or `-inf` at T = 0);
/// - T in J_l: the unique coupling > 1 with `m(beta)^2 N^2 = T`, `+inf`
///   when T reaches N^2;
/// - T in the gap J_c: inconclusive.
pub fn estimate_beta_inf(t: f64, intervals: &RegimeIntervals) -> Estimate {
    let n = intervals.group_size() as f64;
    match intervals.classify_statistic(t) {
        RegimeLabel::HighTemp => Estimate::HighTemp(1.0 - n / t),
        RegimeLabel::Critical => Estimate::Inconclusive,
        RegimeLabel::LowTemp => {
            let y = t.sqrt() / n;
            if y >= 1.0 {
                Estimate::LowTemp(f64::INFINITY)
            } else {
                let beta = cw::magnetization_inverse(y)
                    .expect("0 < sqrt(T)/N < 1 whenever T lies in J_l");
                Estimate::LowTemp(beta)
            }
        }
    }
}

/// Exact maximum-likelihood estimate: the coupling whose exact E S^2 equals
/// the observed T, found by monotone bracketing and bisection. The range
/// endpoints map to the -inf/+inf sentinels; T outside the attainable hull
/// is an error.
pub fn exact_mle(t: f64, group_size: u64) -> Result<f64> {
    let n = group_size as f64;
    let min_range = if group_size.is_multiple_of(2) { 0.0 } else { 1.0 };
    let max_range = n * n;
    if !t.is_finite() || t < min_range || t > max_range {
        return Err(Error::OutOfRange {
            value: t,
            min: min_range,
            max: max_range,
        });
    }
    if t == min_range {
        return Ok(f64::NEG_INFINITY);
    }
    if t == max_range {
        return Ok(f64::INFINITY);
    }
    let moment = |beta: f64| model::exact_moment(beta, group_size, 2).expect("finite coupling");

    let mut lo = -50.0;
    let mut hi = 50.0;
    while moment(lo) > t {
        lo *= 2.0;
        if lo < -1e7 {
            return Err(Error::invalid(format!("failed to bracket MLE below for T={t}")));
        }
    }
    while moment(hi) < t {
        hi *= 2.0;
        if hi > 1e7 {
            return Err(Error::invalid(format!("failed to bracket MLE above for T={t}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if moment(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Pseudo-true coupling: the value whose large-population formula matches
/// the exact finite-N moment of the true coupling. This is the probability
/// limit of [`estimate_beta_inf`] as the sample grows at fixed N.
pub fn pseudo_true_beta(
    beta_true: f64,
    group_size: u64,
    intervals: &RegimeIntervals,
) -> Result<f64> {
    let n = group_size as f64;
    let e2 = model::exact_moment(beta_true, group_size, 2)?;
    match intervals.classify_coupling(beta_true)? {
        RegimeLabel::HighTemp => Ok(1.0 - n / e2),
        RegimeLabel::LowTemp => cw::magnetization_inverse(e2.sqrt() / n),
        RegimeLabel::Critical => Err(Error::OutOfDomain {
            value: beta_true,
            gap_lo: intervals.b1(),
            gap_hi: intervals.b2(),
        }),
    }
}

/// Council-weight estimate for one group, or inconclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightEstimate {
    Weight(f64),
    Inconclusive,
}

impl WeightEstimate {
    pub fn value(&self) -> Option<f64> {
        match self {
            WeightEstimate::Weight(w) => Some(*w),
            WeightEstimate::Inconclusive => None,
        }
    }
}

impl Serialize for WeightEstimate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            WeightEstimate::Weight(w) => ExtReal(*w).serialize(serializer),
            WeightEstimate::Inconclusive => serializer.serialize_str("u"),
        }
    }
}

/// Plug-in estimator of the optimal council weight: the asymptotic weight
/// formula of whichever branch the estimate landed in, inconclusive when
/// the coupling estimate is.
pub fn estimate_weight(t: f64, intervals: &RegimeIntervals) -> WeightEstimate {
    let n = intervals.group_size() as f64;
    match estimate_beta_inf(t, intervals) {
        Estimate::HighTemp(b) => WeightEstimate::Weight(
            (2.0 / std::f64::consts::PI).sqrt() * (1.0 / (1.0 - b)).sqrt() * n.sqrt(),
        ),
        Estimate::LowTemp(b) => {
            let m = if b.is_infinite() {
                1.0
            } else {
                cw::magnetization(b).expect("low-temperature estimate is > 1")
            };
            WeightEstimate::Weight(m * n)
        }
        Estimate::Inconclusive => WeightEstimate::Inconclusive,
    }
}

/// Pseudo-true council weight: the exact E |S| of the group.
pub fn pseudo_true_weight(beta_true: f64, group_size: u64) -> Result<f64> {
    model::exact_abs_moment(beta_true, group_size)
}

/// Options controlling which optional quantities a report carries.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub include_exact_mle: bool,
    /// Two-sided confidence level, e.g. 0.95; None skips intervals.
    pub confidence_level: Option<f64>,
    /// When the true couplings are known (simulation studies), report the
    /// pseudo-true values and the misidentification bound at the true
    /// coupling.
    pub true_couplings: Option<Vec<f64>>,
    /// Report the worst-case regime misidentification exponents (evaluated
    /// at the interval boundaries).
    pub include_misid_bounds: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            include_exact_mle: false,
            confidence_level: Some(0.95),
            true_couplings: None,
            include_misid_bounds: true,
        }
    }
}

/// Everything estimated for one group.
#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    pub group: usize,
    pub group_size: u64,
    pub statistic_t: f64,
    pub j_h_upper: f64,
    pub j_l_lower: f64,
    pub regime: Option<RegimeLabel>,
    pub estimate: Estimate,
    pub atypical: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_mle: Option<ExtReal>,
    pub weight_estimate: WeightEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_interval: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_true_beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_true_weight: Option<f64>,
    /// Exponent of the e^{-eta n} bound on mislabelling this group's regime,
    /// evaluated at the worst-case boundary coupling of the opposite regime.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misid_bound_into_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misid_bound_into_high: Option<f64>,
}

/// Full estimation report for a sample.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationReport {
    pub schema_version: u32,
    pub n_observations: usize,
    pub b1: f64,
    pub b2: f64,
    pub d_high: f64,
    pub d_low: f64,
    pub constants_source: String,
    pub confidence_level: Option<f64>,
    pub groups: Vec<GroupReport>,
    pub any_inconclusive: bool,
    /// Minimum over groups of the per-group worst-case exponents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate_misid_bound: Option<f64>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Estimate every group of a sample and assemble the report. Interval
/// construction failures (separation) propagate; per-group optional
/// quantities that do not apply (e.g. a confidence interval for an
/// inconclusive estimate) are simply omitted.
pub fn build_report(
    sample: &VotingSample,
    b1: f64,
    b2: f64,
    constants: ErrorConstants,
    constants_source: &str,
    options: &ReportOptions,
) -> Result<EstimationReport> {
    if let Some(level) = options.confidence_level {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::invalid(format!("confidence level must be in (0,1), got {level}")));
        }
    }
    if let Some(trues) = &options.true_couplings {
        if trues.len() != sample.num_groups() {
            return Err(Error::invalid("one true coupling per group required"));
        }
    }
    let t = statistic_t(sample);
    let n_obs = sample.num_observations();
    let mut groups = Vec::with_capacity(sample.num_groups());
    let mut aggregate: Option<f64> = None;
    for (g, (&t_g, &size)) in t.iter().zip(sample.group_sizes()).enumerate() {
        let intervals = build_intervals(b1, b2, size, constants)?;
        let estimate = estimate_beta_inf(t_g, &intervals);
        let weight_estimate = estimate_weight(t_g, &intervals);
        let exact_mle_value = if options.include_exact_mle {
            Some(ExtReal(exact_mle(t_g, size)?))
        } else {
            None
        };
        let confidence_interval = options
            .confidence_level
            .and_then(|level| ldp::confidence_interval(estimate, n_obs, size, level).ok());
        let (pseudo_beta, pseudo_weight) = match &options.true_couplings {
            Some(trues) => (
                pseudo_true_beta(trues[g], size, &intervals).ok(),
                pseudo_true_weight(trues[g], size).ok(),
            ),
            None => (None, None),
        };
        let (into_low, into_high) = if options.include_misid_bounds {
            let (eta_low, eta_high) = ldp::worst_case_misid_bounds(&intervals)?;
            (Some(eta_low), Some(eta_high))
        } else {
            (None, None)
        };
        if let (Some(a), Some(b)) = (into_low, into_high) {
            let group_min = a.min(b);
            aggregate = Some(aggregate.map_or(group_min, |m: f64| m.min(group_min)));
        }
        groups.push(GroupReport {
            group: g,
            group_size: size,
            statistic_t: t_g,
            j_h_upper: intervals.j_h_upper(),
            j_l_lower: intervals.j_l_lower(),
            regime: estimate.regime(),
            atypical: estimate.is_atypical(),
            estimate,
            exact_mle: exact_mle_value,
            weight_estimate,
            confidence_interval,
            pseudo_true_beta: pseudo_beta,
            pseudo_true_weight: pseudo_weight,
            misid_bound_into_low: into_low,
            misid_bound_into_high: into_high,
        });
    }
    Ok(EstimationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n_observations: n_obs,
        b1,
        b2,
        d_high: constants.d_high,
        d_low: constants.d_low,
        constants_source: constants_source.to_string(),
        confidence_level: options.confidence_level,
        any_inconclusive: groups.iter().any(|g| g.estimate.is_inconclusive()),
        aggregate_misid_bound: aggregate,
        groups,
    })
}
