//! Council votes, the democracy deficit, and optimal two-tier voting
//! weights: exact (E|S| per group), asymptotic, the exact quadratic
//! minimizer for even group sizes, and normalized baselines.
//!
//! A group's council vote is +1 when its margin is strictly positive and -1
//! otherwise; ties count as rejections, which makes E chi = -P(S = 0)
//! nonzero for even-sized groups. The democracy deficit of weights w is
//!
//! ```text
//! E [ sum_g S_g - sum_g w_g chi_g ]^2
//!   = sum_g (E S_g^2 - 2 w_g E|S_g| + w_g^2)
//!   + sum_{g != h} w_g w_h (E chi_g)(E chi_h)
//! ```
//!
//! using E S = 0, E(S chi) = E|S| (exact under the tie rule), chi^2 = 1, and
//! independence across groups. For odd sizes the cross term vanishes and
//! w = E|S| is the exact minimizer; for even sizes the quadratic couples the
//! groups, and [`deficit_minimizing_weights`] solves it exactly so the gap
//! to E|S| is measurable rather than hidden.

use serde::Serialize;

use crate::cw;
use crate::error::{Error, Result};
use crate::model::{self, ModelSpec};

/// Baseline weighting rules for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Proportional,
    SquareRoot,
    Equal,
}

/// Where a weight vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Asymptotic,
    Estimated,
    QuadraticMinimizer,
    Baseline(BaselineKind),
}

/// Nonnegative council weights, one per group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    provenance: Provenance,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weight vector must be nonempty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        Ok(WeightVector {
            weights,
            provenance,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Council votes from the group margins: +1 for a strictly positive margin,
/// -1 otherwise (a tie counts as a no).
pub fn council_votes(margins: &[i64]) -> Vec<i8> {
    margins.iter().map(|&s| if s > 0 { 1 } else { -1 }).collect()
}

/// One council round evaluated under a weight vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouncilOutcome {
    pub chi: Vec<i8>,
    pub weighted_vote: f64,
    pub popular_margin: i64,
}

pub fn council_outcome(margins: &[i64], weights: &[f64]) -> Result<CouncilOutcome> {
    if margins.len() != weights.len() {
        return Err(Error::invalid("margins and weights must have equal length"));
    }
    let chi = council_votes(margins);
    let weighted_vote = chi
        .iter()
        .zip(weights)
        .map(|(&c, &w)| c as f64 * w)
        .sum();
    Ok(CouncilOutcome {
        chi,
        weighted_vote,
        popular_margin: margins.iter().sum(),
    })
}

/// Moments entering the deficit for one group.
struct GroupMoments {
    second: f64,
    abs_first: f64,
    /// E chi = -P(S = 0); zero for odd group sizes
    chi_mean: f64,
}

fn group_moments(spec: &ModelSpec) -> Result<Vec<GroupMoments>> {
    spec.group_sizes()
        .iter()
        .zip(spec.couplings())
        .map(|(&n, &beta)| {
            let dist = model::magnetization_distribution(beta, n)?;
            Ok(GroupMoments {
                second: dist.moment(2),
                abs_first: dist.abs_moment(),
                chi_mean: -dist.prob_zero(),
            })
        })
        .collect()
}

/// Exact democracy deficit of a weight vector under the model, via the
/// moment expansion in the module docs.
pub fn democracy_deficit(spec: &ModelSpec, weights: &[f64]) -> Result<f64> {
    if weights.len() != spec.num_groups() {
        return Err(Error::invalid("one weight per group required"));
    }
    let moments = group_moments(spec)?;
    let mut diagonal = 0.0;
    let mut weighted_chi_sum = 0.0;
    let mut weighted_chi_sq = 0.0;
    for (m, &w) in moments.iter().zip(weights) {
        diagonal += m.second - 2.0 * w * m.abs_first + w * w;
        let wc = w * m.chi_mean;
        weighted_chi_sum += wc;
        weighted_chi_sq += wc * wc;
    }
    Ok(diagonal + weighted_chi_sum * weighted_chi_sum - weighted_chi_sq)
}

/// The optimal weights w_g = E|S_g|, exact per-group moments.
pub fn optimal_weights_exact(spec: &ModelSpec) -> Result<WeightVector> {
    require_nonnegative_couplings(spec)?;
    let weights = spec
        .group_sizes()
        .iter()
        .zip(spec.couplings())
        .map(|(&n, &beta)| model::exact_abs_moment(beta, n))
        .collect::<Result<Vec<_>>>()?;
    WeightVector::new(weights, Provenance::Exact)
}

/// Large-population optimal weights:
/// `sqrt(2/pi) sqrt(1/(1-beta)) sqrt(N)` below criticality and
/// `m(beta) N` above it. The critical coupling is rejected.
pub fn optimal_weights_asymptotic(spec: &ModelSpec) -> Result<WeightVector> {
    require_nonnegative_couplings(spec)?;
    let weights = spec
        .group_sizes()
        .iter()
        .zip(spec.couplings())
        .map(|(&n, &beta)| {
            if beta == 1.0 {
                return Err(Error::invalid(
                    "asymptotic weight undefined at the critical coupling",
                ));
            }
            let nf = n as f64;
            if beta < 1.0 {
                Ok((2.0 / std::f64::consts::PI).sqrt() * (1.0 / (1.0 - beta)).sqrt() * nf.sqrt())
            } else {
                Ok(cw::magnetization(beta)? * nf)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    WeightVector::new(weights, Provenance::Asymptotic)
}

/// Exact minimizer of the quadratic deficit, cross terms included. The
/// stationarity system `w_g (1 - c_g^2) + c_g sum_h c_h w_h = E|S_g|` with
/// `c_g = E chi_g` has diagonal 1 and rank-one off-diagonal structure, so it
/// solves in closed form. Coincides with E|S| when every group size is odd.
pub fn deficit_minimizing_weights(spec: &ModelSpec) -> Result<WeightVector> {
    let moments = group_moments(spec)?;
    let mut ratio_sum = 0.0; // sum c a / (1 - c^2)
    let mut shrink_sum = 0.0; // sum c^2 / (1 - c^2)
    for m in &moments {
        let denom = 1.0 - m.chi_mean * m.chi_mean;
        if denom <= f64::EPSILON {
            return Err(Error::invalid(
                "deficit quadratic is degenerate: a group is almost surely tied",
            ));
        }
        ratio_sum += m.chi_mean * m.abs_first / denom;
        shrink_sum += m.chi_mean * m.chi_mean / denom;
    }
    let coupling_total = ratio_sum / (1.0 + shrink_sum);
    let weights = moments
        .iter()
        .map(|m| {
            (m.abs_first - m.chi_mean * coupling_total) / (1.0 - m.chi_mean * m.chi_mean)
        })
        .collect();
    WeightVector::new(weights, Provenance::QuadraticMinimizer)
}

/// Baseline weights (group size, its square root, or equal), normalized so
/// their total matches the total of the exact optimal weights, which keeps
/// deficits comparable.
pub fn baseline_weights(spec: &ModelSpec, kind: BaselineKind) -> Result<WeightVector> {
    let raw: Vec<f64> = spec
        .group_sizes()
        .iter()
        .map(|&n| match kind {
            BaselineKind::Proportional => n as f64,
            BaselineKind::SquareRoot => (n as f64).sqrt(),
            BaselineKind::Equal => 1.0,
        })
        .collect();
    let target_total = optimal_weights_exact(spec)?.total();
    let raw_total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w * target_total / raw_total).collect();
    WeightVector::new(weights, Provenance::Baseline(kind))
}

fn require_nonnegative_couplings(spec: &ModelSpec) -> Result<()> {
    if let Some(b) = spec.couplings().iter().find(|&&b| b < 0.0) {
        return Err(Error::invalid(format!(
            "optimal weights are defined for nonnegative couplings, got {b}"
        )));
    }
    Ok(())
}
