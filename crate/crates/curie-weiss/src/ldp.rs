//! Cumulant generating functions and Legendre transforms of the finite
//! margin laws, the Chernoff exponents bounding regime misidentification,
//! asymptotic-normality confidence intervals, large-deviations rate
//! functions for the margin share, the statistic, the coupling estimator and
//! the weight estimator, and the sample-size planner built on those bounds.

use std::io::Write;

use serde::Serialize;

use crate::cw;
use crate::error::{Error, Result};
use crate::estimator::{self, Estimate};
use crate::model;
use crate::numeric::{log_sum_exp, two_sided_normal_quantile};
use crate::regimes::{RegimeIntervals, RegimeLabel};

/// A finite-support probability law with log-domain weights, carrying its
/// cumulant generating function `L(t) = ln E exp(tY)` and the Legendre
/// transform `L*(x) = sup_t (xt - L(t))`.
///
/// `L` is convex with `L(0) = 0`; `L'` is strictly increasing with range the
/// open support hull, which is what makes the Legendre transform computable
/// by solving `L'(t) = x`.
#[derive(Debug, Clone)]
pub struct DiscreteLaw {
    /// strictly increasing support
    values: Vec<f64>,
    log_probs: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(Error::invalid("law needs matching, nonempty values and probabilities"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("law support must be strictly increasing"));
        }
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p.is_nan() || p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("probabilities must be nonnegative and sum to 1"));
        }
        Ok(DiscreteLaw {
            values,
            log_probs: probs.iter().map(|p| p.ln()).collect(),
        })
    }

    /// Law of S^2 for one group, the +/- s pairs collapsed.
    pub fn squared_margin(beta: f64, group_size: u64) -> Result<Self> {
        Self::squared_margin_scaled(beta, group_size, 1.0)
    }

    /// Law of (S/N)^2 for one group.
    pub fn scaled_squared_margin(beta: f64, group_size: u64) -> Result<Self> {
        let n = group_size as f64;
        Self::squared_margin_scaled(beta, group_size, 1.0 / (n * n))
    }

    fn squared_margin_scaled(beta: f64, group_size: u64, scale: f64) -> Result<Self> {
        let dist = model::magnetization_distribution(beta, group_size)?;
        let start = if group_size.is_multiple_of(2) { 0 } else { 1 };
        let mut values = Vec::new();
        let mut log_probs = Vec::new();
        let mut s = start;
        while s <= group_size as i64 {
            let lp = dist.log_prob(s) + if s > 0 { 2.0f64.ln() } else { 0.0 };
            values.push((s * s) as f64 * scale);
            log_probs.push(lp);
            s += 2;
        }
        Ok(DiscreteLaw { values, log_probs })
    }

    /// The fair two-point law on {-1, +1}.
    pub fn rademacher() -> Self {
        DiscreteLaw {
            values: vec![-1.0, 1.0],
            log_probs: vec![-(2.0f64.ln()), -(2.0f64.ln())],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.log_probs)
            .map(|(v, lp)| v * lp.exp())
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.values
            .iter()
            .zip(&self.log_probs)
            .map(|(v, lp)| (v - mu).powi(2) * lp.exp())
            .sum()
    }

    /// Cumulant generating function `ln E exp(tY)`.
    pub fn cumulant(&self, t: f64) -> f64 {
        let shifted: Vec<f64> = self
            .values
            .iter()
            .zip(&self.log_probs)
            .map(|(v, lp)| lp + t * v)
            .collect();
        log_sum_exp(&shifted)
    }

    /// Derivative of the cumulant: the mean of the exponentially tilted law.
    pub fn cumulant_prime(&self, t: f64) -> f64 {
        let shifted: Vec<f64> = self
            .values
            .iter()
            .zip(&self.log_probs)
            .map(|(v, lp)| lp + t * v)
            .collect();
        let max = shifted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for (v, a) in self.values.iter().zip(&shifted) {
            let w = (a - max).exp();
            num += w * v;
            den += w;
        }
        num / den
    }

    /// Legendre transform (entropy function) `L*(x)`: +inf outside the
    /// support hull, `-ln P(Y = endpoint)` at the hull endpoints, and the
    /// tilted value `x t* - L(t*)` with `L'(t*) = x` inside.
    pub fn legendre(&self, x: f64) -> f64 {
        if x < self.min_value() || x > self.max_value() {
            return f64::INFINITY;
        }
        if x == self.min_value() {
            return -self.log_probs[0];
        }
        if x == self.max_value() {
            return -self.log_probs[self.log_probs.len() - 1];
        }
        if self.values.len() == 1 {
            return 0.0;
        }
        let mean = self.mean();
        // bracket t with L'(lo) <= x <= L'(hi)
        let (mut lo, mut hi);
        if x >= mean {
            lo = 0.0;
            hi = 1.0;
            while self.cumulant_prime(hi) < x {
                lo = hi;
                hi *= 2.0;
                if hi > 1e12 {
                    break;
                }
            }
        } else {
            hi = 0.0;
            lo = -1.0;
            while self.cumulant_prime(lo) > x {
                hi = lo;
                lo *= 2.0;
                if lo < -1e12 {
                    break;
                }
            }
        }
        let tol = 1e-12 * x.abs().max(1.0);
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            t = 0.5 * (lo + hi);
            let d = self.cumulant_prime(t);
            if (d - x).abs() <= tol {
                break;
            }
            if d < x {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= f64::EPSILON * t.abs().max(1.0) {
                break;
            }
        }
        (t * x - self.cumulant(t)).max(0.0)
    }
}

/// Closed-form entropy function of the fair +/-1 law:
/// `(1-x)/2 ln(1-x) + (1+x)/2 ln(1+x)` on [-1, 1], +inf outside.
pub fn rademacher_entropy(x: f64) -> f64 {
    if !(-1.0..=1.0).contains(&x) {
        return f64::INFINITY;
    }
    let term = |u: f64| if u == 0.0 { 0.0 } else { 0.5 * u * u.ln() };
    term(1.0 - x) + term(1.0 + x)
}

/// Rate function of the margin share S/N:
/// `I(x) = -beta x^2/2 + rademacher_entropy(x) - psi` on [-1, 1], +inf
/// outside, with `psi` the minimum of the bracket, attained at x = m(beta)
/// (and at -m(beta)); so `I(+-m(beta)) = 0`.
pub fn rate_margin_share(beta: f64, x: f64) -> Result<f64> {
    let psi = rate_offset(beta)?;
    if !(-1.0..=1.0).contains(&x) {
        return Ok(f64::INFINITY);
    }
    Ok((-0.5 * beta * x * x + rademacher_entropy(x) - psi).max(0.0))
}

/// Rate function of the squared margin share (S/N)^2:
/// `J(y) = I(sqrt y)` on [0, 1], +inf outside; minimized at m(beta)^2.
pub fn rate_squared_margin_share(beta: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        let _ = rate_offset(beta)?; // still validate beta
        return Ok(f64::INFINITY);
    }
    rate_margin_share(beta, y.sqrt())
}

fn rate_offset(beta: f64) -> Result<f64> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::invalid(format!(
            "rate functions are defined for beta >= 0, got {beta}"
        )));
    }
    let m = cw::magnetization(beta)?;
    Ok(-0.5 * beta * m * m + rademacher_entropy(m))
}

/// Exponent of the per-group regime misidentification bound at the true
/// coupling: for a high-temperature coupling the probability that T lands in
/// J_l is at most `exp(-eta n)` with `eta = L*_{S^2}(inf J_l)` (the infimum
/// over J_l of the entropy function, attained at the left endpoint since L*
/// increases right of the mean); symmetrically for a low-temperature
/// coupling and J_h.
pub fn regime_misid_bound(intervals: &RegimeIntervals, beta: f64) -> Result<f64> {
    let law = DiscreteLaw::squared_margin(beta, intervals.group_size())?;
    let mean = law.mean();
    match intervals.classify_coupling(beta)? {
        RegimeLabel::HighTemp => {
            let target = intervals.j_l_lower();
            if target <= mean {
                return Err(Error::DegenerateBound(format!(
                    "J_l starts at {target}, not above the mean {mean}"
                )));
            }
            Ok(law.legendre(target))
        }
        RegimeLabel::LowTemp => {
            let target = intervals.j_h_upper();
            if target >= mean {
                return Err(Error::DegenerateBound(format!(
                    "J_h ends at {target}, not below the mean {mean}"
                )));
            }
            Ok(law.legendre(target))
        }
        RegimeLabel::Critical => Err(Error::OutOfDomain {
            value: beta,
            gap_lo: intervals.b1(),
            gap_hi: intervals.b2(),
        }),
    }
}

/// Exponent of the bound on atypical estimates (negative or infinite):
/// `theta = min(L*_{S^2}(N), L*_{S^2}(N^2))`, giving the probability bound
/// `2 exp(-theta n)`. Positive only for couplings strictly above 0, where
/// `N < E S^2 < N^2`.
pub fn atypical_estimate_bound(beta: f64, group_size: u64) -> Result<f64> {
    if beta <= 0.0 || beta.is_nan() {
        return Err(Error::DegenerateBound(format!(
            "atypical-estimate bound needs beta > 0 (E S^2 must sit strictly inside (N, N^2)), got {beta}"
        )));
    }
    let n = group_size as f64;
    let law = DiscreteLaw::squared_margin(beta, group_size)?;
    let theta = law.legendre(n).min(law.legendre(n * n));
    if theta <= 0.0 || theta.is_nan() {
        return Err(Error::DegenerateBound(format!(
            "entropy function vanishes at a range endpoint for beta={beta}, N={group_size}"
        )));
    }
    Ok(theta)
}

/// Worst-case misidentification exponents over whole regimes, evaluated at
/// the boundary couplings where the gap between the statistic's mean and the
/// opposite interval is smallest: `(eta into J_l at b1, eta into J_h at b2)`.
pub fn worst_case_misid_bounds(intervals: &RegimeIntervals) -> Result<(f64, f64)> {
    let high_law = DiscreteLaw::squared_margin(intervals.b1(), intervals.group_size())?;
    let low_law = DiscreteLaw::squared_margin(intervals.b2(), intervals.group_size())?;
    // the Chernoff direction needs each target on the far side of the mean
    if intervals.j_l_lower() <= high_law.mean() || intervals.j_h_upper() >= low_law.mean() {
        return Err(Error::DegenerateBound(
            "boundary coupling mean overlaps the opposite interval".to_string(),
        ));
    }
    let eta_into_low = high_law.legendre(intervals.j_l_lower());
    let eta_into_high = low_law.legendre(intervals.j_h_upper());
    if !(eta_into_low > 0.0 && eta_into_high > 0.0) {
        return Err(Error::DegenerateBound(
            "vanishing misidentification exponent at a regime boundary".to_string(),
        ));
    }
    Ok((eta_into_low, eta_into_high))
}

/// Smallest sample size for which both worst-case misidentification bounds
/// fall below `epsilon`.
pub fn plan_sample_size(intervals: &RegimeIntervals, epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!("epsilon must be in (0, 1], got {epsilon}")));
    }
    let (eta_low, eta_high) = worst_case_misid_bounds(intervals)?;
    let eta = eta_low.min(eta_high);
    // exp(-eta n) < eps  <=>  n > ln(1/eps)/eta
    let mut n = ((1.0 / epsilon).ln() / eta).floor().max(0.0) as u64 + 1;
    while (-eta * n as f64).exp() >= epsilon {
        n += 1;
    }
    Ok(n)
}

/// Variance of the limiting normal of `sqrt(n) (estimate - pseudo-true)`,
/// per regime of the true coupling:
/// `(1 - bt)^4 V(S^2/N)` in high temperature and
/// `V((S/N)^2) / (2 m(bt) m'(bt))^2` in low temperature, with `bt` the
/// pseudo-true coupling and the variances exact at the true one.
pub fn asymptotic_variance(
    beta_true: f64,
    group_size: u64,
    intervals: &RegimeIntervals,
) -> Result<f64> {
    let n = group_size as f64;
    let bt = estimator::pseudo_true_beta(beta_true, group_size, intervals)?;
    let v_s2 = model::variance_s2(beta_true, group_size)?;
    match intervals.classify_coupling(beta_true)? {
        RegimeLabel::HighTemp => Ok((1.0 - bt).powi(4) * v_s2 / (n * n)),
        RegimeLabel::LowTemp => {
            let m = cw::magnetization(bt)?;
            let mp = cw::magnetization_prime(bt)?;
            Ok(v_s2 / (n * n * n * n) / (2.0 * m * mp).powi(2))
        }
        RegimeLabel::Critical => unreachable!("pseudo_true_beta rejects the gap"),
    }
}

/// Two-sided confidence interval for the coupling from a conclusive, finite
/// estimate. The unknown pseudo-true value is replaced by the estimate, and
/// the exact variance is evaluated at the model implied by the observed
/// statistic (its exact MLE), so no true coupling is needed.
pub fn confidence_interval(
    estimate: Estimate,
    n_observations: usize,
    group_size: u64,
    level: f64,
) -> Result<(f64, f64)> {
    if n_observations < 2 {
        return Err(Error::invalid("confidence interval needs n >= 2"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level must be in (0,1), got {level}")));
    }
    let n = group_size as f64;
    let (b, variance) = match estimate {
        Estimate::Inconclusive => {
            return Err(Error::invalid("no confidence interval for an inconclusive estimate"))
        }
        Estimate::HighTemp(b) => {
            if !b.is_finite() {
                return Err(Error::invalid("estimate is infinite; no normal limit applies"));
            }
            let t = n / (1.0 - b);
            let implied = estimator::exact_mle(t, group_size)?;
            if !implied.is_finite() {
                return Err(Error::invalid("statistic at the range boundary; no normal limit"));
            }
            let v = model::variance_s2(implied, group_size)? / (n * n);
            (b, (1.0 - b).powi(4) * v)
        }
        Estimate::LowTemp(b) => {
            if !b.is_finite() {
                return Err(Error::invalid("estimate is infinite; no normal limit applies"));
            }
            let m = cw::magnetization(b)?;
            let t = m * m * n * n;
            let implied = estimator::exact_mle(t, group_size)?;
            if !implied.is_finite() {
                return Err(Error::invalid("statistic at the range boundary; no normal limit"));
            }
            let v = model::variance_s2(implied, group_size)? / (n * n * n * n);
            let mp = cw::magnetization_prime(b)?;
            (b, v / (2.0 * m * mp).powi(2))
        }
    };
    let half = two_sided_normal_quantile(level) * (variance / n_observations as f64).sqrt();
    Ok((b - half, b + half))
}

/// Large-deviations rate of the coupling estimator at a point `b` of its
/// codomain, under the model with true coupling `beta`: the statistic's rate
/// contracted through the strictly monotone link, i.e.
/// `L*_{(S/N)^2}(theta_inf(b))` branch by branch. The minimum sits at the
/// pseudo-true coupling, where the link value is the exact mean.
pub fn estimator_rate(intervals: &RegimeIntervals, beta: f64, b: f64) -> Result<f64> {
    let law = DiscreteLaw::scaled_squared_margin(beta, intervals.group_size())?;
    let y = intervals.theta_inf(b)?;
    Ok(law.legendre(y))
}

/// Rate function of the multi-group estimator: the sum of per-group rates.
pub fn estimator_rate_multi(
    intervals: &[RegimeIntervals],
    betas: &[f64],
    bs: &[f64],
) -> Result<f64> {
    if intervals.len() != betas.len() || betas.len() != bs.len() {
        return Err(Error::invalid("per-group lengths must match"));
    }
    let mut total = 0.0;
    for ((iv, &beta), &b) in intervals.iter().zip(betas).zip(bs) {
        total += estimator_rate(iv, beta, b)?;
    }
    Ok(total)
}

/// Large-deviations rate of the weight estimator at a weight value `z`:
/// the estimator's rate contracted through the weight link. `z` outside the
/// link's image has an empty constraint set and rate +inf.
pub fn weight_rate(intervals: &RegimeIntervals, beta: f64, z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::invalid("weight must not be NaN"));
    }
    let (high_max, low_min, low_sup) = intervals.psi_branch_bounds();
    let n = intervals.group_size() as f64;
    let b = if z < 0.0 {
        return Ok(f64::INFINITY);
    } else if z == 0.0 {
        f64::NEG_INFINITY
    } else if z <= high_max {
        // invert sqrt(2/pi) sqrt(1/(1-b)) sqrt(N) = z
        1.0 - 2.0 * n / (std::f64::consts::PI * z * z)
    } else if z >= low_min && z < low_sup {
        cw::magnetization_inverse(z / n)?
    } else if z == low_sup {
        f64::INFINITY
    } else {
        return Ok(f64::INFINITY);
    };
    estimator_rate(intervals, beta, b)
}

/// A rate function tabulated on a finite window, for export and plotting.
#[derive(Debug, Clone, Serialize)]
pub struct RateProfile {
    pub label: String,
    /// window covered by the tabulation
    pub domain: (f64, f64),
    /// whether the rate is +inf outside the window
    pub infinite_outside: bool,
    pub xs: Vec<f64>,
    pub rates: Vec<f64>,
    pub minimizers: Vec<f64>,
    pub minimum: f64,
}

impl RateProfile {
    /// Rate of the margin share S/N on [-1, 1].
    pub fn margin_share(beta: f64, points: usize) -> Result<Self> {
        let m = cw::magnetization(beta)?;
        let (xs, rates) = tabulate(-1.0, 1.0, points, |x| rate_margin_share(beta, x))?;
        let minimizers = if m == 0.0 { vec![0.0] } else { vec![-m, m] };
        Ok(RateProfile {
            label: format!("margin-share rate, beta={beta}"),
            domain: (-1.0, 1.0),
            infinite_outside: true,
            xs,
            rates,
            minimizers,
            minimum: 0.0,
        })
    }

    /// Rate of the squared margin share (S/N)^2 on [0, 1].
    pub fn squared_margin_share(beta: f64, points: usize) -> Result<Self> {
        let m = cw::magnetization(beta)?;
        let (xs, rates) = tabulate(0.0, 1.0, points, |y| rate_squared_margin_share(beta, y))?;
        Ok(RateProfile {
            label: format!("squared-margin-share rate, beta={beta}"),
            domain: (0.0, 1.0),
            infinite_outside: true,
            xs,
            rates,
            minimizers: vec![m * m],
            minimum: 0.0,
        })
    }

    /// Rate of the coupling estimator over a coupling window (points inside
    /// the critical gap get rate +inf, matching the estimator's codomain).
    pub fn estimator(
        intervals: &RegimeIntervals,
        beta: f64,
        window: (f64, f64),
        points: usize,
    ) -> Result<Self> {
        let (xs, rates) = tabulate(window.0, window.1, points, |b| {
            match estimator_rate(intervals, beta, b) {
                Ok(r) => Ok(r),
                Err(Error::OutOfDomain { .. }) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        })?;
        let bt = estimator::pseudo_true_beta(beta, intervals.group_size(), intervals)?;
        Ok(RateProfile {
            label: format!("estimator rate, beta={beta}, N={}", intervals.group_size()),
            domain: window,
            infinite_outside: false,
            xs,
            rates,
            minimizers: vec![bt],
            minimum: 0.0,
        })
    }

    /// Rate of the weight estimator over a weight window.
    pub fn weight(
        intervals: &RegimeIntervals,
        beta: f64,
        window: (f64, f64),
        points: usize,
    ) -> Result<Self> {
        let (xs, rates) = tabulate(window.0, window.1, points, |z| {
            weight_rate(intervals, beta, z)
        })?;
        let bt = estimator::pseudo_true_beta(beta, intervals.group_size(), intervals)?;
        let minimizer = intervals.psi_inf(bt)?;
        Ok(RateProfile {
            label: format!("weight rate, beta={beta}, N={}", intervals.group_size()),
            domain: window,
            infinite_outside: false,
            xs,
            rates,
            minimizers: vec![minimizer],
            minimum: 0.0,
        })
    }

    /// Write `x,rate` rows; infinite rates become the token `inf`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,rate")?;
        for (x, r) in self.xs.iter().zip(&self.rates) {
            if r.is_finite() {
                writeln!(out, "{x},{r}")?;
            } else {
                writeln!(out, "{x},inf")?;
            }
        }
        Ok(())
    }
}

fn tabulate(
    lo: f64,
    hi: f64,
    points: usize,
    f: impl Fn(f64) -> Result<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if points < 2 || hi <= lo || !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("tabulation needs points >= 2 and hi > lo"));
    }
    let mut xs = Vec::with_capacity(points);
    let mut rates = Vec::with_capacity(points);
    for i in 0..points {
        let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        xs.push(x);
        rates.push(f(x)?);
    }
    Ok((xs, rates))
}
