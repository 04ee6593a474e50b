//! Regime intervals, the separation condition, large-population moment and
//! correlation approximations with calibrated error envelopes, and the link
//! functions from couplings to statistic space and to council-weight space.
//!
//! For a group of size N and boundaries `0 < b1 < 1 < b2` the coupling axis
//! splits into `I_h = [0, b1]`, `I_c = (b1, b2)`, `I_l = [b2, inf)`, and the
//! statistic axis into
//!
//! ```text
//! J_h = [min S^2, N/(1-b1) + D_high sqrt(N)]
//! J_c = (N/(1-b1) + D_high sqrt(N),  m(b2)^2 N^2 - D_low (ln N)^{3/2} N^{3/2})
//! J_l = [m(b2)^2 N^2 - D_low (ln N)^{3/2} N^{3/2}, inf)
//! ```
//!
//! The construction is valid only when J_h ends strictly below J_l starts;
//! otherwise the group is too small for the chosen boundaries and
//! [`build_intervals`] refuses.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cw;
use crate::error::{Error, Result};
use crate::model;
use crate::numeric::double_factorial;

/// Default regime boundaries used by the CLI; a symmetric-in-log gap around
/// the critical coupling. Overridable everywhere.
pub const DEFAULT_B1: f64 = 0.8;
pub const DEFAULT_B2: f64 = 1.25;

/// Default coupling grids for calibration. The low-temperature grid starts
/// at 1.5: including couplings very close to criticality at tiny N inflates
/// D_low several-fold and breaks the separation condition for mid-sized
/// groups, while interval membership of near-critical couplings needs only a
/// much smaller constant (checked in tests).
pub const DEFAULT_CALIBRATION_BETAS_HIGH: &[f64] = &[0.0, 0.25, 0.5, 0.75];
pub const DEFAULT_CALIBRATION_BETAS_LOW: &[f64] = &[1.5, 2.0, 3.0];

/// Multiplier applied on top of the smallest constants that cover the
/// calibration grid, so envelopes keep holding between grid points.
pub const CALIBRATION_SAFETY_FACTOR: f64 = 2.0;

/// Default group-size grid: all of 2..=64 plus log-spaced points up to 2000.
pub fn default_calibration_sizes() -> Vec<u64> {
    let mut sizes: Vec<u64> = (2..=64).collect();
    let mut n = 64.0f64;
    while n < 2000.0 {
        n *= 1.18;
        sizes.push(n.min(2000.0).round() as u64);
    }
    sizes.dedup();
    sizes
}

/// Multiplicative constants of the approximation-error envelopes
/// `D_high / sqrt(N)` (coupling < 1, for E S^2/N) and
/// `D_low (ln N)^{3/2} / sqrt(N)` (coupling > 1, for E S^2/N^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorConstants {
    pub d_high: f64,
    pub d_low: f64,
}

impl ErrorConstants {
    pub fn new(d_high: f64, d_low: f64) -> Result<Self> {
        if !(d_high > 0.0 && d_high.is_finite() && d_low > 0.0 && d_low.is_finite()) {
            return Err(Error::ConstantsUncalibrated(format!(
                "constants must be positive and finite, got d_high={d_high}, d_low={d_low}"
            )));
        }
        Ok(ErrorConstants { d_high, d_low })
    }

    /// Constants calibrated over the default grids, computed once per
    /// process. Identical to what `calibrate_constants` returns for the
    /// default grids, so a persisted calibration file reproduces them.
    pub fn default_calibrated() -> &'static ErrorConstants {
        static DEFAULTS: OnceLock<ErrorConstants> = OnceLock::new();
        DEFAULTS.get_or_init(|| {
            let betas: Vec<f64> = DEFAULT_CALIBRATION_BETAS_HIGH
                .iter()
                .chain(DEFAULT_CALIBRATION_BETAS_LOW)
                .copied()
                .collect();
            calibrate_constants(&betas, &default_calibration_sizes())
                .expect("default calibration grids are valid")
        })
    }
}

/// Smallest constants making the k=1 envelopes hold everywhere on the given
/// grids, times [`CALIBRATION_SAFETY_FACTOR`]. Couplings below 1 feed
/// `d_high`, couplings above 1 feed `d_low`; both sides must be present.
/// Enlarging a grid can only increase the result.
pub fn calibrate_constants(beta_grid: &[f64], size_grid: &[u64]) -> Result<ErrorConstants> {
    if beta_grid.iter().any(|b| !b.is_finite() || *b == 1.0) {
        return Err(Error::invalid("calibration grid must avoid the critical coupling 1"));
    }
    if size_grid.iter().any(|&n| n < 2) {
        return Err(Error::invalid("calibration sizes must be >= 2 (ln N must not vanish)"));
    }
    let mut worst_high: f64 = 0.0;
    let mut worst_low: f64 = 0.0;
    let mut have_high = false;
    let mut have_low = false;
    for &beta in beta_grid {
        for &n in size_grid {
            let nf = n as f64;
            let e2 = model::exact_moment(beta, n, 2)?;
            if beta < 1.0 {
                have_high = true;
                let dev = (e2 / nf - 1.0 / (1.0 - beta)).abs();
                worst_high = worst_high.max(dev * nf.sqrt());
            } else {
                have_low = true;
                let m = cw::magnetization(beta)?;
                let dev = (e2 / (nf * nf) - m * m).abs();
                worst_low = worst_low.max(dev * nf.sqrt() / nf.ln().powf(1.5));
            }
        }
    }
    if !have_high || !have_low {
        return Err(Error::invalid(
            "calibration grid needs couplings on both sides of 1",
        ));
    }
    ErrorConstants::new(
        CALIBRATION_SAFETY_FACTOR * worst_high,
        CALIBRATION_SAFETY_FACTOR * worst_low,
    )
}

/// Which of the three regimes a coupling or a statistic falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    HighTemp,
    Critical,
    LowTemp,
}

/// Regime intervals for one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeIntervals {
    b1: f64,
    b2: f64,
    d_high: f64,
    d_low: f64,
    group_size: u64,
    /// min Range(S^2): 0 for even N, 1 for odd N.
    j_h_lower: f64,
    j_h_upper: f64,
    j_l_lower: f64,
}

/// Build the intervals for a group of size N, refusing when the separation
/// condition `J_h upper < J_l lower` fails (the group is too small for the
/// chosen boundaries).
pub fn build_intervals(
    b1: f64,
    b2: f64,
    group_size: u64,
    constants: ErrorConstants,
) -> Result<RegimeIntervals> {
    if !(b1 > 0.0 && b1 < 1.0 && b2 > 1.0 && b2.is_finite()) {
        return Err(Error::invalid(format!(
            "boundaries must satisfy 0 < b1 < 1 < b2, got b1={b1}, b2={b2}"
        )));
    }
    if group_size == 0 {
        return Err(Error::invalid("group size must be >= 1"));
    }
    let n = group_size as f64;
    let m_b2 = cw::magnetization(b2)?;
    let j_h_upper = n / (1.0 - b1) + constants.d_high * n.sqrt();
    let j_l_lower = m_b2 * m_b2 * n * n - constants.d_low * n.ln().powf(1.5) * n.powf(1.5);
    if j_h_upper >= j_l_lower || j_l_lower.is_nan() {
        return Err(Error::SeparationViolated {
            b1,
            b2,
            group_size,
            j_h_upper,
            j_l_lower,
        });
    }
    let j_h_lower = if group_size.is_multiple_of(2) { 0.0 } else { 1.0 };
    Ok(RegimeIntervals {
        b1,
        b2,
        d_high: constants.d_high,
        d_low: constants.d_low,
        group_size,
        j_h_lower,
        j_h_upper,
        j_l_lower,
    })
}

impl RegimeIntervals {
    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    pub fn group_size(&self) -> u64 {
        self.group_size
    }

    pub fn constants(&self) -> ErrorConstants {
        ErrorConstants {
            d_high: self.d_high,
            d_low: self.d_low,
        }
    }

    /// Lower end of J_h, i.e. the smallest attainable S^2.
    pub fn j_h_lower(&self) -> f64 {
        self.j_h_lower
    }

    pub fn j_h_upper(&self) -> f64 {
        self.j_h_upper
    }

    pub fn j_l_lower(&self) -> f64 {
        self.j_l_lower
    }

    /// Regime of a nonnegative coupling: I_h and I_l are closed, the gap
    /// between them is the critical window.
    pub fn classify_coupling(&self, beta: f64) -> Result<RegimeLabel> {
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::invalid(format!(
                "coupling classification needs beta >= 0, got {beta}"
            )));
        }
        Ok(if beta <= self.b1 {
            RegimeLabel::HighTemp
        } else if beta < self.b2 {
            RegimeLabel::Critical
        } else {
            RegimeLabel::LowTemp
        })
    }

    /// Regime of a statistic value. J_h and J_l are closed on the sides
    /// facing the gap, so boundary values resolve away from `Critical`.
    pub fn classify_statistic(&self, t: f64) -> RegimeLabel {
        if t <= self.j_h_upper {
            RegimeLabel::HighTemp
        } else if t < self.j_l_lower {
            RegimeLabel::Critical
        } else {
            RegimeLabel::LowTemp
        }
    }

    /// Large-population value of E S^2 / N^2 as a function of the coupling:
    /// `1/((1-beta) N)` below b1, `m(beta)^2` above b2, 0 at `-inf`.
    /// Couplings in the critical gap are out of domain.
    pub fn theta_inf(&self, beta: f64) -> Result<f64> {
        if beta.is_nan() {
            return Err(Error::invalid("coupling must not be NaN"));
        }
        if beta == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let n = self.group_size as f64;
        if beta <= self.b1 {
            Ok(1.0 / ((1.0 - beta) * n))
        } else if beta >= self.b2 {
            let m = cw::magnetization(beta)?;
            Ok(m * m)
        } else {
            Err(Error::OutOfDomain {
                value: beta,
                gap_lo: self.b1,
                gap_hi: self.b2,
            })
        }
    }

    /// Gap of [`Self::theta_inf`]'s range: values of E S^2/N^2 unreachable outside
    /// the critical window.
    pub fn theta_gap(&self) -> (f64, f64) {
        let n = self.group_size as f64;
        let m_b2 = cw::magnetization(self.b2).expect("b2 validated at construction");
        (1.0 / ((1.0 - self.b1) * n), m_b2 * m_b2)
    }

    /// Inverse of [`Self::theta_inf`] on `[0, 1]` minus the open gap. The branch
    /// point at the low-temperature end maps to b2 (that side is closed);
    /// y = 0 maps to `-inf` and y = 1 to `+inf`.
    pub fn theta_inf_inverse(&self, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfRange {
                value: y,
                min: 0.0,
                max: 1.0,
            });
        }
        let (gap_lo, gap_hi) = self.theta_gap();
        if y == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if y <= gap_lo {
            let n = self.group_size as f64;
            return Ok(1.0 - 1.0 / (y * n));
        }
        if y >= gap_hi {
            if y >= 1.0 {
                return Ok(f64::INFINITY);
            }
            return cw::magnetization_inverse(y.sqrt());
        }
        Err(Error::OutOfDomain {
            value: y,
            gap_lo,
            gap_hi,
        })
    }

    /// Derivative of [`Self::theta_inf_inverse`]; on the low-temperature branch it
    /// equals `1 / (m'(m^{-1}(sqrt y)) 2 sqrt y)`.
    pub fn theta_inf_inverse_prime(&self, y: f64) -> Result<f64> {
        let (gap_lo, gap_hi) = self.theta_gap();
        if y > 0.0 && y <= gap_lo {
            let n = self.group_size as f64;
            return Ok(1.0 / (y * y * n));
        }
        if y >= gap_hi && y < 1.0 {
            let root = y.sqrt();
            let beta = cw::magnetization_inverse(root)?;
            return Ok(1.0 / (cw::magnetization_prime(beta)? * 2.0 * root));
        }
        Err(Error::OutOfDomain {
            value: y,
            gap_lo,
            gap_hi,
        })
    }

    /// Large-population optimal council weight as a function of the
    /// coupling: `sqrt(2/pi) sqrt(1/(1-beta)) sqrt(N)` below b1,
    /// `m(beta) N` above b2, 0 at `-inf`.
    pub fn psi_inf(&self, beta: f64) -> Result<f64> {
        if beta.is_nan() {
            return Err(Error::invalid("coupling must not be NaN"));
        }
        if beta == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let n = self.group_size as f64;
        if beta <= self.b1 {
            Ok((2.0 / std::f64::consts::PI).sqrt() * (1.0 / (1.0 - beta)).sqrt() * n.sqrt())
        } else if beta >= self.b2 {
            Ok(cw::magnetization(beta)? * n)
        } else {
            Err(Error::OutOfDomain {
                value: beta,
                gap_lo: self.b1,
                gap_hi: self.b2,
            })
        }
    }

    /// Range of [`Self::psi_inf`] over each branch: `(high branch max, low branch
    /// min, low branch sup)`. Under separation the high max sits strictly
    /// below the low min.
    pub fn psi_branch_bounds(&self) -> (f64, f64, f64) {
        let n = self.group_size as f64;
        let high_max = (2.0 / std::f64::consts::PI).sqrt()
            * (1.0 / (1.0 - self.b1)).sqrt()
            * n.sqrt();
        let m_b2 = cw::magnetization(self.b2).expect("b2 validated at construction");
        (high_max, m_b2 * n, n)
    }
}

/// Large-population approximation of the even moment E S^{2k}:
/// `(2k-1)!! (1/(1-beta))^k N^k` below criticality, `m(beta)^{2k} N^{2k}`
/// above. The critical coupling is rejected; the two expressions overlap
/// there and neither applies.
pub fn approx_moment(beta: f64, group_size: u64, k: u32) -> Result<f64> {
    if beta == 1.0 {
        return Err(Error::invalid("approximation undefined at the critical coupling"));
    }
    if k == 0 {
        return Err(Error::invalid("moment order k must be >= 1"));
    }
    let n = group_size as f64;
    if beta < 1.0 {
        Ok(double_factorial(2 * k as i64 - 1) * (1.0 / (1.0 - beta)).powi(k as i32) * n.powi(k as i32))
    } else {
        let m = cw::magnetization(beta)?;
        Ok(m.powi(2 * k as i32) * n.powi(2 * k as i32))
    }
}

/// Large-population approximation of the correlation E X_1 ... X_k:
/// zero for odd k; `(k-1)!! (beta/(1-beta))^{k/2} N^{-k/2}` below
/// criticality and `m(beta)^k` above it for even k.
pub fn approx_correlation(beta: f64, group_size: u64, k: u32) -> Result<f64> {
    if beta == 1.0 {
        return Err(Error::invalid("approximation undefined at the critical coupling"));
    }
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let n = group_size as f64;
    if beta < 1.0 {
        let ratio = beta / (1.0 - beta);
        Ok(double_factorial(k as i64 - 1) * ratio.powi(k as i32 / 2) / n.powi(k as i32 / 2))
    } else {
        Ok(cw::magnetization(beta)?.powi(k as i32))
    }
}

/// Envelope on the approximation error of the normalized moment:
/// `D_high / sqrt(N)` bounds |E S^{2k}/N^k - approx/N^k| below criticality,
/// `D_low (ln N)^{3/2} / sqrt(N)` bounds |E S^{2k}/N^{2k} - approx/N^{2k}|
/// above it. Constants are calibrated for k = 1.
pub fn moment_error_envelope(
    constants: ErrorConstants,
    beta: f64,
    group_size: u64,
    k: u32,
) -> Result<f64> {
    if beta == 1.0 {
        return Err(Error::invalid("approximation undefined at the critical coupling"));
    }
    if k == 0 {
        return Err(Error::invalid("moment order k must be >= 1"));
    }
    ErrorConstants::new(constants.d_high, constants.d_low)?;
    let n = group_size as f64;
    if beta < 1.0 {
        Ok(constants.d_high / n.sqrt())
    } else {
        Ok(constants.d_low * n.ln().powf(1.5) / n.sqrt())
    }
}
