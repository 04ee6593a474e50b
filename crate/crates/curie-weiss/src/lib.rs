//! Multi-group Curie-Weiss voting model.
//!
//! The crate covers the full estimation pipeline for the coupling parameters
//! of a population of M non-interacting voter groups:
//!
//! - [`model`]: exact margin laws, partition functions, moments, and an
//!   inverse-CDF sampler, all O(N) per group via exchangeability;
//! - [`cw`]: the Curie-Weiss equation `tanh(beta x) = x`, its largest
//!   solution m(beta), derivative, and inverse;
//! - [`regimes`]: high/critical/low-temperature intervals, the separation
//!   condition, large-population moment approximations with calibrated error
//!   envelopes, and the link functions between couplings, statistics, and
//!   council weights;
//! - [`estimator`]: the sufficient statistic T, the approximation-based
//!   estimator of the coupling (with its inconclusive gap), the exact-moment
//!   MLE, and pseudo-true values;
//! - [`ldp`]: cumulant generating functions, Legendre transforms, Chernoff
//!   misidentification bounds, asymptotic-normality confidence intervals,
//!   large-deviations rate functions, and the sample-size planner;
//! - [`weights`]: council votes, the democracy deficit, exact and asymptotic
//!   optimal two-tier voting weights, and baselines;
//! - [`oracle`]: independent ground-truth routes (exhaustive enumeration and
//!   quadrature) used by tests and calibration;
//! - [`study`]: a reproducible Monte Carlo study harness.
//!
//! # Example
//!
//! Simulate a two-group population and estimate the couplings back:
//!
//! ```
//! use curie_weiss::estimator::{self, ReportOptions};
//! use curie_weiss::model::{self, ModelSpec};
//! use curie_weiss::regimes::{ErrorConstants, DEFAULT_B1, DEFAULT_B2};
//!
//! let spec = ModelSpec::new(vec![500, 500], vec![0.5, 2.0]).unwrap();
//! let sample = model::sample(&spec, 2000, 7).unwrap();
//! let report = estimator::build_report(
//!     &sample,
//!     DEFAULT_B1,
//!     DEFAULT_B2,
//!     *ErrorConstants::default_calibrated(),
//!     "default",
//!     &ReportOptions::default(),
//! )
//! .unwrap();
//! assert!(!report.any_inconclusive);
//! assert!((report.groups[0].estimate.value().unwrap() - 0.5).abs() < 0.1);
//! assert!((report.groups[1].estimate.value().unwrap() - 2.0).abs() < 0.1);
//! ```

pub mod cw;
pub mod error;
pub mod estimator;
pub mod ldp;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod regimes;
pub mod study;
pub mod weights;

pub use error::{Error, Result};
pub use estimator::Estimate;
pub use model::{MagnetizationDistribution, ModelSpec, VotingSample};
pub use regimes::{ErrorConstants, RegimeIntervals, RegimeLabel};
