//! Exact single-group and multi-group Curie-Weiss model.
//!
//! Spins are exchangeable, so the law of the group margin S determines every
//! group-local expectation. Everything here works on that N+1-point law:
//! weight(s) is proportional to `C(N, (N+s)/2) * exp(beta s^2 / (2N))`, kept
//! in the log domain so group sizes up to 1e7 cause no overflow. Moments are
//! direct weighted sums over the support, and sampling inverts the exact CDF,
//! so there is no Markov chain and no mixing-time question anywhere.

use rand::seq::SliceRandom;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, ln_choose, CompensatedSum};

/// Group sizes and couplings of a multi-group Curie-Weiss model.
///
/// Couplings may be negative; group sizes must be at least 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    group_sizes: Vec<u64>,
    couplings: Vec<f64>,
}

impl ModelSpec {
    pub fn new(group_sizes: Vec<u64>, couplings: Vec<f64>) -> Result<Self> {
        if group_sizes.is_empty() {
            return Err(Error::invalid("model needs at least one group"));
        }
        if group_sizes.len() != couplings.len() {
            return Err(Error::invalid(format!(
                "{} group sizes but {} couplings",
                group_sizes.len(),
                couplings.len()
            )));
        }
        if let Some(n) = group_sizes.iter().find(|&&n| n == 0) {
            return Err(Error::invalid(format!("group size must be >= 1, got {n}")));
        }
        if let Some(b) = couplings.iter().find(|b| !b.is_finite()) {
            return Err(Error::invalid(format!("coupling must be finite, got {b}")));
        }
        Ok(ModelSpec {
            group_sizes,
            couplings,
        })
    }

    /// Single-group convenience constructor.
    pub fn single(group_size: u64, coupling: f64) -> Result<Self> {
        Self::new(vec![group_size], vec![coupling])
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[u64] {
        &self.group_sizes
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Log partition function of the joint model; additive across groups
    /// because the groups do not interact.
    pub fn log_partition(&self) -> Result<f64> {
        let mut acc = 0.0;
        for (&n, &beta) in self.group_sizes.iter().zip(&self.couplings) {
            acc += log_partition(beta, n)?;
        }
        Ok(acc)
    }
}

/// Exact law of the margin S of one group: support {-N, -N+2, ..., N} with
/// log-weights `ln C(N,(N+s)/2) + beta s^2/(2N)` and their log-sum.
#[derive(Debug, Clone)]
pub struct MagnetizationDistribution {
    group_size: u64,
    log_weights: Vec<f64>,
    log_partition: f64,
}

impl MagnetizationDistribution {
    pub fn group_size(&self) -> u64 {
        self.group_size
    }

    /// Number of support points, always N+1.
    pub fn support_len(&self) -> usize {
        self.log_weights.len()
    }

    /// Margin value of support index `j`.
    pub fn margin_at(&self, j: usize) -> i64 {
        2 * j as i64 - self.group_size as i64
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.support_len()).map(|j| self.margin_at(j))
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// Normalized log-probability of margin `s`.
    pub fn log_prob(&self, s: i64) -> f64 {
        let n = self.group_size as i64;
        if s.abs() > n || (s - n) % 2 != 0 {
            return f64::NEG_INFINITY;
        }
        let j = ((s + n) / 2) as usize;
        self.log_weights[j] - self.log_partition
    }

    pub fn prob(&self, s: i64) -> f64 {
        self.log_prob(s).exp()
    }

    /// All probabilities in support order; sums to 1 up to rounding.
    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights
            .iter()
            .map(|lw| (lw - self.log_partition).exp())
            .collect()
    }

    /// E S^k over the exact law. Exactly zero for odd k by spin-flip symmetry.
    pub fn moment(&self, k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        let mut acc = CompensatedSum::default();
        for (j, lw) in self.log_weights.iter().enumerate() {
            let s = self.margin_at(j) as f64;
            acc.add((lw - self.log_partition).exp() * s.powi(k as i32));
        }
        acc.value()
    }

    /// E |S| over the exact law.
    pub fn abs_moment(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for (j, lw) in self.log_weights.iter().enumerate() {
            let s = self.margin_at(j) as f64;
            acc.add((lw - self.log_partition).exp() * s.abs());
        }
        acc.value()
    }

    /// V S^2, computed as a single centered pass to avoid cancellation.
    pub fn variance_s2(&self) -> f64 {
        let mu2 = self.moment(2);
        let mut acc = CompensatedSum::default();
        for (j, lw) in self.log_weights.iter().enumerate() {
            let s = self.margin_at(j) as f64;
            let d = s * s - mu2;
            acc.add((lw - self.log_partition).exp() * d * d);
        }
        acc.value().max(0.0)
    }

    /// P(S = 0); zero for odd N.
    pub fn prob_zero(&self) -> f64 {
        if !self.group_size.is_multiple_of(2) {
            0.0
        } else {
            self.prob(0)
        }
    }

    /// Smallest value of S^2 over the support: 0 for even N, 1 for odd N.
    pub fn min_squared_margin(&self) -> f64 {
        if self.group_size.is_multiple_of(2) {
            0.0
        } else {
            1.0
        }
    }
}

/// Build the exact margin law for one group.
pub fn magnetization_distribution(beta: f64, group_size: u64) -> Result<MagnetizationDistribution> {
    if group_size == 0 {
        return Err(Error::invalid("group size must be >= 1"));
    }
    if !beta.is_finite() {
        return Err(Error::invalid(format!("coupling must be finite, got {beta}")));
    }
    let n = group_size;
    let nf = n as f64;
    // fill the lower half and mirror: weight(s) = weight(-s) bit for bit
    let mut log_weights = vec![0.0; n as usize + 1];
    for j in 0..=(n / 2) {
        let s = 2.0 * j as f64 - nf;
        let lw = ln_choose(n, j) + beta * s * s / (2.0 * nf);
        log_weights[j as usize] = lw;
        log_weights[(n - j) as usize] = lw;
    }
    let log_partition = log_sum_exp(&log_weights);
    Ok(MagnetizationDistribution {
        group_size,
        log_weights,
        log_partition,
    })
}

/// ln Z for one group of size N at coupling beta.
pub fn log_partition(beta: f64, group_size: u64) -> Result<f64> {
    Ok(magnetization_distribution(beta, group_size)?.log_partition())
}

/// E S^k for one group; exactly zero for odd k.
pub fn exact_moment(beta: f64, group_size: u64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("moment order k must be >= 1"));
    }
    Ok(magnetization_distribution(beta, group_size)?.moment(k))
}

/// E |S| for one group.
pub fn exact_abs_moment(beta: f64, group_size: u64) -> Result<f64> {
    Ok(magnetization_distribution(beta, group_size)?.abs_moment())
}

/// V S^2 = E S^4 - (E S^2)^2 for one group.
pub fn variance_s2(beta: f64, group_size: u64) -> Result<f64> {
    Ok(magnetization_distribution(beta, group_size)?.variance_s2())
}

/// A sample of n observations of the group margins, one row per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingSample {
    group_sizes: Vec<u64>,
    /// margins[t][g] = margin of group g in observation t
    margins: Vec<Vec<i64>>,
}

impl VotingSample {
    /// Validates the parity and range invariants |s| <= N, s = N (mod 2).
    pub fn new(group_sizes: Vec<u64>, margins: Vec<Vec<i64>>) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::invalid("sample needs at least one observation"));
        }
        for (t, row) in margins.iter().enumerate() {
            if row.len() != group_sizes.len() {
                return Err(Error::invalid(format!(
                    "observation {t} has {} margins, expected {}",
                    row.len(),
                    group_sizes.len()
                )));
            }
            for (g, (&s, &n)) in row.iter().zip(&group_sizes).enumerate() {
                let n = n as i64;
                if s.abs() > n || (s - n) % 2 != 0 {
                    return Err(Error::invalid(format!(
                        "observation {t}, group {g}: margin {s} invalid for group size {n}"
                    )));
                }
            }
        }
        Ok(VotingSample {
            group_sizes,
            margins,
        })
    }

    pub fn num_observations(&self) -> usize {
        self.margins.len()
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[u64] {
        &self.group_sizes
    }

    pub fn margins(&self) -> &[Vec<i64>] {
        &self.margins
    }
}

/// Inverse-CDF sampler over one group's exact margin law.
struct MarginSampler {
    group_size: u64,
    cdf: Vec<f64>,
}

impl MarginSampler {
    fn new(dist: &MagnetizationDistribution) -> Self {
        let mut cdf = dist.probabilities();
        let mut acc = 0.0;
        for c in cdf.iter_mut() {
            acc += *c;
            *c = acc;
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        MarginSampler {
            group_size: dist.group_size(),
            cdf,
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> i64 {
        let u: f64 = rng.random();
        let j = self.cdf.partition_point(|&c| c <= u);
        2 * j as i64 - self.group_size as i64
    }
}

/// Per-observation RNG: one ChaCha stream per observation index, so parallel
/// generation is deterministic and independent of scheduling.
fn observation_rng(seed: u64, observation: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(observation as u64);
    rng
}

/// Draw n i.i.d. observations of the group margins from the exact laws.
/// Deterministic given the seed.
pub fn sample(spec: &ModelSpec, n_observations: usize, seed: u64) -> Result<VotingSample> {
    if n_observations == 0 {
        return Err(Error::invalid("sample size n must be >= 1"));
    }
    let samplers: Vec<MarginSampler> = spec
        .group_sizes()
        .iter()
        .zip(spec.couplings())
        .map(|(&n, &beta)| Ok(MarginSampler::new(&magnetization_distribution(beta, n)?)))
        .collect::<Result<_>>()?;

    let margins: Vec<Vec<i64>> = (0..n_observations)
        .into_par_iter()
        .map(|t| {
            let mut rng = observation_rng(seed, t);
            samplers.iter().map(|s| s.draw(&mut rng)).collect()
        })
        .collect();

    Ok(VotingSample {
        group_sizes: spec.group_sizes().to_vec(),
        margins,
    })
}

/// As [`sample`], additionally materializing raw spin vectors: for each
/// observation and group, (N+S)/2 positive spins are placed uniformly at
/// random. `spins[t][g][i]` is the i-th voter's spin. The margins of the
/// returned sample equal the spin sums by construction.
pub fn sample_with_spins(
    spec: &ModelSpec,
    n_observations: usize,
    seed: u64,
) -> Result<(VotingSample, Vec<Vec<Vec<i8>>>)> {
    let sample = sample(spec, n_observations, seed)?;
    let spins: Vec<Vec<Vec<i8>>> = sample
        .margins()
        .par_iter()
        .enumerate()
        .map(|(t, row)| {
            let mut rng = observation_rng(seed, t);
            // skip the margin draws so spin placement continues the stream
            for _ in 0..row.len() {
                let _: f64 = rng.random();
            }
            row.iter()
                .zip(spec.group_sizes())
                .map(|(&s, &n)| {
                    let k_plus = ((n as i64 + s) / 2) as usize;
                    let mut v = vec![-1i8; n as usize];
                    for spin in v.iter_mut().take(k_plus) {
                        *spin = 1;
                    }
                    v.shuffle(&mut rng);
                    v
                })
                .collect()
        })
        .collect();
    Ok((sample, spins))
}
