//! Patient-level bootstrap of log-ratios between an estimator and a reference.
//!
//! Replicate `r` draws from its own ChaCha stream `(seed, r)`, so the result
//! does not depend on how replicates are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{estimate_from_sorted, sorted_observations, EstimateSet, Estimator, Observation};
use crate::real::Real;
use crate::trial_data::{AnalysisDataset, Arm};

pub const DEFAULT_REPLICATES: usize = 999;
pub const Z_95: f64 = 1.96;
/// Records with a larger fraction of dropped replicates are unusable downstream.
pub const MAX_DROPPED_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Normal quantile for the log-scale interval.
    pub z: f64,
    pub parallel: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            z: Z_95,
            parallel: true,
        }
    }
}

impl BootstrapConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            ..Self::default()
        }
    }

    pub fn serial(mut self) -> Self {
        self.parallel = false;
        self
    }
}

/// Denominator of the ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference<T> {
    /// Aalen-Johansen (all competing events), recomputed on each replicate.
    GoldStandard,
    /// A fixed known probability, e.g. the simulation truth.
    Constant(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate<T> {
    pub estimator: Estimator,
    pub log_ratio: T,
    pub se_log_ratio: T,
    /// Ratio-scale interval `exp(log_ratio -/+ z * se)`.
    pub ci_low: T,
    pub ci_high: T,
    pub n_replicates_used: usize,
    pub dropped: usize,
    pub replicates: usize,
}

impl<T: Real> RatioEstimate<T> {
    pub fn ratio(&self) -> T {
        self.log_ratio.exp()
    }

    pub fn degenerate_report(&self) -> DegenerateReport {
        degenerate_policy_report(self.dropped, self.replicates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateReport {
    pub dropped: usize,
    pub replicates: usize,
    pub fraction: f64,
    pub usable: bool,
}

pub fn degenerate_policy_report(dropped: usize, replicates: usize) -> DegenerateReport {
    let fraction = if replicates == 0 {
        1.0
    } else {
        dropped as f64 / replicates as f64
    };
    DegenerateReport {
        dropped,
        replicates,
        fraction,
        usable: replicates - dropped.min(replicates) >= 2 && fraction <= MAX_DROPPED_FRACTION,
    }
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Resample the sorted observations with replacement; the result keeps the
/// time order and carries multiplicities as weights.
fn resample<T: Real>(obs: &[Observation<T>], rng: &mut ChaCha8Rng) -> Vec<Observation<T>> {
    let n = obs.len();
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    obs.iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(o, &c)| Observation {
            weight: T::from_u32(c).expect("count representable"),
            ..*o
        })
        .collect()
}

/// Estimate sets for every replicate, in replicate order.
pub fn replicate_estimates<T: Real>(
    dataset: &AnalysisDataset<T>,
    arm: Arm,
    tau: T,
    config: &BootstrapConfig,
) -> Result<Vec<EstimateSet<T>>> {
    if config.replicates < 2 {
        return Err(Error::InvalidBootstrap(format!(
            "need at least 2 replicates, got {}",
            config.replicates
        )));
    }
    let obs = sorted_observations(dataset, arm)?;
    let one = |r: usize| {
        let mut rng = replicate_rng(config.seed, r);
        estimate_from_sorted(&resample(&obs, &mut rng), tau)
    };
    if config.parallel {
        (0..config.replicates).into_par_iter().map(one).collect()
    } else {
        (0..config.replicates).map(one).collect()
    }
}

fn log_ratio_of<T: Real>(set: &EstimateSet<T>, estimator: Estimator, reference: Reference<T>) -> Option<T> {
    let num = set.get(estimator);
    let den = match reference {
        Reference::GoldStandard => set.aje_gold,
        Reference::Constant(p) => p,
    };
    (num > T::zero() && den > T::zero()).then(|| (num / den).ln())
}

fn summarize<T: Real>(
    estimator: Estimator,
    log_ratio: T,
    replicate_logs: &[Option<T>],
    z: T,
) -> Result<RatioEstimate<T>> {
    let valid: Vec<T> = replicate_logs.iter().flatten().copied().collect();
    let m = valid.len();
    if m < 2 {
        return Err(Error::InsufficientReplicates { valid: m });
    }
    let mean = valid.iter().fold(T::zero(), |a, &x| a + x) / T::from_count(m);
    let ss = valid.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean));
    let se = (ss / T::from_count(m - 1)).sqrt();
    Ok(RatioEstimate {
        estimator,
        log_ratio,
        se_log_ratio: se,
        ci_low: (log_ratio - z * se).exp(),
        ci_high: (log_ratio + z * se).exp(),
        n_replicates_used: m,
        dropped: replicate_logs.len() - m,
        replicates: replicate_logs.len(),
    })
}

/// Log-ratios of several estimators against one reference, sharing the
/// same bootstrap replicates. Errors particular to one estimator are
/// returned in its slot.
pub fn bootstrap_log_ratios<T: Real>(
    dataset: &AnalysisDataset<T>,
    arm: Arm,
    tau: T,
    estimators: &[Estimator],
    reference: Reference<T>,
    config: &BootstrapConfig,
) -> Result<Vec<Result<RatioEstimate<T>>>> {
    let original = crate::estimators::estimate_all(dataset, arm, tau)?;
    let gold_zero = matches!(reference, Reference::GoldStandard) && original.aje_gold <= T::zero();
    if gold_zero {
        return Ok(estimators
            .iter()
            .map(|_| Err(Error::RatioUndefined("Aalen-Johansen estimate is 0".into())))
            .collect());
    }
    let reps = replicate_estimates(dataset, arm, tau, config)?;
    let z = T::lit(config.z);
    Ok(estimators
        .iter()
        .map(|&est| {
            let lr = log_ratio_of(&original, est, reference).ok_or_else(|| {
                Error::RatioUndefined(format!("{} estimate is 0", est.id()))
            })?;
            let logs: Vec<Option<T>> = reps.iter().map(|s| log_ratio_of(s, est, reference)).collect();
            summarize(est, lr, &logs, z)
        })
        .collect())
}

pub fn bootstrap_log_ratio_against<T: Real>(
    dataset: &AnalysisDataset<T>,
    arm: Arm,
    tau: T,
    estimator: Estimator,
    reference: Reference<T>,
    config: &BootstrapConfig,
) -> Result<RatioEstimate<T>> {
    bootstrap_log_ratios(dataset, arm, tau, &[estimator], reference, config)?
        .pop()
        .expect("one estimator requested")
}

/// Log-ratio of `estimator` to the Aalen-Johansen gold standard.
pub fn bootstrap_log_ratio<T: Real>(
    dataset: &AnalysisDataset<T>,
    arm: Arm,
    tau: T,
    estimator: Estimator,
    config: &BootstrapConfig,
) -> Result<RatioEstimate<T>> {
    bootstrap_log_ratio_against(dataset, arm, tau, estimator, Reference::GoldStandard, config)
}
