//! Per-trial stage: estimates, frequencies, covariates and bootstrapped
//! log-ratios for every (trial, AE type, evaluation time, arm).

use aerisk_core::bootstrap::{bootstrap_log_ratios, BootstrapConfig, DEFAULT_REPLICATES, Z_95};
use aerisk_core::trial_data::{evaluation_time, event_frequencies, DAYS_PER_YEAR};
use aerisk_core::{AnalysisDatasetF64, Arm, CeScope, Error, Estimator, QuantileSpec, Reference};
use rayon::prelude::*;

use crate::error::CliError;
use crate::num::Num;
use crate::schema::{
    producer, AggregateFile, ArmBlock, CovariateBlock, Estimates, Frequencies, RatioBlock, Settings, Status, Unit,
    SCHEMA_VERSION,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub taus: Vec<QuantileSpec>,
    pub ce_scope: CeScope,
    pub bootstrap: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            taus: vec![QuantileSpec::MaxFollowUp],
            ce_scope: CeScope::AllCe,
            bootstrap: DEFAULT_REPLICATES,
            seed: 1,
            parallel: true,
        }
    }
}

/// FNV-1a over the unit key, mixed into the user seed. Each unit gets its
/// own replicate streams regardless of processing order.
fn unit_seed(seed: u64, trial_id: &str, ae_type: &str, arm: Arm) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in trial_id
        .bytes()
        .chain([0])
        .chain(ae_type.bytes())
        .chain([0])
        .chain(arm.as_str().bytes())
    {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ seed.rotate_left(32)
}

fn analyze_arm(ds: &AnalysisDatasetF64, arm: Arm, tau: f64, opts: &AnalyzeOptions) -> Result<ArmBlock, CliError> {
    let est = aerisk_core::estimators::estimate_all(ds, arm, tau)?;
    let freq = event_frequencies(ds, arm, tau)?;
    let max_observed = ds
        .arm_records(arm)
        .map(|r| r.time.min(tau))
        .fold(0.0_f64, f64::max);

    let cfg = BootstrapConfig {
        parallel: opts.parallel,
        ..BootstrapConfig::new(opts.bootstrap, unit_seed(opts.seed, &ds.trial_id, &ds.ae_type, arm))
    };
    let slots = bootstrap_log_ratios(ds, arm, tau, &Estimator::COMPARISONS, Reference::GoldStandard, &cfg)?;
    let ratios = Estimator::COMPARISONS
        .iter()
        .zip(slots)
        .map(|(&estimator, slot)| match slot {
            Ok(r) => Ok(RatioBlock {
                estimator,
                status: Status::Ok,
                ratio: Num(r.ratio()),
                log_ratio: Num(r.log_ratio),
                se_log_ratio: Num(r.se_log_ratio),
                ci_low: Num(r.ci_low),
                ci_high: Num(r.ci_high),
                replicates: r.replicates,
                replicates_used: r.n_replicates_used,
                dropped_fraction: Num(r.degenerate_report().fraction),
            }),
            Err(e @ (Error::RatioUndefined(_) | Error::InsufficientReplicates { .. })) => {
                let status = if matches!(e, Error::RatioUndefined(_)) {
                    Status::RatioUndefined
                } else {
                    Status::InsufficientReplicates
                };
                Ok(RatioBlock {
                    estimator,
                    status,
                    ratio: Num(f64::NAN),
                    log_ratio: Num(f64::NAN),
                    se_log_ratio: Num(f64::NAN),
                    ci_low: Num(f64::NAN),
                    ci_high: Num(f64::NAN),
                    replicates: opts.bootstrap,
                    replicates_used: 0,
                    dropped_fraction: Num(f64::NAN),
                })
            }
            Err(e) => Err(CliError::from(e)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let status = if est.aje_gold <= 0.0 {
        Status::RatioUndefined
    } else {
        Status::Ok
    };

    Ok(ArmBlock {
        arm,
        n: est.n,
        status,
        estimates: Estimates {
            ip: Num(est.ip),
            pt_id_ignore_ce: Num(est.pt_id_ignore_ce),
            one_minus_km: Num(est.one_minus_km),
            pt_id_account_ce: Num(est.pt_id_account_ce),
            aje_death_only: Num(est.aje_death_only),
            aje_gold: Num(est.aje_gold),
            aje_gold_ce: Num(est.aje_gold_ce),
            id_ae_per_day: Num(est.id_ae),
            id_ce_per_day: Num(est.id_ce),
            composite_ip: Num(est.composite_ip),
            composite_one_minus_km: Num(est.composite_one_minus_km),
        },
        frequencies: Frequencies {
            frac_ae: Num(freq.frac_ae),
            frac_death: Num(freq.frac_death),
            frac_other_ce: Num(freq.frac_other_ce),
            frac_censored: Num(freq.frac_censored),
        },
        covariates: CovariateBlock {
            pct_censoring: Num(100.0 * freq.frac_censored),
            pct_ce: Num(100.0 * freq.frac_ce()),
            aj_probability: Num(est.aje_gold),
            eval_time_years: Num(max_observed / DAYS_PER_YEAR),
        },
        ratios,
    })
}

fn analyze_unit(ds: &AnalysisDatasetF64, spec: QuantileSpec, opts: &AnalyzeOptions) -> Result<Unit, CliError> {
    let tau = evaluation_time(ds, spec)?.tau;
    let arms = [Arm::E, Arm::C]
        .into_iter()
        .filter(|&arm| ds.n(arm) > 0)
        .map(|arm| analyze_arm(ds, arm, tau, opts))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.context(&format!("{}/{}/{}", ds.trial_id, ds.ae_type, spec)))?;
    Ok(Unit {
        trial_id: ds.trial_id.clone(),
        ae_type: ds.ae_type.clone(),
        tau_spec: spec,
        tau_days: Num(tau),
        arms,
    })
}

/// Analyze every dataset at every requested evaluation time. Units are
/// ordered by (trial_id, ae_type, tau) whatever the processing order.
pub fn analyze(datasets: &[AnalysisDatasetF64], opts: &AnalyzeOptions) -> Result<AggregateFile, CliError> {
    if opts.taus.is_empty() {
        return Err(CliError::input("no evaluation time requested"));
    }
    let mut taus = opts.taus.clone();
    taus.sort();
    taus.dedup();
    let scoped: Vec<AnalysisDatasetF64> = datasets.iter().map(|d| d.with_scope(opts.ce_scope)).collect();
    let jobs: Vec<(&AnalysisDatasetF64, QuantileSpec)> =
        scoped.iter().flat_map(|d| taus.iter().map(move |&q| (d, q))).collect();

    // collect everything first so the reported error is the first in job order
    let results: Vec<Result<Unit, CliError>> = if opts.parallel {
        jobs.par_iter().map(|&(d, q)| analyze_unit(d, q, opts)).collect()
    } else {
        jobs.iter().map(|&(d, q)| analyze_unit(d, q, opts)).collect()
    };
    let mut units = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    units.sort_by(|a, b| (&a.trial_id, &a.ae_type, a.tau_spec).cmp(&(&b.trial_id, &b.ae_type, b.tau_spec)));

    Ok(AggregateFile {
        schema_version: SCHEMA_VERSION,
        produced_at: producer(),
        settings: Settings {
            taus,
            ce_scope: opts.ce_scope,
            bootstrap: opts.bootstrap,
            seed: opts.seed,
            z: Num(Z_95),
        },
        units,
    })
}
