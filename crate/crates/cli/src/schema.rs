//! The aggregate file: the only artifact that leaves a trial site.
//!
//! It carries per-(trial, AE type, evaluation time, arm) summaries. Patient
//! identifiers and individual times never appear.

use std::path::Path;

use aerisk_core::meta::Covariates;
use aerisk_core::{AggregateRecordF64, Arm, CeScope, Estimator, QuantileSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::num::Num;

pub const SCHEMA_VERSION: u32 = 1;

pub fn producer() -> String {
    format!("aerisk {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateFile {
    pub schema_version: u32,
    pub produced_at: String,
    pub settings: Settings,
    pub units: Vec<Unit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub taus: Vec<QuantileSpec>,
    pub ce_scope: CeScope,
    pub bootstrap: usize,
    pub seed: u64,
    pub z: Num,
}

/// One (trial, AE type, evaluation time) analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Unit {
    pub trial_id: String,
    pub ae_type: String,
    pub tau_spec: QuantileSpec,
    pub tau_days: Num,
    pub arms: Vec<ArmBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    RatioUndefined,
    InsufficientReplicates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmBlock {
    pub arm: Arm,
    pub n: usize,
    pub status: Status,
    pub estimates: Estimates,
    pub frequencies: Frequencies,
    pub covariates: CovariateBlock,
    pub ratios: Vec<RatioBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Estimates {
    pub ip: Num,
    pub pt_id_ignore_ce: Num,
    pub one_minus_km: Num,
    pub pt_id_account_ce: Num,
    pub aje_death_only: Num,
    pub aje_gold: Num,
    pub aje_gold_ce: Num,
    pub id_ae_per_day: Num,
    pub id_ce_per_day: Num,
    pub composite_ip: Num,
    pub composite_one_minus_km: Num,
}

impl Estimates {
    pub fn get(&self, estimator: Estimator) -> f64 {
        match estimator {
            Estimator::IncidenceProportion => self.ip.0,
            Estimator::ProbTransformIgnoringCe => self.pt_id_ignore_ce.0,
            Estimator::OneMinusKaplanMeier => self.one_minus_km.0,
            Estimator::ProbTransformAccountingCe => self.pt_id_account_ce.0,
            Estimator::AalenJohansenDeathOnly => self.aje_death_only.0,
            Estimator::AalenJohansen => self.aje_gold.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frequencies {
    pub frac_ae: Num,
    pub frac_death: Num,
    pub frac_other_ce: Num,
    pub frac_censored: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateBlock {
    pub pct_censoring: Num,
    pub pct_ce: Num,
    pub aj_probability: Num,
    pub eval_time_years: Num,
}

impl CovariateBlock {
    pub fn to_covariates(&self) -> Covariates<f64> {
        Covariates {
            pct_censoring: self.pct_censoring.0,
            pct_ce: self.pct_ce.0,
            aj_probability: self.aj_probability.0,
            eval_time_years: self.eval_time_years.0,
        }
    }
}

/// Log-ratio of one estimator to the gold standard. Numbers are null when
/// the status is not `ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioBlock {
    pub estimator: Estimator,
    pub status: Status,
    pub ratio: Num,
    pub log_ratio: Num,
    pub se_log_ratio: Num,
    pub ci_low: Num,
    pub ci_high: Num,
    pub replicates: usize,
    pub replicates_used: usize,
    pub dropped_fraction: Num,
}

impl AggregateFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("aggregate file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let probe: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::input(format!("invalid JSON: {e}")))?;
        match probe.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(CliError::input(format!(
                    "schema version {v} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(CliError::input("missing schema_version")),
        }
        serde_json::from_value(probe).map_err(|e| CliError::input(format!("aggregate file: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    /// Meta-analysis records for every `ok` ratio. Usability filtering is
    /// left to the caller.
    pub fn records(&self) -> Vec<AggregateRecordF64> {
        let mut out = Vec::new();
        for unit in &self.units {
            for arm in &unit.arms {
                for r in arm.ratios.iter().filter(|r| r.status == Status::Ok) {
                    let mut rec = AggregateRecordF64::new(r.log_ratio.0, r.se_log_ratio.0)
                        .with_covariates(arm.covariates.to_covariates());
                    rec.trial_id = unit.trial_id.clone();
                    rec.ae_type = unit.ae_type.clone();
                    rec.arm = arm.arm;
                    rec.estimator = r.estimator;
                    rec.dropped_fraction = r.dropped_fraction.0;
                    out.push(rec);
                }
            }
        }
        out
    }
}

/// Read several aggregate files; all must share one schema version.
pub fn read_all(paths: &[impl AsRef<Path>]) -> Result<Vec<AggregateFile>, CliError> {
    if paths.is_empty() {
        return Err(CliError::input("no aggregate files given"));
    }
    paths.iter().map(|p| AggregateFile::read(p.as_ref())).collect()
}
