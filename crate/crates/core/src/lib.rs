//! Adverse-event risk estimation for time-to-first-event data with censoring
//! and competing events.
//!
//! The crate bundles six one-sample estimators of the cumulative AE
//! probability (incidence proportion, two probability transforms of the
//! incidence density, one minus Kaplan-Meier, and the Aalen-Johansen
//! estimator under two competing-event definitions), a patient-level
//! bootstrap for log-ratios against the Aalen-Johansen gold standard, a
//! random-effects meta-analysis / meta-regression for pooling those ratios,
//! SmPC frequency categories, and a competing-risks simulator with
//! closed-form truth.
//!
//! All numerical code is generic over [`Real`]; the aliases below fix the
//! scalar to `f64` (the default for analysis) or `f32`.

pub mod bootstrap;
pub mod categories;
pub mod error;
pub mod estimators;
pub mod meta;
mod real;
pub mod simulator;
pub mod trial_data;

pub use error::{Error, Result};
pub use real::Real;

pub use bootstrap::{BootstrapConfig, DegenerateReport, Reference};
pub use categories::{categorize, crosstab, CategoryCrosstab, FrequencyCategory};
pub use estimators::{CeScope, EventDefinition, Estimator};
pub use meta::{Covariate, MetaOptions, Tau2Method};
pub use simulator::{Censoring, Hazard, SimulationConfig};
pub use trial_data::{Arm, EventClass, QuantileSpec};

pub type PatientRecordF64 = trial_data::PatientRecord<f64>;
pub type PatientRecordF32 = trial_data::PatientRecord<f32>;
pub type AnalysisDatasetF64 = trial_data::AnalysisDataset<f64>;
pub type AnalysisDatasetF32 = trial_data::AnalysisDataset<f32>;
pub type EvaluationTimeF64 = trial_data::EvaluationTime<f64>;
pub type EventFrequenciesF64 = trial_data::EventFrequencies<f64>;
pub type StepCurveF64 = estimators::StepCurve<f64>;
pub type EstimateSetF64 = estimators::EstimateSet<f64>;
pub type EstimateSetF32 = estimators::EstimateSet<f32>;
pub type RatioEstimateF64 = bootstrap::RatioEstimate<f64>;
pub type AggregateRecordF64 = meta::AggregateRecord<f64>;
pub type MetaFitF64 = meta::MetaFit<f64>;
pub type MetaFitF32 = meta::MetaFit<f32>;
