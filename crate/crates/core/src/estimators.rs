//! One-sample estimators of the cumulative AE probability.
//!
//! Every estimator is evaluated at an evaluation time `tau` (days) for one
//! arm. Records observed after `tau` are treated as censored at `tau`.
//!
//! The product-limit style estimators share one sweep over the distinct
//! observed times. At a tied time all events (AE and competing) use the same
//! risk set and the same left limit of the all-cause survival; censorings at
//! that time are removed from the risk set afterwards.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
pub use crate::trial_data::CeScope;
use crate::trial_data::{AnalysisDataset, Arm, EventClass};

/// Event definition for the product-limit estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventDefinition {
    /// Only AEs are events; competing events are censored.
    AeOnly,
    /// AE or competing event, whichever comes first.
    Composite,
}

/// Event type counted by the incidence density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DensityTarget {
    Ae,
    Ce,
}

/// The AE-probability estimators compared against the Aalen-Johansen gold standard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[serde(rename = "ip")]
    IncidenceProportion,
    #[serde(rename = "pt_id_ignore_ce")]
    ProbTransformIgnoringCe,
    #[serde(rename = "one_minus_km")]
    OneMinusKaplanMeier,
    #[serde(rename = "pt_id_account_ce")]
    ProbTransformAccountingCe,
    #[serde(rename = "aje_death_only")]
    AalenJohansenDeathOnly,
    #[serde(rename = "aje_gold")]
    AalenJohansen,
}

impl Estimator {
    /// The five estimators that are compared with [`Estimator::AalenJohansen`].
    pub const COMPARISONS: [Estimator; 5] = [
        Estimator::IncidenceProportion,
        Estimator::ProbTransformIgnoringCe,
        Estimator::OneMinusKaplanMeier,
        Estimator::ProbTransformAccountingCe,
        Estimator::AalenJohansenDeathOnly,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Estimator::IncidenceProportion => "ip",
            Estimator::ProbTransformIgnoringCe => "pt_id_ignore_ce",
            Estimator::OneMinusKaplanMeier => "one_minus_km",
            Estimator::ProbTransformAccountingCe => "pt_id_account_ce",
            Estimator::AalenJohansenDeathOnly => "aje_death_only",
            Estimator::AalenJohansen => "aje_gold",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::COMPARISONS
            .into_iter()
            .chain([Estimator::AalenJohansen])
            .find(|e| e.id() == s)
    }

    pub fn label(self) -> &'static str {
        match self {
            Estimator::IncidenceProportion => "IP",
            Estimator::ProbTransformIgnoringCe => "prob trans incid dens ignoring CE",
            Estimator::OneMinusKaplanMeier => "1-KM",
            Estimator::ProbTransformAccountingCe => "prob trans incid dens acc for CE",
            Estimator::AalenJohansenDeathOnly => "AJE death only",
            Estimator::AalenJohansen => "AJE",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// Non-increasing from 1.
    Survival,
    /// Non-decreasing from 0.
    Incidence,
}

/// Right-continuous step function on `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCurve<T> {
    pub kind: CurveKind,
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> StepCurve<T> {
    fn new(kind: CurveKind) -> Self {
        Self {
            kind,
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn initial(&self) -> T {
        match self.kind {
            CurveKind::Survival => T::one(),
            CurveKind::Incidence => T::zero(),
        }
    }

    pub fn value_at(&self, t: T) -> T {
        let idx = self.times.partition_point(|&x| x <= t);
        if idx == 0 {
            self.initial()
        } else {
            self.values[idx - 1]
        }
    }

    /// Checks the ordering and range invariants of the curve.
    pub fn is_valid(&self) -> bool {
        let sorted = self.times.windows(2).all(|w| w[0] < w[1]);
        let in_range = self.values.iter().all(|&v| v >= T::zero() && v <= T::one());
        let mut prev = self.initial();
        let monotone = self.values.iter().all(|&v| {
            let ok = match self.kind {
                CurveKind::Survival => v <= prev,
                CurveKind::Incidence => v >= prev,
            };
            prev = v;
            ok
        });
        sorted && in_range && monotone && self.times.len() == self.values.len()
    }

    fn push(&mut self, t: T, v: T) {
        self.times.push(t);
        self.values.push(v);
    }
}

/// One minus Kaplan-Meier at `tau` together with the survival curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLimit<T> {
    pub estimate: T,
    pub survival: StepCurve<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AalenJohansen<T> {
    pub cif_ae: T,
    pub cif_ce: T,
    pub curve_ae: StepCurve<T>,
    pub curve_ce: StepCurve<T>,
}

/// All estimates for one arm at one evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSet<T> {
    pub tau: T,
    pub n: usize,
    pub ip: T,
    pub pt_id_ignore_ce: T,
    pub one_minus_km: T,
    pub pt_id_account_ce: T,
    pub aje_death_only: T,
    pub aje_gold: T,
    /// Competing-event CIF of the gold-standard estimator.
    pub aje_gold_ce: T,
    /// AE incidence density, per day.
    pub id_ae: T,
    /// Competing-event incidence density, per day.
    pub id_ce: T,
    pub composite_ip: T,
    pub composite_one_minus_km: T,
}

impl<T: Real> EstimateSet<T> {
    pub fn get(&self, estimator: Estimator) -> T {
        match estimator {
            Estimator::IncidenceProportion => self.ip,
            Estimator::ProbTransformIgnoringCe => self.pt_id_ignore_ce,
            Estimator::OneMinusKaplanMeier => self.one_minus_km,
            Estimator::ProbTransformAccountingCe => self.pt_id_account_ce,
            Estimator::AalenJohansenDeathOnly => self.aje_death_only,
            Estimator::AalenJohansen => self.aje_gold,
        }
    }
}

/// Probability transform of an AE incidence density, ignoring competing events.
pub fn transform_ignoring_ce<T: Real>(id_ae: T, tau: T) -> T {
    T::one_minus_exp_neg(id_ae * tau)
}

/// Probability transform of AE and competing incidence densities.
/// Returns 0 when both densities vanish.
pub fn transform_accounting_ce<T: Real>(id_ae: T, id_ce: T, tau: T) -> T {
    let total = id_ae + id_ce;
    if total <= T::zero() {
        return T::zero();
    }
    if id_ce == T::zero() {
        return transform_ignoring_ce(id_ae, tau);
    }
    id_ae / total * T::one_minus_exp_neg(tau * total)
}

/// One observation ready for the sweep: `weight` copies of (time, class).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Observation<T> {
    pub time: T,
    pub class: EventClass,
    pub weight: T,
}

/// Observations of one arm sorted by time.
pub(crate) fn sorted_observations<T: Real>(
    dataset: &AnalysisDataset<T>,
    arm: Arm,
) -> Result<Vec<Observation<T>>> {
    let mut obs: Vec<Observation<T>> = dataset
        .arm_records(arm)
        .map(|r| Observation {
            time: r.time,
            class: r.event,
            weight: T::one(),
        })
        .collect();
    if obs.is_empty() {
        return Err(Error::EmptyArm(arm.as_str()));
    }
    obs.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite times"));
    Ok(obs)
}

#[derive(Debug, Clone)]
struct Curves<T> {
    km_ae: StepCurve<T>,
    km_all: StepCurve<T>,
    aj_ae: StepCurve<T>,
    aj_ce: StepCurve<T>,
    aj_do_ae: StepCurve<T>,
    aj_do_ce: StepCurve<T>,
}

/// Raw sums from one pass over sorted observations.
#[derive(Debug, Clone)]
struct Sweep<T> {
    n: T,
    n_obs: usize,
    d_ae: T,
    d_death: T,
    d_other: T,
    at_risk_time: T,
    km_ae: T,
    km_all: T,
    // 1 - survival, accumulated from increments so that it orders exactly
    // against the Aalen-Johansen sums in floating point
    km_ae_cum: T,
    km_all_cum: T,
    aj_ae: T,
    aj_ce: T,
    aj_do_ae: T,
    aj_do_ce: T,
    curves: Option<Curves<T>>,
}

fn sweep<T: Real>(obs: &[Observation<T>], tau: T, with_curves: bool) -> Sweep<T> {
    let zero = T::zero();
    let mut s = Sweep {
        n: zero,
        n_obs: 0,
        d_ae: zero,
        d_death: zero,
        d_other: zero,
        at_risk_time: zero,
        km_ae: T::one(),
        km_all: T::one(),
        km_ae_cum: zero,
        km_all_cum: zero,
        aj_ae: zero,
        aj_ce: zero,
        aj_do_ae: zero,
        aj_do_ce: zero,
        curves: with_curves.then(|| Curves {
            km_ae: StepCurve::new(CurveKind::Survival),
            km_all: StepCurve::new(CurveKind::Survival),
            aj_ae: StepCurve::new(CurveKind::Incidence),
            aj_ce: StepCurve::new(CurveKind::Incidence),
            aj_do_ae: StepCurve::new(CurveKind::Incidence),
            aj_do_ce: StepCurve::new(CurveKind::Incidence),
        }),
    };
    for o in obs {
        s.n = s.n + o.weight;
        s.n_obs += 1;
        s.at_risk_time = s.at_risk_time + o.weight * o.time.min(tau);
    }

    // death-only survival: other competing events count as censoring
    let mut km_do = T::one();
    let mut at_risk = s.n;
    let mut i = 0;
    while i < obs.len() && obs[i].time <= tau {
        let t = obs[i].time;
        let (mut ae, mut death, mut other, mut cens) = (zero, zero, zero, zero);
        while i < obs.len() && obs[i].time == t {
            let w = obs[i].weight;
            match obs[i].class {
                EventClass::Ae => ae = ae + w,
                EventClass::DeathBeforeAe => death = death + w,
                EventClass::OtherCe => other = other + w,
                EventClass::Censored => cens = cens + w,
            }
            i += 1;
        }
        if at_risk <= zero {
            break;
        }
        let ce = death + other;
        let all = ae + ce;
        if all > zero {
            let y = at_risk;
            s.d_ae = s.d_ae + ae;
            s.d_death = s.d_death + death;
            s.d_other = s.d_other + other;

            // summation rounding can overshoot 1 when nearly everyone has an event
            let one = T::one();
            s.aj_ae = (s.aj_ae + s.km_all * ae / y).min(one);
            s.aj_ce = (s.aj_ce + s.km_all * ce / y).min(one);
            s.km_all_cum = (s.km_all_cum + s.km_all * all / y).min(one);
            s.km_all = s.km_all * ((y - all) / y);

            let do_events = ae + death;
            if do_events > zero {
                s.aj_do_ae = (s.aj_do_ae + km_do * ae / y).min(one);
                s.aj_do_ce = (s.aj_do_ce + km_do * death / y).min(one);
                km_do = km_do * ((y - do_events) / y);
            }
            if ae > zero {
                s.km_ae_cum = (s.km_ae_cum + s.km_ae * ae / y).min(one);
                s.km_ae = s.km_ae * ((y - ae) / y);
            }

            if let Some(c) = s.curves.as_mut() {
                if ae > zero {
                    c.km_ae.push(t, s.km_ae);
                }
                c.km_all.push(t, s.km_all);
                c.aj_ae.push(t, s.aj_ae);
                c.aj_ce.push(t, s.aj_ce);
                if do_events > zero {
                    c.aj_do_ae.push(t, s.aj_do_ae);
                    c.aj_do_ce.push(t, s.aj_do_ce);
                }
            }
        }
        at_risk = at_risk - all - cens;
    }
    s
}

impl<T: Real> Sweep<T> {
    fn events_ce(&self) -> T {
        self.d_death + self.d_other
    }

    fn density(&self, target: DensityTarget) -> Result<T> {
        if self.at_risk_time <= T::zero() {
            return Err(Error::ZeroAtRiskTime);
        }
        let count = match target {
            DensityTarget::Ae => self.d_ae,
            DensityTarget::Ce => self.events_ce(),
        };
        Ok(count / self.at_risk_time)
    }

    fn estimate_set(&self, tau: T) -> Result<EstimateSet<T>> {
        if self.n <= T::zero() {
            return Err(Error::EmptyArm("selected"));
        }
        let id_ae = self.density(DensityTarget::Ae)?;
        let id_ce = self.density(DensityTarget::Ce)?;
        Ok(EstimateSet {
            tau,
            n: self.n.to_usize().unwrap_or(self.n_obs),
            ip: self.d_ae / self.n,
            pt_id_ignore_ce: transform_ignoring_ce(id_ae, tau),
            one_minus_km: self.km_ae_cum,
            pt_id_account_ce: transform_accounting_ce(id_ae, id_ce, tau),
            aje_death_only: self.aj_do_ae,
            aje_gold: self.aj_ae,
            aje_gold_ce: self.aj_ce,
            id_ae,
            id_ce,
            composite_ip: (self.d_ae + self.events_ce()) / self.n,
            composite_one_minus_km: self.km_all_cum,
        })
    }
}

fn arm_sweep<T: Real>(dataset: &AnalysisDataset<T>, arm: Arm, tau: T, curves: bool) -> Result<Sweep<T>> {
    let obs = sorted_observations(dataset, arm)?;
    Ok(sweep(&obs, tau, curves))
}

pub(crate) fn estimate_from_sorted<T: Real>(obs: &[Observation<T>], tau: T) -> Result<EstimateSet<T>> {
    sweep(obs, tau, false).estimate_set(tau)
}

/// Patients with an observed AE on `[0, tau]` divided by the arm size.
pub fn incidence_proportion<T: Real>(dataset: &AnalysisDataset<T>, arm: Arm, tau: T) -> Result<T> {
    let s = arm_sweep(dataset, arm, tau, false)?;
    Ok(s.d_ae / s.n)
}

/// AE or competing events on `[0, tau]` divided by the arm size.
pub fn composite_incidence_proportion<T: Real>(dataset: &AnalysisDataset<T>, arm: Arm, tau: T) -> Result<T> {
    let s = arm_sweep(dataset, arm, tau, false)?;
    Ok((s.d_ae + s.events_ce()) / s.n)
}

/// Events per day of patient-time at risk restricted by `tau`. Every
/// patient contributes `min(time, tau)`. Competing events are whatever the
/// dataset codes as competing; apply [`AnalysisDataset::with_scope`] first to
/// change the definition.
pub fn incidence_density<T: Real>(
    dataset: &AnalysisDataset<T>,
    arm: Arm,
    tau: T,
    target: DensityTarget,
) -> Result<T> {
    arm_sweep(dataset, arm, tau, false)?.density(target)
}

pub fn prob_transform_id_ignoring_ce<T: Real>(dataset: &AnalysisDataset<T>, arm: Arm, tau: T) -> Result<T> {
    let id = incidence_density(dataset, arm, tau, DensityTarget::Ae)?;
    Ok(transform_ignoring_ce(id, tau))
}

pub fn prob_transform_id_accounting_ce<T: Real>(dataset: &AnalysisDataset<T>, arm: Arm, tau: T) -> Result<T> {
    let s = arm_sweep(dataset, arm, tau, false)?;
    let id_ae = s.density(DensityTarget::Ae)?;
    let id_ce = s.density(DensityTarget::Ce)?;
    Ok(transform_accounting_ce(id_ae, id_ce, tau))
}

pub fn one_minus_kaplan_meier<T: Real>(
    dataset: &AnalysisDataset<T>,
    arm: Arm,
    tau: T,
    event_def: EventDefinition,
) -> Result<ProductLimit<T>> {
    let s = arm_sweep(dataset, arm, tau, true)?;
    let curves = s.curves.expect("curves requested");
    Ok(match event_def {
        EventDefinition::AeOnly => ProductLimit {
            estimate: s.km_ae_cum,
            survival: curves.km_ae,
        },
        EventDefinition::Composite => ProductLimit {
            estimate: s.km_all_cum,
            survival: curves.km_all,
        },
    })
}

pub fn aalen_johansen<T: Real>(
    dataset: &AnalysisDataset<T>,
    arm: Arm,
    tau: T,
    scope: CeScope,
) -> Result<AalenJohansen<T>> {
    let s = arm_sweep(dataset, arm, tau, true)?;
    let c = s.curves.expect("curves requested");
    Ok(match scope {
        CeScope::AllCe => AalenJohansen {
            cif_ae: s.aj_ae,
            cif_ce: s.aj_ce,
            curve_ae: c.aj_ae,
            curve_ce: c.aj_ce,
        },
        CeScope::DeathOnly => AalenJohansen {
            cif_ae: s.aj_do_ae,
            cif_ce: s.aj_do_ce,
            curve_ae: c.aj_do_ae,
            curve_ce: c.aj_do_ce,
        },
    })
}

/// Every estimator from a single pass over the arm.
pub fn estimate_all<T: Real>(dataset: &AnalysisDataset<T>, arm: Arm, tau: T) -> Result<EstimateSet<T>> {
    arm_sweep(dataset, arm, tau, false)?.estimate_set(tau)
}
