//! Competing-risks trial simulator with closed-form truth for constant hazards.
//!
//! Rates and times in the configuration are per year; emitted record times
//! are in days. Trial `i` of a configuration draws from ChaCha stream
//! `(seed, i)`.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::trial_data::{AnalysisDataset, Arm, EventClass, PatientRecord, DAYS_PER_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Hazard {
    Constant { rate: f64 },
    /// Cumulative hazard `(t / scale)^shape`.
    Weibull { shape: f64, scale: f64 },
}

impl Hazard {
    pub fn constant(rate: f64) -> Self {
        Hazard::Constant { rate }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        match *self {
            Hazard::Constant { rate } => rate,
            Hazard::Weibull { shape, scale } => shape / scale * (t / scale).powf(shape - 1.0),
        }
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        match *self {
            Hazard::Constant { rate } => rate * t,
            Hazard::Weibull { shape, scale } => (t / scale).powf(shape),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(*self, Hazard::Constant { rate } if rate == 0.0)
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = match *self {
            Hazard::Constant { rate } => rate.is_finite() && rate >= 0.0,
            Hazard::Weibull { shape, scale } => {
                shape.is_finite() && scale.is_finite() && shape > 0.0 && scale > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid {what} hazard {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Censoring {
    #[default]
    None,
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
    /// Administrative censoring at a fixed time.
    Administrative { time: f64 },
}

impl Censoring {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Censoring::None => true,
            Censoring::Exponential { rate } => rate.is_finite() && rate >= 0.0,
            Censoring::Uniform { low, high } => {
                low.is_finite() && high.is_finite() && low >= 0.0 && high > low
            }
            Censoring::Administrative { time } => time.is_finite() && time > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid censoring {self:?}")))
        }
    }

    fn is_unbounded(&self) -> bool {
        match *self {
            Censoring::None => true,
            Censoring::Exponential { rate } => rate == 0.0,
            _ => false,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Censoring::None => f64::INFINITY,
            Censoring::Exponential { rate } => exponential(rng, rate),
            Censoring::Uniform { low, high } => {
                let u: f64 = rng.sample(Open01);
                low + (high - low) * u
            }
            Censoring::Administrative { time } => time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub trial_prefix: String,
    pub ae_type: String,
    pub n_per_arm: usize,
    pub hazard_ae: Hazard,
    pub hazard_ce: Hazard,
    /// Share of competing events that are deaths; the rest are other CEs.
    pub death_fraction: f64,
    pub censoring: Censoring,
    pub seed: u64,
    pub n_trials: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            trial_prefix: "SIM".into(),
            ae_type: "AE".into(),
            n_per_arm: 500,
            hazard_ae: Hazard::constant(0.1),
            hazard_ce: Hazard::constant(0.3),
            death_fraction: 0.3,
            censoring: Censoring::Exponential { rate: 0.1 },
            seed: 1,
            n_trials: 1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_arm == 0 {
            return Err(Error::InvalidConfig("n_per_arm must be >= 1".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.death_fraction) {
            return Err(Error::InvalidConfig("death_fraction must be in [0, 1]".into()));
        }
        self.hazard_ae.validate("AE")?;
        self.hazard_ce.validate("CE")?;
        self.censoring.validate()?;
        if self.hazard_ae.is_zero() && self.hazard_ce.is_zero() && self.censoring.is_unbounded() {
            return Err(Error::InvalidConfig(
                "no events and no censoring: observation times would be infinite".into(),
            ));
        }
        Ok(())
    }

    pub fn trial_id(&self, index: usize) -> String {
        format!("{}-{}", self.trial_prefix, index + 1)
    }
}

/// Several AE types simulated for the same set of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationPlan {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_n")]
    pub n_per_arm: usize,
    #[serde(default = "default_prefix")]
    pub trial_prefix: String,
    pub ae_types: Vec<AeScenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeScenario {
    pub name: String,
    pub hazard_ae: Hazard,
    pub hazard_ce: Hazard,
    #[serde(default = "default_death_fraction")]
    pub death_fraction: f64,
    #[serde(default)]
    pub censoring: Censoring,
}

fn default_seed() -> u64 {
    1
}
fn default_trials() -> usize {
    2
}
fn default_n() -> usize {
    300
}
fn default_prefix() -> String {
    "SIM".into()
}
fn default_death_fraction() -> f64 {
    0.3
}

impl Default for SimulationPlan {
    fn default() -> Self {
        let scenario = |name: &str, a: f64, b: f64| AeScenario {
            name: name.into(),
            hazard_ae: Hazard::constant(a),
            hazard_ce: Hazard::constant(b),
            death_fraction: 0.3,
            censoring: Censoring::Exponential { rate: 0.1 },
        };
        Self {
            seed: default_seed(),
            n_trials: default_trials(),
            n_per_arm: default_n(),
            trial_prefix: default_prefix(),
            ae_types: vec![
                scenario("rash", 0.3, 0.3),
                scenario("nausea", 0.1, 0.3),
                scenario("neutropenia", 0.05, 0.5),
            ],
        }
    }
}

impl SimulationPlan {
    /// One configuration per AE type, each with its own derived seed.
    pub fn configs(&self) -> Vec<SimulationConfig> {
        self.ae_types
            .iter()
            .enumerate()
            .map(|(i, s)| SimulationConfig {
                trial_prefix: self.trial_prefix.clone(),
                ae_type: s.name.clone(),
                n_per_arm: self.n_per_arm,
                hazard_ae: s.hazard_ae,
                hazard_ce: s.hazard_ce,
                death_fraction: s.death_fraction,
                censoring: s.censoring,
                seed: derive_seed(self.seed, i as u64),
                n_trials: self.n_trials,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ae_types.is_empty() {
            return Err(Error::InvalidConfig("no AE types configured".into()));
        }
        let mut names: Vec<&str> = self.ae_types.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate AE type name".into()));
        }
        self.configs().iter().try_for_each(SimulationConfig::validate)
    }

    /// All datasets ordered by (trial_id, ae_type).
    pub fn simulate<T: Real>(&self) -> Result<Vec<AnalysisDataset<T>>> {
        self.validate()?;
        let mut out = Vec::new();
        for cfg in self.configs() {
            out.extend(simulate(&cfg)?);
        }
        out.sort_by(|a, b| (&a.trial_id, &a.ae_type).cmp(&(&b.trial_id, &b.ae_type)));
        Ok(out)
    }
}

/// SplitMix64 finalizer applied to `seed + index`.
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    let u: f64 = rng.sample(Open01);
    -u.ln() / rate
}

/// Solve `H(t) = target` for the increasing cumulative hazard `H`.
fn invert_cumulative(h: impl Fn(f64) -> f64, target: f64) -> f64 {
    let mut hi = 1.0;
    while h(hi) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Latent first-event time in years and whether it is an AE.
fn draw_event(cfg: &SimulationConfig, rng: &mut ChaCha8Rng) -> (f64, bool) {
    match (cfg.hazard_ae, cfg.hazard_ce) {
        (Hazard::Constant { rate: a }, Hazard::Constant { rate: b }) => {
            let t_ae = exponential(rng, a);
            let t_ce = exponential(rng, b);
            if t_ae <= t_ce {
                (t_ae, true)
            } else {
                (t_ce, false)
            }
        }
        (ae, ce) => {
            let u: f64 = rng.sample(Open01);
            let target = -u.ln();
            let t = invert_cumulative(|t| ae.cumulative(t) + ce.cumulative(t), target);
            let (ha, hc) = (ae.rate_at(t), ce.rate_at(t));
            let v: f64 = rng.random();
            (t, ha + hc > 0.0 && v * (ha + hc) < ha)
        }
    }
}

fn draw_patient(cfg: &SimulationConfig, rng: &mut ChaCha8Rng) -> (f64, EventClass) {
    loop {
        let (t_event, is_ae) = draw_event(cfg, rng);
        let c = cfg.censoring.draw(rng);
        let class = if t_event <= c {
            if is_ae {
                EventClass::Ae
            } else {
                let d: f64 = rng.random();
                if d < cfg.death_fraction {
                    EventClass::DeathBeforeAe
                } else {
                    EventClass::OtherCe
                }
            }
        } else {
            EventClass::Censored
        };
        let days = t_event.min(c) * DAYS_PER_YEAR;
        if days.is_finite() && days > 0.0 {
            return (days, class);
        }
    }
}

/// One simulated trial with both arms drawn from the same configuration.
pub fn simulate_trial<T: Real>(config: &SimulationConfig, trial_index: usize) -> Result<AnalysisDataset<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial_index as u64);
    let mut records = Vec::with_capacity(2 * config.n_per_arm);
    for arm in [Arm::E, Arm::C] {
        for i in 0..config.n_per_arm {
            let (days, class) = draw_patient(config, &mut rng);
            let time = T::from_f64(days)
                .filter(|t| *t > T::zero() && t.is_finite())
                .ok_or_else(|| Error::InvalidConfig(format!("time {days} not representable")))?;
            records.push(PatientRecord {
                patient_id: format!("{arm}{:05}", i + 1),
                arm,
                time,
                event: class,
            });
        }
    }
    AnalysisDataset::new(config.trial_id(trial_index), config.ae_type.clone(), records)
}

/// All `n_trials` trials of the configuration.
pub fn simulate<T: Real>(config: &SimulationConfig) -> Result<Vec<AnalysisDataset<T>>> {
    (0..config.n_trials).map(|i| simulate_trial(config, i)).collect()
}

/// Cumulative AE incidence under constant hazards `a` (AE) and `b` (CE).
pub fn truth_cif<T: Real>(a: T, b: T, t: T) -> T {
    if a <= T::zero() || t <= T::zero() {
        return T::zero();
    }
    if b <= T::zero() {
        return T::one_minus_exp_neg(a * t);
    }
    a / (a + b) * T::one_minus_exp_neg((a + b) * t)
}

/// Closed-form cumulative incidences of both event types at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord<T> {
    pub cif_ae: T,
    pub cif_ce: T,
}

pub fn truth<T: Real>(a: T, b: T, t: T) -> TruthRecord<T> {
    TruthRecord {
        cif_ae: truth_cif(a, b, t),
        cif_ce: truth_cif(b, a, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_values() {
        let v: f64 = truth_cif(0.1, 0.3, 2.0);
        assert!((v - 0.25 * (1.0 - (-0.8f64).exp())).abs() < 1e-15);
        assert!((v - 0.1377).abs() < 1e-4);
        assert!((truth_cif(0.2, 0.0, 3.0) - (1.0 - (-0.6f64).exp())).abs() < 1e-15);
        assert_eq!(truth_cif(0.2, 0.3, 0.0), 0.0);
        assert_eq!(truth_cif(0.0, 0.3, 5.0), 0.0);
        let tr = truth(0.1, 0.3, 2.0);
        assert!((tr.cif_ae + tr.cif_ce - (1.0 - (-0.8f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn no_ce_no_censoring_only_aes() {
        let cfg = SimulationConfig {
            hazard_ce: Hazard::constant(0.0),
            censoring: Censoring::None,
            n_per_arm: 200,
            ..SimulationConfig::default()
        };
        let d: AnalysisDataset<f64> = simulate_trial(&cfg, 0).unwrap();
        assert_eq!(d.records().len(), 400);
        assert!(d.records().iter().all(|r| r.event == EventClass::Ae));
    }

    #[test]
    fn deterministic_per_seed_and_trial() {
        let cfg = SimulationConfig::default();
        let a: AnalysisDataset<f64> = simulate_trial(&cfg, 3).unwrap();
        let b: AnalysisDataset<f64> = simulate_trial(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let c: AnalysisDataset<f64> = simulate_trial(&cfg, 4).unwrap();
        assert_ne!(a.records()[0].time, c.records()[0].time);
        assert_eq!(a.trial_id, "SIM-4");
    }

    #[test]
    fn empirical_fraction_matches_truth() {
        let cfg = SimulationConfig {
            n_per_arm: 50_000,
            censoring: Censoring::None,
            seed: 11,
            ..SimulationConfig::default()
        };
        let d: AnalysisDataset<f64> = simulate_trial(&cfg, 0).unwrap();
        let horizon = 2.0 * DAYS_PER_YEAR;
        let n = d.records().len() as f64;
        let frac = d
            .records()
            .iter()
            .filter(|r| r.event == EventClass::Ae && r.time <= horizon)
            .count() as f64
            / n;
        assert!((frac - truth_cif(0.1, 0.3, 2.0)).abs() < 0.005, "{frac}");
    }

    #[test]
    fn weibull_with_shape_one_matches_exponential_in_law() {
        let cfg = SimulationConfig {
            n_per_arm: 20_000,
            hazard_ae: Hazard::Weibull { shape: 1.0, scale: 10.0 },
            hazard_ce: Hazard::Weibull { shape: 1.0, scale: 1.0 / 0.3 },
            censoring: Censoring::None,
            seed: 5,
            ..SimulationConfig::default()
        };
        let d: AnalysisDataset<f64> = simulate_trial(&cfg, 0).unwrap();
        let horizon = 2.0 * DAYS_PER_YEAR;
        let frac = d
            .records()
            .iter()
            .filter(|r| r.event == EventClass::Ae && r.time <= horizon)
            .count() as f64
            / d.records().len() as f64;
        assert!((frac - truth_cif(0.1, 0.3, 2.0)).abs() < 0.008, "{frac}");
    }

    #[test]
    fn inversion_solves_cumulative_hazard() {
        let h = Hazard::Weibull { shape: 1.7, scale: 2.5 };
        let t = invert_cumulative(|t| h.cumulative(t), 0.8);
        assert!((h.cumulative(t) - 0.8).abs() < 1e-10);
    }

    #[test]
    fn censoring_kinds() {
        for censoring in [
            Censoring::Uniform { low: 0.0, high: 1.0 },
            Censoring::Administrative { time: 0.5 },
        ] {
            let cfg = SimulationConfig {
                censoring,
                n_per_arm: 300,
                ..SimulationConfig::default()
            };
            let d: AnalysisDataset<f64> = simulate_trial(&cfg, 0).unwrap();
            assert!(d.records().iter().all(|r| r.time <= DAYS_PER_YEAR + 1e-9));
            assert!(d.records().iter().any(|r| r.event == EventClass::Censored));
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SimulationConfig {
                n_per_arm: 0,
                ..SimulationConfig::default()
            },
            SimulationConfig {
                hazard_ae: Hazard::constant(-1.0),
                ..SimulationConfig::default()
            },
            SimulationConfig {
                hazard_ae: Hazard::constant(0.0),
                hazard_ce: Hazard::constant(0.0),
                censoring: Censoring::None,
                ..SimulationConfig::default()
            },
            SimulationConfig {
                censoring: Censoring::Uniform { low: 2.0, high: 1.0 },
                ..SimulationConfig::default()
            },
            SimulationConfig {
                death_fraction: 1.5,
                ..SimulationConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn plan_seeds_differ_per_ae_type() {
        let plan = SimulationPlan::default();
        let cfgs = plan.configs();
        assert_eq!(cfgs.len(), 3);
        assert_ne!(cfgs[0].seed, cfgs[1].seed);
        let sets: Vec<AnalysisDataset<f64>> = plan.simulate().unwrap();
        assert_eq!(sets.len(), 6);
        assert_eq!(sets[0].trial_id, "SIM-1");
    }
}
