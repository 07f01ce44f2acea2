//! Random-effects meta-analysis and meta-regression of log-ratios.
//!
//! Normal-normal hierarchical model: `y_i ~ N(x_i' beta, se_i^2 + tau2)`.
//! The between-study variance is estimated by the method of moments
//! (DerSimonian-Laird, generalized to regression), by REML via Fisher
//! scoring, or fixed by the caller. Intervals are Wald-type.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::real::Real;
use crate::trial_data::Arm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    /// Percentage of patients censored at tau, 0..100.
    PctCensoring,
    /// Percentage of patients with a competing event by tau, 0..100.
    PctCe,
    /// Gold-standard Aalen-Johansen AE probability.
    AjProbability,
    /// Maximal observed time under the evaluation time, in years.
    EvalTimeYears,
}

impl Covariate {
    pub const ALL: [Covariate; 4] = [
        Covariate::PctCensoring,
        Covariate::PctCe,
        Covariate::AjProbability,
        Covariate::EvalTimeYears,
    ];

    /// Competing-event percentage is left out: it is strongly dependent on censoring.
    pub const MULTIVARIABLE: [Covariate; 3] = [
        Covariate::PctCensoring,
        Covariate::EvalTimeYears,
        Covariate::AjProbability,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Covariate::PctCensoring => "pct_censoring",
            Covariate::PctCe => "pct_ce",
            Covariate::AjProbability => "aj_probability",
            Covariate::EvalTimeYears => "eval_time_years",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.id() == s)
    }

    /// Reporting increment: +10 percentage points, +0.1 probability, +1 year.
    pub fn reporting_delta(self) -> f64 {
        match self {
            Covariate::PctCensoring | Covariate::PctCe => 10.0,
            Covariate::AjProbability => 0.1,
            Covariate::EvalTimeYears => 1.0,
        }
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Covariates<T> {
    pub pct_censoring: T,
    pub pct_ce: T,
    pub aj_probability: T,
    pub eval_time_years: T,
}

impl<T: Real> Covariates<T> {
    pub fn get(&self, covariate: Covariate) -> T {
        match covariate {
            Covariate::PctCensoring => self.pct_censoring,
            Covariate::PctCe => self.pct_ce,
            Covariate::AjProbability => self.aj_probability,
            Covariate::EvalTimeYears => self.eval_time_years,
        }
    }

    pub fn all_finite(&self) -> bool {
        Covariate::ALL.iter().all(|&c| self.get(c).is_finite())
    }
}

/// Per-(trial, AE type) summary shared with the central analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord<T> {
    pub trial_id: String,
    pub ae_type: String,
    pub arm: Arm,
    pub estimator: Estimator,
    pub log_ratio: T,
    pub se_log_ratio: T,
    pub covariates: Covariates<T>,
    /// Fraction of bootstrap replicates dropped for a zero estimate.
    pub dropped_fraction: f64,
}

impl<T: Real> AggregateRecord<T> {
    pub fn new(log_ratio: T, se_log_ratio: T) -> Self {
        Self {
            trial_id: String::new(),
            ae_type: String::new(),
            arm: Arm::E,
            estimator: Estimator::IncidenceProportion,
            log_ratio,
            se_log_ratio,
            covariates: Covariates::default(),
            dropped_fraction: 0.0,
        }
    }

    pub fn with_covariates(mut self, covariates: Covariates<T>) -> Self {
        self.covariates = covariates;
        self
    }

    /// Positive finite SE, finite covariates and at most half the replicates dropped.
    pub fn is_usable(&self) -> bool {
        self.log_ratio.is_finite()
            && self.se_log_ratio.is_finite()
            && self.se_log_ratio > T::zero()
            && self.covariates.all_finite()
            && self.dropped_fraction <= crate::bootstrap::MAX_DROPPED_FRACTION
    }
}

/// Keep only records fit for weighting.
pub fn usable_records<T: Real>(records: &[AggregateRecord<T>]) -> Vec<AggregateRecord<T>> {
    records.iter().filter(|r| r.is_usable()).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Tau2Method {
    #[default]
    DerSimonianLaird,
    Reml,
    Fixed(f64),
}

impl Tau2Method {
    pub fn id(self) -> &'static str {
        match self {
            Tau2Method::DerSimonianLaird => "dl",
            Tau2Method::Reml => "reml",
            Tau2Method::Fixed(_) => "fixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaOptions {
    pub tau2: Tau2Method,
    /// Center covariates at their arithmetic mean.
    pub center: bool,
    pub z: f64,
}

impl Default for MetaOptions {
    fn default() -> Self {
        Self {
            tau2: Tau2Method::DerSimonianLaird,
            center: true,
            z: crate::bootstrap::Z_95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient<T> {
    /// `None` for the intercept.
    pub covariate: Option<Covariate>,
    pub estimate: T,
    pub se: T,
    pub ci_low: T,
    pub ci_high: T,
}

impl<T: Real> Coefficient<T> {
    pub fn name(&self) -> &'static str {
        self.covariate.map_or("intercept", Covariate::id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaFit<T> {
    /// Intercept: pooled log-ratio, at the covariate means when centered.
    pub mu: T,
    pub se_mu: T,
    pub tau2: T,
    /// Residual heterogeneity statistic of the fixed-effect fit.
    pub q: T,
    pub coefficients: Vec<Coefficient<T>>,
    /// Value subtracted from each covariate before fitting.
    pub centers: Vec<(Covariate, T)>,
    pub k: usize,
    pub method: Tau2Method,
}

impl<T: Real> MetaFit<T> {
    pub fn average_ratio(&self) -> T {
        self.mu.exp()
    }

    pub fn intercept(&self) -> &Coefficient<T> {
        &self.coefficients[0]
    }

    pub fn coefficient(&self, covariate: Covariate) -> Option<&Coefficient<T>> {
        self.coefficients.iter().find(|c| c.covariate == Some(covariate))
    }

    /// Linear predictor (log-ratio) at raw covariate values.
    pub fn predict(&self, covariates: &Covariates<T>) -> T {
        self.coefficients[1..]
            .iter()
            .zip(&self.centers)
            .fold(self.mu, |acc, (c, &(cov, center))| {
                acc + c.estimate * (covariates.get(cov) - center)
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplicativeChange<T> {
    pub covariate: Covariate,
    pub delta: T,
    pub ratio: T,
    pub ci_low: T,
    pub ci_high: T,
}

/// `exp(beta * delta)` with the coefficient interval scaled by `delta`.
pub fn multiplicative_change<T: Real>(
    fit: &MetaFit<T>,
    covariate: Covariate,
    delta: T,
) -> Result<MultiplicativeChange<T>> {
    let c = fit
        .coefficient(covariate)
        .ok_or_else(|| Error::UnknownCovariate(covariate.id().to_string()))?;
    let a = (c.ci_low * delta).exp();
    let b = (c.ci_high * delta).exp();
    Ok(MultiplicativeChange {
        covariate,
        delta,
        ratio: (c.estimate * delta).exp(),
        ci_low: a.min(b),
        ci_high: a.max(b),
    })
}

fn check_records<T: Real>(records: &[AggregateRecord<T>], needed: usize) -> Result<()> {
    if records.len() < needed {
        return Err(Error::TooFewRecords {
            needed,
            got: records.len(),
        });
    }
    for r in records {
        if !(r.se_log_ratio.is_finite() && r.se_log_ratio > T::zero()) {
            return Err(Error::InvalidMetaInput(format!(
                "standard error must be positive, got {}",
                r.se_log_ratio
            )));
        }
        if !r.log_ratio.is_finite() || !r.covariates.all_finite() {
            return Err(Error::InvalidMetaInput("non-finite value".into()));
        }
    }
    Ok(())
}

const REML_MAX_ITER: usize = 200;
const REML_TOL: f64 = 1e-12;

/// Pooled random-effects estimate without covariates, in closed form.
pub fn fit_random_effects<T: Real>(records: &[AggregateRecord<T>], options: &MetaOptions) -> Result<MetaFit<T>> {
    check_records(records, 2)?;
    let k = records.len();
    let y: Vec<T> = records.iter().map(|r| r.log_ratio).collect();
    let v: Vec<T> = records.iter().map(|r| r.se_log_ratio * r.se_log_ratio).collect();
    // shift by the first effect so identical inputs pool exactly
    let y0 = y[0];

    let pooled = |tau2: T| {
        let w: Vec<T> = v.iter().map(|&vi| T::one() / (vi + tau2)).collect();
        let sw = w.iter().fold(T::zero(), |a, &x| a + x);
        let shift = w.iter().zip(&y).fold(T::zero(), |a, (&wi, &yi)| a + wi * (yi - y0)) / sw;
        (w, sw, y0 + shift)
    };

    let (w, sw, mu_fe) = pooled(T::zero());
    let q = w
        .iter()
        .zip(&y)
        .fold(T::zero(), |a, (&wi, &yi)| a + wi * (yi - mu_fe) * (yi - mu_fe));
    let sw2 = w.iter().fold(T::zero(), |a, &x| a + x * x);
    let c = sw - sw2 / sw;
    let df = T::from_count(k - 1);
    let dl = ((q - df) / c).max(T::zero());

    let tau2 = match options.tau2 {
        Tau2Method::DerSimonianLaird => dl,
        Tau2Method::Fixed(t) => T::lit(t.max(0.0)),
        Tau2Method::Reml => {
            let mut tau2 = dl;
            for _ in 0..REML_MAX_ITER {
                let (w, sw, mu) = pooled(tau2);
                let s2 = w.iter().fold(T::zero(), |a, &x| a + x * x);
                let s3 = w.iter().fold(T::zero(), |a, &x| a + x * x * x);
                let ypp = w
                    .iter()
                    .zip(&y)
                    .fold(T::zero(), |a, (&wi, &yi)| a + wi * wi * (yi - mu) * (yi - mu));
                let tr_p = sw - s2 / sw;
                let tr_pp = s2 - T::lit(2.0) * s3 / sw + s2 * s2 / (sw * sw);
                let next = (tau2 + (ypp - tr_p) / tr_pp).max(T::zero());
                let done = (next - tau2).abs() <= T::lit(REML_TOL) * (T::one() + tau2);
                tau2 = next;
                if done {
                    break;
                }
            }
            tau2
        }
    };

    let (_, sw, mu) = pooled(tau2);
    let se = (T::one() / sw).sqrt();
    let z = T::lit(options.z);
    Ok(MetaFit {
        mu,
        se_mu: se,
        tau2,
        q,
        coefficients: vec![Coefficient {
            covariate: None,
            estimate: mu,
            se,
            ci_low: mu - z * se,
            ci_high: mu + z * se,
        }],
        centers: Vec::new(),
        k,
        method: options.tau2,
    })
}

/// Weighted least squares pieces for a given tau2.
struct Wls<T> {
    w: Vec<T>,
    beta: Vec<T>,
    cov: Vec<Vec<T>>,
    resid: Vec<T>,
}

fn wls<T: Real>(x: &[Vec<T>], y: &[T], v: &[T], tau2: T) -> Result<Wls<T>> {
    let p = x[0].len();
    let w: Vec<T> = v.iter().map(|&vi| T::one() / (vi + tau2)).collect();
    let mut m = vec![vec![T::zero(); p]; p];
    let mut xty = vec![T::zero(); p];
    for ((xi, &wi), &yi) in x.iter().zip(&w).zip(y) {
        for a in 0..p {
            xty[a] = xty[a] + wi * xi[a] * yi;
            for b in 0..p {
                m[a][b] = m[a][b] + wi * xi[a] * xi[b];
            }
        }
    }
    let cov = linalg::spd_inverse(&m)?;
    let beta = linalg::mat_vec(&cov, &xty);
    let resid = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| yi - linalg::dot(xi, &beta))
        .collect();
    Ok(Wls { w, beta, cov, resid })
}

/// trace(M^-1 X' diag(d) X) for the current weights
fn trace_weighted<T: Real>(x: &[Vec<T>], d: impl Fn(usize) -> T, cov: &[Vec<T>]) -> T {
    let p = cov.len();
    let mut acc = T::zero();
    for (i, xi) in x.iter().enumerate() {
        let di = d(i);
        for a in 0..p {
            for b in 0..p {
                acc = acc + cov[a][b] * xi[b] * xi[a] * di;
            }
        }
    }
    acc
}

/// Mixed-effects meta-regression of the log-ratio on `covariates`.
/// An empty covariate list fits the intercept-only model.
pub fn fit_meta_regression<T: Real>(
    records: &[AggregateRecord<T>],
    covariates: &[Covariate],
    options: &MetaOptions,
) -> Result<MetaFit<T>> {
    let p = covariates.len() + 1;
    check_records(records, (p + 1).max(2))?;
    let k = records.len();

    let centers: Vec<(Covariate, T)> = covariates
        .iter()
        .map(|&c| {
            let center = if options.center {
                records.iter().fold(T::zero(), |a, r| a + r.covariates.get(c)) / T::from_count(k)
            } else {
                T::zero()
            };
            (c, center)
        })
        .collect();
    let x: Vec<Vec<T>> = records
        .iter()
        .map(|r| {
            std::iter::once(T::one())
                .chain(centers.iter().map(|&(c, m)| r.covariates.get(c) - m))
                .collect()
        })
        .collect();
    let y0 = records[0].log_ratio;
    let y: Vec<T> = records.iter().map(|r| r.log_ratio - y0).collect();
    let v: Vec<T> = records.iter().map(|r| r.se_log_ratio * r.se_log_ratio).collect();

    let fe = wls(&x, &y, &v, T::zero())?;
    let q = fe
        .w
        .iter()
        .zip(&fe.resid)
        .fold(T::zero(), |a, (&wi, &ri)| a + wi * ri * ri);
    let sw = fe.w.iter().fold(T::zero(), |a, &x| a + x);
    let tr_p = sw - trace_weighted(&x, |i| fe.w[i] * fe.w[i], &fe.cov);
    let dl = ((q - T::from_count(k - p)) / tr_p).max(T::zero());

    let tau2 = match options.tau2 {
        Tau2Method::DerSimonianLaird => dl,
        Tau2Method::Fixed(t) => T::lit(t.max(0.0)),
        Tau2Method::Reml => {
            let mut tau2 = dl;
            for _ in 0..REML_MAX_ITER {
                let f = wls(&x, &y, &v, tau2)?;
                let sw = f.w.iter().fold(T::zero(), |a, &x| a + x);
                let sw2 = f.w.iter().fold(T::zero(), |a, &x| a + x * x);
                let ypp = f
                    .w
                    .iter()
                    .zip(&f.resid)
                    .fold(T::zero(), |a, (&wi, &ri)| a + wi * wi * ri * ri);
                let tr_p = sw - trace_weighted(&x, |i| f.w[i] * f.w[i], &f.cov);
                let tr_pp = trace_pp(&x, &f.w, &f.cov, sw2);
                let next = (tau2 + (ypp - tr_p) / tr_pp).max(T::zero());
                let done = (next - tau2).abs() <= T::lit(REML_TOL) * (T::one() + tau2);
                tau2 = next;
                if done {
                    break;
                }
            }
            tau2
        }
    };

    let f = wls(&x, &y, &v, tau2)?;
    let z = T::lit(options.z);
    let coefficients: Vec<Coefficient<T>> = f
        .beta
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let estimate = if j == 0 { b + y0 } else { b };
            let se = f.cov[j][j].max(T::zero()).sqrt();
            Coefficient {
                covariate: (j > 0).then(|| covariates[j - 1]),
                estimate,
                se,
                ci_low: estimate - z * se,
                ci_high: estimate + z * se,
            }
        })
        .collect();
    Ok(MetaFit {
        mu: coefficients[0].estimate,
        se_mu: coefficients[0].se,
        tau2,
        q,
        coefficients,
        centers,
        k,
        method: options.tau2,
    })
}

/// trace(P P) with P = W - W X M^-1 X' W.
fn trace_pp<T: Real>(x: &[Vec<T>], w: &[T], cov: &[Vec<T>], sw2: T) -> T {
    let p = cov.len();
    // A = M^-1 X' W^2 X
    let mut g = vec![vec![T::zero(); p]; p];
    for (xi, &wi) in x.iter().zip(w) {
        let w2 = wi * wi;
        for a in 0..p {
            for b in 0..p {
                g[a][b] = g[a][b] + w2 * xi[a] * xi[b];
            }
        }
    }
    let a = linalg::mat_mul(cov, &g);
    let tr_a2 = (0..p).fold(T::zero(), |acc, i| {
        (0..p).fold(acc, |acc, j| acc + a[i][j] * a[j][i])
    });
    let tr_w3 = trace_weighted(x, |i| w[i] * w[i] * w[i], cov);
    sw2 - T::lit(2.0) * tr_w3 + tr_a2
}

mod linalg {
    use crate::error::{Error, Result};
    use crate::real::Real;

    pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
        a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
    }

    pub fn mat_vec<T: Real>(m: &[Vec<T>], v: &[T]) -> Vec<T> {
        m.iter().map(|row| dot(row, v)).collect()
    }

    pub fn mat_mul<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
        let n = b[0].len();
        a.iter()
            .map(|row| {
                (0..n)
                    .map(|j| row.iter().zip(b).fold(T::zero(), |acc, (&x, bk)| acc + x * bk[j]))
                    .collect()
            })
            .collect()
    }

    /// Inverse of a symmetric positive definite matrix via Cholesky.
    #[allow(clippy::needless_range_loop)]
    pub fn spd_inverse<T: Real>(m: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        let n = m.len();
        let scale = (0..n).map(|i| m[i][i].abs()).fold(T::zero(), T::max);
        let tol = T::epsilon() * T::lit(1e4) * scale;
        let mut l = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s = (0..j).fold(m[i][j], |acc, k| acc - l[i][k] * l[j][k]);
                if i == j {
                    if s.is_nan() || s <= tol {
                        return Err(Error::RankDeficient);
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        // invert L, then M^-1 = L^-T L^-1
        let mut linv = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            linv[i][i] = T::one() / l[i][i];
            for j in 0..i {
                let s = (j..i).fold(T::zero(), |acc, k| acc + l[i][k] * linv[k][j]);
                linv[i][j] = -s / l[i][i];
            }
        }
        let mut inv = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s = (i..n).fold(T::zero(), |acc, k| acc + linv[k][i] * linv[k][j]);
                inv[i][j] = s;
                inv[j][i] = s;
            }
        }
        Ok(inv)
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn inverse_of_small_spd() {
            let m: Vec<Vec<f64>> = vec![vec![4.0, 2.0, 0.6], vec![2.0, 3.0, 0.4], vec![0.6, 0.4, 1.0]];
            let inv = spd_inverse(&m).unwrap();
            let id = mat_mul(&m, &inv);
            for (i, row) in id.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((x - e).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn singular_detected() {
            let m = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
            assert!(matches!(spd_inverse(&m), Err(Error::RankDeficient)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(y: f64, se: f64) -> AggregateRecord<f64> {
        AggregateRecord::new(y, se)
    }

    fn with_cens(y: f64, se: f64, cens: f64, years: f64) -> AggregateRecord<f64> {
        rec(y, se).with_covariates(Covariates {
            pct_censoring: cens,
            pct_ce: 100.0 - cens,
            aj_probability: 0.1,
            eval_time_years: years,
        })
    }

    #[test]
    fn single_record_rejected() {
        let opts = MetaOptions::default();
        assert!(matches!(
            fit_random_effects(&[rec(0.1, 0.1)], &opts),
            Err(Error::TooFewRecords { needed: 2, got: 1 })
        ));
        assert!(matches!(
            fit_meta_regression(&[rec(0.1, 0.1), rec(0.2, 0.1)], &[Covariate::PctCensoring], &opts),
            Err(Error::TooFewRecords { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn homogeneous_records() {
        let l2 = 2f64.ln();
        for method in [Tau2Method::DerSimonianLaird, Tau2Method::Reml] {
            let opts = MetaOptions {
                tau2: method,
                ..MetaOptions::default()
            };
            let fit = fit_random_effects(&[rec(l2, 0.1), rec(l2, 0.2)], &opts).unwrap();
            assert_eq!(fit.mu, l2);
            assert_eq!(fit.tau2, 0.0);
            assert!((fit.average_ratio() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dersimonian_laird_hand_values() {
        // y = (0, 1, 3), v = (1, 1, 1): mean 4/3, Q = 42/9, C = 2, tau2 = (42/9 - 2) / 2
        let recs = [rec(0.0, 1.0), rec(1.0, 1.0), rec(3.0, 1.0)];
        let fit = fit_random_effects(&recs, &MetaOptions::default()).unwrap();
        let tau2 = (42.0 / 9.0 - 2.0) / 2.0;
        assert!((fit.q - 42.0 / 9.0).abs() < 1e-12);
        assert!((fit.tau2 - tau2).abs() < 1e-12);
        assert!((fit.mu - 4.0 / 3.0).abs() < 1e-12);
        assert!((fit.se_mu - ((1.0 + tau2) / 3.0).sqrt()).abs() < 1e-12);
        let c = fit.intercept();
        assert!((c.ci_high - c.ci_low - 2.0 * 1.96 * fit.se_mu).abs() < 1e-12);
    }

    #[test]
    fn fixed_zero_is_inverse_variance_pooling() {
        let recs = [rec(0.3, 0.1), rec(-0.2, 0.3), rec(0.5, 0.2), rec(0.0, 0.4)];
        let opts = MetaOptions {
            tau2: Tau2Method::Fixed(0.0),
            ..MetaOptions::default()
        };
        let fit = fit_random_effects(&recs, &opts).unwrap();
        let (num, den) = recs.iter().fold((0.0, 0.0), |(n, d), r| {
            let w = 1.0 / (r.se_log_ratio * r.se_log_ratio);
            (n + w * r.log_ratio, d + w)
        });
        assert!((fit.mu - num / den).abs() < 1e-12);
        assert!((fit.se_mu - (1.0 / den).sqrt()).abs() < 1e-12);
        assert_eq!(fit.tau2, 0.0);
    }

    #[test]
    fn intercept_only_regression_matches_closed_form() {
        let recs = [rec(0.3, 0.1), rec(-0.2, 0.3), rec(0.9, 0.2), rec(0.0, 0.4), rec(0.4, 0.15)];
        for method in [Tau2Method::DerSimonianLaird, Tau2Method::Reml, Tau2Method::Fixed(0.02)] {
            let opts = MetaOptions {
                tau2: method,
                ..MetaOptions::default()
            };
            let a = fit_random_effects(&recs, &opts).unwrap();
            let b = fit_meta_regression(&recs, &[], &opts).unwrap();
            assert!((a.mu - b.mu).abs() < 1e-12, "{method:?}");
            assert!((a.tau2 - b.tau2).abs() < 1e-12, "{method:?}");
            assert!((a.se_mu - b.se_mu).abs() < 1e-12, "{method:?}");
            assert!((a.q - b.q).abs() < 1e-12);
        }
    }

    #[test]
    fn reml_positive_for_heterogeneous_data() {
        let recs = [rec(0.0, 0.1), rec(0.5, 0.1), rec(1.0, 0.1), rec(-0.4, 0.1), rec(0.2, 0.1)];
        let opts = MetaOptions {
            tau2: Tau2Method::Reml,
            ..MetaOptions::default()
        };
        let fit = fit_random_effects(&recs, &opts).unwrap();
        // equal variances: REML tau2 = sample variance - v
        let mean = 0.26;
        let s2 = recs.iter().map(|r| (r.log_ratio - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((fit.tau2 - (s2 - 0.01)).abs() < 1e-9, "{} vs {}", fit.tau2, s2 - 0.01);
    }

    #[test]
    fn zero_slope_data() {
        let recs: Vec<_> = (0..6)
            .map(|i| {
                let mut r = with_cens(0.7, 0.1 + 0.02 * i as f64, 10.0 * i as f64, 1.0 + (i % 3) as f64);
                r.covariates.aj_probability = 0.05 * ((i * 3) % 4) as f64;
                r
            })
            .collect();
        let fit = fit_meta_regression(&recs, &Covariate::MULTIVARIABLE, &MetaOptions::default()).unwrap();
        assert_eq!(fit.mu, 0.7);
        for c in &fit.coefficients[1..] {
            assert!(c.estimate.abs() < 1e-12, "{}: {}", c.name(), c.estimate);
        }
        assert_eq!(fit.tau2, 0.0);
    }

    #[test]
    fn centering_invariance() {
        let recs: Vec<_> = (0..8)
            .map(|i| {
                let cens = 5.0 + 7.0 * i as f64;
                with_cens(0.05 + 0.01 * cens + 0.03 * ((i * 7) % 5) as f64, 0.1, cens, 0.5 + 0.3 * i as f64 % 2.0)
            })
            .collect();
        let covs = [Covariate::PctCensoring, Covariate::EvalTimeYears];
        let centered = fit_meta_regression(&recs, &covs, &MetaOptions::default()).unwrap();
        let raw = fit_meta_regression(
            &recs,
            &covs,
            &MetaOptions {
                center: false,
                ..MetaOptions::default()
            },
        )
        .unwrap();
        let means = Covariates {
            pct_censoring: recs.iter().map(|r| r.covariates.pct_censoring).sum::<f64>() / 8.0,
            eval_time_years: recs.iter().map(|r| r.covariates.eval_time_years).sum::<f64>() / 8.0,
            ..Covariates::default()
        };
        assert!((centered.average_ratio() - raw.predict(&means).exp()).abs() < 1e-10);
        for (a, b) in centered.coefficients[1..].iter().zip(&raw.coefficients[1..]) {
            assert!((a.estimate - b.estimate).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_deficiency_reported() {
        let recs: Vec<_> = (0..5).map(|i| with_cens(0.1 * i as f64, 0.1, 30.0, 1.0)).collect();
        assert!(matches!(
            fit_meta_regression(&recs, &[Covariate::PctCensoring], &MetaOptions::default()),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn multiplicative_change_arithmetic() {
        let slope = 1.05f64.ln() / 10.0;
        let fit = MetaFit {
            mu: 0.0,
            se_mu: 0.1,
            tau2: 0.0,
            q: 0.0,
            coefficients: vec![
                Coefficient {
                    covariate: None,
                    estimate: 0.0,
                    se: 0.1,
                    ci_low: -0.196,
                    ci_high: 0.196,
                },
                Coefficient {
                    covariate: Some(Covariate::PctCensoring),
                    estimate: slope,
                    se: 0.001,
                    ci_low: slope - 0.00196,
                    ci_high: slope + 0.00196,
                },
            ],
            centers: vec![(Covariate::PctCensoring, 0.0)],
            k: 10,
            method: Tau2Method::DerSimonianLaird,
        };
        let m = multiplicative_change(&fit, Covariate::PctCensoring, 10.0).unwrap();
        assert!((m.ratio - 1.05).abs() < 1e-12);
        assert!(m.ci_low < m.ratio && m.ratio < m.ci_high);
        let neg = multiplicative_change(&fit, Covariate::PctCensoring, -10.0).unwrap();
        assert!(neg.ci_low <= neg.ratio && neg.ratio <= neg.ci_high);
        assert!(matches!(
            multiplicative_change(&fit, Covariate::EvalTimeYears, 1.0),
            Err(Error::UnknownCovariate(_))
        ));

        let mut zero = fit.clone();
        zero.coefficients[1].estimate = 0.0;
        assert_eq!(multiplicative_change(&zero, Covariate::PctCensoring, 10.0).unwrap().ratio, 1.0);
    }

    #[test]
    fn non_positive_se_rejected() {
        assert!(matches!(
            fit_random_effects(&[rec(0.1, 0.0), rec(0.2, 0.1)], &MetaOptions::default()),
            Err(Error::InvalidMetaInput(_))
        ));
    }

    #[test]
    fn usable_filter() {
        let mut bad = rec(0.1, 0.1);
        bad.dropped_fraction = 0.6;
        let recs = [rec(0.1, 0.1), bad, rec(0.1, 0.0)];
        assert_eq!(usable_records(&recs).len(), 1);
    }

    #[test]
    fn works_in_f32() {
        let recs = [
            AggregateRecord::new(0.1f32, 0.1),
            AggregateRecord::new(0.3f32, 0.2),
            AggregateRecord::new(0.2f32, 0.1),
        ];
        let fit = fit_random_effects(&recs, &MetaOptions::default()).unwrap();
        assert!(fit.mu > 0.1 && fit.mu < 0.3);
    }
}
