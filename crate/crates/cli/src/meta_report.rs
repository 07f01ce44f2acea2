//! Central stage: random-effects pooling and meta-regression over
//! aggregate files, rendered as CSV and as a text table.

use std::fmt::Write as _;
use std::str::FromStr;

use aerisk_core::meta::{fit_meta_regression, fit_random_effects, multiplicative_change, usable_records};
use aerisk_core::{AggregateRecordF64, Arm, Covariate, Estimator, MetaFitF64, MetaOptions, QuantileSpec};

use crate::error::CliError;
use crate::schema::AggregateFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Pooled,
    Univariable(Covariate),
    Multivariable,
    /// Pooled, then every univariable model, then the multivariable one.
    Table,
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pooled" => Ok(Model::Pooled),
            "multivariable" => Ok(Model::Multivariable),
            "table" => Ok(Model::Table),
            _ => match s.strip_prefix("univariable:") {
                Some(c) => Covariate::parse(c)
                    .map(Model::Univariable)
                    .ok_or_else(|| format!("unknown covariate `{c}`")),
                None => Err(format!(
                    "unknown model `{s}` (pooled, univariable:<covariate>, multivariable, table)"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaRequest {
    pub model: Model,
    pub estimators: Vec<Estimator>,
    pub tau: QuantileSpec,
    /// `None` pools both arms.
    pub arm: Option<Arm>,
    pub options: MetaOptions,
}

impl Default for MetaRequest {
    fn default() -> Self {
        Self {
            model: Model::Pooled,
            estimators: Estimator::COMPARISONS.to_vec(),
            tau: QuantileSpec::MaxFollowUp,
            arm: None,
            options: MetaOptions::default(),
        }
    }
}

/// One line of the fitted table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaRow {
    pub model: String,
    pub estimator: Estimator,
    pub term: String,
    /// "average risk ratio" or the reporting increment.
    pub quantity: String,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Coefficient on the log scale and its standard error.
    pub coef: f64,
    pub se: f64,
    pub k: usize,
    pub tau2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaReport {
    pub rows: Vec<MetaRow>,
    pub excluded: usize,
    pub fits: Vec<(String, Estimator, MetaFitF64)>,
}

fn increment_label(c: Covariate) -> &'static str {
    match c {
        Covariate::PctCensoring | Covariate::PctCe => "10% increase",
        Covariate::AjProbability => "increase of 0.1",
        Covariate::EvalTimeYears => "one additional year",
    }
}

fn model_specs(model: Model) -> Vec<(String, Vec<Covariate>)> {
    match model {
        Model::Pooled => vec![("pooled".into(), vec![])],
        Model::Univariable(c) => vec![(format!("univariable:{c}"), vec![c])],
        Model::Multivariable => vec![("multivariable".into(), Covariate::MULTIVARIABLE.to_vec())],
        Model::Table => std::iter::once(("pooled".into(), vec![]))
            .chain(Covariate::ALL.iter().map(|&c| (format!("univariable:{c}"), vec![c])))
            .chain([("multivariable".into(), Covariate::MULTIVARIABLE.to_vec())])
            .collect(),
    }
}

/// Records for one estimator after the selection filters.
pub fn select_records(
    files: &[AggregateFile],
    estimator: Estimator,
    tau: QuantileSpec,
    arm: Option<Arm>,
) -> Vec<AggregateRecordF64> {
    let mut out = Vec::new();
    for f in files {
        let mut tmp = f.clone();
        tmp.units.retain(|u| u.tau_spec == tau);
        out.extend(
            tmp.records()
                .into_iter()
                .filter(|r| r.estimator == estimator && arm.is_none_or(|a| r.arm == a)),
        );
    }
    out.sort_by(|a, b| (&a.trial_id, &a.ae_type, a.arm).cmp(&(&b.trial_id, &b.ae_type, b.arm)));
    out
}

fn row(model: &str, estimator: Estimator, fit: &MetaFitF64, term: &str, quantity: &str, values: (f64, f64, f64), coef: (f64, f64)) -> MetaRow {
    MetaRow {
        model: model.to_string(),
        estimator,
        term: term.to_string(),
        quantity: quantity.to_string(),
        value: values.0,
        ci_low: values.1,
        ci_high: values.2,
        coef: coef.0,
        se: coef.1,
        k: fit.k,
        tau2: fit.tau2,
    }
}

pub fn run_meta(files: &[AggregateFile], req: &MetaRequest) -> Result<MetaReport, CliError> {
    if req.estimators.is_empty() {
        return Err(CliError::input("no estimator selected"));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut excluded = 0;
    for &estimator in &req.estimators {
        let all = select_records(files, estimator, req.tau, req.arm);
        let records = usable_records(&all);
        excluded += all.len() - records.len();
        for (name, covs) in model_specs(req.model) {
            let fit = if covs.is_empty() {
                fit_random_effects(&records, &req.options)
            } else {
                fit_meta_regression(&records, &covs, &req.options)
            }
            .map_err(|e| CliError::from(e).context(&format!("{name} for {estimator}")))?;

            let ic = fit.intercept();
            rows.push(row(
                &name,
                estimator,
                &fit,
                "intercept",
                "average risk ratio",
                (fit.average_ratio(), ic.ci_low.exp(), ic.ci_high.exp()),
                (ic.estimate, ic.se),
            ));
            for &c in &covs {
                let change = multiplicative_change(&fit, c, c.reporting_delta())?;
                let coef = fit.coefficient(c).expect("fitted covariate");
                rows.push(row(
                    &name,
                    estimator,
                    &fit,
                    c.id(),
                    increment_label(c),
                    (change.ratio, change.ci_low, change.ci_high),
                    (coef.estimate, coef.se),
                ));
            }
            fits.push((name, estimator, fit));
        }
    }
    Ok(MetaReport { rows, excluded, fits })
}

impl MetaReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,estimator,term,quantity,value,ci_low,ci_high,coef,se,k,tau2\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.model, r.estimator, r.term, r.quantity, r.value, r.ci_low, r.ci_high, r.coef, r.se, r.k, r.tau2
            )
            .unwrap();
        }
        s
    }

    /// Rows grouped by model, one column per estimator.
    pub fn to_text(&self) -> String {
        let mut estimators: Vec<Estimator> = Vec::new();
        let mut lines: Vec<(String, String, String)> = Vec::new();
        for r in &self.rows {
            if !estimators.contains(&r.estimator) {
                estimators.push(r.estimator);
            }
            let key = (r.model.clone(), r.term.clone(), r.quantity.clone());
            if !lines.contains(&key) {
                lines.push(key);
            }
        }
        let cell = |model: &str, term: &str, e: Estimator| {
            self.rows
                .iter()
                .find(|r| r.model == model && r.term == term && r.estimator == e)
                .map(|r| format!("{:.3} [{:.3}; {:.3}]", r.value, r.ci_low, r.ci_high))
                .unwrap_or_default()
        };

        let label_width = lines
            .iter()
            .map(|(_, t, q)| label(t, q).len())
            .max()
            .unwrap_or(0)
            .max(5);
        let col = 24;
        let mut s = String::new();
        write!(s, "{:label_width$}", "").unwrap();
        for e in &estimators {
            write!(s, "  {:>col$}", e.id()).unwrap();
        }
        s.push('\n');
        let mut last_model = "";
        for (m, t, q) in &lines {
            if m != last_model {
                writeln!(s, "{m}").unwrap();
                last_model = m;
            }
            write!(s, "{:label_width$}", label(t, q)).unwrap();
            for &e in &estimators {
                write!(s, "  {:>col$}", cell(m, t, e)).unwrap();
            }
            s.push('\n');
        }
        if self.excluded > 0 {
            writeln!(s, "excluded records (unstable bootstrap): {}", self.excluded).unwrap();
        }
        s
    }
}

fn label(term: &str, quantity: &str) -> String {
    if term == "intercept" {
        format!("  {quantity}")
    } else {
        format!("  {term} {quantity}")
    }
}
