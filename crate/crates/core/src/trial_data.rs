//! Patient-level data model, CSV ingestion, evaluation times and observed
//! event frequencies.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Column header of the patient-level CSV.
pub const CSV_HEADER: [&str; 6] = [
    "trial_id",
    "ae_type",
    "patient_id",
    "arm",
    "time_days",
    "event_code",
];

pub const DAYS_PER_YEAR: f64 = 365.25;

/// Type of the first observed event of a patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventClass {
    Ae,
    DeathBeforeAe,
    OtherCe,
    Censored,
}

impl EventClass {
    pub fn from_code(code: &str) -> Option<Self> {
        match code.trim() {
            "0" => Some(EventClass::Censored),
            "1" => Some(EventClass::Ae),
            "2" => Some(EventClass::DeathBeforeAe),
            "3" => Some(EventClass::OtherCe),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            EventClass::Censored => 0,
            EventClass::Ae => 1,
            EventClass::DeathBeforeAe => 2,
            EventClass::OtherCe => 3,
        }
    }

    pub fn is_competing(self) -> bool {
        matches!(self, EventClass::DeathBeforeAe | EventClass::OtherCe)
    }

    /// Recode under a competing-event definition. Death-only treats
    /// non-death competing events as censoring.
    pub fn under_scope(self, scope: CeScope) -> Self {
        match (scope, self) {
            (CeScope::DeathOnly, EventClass::OtherCe) => EventClass::Censored,
            (_, class) => class,
        }
    }
}

/// Which events count as competing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CeScope {
    /// Death before AE and every other event that ends AE recording.
    #[default]
    #[serde(rename = "all")]
    AllCe,
    /// Death before AE only.
    DeathOnly,
}

impl CeScope {
    pub fn as_str(self) -> &'static str {
        match self {
            CeScope::AllCe => "all",
            CeScope::DeathOnly => "death-only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    E,
    C,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::E => "E",
            Arm::C => "C",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "E" => Some(Arm::E),
            "C" => Some(Arm::C),
            _ => None,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord<T> {
    pub patient_id: String,
    pub arm: Arm,
    /// Days since start of observation.
    pub time: T,
    pub event: EventClass,
}

impl<T: Real> PatientRecord<T> {
    pub fn new(patient_id: impl Into<String>, arm: Arm, time: T, event: EventClass) -> Result<Self> {
        let patient_id = patient_id.into();
        if !(time.is_finite() && time > T::zero()) {
            return Err(Error::InvalidRecord(format!(
                "patient {patient_id}: time must be finite and > 0, got {time}"
            )));
        }
        Ok(Self {
            patient_id,
            arm,
            time,
            event,
        })
    }
}

/// All records of one (trial, AE type) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisDataset<T> {
    pub trial_id: String,
    pub ae_type: String,
    records: Vec<PatientRecord<T>>,
}

impl<T: Real> AnalysisDataset<T> {
    pub fn new(
        trial_id: impl Into<String>,
        ae_type: impl Into<String>,
        records: Vec<PatientRecord<T>>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !(r.time.is_finite() && r.time > T::zero()) {
                return Err(Error::InvalidRecord(format!(
                    "patient {}: time must be finite and > 0",
                    r.patient_id
                )));
            }
            if !seen.insert(r.patient_id.as_str()) {
                return Err(Error::InvalidRecord(format!(
                    "duplicate patient_id {:?}",
                    r.patient_id
                )));
            }
        }
        Ok(Self {
            trial_id: trial_id.into(),
            ae_type: ae_type.into(),
            records,
        })
    }

    pub fn records(&self) -> &[PatientRecord<T>] {
        &self.records
    }

    pub fn arm_records(&self, arm: Arm) -> impl Iterator<Item = &PatientRecord<T>> + '_ {
        self.records.iter().filter(move |r| r.arm == arm)
    }

    pub fn n(&self, arm: Arm) -> usize {
        self.arm_records(arm).count()
    }

    pub fn n_e(&self) -> usize {
        self.n(Arm::E)
    }

    pub fn n_c(&self) -> usize {
        self.n(Arm::C)
    }

    /// Copy with event classes recoded under `scope`. Times and sizes are unchanged.
    pub fn with_scope(&self, scope: CeScope) -> Self {
        Self {
            trial_id: self.trial_id.clone(),
            ae_type: self.ae_type.clone(),
            records: self
                .records
                .iter()
                .map(|r| PatientRecord {
                    event: r.event.under_scope(scope),
                    ..r.clone()
                })
                .collect(),
        }
    }

    pub fn max_time(&self) -> Option<T> {
        self.records.iter().map(|r| r.time).reduce(T::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantileSpec {
    #[serde(rename = "max")]
    MaxFollowUp,
    Q100,
    Q90,
    Q60,
    Q30,
}

impl QuantileSpec {
    pub const ALL: [QuantileSpec; 5] = [
        QuantileSpec::MaxFollowUp,
        QuantileSpec::Q100,
        QuantileSpec::Q90,
        QuantileSpec::Q60,
        QuantileSpec::Q30,
    ];

    /// Quantile level in percent; `None` for maximum follow-up.
    pub fn percent(self) -> Option<u32> {
        match self {
            QuantileSpec::MaxFollowUp => None,
            QuantileSpec::Q100 => Some(100),
            QuantileSpec::Q90 => Some(90),
            QuantileSpec::Q60 => Some(60),
            QuantileSpec::Q30 => Some(30),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuantileSpec::MaxFollowUp => "max",
            QuantileSpec::Q100 => "q100",
            QuantileSpec::Q90 => "q90",
            QuantileSpec::Q60 => "q60",
            QuantileSpec::Q30 => "q30",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.as_str() == s)
    }
}

impl fmt::Display for QuantileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationTime<T> {
    pub tau: T,
    pub quantile_spec: QuantileSpec,
}

impl<T: Real> EvaluationTime<T> {
    pub fn tau_years(&self) -> T {
        self.tau / T::lit(DAYS_PER_YEAR)
    }
}

/// Smallest observed value whose empirical CDF reaches `percent`/100
/// (left-continuous inverse of the ECDF).
pub fn empirical_quantile<T: Real>(values: &[T], percent: u32) -> Option<T> {
    if values.is_empty() || percent == 0 || percent > 100 {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let n = sorted.len();
    // k = ceil(percent * n / 100), in integers
    let k = (percent as usize * n).div_ceil(100);
    Some(sorted[k.max(1) - 1])
}

/// Evaluation time for the dataset: the overall maximum follow-up, or the
/// minimum over both arms of the per-arm quantile of all observed times.
pub fn evaluation_time<T: Real>(
    dataset: &AnalysisDataset<T>,
    spec: QuantileSpec,
) -> Result<EvaluationTime<T>> {
    let tau = match spec.percent() {
        None => dataset.max_time().ok_or(Error::EmptyArm("E"))?,
        Some(pct) => {
            let mut tau: Option<T> = None;
            for arm in [Arm::E, Arm::C] {
                let times: Vec<T> = dataset.arm_records(arm).map(|r| r.time).collect();
                let q = empirical_quantile(&times, pct).ok_or(Error::EmptyArm(arm.as_str()))?;
                tau = Some(tau.map_or(q, |t| t.min(q)));
            }
            tau.expect("two arms visited")
        }
    };
    Ok(EvaluationTime {
        tau,
        quantile_spec: spec,
    })
}

/// Relative frequencies of first observed events on `[0, tau]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventFrequencies<T> {
    pub frac_ae: T,
    pub frac_death: T,
    pub frac_other_ce: T,
    pub frac_censored: T,
}

impl<T: Real> EventFrequencies<T> {
    pub fn frac_ce(&self) -> T {
        self.frac_death + self.frac_other_ce
    }

    pub fn total(&self) -> T {
        self.frac_ae + self.frac_death + self.frac_other_ce + self.frac_censored
    }
}

/// Observed event class at `tau`: anything after `tau` is censored at `tau`.
#[inline]
pub fn class_at<T: Real>(record: &PatientRecord<T>, tau: T) -> EventClass {
    if record.time > tau {
        EventClass::Censored
    } else {
        record.event
    }
}

pub fn event_frequencies<T: Real>(
    dataset: &AnalysisDataset<T>,
    arm: Arm,
    tau: T,
) -> Result<EventFrequencies<T>> {
    let mut counts = [0usize; 4];
    for r in dataset.arm_records(arm) {
        let slot = match class_at(r, tau) {
            EventClass::Ae => 0,
            EventClass::DeathBeforeAe => 1,
            EventClass::OtherCe => 2,
            EventClass::Censored => 3,
        };
        counts[slot] += 1;
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptyArm(arm.as_str()));
    }
    let n = T::from_count(n);
    let f = |c: usize| T::from_count(c) / n;
    Ok(EventFrequencies {
        frac_ae: f(counts[0]),
        frac_death: f(counts[1]),
        frac_other_ce: f(counts[2]),
        frac_censored: f(counts[3]),
    })
}

pub fn parse_patient_csv<T: Real>(path: impl AsRef<Path>) -> Result<Vec<AnalysisDataset<T>>> {
    let file = std::fs::File::open(path)?;
    parse_patient_csv_reader(std::io::BufReader::new(file))
}

/// Parse the patient CSV into one dataset per distinct (trial_id, ae_type),
/// ordered by that key.
pub fn parse_patient_csv_reader<T: Real, R: Read>(reader: R) -> Result<Vec<AnalysisDataset<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| Error::MalformedRow {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!(
                "expected header {:?}, got {:?}",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    type Group<T> = (Vec<PatientRecord<T>>, HashSet<String>);
    let mut groups: BTreeMap<(String, String), Group<T>> = BTreeMap::new();

    for row in rdr.records() {
        let row = row.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != CSV_HEADER.len() {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {} fields, got {}", CSV_HEADER.len(), row.len()),
            });
        }
        let trial_id = &row[0];
        let ae_type = &row[1];
        let patient_id = &row[2];
        if trial_id.is_empty() || ae_type.is_empty() || patient_id.is_empty() {
            return Err(Error::MalformedRow {
                line,
                message: "empty identifier".into(),
            });
        }
        let arm = Arm::parse(&row[3]).ok_or_else(|| Error::MalformedRow {
            line,
            message: format!("arm must be E or C, got {:?}", &row[3]),
        })?;
        let time = row[4]
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite() && *t > 0.0)
            .and_then(T::from_f64)
            .filter(|t| *t > T::zero())
            .ok_or_else(|| Error::InvalidTime {
                line,
                value: row[4].to_string(),
            })?;
        let event = EventClass::from_code(&row[5]).ok_or_else(|| Error::UnknownEventCode {
            line,
            code: row[5].to_string(),
        })?;

        let (records, ids) = groups
            .entry((trial_id.to_string(), ae_type.to_string()))
            .or_default();
        if !ids.insert(patient_id.to_string()) {
            return Err(Error::DuplicatePatient {
                line,
                trial_id: trial_id.to_string(),
                ae_type: ae_type.to_string(),
                patient_id: patient_id.to_string(),
            });
        }
        records.push(PatientRecord {
            patient_id: patient_id.to_string(),
            arm,
            time,
            event,
        });
    }

    Ok(groups
        .into_iter()
        .map(|((trial_id, ae_type), (records, _))| AnalysisDataset {
            trial_id,
            ae_type,
            records,
        })
        .collect())
}

/// Write datasets in the same CSV schema accepted by [`parse_patient_csv`].
/// Times are written with Rust's shortest round-trip formatting.
pub fn write_patient_csv<T: Real, W: Write>(datasets: &[AnalysisDataset<T>], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wtr.write_record(CSV_HEADER).map_err(csv_err)?;
    for ds in datasets {
        for r in &ds.records {
            wtr.write_record([
                ds.trial_id.as_str(),
                ds.ae_type.as_str(),
                r.patient_id.as_str(),
                r.arm.as_str(),
                &format!("{}", r.time.to_f64_lossy()),
                &r.event.code().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, arm: Arm, time: f64, event: EventClass) -> PatientRecord<f64> {
        PatientRecord::new(id, arm, time, event).unwrap()
    }

    fn fixture() -> AnalysisDataset<f64> {
        use EventClass::*;
        AnalysisDataset::new(
            "T1",
            "nausea",
            vec![
                rec("p1", Arm::E, 1.0, Ae),
                rec("p2", Arm::E, 2.0, OtherCe),
                rec("p3", Arm::E, 3.0, Censored),
                rec("p4", Arm::E, 4.0, Ae),
            ],
        )
        .unwrap()
    }

    #[test]
    fn four_row_file_gives_one_dataset() {
        let csv = "trial_id,ae_type,patient_id,arm,time_days,event_code\n\
                   T1,nausea,p1,E,1,1\nT1,nausea,p2,E,2,3\nT1,nausea,p3,E,3,0\nT1,nausea,p4,E,4,1\n";
        let sets: Vec<AnalysisDataset<f64>> = parse_patient_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].records().len(), 4);
        assert_eq!(sets[0], fixture());
    }

    #[test]
    fn zero_time_names_the_row() {
        let csv = "trial_id,ae_type,patient_id,arm,time_days,event_code\n\
                   T1,nausea,p1,E,1,1\nT1,nausea,p2,E,0,3\n";
        let err = parse_patient_csv_reader::<f64, _>(csv.as_bytes()).unwrap_err();
        match err {
            Error::InvalidTime { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let negative = csv.replace("p2,E,0,3", "p2,E,-2,3");
        let msg = parse_patient_csv_reader::<f64, _>(negative.as_bytes())
            .unwrap_err()
            .to_string();
        assert!(msg.starts_with("line 3:"), "{msg}");
    }

    #[test]
    fn two_trials_three_ae_types() {
        let mut csv = String::from("trial_id,ae_type,patient_id,arm,time_days,event_code\n");
        for t in ["A", "B"] {
            for ae in ["x", "y", "z"] {
                for p in 0..3 {
                    csv.push_str(&format!("{t},{ae},p{p},E,{}.5,0\n", p + 1));
                }
            }
        }
        let sets: Vec<AnalysisDataset<f64>> = parse_patient_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(sets.len(), 6);
        assert!(sets.iter().all(|s| s.records().len() == 3));
        assert_eq!((sets[0].trial_id.as_str(), sets[0].ae_type.as_str()), ("A", "x"));
        assert_eq!((sets[5].trial_id.as_str(), sets[5].ae_type.as_str()), ("B", "z"));
    }

    #[test]
    fn rejects_bad_rows() {
        let head = "trial_id,ae_type,patient_id,arm,time_days,event_code\n";
        let bad_code = format!("{head}T,a,p,E,1,7\n");
        assert!(matches!(
            parse_patient_csv_reader::<f64, _>(bad_code.as_bytes()),
            Err(Error::UnknownEventCode { line: 2, .. })
        ));
        let dup = format!("{head}T,a,p,E,1,1\nT,a,p,C,2,0\n");
        assert!(matches!(
            parse_patient_csv_reader::<f64, _>(dup.as_bytes()),
            Err(Error::DuplicatePatient { line: 3, .. })
        ));
        // same id under a different AE type is fine
        let ok = format!("{head}T,a,p,E,1,1\nT,b,p,E,2,0\n");
        assert_eq!(parse_patient_csv_reader::<f64, _>(ok.as_bytes()).unwrap().len(), 2);
        let short = format!("{head}T,a,p,E,1\n");
        assert!(matches!(
            parse_patient_csv_reader::<f64, _>(short.as_bytes()),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let bad_arm = format!("{head}T,a,p,X,1,1\n");
        assert!(matches!(
            parse_patient_csv_reader::<f64, _>(bad_arm.as_bytes()),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let nan = format!("{head}T,a,p,E,NaN,1\n");
        assert!(matches!(
            parse_patient_csv_reader::<f64, _>(nan.as_bytes()),
            Err(Error::InvalidTime { line: 2, .. })
        ));
        let header = "trial,ae_type,patient_id,arm,time_days,event_code\nT,a,p,E,1,1\n";
        assert!(matches!(
            parse_patient_csv_reader::<f64, _>(header.as_bytes()),
            Err(Error::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn write_then_parse_round_trips() {
        let ds = fixture();
        let mut buf = Vec::new();
        write_patient_csv(std::slice::from_ref(&ds), &mut buf).unwrap();
        let back: Vec<AnalysisDataset<f64>> = parse_patient_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(back, vec![ds]);
    }

    #[test]
    fn evaluation_time_examples() {
        use EventClass::Censored;
        let mut recs = Vec::new();
        for (i, t) in [10.0, 20.0, 30.0].iter().enumerate() {
            recs.push(rec(&format!("e{i}"), Arm::E, *t, Censored));
        }
        for (i, t) in [5.0, 50.0].iter().enumerate() {
            recs.push(rec(&format!("c{i}"), Arm::C, *t, Censored));
        }
        let ds = AnalysisDataset::new("T", "a", recs).unwrap();
        assert_eq!(evaluation_time(&ds, QuantileSpec::Q100).unwrap().tau, 30.0);
        assert_eq!(evaluation_time(&ds, QuantileSpec::MaxFollowUp).unwrap().tau, 50.0);

        let single = AnalysisDataset::new("T", "a", vec![rec("p", Arm::E, 7.0, Censored)]).unwrap();
        assert_eq!(evaluation_time(&single, QuantileSpec::MaxFollowUp).unwrap().tau, 7.0);
        assert!(matches!(
            evaluation_time(&single, QuantileSpec::Q90),
            Err(Error::EmptyArm("C"))
        ));
    }

    #[test]
    fn q90_of_one_to_ten_matches_sort_and_index() {
        let mut recs = Vec::new();
        for i in 1..=10 {
            recs.push(rec(&format!("e{i}"), Arm::E, i as f64, EventClass::Censored));
            recs.push(rec(&format!("c{i}"), Arm::C, (11 - i) as f64, EventClass::Ae));
        }
        let ds = AnalysisDataset::new("T", "a", recs).unwrap();
        // oracle: smallest t with #{x <= t}/10 >= 0.9
        let oracle = (1..=10)
            .map(|t| t as f64)
            .find(|t| (1..=10).filter(|x| (*x as f64) <= *t).count() as f64 / 10.0 >= 0.9)
            .unwrap();
        assert_eq!(oracle, 9.0);
        assert_eq!(evaluation_time(&ds, QuantileSpec::Q90).unwrap().tau, oracle);
        assert_eq!(evaluation_time(&ds, QuantileSpec::Q30).unwrap().tau, 3.0);
        assert_eq!(evaluation_time(&ds, QuantileSpec::Q60).unwrap().tau, 6.0);
    }

    #[test]
    fn empirical_quantile_edges() {
        assert_eq!(empirical_quantile::<f64>(&[], 50), None);
        assert_eq!(empirical_quantile(&[3.0], 30), Some(3.0));
        assert_eq!(empirical_quantile(&[4.0, 1.0, 3.0, 2.0], 50), Some(2.0));
        assert_eq!(empirical_quantile(&[4.0, 1.0, 3.0, 2.0], 51), Some(3.0));
        assert_eq!(empirical_quantile(&[2.0, 2.0, 2.0, 9.0], 75), Some(2.0));
    }

    #[test]
    fn frequencies_examples() {
        let ds = fixture();
        let f = event_frequencies(&ds, Arm::E, 4.0).unwrap();
        assert_eq!((f.frac_ae, f.frac_death, f.frac_other_ce, f.frac_censored), (0.5, 0.0, 0.25, 0.25));
        let f = event_frequencies(&ds, Arm::E, 1.5).unwrap();
        assert_eq!((f.frac_ae, f.frac_death, f.frac_other_ce, f.frac_censored), (0.25, 0.0, 0.0, 0.75));

        let all_ae = AnalysisDataset::new(
            "T",
            "a",
            (0..5).map(|i| rec(&format!("p{i}"), Arm::E, 1.0 + i as f64, EventClass::Ae)).collect(),
        )
        .unwrap();
        let f = event_frequencies(&all_ae, Arm::E, 10.0).unwrap();
        assert_eq!((f.frac_ae, f.frac_death, f.frac_other_ce, f.frac_censored), (1.0, 0.0, 0.0, 0.0));
        assert!(matches!(event_frequencies(&ds, Arm::C, 4.0), Err(Error::EmptyArm("C"))));
    }

    #[test]
    fn death_only_scope_keeps_sizes_and_times() {
        let ds = fixture();
        let d = ds.with_scope(CeScope::DeathOnly);
        assert_eq!(d.n_e(), ds.n_e());
        assert!(d
            .records()
            .iter()
            .zip(ds.records())
            .all(|(a, b)| a.time == b.time && a.patient_id == b.patient_id));
        assert_eq!(d.records()[1].event, EventClass::Censored);
        assert_eq!(ds.with_scope(CeScope::AllCe), ds);
    }

    #[test]
    fn invalid_records_rejected() {
        assert!(PatientRecord::new("p", Arm::E, 0.0, EventClass::Ae).is_err());
        assert!(PatientRecord::new("p", Arm::E, f64::INFINITY, EventClass::Ae).is_err());
        assert!(PatientRecord::new("p", Arm::E, -1.0f32, EventClass::Ae).is_err());
        let r = rec("p", Arm::E, 1.0, EventClass::Ae);
        assert!(AnalysisDataset::new("T", "a", vec![r.clone(), r]).is_err());
    }
}
