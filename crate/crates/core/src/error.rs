use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("line {line}: time must be finite and > 0, got {value}")]
    InvalidTime { line: u64, value: String },

    #[error("line {line}: unknown event code {code:?}")]
    UnknownEventCode { line: u64, code: String },

    #[error("line {line}: duplicate patient_id {patient_id:?} in trial {trial_id:?}, AE type {ae_type:?}")]
    DuplicatePatient {
        line: u64,
        trial_id: String,
        ae_type: String,
        patient_id: String,
    },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("arm {0} has no patients")]
    EmptyArm(&'static str),

    #[error("patient-time at risk is zero")]
    ZeroAtRiskTime,

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("ratio undefined: {0}")]
    RatioUndefined(String),

    #[error("only {valid} usable bootstrap replicates (need at least 2)")]
    InsufficientReplicates { valid: usize },

    #[error("invalid bootstrap configuration: {0}")]
    InvalidBootstrap(String),

    #[error("need {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("covariate {0} not present in fit")]
    UnknownCovariate(String),

    #[error("invalid meta-analysis input: {0}")]
    InvalidMetaInput(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Whether the error is a numeric/degenerate condition rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ZeroAtRiskTime
                | Error::RatioUndefined(_)
                | Error::InsufficientReplicates { .. }
                | Error::TooFewRecords { .. }
                | Error::RankDeficient
        )
    }
}
