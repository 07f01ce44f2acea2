//! Two-stage pipeline around `aerisk-core`: trial sites run `analyze` on
//! patient-level CSV and share only the aggregate JSON; the central site
//! runs `meta` and `report` on the collected aggregates.

pub mod analyze;
pub mod error;
pub mod meta_report;
pub mod num;
pub mod output;
pub mod report;
pub mod schema;

pub use analyze::{analyze, AnalyzeOptions};
pub use error::{CliError, ErrorKind};
pub use meta_report::{run_meta, MetaReport, MetaRequest, Model};
pub use schema::{AggregateFile, SCHEMA_VERSION};
