//! Policy-stringency ingestion and first-difference correlations between
//! regional WAI series and stringency.

mod correlate;
mod policy;

pub use correlate::{
    align_periods, correlation_report, first_diff, pearson, CorrelationOptions, CorrelationRow,
    PairedPoint, StringencyReduction, WaiMeasure,
};
pub use policy::{average_stringency, load_policy_series, parse_policy_csv, PolicyPoint, PolicySeries};

use chrono::NaiveDate;

#[derive(Debug, thiserror::Error)]
pub enum ValidateError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("stringency {value} for {region} on {date} outside 0..100")]
    StringencyOutOfRange {
        region: String,
        date: NaiveDate,
        value: f64,
    },
    #[error("series too short: need {needed}, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined for a constant series")]
    Constant,
}
