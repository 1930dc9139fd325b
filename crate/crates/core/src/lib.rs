//! Web-based affectedness indicator (WAI).
//!
//! The crate is organised along the stages of the pipeline:
//!
//! - [`archive`]: snapshot registry, archive index lookups, subpage selection,
//!   byte-range record fetching and crawl-coverage statistics.
//! - [`extract`]: HTML to text blocks and multilingual keyword filtering.
//! - [`classify`]: few-shot prompt construction, model output parsing,
//!   backends and per-firm, per-snapshot aggregation.
//! - [`indicator`]: tag umbrellas, region/industry/country aggregates and
//!   sample-coverage filters.
//! - [`validate`]: policy-stringency ingestion and first-difference correlations.
//! - [`econpanel`]: firm-quarter panel construction and fixed-effects
//!   regressions with firm-clustered standard errors.

pub mod archive;
pub mod classify;
pub mod econpanel;
pub mod extract;
pub mod indicator;
pub mod jsonl;
pub mod net;
pub mod validate;

pub use archive::{CdxEntry, FirmRecord, PageCapture, Snapshot, SnapshotRegistry};
pub use classify::{Classification, FirmPeriodIndicator};
pub use econpanel::{PanelObservation, RegressionResult, RegressionSpec};
pub use extract::{KeywordTable, Paragraph};
