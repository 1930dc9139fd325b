//! Archive ingest: resolve firm domains to archived captures across crawl
//! snapshots, fetch and decode them, and measure crawl coverage.

mod client;
mod coverage;
mod firm;
mod index;
mod record;
mod registry;
mod select;

pub use client::{ArchiveClient, ArchiveClientConfig, FirmSnapshotCaptures};
pub use coverage::{content_heartbeat, heartbeat_counts, heartbeat_ratio, jaccard_overlap};
pub use firm::{load_firms, parse_firms, FirmRecord};
pub use index::{parse_index_lines, CdxEntry, IndexQuery};
pub use record::{
    decode_text, parse_capture_record, parse_http_response, parse_warc_record, payload_digest,
    HttpResponse, WarcRecord,
};
pub use registry::{load_snapshot_registry, parse_period_label, parse_snapshot_registry, Snapshot, SnapshotRegistry};
pub use select::{select_subpages, select_subpages_with, SelectionOptions, UrlLengthMode};

use serde::{Deserialize, Serialize};

use crate::net::NetError;

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty registry")]
    EmptyRegistry,
    #[error("duplicate snapshot id {0:?}")]
    DuplicateSnapshot(String),
    #[error("snapshot {id:?}: unparseable period {value:?}")]
    BadPeriod { id: String, value: String },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("invalid firm record {firm_id:?}: {message}")]
    InvalidFirm { firm_id: String, message: String },
    #[error("invalid index entry for {url:?}: {message}")]
    InvalidEntry { url: String, message: String },
    #[error("archive record for {url:?}: {message}")]
    Record { url: String, message: String },
    #[error("digest mismatch for {url:?}: index says {expected}, payload hashes to {actual}")]
    DigestMismatch {
        url: String,
        expected: String,
        actual: String,
    },
    #[error("archive file {0} not found")]
    MissingArchiveFile(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// One archived subpage of a firm's website in one snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageCapture {
    pub firm_id: String,
    pub snapshot: String,
    pub url: String,
    pub digest: String,
    pub body: String,
}
