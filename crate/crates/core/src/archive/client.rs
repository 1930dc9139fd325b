use std::collections::BTreeMap;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use tracing::warn;

use super::{
    parse_capture_record, parse_index_lines, select_subpages_with, ArchiveError, CdxEntry,
    FirmRecord, IndexQuery, PageCapture, SelectionOptions, Snapshot,
};
use crate::extract::KeywordTable;
use crate::net::{read_local, Endpoint, HttpClient, Location, RetryPolicy};

#[derive(Debug, Clone)]
pub struct ArchiveClientConfig {
    pub index: Endpoint,
    pub data: Endpoint,
    pub retry: RetryPolicy,
    pub index_rps: u32,
    pub data_rps: u32,
    pub timeout: Duration,
    /// Maximum in-flight capture fetches.
    pub concurrency: usize,
}

impl ArchiveClientConfig {
    pub fn new(index: Endpoint, data: Endpoint) -> Self {
        Self {
            index,
            data,
            retry: RetryPolicy::default(),
            index_rps: 2,
            data_rps: 10,
            timeout: Duration::from_secs(60),
            concurrency: 8,
        }
    }
}

/// Everything gathered for one firm in one snapshot.
#[derive(Debug, Clone, Default)]
pub struct FirmSnapshotCaptures {
    /// All retained index entries across the firm's domains, deduplicated by URL.
    pub entries: Vec<CdxEntry>,
    /// Fetched and decoded captures of the selected subpages, sorted by URL.
    pub captures: Vec<PageCapture>,
    pub malformed_index_lines: usize,
    /// Human-readable reasons for captures that were dropped.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ArchiveClient {
    config: ArchiveClientConfig,
    index_http: HttpClient,
    data_http: HttpClient,
}

impl ArchiveClient {
    pub fn new(config: ArchiveClientConfig) -> Self {
        let index_http = HttpClient::new(config.retry, config.index_rps, config.timeout);
        let data_http = HttpClient::new(config.retry, config.data_rps, config.timeout);
        Self {
            config,
            index_http,
            data_http,
        }
    }

    pub fn config(&self) -> &ArchiveClientConfig {
        &self.config
    }

    /// Index entries for `domain` (and its subdomains) in `snapshot`.
    pub async fn query_domain_captures(
        &self,
        domain: &str,
        snapshot: &Snapshot,
    ) -> Result<IndexQuery, ArchiveError> {
        let domain = domain.trim().to_ascii_lowercase();
        if domain.is_empty() {
            return Err(ArchiveError::InvalidEntry {
                url: String::new(),
                message: "empty domain".into(),
            });
        }
        let body = match &self.config.index {
            Endpoint::Http(_) => {
                let Location::Http(mut url) = self.config.index.join(&format!("{}-index", snapshot.id))?
                else {
                    unreachable!("http endpoint joins to http location")
                };
                url.query_pairs_mut()
                    .append_pair("url", &domain)
                    .append_pair("matchType", "domain")
                    .append_pair("output", "json");
                self.index_http.get(&url, None).await?
            }
            Endpoint::Local(dir) => read_local(&dir.join(format!("{}-index.jsonl", snapshot.id)), None).await?,
        };
        let Some(body) = body else {
            return Ok(IndexQuery::default());
        };
        Ok(parse_index_lines(&String::from_utf8_lossy(&body), &domain))
    }

    /// Range-read one record and decode it into a capture.
    pub async fn fetch_capture(
        &self,
        entry: &CdxEntry,
        firm_id: &str,
        snapshot_id: &str,
    ) -> Result<PageCapture, ArchiveError> {
        entry.validate()?;
        let range = entry.offset..entry.offset + entry.length;
        let bytes = match self.config.data.join(&entry.archive_file)? {
            Location::Http(url) => self.data_http.get(&url, Some(range)).await?,
            Location::Local(path) => read_local(&path, Some(range)).await?,
        }
        .ok_or_else(|| ArchiveError::MissingArchiveFile(entry.archive_file.clone()))?;
        let body = parse_capture_record(&bytes, entry)?;
        Ok(PageCapture {
            firm_id: firm_id.to_string(),
            snapshot: snapshot_id.to_string(),
            url: entry.url.clone(),
            digest: entry.digest.clone(),
            body,
        })
    }

    /// Query every domain of `firm`, select subpages and fetch them with a
    /// bounded in-flight window. Record-level failures are collected as
    /// warnings; index failures abort.
    pub async fn collect_firm_snapshot(
        &self,
        firm: &FirmRecord,
        snapshot: &Snapshot,
        keywords: &KeywordTable,
        selection: &SelectionOptions,
    ) -> Result<FirmSnapshotCaptures, ArchiveError> {
        let mut out = FirmSnapshotCaptures::default();
        let mut by_url: BTreeMap<String, CdxEntry> = BTreeMap::new();
        for domain in &firm.domains {
            let q = self.query_domain_captures(domain, snapshot).await?;
            out.malformed_index_lines += q.malformed;
            for e in q.entries {
                by_url.entry(e.url.clone()).or_insert(e);
            }
        }
        out.entries = by_url.into_values().collect();
        let selected = select_subpages_with(&out.entries, keywords, selection);
        let results: Vec<_> = stream::iter(selected.iter())
            .map(|e| async move { (e, self.fetch_capture(e, &firm.firm_id, &snapshot.id).await) })
            .buffer_unordered(self.config.concurrency.max(1))
            .collect()
            .await;
        for (entry, res) in results {
            match res {
                Ok(c) => out.captures.push(c),
                Err(e) => {
                    warn!(firm = %firm.firm_id, snapshot = %snapshot.id, url = %entry.url, error = %e, "capture discarded");
                    out.warnings.push(format!("{} {} {}: {e}", firm.firm_id, snapshot.id, entry.url));
                }
            }
        }
        out.captures.sort_by(|a, b| a.url.cmp(&b.url));
        out.warnings.sort();
        Ok(out)
    }
}
