use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::warn;
use url::Url;

use super::ArchiveError;

/// One archive index record: where a capture lives and what it hashes to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CdxEntry {
    pub url: String,
    pub digest: String,
    #[serde(rename = "filename")]
    pub archive_file: String,
    pub offset: u64,
    pub length: u64,
    pub status: u16,
    pub mime: String,
}

impl CdxEntry {
    pub fn validate(&self) -> Result<(), ArchiveError> {
        let bad = |message: &str| ArchiveError::InvalidEntry {
            url: self.url.clone(),
            message: message.to_string(),
        };
        if self.length == 0 {
            return Err(bad("zero-length record"));
        }
        match Url::parse(&self.url) {
            Ok(u) if u.has_host() => {}
            _ => return Err(bad("url is not absolute")),
        }
        if self.archive_file.is_empty() {
            return Err(bad("no archive file"));
        }
        Ok(())
    }

    pub fn host(&self) -> Option<String> {
        Url::parse(&self.url)
            .ok()
            .and_then(|u| u.host_str().map(|h| h.to_ascii_lowercase()))
    }

    pub fn is_html(&self) -> bool {
        let m = self.mime.to_ascii_lowercase();
        m.starts_with("text/html") || m.starts_with("application/xhtml+xml")
    }
}

/// Entries kept for a domain plus the number of index lines that could not be
/// parsed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexQuery {
    pub entries: Vec<CdxEntry>,
    pub malformed: usize,
}

/// `host` equals `domain` or is a subdomain of it.
pub(crate) fn host_in_domain(host: &str, domain: &str) -> bool {
    let host = host.trim_end_matches('.');
    host == domain
        || host
            .strip_suffix(domain)
            .is_some_and(|prefix| prefix.ends_with('.'))
}

fn field_str(obj: &serde_json::Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn field_u64(obj: &serde_json::Map<String, Value>, key: &str) -> Option<u64> {
    match obj.get(key)? {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn parse_line(line: &str) -> Option<CdxEntry> {
    let value: Value = serde_json::from_str(line).ok()?;
    let obj = value.as_object()?;
    let mime = field_str(obj, "mime")
        .filter(|m| !m.is_empty() && m != "unk")
        .or_else(|| field_str(obj, "mime-detected"))
        .unwrap_or_default();
    let entry = CdxEntry {
        url: field_str(obj, "url")?,
        digest: field_str(obj, "digest")?,
        archive_file: field_str(obj, "filename")?,
        offset: field_u64(obj, "offset")?,
        length: field_u64(obj, "length")?,
        status: u16::try_from(field_u64(obj, "status")?).ok()?,
        mime,
    };
    entry.validate().ok()?;
    Some(entry)
}

/// Parse a line-delimited JSON index response, keeping status-200 HTML
/// captures whose host lies within `domain`. Each URL is kept once (first
/// occurrence).
pub fn parse_index_lines(body: &str, domain: &str) -> IndexQuery {
    let domain = domain.trim().trim_end_matches('.').to_ascii_lowercase();
    let mut out = IndexQuery::default();
    let mut seen = HashSet::new();
    for line in body.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let Some(entry) = parse_line(line) else {
            out.malformed += 1;
            continue;
        };
        let in_domain = entry.host().is_some_and(|h| host_in_domain(&h, &domain));
        if !in_domain || entry.status != 200 || !entry.is_html() {
            continue;
        }
        if seen.insert(entry.url.clone()) {
            out.entries.push(entry);
        }
    }
    if out.malformed > 0 {
        warn!(domain = %domain, malformed = out.malformed, "skipped malformed index lines");
    }
    out
}
