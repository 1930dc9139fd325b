use std::collections::BTreeSet;

use url::Url;

use super::CdxEntry;
use crate::extract::KeywordTable;

/// How "shortest URL" is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UrlLengthMode {
    /// Characters of the full URL text.
    #[default]
    FullUrl,
    /// Characters of path plus query only.
    Path,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionOptions {
    pub shortest: usize,
    pub length_mode: UrlLengthMode,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            shortest: 50,
            length_mode: UrlLengthMode::FullUrl,
        }
    }
}

fn url_len(url: &str, mode: UrlLengthMode) -> usize {
    match mode {
        UrlLengthMode::FullUrl => url.chars().count(),
        UrlLengthMode::Path => match Url::parse(url) {
            Ok(u) => u.path().chars().count() + u.query().map_or(0, |q| q.chars().count() + 1),
            Err(_) => url.chars().count(),
        },
    }
}

fn url_has_keyword(url: &str, keywords: &BTreeSet<&str>) -> bool {
    let decoded = percent_encoding::percent_decode_str(url)
        .decode_utf8_lossy()
        .to_lowercase();
    keywords.iter().any(|k| decoded.contains(k))
}

/// The `shortest` entries by URL length plus every entry whose URL mentions a
/// keyword, in (length, url) order.
pub fn select_subpages(entries: &[CdxEntry], keywords: &KeywordTable) -> Vec<CdxEntry> {
    select_subpages_with(entries, keywords, &SelectionOptions::default())
}

pub fn select_subpages_with(
    entries: &[CdxEntry],
    keywords: &KeywordTable,
    opts: &SelectionOptions,
) -> Vec<CdxEntry> {
    let kws = keywords.unique_keywords();
    let mut ranked: Vec<(usize, &CdxEntry)> = entries
        .iter()
        .map(|e| (url_len(&e.url, opts.length_mode), e))
        .collect();
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.url.cmp(&b.1.url)));
    ranked
        .into_iter()
        .enumerate()
        .filter(|(rank, (_, e))| *rank < opts.shortest || url_has_keyword(&e.url, &kws))
        .map(|(_, (_, e))| e.clone())
        .collect()
}
