//! Turn decoded captures into text blocks and keep those that mention a
//! crisis keyword in any supported language.

mod html;
mod keywords;

pub use html::extract_paragraphs;
pub use keywords::{load_keyword_table, match_keywords, KeywordMatch, KeywordTable, MatchMode};

use serde::{Deserialize, Serialize};

use crate::archive::PageCapture;

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("keyword table: {0}")]
    Keywords(String),
}

/// A keyword-bearing text block from one capture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub firm_id: String,
    pub snapshot: String,
    pub url: String,
    pub text: String,
    #[serde(rename = "matches")]
    pub matched_keywords: Vec<KeywordMatch>,
}

pub const TRUNCATION_MARKER: char = '…';

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractOptions {
    pub mode: MatchMode,
    /// Blocks longer than this many characters are cut and marked.
    pub max_chars: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            mode: MatchMode::WordBoundary,
            max_chars: 4000,
        }
    }
}

pub fn truncate_block(text: &str, max_chars: usize) -> String {
    match text.char_indices().nth(max_chars) {
        Some((cut, _)) => {
            let mut s = text[..cut].trim_end().to_string();
            s.push(TRUNCATION_MARKER);
            s
        }
        None => text.to_string(),
    }
}

/// Keyword paragraphs of one capture in document order. Blocks are truncated
/// before matching, so every emitted text carries its own match.
pub fn paragraphs_from_capture(
    capture: &PageCapture,
    table: &KeywordTable,
    opts: &ExtractOptions,
) -> Vec<Paragraph> {
    extract_paragraphs(&capture.body)
        .into_iter()
        .filter_map(|block| {
            let text = truncate_block(&block, opts.max_chars);
            let matched = match_keywords(&text, table, opts.mode);
            (!matched.is_empty()).then(|| Paragraph {
                firm_id: capture.firm_id.clone(),
                snapshot: capture.snapshot.clone(),
                url: capture.url.clone(),
                text,
                matched_keywords: matched,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn capture(body: &str) -> PageCapture {
        PageCapture {
            firm_id: "F1".into(),
            snapshot: "S".into(),
            url: "https://a.com/".into(),
            digest: "D".into(),
            body: body.into(),
        }
    }

    #[test]
    fn keeps_only_keyword_blocks() {
        let t = KeywordTable::builtin();
        let c = capture("<h1>Welcome</h1><p>Our stores stay open during the coronavirus pandemic.</p><p>About us</p>");
        let ps = paragraphs_from_capture(&c, &t, &ExtractOptions::default());
        assert_eq!(ps.len(), 1);
        assert!(ps[0].text.starts_with("Our stores"));
        assert_eq!(ps[0].firm_id, "F1");
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_block("abcdef", 3), "abc…");
        assert_eq!(truncate_block("abc", 3), "abc");
        assert_eq!(truncate_block("ab def", 3), "ab…");
    }

    #[test]
    fn paragraph_json_shape() {
        let p = Paragraph {
            firm_id: "F".into(),
            snapshot: "S".into(),
            url: "u".into(),
            text: "covid".into(),
            matched_keywords: vec![KeywordMatch {
                language: "English".into(),
                keyword: "covid".into(),
            }],
        };
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["matches"][0]["keyword"], "covid");
    }

    proptest! {
        #[test]
        fn emitted_paragraphs_are_sound(
            blocks in prop::collection::vec("[a-z ]{0,20}(covid|corona|coronation|pandemic)?[a-z ]{0,20}", 0..6),
            cap in 5usize..60,
        ) {
            let t = KeywordTable::builtin();
            let body: String = blocks.iter().map(|b| format!("<p>{b}</p>")).collect();
            let opts = ExtractOptions { max_chars: cap, ..Default::default() };
            for p in paragraphs_from_capture(&capture(&body), &t, &opts) {
                prop_assert!(!p.text.trim().is_empty());
                prop_assert!(!p.matched_keywords.is_empty());
                prop_assert_eq!(&match_keywords(&p.text, &t, opts.mode), &p.matched_keywords);
            }
        }
    }
}
