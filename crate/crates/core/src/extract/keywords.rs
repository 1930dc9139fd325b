use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExtractError;

const BUILTIN: &str = include_str!("../../assets/keywords.tsv");

/// Crisis keywords per language, lowercased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordTable {
    entries: Vec<(String, Vec<String>)>,
}

/// One `(language, keyword)` hit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KeywordMatch {
    pub language: String,
    pub keyword: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Word boundaries for space-delimited scripts, substrings otherwise.
    #[default]
    WordBoundary,
    /// Plain substring matching for every keyword.
    Substring,
}

impl KeywordTable {
    pub fn new(entries: Vec<(String, Vec<String>)>) -> Result<Self, ExtractError> {
        let mut seen = BTreeSet::new();
        let mut clean = Vec::with_capacity(entries.len());
        for (language, keywords) in entries {
            let language = language.trim().to_string();
            if language.is_empty() {
                return Err(ExtractError::Keywords("row without a language name".into()));
            }
            if !seen.insert(language.clone()) {
                return Err(ExtractError::Keywords(format!("language {language:?} listed twice")));
            }
            let mut kws: Vec<String> = Vec::new();
            for k in keywords {
                let k = k.trim().to_lowercase();
                if !k.is_empty() && !kws.contains(&k) {
                    kws.push(k);
                }
            }
            if kws.is_empty() {
                return Err(ExtractError::Keywords(format!("language {language:?} has no keywords")));
            }
            clean.push((language, kws));
        }
        if clean.is_empty() {
            return Err(ExtractError::Keywords("keyword table is empty".into()));
        }
        Ok(Self { entries: clean })
    }

    /// `language<TAB>kw1, kw2, ...` per line; blank lines and `#` comments
    /// are ignored.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ExtractError> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (lang, kws) = line.split_once('\t').ok_or_else(|| {
                ExtractError::Keywords(format!("{origin}:{}: expected language<TAB>keywords", n + 1))
            })?;
            rows.push((lang.to_string(), kws.split(',').map(str::to_string).collect()));
        }
        Self::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self, ExtractError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExtractError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The shipped multilingual table.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN, "builtin").expect("builtin keyword table is valid")
    }

    pub fn entries(&self) -> &[(String, Vec<String>)] {
        &self.entries
    }

    pub fn language(&self, name: &str) -> Option<&[String]> {
        self.entries
            .iter()
            .find(|(l, _)| l == name)
            .map(|(_, k)| k.as_slice())
    }

    pub fn unique_keywords(&self) -> BTreeSet<&str> {
        self.entries
            .iter()
            .flat_map(|(_, k)| k.iter().map(String::as_str))
            .collect()
    }

    fn languages_by_keyword(&self) -> HashMap<&str, Vec<&str>> {
        let mut map: HashMap<&str, Vec<&str>> = HashMap::new();
        for (lang, kws) in &self.entries {
            for k in kws {
                map.entry(k.as_str()).or_default().push(lang.as_str());
            }
        }
        map
    }
}

pub fn load_keyword_table(path: &Path) -> Result<KeywordTable, ExtractError> {
    KeywordTable::load(path)
}

/// Scripts written without spaces between words (or, for Hangul, with
/// particles glued to nouns), where a word-boundary test would miss hits.
fn is_undelimited(c: char) -> bool {
    matches!(c,
        '\u{0E00}'..='\u{0EFF}'     // Thai, Lao
        | '\u{1000}'..='\u{109F}'   // Myanmar
        | '\u{1100}'..='\u{11FF}'   // Hangul Jamo
        | '\u{1780}'..='\u{17FF}'   // Khmer
        | '\u{3040}'..='\u{30FF}'   // Hiragana, Katakana
        | '\u{3130}'..='\u{318F}'   // Hangul compatibility Jamo
        | '\u{31F0}'..='\u{31FF}'
        | '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{AC00}'..='\u{D7AF}'   // Hangul syllables
        | '\u{F900}'..='\u{FAFF}'
        | '\u{FF66}'..='\u{FF9F}'
        | '\u{20000}'..='\u{2A6DF}')
}

fn at_boundary(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().next_back();
    let after = text[end..].chars().next();
    !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
}

/// Distinct `(language, keyword)` hits in `text`, sorted. Where several
/// keywords match at the same position only the longest counts, so
/// "covid-19" does not also report "covid".
pub fn match_keywords(text: &str, table: &KeywordTable, mode: MatchMode) -> Vec<KeywordMatch> {
    let lower = text.to_lowercase();
    // start byte -> (match length, keywords of that length)
    let mut best: BTreeMap<usize, (usize, Vec<&str>)> = BTreeMap::new();
    for kw in table.unique_keywords() {
        let substring = mode == MatchMode::Substring || kw.chars().any(is_undelimited);
        for (i, _) in lower.match_indices(kw) {
            if !substring && !at_boundary(&lower, i, i + kw.len()) {
                continue;
            }
            let slot = best.entry(i).or_insert((0, Vec::new()));
            if kw.len() > slot.0 {
                *slot = (kw.len(), vec![kw]);
            } else if kw.len() == slot.0 {
                slot.1.push(kw);
            }
        }
    }
    let langs = table.languages_by_keyword();
    let hits: BTreeSet<KeywordMatch> = best
        .into_values()
        .flat_map(|(_, kws)| kws)
        .flat_map(|kw| {
            langs[kw].iter().map(move |l| KeywordMatch {
                language: l.to_string(),
                keyword: kw.to_string(),
            })
        })
        .collect();
    hits.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn has(hits: &[KeywordMatch], lang: &str, kw: &str) -> bool {
        hits.iter().any(|m| m.language == lang && m.keyword == kw)
    }

    #[test]
    fn builtin_rows() {
        let t = KeywordTable::builtin();
        assert_eq!(t.entries().len(), 63);
        let de = t.language("German").unwrap();
        for k in ["corona", "covid-19", "coronavirus"] {
            assert!(de.iter().any(|x| x == k), "{k}");
        }
        assert!(t.language("Chinese").unwrap().iter().any(|k| k == "冠状病毒"));
        assert!(t
            .entries()
            .iter()
            .all(|(_, ks)| ks.iter().all(|k| !k.is_empty() && *k == k.to_lowercase())));
    }

    #[test]
    fn parse_errors() {
        assert!(KeywordTable::parse("", "t").is_err());
        assert!(KeywordTable::parse("# only a comment\n", "t").is_err());
        assert!(KeywordTable::parse("English corona\n", "t").is_err());
        assert!(KeywordTable::parse("English\t , \n", "t").is_err());
        assert!(matches!(
            KeywordTable::load(Path::new("/no/such/keywords.tsv")),
            Err(ExtractError::Io { .. })
        ));
        let t = KeywordTable::parse("English\tCorona, COVID\n", "t").unwrap();
        assert_eq!(t.language("English").unwrap(), ["corona", "covid"]);
    }

    #[test]
    fn word_boundaries() {
        let t = KeywordTable::builtin();
        let hits = match_keywords("Wegen der Corona-Pandemie geschlossen", &t, MatchMode::WordBoundary);
        assert!(has(&hits, "German", "corona"));
        assert!(has(&hits, "German", "pandemie"));
        assert!(match_keywords("The coronation was held", &t, MatchMode::WordBoundary)
            .iter()
            .all(|m| m.keyword != "corona"));
        assert!(match_keywords("The coronation was held", &t, MatchMode::Substring)
            .iter()
            .any(|m| m.keyword == "corona"));
    }

    #[test]
    fn longest_match_wins_at_a_position() {
        let t = KeywordTable::builtin();
        let hits = match_keywords("COVID-19 update", &t, MatchMode::WordBoundary);
        assert!(has(&hits, "English", "covid-19"));
        assert!(!hits.iter().any(|m| m.keyword == "covid"));
        let hits = match_keywords("covid and covid-19", &t, MatchMode::WordBoundary);
        assert!(has(&hits, "English", "covid") && has(&hits, "English", "covid-19"));
    }

    #[test]
    fn undelimited_scripts_use_substrings() {
        let t = KeywordTable::builtin();
        assert!(has(&match_keywords("由于新型冠状病毒疫情", &t, MatchMode::WordBoundary), "Chinese", "新型冠状病毒"));
        assert!(has(&match_keywords("コロナ禍の影響", &t, MatchMode::WordBoundary), "Japanese", "コロナ"));
        assert!(has(&match_keywords("코로나로 인해", &t, MatchMode::WordBoundary), "Korean", "코로나"));
    }

    #[test]
    fn no_hits_in_unrelated_text() {
        let t = KeywordTable::builtin();
        assert!(match_keywords("We value our staff and their wellbeing.", &t, MatchMode::WordBoundary).is_empty());
    }

    proptest! {
        #[test]
        fn case_folding_invariant(
            words in prop::collection::vec(
                prop::sample::select(vec![
                    "Corona", "COVID-19", "covid", "Pandemic", "the", "coronation",
                    "SARS-CoV-2", "Krise", "Pandemie", "-", ",", "19", "Virus",
                ]),
                0..10,
            ),
            sep in prop::sample::select(vec![" ", "-", "", ". "]),
        ) {
            let t = KeywordTable::builtin();
            let text = words.join(sep);
            let base = match_keywords(&text, &t, MatchMode::WordBoundary);
            prop_assert_eq!(&base, &match_keywords(&text.to_lowercase(), &t, MatchMode::WordBoundary));
            prop_assert_eq!(&base, &match_keywords(&text.to_uppercase(), &t, MatchMode::WordBoundary));
        }
    }
}
