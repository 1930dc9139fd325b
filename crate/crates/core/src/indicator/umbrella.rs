use std::collections::BTreeSet;
use std::path::Path;

use super::IndicatorError;

const BUILTIN: &str = include_str!("../../assets/umbrellas.tsv");

pub const UMBRELLA_NAMES: [&str; 6] = [
    "Supply chain issues",
    "Closure",
    "Remote work",
    "Hygiene measures",
    "Travel restrictions",
    "Financial impact",
];

/// Tag umbrellas and the substring patterns that select them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UmbrellaTable {
    umbrellas: Vec<(String, Vec<String>)>,
    /// Lowercased copies of the patterns, for matching.
    folded: Vec<Vec<String>>,
}

impl UmbrellaTable {
    /// Requires exactly the six reference umbrellas, each with patterns.
    pub fn new(umbrellas: Vec<(String, Vec<String>)>) -> Result<Self, IndicatorError> {
        let names: BTreeSet<&str> = umbrellas.iter().map(|(n, _)| n.as_str()).collect();
        let want: BTreeSet<&str> = UMBRELLA_NAMES.into_iter().collect();
        if names != want || umbrellas.len() != UMBRELLA_NAMES.len() {
            return Err(IndicatorError::Umbrella(format!(
                "expected umbrellas {want:?}, found {names:?}"
            )));
        }
        if let Some((n, _)) = umbrellas.iter().find(|(_, p)| p.is_empty()) {
            return Err(IndicatorError::Umbrella(format!("umbrella {n:?} has no patterns")));
        }
        let folded = umbrellas
            .iter()
            .map(|(_, ps)| ps.iter().map(|p| p.to_lowercase()).collect())
            .collect();
        Ok(Self { umbrellas, folded })
    }

    /// `name<TAB>pattern, pattern, ...` per line.
    pub fn parse(text: &str, origin: &str) -> Result<Self, IndicatorError> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (name, pats) = line.split_once('\t').ok_or_else(|| {
                IndicatorError::Umbrella(format!("{origin}:{}: expected name<TAB>patterns", n + 1))
            })?;
            let pats: Vec<String> = pats
                .split(',')
                .map(|p| p.trim().to_string())
                .filter(|p| !p.is_empty())
                .collect();
            rows.push((name.trim().to_string(), pats));
        }
        Self::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self, IndicatorError> {
        let text = std::fs::read_to_string(path).map_err(|source| IndicatorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN, "builtin").expect("builtin umbrella table is valid")
    }

    pub fn umbrellas(&self) -> &[(String, Vec<String>)] {
        &self.umbrellas
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.umbrellas.iter().map(|(n, _)| n.as_str())
    }

    /// Umbrellas whose patterns occur anywhere in `tag`, ignoring case and
    /// word boundaries.
    pub fn umbrellas_for_tag(&self, tag: &str) -> BTreeSet<&str> {
        let tag = tag.to_lowercase();
        self.umbrellas
            .iter()
            .zip(&self.folded)
            .filter(|(_, pats)| pats.iter().any(|p| tag.contains(p.as_str())))
            .map(|((name, _), _)| name.as_str())
            .collect()
    }
}

/// Union of the umbrellas of every tag.
pub fn map_tags_to_umbrellas<'a, I, S>(tags: I, table: &UmbrellaTable) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a S>,
    S: AsRef<str> + 'a + ?Sized,
{
    tags.into_iter()
        .flat_map(|t| table.umbrellas_for_tag(t.as_ref()))
        .map(str::to_string)
        .collect()
}
