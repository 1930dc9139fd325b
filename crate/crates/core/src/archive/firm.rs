use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ArchiveError;

/// The sampling unit: a firm with one or more website domains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub firm_id: String,
    pub domains: BTreeSet<String>,
    /// ISO-3166 alpha-2.
    pub country: String,
    /// Sub-national region code (e.g. `US_CA`), when known.
    pub state: Option<String>,
    pub city: String,
    pub nace2: u8,
    pub employees: u32,
}

impl FirmRecord {
    pub fn validate(&self) -> Result<(), ArchiveError> {
        let bad = |message: &str| ArchiveError::InvalidFirm {
            firm_id: self.firm_id.clone(),
            message: message.to_string(),
        };
        if self.firm_id.is_empty() {
            return Err(bad("empty firm id"));
        }
        if self.domains.is_empty() || self.domains.iter().any(|d| d.is_empty()) {
            return Err(bad("no domains"));
        }
        if self.country.len() != 2 || !self.country.bytes().all(|b| b.is_ascii_uppercase()) {
            return Err(bad("country must be an ISO-3166 alpha-2 code"));
        }
        if !(1..=99).contains(&self.nace2) {
            return Err(bad("nace2 outside 01..99"));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct FirmRow {
    firm_id: String,
    domains: String,
    country: String,
    #[serde(default)]
    state: Option<String>,
    #[serde(default)]
    city: String,
    nace2: String,
    employees: u32,
}

fn normalize_domain(raw: &str) -> String {
    let d = raw.trim().trim_end_matches('.').to_ascii_lowercase();
    d.strip_prefix("www.").map(str::to_string).unwrap_or(d)
}

/// Parse the firm list CSV (`firm_id,domains,country,state,city,nace2,employees`).
/// Multiple domains are separated by `;`.
pub fn parse_firms(text: &str, origin: &str) -> Result<Vec<FirmRecord>, ArchiveError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut firms = Vec::new();
    for row in reader.deserialize::<FirmRow>() {
        let row = row.map_err(|e| ArchiveError::Format {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        let nace2: u8 = row.nace2.parse().map_err(|_| ArchiveError::InvalidFirm {
            firm_id: row.firm_id.clone(),
            message: format!("nace2 {:?} is not a 2-digit code", row.nace2),
        })?;
        let firm = FirmRecord {
            domains: row
                .domains
                .split(';')
                .map(normalize_domain)
                .filter(|d| !d.is_empty())
                .collect(),
            country: row.country.to_ascii_uppercase(),
            state: row.state.filter(|s| !s.is_empty()),
            city: row.city,
            nace2,
            employees: row.employees,
            firm_id: row.firm_id,
        };
        firm.validate()?;
        firms.push(firm);
    }
    Ok(firms)
}

pub fn load_firms(path: &Path) -> Result<Vec<FirmRecord>, ArchiveError> {
    let text = std::fs::read_to_string(path).map_err(|source| ArchiveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_firms(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_multi_domain_firms() {
        let text = "firm_id,domains,country,state,city,nace2,employees\n\
                    F1,WWW.Example.com;shop.example.de,us,US_CA,San Jose,47,120\n\
                    F2,other.org,DE,,Berlin,05,7\n";
        let firms = parse_firms(text, "t").unwrap();
        assert_eq!(firms.len(), 2);
        assert_eq!(
            firms[0].domains.iter().collect::<Vec<_>>(),
            ["example.com", "shop.example.de"]
        );
        assert_eq!(firms[0].country, "US");
        assert_eq!(firms[0].state.as_deref(), Some("US_CA"));
        assert_eq!(firms[1].state, None);
        assert_eq!(firms[1].nace2, 5);
    }

    #[test]
    fn rejects_invalid_rows() {
        let bad_nace = "firm_id,domains,country,state,city,nace2,employees\nF,a.com,US,,x,00,10\n";
        assert!(matches!(parse_firms(bad_nace, "t"), Err(ArchiveError::InvalidFirm { .. })));
        let no_domain = "firm_id,domains,country,state,city,nace2,employees\nF,,US,,x,10,10\n";
        assert!(matches!(parse_firms(no_domain, "t"), Err(ArchiveError::InvalidFirm { .. })));
        let bad_country = "firm_id,domains,country,state,city,nace2,employees\nF,a.com,USA,,x,10,10\n";
        assert!(parse_firms(bad_country, "t").is_err());
    }
}
