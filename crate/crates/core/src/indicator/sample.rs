use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IndicatorError;
use crate::archive::FirmRecord;

const BUILTIN: &str = include_str!("../../assets/coverage.csv");

/// Sample coverage of one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub country: String,
    #[serde(default)]
    pub name: String,
    pub firms_analyzed: u64,
    pub firms_per_million: Option<f64>,
    pub share_analyzed_pct: Option<f64>,
    pub internet_share_pct: Option<f64>,
}

pub fn parse_coverage(text: &str, origin: &str) -> Result<Vec<CoverageRow>, IndicatorError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for row in reader.deserialize::<CoverageRow>() {
        let mut row: CoverageRow = row.map_err(|e| IndicatorError::Format {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        row.country = row.country.to_ascii_uppercase();
        let negative = [row.firms_per_million, row.share_analyzed_pct, row.internet_share_pct]
            .into_iter()
            .flatten()
            .any(|v| v < 0.0);
        if negative {
            return Err(IndicatorError::Format {
                path: origin.to_string(),
                message: format!("negative coverage value for {}", row.country),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_coverage(path: &Path) -> Result<Vec<CoverageRow>, IndicatorError> {
    let text = std::fs::read_to_string(path).map_err(|source| IndicatorError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_coverage(&text, &path.display().to_string())
}

/// The shipped per-country coverage table.
pub fn builtin_coverage() -> Vec<CoverageRow> {
    parse_coverage(BUILTIN, "builtin").expect("builtin coverage table is valid")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    #[default]
    Standard,
    /// Additionally require internet usage above the threshold.
    CrossCountry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleThresholds {
    pub min_employees: u32,
    pub min_firms_per_million: f64,
    pub min_share_analyzed_pct: f64,
    pub internet_threshold_pct: f64,
}

impl Default for SampleThresholds {
    fn default() -> Self {
        Self {
            min_employees: 5,
            min_firms_per_million: 1000.0,
            min_share_analyzed_pct: 20.0,
            internet_threshold_pct: 82.76,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    /// Country code -> reason.
    pub countries: BTreeMap<String, String>,
    /// Firm id -> reason.
    pub firms: BTreeMap<String, String>,
}

/// Why a country fails the coverage rules, if it does. A missing share of
/// analyzed firms skips that rule; a missing density or (in cross-country
/// mode) a missing internet share excludes the country.
pub fn country_exclusion(row: &CoverageRow, mode: FilterMode, t: &SampleThresholds) -> Option<String> {
    match row.firms_per_million {
        None => return Some("no firms-per-million figure".into()),
        Some(v) if v < t.min_firms_per_million => {
            return Some(format!("{v} analyzed firms per million < {}", t.min_firms_per_million))
        }
        _ => {}
    }
    if let Some(s) = row.share_analyzed_pct {
        if s < t.min_share_analyzed_pct {
            return Some(format!("{s}% of firms analyzed < {}%", t.min_share_analyzed_pct));
        }
    }
    if mode == FilterMode::CrossCountry {
        match row.internet_share_pct {
            None => return Some("no internet-usage figure".into()),
            Some(v) if v <= t.internet_threshold_pct => {
                return Some(format!("internet usage {v}% <= {}%", t.internet_threshold_pct))
            }
            _ => {}
        }
    }
    None
}

/// Keep firms with enough employees in countries that pass the coverage
/// rules. Applying the filter to its own output changes nothing.
pub fn filter_sample(
    firms: &[FirmRecord],
    coverage: &[CoverageRow],
    mode: FilterMode,
    thresholds: &SampleThresholds,
) -> (Vec<FirmRecord>, ExclusionReport) {
    let rows: HashMap<&str, &CoverageRow> = coverage.iter().map(|r| (r.country.as_str(), r)).collect();
    let mut report = ExclusionReport::default();
    let mut kept = Vec::new();
    for f in firms {
        if f.employees < thresholds.min_employees {
            report
                .firms
                .insert(f.firm_id.clone(), format!("{} employees < {}", f.employees, thresholds.min_employees));
            continue;
        }
        let reason = match rows.get(f.country.as_str()) {
            None => Some("no coverage row".to_string()),
            Some(row) => country_exclusion(row, mode, thresholds),
        };
        match reason {
            Some(r) => {
                report.countries.entry(f.country.clone()).or_insert_with(|| r.clone());
                report.firms.insert(f.firm_id.clone(), format!("country {}: {r}", f.country));
            }
            None => kept.push(f.clone()),
        }
    }
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(code: &str) -> CoverageRow {
        builtin_coverage().into_iter().find(|r| r.country == code).unwrap()
    }

    fn firm(id: &str, country: &str, employees: u32) -> FirmRecord {
        FirmRecord {
            firm_id: id.into(),
            domains: [format!("{id}.com")].into(),
            country: country.into(),
            state: None,
            city: "x".into(),
            nace2: 10,
            employees,
        }
    }

    #[test]
    fn reference_countries() {
        let t = SampleThresholds::default();
        assert_eq!(country_exclusion(&row("US"), FilterMode::Standard, &t), None);
        assert!(country_exclusion(&row("AU"), FilterMode::Standard, &t).is_some());
        let es = row("ES");
        assert_eq!(es.internet_share_pct, Some(91.0));
        assert_eq!(country_exclusion(&es, FilterMode::CrossCountry, &t), None);
        // density present, share missing: only the density rule applies
        assert_eq!(country_exclusion(&row("RU"), FilterMode::Standard, &t), None);
    }

    #[test]
    fn thresholds_are_strict_where_stated() {
        let t = SampleThresholds::default();
        let mk = |fpm, share, net| CoverageRow {
            country: "XX".into(),
            name: String::new(),
            firms_analyzed: 1,
            firms_per_million: fpm,
            share_analyzed_pct: share,
            internet_share_pct: net,
        };
        assert_eq!(country_exclusion(&mk(Some(1000.0), Some(20.0), None), FilterMode::Standard, &t), None);
        assert!(country_exclusion(&mk(Some(999.9), Some(90.0), None), FilterMode::Standard, &t).is_some());
        assert!(country_exclusion(&mk(Some(5000.0), Some(19.9), None), FilterMode::Standard, &t).is_some());
        assert!(country_exclusion(&mk(None, Some(90.0), None), FilterMode::Standard, &t).is_some());
        assert!(country_exclusion(&mk(Some(5000.0), None, Some(82.76)), FilterMode::CrossCountry, &t).is_some());
        assert!(country_exclusion(&mk(Some(5000.0), None, None), FilterMode::CrossCountry, &t).is_some());
        assert_eq!(country_exclusion(&mk(Some(5000.0), None, Some(82.77)), FilterMode::CrossCountry, &t), None);
    }

    #[test]
    fn filters_firms() {
        let cov = builtin_coverage();
        let firms = [firm("a", "US", 10), firm("b", "US", 4), firm("c", "AU", 100), firm("d", "ZZ", 50)];
        let (kept, rep) = filter_sample(&firms, &cov, FilterMode::Standard, &SampleThresholds::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].firm_id, "a");
        assert_eq!(rep.firms.len(), 3);
        assert!(rep.countries.contains_key("AU") && rep.countries.contains_key("ZZ"));
    }

    proptest! {
        #[test]
        fn idempotent(
            spec in prop::collection::vec((0usize..5, 0u32..20), 0..25),
            cross in any::<bool>(),
        ) {
            let cov = builtin_coverage();
            let countries = ["US", "AU", "DE", "RU", "KY"];
            let firms: Vec<_> = spec.iter().enumerate()
                .map(|(i, (c, e))| firm(&format!("F{i}"), countries[*c], *e))
                .collect();
            let mode = if cross { FilterMode::CrossCountry } else { FilterMode::Standard };
            let t = SampleThresholds::default();
            let (once, _) = filter_sample(&firms, &cov, mode, &t);
            let (twice, rep) = filter_sample(&once, &cov, mode, &t);
            prop_assert_eq!(&once, &twice);
            prop_assert!(rep.firms.is_empty());
        }
    }
}
