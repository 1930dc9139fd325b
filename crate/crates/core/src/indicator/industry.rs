use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::archive::FirmRecord;
use crate::classify::FirmPeriodIndicator;

pub const OTHER_SERVICES: &str = "Other Services";
pub const ENERGY_ENVIRONMENT: &str = "Energy Utilities and Environmental Services";

/// Reporting group of a 2-digit NACE division: NACE sections, except that
/// 46, 47, 55 and 56 stand alone, J to N plus S merge into one services
/// group and D plus E into one utilities group. Codes outside the
/// classification yield `None`.
pub fn industry_group(nace2: u8) -> Option<&'static str> {
    Some(match nace2 {
        1..=3 => "Agriculture, Forestry and Fishing",
        5..=9 => "Mining and Quarrying",
        10..=33 => "Manufacturing",
        35..=39 => ENERGY_ENVIRONMENT,
        41..=43 => "Construction",
        45 => "Wholesale and Retail Trade and Repair of Motor Vehicles",
        46 => "Wholesale Trade",
        47 => "Retail Trade",
        49..=53 => "Transportation and Storage",
        55 => "Accommodation",
        56 => "Food and Beverage Service Activities",
        58..=63 | 64..=66 | 68 | 69..=75 | 77..=82 | 94..=96 => OTHER_SERVICES,
        84 => "Public Administration and Defence",
        85 => "Education",
        86..=88 => "Human Health and Social Work Activities",
        90..=93 => "Arts, Entertainment and Recreation",
        97 | 98 => "Activities of Households as Employers",
        99 => "Activities of Extraterritorial Organisations",
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryShare {
    pub group: String,
    pub n_firms: usize,
    pub n_severe: usize,
    pub employees: u64,
    pub employees_severe: u64,
    /// Employee-weighted share of firms at or above the severity threshold.
    pub share_severe: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndustryReport {
    pub shares: Vec<IndustryShare>,
    /// Firms left out because their division maps to no group.
    pub unmapped: Vec<String>,
}

/// Each firm's highest score over all its indicators.
pub fn period_max_scores(indicators: &[FirmPeriodIndicator]) -> BTreeMap<&str, u8> {
    let mut out: BTreeMap<&str, u8> = BTreeMap::new();
    for i in indicators {
        let s = out.entry(i.firm_id.as_str()).or_insert(0);
        *s = (*s).max(i.score);
    }
    out
}

/// Employee-weighted severe share per industry group, with each firm scored
/// by its maximum over the period. Firms without indicators are skipped.
pub fn industry_shares(
    indicators: &[FirmPeriodIndicator],
    firms: &[FirmRecord],
    severity_threshold: u8,
) -> IndustryReport {
    let by_id: HashMap<&str, &FirmRecord> = firms.iter().map(|f| (f.firm_id.as_str(), f)).collect();
    let mut groups: BTreeMap<&str, IndustryShare> = BTreeMap::new();
    let mut report = IndustryReport::default();
    for (firm_id, score) in period_max_scores(indicators) {
        let Some(firm) = by_id.get(firm_id) else {
            continue;
        };
        let Some(group) = industry_group(firm.nace2) else {
            report.unmapped.push(firm_id.to_string());
            continue;
        };
        let g = groups.entry(group).or_insert_with(|| IndustryShare {
            group: group.to_string(),
            n_firms: 0,
            n_severe: 0,
            employees: 0,
            employees_severe: 0,
            share_severe: 0.0,
        });
        let severe = score >= severity_threshold;
        g.n_firms += 1;
        g.employees += u64::from(firm.employees);
        if severe {
            g.n_severe += 1;
            g.employees_severe += u64::from(firm.employees);
        }
    }
    report.shares = groups
        .into_values()
        .map(|mut g| {
            g.share_severe = if g.employees == 0 {
                0.0
            } else {
                g.employees_severe as f64 / g.employees as f64
            };
            g
        })
        .collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn firm(id: &str, nace2: u8, employees: u32) -> FirmRecord {
        FirmRecord {
            firm_id: id.into(),
            domains: [format!("{id}.com")].into(),
            country: "DE".into(),
            state: None,
            city: "x".into(),
            nace2,
            employees,
        }
    }

    fn ind(id: &str, snap: &str, score: u8) -> FirmPeriodIndicator {
        FirmPeriodIndicator {
            score,
            mention: score > 0,
            ..FirmPeriodIndicator::empty(id, snap)
        }
    }

    #[test]
    fn grouping_rules() {
        assert_eq!(industry_group(55), Some("Accommodation"));
        assert_eq!(industry_group(56), Some("Food and Beverage Service Activities"));
        assert_eq!(industry_group(62), Some(OTHER_SERVICES));
        assert_eq!(industry_group(96), Some(OTHER_SERVICES));
        assert_eq!(industry_group(35), Some(ENERGY_ENVIRONMENT));
        assert_eq!(industry_group(38), Some(ENERGY_ENVIRONMENT));
        assert!(industry_group(45).is_some() && industry_group(45) != industry_group(46));
        assert_ne!(industry_group(46), industry_group(47));
        assert_eq!(industry_group(4), None);
        assert_eq!(industry_group(0), None);
    }

    #[test]
    fn employee_weighting() {
        let firms = [firm("A", 47, 10), firm("B", 47, 90), firm("C", 4, 5)];
        let inds = [ind("A", "S1", 1), ind("A", "S2", 3), ind("B", "S1", 2), ind("C", "S1", 3)];
        let r = industry_shares(&inds, &firms, 3);
        assert_eq!(r.shares.len(), 1);
        assert!((r.shares[0].share_severe - 0.10).abs() < 1e-12);
        assert_eq!(r.unmapped, ["C"]);
        let none = industry_shares(&[ind("B", "S1", 2)], &firms, 3);
        assert_eq!(none.shares[0].share_severe, 0.0);
    }

    proptest! {
        #[test]
        fn uniform_weights_equal_unweighted_fraction(
            scores in prop::collection::vec(0u8..=3, 1..30),
            emp in 1u32..1000,
        ) {
            let firms: Vec<_> = (0..scores.len()).map(|i| firm(&format!("F{i}"), 56, emp)).collect();
            let inds: Vec<_> = scores.iter().enumerate().map(|(i, s)| ind(&format!("F{i}"), "S", *s)).collect();
            let r = industry_shares(&inds, &firms, 3);
            let frac = scores.iter().filter(|s| **s >= 3).count() as f64 / scores.len() as f64;
            prop_assert!((r.shares[0].share_severe - frac).abs() < 1e-12);
        }
    }
}
