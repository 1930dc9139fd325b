use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::IndicatorError;
use crate::archive::{FirmRecord, SnapshotRegistry};
use crate::classify::FirmPeriodIndicator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionLevel {
    Country,
    State,
    City,
}

impl RegionLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLevel::Country => "country",
            RegionLevel::State => "state",
            RegionLevel::City => "city",
        }
    }

    /// Region code of `firm` at this level; cities are qualified by country.
    pub fn key(self, firm: &FirmRecord) -> Option<String> {
        match self {
            RegionLevel::Country => Some(firm.country.clone()),
            RegionLevel::State => firm.state.clone().filter(|s| !s.is_empty()),
            RegionLevel::City => {
                let city = firm.city.trim();
                (!city.is_empty()).then(|| format!("{}/{}", firm.country, city))
            }
        }
    }
}

impl std::str::FromStr for RegionLevel {
    type Err = IndicatorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "country" => Ok(RegionLevel::Country),
            "state" => Ok(RegionLevel::State),
            "city" => Ok(RegionLevel::City),
            other => Err(IndicatorError::Config(format!("unknown region level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub snapshot: String,
    pub n_firms: usize,
    pub n_severe: usize,
    pub n_mention: usize,
    pub share_severe: f64,
    pub share_mention: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSeries {
    pub level: RegionLevel,
    pub region: String,
    pub points: Vec<RegionPoint>,
}

#[derive(Default)]
struct Tally {
    n: usize,
    severe: usize,
    mention: usize,
}

/// Per region and snapshot: how many observed firms scored at least
/// `severity_threshold` and how many mentioned the crisis at all. Firms
/// without a region code at `level` are skipped.
pub fn region_series(
    indicators: &[FirmPeriodIndicator],
    firms: &[FirmRecord],
    level: RegionLevel,
    severity_threshold: u8,
    registry: &SnapshotRegistry,
) -> Result<Vec<RegionSeries>, IndicatorError> {
    let by_id: HashMap<&str, &FirmRecord> = firms.iter().map(|f| (f.firm_id.as_str(), f)).collect();
    let mut tallies: BTreeMap<String, BTreeMap<usize, Tally>> = BTreeMap::new();
    for ind in indicators {
        let firm = by_id
            .get(ind.firm_id.as_str())
            .ok_or_else(|| IndicatorError::UnknownFirm(ind.firm_id.clone()))?;
        let pos = registry
            .position(&ind.snapshot)
            .ok_or_else(|| IndicatorError::UnknownSnapshot(ind.snapshot.clone()))?;
        let Some(region) = level.key(firm) else {
            continue;
        };
        let t = tallies.entry(region).or_default().entry(pos).or_default();
        t.n += 1;
        t.severe += usize::from(ind.score >= severity_threshold);
        t.mention += usize::from(ind.mention);
    }
    Ok(tallies
        .into_iter()
        .map(|(region, by_pos)| RegionSeries {
            level,
            region,
            points: by_pos
                .into_iter()
                .map(|(pos, t)| RegionPoint {
                    snapshot: registry.snapshots()[pos].id.clone(),
                    n_firms: t.n,
                    n_severe: t.severe,
                    n_mention: t.mention,
                    share_severe: t.severe as f64 / t.n as f64,
                    share_mention: t.mention as f64 / t.n as f64,
                })
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::Snapshot;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn firm(id: &str, country: &str, city: &str) -> FirmRecord {
        FirmRecord {
            firm_id: id.into(),
            domains: [format!("{id}.com")].into(),
            country: country.into(),
            state: None,
            city: city.into(),
            nace2: 47,
            employees: 10,
        }
    }

    fn ind(firm: &str, snap: &str, score: u8, mention: bool) -> FirmPeriodIndicator {
        FirmPeriodIndicator {
            score,
            mention,
            ..FirmPeriodIndicator::empty(firm, snap)
        }
    }

    fn registry() -> SnapshotRegistry {
        let d = |m| NaiveDate::from_ymd_opt(2020, m, 1).unwrap();
        SnapshotRegistry::new(vec![
            Snapshot::new("S2", "b", d(3), d(3)),
            Snapshot::new("S1", "a", d(1), d(1)),
        ])
        .unwrap()
    }

    #[test]
    fn half_severe() {
        let firms: Vec<_> = (0..4).map(|i| firm(&format!("F{i}"), "DE", "Berlin")).collect();
        let inds: Vec<_> = [3, 3, 1, 0]
            .iter()
            .enumerate()
            .map(|(i, s)| ind(&format!("F{i}"), "S1", *s, *s > 0))
            .collect();
        let series = region_series(&inds, &firms, RegionLevel::Country, 3, &registry()).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].points[0].share_severe, 0.5);
        assert_eq!(series[0].points[0].share_mention, 0.75);
        let city = region_series(&inds, &firms, RegionLevel::City, 3, &registry()).unwrap();
        assert_eq!(city[0].region, "DE/Berlin");
    }

    #[test]
    fn absent_firms_and_ordering() {
        let firms = vec![firm("A", "US", ""), firm("B", "US", "")];
        let inds = vec![ind("A", "S2", 0, false), ind("A", "S1", 3, true), ind("B", "S1", 0, false)];
        let s = region_series(&inds, &firms, RegionLevel::Country, 3, &registry()).unwrap();
        let pts = &s[0].points;
        assert_eq!(pts[0].snapshot, "S1");
        assert_eq!((pts[0].n_firms, pts[1].n_firms), (2, 1));
        assert_eq!(pts[1].share_severe, 0.0);
        assert!(region_series(&inds, &firms, RegionLevel::State, 3, &registry()).unwrap().is_empty());
        assert!(matches!(
            region_series(&[ind("Z", "S1", 0, false)], &firms, RegionLevel::Country, 3, &registry()),
            Err(IndicatorError::UnknownFirm(_))
        ));
    }

    proptest! {
        #[test]
        fn severe_never_exceeds_mention_and_relabel_invariant(
            scores in prop::collection::vec((0u8..=3, 0usize..2, 0usize..2), 1..20),
        ) {
            let countries = ["DE", "FR"];
            let firms: Vec<_> = scores.iter().enumerate()
                .map(|(i, (_, c, _))| firm(&format!("F{i}"), countries[*c], "x"))
                .collect();
            let snaps = ["S1", "S2"];
            // scores from the classifier always imply mention when positive
            let inds: Vec<_> = scores.iter().enumerate()
                .map(|(i, (s, _, k))| ind(&format!("F{i}"), snaps[*k], *s, *s > 0))
                .collect();
            let a = region_series(&inds, &firms, RegionLevel::Country, 3, &registry()).unwrap();
            for p in a.iter().flat_map(|s| &s.points) {
                prop_assert!(p.share_severe <= p.share_mention);
                prop_assert!(p.n_firms >= 1);
            }
            let firms2: Vec<_> = firms.iter().map(|f| FirmRecord { firm_id: format!("Z{}", f.firm_id), ..f.clone() }).collect();
            let inds2: Vec<_> = inds.iter().rev().map(|i| FirmPeriodIndicator { firm_id: format!("Z{}", i.firm_id), ..i.clone() }).collect();
            prop_assert_eq!(a, region_series(&inds2, &firms2, RegionLevel::Country, 3, &registry()).unwrap());
        }
    }
}
