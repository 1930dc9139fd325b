use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Category, Classification};

/// A classified (or failed) passage as persisted between stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub firm_id: String,
    pub snapshot: String,
    pub url: String,
    /// Position of the passage within its capture.
    pub passage_index: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One firm in one snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirmPeriodIndicator {
    pub firm_id: String,
    pub snapshot: String,
    pub mention: bool,
    pub score: u8,
    pub categories: BTreeSet<Category>,
    pub tags: BTreeSet<String>,
    pub n_passages: usize,
}

impl FirmPeriodIndicator {
    pub fn empty(firm_id: &str, snapshot: &str) -> Self {
        Self {
            firm_id: firm_id.to_string(),
            snapshot: snapshot.to_string(),
            mention: false,
            score: 0,
            categories: BTreeSet::new(),
            tags: BTreeSet::new(),
            n_passages: 0,
        }
    }

    pub fn add(&mut self, c: &Classification) {
        self.n_passages += 1;
        self.mention = true;
        self.score = self.score.max(c.affected);
        self.categories.extend(c.categories.iter().copied());
        self.tags.extend(c.tags.iter().cloned());
    }
}

/// Max score and unions over every classified passage of the firm, whichever
/// of its domains the passage came from.
pub fn aggregate_firm_period<'a, I>(firm_id: &str, snapshot: &str, passages: I) -> FirmPeriodIndicator
where
    I: IntoIterator<Item = &'a Classification>,
{
    let mut ind = FirmPeriodIndicator::empty(firm_id, snapshot);
    for c in passages {
        ind.add(c);
    }
    ind
}

/// Indicators for every observed firm-snapshot pair (those with at least one
/// capture) and every pair with a classified passage. Passages whose output
/// failed to parse are left out.
pub fn aggregate_indicators(
    records: &[ClassificationRecord],
    observed: &BTreeSet<(String, String)>,
) -> Vec<FirmPeriodIndicator> {
    let mut out: BTreeMap<(String, String), FirmPeriodIndicator> = observed
        .iter()
        .map(|(f, s)| ((f.clone(), s.clone()), FirmPeriodIndicator::empty(f, s)))
        .collect();
    for r in records {
        let Some(c) = &r.classification else {
            continue;
        };
        out.entry((r.firm_id.clone(), r.snapshot.clone()))
            .or_insert_with(|| FirmPeriodIndicator::empty(&r.firm_id, &r.snapshot))
            .add(c);
    }
    out.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cls(affected: u8, cats: &[Category], tags: &[&str]) -> Classification {
        Classification {
            affected,
            categories: cats.iter().copied().collect(),
            tags: tags.iter().map(|t| t.to_string()).collect(),
            raw_output: String::new(),
        }
        .normalized()
    }

    #[test]
    fn max_and_union() {
        let cs = [
            cls(1, &[Category::Production], &["recruiting procedures"]),
            cls(3, &[Category::Demand], &["closure"]),
            cls(0, &[], &[]),
        ];
        let ind = aggregate_firm_period("F", "S", &cs);
        assert_eq!(ind.score, 3);
        assert!(ind.mention);
        assert_eq!(ind.n_passages, 3);
        assert_eq!(ind.tags.len(), 2);
        assert_eq!(ind.categories.len(), 2);
    }

    #[test]
    fn across_domains_and_empty() {
        let rec = |url: &str, c: Option<Classification>| ClassificationRecord {
            firm_id: "F".into(),
            snapshot: "S".into(),
            url: url.into(),
            passage_index: 0,
            text: "t".into(),
            classification: c,
            error: None,
        };
        let records = vec![
            rec("https://a.com/", Some(cls(2, &[], &[]))),
            rec("https://b.de/", Some(cls(3, &[], &[]))),
            rec("https://b.de/x", None),
        ];
        let observed = BTreeSet::from([("F".to_string(), "S".to_string()), ("G".to_string(), "S".to_string())]);
        let inds = aggregate_indicators(&records, &observed);
        assert_eq!(inds.len(), 2);
        assert_eq!((inds[0].score, inds[0].n_passages), (3, 2));
        assert!(!inds[1].mention);
        assert_eq!(inds[1].score, 0);
    }

    fn passage() -> impl Strategy<Value = Classification> {
        (
            0u8..=3,
            prop::collection::btree_set(
                prop::sample::select(vec![Category::Production, Category::Demand, Category::Supply]),
                0..=2,
            ),
            prop::collection::vec(prop::sample::select(vec!["closure", "home office", "hygiene"]), 0..3),
        )
            .prop_map(|(a, c, t)| Classification {
                affected: a,
                categories: c,
                tags: t.into_iter().map(String::from).collect(),
                raw_output: String::new(),
            }
            .normalized())
    }

    proptest! {
        #[test]
        fn monotone_and_order_independent(
            mut ps in prop::collection::vec(passage(), 0..8),
            extra in passage(),
            seed in any::<u64>(),
        ) {
            let base = aggregate_firm_period("F", "S", &ps);
            let mut more = ps.clone();
            more.push(extra);
            let grown = aggregate_firm_period("F", "S", &more);
            prop_assert!(grown.score >= base.score);
            prop_assert!(grown.tags.is_superset(&base.tags));
            // deterministic shuffle
            let n = ps.len();
            if n > 1 {
                for i in 0..n {
                    let j = (seed.wrapping_mul(i as u64 + 7) % n as u64) as usize;
                    ps.swap(i, j);
                }
            }
            prop_assert_eq!(aggregate_firm_period("F", "S", &ps), base);
        }
    }
}
