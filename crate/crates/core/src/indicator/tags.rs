use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{map_tags_to_umbrellas, UmbrellaTable};
use crate::archive::FirmRecord;
use crate::classify::FirmPeriodIndicator;

/// Which firms form the denominator of a tag share.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagDenominator {
    /// Firms that mentioned the crisis at least once.
    #[default]
    MentioningFirms,
    /// Every firm with an indicator.
    AnalyzedFirms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagShare {
    pub country: String,
    pub umbrella: String,
    pub n_firms: usize,
    pub n_tagged: usize,
    pub share: f64,
}

#[derive(Default)]
struct FirmTags<'a> {
    mention: bool,
    tags: BTreeSet<&'a str>,
}

/// Per country and umbrella, the share of firms whose tags over the whole
/// period fall under that umbrella. Countries with an empty denominator are
/// omitted; every umbrella is listed for the others.
pub fn tag_country_shares(
    indicators: &[FirmPeriodIndicator],
    firms: &[FirmRecord],
    table: &UmbrellaTable,
    denominator: TagDenominator,
) -> Vec<TagShare> {
    let by_id: HashMap<&str, &FirmRecord> = firms.iter().map(|f| (f.firm_id.as_str(), f)).collect();
    let mut per_firm: BTreeMap<&str, FirmTags> = BTreeMap::new();
    for i in indicators {
        let e = per_firm.entry(i.firm_id.as_str()).or_default();
        e.mention |= i.mention;
        e.tags.extend(i.tags.iter().map(String::as_str));
    }
    // country -> (denominator, umbrella -> count)
    let mut counts: BTreeMap<&str, (usize, BTreeMap<String, usize>)> = BTreeMap::new();
    for (firm_id, ft) in &per_firm {
        let Some(firm) = by_id.get(firm_id) else {
            continue;
        };
        if denominator == TagDenominator::MentioningFirms && !ft.mention {
            continue;
        }
        let c = counts.entry(firm.country.as_str()).or_default();
        c.0 += 1;
        for u in map_tags_to_umbrellas(ft.tags.iter().copied(), table) {
            *c.1.entry(u).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for (country, (n, by_umbrella)) in counts {
        for name in table.names() {
            let k = by_umbrella.get(name).copied().unwrap_or(0);
            out.push(TagShare {
                country: country.to_string(),
                umbrella: name.to_string(),
                n_firms: n,
                n_tagged: k,
                share: k as f64 / n as f64,
            });
        }
    }
    out
}
