use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::growth::{adjusted_return_pct, log_growth_pct};
use super::{EconError, Quarter};
use crate::archive::{FirmRecord, SnapshotRegistry};
use crate::classify::FirmPeriodIndicator;
use crate::validate::PolicySeries;

/// Country-quarter policy controls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyControls {
    pub workplace_recommended: f64,
    pub workplace_required: f64,
    pub stayhome_recommended: f64,
    pub stayhome_required: f64,
    pub log_fiscal: f64,
    pub covid_deaths: f64,
}

/// One firm in one quarter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub firm_id: String,
    pub quarter: Quarter,
    pub dlog_sales_pct: Option<f64>,
    pub dlog_return_pct: Option<f64>,
    pub lag_log_assets: Option<f64>,
    pub covid_mention: u8,
    pub mild: u8,
    pub moderate: u8,
    pub severe: u8,
    /// False for pandemic quarters without any classified snapshot of the
    /// firm; such rows carry zero dummies and are dropped from estimation.
    pub indicator_observed: bool,
    pub country: String,
    pub nace2: u8,
    pub controls: Option<PolicyControls>,
}

/// A row of the financials file. Levels are in `currency`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinancialRow {
    #[serde(alias = "firm")]
    pub firm_id: String,
    pub quarter: Quarter,
    pub sales: Option<f64>,
    pub assets: Option<f64>,
    pub employees: Option<f64>,
    #[serde(default)]
    pub currency: String,
    pub close: Option<f64>,
    pub cum_adj: Option<f64>,
    pub trf: Option<f64>,
    #[serde(default)]
    pub naics: Option<String>,
}

fn read(path: &Path) -> Result<String, EconError> {
    std::fs::read_to_string(path).map_err(|source| EconError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn csv_rows<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<Vec<T>, EconError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize::<T>()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| EconError::Format {
                path: origin.to_string(),
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn parse_financials(text: &str, origin: &str) -> Result<Vec<FinancialRow>, EconError> {
    let mut rows: Vec<FinancialRow> = csv_rows(text, origin)?;
    for r in &mut rows {
        r.currency = r.currency.to_ascii_uppercase();
        if r.naics.as_deref().is_some_and(str::is_empty) {
            r.naics = None;
        }
    }
    Ok(rows)
}

pub fn load_financials(path: &Path) -> Result<Vec<FinancialRow>, EconError> {
    parse_financials(&read(path)?, &path.display().to_string())
}

/// Quarter-end exchange rates, quoted as USD per unit of currency. USD
/// itself needs no row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FxTable {
    rates: HashMap<(String, Quarter), f64>,
}

#[derive(Deserialize)]
struct FxRow {
    currency: String,
    quarter: Quarter,
    #[serde(alias = "rate", alias = "usd")]
    usd_rate: f64,
}

impl FxTable {
    pub fn parse(text: &str, origin: &str) -> Result<Self, EconError> {
        let mut rates = HashMap::new();
        for (i, row) in csv_rows::<FxRow>(text, origin)?.into_iter().enumerate() {
            let bad = |message: String| EconError::Format {
                path: origin.to_string(),
                line: i + 2,
                message,
            };
            if !(row.usd_rate.is_finite() && row.usd_rate > 0.0) {
                return Err(bad(format!("rate {} must be positive", row.usd_rate)));
            }
            let key = (row.currency.to_ascii_uppercase(), row.quarter);
            if rates.insert(key, row.usd_rate).is_some() {
                return Err(bad(format!("duplicate rate for {} {}", row.currency, row.quarter)));
            }
        }
        Ok(Self { rates })
    }

    pub fn load(path: &Path) -> Result<Self, EconError> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn insert(&mut self, currency: &str, quarter: Quarter, usd_rate: f64) {
        self.rates.insert((currency.to_ascii_uppercase(), quarter), usd_rate);
    }

    pub fn rate(&self, currency: &str, quarter: Quarter) -> Result<f64, EconError> {
        if currency == "USD" {
            return Ok(self.rates.get(&(currency.to_string(), quarter)).copied().unwrap_or(1.0));
        }
        self.rates
            .get(&(currency.to_string(), quarter))
            .copied()
            .ok_or_else(|| EconError::MissingFx {
                currency: currency.to_string(),
                quarter,
            })
    }
}

/// NAICS to 2-digit NACE, matched on the longest NAICS prefix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Concordance {
    map: BTreeMap<String, u8>,
}

#[derive(Deserialize)]
struct ConcordanceRow {
    naics: String,
    #[serde(alias = "nace")]
    nace2: String,
}

impl Concordance {
    pub fn parse(text: &str, origin: &str) -> Result<Self, EconError> {
        let mut map = BTreeMap::new();
        for (i, row) in csv_rows::<ConcordanceRow>(text, origin)?.into_iter().enumerate() {
            let bad = |message: String| EconError::Format {
                path: origin.to_string(),
                line: i + 2,
                message,
            };
            if row.naics.is_empty() || !row.naics.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad(format!("bad NAICS code {:?}", row.naics)));
            }
            // "C10", "10", "10.11" all give division 10
            let digits: String = row.nace2.chars().filter(char::is_ascii_digit).take(2).collect();
            let nace2 = digits
                .parse::<u8>()
                .ok()
                .filter(|n| (1..=99).contains(n) && digits.len() == 2)
                .ok_or_else(|| bad(format!("bad NACE code {:?}", row.nace2)))?;
            map.insert(row.naics, nace2);
        }
        Ok(Self { map })
    }

    pub fn load(path: &Path) -> Result<Self, EconError> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn lookup(&self, naics: &str) -> Option<u8> {
        (1..=naics.len())
            .rev()
            .find_map(|n| naics.get(..n).and_then(|p| self.map.get(p)).copied())
    }
}

/// Ordinal policy levels mapped to the recommended/required dummies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyLevels {
    pub recommend: u8,
    pub workplace_require: u8,
    pub stayhome_require: u8,
}

impl Default for PolicyLevels {
    fn default() -> Self {
        Self {
            recommend: 1,
            workplace_require: 2,
            stayhome_require: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelOptions {
    pub levels: PolicyLevels,
    /// Quarters before this one get zero dummies and zero controls.
    pub first_pandemic_quarter: Quarter,
    /// Every quarter in this range must contain some snapshot midpoint.
    pub required_coverage: Option<(Quarter, Quarter)>,
}

impl Default for PanelOptions {
    fn default() -> Self {
        Self {
            levels: PolicyLevels::default(),
            first_pandemic_quarter: Quarter { year: 2020, q: 1 },
            required_coverage: Some((Quarter { year: 2020, q: 1 }, Quarter { year: 2022, q: 4 })),
        }
    }
}

pub struct PanelInputs<'a> {
    pub financials: &'a [FinancialRow],
    pub fx: &'a FxTable,
    pub indicators: &'a [FirmPeriodIndicator],
    pub firms: &'a [FirmRecord],
    pub registry: &'a SnapshotRegistry,
    pub policy: &'a [PolicySeries],
    pub concordance: Option<&'a Concordance>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelBuild {
    /// Sorted by firm, then quarter.
    pub observations: Vec<PanelObservation>,
    pub warnings: Vec<String>,
}

/// Reduce a country's daily policy data to one quarter: the strictest
/// ordinal reached, summed fiscal outlays and mean deaths.
pub fn quarter_controls(series: &PolicySeries, q: Quarter, levels: &PolicyLevels) -> Option<PolicyControls> {
    let days = series.in_window(q.first_day(), q.last_day());
    let workplace = days.iter().filter_map(|p| p.workplace_closing).max()?;
    let stay_home = days.iter().filter_map(|p| p.stay_home).max()?;
    let fiscal: f64 = days.iter().filter_map(|p| p.fiscal).sum();
    let deaths: Vec<f64> = days.iter().filter_map(|p| p.deaths).collect();
    if deaths.is_empty() || fiscal <= -1.0 {
        return None;
    }
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    Some(PolicyControls {
        workplace_recommended: flag(workplace == levels.recommend),
        workplace_required: flag(workplace >= levels.workplace_require),
        stayhome_recommended: flag(stay_home == levels.recommend),
        stayhome_required: flag(stay_home >= levels.stayhome_require),
        log_fiscal: fiscal.ln_1p(),
        covid_deaths: deaths.iter().sum::<f64>() / deaths.len() as f64,
    })
}

/// Fail unless every quarter of `range` contains the midpoint of some
/// snapshot.
pub fn check_snapshot_coverage(registry: &SnapshotRegistry, range: (Quarter, Quarter)) -> Result<(), EconError> {
    let covered: std::collections::BTreeSet<Quarter> =
        registry.snapshots().iter().map(|s| Quarter::of(s.midpoint())).collect();
    match Quarter::range(range.0, range.1).find(|q| !covered.contains(q)) {
        Some(q) => Err(EconError::Coverage(q)),
        None => Ok(()),
    }
}

struct UsdRow<'a> {
    row: &'a FinancialRow,
    sales: Option<f64>,
    assets: Option<f64>,
    close: Option<f64>,
}

fn to_usd<'a>(row: &'a FinancialRow, fx: &FxTable) -> Result<UsdRow<'a>, EconError> {
    let levels = [row.sales, row.assets, row.close];
    let rate = if levels.iter().any(Option::is_some) {
        if row.currency.is_empty() {
            return Err(EconError::MissingFx {
                currency: String::new(),
                quarter: row.quarter,
            });
        }
        fx.rate(&row.currency, row.quarter)?
    } else {
        1.0
    };
    Ok(UsdRow {
        row,
        sales: row.sales.map(|v| v * rate),
        assets: row.assets.map(|v| v * rate),
        close: row.close.map(|v| v * rate),
    })
}

pub fn build_panel(inputs: &PanelInputs<'_>, opts: &PanelOptions) -> Result<PanelBuild, EconError> {
    if let Some(range) = opts.required_coverage {
        check_snapshot_coverage(inputs.registry, range)?;
    }
    let mut warnings = Vec::new();
    let firms: HashMap<&str, &FirmRecord> = inputs.firms.iter().map(|f| (f.firm_id.as_str(), f)).collect();
    let policy: HashMap<&str, &PolicySeries> = inputs.policy.iter().map(|s| (s.region.as_str(), s)).collect();

    // firm-quarter -> (any mention, max score)
    let mut wai: HashMap<(&str, Quarter), (bool, u8)> = HashMap::new();
    for ind in inputs.indicators {
        let Some(snap) = inputs.registry.get(&ind.snapshot) else {
            warnings.push(format!("indicator for unknown snapshot {:?} ignored", ind.snapshot));
            continue;
        };
        let e = wai
            .entry((ind.firm_id.as_str(), Quarter::of(snap.midpoint())))
            .or_insert((false, 0));
        e.0 |= ind.mention || ind.score > 0;
        e.1 = e.1.max(ind.score.min(3));
    }

    let mut by_firm: BTreeMap<&str, BTreeMap<Quarter, &FinancialRow>> = BTreeMap::new();
    for row in inputs.financials {
        if by_firm.entry(&row.firm_id).or_default().insert(row.quarter, row).is_some() {
            return Err(EconError::DuplicateFirmQuarter {
                firm_id: row.firm_id.clone(),
                quarter: row.quarter,
            });
        }
    }

    let mut observations = Vec::new();
    for (firm_id, rows) in by_firm {
        let Some(firm) = firms.get(firm_id) else {
            warnings.push(format!("financials for firm {firm_id:?} not in the firm list ignored"));
            continue;
        };
        let usd: Vec<UsdRow> = rows.values().map(|r| to_usd(r, inputs.fx)).collect::<Result<_, _>>()?;
        for (i, cur) in usd.iter().enumerate() {
            let q = cur.row.quarter;
            let prev = i
                .checked_sub(1)
                .map(|j| &usd[j])
                .filter(|p| p.row.quarter == q.prev());
            let growth = |f: fn(&UsdRow<'_>) -> Option<f64>| {
                prev.and_then(|p| log_growth_pct(f(cur)?, f(p)?))
            };
            let dlog_sales_pct = growth(|r| r.sales);
            let dlog_return_pct = prev.and_then(|p| {
                adjusted_return_pct(
                    cur.close?,
                    cur.row.cum_adj?,
                    cur.row.trf?,
                    p.close?,
                    p.row.cum_adj?,
                    p.row.trf?,
                )
            });
            let lag_log_assets = prev.and_then(|p| p.assets).filter(|a| *a > 0.0).map(f64::ln);

            let nace2 = match cur.row.naics.as_deref() {
                None => firm.nace2,
                Some(code) => match inputs.concordance.and_then(|c| c.lookup(code)) {
                    Some(n) => n,
                    None => {
                        warnings.push(format!("{firm_id} {q}: NAICS {code} unmapped, using firm NACE"));
                        firm.nace2
                    }
                },
            };

            let pandemic = q >= opts.first_pandemic_quarter;
            let (observed, mention, score) = if pandemic {
                match wai.get(&(firm_id, q)) {
                    Some(&(m, s)) => (true, m, s),
                    None => (false, false, 0),
                }
            } else {
                (true, false, 0)
            };
            let controls = if pandemic {
                policy
                    .get(firm.country.as_str())
                    .and_then(|s| quarter_controls(s, q, &opts.levels))
            } else {
                Some(PolicyControls::default())
            };
            observations.push(PanelObservation {
                firm_id: firm_id.to_string(),
                quarter: q,
                dlog_sales_pct,
                dlog_return_pct,
                lag_log_assets,
                covid_mention: mention as u8,
                mild: (score == 1) as u8,
                moderate: (score == 2) as u8,
                severe: (score == 3) as u8,
                indicator_observed: observed,
                country: firm.country.clone(),
                nace2,
                controls,
            });
        }
    }
    Ok(PanelBuild { observations, warnings })
}

/// Write the panel as CSV; absent values are empty cells.
pub fn panel_to_csv(observations: &[PanelObservation]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let mut out = String::from(
        "firm_id,quarter,dlog_sales_pct,dlog_return_pct,lag_log_assets,covid_mention,mild,moderate,severe,\
         indicator_observed,country,nace2,workplace_recommended,workplace_required,stayhome_recommended,\
         stayhome_required,log_fiscal,covid_deaths\n",
    );
    for o in observations {
        let c = o.controls;
        let cells = [
            o.firm_id.clone(),
            o.quarter.to_string(),
            opt(o.dlog_sales_pct),
            opt(o.dlog_return_pct),
            opt(o.lag_log_assets),
            o.covid_mention.to_string(),
            o.mild.to_string(),
            o.moderate.to_string(),
            o.severe.to_string(),
            (o.indicator_observed as u8).to_string(),
            o.country.clone(),
            o.nace2.to_string(),
            opt(c.map(|c| c.workplace_recommended)),
            opt(c.map(|c| c.workplace_required)),
            opt(c.map(|c| c.stayhome_recommended)),
            opt(c.map(|c| c.stayhome_required)),
            opt(c.map(|c| c.log_fiscal)),
            opt(c.map(|c| c.covid_deaths)),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
