use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ValidateError;
use crate::indicator::RegionLevel;

/// One day of policy data. Absent values stay absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyPoint {
    pub date: NaiveDate,
    pub stringency: Option<f64>,
    pub workplace_closing: Option<u8>,
    pub stay_home: Option<u8>,
    pub fiscal: Option<f64>,
    pub deaths: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySeries {
    pub region: String,
    /// Strictly increasing dates.
    pub points: Vec<PolicyPoint>,
}

impl PolicySeries {
    pub fn in_window(&self, start: NaiveDate, end: NaiveDate) -> &[PolicyPoint] {
        let lo = self.points.partition_point(|p| p.date < start);
        let hi = self.points.partition_point(|p| p.date <= end);
        &self.points[lo..hi.max(lo)]
    }

    pub fn on(&self, date: NaiveDate) -> Option<&PolicyPoint> {
        self.points
            .binary_search_by(|p| p.date.cmp(&date))
            .ok()
            .map(|i| &self.points[i])
    }
}

/// Accepted header spellings, native first.
const DATE: &[&str] = &["date", "Date"];
const REGION: &[&str] = &["region", "RegionCode"];
const COUNTRY: &[&str] = &["CountryCode"];
const STRINGENCY: &[&str] = &[
    "stringency",
    "StringencyIndex",
    "StringencyIndex_Average",
    "StringencyIndex_Average_ForDisplay",
];
const WORKPLACE: &[&str] = &["workplace_closing", "C2_Workplace closing", "C2M_Workplace closing"];
const STAY_HOME: &[&str] = &["stay_home", "C6_Stay at home requirements", "C6M_Stay at home requirements"];
const FISCAL: &[&str] = &["fiscal", "E3_Fiscal measures"];
const DEATHS: &[&str] = &["deaths", "ConfirmedDeaths"];

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d"))
        .ok()
}

/// Parse a policy CSV into one series per region, sorted by region code.
///
/// The native layout has `date,region,stringency,workplace_closing,
/// stay_home,fiscal,deaths`. The tracker's own layout is accepted too: there
/// national rows (empty `RegionCode`) form the country level, keyed by
/// `CountryCode`, and sub-national rows the state level, keyed by
/// `RegionCode`.
pub fn parse_policy_csv(text: &str, origin: &str, level: RegionLevel) -> Result<Vec<PolicySeries>, ValidateError> {
    let fmt = |line: usize, message: String| ValidateError::Format {
        path: origin.to_string(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| fmt(1, e.to_string()))?.clone();
    let col = |names: &[&str]| names.iter().find_map(|n| headers.iter().position(|h| h == *n));
    let date_c = col(DATE).ok_or_else(|| fmt(1, "missing date column".into()))?;
    let region_c = col(REGION);
    let country_c = col(COUNTRY);
    let native = headers.iter().any(|h| h == "region");
    if region_c.is_none() && country_c.is_none() {
        return Err(fmt(1, "missing region column".into()));
    }
    let (s_c, w_c, h_c, f_c, d_c) = (col(STRINGENCY), col(WORKPLACE), col(STAY_HOME), col(FISCAL), col(DEATHS));

    let mut by_region: BTreeMap<String, BTreeMap<NaiveDate, PolicyPoint>> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| fmt(line, e.to_string()))?;
        let get = |c: Option<usize>| c.and_then(|c| rec.get(c)).filter(|v| !v.is_empty());
        let region = if native {
            get(region_c).map(str::to_string)
        } else {
            match (level, get(region_c)) {
                (RegionLevel::Country, None) => get(country_c).map(str::to_string),
                (RegionLevel::State, Some(r)) => Some(r.to_string()),
                _ => None,
            }
        };
        let Some(region) = region else {
            continue;
        };
        let raw_date = get(Some(date_c)).unwrap_or_default();
        let date = parse_date(raw_date).ok_or_else(|| fmt(line, format!("unparseable date {raw_date:?}")))?;
        let num = |c: Option<usize>, what: &str| -> Result<Option<f64>, ValidateError> {
            get(c)
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| fmt(line, format!("{what} {v:?} is not a number")))
                })
                .transpose()
        };
        let ordinal = |c: Option<usize>, what: &str| -> Result<Option<u8>, ValidateError> {
            num(c, what)?
                .map(|x| {
                    if x.fract() == 0.0 && (0.0..=3.0).contains(&x) {
                        Ok(x as u8)
                    } else {
                        Err(fmt(line, format!("{what} {x} outside 0..3")))
                    }
                })
                .transpose()
        };
        let stringency = num(s_c, "stringency")?;
        if let Some(s) = stringency {
            if !(0.0..=100.0).contains(&s) {
                return Err(ValidateError::StringencyOutOfRange {
                    region,
                    date,
                    value: s,
                });
            }
        }
        let point = PolicyPoint {
            date,
            stringency,
            workplace_closing: ordinal(w_c, "workplace_closing")?,
            stay_home: ordinal(h_c, "stay_home")?,
            fiscal: num(f_c, "fiscal")?,
            deaths: num(d_c, "deaths")?,
        };
        let days = by_region.entry(region.clone()).or_default();
        if days.insert(date, point).is_some() {
            return Err(fmt(line, format!("duplicate date {date} for region {region}")));
        }
    }
    Ok(by_region
        .into_iter()
        .map(|(region, days)| PolicySeries {
            region,
            points: days.into_values().collect(),
        })
        .collect())
}

pub fn load_policy_series(path: &Path, level: RegionLevel) -> Result<Vec<PolicySeries>, ValidateError> {
    let text = std::fs::read_to_string(path).map_err(|source| ValidateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_policy_csv(&text, &path.display().to_string(), level)
}

/// Unweighted daily mean stringency over `countries`, using whichever of them
/// report on a given day. Other fields are left absent.
pub fn average_stringency(series: &[PolicySeries], countries: &[String], region: &str) -> PolicySeries {
    let mut days: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for s in series.iter().filter(|s| countries.contains(&s.region)) {
        for p in &s.points {
            if let Some(v) = p.stringency {
                let e = days.entry(p.date).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
    }
    PolicySeries {
        region: region.to_string(),
        points: days
            .into_iter()
            .map(|(date, (sum, n))| PolicyPoint {
                date,
                stringency: Some(sum / n as f64),
                workplace_closing: None,
                stay_home: None,
                fiscal: None,
                deaths: None,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "date,region,stringency,workplace_closing,stay_home,fiscal,deaths\n";

    #[test]
    fn native_layout() {
        let text = format!(
            "{HEAD}2020-01-02,DE,10,0,0,,1\n2020-01-01,DE,100,3,2,5e9,\n2020-01-01,FR,0,,,,\n"
        );
        let s = parse_policy_csv(&text, "t", RegionLevel::Country).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].region, "DE");
        assert_eq!(s[0].points[0].stringency, Some(100.0));
        assert_eq!(s[0].points[0].deaths, None);
        assert_eq!(s[0].points[1].fiscal, None);
        assert_eq!(s[1].points[0].workplace_closing, None);
    }

    #[test]
    fn range_and_format_errors() {
        let bad = format!("{HEAD}2020-01-01,DE,101,,,,\n");
        assert!(matches!(
            parse_policy_csv(&bad, "t", RegionLevel::Country),
            Err(ValidateError::StringencyOutOfRange { .. })
        ));
        let bad_date = format!("{HEAD}2020-13-01,DE,1,,,,\n");
        assert!(matches!(
            parse_policy_csv(&bad_date, "t", RegionLevel::Country),
            Err(ValidateError::Format { .. })
        ));
        let dup = format!("{HEAD}2020-01-01,DE,1,,,,\n2020-01-01,DE,2,,,,\n");
        assert!(parse_policy_csv(&dup, "t", RegionLevel::Country).is_err());
        let ord = format!("{HEAD}2020-01-01,DE,1,4,,,\n");
        assert!(parse_policy_csv(&ord, "t", RegionLevel::Country).is_err());
    }

    #[test]
    fn tracker_layout_levels() {
        let text = "CountryName,CountryCode,RegionName,RegionCode,Jurisdiction,Date,C2M_Workplace closing,C6M_Stay at home requirements,E3_Fiscal measures,ConfirmedDeaths,StringencyIndex_Average\n\
            United States,USA,,,NAT_TOTAL,20200301,1.00,0.00,0,1,20.5\n\
            United States,USA,California,US_CA,STATE_TOTAL,20200301,2.00,1.00,,0,30\n";
        let c = parse_policy_csv(text, "t", RegionLevel::Country).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].region, "USA");
        assert_eq!(c[0].points[0].workplace_closing, Some(1));
        let s = parse_policy_csv(text, "t", RegionLevel::State).unwrap();
        assert_eq!(s[0].region, "US_CA");
        assert_eq!(s[0].points[0].stringency, Some(30.0));
    }

    #[test]
    fn europe_average() {
        let text = format!("{HEAD}2020-01-01,DE,10,,,,\n2020-01-01,FR,30,,,,\n2020-01-02,DE,20,,,,\n2020-01-01,US,90,,,,\n");
        let s = parse_policy_csv(&text, "t", RegionLevel::Country).unwrap();
        let eu = average_stringency(&s, &["DE".into(), "FR".into()], "EU");
        let v: Vec<_> = eu.points.iter().map(|p| p.stringency.unwrap()).collect();
        assert_eq!(v, [20.0, 20.0]);
    }
}
