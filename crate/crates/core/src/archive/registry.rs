use std::collections::HashSet;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::ArchiveError;

/// A crawl snapshot and the calendar window it covers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub label: String,
    pub period_start: NaiveDate,
    pub period_end: NaiveDate,
}

impl Snapshot {
    pub fn new(id: &str, label: &str, period_start: NaiveDate, period_end: NaiveDate) -> Self {
        Self {
            id: id.to_string(),
            label: label.to_string(),
            period_start,
            period_end,
        }
    }

    /// Middle day of the window (rounded down).
    pub fn midpoint(&self) -> NaiveDate {
        let span = (self.period_end - self.period_start).num_days();
        self.period_start + chrono::Duration::days(span / 2)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.period_start <= date && date <= self.period_end
    }
}

/// Chronologically ordered snapshots with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotRegistry {
    snapshots: Vec<Snapshot>,
}

impl SnapshotRegistry {
    pub fn new(mut snapshots: Vec<Snapshot>) -> Result<Self, ArchiveError> {
        if snapshots.is_empty() {
            return Err(ArchiveError::EmptyRegistry);
        }
        let mut seen = HashSet::new();
        for s in &snapshots {
            if !seen.insert(s.id.clone()) {
                return Err(ArchiveError::DuplicateSnapshot(s.id.clone()));
            }
            if s.period_start > s.period_end {
                return Err(ArchiveError::BadPeriod {
                    id: s.id.clone(),
                    value: format!("{}..{}", s.period_start, s.period_end),
                });
            }
        }
        snapshots.sort_by(|a, b| {
            a.period_start
                .cmp(&b.period_start)
                .then_with(|| a.id.cmp(&b.id))
        });
        Ok(Self { snapshots })
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.id == id)
    }

    /// Chronological position of `id`.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.snapshots.iter().position(|s| s.id == id)
    }

    pub fn by_label(&self, label: &str) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.label == label)
    }
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

fn month_number(name: &str) -> Option<u32> {
    let name = name.trim().to_ascii_lowercase();
    MONTHS.iter().position(|m| *m == name).map(|i| i as u32 + 1)
}

fn last_day_of_month(year: i32, month: u32) -> Option<NaiveDate> {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    NaiveDate::from_ymd_opt(ny, nm, 1)?.pred_opt()
}

/// Parse labels such as `"January 2020"` or `"March/April 2020"` into the
/// first day of the first month and the last day of the last month.
pub fn parse_period_label(label: &str) -> Option<(NaiveDate, NaiveDate)> {
    let (months, year) = label.trim().rsplit_once(' ')?;
    let year: i32 = year.parse().ok()?;
    let mut parts = months.split('/');
    let first = month_number(parts.next()?)?;
    let last = match parts.next() {
        Some(m) => month_number(m)?,
        None => first,
    };
    if parts.next().is_some() || last < first {
        return None;
    }
    let start = NaiveDate::from_ymd_opt(year, first, 1)?;
    let end = last_day_of_month(year, last)?;
    debug_assert_eq!(end.year(), year);
    Some((start, end))
}

/// Parse a tab-separated registry with a header row. Required columns are
/// `id` and `label`; `period_start`/`period_end` (ISO dates) are optional and
/// otherwise derived from the label.
pub fn parse_snapshot_registry(text: &str, origin: &str) -> Result<SnapshotRegistry, ArchiveError> {
    let fmt_err = |message: String| ArchiveError::Format {
        path: origin.to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = match reader.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.clone(),
        Ok(_) => return Err(ArchiveError::EmptyRegistry),
        Err(e) => return Err(fmt_err(e.to_string())),
    };
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let id_col = col("id").ok_or_else(|| fmt_err("missing `id` column".into()))?;
    let label_col = col("label").ok_or_else(|| fmt_err("missing `label` column".into()))?;
    let start_col = col("period_start");
    let end_col = col("period_end");

    let mut snapshots = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| fmt_err(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let id = record.get(id_col).unwrap_or_default().to_string();
        let label = record.get(label_col).unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(fmt_err(format!("row with label {label:?} has no id")));
        }
        let explicit = |c: Option<usize>| {
            c.and_then(|c| record.get(c))
                .filter(|v| !v.is_empty())
                .map(|v| {
                    NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|_| ArchiveError::BadPeriod {
                        id: id.clone(),
                        value: v.to_string(),
                    })
                })
                .transpose()
        };
        let (start, end) = match (explicit(start_col)?, explicit(end_col)?) {
            (Some(s), Some(e)) => (s, e),
            _ => parse_period_label(&label).ok_or_else(|| ArchiveError::BadPeriod {
                id: id.clone(),
                value: label.clone(),
            })?,
        };
        snapshots.push(Snapshot {
            id,
            label,
            period_start: start,
            period_end: end,
        });
    }
    SnapshotRegistry::new(snapshots)
}

pub fn load_snapshot_registry(path: &Path) -> Result<SnapshotRegistry, ArchiveError> {
    let text = std::fs::read_to_string(path).map_err(|source| ArchiveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_snapshot_registry(&text, &path.display().to_string())
}

impl SnapshotRegistry {
    /// The 24 monthly crawls from January 2020 to December 2022.
    pub fn builtin() -> Self {
        parse_snapshot_registry(include_str!("../../assets/snapshots.tsv"), "builtin")
            .expect("builtin registry is valid")
    }
}
