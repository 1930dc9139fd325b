use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{PolicySeries, ValidateError};
use crate::archive::SnapshotRegistry;
use crate::indicator::RegionSeries;

/// How daily stringency is reduced to one value per snapshot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StringencyReduction {
    /// Mean of the daily values inside the snapshot window.
    #[default]
    WindowMean,
    /// The value on the window's middle day.
    Midpoint,
}

/// Which WAI share is compared with stringency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaiMeasure {
    #[default]
    ShareSevere,
    ShareMention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedPoint {
    pub region: String,
    pub snapshot: String,
    pub n_firms: usize,
    pub wai: f64,
    pub stringency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub region: String,
    pub n_firms: u64,
    pub n_snapshots: usize,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrelationOptions {
    pub reduction: StringencyReduction,
    pub measure: WaiMeasure,
    /// Regions with fewer aligned snapshots get no coefficient.
    pub min_snapshots: usize,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self {
            reduction: StringencyReduction::WindowMean,
            measure: WaiMeasure::ShareSevere,
            min_snapshots: 3,
        }
    }
}

/// Pair each WAI point with the snapshot's stringency. Snapshots without any
/// policy value in their window (or unknown to the registry) are dropped from
/// both sides together.
pub fn align_periods(
    wai: &RegionSeries,
    policy: &PolicySeries,
    registry: &SnapshotRegistry,
    opts: &CorrelationOptions,
) -> Vec<PairedPoint> {
    let mut out = Vec::new();
    for p in &wai.points {
        let Some(snap) = registry.get(&p.snapshot) else {
            continue;
        };
        let stringency = match opts.reduction {
            StringencyReduction::WindowMean => {
                let vals: Vec<f64> = policy
                    .in_window(snap.period_start, snap.period_end)
                    .iter()
                    .filter_map(|d| d.stringency)
                    .collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            }
            StringencyReduction::Midpoint => policy.on(snap.midpoint()).and_then(|d| d.stringency),
        };
        let Some(stringency) = stringency else {
            continue;
        };
        out.push(PairedPoint {
            region: wai.region.clone(),
            snapshot: p.snapshot.clone(),
            n_firms: p.n_firms,
            wai: match opts.measure {
                WaiMeasure::ShareSevere => p.share_severe,
                WaiMeasure::ShareMention => p.share_mention,
            },
            stringency,
        });
    }
    out
}

pub fn first_diff(values: &[f64]) -> Result<Vec<f64>, ValidateError> {
    if values.len() < 2 {
        return Err(ValidateError::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    Ok(values.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Sample Pearson correlation (two-pass).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, ValidateError> {
    if x.len() != y.len() {
        return Err(ValidateError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(ValidateError::TooShort { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(ValidateError::Constant);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Region-level correlation of first differences of WAI and stringency.
/// Returns the report rows (regions with too few snapshots or constant
/// differences omitted) and every aligned pair, both ordered by region.
pub fn correlation_report(
    wai: &[RegionSeries],
    policy: &[PolicySeries],
    registry: &SnapshotRegistry,
    opts: &CorrelationOptions,
) -> (Vec<CorrelationRow>, Vec<PairedPoint>) {
    let policy_by_region: BTreeMap<&str, &PolicySeries> =
        policy.iter().map(|p| (p.region.as_str(), p)).collect();
    let mut ordered: Vec<&RegionSeries> = wai.iter().collect();
    ordered.sort_by(|a, b| a.region.cmp(&b.region));
    let mut rows = Vec::new();
    let mut paired = Vec::new();
    for series in ordered {
        let Some(pol) = policy_by_region.get(series.region.as_str()) else {
            continue;
        };
        let pairs = align_periods(series, pol, registry, opts);
        if pairs.len() >= opts.min_snapshots.max(3) {
            let w: Vec<f64> = pairs.iter().map(|p| p.wai).collect();
            let s: Vec<f64> = pairs.iter().map(|p| p.stringency).collect();
            let r = first_diff(&w).and_then(|dw| first_diff(&s).and_then(|ds| pearson(&dw, &ds)));
            match r {
                Ok(r) => {
                    let mean_n = pairs.iter().map(|p| p.n_firms as f64).sum::<f64>() / pairs.len() as f64;
                    rows.push(CorrelationRow {
                        region: series.region.clone(),
                        n_firms: mean_n.round() as u64,
                        n_snapshots: pairs.len(),
                        r,
                    });
                }
                Err(e) => warn!(region = %series.region, error = %e, "no correlation"),
            }
        }
        paired.extend(pairs);
    }
    (rows, paired)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::Snapshot;
    use crate::indicator::{RegionLevel, RegionPoint};
    use crate::validate::PolicyPoint;
    use chrono::{Datelike, NaiveDate};
    use proptest::prelude::*;

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, m, day).unwrap()
    }

    fn registry() -> SnapshotRegistry {
        SnapshotRegistry::new(
            (1..=5)
                .map(|m| {
                    let end = d(m + 1, 1).pred_opt().unwrap();
                    Snapshot::new(&format!("S{m}"), &format!("m{m}"), d(m, 1), end)
                })
                .collect(),
        )
        .unwrap()
    }

    fn policy(region: &str, f: impl Fn(NaiveDate) -> Option<f64>) -> PolicySeries {
        let mut points = Vec::new();
        let mut day = d(1, 1);
        while day < d(6, 1) {
            points.push(PolicyPoint {
                date: day,
                stringency: f(day),
                workplace_closing: None,
                stay_home: None,
                fiscal: None,
                deaths: None,
            });
            day = day.succ_opt().unwrap();
        }
        PolicySeries {
            region: region.into(),
            points,
        }
    }

    fn wai(region: &str, shares: &[f64]) -> RegionSeries {
        RegionSeries {
            level: RegionLevel::Country,
            region: region.into(),
            points: shares
                .iter()
                .enumerate()
                .map(|(i, s)| RegionPoint {
                    snapshot: format!("S{}", i + 1),
                    n_firms: 10 + i,
                    n_severe: 0,
                    n_mention: 0,
                    share_severe: *s,
                    share_mention: *s,
                })
                .collect(),
        }
    }

    #[test]
    fn basic_math() {
        assert_eq!(first_diff(&[3.0, 5.0, 4.0]).unwrap(), [2.0, -1.0]);
        assert_eq!(first_diff(&[2.0, 2.0, 2.0]).unwrap(), [0.0, 0.0]);
        assert!(first_diff(&[1.0]).is_err());
        assert!((pearson(&[1., 2., 3., 4.], &[2., 4., 6., 8.]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[0., 1., 0., 1.], &[0., 1., 1., 0.]).unwrap(), 0.0);
        assert!((pearson(&[1., 2., 3.], &[-1., -2., -3.]).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&[1., 1.], &[1., 2.]), Err(ValidateError::Constant)));
    }

    #[test]
    fn window_reductions() {
        let reg = registry();
        let constant = policy("DE", |_| Some(50.0));
        let pairs = align_periods(&wai("DE", &[0.1]), &constant, &reg, &CorrelationOptions::default());
        assert_eq!(pairs[0].stringency, 50.0);

        // only two days of January carry data: 40 and 60
        let two = policy("DE", |day| match (day.month0(), day.day()) {
            (0, 10) => Some(40.0),
            (0, 20) => Some(60.0),
            _ => None,
        });
        let pairs = align_periods(&wai("DE", &[0.1, 0.2]), &two, &reg, &CorrelationOptions::default());
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].stringency, 50.0);

        let mid = CorrelationOptions {
            reduction: StringencyReduction::Midpoint,
            ..Default::default()
        };
        let ramp = policy("DE", |day| Some(day.ordinal() as f64));
        let pairs = align_periods(&wai("DE", &[0.1]), &ramp, &reg, &mid);
        assert_eq!(pairs[0].stringency, 16.0);
    }

    #[test]
    fn report_rules() {
        let reg = registry();
        // stringency by month: 10, 30, 20, 60, 40; WAI in the same shape
        let level = |m: u32| [10.0, 30.0, 20.0, 60.0, 40.0][m as usize - 1];
        let pol = vec![
            policy("DE", |day| Some(level(day.month()))),
            policy("FR", |day| Some(level(day.month()))),
        ];
        let shares: Vec<f64> = (1..=5).map(|m| level(m) / 100.0).collect();
        let series = vec![wai("FR", &shares[..2]), wai("DE", &shares)];
        let (rows, paired) = correlation_report(&series, &pol, &reg, &CorrelationOptions::default());
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].region, "DE");
        assert!((rows[0].r - 1.0).abs() < 1e-12);
        assert_eq!(rows[0].n_firms, 12);
        assert_eq!(paired.len(), 7);
        assert_eq!(paired[0].region, "DE");

        let reversed: Vec<_> = series.iter().rev().cloned().collect();
        assert_eq!(correlation_report(&reversed, &pol, &reg, &CorrelationOptions::default()).0, rows);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            xy in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..20),
            a in 0.1f64..10.0, b in -50.0f64..50.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
            prop_assume!(pearson(&x, &y).is_ok());
            let r = pearson(&x, &y).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let xn: Vec<f64> = x.iter().map(|v| -a * v).collect();
            prop_assert!((pearson(&xs, &y).unwrap() - r).abs() < 1e-9);
            prop_assert!((pearson(&xn, &y).unwrap() + r).abs() < 1e-9);
        }

        #[test]
        fn diff_inverts_cumsum(d in prop::collection::vec(-1000i32..1000, 1..30)) {
            let mut acc = 0.0;
            let mut cum = vec![0.0];
            for v in &d {
                acc += *v as f64;
                cum.push(acc);
            }
            let back = first_diff(&cum).unwrap();
            let want: Vec<f64> = d.iter().map(|v| *v as f64).collect();
            prop_assert_eq!(back, want);
        }
    }
}
