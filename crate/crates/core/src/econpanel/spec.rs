use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::absorb::{absorb_fixed_effects, FeDimension, DEFAULT_MAX_ITER, DEFAULT_TOL};
use super::cluster::clustered_covariance;
use super::ols::estimate_ols;
use super::{EconError, PanelObservation, Quarter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependent {
    SalesGrowth,
    StockReturn,
}

impl Dependent {
    pub fn label(self) -> &'static str {
        match self {
            Dependent::SalesGrowth => "Log sales growth (%)",
            Dependent::StockReturn => "Log stock returns (%)",
        }
    }

    fn value(self, o: &PanelObservation) -> Option<f64> {
        match self {
            Dependent::SalesGrowth => o.dlog_sales_pct,
            Dependent::StockReturn => o.dlog_return_pct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeDim {
    Firm,
    Quarter,
    CountryNace2Quarter,
}

impl FeDim {
    pub fn label(self) -> &'static str {
        match self {
            FeDim::Firm => "Firm FE",
            FeDim::Quarter => "Quarter FE",
            FeDim::CountryNace2Quarter => "Country-Industry-Quarter FE",
        }
    }

    fn key(self, o: &PanelObservation) -> String {
        match self {
            FeDim::Firm => o.firm_id.clone(),
            FeDim::Quarter => o.quarter.to_string(),
            FeDim::CountryNace2Quarter => format!("{}|{}|{}", o.country, o.nace2, o.quarter),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterKey {
    #[default]
    Firm,
}

pub const LAGGED_DEPENDENT: &str = "lagged_dependent";
pub const WAI_REGRESSORS: [&str; 5] = ["covid_mention", "mild", "moderate", "severe", "lag_log_assets"];
pub const POLICY_CONTROLS: [&str; 6] = [
    "workplace_recommended",
    "workplace_required",
    "stayhome_recommended",
    "stayhome_required",
    "log_fiscal",
    "covid_deaths",
];

/// Value of a named regressor, `None` when absent.
pub fn regressor_value(o: &PanelObservation, name: &str) -> Option<f64> {
    let dummy = |v: u8| Some(v as f64);
    match name {
        "covid_mention" => dummy(o.covid_mention),
        "mild" => dummy(o.mild),
        "moderate" => dummy(o.moderate),
        "severe" => dummy(o.severe),
        "lag_log_assets" => o.lag_log_assets,
        "workplace_recommended" => o.controls.map(|c| c.workplace_recommended),
        "workplace_required" => o.controls.map(|c| c.workplace_required),
        "stayhome_recommended" => o.controls.map(|c| c.stayhome_recommended),
        "stayhome_required" => o.controls.map(|c| c.stayhome_required),
        "log_fiscal" => o.controls.map(|c| c.log_fiscal),
        "covid_deaths" => o.controls.map(|c| c.covid_deaths),
        _ => None,
    }
}

fn known_regressor(name: &str) -> bool {
    WAI_REGRESSORS.contains(&name) || POLICY_CONTROLS.contains(&name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub dependent: Dependent,
    pub regressors: Vec<String>,
    pub fe_dims: Vec<FeDim>,
    #[serde(default)]
    pub cluster_key: ClusterKey,
    pub sample_window: (Quarter, Quarter),
    #[serde(default)]
    pub sector_filter: Option<(u8, u8)>,
    #[serde(default)]
    pub include_lagged_dependent: bool,
    /// Two-sided percentile at which the dependent variable is clipped.
    #[serde(default)]
    pub winsorize_pct: Option<f64>,
}

impl RegressionSpec {
    fn base(dependent: Dependent, regressors: Vec<String>, fe_dims: Vec<FeDim>) -> Self {
        Self {
            dependent,
            regressors,
            fe_dims,
            cluster_key: ClusterKey::Firm,
            sample_window: (Quarter { year: 2017, q: 1 }, Quarter { year: 2022, q: 4 }),
            sector_filter: None,
            include_lagged_dependent: false,
            winsorize_pct: None,
        }
    }

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    /// Mention, affectedness dummies and lagged assets; firm and quarter FE.
    pub fn eq1(dependent: Dependent) -> Self {
        Self::base(dependent, Self::names(&WAI_REGRESSORS), vec![FeDim::Firm, FeDim::Quarter])
    }

    /// [`Self::eq1`] plus country-level policy controls.
    pub fn eq2(dependent: Dependent) -> Self {
        let mut s = Self::eq1(dependent);
        s.regressors.extend(Self::names(&POLICY_CONTROLS));
        s
    }

    /// [`Self::eq1`] regressors with firm and country x industry x quarter FE.
    pub fn eq3(dependent: Dependent) -> Self {
        Self::base(
            dependent,
            Self::names(&WAI_REGRESSORS),
            vec![FeDim::Firm, FeDim::CountryNace2Quarter],
        )
    }

    pub fn with_window(mut self, start: Quarter, end: Quarter) -> Self {
        self.sample_window = (start, end);
        self
    }

    pub fn with_sectors(mut self, lo: u8, hi: u8) -> Self {
        self.sector_filter = Some((lo, hi));
        self
    }

    pub fn with_lagged_dependent(mut self) -> Self {
        self.include_lagged_dependent = true;
        self
    }

    /// Manufacturing divisions.
    pub fn manufacturing(self) -> Self {
        self.with_sectors(10, 33)
    }

    /// Trade and service divisions.
    pub fn services(self) -> Self {
        self.with_sectors(45, 96)
    }

    /// Names of the estimated columns, in order.
    pub fn columns(&self) -> Vec<String> {
        let mut cols = Vec::new();
        if self.include_lagged_dependent {
            cols.push(LAGGED_DEPENDENT.to_string());
        }
        cols.extend(self.regressors.iter().cloned());
        cols
    }

    pub fn validate(&self) -> Result<(), EconError> {
        let bad = |m: String| Err(EconError::Spec(m));
        if self.fe_dims.is_empty() {
            return bad("at least one fixed-effect dimension is required".into());
        }
        if self.regressors.is_empty() && !self.include_lagged_dependent {
            return bad("no regressors".into());
        }
        let mut seen = BTreeSet::new();
        for r in &self.regressors {
            if !known_regressor(r) {
                return bad(format!("unknown regressor {r:?}"));
            }
            if !seen.insert(r) {
                return bad(format!("regressor {r:?} listed twice"));
            }
        }
        if self.sample_window.0 > self.sample_window.1 {
            return bad("sample window ends before it starts".into());
        }
        if let Some((lo, hi)) = self.sector_filter {
            if lo > hi {
                return bad(format!("empty sector range {lo}..{hi}"));
            }
        }
        if let Some(p) = self.winsorize_pct {
            if !(0.0..50.0).contains(&p) {
                return bad(format!("winsorize percentile {p} outside [0, 50)"));
            }
        }
        // country-level controls vary only within country x quarter cells
        if self.fe_dims.contains(&FeDim::CountryNace2Quarter) {
            if let Some(c) = self.regressors.iter().find(|r| POLICY_CONTROLS.contains(&r.as_str())) {
                return bad(format!(
                    "policy control {c:?} is collinear with country x industry x quarter fixed effects"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub mean: f64,
    pub std_dev: f64,
    pub max_abs: f64,
    /// Largest change in the last demeaning sweep.
    pub absorb_max_change: f64,
    pub dropped_collinear: Vec<String>,
    pub n_dropped_listwise: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub spec: RegressionSpec,
    /// Estimated terms in spec order.
    pub terms: Vec<String>,
    pub coefficients: BTreeMap<String, f64>,
    pub clustered_se: BTreeMap<String, f64>,
    pub n_firms: usize,
    pub n_obs: usize,
    pub r2_within: f64,
    pub fe_iterations: usize,
    pub residual_diagnostics: ResidualDiagnostics,
}

impl RegressionResult {
    /// Two-sided p-value under the normal approximation.
    pub fn p_value(&self, term: &str) -> Option<f64> {
        let (b, se) = (self.coefficients.get(term)?, self.clustered_se.get(term)?);
        Some(normal_p_value(b / se))
    }
}

pub fn normal_p_value(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    if !z.is_finite() {
        return if z.is_nan() { f64::NAN } else { 0.0 };
    }
    let n = Normal::standard();
    2.0 * n.sf(z.abs())
}

fn winsorize(v: &mut [f64], pct: f64) {
    if v.is_empty() || pct <= 0.0 {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let at = |p: f64| {
        let i = ((p / 100.0) * (sorted.len() - 1) as f64).round() as usize;
        sorted[i]
    };
    let (lo, hi) = (at(pct), at(100.0 - pct));
    for x in v {
        *x = x.clamp(lo, hi);
    }
}

/// Estimate one specification on a panel with listwise deletion.
pub fn run_spec(panel: &[PanelObservation], spec: &RegressionSpec) -> Result<RegressionResult, EconError> {
    spec.validate()?;
    let lagged: HashMap<(&str, Quarter), f64> = if spec.include_lagged_dependent {
        panel
            .iter()
            .filter_map(|o| Some(((o.firm_id.as_str(), o.quarter), spec.dependent.value(o)?)))
            .collect()
    } else {
        HashMap::new()
    };
    let cols = spec.columns();
    let (start, end) = spec.sample_window;

    let mut rows: Vec<(&PanelObservation, f64, Vec<f64>)> = Vec::new();
    let mut listwise = 0;
    for o in panel {
        if o.quarter < start || o.quarter > end {
            continue;
        }
        if let Some((lo, hi)) = spec.sector_filter {
            if o.nace2 < lo || o.nace2 > hi {
                continue;
            }
        }
        let y = spec.dependent.value(o);
        let xs: Option<Vec<f64>> = cols
            .iter()
            .map(|c| {
                if c == LAGGED_DEPENDENT {
                    lagged.get(&(o.firm_id.as_str(), o.quarter.prev())).copied()
                } else {
                    regressor_value(o, c)
                }
            })
            .collect();
        match (y, xs, o.indicator_observed) {
            (Some(y), Some(xs), true) if y.is_finite() && xs.iter().all(|v| v.is_finite()) => rows.push((o, y, xs)),
            _ => listwise += 1,
        }
    }
    if rows.is_empty() {
        return Err(EconError::EmptySample);
    }

    let n = rows.len();
    let x = DMatrix::from_fn(n, cols.len(), |i, j| rows[i].2[j]);
    let mut yv: Vec<f64> = rows.iter().map(|r| r.1).collect();
    if let Some(p) = spec.winsorize_pct {
        winsorize(&mut yv, p);
    }
    let y = DVector::from_vec(yv);
    let dims: Vec<FeDimension> = spec
        .fe_dims
        .iter()
        .map(|d| FeDimension {
            name: d.label().to_string(),
            labels: rows.iter().map(|r| Some(d.key(r.0))).collect(),
        })
        .collect();
    let absorbed = absorb_fixed_effects(&x, &y, &dims, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let fit = estimate_ols(&absorbed.x, &absorbed.y, &cols)?;
    let xk = absorbed.x.select_columns(&fit.kept);
    let clusters: Vec<Option<&str>> = rows
        .iter()
        .map(|r| match spec.cluster_key {
            ClusterKey::Firm => Some(r.0.firm_id.as_str()),
        })
        .collect();
    let cov = clustered_covariance(&xk, &fit.residuals, &fit.xtx_inverse(), &clusters)?;

    let terms: Vec<String> = fit.kept.iter().map(|&j| cols[j].clone()).collect();
    let coefficients = terms.iter().cloned().zip(fit.coefficients.iter().copied()).collect();
    let clustered_se = terms.iter().cloned().zip(cov.se.iter().copied()).collect();
    let ssr = fit.residuals.norm_squared();
    let sst = absorbed.y.norm_squared();
    let r2_within = if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN };
    let mean = fit.residuals.mean();
    let std_dev = (fit.residuals.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    Ok(RegressionResult {
        spec: spec.clone(),
        terms,
        coefficients,
        clustered_se,
        n_firms: cov.n_clusters,
        n_obs: n,
        r2_within,
        fe_iterations: absorbed.iterations,
        residual_diagnostics: ResidualDiagnostics {
            mean,
            std_dev,
            max_abs: fit.residuals.amax(),
            absorb_max_change: absorbed.max_change,
            dropped_collinear: fit.dropped.iter().map(|&j| cols[j].clone()).collect(),
            n_dropped_listwise: listwise,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econpanel::PolicyControls;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn q(s: &str) -> Quarter {
        s.parse().unwrap()
    }

    /// Synthetic panel following the first equation exactly.
    fn synthetic(firms: usize, beta: [f64; 5], noise: f64, seed: u64) -> Vec<PanelObservation> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let quarters: Vec<Quarter> = Quarter::range(q("2019Q1"), q("2021Q4")).collect();
        let mut out = Vec::new();
        for f in 0..firms {
            let alpha: f64 = rng.random_range(-5.0..5.0);
            for (t, &qt) in quarters.iter().enumerate() {
                let pandemic = qt >= q("2020Q1");
                let score = if pandemic { rng.random_range(0..4u8) } else { 0 };
                let mention = if score > 0 { 1 } else { (pandemic && rng.random_bool(0.3)) as u8 };
                let lag_assets: f64 = rng.random_range(5.0..15.0);
                let x = [
                    mention as f64,
                    (score == 1) as u8 as f64,
                    (score == 2) as u8 as f64,
                    (score == 3) as u8 as f64,
                    lag_assets,
                ];
                let delta = (t as f64 * 0.7).sin() * 3.0;
                let y = alpha + delta + x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
                    + noise * rng.random_range(-1.0..1.0);
                out.push(PanelObservation {
                    firm_id: format!("F{f:03}"),
                    quarter: qt,
                    dlog_sales_pct: Some(y),
                    dlog_return_pct: Some(2.0 * y + 7.0),
                    lag_log_assets: Some(lag_assets),
                    covid_mention: mention,
                    mild: (score == 1) as u8,
                    moderate: (score == 2) as u8,
                    severe: (score == 3) as u8,
                    indicator_observed: true,
                    country: if f % 2 == 0 { "US".into() } else { "DE".into() },
                    nace2: if f % 3 == 0 { 20 } else { 47 },
                    controls: Some(PolicyControls::default()),
                });
            }
        }
        out
    }

    const BETA: [f64; 5] = [0.4, -0.8, -3.2, -3.9, -5.8];

    #[test]
    fn exact_recovery() {
        let panel = synthetic(30, BETA, 0.0, 1);
        let r = run_spec(&panel, &RegressionSpec::eq1(Dependent::SalesGrowth)).unwrap();
        for (name, b) in WAI_REGRESSORS.iter().zip(BETA) {
            assert!((r.coefficients[*name] - b).abs() < 1e-8, "{name}");
        }
        assert!(r.r2_within > 1.0 - 1e-12);
        assert_eq!(r.n_firms, 30);
        assert_eq!(r.n_obs, 30 * 12);
        assert!(r.n_obs >= r.n_firms);
        assert_eq!(
            r.coefficients.keys().collect::<Vec<_>>(),
            r.clustered_se.keys().collect::<Vec<_>>()
        );
    }

    #[test]
    fn eq3_with_controls_rejected() {
        let mut s = RegressionSpec::eq3(Dependent::StockReturn);
        s.regressors.push("log_fiscal".into());
        assert!(matches!(run_spec(&[], &s), Err(EconError::Spec(_))));
        assert!(RegressionSpec::eq2(Dependent::StockReturn).validate().is_ok());
    }

    #[test]
    fn sector_filter_and_window() {
        let panel = synthetic(12, BETA, 1.0, 2);
        let r = run_spec(&panel, &RegressionSpec::eq1(Dependent::SalesGrowth).manufacturing()).unwrap();
        let manufacturing = panel.iter().filter(|o| (10..=33).contains(&o.nace2)).count();
        assert_eq!(r.n_obs, manufacturing);
        assert_eq!(r.n_firms, 4);
        let w = run_spec(
            &panel,
            &RegressionSpec::eq1(Dependent::SalesGrowth).with_window(q("2019Q1"), q("2020Q4")),
        )
        .unwrap();
        assert_eq!(w.n_obs, 12 * 8);
        let lag = run_spec(&panel, &RegressionSpec::eq1(Dependent::SalesGrowth).with_lagged_dependent()).unwrap();
        // the first quarter has no lag
        assert_eq!(lag.n_obs, 12 * 11);
        assert_eq!(lag.residual_diagnostics.n_dropped_listwise, 12);
        assert_eq!(lag.terms[0], LAGGED_DEPENDENT);
    }

    #[test]
    fn empty_sample_and_zero_variance() {
        let panel = synthetic(5, BETA, 1.0, 3);
        let s = RegressionSpec::eq1(Dependent::SalesGrowth).with_sectors(60, 61);
        assert!(matches!(run_spec(&panel, &s), Err(EconError::EmptySample)));
        // dummies are all zero before 2020
        let pre = RegressionSpec::eq1(Dependent::SalesGrowth).with_window(q("2019Q1"), q("2019Q4"));
        assert!(matches!(run_spec(&panel, &pre), Err(EconError::ZeroVariance(_))));
    }

    #[test]
    fn p_values() {
        assert!((normal_p_value(1.959964) - 0.05).abs() < 1e-6);
        assert_eq!(normal_p_value(0.0), 1.0);
    }

    /// Dummy-variable least squares with every FE level as a column, solved
    /// by SVD.
    fn lsdv(panel: &[PanelObservation], spec: &RegressionSpec) -> Vec<f64> {
        let rows: Vec<&PanelObservation> = panel.iter().collect();
        let mut cols: Vec<DVector<f64>> = spec
            .regressors
            .iter()
            .map(|r| DVector::from_iterator(rows.len(), rows.iter().map(|o| regressor_value(o, r).unwrap())))
            .collect();
        for d in &spec.fe_dims {
            let levels: BTreeSet<String> = rows.iter().map(|o| d.key(o)).collect();
            for l in levels {
                cols.push(DVector::from_iterator(rows.len(), rows.iter().map(|o| (d.key(o) == l) as u8 as f64)));
            }
        }
        let x = DMatrix::from_columns(&cols);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|o| o.dlog_sales_pct.unwrap()));
        let b = crate::econpanel::oracle::min_norm_lstsq(&x, &y);
        b.iter().take(spec.regressors.len()).copied().collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn within_equals_dummy_regression(seed in 0u64..1000, firms in 6usize..20, eq3 in any::<bool>()) {
            let panel = synthetic(firms, BETA, 2.0, seed);
            let spec = if eq3 { RegressionSpec::eq3(Dependent::SalesGrowth) } else { RegressionSpec::eq1(Dependent::SalesGrowth) };
            let r = run_spec(&panel, &spec).unwrap();
            prop_assume!(r.residual_diagnostics.dropped_collinear.is_empty());
            let oracle = lsdv(&panel, &spec);
            for (name, b) in spec.regressors.iter().zip(oracle) {
                let got = r.coefficients[name];
                prop_assert!((got - b).abs() <= 1e-8 * b.abs().max(1.0), "{} {} vs {}", name, got, b);
            }
        }

        #[test]
        fn shift_and_scale(seed in 0u64..1000, shift in -50.0f64..50.0, k in 0.1f64..10.0) {
            let panel = synthetic(8, BETA, 2.0, seed);
            let spec = RegressionSpec::eq1(Dependent::SalesGrowth);
            let base = run_spec(&panel, &spec).unwrap();
            let moved: Vec<_> = panel.iter().cloned().map(|mut o| {
                o.dlog_sales_pct = o.dlog_sales_pct.map(|y| k * y + shift);
                o
            }).collect();
            let r = run_spec(&moved, &spec).unwrap();
            for t in &base.terms {
                let (b0, s0) = (base.coefficients[t], base.clustered_se[t]);
                prop_assert!((r.coefficients[t] - k * b0).abs() <= 1e-7 * (k * b0).abs().max(1.0));
                prop_assert!((r.clustered_se[t] - k * s0).abs() <= 1e-7 * (k * s0).abs().max(1.0));
            }
        }
    }
}
