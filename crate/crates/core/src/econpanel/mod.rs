//! Firm-quarter panel construction and within estimation of performance on
//! affectedness, with multi-way fixed effects and firm-clustered errors.

mod absorb;
mod cluster;
mod growth;
mod ols;
mod panel;
mod quarter;
mod report;
mod spec;


pub use absorb::{absorb_fixed_effects, Absorbed, FeDimension, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use cluster::{clustered_covariance, clustered_se, ClusteredCovariance};
pub use growth::{adjusted_return_pct, annualize_quarterly_pct, deannualize_pct, log_growth_pct, nickell_bound};
pub use ols::{estimate_ols, OlsFit};
pub use panel::{
    build_panel, check_snapshot_coverage, load_financials, panel_to_csv, parse_financials, quarter_controls,
    Concordance, FinancialRow, FxTable, PanelBuild, PanelInputs, PanelObservation, PanelOptions, PolicyControls,
    PolicyLevels,
};
pub use quarter::Quarter;
pub use report::{format_estimate, stars, RegressionTable, TableCell, TableColumn, TableRow};
pub use spec::{
    normal_p_value, regressor_value, run_spec, ClusterKey, Dependent, FeDim, RegressionResult, RegressionSpec,
    ResidualDiagnostics, LAGGED_DEPENDENT, POLICY_CONTROLS, WAI_REGRESSORS,
};

#[derive(Debug, thiserror::Error)]
pub enum EconError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("no exchange rate for {currency:?} in {quarter}")]
    MissingFx { currency: String, quarter: Quarter },
    #[error("firm {firm_id} has more than one row for {quarter}")]
    DuplicateFirmQuarter { firm_id: String, quarter: Quarter },
    #[error("no snapshot midpoint falls in {0}")]
    Coverage(Quarter),
    #[error("row {row} has no label for fixed effect {dim}")]
    MissingFeLabel { row: usize, dim: String },
    #[error("demeaning did not converge after {iterations} sweeps (last change {achieved:e})")]
    NoConvergence { iterations: usize, achieved: f64 },
    #[error("regressor {0} has no variation within the fixed effects")]
    ZeroVariance(String),
    #[error("clustered errors need at least two clusters")]
    SingleCluster,
    #[error("estimation sample is empty")]
    EmptySample,
    #[error("specification: {0}")]
    Spec(String),
    #[error("{0}")]
    Domain(String),
}
