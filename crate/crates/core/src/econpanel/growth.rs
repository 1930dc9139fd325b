use super::EconError;

/// Quarter-on-quarter log growth in percent; `None` unless both levels are
/// positive and finite.
pub fn log_growth_pct(current: f64, previous: f64) -> Option<f64> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    (ok(current) && ok(previous)).then(|| 100.0 * (current.ln() - previous.ln()))
}

/// Log return in percent between two split- and dividend-adjusted prices,
/// each `close / cum_adj * trf`.
pub fn adjusted_return_pct(
    close_t: f64,
    cum_adj_t: f64,
    trf_t: f64,
    close_p: f64,
    cum_adj_p: f64,
    trf_p: f64,
) -> Option<f64> {
    let inputs = [close_t, cum_adj_t, trf_t, close_p, cum_adj_p, trf_p];
    if !inputs.iter().all(|v| v.is_finite() && *v > 0.0) {
        return None;
    }
    let adj_t = close_t / cum_adj_t * trf_t;
    let adj_p = close_p / cum_adj_p * trf_p;
    log_growth_pct(adj_t, adj_p)
}

/// Compound a quarterly percent change to an annual one.
pub fn annualize_quarterly_pct(c: f64) -> Result<f64, EconError> {
    if c.is_nan() || c <= -100.0 {
        return Err(EconError::Domain(format!("quarterly change {c}% must exceed -100%")));
    }
    Ok(100.0 * ((1.0 + c / 100.0).powi(4) - 1.0))
}

/// Inverse of [`annualize_quarterly_pct`].
pub fn deannualize_pct(a: f64) -> Result<f64, EconError> {
    if a.is_nan() || a <= -100.0 {
        return Err(EconError::Domain(format!("annual change {a}% must exceed -100%")));
    }
    Ok(100.0 * ((1.0 + a / 100.0).powf(0.25) - 1.0))
}

/// Approximate upper bound of the dynamic-panel bias of a within estimator
/// with a lagged dependent variable over `t` periods.
pub fn nickell_bound(beta_lagged: f64, t: u32) -> Result<f64, EconError> {
    if t < 2 {
        return Err(EconError::Domain(format!("need at least 2 periods, got {t}")));
    }
    Ok(-(1.0 + beta_lagged) / (t as f64 - 1.0))
}
