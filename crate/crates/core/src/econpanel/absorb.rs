use nalgebra::{DMatrix, DVector};

use super::EconError;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// One fixed-effect dimension: a categorical label per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeDimension {
    pub name: String,
    pub labels: Vec<Option<String>>,
}

/// Dense group ids for one dimension.
#[derive(Debug, Clone)]
pub(crate) struct Groups {
    pub ids: Vec<usize>,
    pub counts: Vec<usize>,
}

pub(crate) fn encode(dim: &FeDimension) -> Result<Groups, EconError> {
    let mut index = std::collections::HashMap::new();
    let mut ids = Vec::with_capacity(dim.labels.len());
    let mut counts = Vec::new();
    for (row, label) in dim.labels.iter().enumerate() {
        let label = label.as_deref().ok_or_else(|| EconError::MissingFeLabel {
            row,
            dim: dim.name.clone(),
        })?;
        let next = index.len();
        let id = *index.entry(label).or_insert(next);
        if id == counts.len() {
            counts.push(0);
        }
        counts[id] += 1;
        ids.push(id);
    }
    Ok(Groups { ids, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Absorbed {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Sweeps over all dimensions.
    pub iterations: usize,
    /// Largest absolute change in the final sweep.
    pub max_change: f64,
}

/// Subtract group means of one dimension from every column; returns the
/// largest absolute adjustment.
fn demean(m: &mut DMatrix<f64>, g: &Groups, sums: &mut Vec<f64>) -> f64 {
    let mut largest: f64 = 0.0;
    for mut col in m.column_iter_mut() {
        sums.clear();
        sums.resize(g.counts.len(), 0.0);
        for (v, &id) in col.iter().zip(&g.ids) {
            sums[id] += v;
        }
        for (s, &n) in sums.iter_mut().zip(&g.counts) {
            *s /= n as f64;
        }
        for (v, &id) in col.iter_mut().zip(&g.ids) {
            *v -= sums[id];
        }
        largest = sums.iter().fold(largest, |a, s| a.max(s.abs()));
    }
    largest
}

/// Within transformation over any number of crossed fixed effects by
/// alternating projections. Singleton groups demean to zero.
pub fn absorb_fixed_effects(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    dims: &[FeDimension],
    tol: f64,
    max_iter: usize,
) -> Result<Absorbed, EconError> {
    let n = y.len();
    if x.nrows() != n {
        return Err(EconError::Spec(format!("{} regressor rows for {n} outcomes", x.nrows())));
    }
    if dims.is_empty() {
        return Err(EconError::Spec("no fixed-effect dimensions".into()));
    }
    let groups = dims
        .iter()
        .map(|d| {
            if d.labels.len() != n {
                return Err(EconError::Spec(format!("fixed effect {} has {} labels for {n} rows", d.name, d.labels.len())));
            }
            encode(d)
        })
        .collect::<Result<Vec<_>, _>>()?;

    // y rides along as the last column
    let mut m = DMatrix::zeros(n, x.ncols() + 1);
    m.columns_mut(0, x.ncols()).copy_from(x);
    m.set_column(x.ncols(), y);
    let mut sums = Vec::new();

    let mut iterations = 0;
    let mut change = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        change = groups.iter().fold(0.0, |a, g| f64::max(a, demean(&mut m, g, &mut sums)));
        // one dimension is exact after a single pass
        if groups.len() == 1 || change < tol {
            if groups.len() == 1 {
                change = 0.0;
            }
            break;
        }
    }
    if change >= tol && groups.len() > 1 {
        return Err(EconError::NoConvergence {
            iterations,
            achieved: change,
        });
    }
    Ok(Absorbed {
        x: m.columns(0, x.ncols()).into_owned(),
        y: m.column(x.ncols()).into_owned(),
        iterations,
        max_change: change,
    })
}
