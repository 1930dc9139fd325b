use nalgebra::{DMatrix, DVector};

use super::EconError;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredCovariance {
    pub vcov: DMatrix<f64>,
    pub se: Vec<f64>,
    pub n_clusters: usize,
    /// Small-sample factor applied, G/(G-1) * (N-1)/(N-K).
    pub correction: f64,
}

/// Cluster-robust (CR1) covariance of least-squares estimates, given the
/// regressors that were estimated, the residuals, and `(X'X)^-1`.
pub fn clustered_covariance<S: AsRef<str>>(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    xtx_inv: &DMatrix<f64>,
    clusters: &[Option<S>],
) -> Result<ClusteredCovariance, EconError> {
    let (n, k) = x.shape();
    if residuals.len() != n || clusters.len() != n {
        return Err(EconError::Spec("cluster labels do not match observations".into()));
    }
    let mut index = std::collections::HashMap::new();
    let mut scores: Vec<DVector<f64>> = Vec::new();
    for (i, c) in clusters.iter().enumerate() {
        let c = c.as_ref().ok_or_else(|| EconError::MissingFeLabel {
            row: i,
            dim: "cluster".into(),
        })?;
        let next = index.len();
        let g = *index.entry(c.as_ref()).or_insert(next);
        if g == scores.len() {
            scores.push(DVector::zeros(k));
        }
        scores[g] += x.row(i).transpose() * residuals[i];
    }
    let g = scores.len();
    if g < 2 {
        return Err(EconError::SingleCluster);
    }
    if n <= k {
        return Err(EconError::Spec(format!("{n} observations for {k} regressors")));
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in &scores {
        meat += s * s.transpose();
    }
    let correction = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n - k) as f64);
    let vcov = xtx_inv * meat * xtx_inv * correction;
    let se = vcov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(ClusteredCovariance {
        vcov,
        se,
        n_clusters: g,
        correction,
    })
}

/// Firm-clustered standard errors for a design without a precomputed
/// inverse.
pub fn clustered_se<S: AsRef<str>>(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    clusters: &[Option<S>],
) -> Result<Vec<f64>, EconError> {
    let xtx_inv = (x.transpose() * x)
        .cholesky()
        .ok_or_else(|| EconError::Spec("regressors are collinear".into()))?
        .inverse();
    Ok(clustered_covariance(x, residuals, &xtx_inv, clusters)?.se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Sandwich evaluated observation pair by observation pair.
    fn brute_force(x: &DMatrix<f64>, e: &DVector<f64>, cl: &[usize]) -> Vec<f64> {
        let (n, k) = x.shape();
        let mut xtx = DMatrix::<f64>::zeros(k, k);
        for i in 0..n {
            for a in 0..k {
                for b in 0..k {
                    xtx[(a, b)] += x[(i, a)] * x[(i, b)];
                }
            }
        }
        let inv = xtx.try_inverse().unwrap();
        let mut meat = DMatrix::<f64>::zeros(k, k);
        for i in 0..n {
            for j in 0..n {
                if cl[i] != cl[j] {
                    continue;
                }
                for a in 0..k {
                    for b in 0..k {
                        meat[(a, b)] += x[(i, a)] * e[i] * e[j] * x[(j, b)];
                    }
                }
            }
        }
        let mut groups = cl.to_vec();
        groups.sort();
        groups.dedup();
        let g = groups.len() as f64;
        let c = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
        let v = &inv * meat * &inv * c;
        (0..k).map(|a| v[(a, a)].sqrt()).collect()
    }

    fn labels(cl: &[usize]) -> Vec<Option<String>> {
        cl.iter().map(|c| Some(c.to_string())).collect()
    }

    #[test]
    fn three_clusters_nine_rows() {
        let x = DMatrix::from_row_slice(9, 2, &[
            1.0, 0.5, -1.0, 2.0, 0.3, -0.7, 2.0, 1.0, -0.5, 0.0, 1.5, -1.2, 0.2, 0.9, -2.0, 0.4, 0.7, -0.3,
        ]);
        let e = DVector::from_vec(vec![0.3, -0.2, 0.5, -0.1, 0.4, -0.6, 0.2, 0.1, -0.4]);
        let cl = [0, 0, 0, 1, 1, 1, 2, 2, 2];
        let se = clustered_se(&x, &e, &labels(&cl)).unwrap();
        for (a, b) in se.iter().zip(brute_force(&x, &e, &cl)) {
            assert!((a - b).abs() <= 1e-8 * b.abs());
        }
    }

    #[test]
    fn singleton_clusters_are_scaled_hc() {
        let x = DMatrix::from_fn(8, 1, |i, _| i as f64 - 3.5);
        let e = DVector::from_fn(8, |i, _| ((i * 3) % 5) as f64 - 2.0);
        let cl: Vec<usize> = (0..8).collect();
        let se = clustered_se(&x, &e, &labels(&cl)).unwrap()[0];
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let hc0 = (x.iter().zip(e.iter()).map(|(a, b)| a * a * b * b).sum::<f64>() / (sxx * sxx)).sqrt();
        let c: f64 = 8.0 / 7.0 * 7.0 / 7.0;
        assert!((se - hc0 * c.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_rejected() {
        let x = DMatrix::from_fn(3, 1, |i, _| i as f64);
        let err = clustered_se(&x, &DVector::zeros(3), &labels(&[0, 0, 0]));
        assert!(matches!(err, Err(EconError::SingleCluster)));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            rows in prop::collection::vec((0usize..4, -5.0f64..5.0, -5.0f64..5.0, -3.0f64..3.0), 8..30),
        ) {
            let n = rows.len();
            let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { rows[i].1 } else { rows[i].2 });
            let e = DVector::from_fn(n, |i, _| rows[i].3);
            let cl: Vec<usize> = rows.iter().map(|r| r.0).collect();
            let distinct = cl.iter().collect::<std::collections::BTreeSet<_>>().len();
            prop_assume!(distinct >= 2);
            prop_assume!((x.transpose() * &x).determinant().abs() > 1e-3);
            let se = clustered_se(&x, &e, &labels(&cl)).unwrap();
            for (a, b) in se.iter().zip(brute_force(&x, &e, &cl)) {
                prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300));
            }
        }
    }
}
