use nalgebra::DMatrix;
use serde::Serialize;

use super::StatsError;

/// Log-transformed (where flagged) and z-scored columns, with the parameters
/// needed to apply the same transform to new rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub names: Vec<String>,
    pub data: DMatrix<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub log_flags: Vec<bool>,
}

impl Standardized {
    /// Applies the stored transform to raw rows with the same column layout.
    pub fn apply(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>, StatsError> {
        if raw.ncols() != self.means.len() {
            return Err(StatsError::DimensionMismatch { expected: self.means.len(), found: raw.ncols() });
        }
        let mut out = raw.clone();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                let x = if self.log_flags[j] { out[(i, j)].ln_1p() } else { out[(i, j)] };
                out[(i, j)] = (x - self.means[j]) / self.sds[j];
            }
        }
        Ok(out)
    }
}

/// Maps flagged columns through `ln(1 + x)` and z-scores every column with the
/// sample (n - 1) standard deviation.
pub fn standardize_log(columns: &DMatrix<f64>, skew_flags: &[bool], names: &[&str]) -> Result<Standardized, StatsError> {
    let (n, p) = columns.shape();
    if skew_flags.len() != p || names.len() != p {
        return Err(StatsError::DimensionMismatch { expected: p, found: skew_flags.len().min(names.len()) });
    }
    if n < 2 {
        return Err(StatsError::InsufficientRows { needed: 2, found: n });
    }
    let mut data = columns.clone();
    let mut means = Vec::with_capacity(p);
    let mut sds = Vec::with_capacity(p);
    for j in 0..p {
        let mut col = data.column_mut(j);
        if skew_flags[j] {
            if let Some(bad) = col.iter().find(|x| **x < 0.0 || !x.is_finite()) {
                return Err(StatsError::InvalidValue { column: names[j].to_string(), value: *bad });
            }
            col.iter_mut().for_each(|x| *x = x.ln_1p());
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(StatsError::ZeroVariance(names[j].to_string()));
        }
        col.iter_mut().for_each(|x| *x = (*x - mean) / sd);
        means.push(mean);
        sds.push(sd);
    }
    Ok(Standardized {
        names: names.iter().map(|s| s.to_string()).collect(),
        data,
        means,
        sds,
        log_flags: skew_flags.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaResult {
    pub names: Vec<String>,
    /// `p x p`; column `k` holds the loadings of component `k`.
    #[serde(serialize_with = "serialize_rows")]
    pub loadings: DMatrix<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Component variances (squared singular values over n - 1).
    pub variances: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub log_transformed: Vec<bool>,
    /// Components past the numerical rank have zero ratio.
    pub rank: usize,
    pub n_observations: usize,
}

fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    rows.serialize(s)
}

impl PcaResult {
    /// Scores for raw (untransformed) rows.
    pub fn transform(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>, StatsError> {
        let std = Standardized {
            names: self.names.clone(),
            data: DMatrix::zeros(0, 0),
            means: self.means.clone(),
            sds: self.sds.clone(),
            log_flags: self.log_transformed.clone(),
        };
        pca_scores(self, &std.apply(raw)?)
    }
}

/// Principal components of standardized data from its singular value
/// decomposition.
///
/// Columns are re-centred first, which is a no-op for standardized input.
/// Components come in descending variance order and each loading column is
/// oriented so its entries sum to a positive value (first non-zero entry
/// positive when the sum vanishes).
pub fn pca(input: &Standardized) -> Result<PcaResult, StatsError> {
    let (n, p) = input.data.shape();
    if n <= p {
        return Err(StatsError::InsufficientRows { needed: p + 1, found: n });
    }
    let mut x = input.data.clone();
    for j in 0..p {
        let mean = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let svd = x.svd(false, true);
    let v_t = svd.v_t.ok_or(StatsError::Decomposition)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let s_max = svd.singular_values.max();
    let tol = s_max * (n.max(p) as f64) * f64::EPSILON;
    let mut loadings = DMatrix::zeros(p, p);
    let mut variances = Vec::with_capacity(p);
    let mut rank = 0;
    for (k, &idx) in order.iter().enumerate() {
        let s = svd.singular_values[idx];
        let reportable = s > tol;
        rank += usize::from(reportable);
        variances.push(if reportable { s * s / (n - 1) as f64 } else { 0.0 });
        let mut col: Vec<f64> = v_t.row(idx).iter().copied().collect();
        let sum: f64 = col.iter().sum();
        let flip = if sum.abs() > 1e-12 {
            sum < 0.0
        } else {
            col.iter().find(|c| c.abs() > 1e-12).is_some_and(|c| *c < 0.0)
        };
        if flip {
            col.iter_mut().for_each(|c| *c = -*c);
        }
        for (i, c) in col.into_iter().enumerate() {
            loadings[(i, k)] = c;
        }
    }
    let total: f64 = variances.iter().sum();
    if total <= 0.0 {
        return Err(StatsError::ZeroVariance("all columns".into()));
    }
    let explained_variance_ratio = variances.iter().map(|v| v / total).collect();
    Ok(PcaResult {
        names: input.names.clone(),
        loadings,
        explained_variance_ratio,
        variances,
        means: input.means.clone(),
        sds: input.sds.clone(),
        log_transformed: input.log_flags.clone(),
        rank,
        n_observations: n,
    })
}

/// `rows x loadings` for rows already standardized with the result's transform.
pub fn pca_scores(result: &PcaResult, rows: &DMatrix<f64>) -> Result<DMatrix<f64>, StatsError> {
    if rows.ncols() != result.loadings.nrows() {
        return Err(StatsError::DimensionMismatch { expected: result.loadings.nrows(), found: rows.ncols() });
    }
    Ok(rows * &result.loadings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log1p_then_zscore() {
        let m = DMatrix::from_column_slice(2, 1, &[0.0, std::f64::consts::E - 1.0]);
        let s = standardize_log(&m, &[true], &["x"]).unwrap();
        assert!((s.data[(0, 0)] + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((s.data[(1, 0)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((s.sds[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn constant_column_named() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        match standardize_log(&m, &[false, false], &["a", "flat"]) {
            Err(StatsError::ZeroVariance(name)) => assert_eq!(name, "flat"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_in_log_column() {
        let m = DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 2.0]);
        assert!(matches!(standardize_log(&m, &[true], &["d"]), Err(StatsError::InvalidValue { .. })));
    }

    fn unguarded(data: DMatrix<f64>) -> Standardized {
        let p = data.ncols();
        Standardized {
            names: (0..p).map(|j| format!("v{j}")).collect(),
            data,
            means: vec![0.0; p],
            sds: vec![1.0; p],
            log_flags: vec![false; p],
        }
    }

    #[test]
    fn rank_one_when_single_column_varies() {
        let data = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 2.0, -1.0, 0.0, 2.0, 3.0, 0.0, 2.0, 0.5, 0.0, 2.0]);
        let r = pca(&unguarded(data)).unwrap();
        assert_eq!(r.rank, 1);
        assert!((r.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert_eq!(&r.explained_variance_ratio[1..], &[0.0, 0.0]);
        assert!((r.loadings[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfectly_correlated_pair() {
        let raw = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 5.0, 10.0]);
        let s = standardize_log(&raw, &[false, false], &["a", "b"]).unwrap();
        let r = pca(&s).unwrap();
        assert!((r.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(r.explained_variance_ratio[1].abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.loadings[(0, 0)] - h).abs() < 1e-12 && (r.loadings[(1, 0)] - h).abs() < 1e-12);
    }

    #[test]
    fn scores_are_linear() {
        let raw = DMatrix::from_row_slice(5, 2, &[1.0, 3.0, 2.0, 1.0, 4.0, 4.0, 0.0, 2.0, 3.0, 5.0]);
        let s = standardize_log(&raw, &[false, false], &["a", "b"]).unwrap();
        let r = pca(&s).unwrap();
        let zero = pca_scores(&r, &DMatrix::zeros(1, 2)).unwrap();
        assert!(zero.iter().all(|x| x.abs() < 1e-15));
        let step = pca_scores(&r, &DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        for k in 0..2 {
            assert!((step[(0, k)] - r.loadings[(0, k)]).abs() < 1e-15);
        }
        let at_means = DMatrix::from_row_slice(1, 2, &[r.means[0], r.means[1]]);
        assert!(r.transform(&at_means).unwrap().iter().all(|x| x.abs() < 1e-12));
        assert!(pca_scores(&r, &DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn too_few_rows() {
        let s = unguarded(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        assert!(matches!(pca(&s), Err(StatsError::InsufficientRows { .. })));
    }
}
