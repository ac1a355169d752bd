use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

/// Named columns of possibly-missing values, one row per observation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelFrame {
    row_ids: Vec<String>,
    names: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
}

impl ModelFrame {
    pub fn new(row_ids: Vec<String>) -> Self {
        ModelFrame { row_ids, names: Vec::new(), columns: Vec::new() }
    }

    /// Adds or replaces a column. Its length must match the row count.
    pub fn insert(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<(), StatsError> {
        if values.len() != self.row_ids.len() {
            return Err(StatsError::DimensionMismatch { expected: self.row_ids.len(), found: values.len() });
        }
        match self.names.iter().position(|n| n == name) {
            Some(j) => self.columns[j] = values,
            None => {
                self.names.push(name.to_string());
                self.columns.push(values);
            }
        }
        Ok(())
    }

    pub fn insert_complete(&mut self, name: &str, values: Vec<f64>) -> Result<(), StatsError> {
        self.insert(name, values.into_iter().map(Some).collect())
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.names.iter().position(|n| n == name).map(|j| self.columns[j].as_slice())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    /// Rows such that every listed column is present and finite.
    pub fn complete_rows(&self, names: &[&str]) -> Result<Vec<usize>, StatsError> {
        let cols = names
            .iter()
            .map(|n| self.column(n).ok_or_else(|| StatsError::UnknownColumn(n.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..self.len())
            .filter(|&i| cols.iter().all(|c| c[i].is_some_and(f64::is_finite)))
            .collect())
    }

    /// Sub-frame with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> ModelFrame {
        ModelFrame {
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegressionSpec {
    pub response: String,
    pub regressors: Vec<String>,
    pub fe_column: Option<String>,
    /// Level dropped from the indicator set; the earliest level when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fe_reference: Option<i64>,
}

impl RegressionSpec {
    pub fn new(response: &str, regressors: &[&str], fe_column: Option<&str>) -> Self {
        RegressionSpec {
            response: response.to_string(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            fe_column: fe_column.map(str::to_string),
            fe_reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub name: String,
    pub coefficient: f64,
    pub standard_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedEffects {
    pub column: String,
    pub reference: i64,
    /// All levels seen in the estimation sample, ascending.
    pub levels: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub response: String,
    pub intercept: Term,
    /// Regressors in spec order, then one indicator per non-reference level.
    pub terms: Vec<Term>,
    pub fixed_effects: Option<FixedEffects>,
    pub r2: f64,
    pub adjusted_r2: f64,
    pub n_observations: usize,
    pub dof: usize,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub row_ids: Vec<String>,
}

impl RegressionResult {
    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }
}

pub fn fe_term_name(column: &str, level: i64) -> String {
    format!("{column}_{level}")
}

/// Ordinary least squares with an intercept and optional categorical fixed
/// effects, solved by Householder QR.
///
/// Rows missing any model column are dropped first. Fixed-effect values must
/// be integral. A column whose QR diagonal vanishes relative to its own norm
/// is reported as collinear with the columns before it.
pub fn ols_fixed_effects(frame: &ModelFrame, spec: &RegressionSpec) -> Result<RegressionResult, StatsError> {
    let mut used: Vec<&str> = vec![spec.response.as_str()];
    used.extend(spec.regressors.iter().map(String::as_str));
    if let Some(fe) = &spec.fe_column {
        used.push(fe);
    }
    let rows = frame.complete_rows(&used)?;
    let value = |name: &str, i: usize| frame.column(name).expect("checked")[i].expect("complete");

    let fe = match &spec.fe_column {
        None => None,
        Some(col) => {
            let mut levels = BTreeSet::new();
            for &i in &rows {
                let v = value(col, i);
                if v.fract() != 0.0 {
                    return Err(StatsError::InvalidValue { column: col.clone(), value: v });
                }
                levels.insert(v as i64);
            }
            let levels: Vec<i64> = levels.into_iter().collect();
            let reference = match spec.fe_reference {
                Some(r) if levels.contains(&r) => r,
                Some(r) => return Err(StatsError::UnknownLevel { column: col.clone(), level: r }),
                None => levels.first().copied().unwrap_or_default(),
            };
            Some(FixedEffects { column: col.clone(), reference, levels })
        }
    };

    let mut names = vec!["(intercept)".to_string()];
    names.extend(spec.regressors.iter().cloned());
    let dummies: Vec<i64> = fe
        .as_ref()
        .map(|f| f.levels.iter().copied().filter(|l| *l != f.reference).collect())
        .unwrap_or_default();
    if let Some(f) = &fe {
        names.extend(dummies.iter().map(|l| fe_term_name(&f.column, *l)));
    }
    let n = rows.len();
    let k = names.len();
    if n < k + 1 {
        return Err(StatsError::InsufficientRows { needed: k + 1, found: n });
    }

    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for (r, &i) in rows.iter().enumerate() {
        y[r] = value(&spec.response, i);
        x[(r, 0)] = 1.0;
        for (j, name) in spec.regressors.iter().enumerate() {
            x[(r, 1 + j)] = value(name, i);
        }
        if let Some(f) = &fe {
            let level = value(&f.column, i) as i64;
            if let Some(d) = dummies.iter().position(|l| *l == level) {
                x[(r, 1 + spec.regressors.len() + d)] = 1.0;
            }
        }
    }

    let qr = x.clone().qr();
    let rmat = qr.r();
    for j in 0..k {
        let norm = x.column(j).norm();
        if norm == 0.0 || rmat[(j, j)].abs() <= 1e-9 * norm {
            return Err(StatsError::Collinear(names[j].clone()));
        }
    }
    let qty = qr.q().transpose() * &y;
    let beta = rmat.solve_upper_triangular(&qty).ok_or(StatsError::Decomposition)?;
    let fitted = &x * &beta;
    let residuals = &y - &fitted;
    let rss = residuals.norm_squared();
    let y_mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    if tss == 0.0 {
        return Err(StatsError::ZeroVariance(spec.response.clone()));
    }
    let dof = n - k;
    let r2 = 1.0 - rss / tss;
    let adjusted_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / dof as f64;
    let sigma2 = rss / dof as f64;
    let r_inv = rmat
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(StatsError::Decomposition)?;
    let dist = StudentsT::new(0.0, 1.0, dof as f64).map_err(|_| StatsError::Decomposition)?;

    let mut terms: Vec<Term> = (0..k)
        .map(|j| {
            let var = r_inv.row(j).norm_squared() * sigma2;
            let se = var.sqrt();
            let coef = beta[j];
            let (t, p) = if se > 0.0 {
                let t = coef / se;
                (t, (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
            } else if coef == 0.0 {
                (0.0, 1.0)
            } else {
                (coef.signum() * f64::INFINITY, 0.0)
            };
            Term { name: names[j].clone(), coefficient: coef, standard_error: se, t_stat: t, p_value: p }
        })
        .collect();
    let intercept = terms.remove(0);

    Ok(RegressionResult {
        response: spec.response.clone(),
        intercept,
        terms,
        fixed_effects: fe,
        r2,
        adjusted_r2,
        n_observations: n,
        dof,
        fitted: fitted.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
        row_ids: rows.iter().map(|&i| frame.row_ids[i].clone()).collect(),
    })
}
