//! Standardization and PCA, fixed-effects OLS, cohort splits and a Welch
//! two-sample test. Everything here is deterministic and single-threaded.

mod cohort;
mod ols;
mod pca;
mod table;
mod ttest;

pub use cohort::{cohort_split, CohortAxis};
pub use ols::{fe_term_name, ols_fixed_effects, FixedEffects, ModelFrame, RegressionResult, RegressionSpec, Term};
pub use pca::{pca, pca_scores, standardize_log, PcaResult, Standardized};
pub use table::{format_regression_table, significance_stars};
pub use ttest::{group_ttest, TTestResult};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("column {0} has zero variance")]
    ZeroVariance(String),
    #[error("column {column} has invalid value {value}")]
    InvalidValue { column: String, value: f64 },
    #[error("need at least {needed} rows, found {found}")]
    InsufficientRows { needed: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("column {column} has no level {level}")]
    UnknownLevel { column: String, level: i64 },
    #[error("column {0} is collinear with earlier regressors")]
    Collinear(String),
    #[error("degenerate group: {0}")]
    DegenerateGroup(String),
    #[error("matrix decomposition failed")]
    Decomposition,
}
