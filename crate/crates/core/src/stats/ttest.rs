use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestResult {
    /// Positive when the flagged group has the larger mean.
    pub t: f64,
    pub dof: f64,
    pub p: f64,
    pub mean_flagged: f64,
    pub mean_unflagged: f64,
    pub n_flagged: usize,
    pub n_unflagged: usize,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance two-sample t-test of flagged against unflagged
/// scores, with Welch-Satterthwaite degrees of freedom and a two-sided p.
pub fn group_ttest(scores: &[f64], flags: &[bool]) -> Result<TTestResult, StatsError> {
    if scores.len() != flags.len() {
        return Err(StatsError::DimensionMismatch { expected: scores.len(), found: flags.len() });
    }
    let (a, b): (Vec<(f64, bool)>, Vec<(f64, bool)>) = scores.iter().copied().zip(flags.iter().copied()).partition(|p| p.1);
    let a: Vec<f64> = a.into_iter().map(|p| p.0).collect();
    let b: Vec<f64> = b.into_iter().map(|p| p.0).collect();
    for (g, name) in [(&a, "flagged"), (&b, "unflagged")] {
        if g.len() < 2 {
            return Err(StatsError::DegenerateGroup(format!("{name} group has {} members", g.len())));
        }
    }
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    if va <= 0.0 || vb <= 0.0 {
        return Err(StatsError::DegenerateGroup("group has zero variance".into()));
    }
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let t = (ma - mb) / (sa + sb).sqrt();
    let dof = (sa + sb).powi(2) / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|_| StatsError::Decomposition)?;
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(TTestResult { t, dof, p, mean_flagged: ma, mean_unflagged: mb, n_flagged: a.len(), n_unflagged: b.len() })
}
