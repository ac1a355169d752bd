use std::fmt::Write;

use super::RegressionResult;

pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Plain-text side-by-side table: one column per model, coefficient with
/// stars and the standard error in parentheses beneath. Fixed-effect dummies
/// are summarised as a single yes/no row.
pub fn format_regression_table(models: &[(String, RegressionResult)]) -> String {
    let mut names: Vec<String> = Vec::new();
    for (_, m) in models {
        let fe_prefix = m.fixed_effects.as_ref().map(|f| format!("{}_", f.column));
        for t in &m.terms {
            let is_fe = fe_prefix.as_ref().is_some_and(|p| t.name.starts_with(p.as_str()));
            if !is_fe && !names.contains(&t.name) {
                names.push(t.name.clone());
            }
        }
    }
    names.push("(intercept)".into());

    let label_w = names.iter().map(String::len).max().unwrap_or(0).max(14);
    let col_w = 16;
    let mut out = String::new();
    let _ = write!(out, "{:<label_w$}", "");
    for (label, _) in models {
        let _ = write!(out, "{label:>col_w$}");
    }
    out.push('\n');
    out.push_str(&"-".repeat(label_w + col_w * models.len()));
    out.push('\n');
    for name in &names {
        let mut coef_line = format!("{name:<label_w$}");
        let mut se_line = format!("{:<label_w$}", "");
        for (_, m) in models {
            let term = if name == "(intercept)" { Some(&m.intercept) } else { m.term(name) };
            match term {
                Some(t) => {
                    let c = format!("{:.4}{}", t.coefficient, significance_stars(t.p_value));
                    let _ = write!(coef_line, "{c:>col_w$}");
                    let _ = write!(se_line, "{:>col_w$}", format!("({:.4})", t.standard_error));
                }
                None => {
                    let _ = write!(coef_line, "{:>col_w$}", "");
                    let _ = write!(se_line, "{:>col_w$}", "");
                }
            }
        }
        out.push_str(coef_line.trim_end());
        out.push('\n');
        out.push_str(se_line.trim_end());
        out.push('\n');
    }
    out.push_str(&"-".repeat(label_w + col_w * models.len()));
    out.push('\n');
    let mut fe_line = format!("{:<label_w$}", "Fixed effects");
    let mut n_line = format!("{:<label_w$}", "Observations");
    let mut r2_line = format!("{:<label_w$}", "Adjusted R2");
    for (_, m) in models {
        let fe = m.fixed_effects.as_ref().map(|f| f.column.as_str()).unwrap_or("no");
        let _ = write!(fe_line, "{fe:>col_w$}");
        let _ = write!(n_line, "{:>col_w$}", m.n_observations);
        let _ = write!(r2_line, "{:>col_w$}", format!("{:.4}", m.adjusted_r2));
    }
    for line in [fe_line, n_line, r2_line] {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("* p<0.05; ** p<0.01; *** p<0.001\n");
    out
}
