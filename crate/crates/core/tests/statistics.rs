use nalgebra::DMatrix;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use weaktie::stats::{group_ttest, ols_fixed_effects, pca, standardize_log, ModelFrame, RegressionSpec};

fn data_matrix(values: &[f64], p: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(values.len() / p, p, &values[..values.len() / p * p])
}

fn frame(ids: Vec<String>, cols: &[(&str, Vec<f64>)]) -> ModelFrame {
    let mut f = ModelFrame::new(ids);
    for (name, v) in cols {
        f.insert_complete(name, v.clone()).unwrap();
    }
    f
}

fn regression_inputs() -> impl Strategy<Value = (Vec<[f64; 3]>, Vec<i64>)> {
    (12usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec([-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0], n),
            prop::collection::vec(2018i64..2022, n),
        )
    })
}

proptest! {
    #[test]
    fn pca_loadings_orthonormal_and_ratios_sum_to_one(values in prop::collection::vec(-10.0f64..10.0, 30..120)) {
        let x = data_matrix(&values, 3);
        let Ok(std) = standardize_log(&x, &[false; 3], &["a", "b", "c"]) else { return Ok(()) };
        let Ok(fit) = pca(&std) else { return Ok(()) };
        let gram = fit.loadings.transpose() * &fit.loadings;
        prop_assert!((gram - DMatrix::<f64>::identity(3, 3)).amax() < 1e-9);
        prop_assert!((fit.explained_variance_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for w in fit.explained_variance_ratio.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-12);
        }
        for k in 0..3 {
            prop_assert!(fit.loadings.column(k).sum() >= 0.0);
        }
    }

    #[test]
    fn pca_ignores_scale_and_shift_of_columns(
        values in prop::collection::vec(-10.0f64..10.0, 30..90),
        scale in 0.1f64..50.0,
        shift in -100.0f64..100.0,
    ) {
        let x = data_matrix(&values, 3);
        let mut y = x.clone();
        y.column_mut(1).iter_mut().for_each(|v| *v = *v * scale + shift);
        let (Ok(a), Ok(b)) = (standardize_log(&x, &[false; 3], &["a", "b", "c"]), standardize_log(&y, &[false; 3], &["a", "b", "c"])) else { return Ok(()) };
        let (Ok(fa), Ok(fb)) = (pca(&a), pca(&b)) else { return Ok(()) };
        prop_assume!(fa.rank == 3);
        let gaps: Vec<f64> = fa.variances.windows(2).map(|w| w[0] - w[1]).collect();
        prop_assume!(gaps.iter().all(|g| *g > 1e-3));
        prop_assert!((fa.loadings - fb.loadings).amax() < 1e-6);
    }

    #[test]
    fn ols_residuals_orthogonal_to_design((xs, years) in regression_inputs(), noise in prop::collection::vec(-1.0f64..1.0, 40)) {
        let n = xs.len();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * xs[i][0] - xs[i][1] + noise[i]).collect();
        let ids = (0..n).map(|i| format!("r{i:03}")).collect();
        let cols: Vec<(&str, Vec<f64>)> = vec![
            ("y", y),
            ("x0", xs.iter().map(|r| r[0]).collect()),
            ("x1", xs.iter().map(|r| r[1]).collect()),
            ("x2", xs.iter().map(|r| r[2]).collect()),
            ("year", years.iter().map(|&v| v as f64).collect()),
        ];
        let Ok(fit) = ols_fixed_effects(&frame(ids, &cols), &RegressionSpec::new("y", &["x0", "x1", "x2"], Some("year"))) else { return Ok(()) };
        prop_assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-8);
        for (_, col) in &cols[1..4] {
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() < 1e-7);
        }
        prop_assert!(fit.r2 <= 1.0 + 1e-12 && fit.adjusted_r2 <= fit.r2 + 1e-12);
    }

    #[test]
    fn ols_invariant_to_row_order_and_fe_reference(
        (xs, years) in regression_inputs(),
        noise in prop::collection::vec(-1.0f64..1.0, 40),
        rotate in 1usize..11,
    ) {
        let n = xs.len();
        let y: Vec<f64> = (0..n).map(|i| 0.5 * xs[i][0] + xs[i][2] + noise[i] + years[i] as f64 * 0.01).collect();
        let build = |order: &[usize]| {
            let ids = order.iter().map(|&i| format!("r{i:03}")).collect();
            frame(ids, &[
                ("y", order.iter().map(|&i| y[i]).collect()),
                ("x0", order.iter().map(|&i| xs[i][0]).collect()),
                ("x1", order.iter().map(|&i| xs[i][1]).collect()),
                ("year", order.iter().map(|&i| years[i] as f64).collect()),
            ])
        };
        let natural: Vec<usize> = (0..n).collect();
        let mut shuffled = natural.clone();
        shuffled.rotate_left(rotate % n);
        shuffled.reverse();
        let spec = RegressionSpec::new("y", &["x0", "x1"], Some("year"));
        let Ok(base) = ols_fixed_effects(&build(&natural), &spec) else { return Ok(()) };
        let permuted = ols_fixed_effects(&build(&shuffled), &spec).unwrap();
        for (a, b) in base.terms.iter().zip(&permuted.terms) {
            prop_assert_eq!(&a.name, &b.name);
            prop_assert!((a.coefficient - b.coefficient).abs() < 1e-9);
            prop_assert!((a.standard_error - b.standard_error).abs() < 1e-9);
        }

        let levels = &base.fixed_effects.as_ref().unwrap().levels;
        let other = *levels.last().unwrap();
        let respec = RegressionSpec { fe_reference: Some(other), ..spec.clone() };
        let shifted = ols_fixed_effects(&build(&natural), &respec).unwrap();
        for name in ["x0", "x1"] {
            let (a, b) = (base.term(name).unwrap(), shifted.term(name).unwrap());
            prop_assert!((a.coefficient - b.coefficient).abs() < 1e-9);
            prop_assert!((a.standard_error - b.standard_error).abs() < 1e-9);
        }
        for (a, b) in base.fitted.iter().zip(&shifted.fitted) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!((base.r2 - shifted.r2).abs() < 1e-12);
    }

    #[test]
    fn welch_test_matches_formula(
        a in prop::collection::vec(-10.0f64..10.0, 2..30),
        b in prop::collection::vec(-10.0f64..10.0, 2..30),
    ) {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| { let m = mean(v); v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64 };
        let (va, vb) = (var(&a) / a.len() as f64, var(&b) / b.len() as f64);
        prop_assume!(va > 1e-9 && vb > 1e-9);
        let t = (mean(&a) - mean(&b)) / (va + vb).sqrt();
        let dof = (va + vb).powi(2) / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
        let p = 2.0 * StudentsT::new(0.0, 1.0, dof).unwrap().sf(t.abs());

        let scores: Vec<f64> = a.iter().chain(&b).copied().collect();
        let flags: Vec<bool> = (0..scores.len()).map(|i| i < a.len()).collect();
        let got = group_ttest(&scores, &flags).unwrap();
        prop_assert!((got.t - t).abs() < 1e-9 * t.abs().max(1.0));
        prop_assert!((got.dof - dof).abs() < 1e-9 * dof);
        prop_assert!((got.p - p).abs() < 1e-9);
    }
}
