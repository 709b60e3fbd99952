use absa_core::ingest::Cuisine;
use absa_core::regress::{encode_design_matrix, fit_ols, ModelSpec, RestaurantAggregate};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("x{j}")).collect()
}

fn design(n: usize, k: usize, vals: &[f64]) -> Array2<f64> {
    let mut x = Array2::from_shape_vec((n, k), vals[..n * k].to_vec()).unwrap();
    x.column_mut(0).fill(1.0);
    x
}

/// Coefficients and standard errors from the normal equations.
fn oracle(x: &Array2<f64>, y: &Array1<f64>) -> (Vec<f64>, Vec<f64>) {
    let (n, k) = x.dim();
    let m = DMatrix::from_row_iterator(n, k, x.iter().copied());
    let v = DVector::from_iterator(n, y.iter().copied());
    let xtx_inv = (m.transpose() * &m).try_inverse().unwrap();
    let beta = &xtx_inv * m.transpose() * &v;
    let resid = &v - &m * &beta;
    let s2 = resid.norm_squared() / (n - k) as f64;
    let se = (0..k).map(|j| (s2 * xtx_inv[(j, j)]).sqrt()).collect();
    (beta.iter().copied().collect(), se)
}

fn problem() -> impl Strategy<Value = (Array2<f64>, Array1<f64>)> {
    (8usize..30, 2usize..6).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * k),
            prop::collection::vec(-5.0f64..5.0, n),
        )
            .prop_map(move |(xv, yv)| (design(n, k, &xv), Array1::from(yv)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_normal_equations((x, y) in problem()) {
        let fit = fit_ols(x.view(), y.view(), &names(x.ncols())).unwrap();
        let (beta, se) = oracle(&x, &y);
        for j in 0..x.ncols() {
            prop_assert!((fit.beta[j] - beta[j]).abs() <= 1e-8 * (1.0 + beta[j].abs()));
            prop_assert!((fit.se[j] - se[j]).abs() <= 1e-8 * (1.0 + se[j].abs()));
        }
    }

    #[test]
    fn residuals_orthogonal_to_columns((x, y) in problem()) {
        let fit = fit_ols(x.view(), y.view(), &names(x.ncols())).unwrap();
        let r = Array1::from(fit.residuals.clone());
        for col in x.columns() {
            prop_assert!(col.dot(&r).abs() < 1e-8 * (1.0 + y.dot(&y)));
        }
    }

    #[test]
    fn extra_column_never_lowers_r2((x, y) in problem(), extra in prop::collection::vec(-3.0f64..3.0, 30)) {
        let base = fit_ols(x.view(), y.view(), &names(x.ncols())).unwrap();
        let n = x.nrows();
        let col = Array2::from_shape_vec((n, 1), extra[..n].to_vec()).unwrap();
        let wider = ndarray::concatenate(ndarray::Axis(1), &[x.view(), col.view()]).unwrap();
        if let Ok(fit) = fit_ols(wider.view(), y.view(), &names(wider.ncols())) {
            prop_assert!(fit.r_squared >= base.r_squared - 1e-10);
        }
    }

    #[test]
    fn dummies_sum_to_at_most_one(
        rows in prop::collection::vec((0usize..11, 0usize..5, -1.0f64..1.0, 1.0f64..5.0), 3..40)
    ) {
        let states = ["AB", "PA", "FL", "NV", "LA"];
        let aggs: Vec<RestaurantAggregate> = rows
            .iter()
            .enumerate()
            .map(|(i, &(c, s, m, r))| RestaurantAggregate {
                business_id: format!("b{i}"),
                means: [m; 6],
                overall_rating: r,
                state: states[s].into(),
                cuisine: Cuisine::ALL[c],
                n_reviews: 1,
            })
            .collect();
        let d = encode_design_matrix(&aggs, ModelSpec::Full).unwrap();
        for row in d.x.outer_iter() {
            let cuisine: f64 = d.terms.iter().zip(row.iter()).filter(|(t, _)| t.starts_with("cuisine:")).map(|(_, v)| v).sum();
            let state: f64 = d.terms.iter().zip(row.iter()).filter(|(t, _)| t.starts_with("state:")).map(|(_, v)| v).sum();
            prop_assert!(cuisine == 0.0 || cuisine == 1.0);
            prop_assert!(state == 0.0 || state == 1.0);
        }
        // Every dummy column has at least one row.
        for (j, t) in d.terms.iter().enumerate().skip(7) {
            prop_assert!(d.x.column(j).sum() >= 1.0, "{t} is empty");
        }
    }
}

#[test]
fn duplicated_rows_shrink_standard_errors() {
    let x = design(6, 2, &[0.0, 1.0, 0.0, 2.0, 0.0, 4.0, 0.0, 3.0, 0.0, 7.0, 0.0, 5.0]);
    let y = Array1::from(vec![1.0, 2.5, 3.9, 3.2, 7.4, 5.1]);
    let single = fit_ols(x.view(), y.view(), &names(2)).unwrap();
    let xx = ndarray::concatenate(ndarray::Axis(0), &[x.view(), x.view()]).unwrap();
    let yy = ndarray::concatenate(ndarray::Axis(0), &[y.view(), y.view()]).unwrap();
    let double = fit_ols(xx.view(), yy.view(), &names(2)).unwrap();
    // Same RSS per copy, (2n - k) vs (n - k) degrees of freedom.
    assert!((double.r_squared - single.r_squared).abs() < 1e-12);
    let dof = ((6.0 - 2.0) / (12.0 - 2.0) * 2.0f64).sqrt();
    for j in 0..2 {
        assert!((double.beta[j] - single.beta[j]).abs() < 1e-12);
        let expected = single.se[j] / 2f64.sqrt() * dof;
        assert!((double.se[j] - expected).abs() < 1e-12, "{} vs {}", double.se[j], expected);
    }
}
