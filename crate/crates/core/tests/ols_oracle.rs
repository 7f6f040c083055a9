mod common;

use common::exact::{normal_equations, TWELVE};
use persona_workbench::stats::{ols, ols_fit, DesignMatrix};

#[test]
fn bareiss_determinant() {
    assert_eq!(common::exact::det(vec![vec![2, 1], vec![1, 3]]), 5);
    assert_eq!(
        common::exact::det(vec![vec![0, 1, 2], vec![1, 0, 3], vec![4, -3, 8]]),
        -2
    );
    assert_eq!(common::exact::det(vec![vec![1, 2], vec![2, 4]]), 0);
}

#[test]
fn two_predictor_fit_matches_hand_solution() {
    let x: Vec<Vec<i64>> = TWELVE.iter().map(|(t, _)| vec![1, t[0], t[2]]).collect();
    let y: Vec<i64> = TWELVE.iter().map(|(_, y)| *y).collect();
    let exact = normal_equations(&x, &y);
    let fit = ols(
        &x.iter()
            .map(|r| r.iter().map(|v| *v as f64).collect())
            .collect::<Vec<_>>(),
        &y.iter().map(|v| *v as f64).collect::<Vec<_>>(),
    )
    .unwrap();
    for ((num, den), b) in exact.iter().zip(&fit.beta) {
        assert!(
            (*num as f64 / *den as f64 - b).abs() < 1e-9,
            "{num}/{den} vs {b}"
        );
    }
    assert_eq!(fit.df, 9);
}

#[test]
fn five_trait_raw_fit_matches_hand_solution() {
    let x: Vec<Vec<i64>> = TWELVE
        .iter()
        .map(|(t, _)| std::iter::once(1).chain(t.iter().copied()).collect())
        .collect();
    let y: Vec<i64> = TWELVE.iter().map(|(_, y)| *y).collect();
    let exact = normal_equations(&x, &y);
    let design = DesignMatrix::new(
        TWELVE.iter().map(|(t, _)| t.map(|v| v as f64)).collect(),
        TWELVE.iter().map(|(_, y)| Some(*y as f64)).collect(),
    );
    let fit = ols_fit("toy", &design).unwrap();
    let (num, den) = exact[0];
    assert!((num as f64 / den as f64 - fit.intercept_raw).abs() < 1e-9);
    for ((num, den), c) in exact[1..].iter().zip(&fit.coefficients) {
        assert!((*num as f64 / *den as f64 - c.beta_raw).abs() < 1e-9);
    }
    assert_eq!(fit.n_used, 12);
}

#[test]
fn standardized_beta_is_raw_beta_rescaled() {
    let design = DesignMatrix::new(
        TWELVE.iter().map(|(t, _)| t.map(|v| v as f64)).collect(),
        TWELVE.iter().map(|(_, y)| Some(*y as f64)).collect(),
    );
    let fit = ols_fit("toy", &design).unwrap();
    let ys: Vec<f64> = TWELVE.iter().map(|(_, y)| *y as f64).collect();
    let sy = persona_workbench::stats::sample_sd(&ys);
    for (j, c) in fit.coefficients.iter().enumerate() {
        let col: Vec<f64> = TWELVE.iter().map(|(t, _)| t[j] as f64).collect();
        let sx = persona_workbench::stats::sample_sd(&col);
        assert!((c.beta_raw * sx / sy - c.beta_std).abs() < 1e-9);
    }
}
