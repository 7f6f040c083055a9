mod common;

use common::props::t_shape;
use persona_workbench::stats::student_t_p;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn oracle(t: f64, df: u32) -> f64 {
    let d = StudentsT::new(0.0, 1.0, f64::from(df)).unwrap();
    2.0 * d.cdf(-t.abs())
}

#[test]
fn two_sided_five_percent_critical_value() {
    assert!((student_t_p(2.228, 10) - 0.050).abs() < 0.001);
    assert!((student_t_p(2.228, 10) - oracle(2.228, 10)).abs() < 1e-10);
}

#[test]
fn textbook_critical_values() {
    for (t, df, p) in [
        (12.706, 1, 0.05),
        (4.303, 2, 0.05),
        (2.571, 5, 0.05),
        (3.169, 10, 0.01),
        (1.960, 100_000, 0.05),
        (1.972, 200, 0.05),
    ] {
        assert!((student_t_p(t, df) - p).abs() < 5e-4, "t={t} df={df}");
    }
}

#[test]
fn cauchy_closed_form() {
    for t in [0.1f64, 0.5, 1.0, 3.0, 40.0] {
        let want = 1.0 - 2.0 * t.atan() / std::f64::consts::PI;
        assert!((student_t_p(t, 1) - want).abs() < 1e-12);
    }
}

#[test]
fn limits() {
    assert_eq!(student_t_p(f64::INFINITY, 5), 0.0);
    assert_eq!(student_t_p(f64::NEG_INFINITY, 5), 0.0);
    assert_eq!(student_t_p(0.0, 5), 1.0);
    assert_eq!(student_t_p(f64::NAN, 5), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn agrees_with_reference_cdf(t in -12.0f64..12.0, df in 1u32..400) {
        let (got, want) = (student_t_p(t, df), oracle(t, df));
        prop_assert!((got - want).abs() < 1e-9 * (1.0 + want), "t={} df={} {} vs {}", t, df, got, want);
    }

    #[test]
    fn symmetric_and_decreasing(t1 in -25.0f64..25.0, t2 in -25.0f64..25.0, df in 1u32..300) {
        prop_assert_eq!(t_shape(t1, t2, df), Ok(()));
    }
}
