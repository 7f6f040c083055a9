//! Trait-behavior regression, significance, descriptive statistics and
//! comparison against the expected-sign table.

mod ols;
mod signs;
mod tdist;

pub use ols::{ols, ols_fit, DesignMatrix, OlsFit, RegressionResult, TraitCoefficient};
pub use signs::{
    compare_signs, Behavior, CoefficientRow, ExpectedSign, ExpectedSignTable, SignCell, SignReport,
    Verdict, DEFAULT_ALPHA, EXPECTED_SIGNS_CSV,
};
pub use tdist::{inc_beta_reg, ln_gamma, student_t_p};

use crate::error::StatsError;

#[derive(Debug, Clone, PartialEq)]
pub struct ZScores {
    pub values: Vec<f64>,
    /// Input had zero variance; `values` are all zero.
    pub degenerate: bool,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Centers to mean 0 and scales to sample SD 1.
pub fn zscore(values: &[f64]) -> Result<ZScores, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::Length {
            needed: 2,
            got: values.len(),
        });
    }
    let m = mean(values);
    let sd = sample_sd(values);
    if sd == 0.0 || values.iter().all(|v| *v == values[0]) {
        return Ok(ZScores {
            values: vec![0.0; values.len()],
            degenerate: true,
        });
    }
    Ok(ZScores {
        values: values.iter().map(|v| (v - m) / sd).collect(),
        degenerate: false,
    })
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Inter-trait correlation matrix over per-persona trait scores.
pub fn pearson_matrix(scores: &[[f64; 5]]) -> Result<[[f64; 5]; 5], StatsError> {
    if scores.len() < 2 {
        return Err(StatsError::Length {
            needed: 2,
            got: scores.len(),
        });
    }
    let columns: Vec<Vec<f64>> = (0..5)
        .map(|j| scores.iter().map(|r| r[j]).collect())
        .collect();
    for (j, c) in columns.iter().enumerate() {
        if c.iter().all(|v| *v == c[0]) {
            return Err(StatsError::DegenerateColumn(j));
        }
    }
    let mut m = [[0.0; 5]; 5];
    for i in 0..5 {
        m[i][i] = 1.0;
        for j in 0..i {
            let r = pearson(&columns[i], &columns[j]);
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}
