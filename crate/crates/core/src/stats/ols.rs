//! Ordinary least squares through the normal equations.

use serde::{Deserialize, Serialize};

use super::tdist::student_t_p;
use super::zscore;
use crate::error::StatsError;
use crate::persona::Trait;

/// Cholesky factor `L` of a symmetric positive-definite matrix (row-major).
fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, StatsError> {
    let k = a.len();
    let scale = (0..k).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    let tol = scale * 1e-12;
    let mut l = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = (0..j).map(|m| l[i][m] * l[j][m]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= tol || !d.is_finite() {
                    return Err(StatsError::RankDeficient);
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = l.len();
    let mut y = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|m| l[i][m] * y[m]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|m| l[m][i] * x[m]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// Generic least-squares fit. `rows` already include any intercept column.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    pub stderr: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub r_squared: f64,
    pub df: u32,
}

pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> Result<OlsFit, StatsError> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n != y.len() {
        return Err(StatsError::Length {
            needed: n,
            got: y.len(),
        });
    }
    if k == 0 || n <= k {
        return Err(StatsError::InsufficientData {
            rows: n,
            columns: k,
        });
    }
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (row, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            xty[i] += row[i] * yi;
            for j in 0..k {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    let l = cholesky(&xtx)?;
    let beta = cholesky_solve(&l, &xty);

    let residuals: Vec<f64> = rows
        .iter()
        .zip(y)
        .map(|(row, yi)| yi - row.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let df = (n - k) as u32;
    let sigma2 = rss / f64::from(df);

    let mut stderr = Vec::with_capacity(k);
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        let inv_col = cholesky_solve(&l, &e);
        stderr.push((sigma2 * inv_col[i]).max(0.0).sqrt());
    }
    let t: Vec<f64> = beta
        .iter()
        .zip(&stderr)
        .map(|(b, se)| match (*b == 0.0, *se == 0.0) {
            (true, true) => 0.0,
            (false, true) => b.signum() * f64::INFINITY,
            _ => b / se,
        })
        .collect();
    let p = t.iter().map(|t| student_t_p(*t, df)).collect();
    Ok(OlsFit {
        beta,
        stderr,
        t,
        p,
        residuals,
        rss,
        r_squared,
        df,
    })
}

/// Five encoded traits per persona plus one response, with an exclusion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub traits: Vec<[f64; 5]>,
    pub response: Vec<f64>,
    /// `true` rows are excluded from fitting.
    pub masked: Vec<bool>,
}

impl DesignMatrix {
    pub const COLUMNS: usize = 6;

    /// Rows with an absent (`None`) or non-finite response are masked.
    pub fn new(traits: Vec<[f64; 5]>, response: Vec<Option<f64>>) -> Self {
        let masked = response
            .iter()
            .map(|r| !r.is_some_and(f64::is_finite))
            .collect();
        let response = response.into_iter().map(|r| r.unwrap_or(0.0)).collect();
        Self {
            traits,
            response,
            masked,
        }
    }

    pub fn n_used(&self) -> usize {
        self.masked.iter().filter(|m| !**m).count()
    }

    fn unmasked(&self) -> (Vec<[f64; 5]>, Vec<f64>) {
        self.traits
            .iter()
            .zip(&self.response)
            .zip(&self.masked)
            .filter(|(_, m)| !**m)
            .map(|((x, y), _)| (*x, *y))
            .unzip()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitCoefficient {
    pub trait_: Trait,
    /// Coefficient with predictors and response standardized.
    pub beta_std: f64,
    /// Coefficient on the raw trait codes and raw response.
    pub beta_raw: f64,
    pub stderr: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub behavior: String,
    pub coefficients: Vec<TraitCoefficient>,
    pub intercept_raw: f64,
    pub n_used: usize,
    pub r_squared: f64,
    /// The response had no variance after masking.
    pub degenerate_response: bool,
}

fn with_intercept(x: &[[f64; 5]]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect()
}

/// Fits the standardized model (z-scored traits and response, which yields
/// `beta_std`, standard errors, t and p) and the raw-scale model.
pub fn ols_fit(behavior: &str, design: &DesignMatrix) -> Result<RegressionResult, StatsError> {
    let (x, y) = design.unmasked();
    let n = x.len();
    if n <= DesignMatrix::COLUMNS {
        return Err(StatsError::InsufficientData {
            rows: n,
            columns: DesignMatrix::COLUMNS,
        });
    }
    let mut xs = vec![[0.0; 5]; n];
    for col in 0..5 {
        let column: Vec<f64> = x.iter().map(|r| r[col]).collect();
        let z = zscore(&column)?;
        if z.degenerate {
            return Err(StatsError::RankDeficient);
        }
        for (row, v) in xs.iter_mut().zip(z.values) {
            row[col] = v;
        }
    }
    let zy = zscore(&y)?;
    let std_fit = ols(&with_intercept(&xs), &zy.values)?;
    let raw_fit = ols(&with_intercept(&x), &y)?;

    let coefficients = Trait::ALL
        .iter()
        .enumerate()
        .map(|(i, t)| TraitCoefficient {
            trait_: *t,
            beta_std: std_fit.beta[i + 1],
            beta_raw: raw_fit.beta[i + 1],
            stderr: std_fit.stderr[i + 1],
            t: std_fit.t[i + 1],
            p: std_fit.p[i + 1],
        })
        .collect();
    Ok(RegressionResult {
        behavior: behavior.to_string(),
        coefficients,
        intercept_raw: raw_fit.beta[0],
        n_used: n,
        r_squared: raw_fit.r_squared,
        degenerate_response: zy.degenerate,
    })
}
