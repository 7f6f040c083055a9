//! Regression and t-distribution properties, shared by the property suites
//! and the acceptance run.

use persona_workbench::stats::{ols, ols_fit, student_t_p, zscore, DesignMatrix, RegressionResult};
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct Sample {
    pub traits: Vec<[f64; 5]>,
    pub y: Vec<f64>,
}

impl Sample {
    pub fn design(&self) -> DesignMatrix {
        DesignMatrix::new(
            self.traits.clone(),
            self.y.iter().map(|v| Some(*v)).collect(),
        )
    }

    pub fn fit(&self) -> Option<RegressionResult> {
        ols_fit("prop", &self.design()).ok()
    }
}

pub fn sample() -> impl Strategy<Value = Sample> {
    (15usize..80)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(prop::array::uniform5(-1i8..=1), n),
                prop::collection::vec(-50.0f64..50.0, n),
            )
        })
        .prop_map(|(t, y)| Sample {
            traits: t.into_iter().map(|r| r.map(f64::from)).collect(),
            y,
        })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Residuals of the standardized fit are orthogonal to every design column.
pub fn orthogonality(s: &Sample) -> Result<(), String> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..5 {
        let c: Vec<f64> = s.traits.iter().map(|r| r[j]).collect();
        let z = zscore(&c).map_err(|e| e.to_string())?;
        if z.degenerate {
            return Ok(());
        }
        cols.push(z.values);
    }
    let zy = zscore(&s.y).map_err(|e| e.to_string())?.values;
    let rows: Vec<Vec<f64>> = (0..s.y.len())
        .map(|i| {
            std::iter::once(1.0)
                .chain(cols.iter().map(|c| c[i]))
                .collect()
        })
        .collect();
    let Ok(fit) = ols(&rows, &zy) else {
        return Ok(());
    };
    for j in 0..6 {
        let dot: f64 = rows.iter().zip(&fit.residuals).map(|(r, e)| r[j] * e).sum();
        if dot.abs() >= 1e-9 {
            return Err(format!("column {j}: Xᵀr = {dot:e}"));
        }
    }
    Ok(())
}

/// Row order does not matter.
pub fn permutation(s: &Sample, seed: u64) -> Result<(), String> {
    let Some(a) = s.fit() else { return Ok(()) };
    let n = s.y.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut state = seed | 1;
    for i in (1..n).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        order.swap(i, (state % (i as u64 + 1)) as usize);
    }
    let shuffled = Sample {
        traits: order.iter().map(|&i| s.traits[i]).collect(),
        y: order.iter().map(|&i| s.y[i]).collect(),
    };
    let b = shuffled.fit().ok_or("shuffled fit failed")?;
    for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
        for (u, v) in [
            (x.beta_std, y.beta_std),
            (x.beta_raw, y.beta_raw),
            (x.t, y.t),
            (x.p, y.p),
        ] {
            if !close(u, v, 1e-12) {
                return Err(format!("{:?}: {u} vs {v}", x.trait_));
            }
        }
    }
    if !close(a.intercept_raw, b.intercept_raw, 1e-12) {
        return Err("intercept moved".into());
    }
    Ok(())
}

/// Adding `k` to the response moves only the intercept, by `k`.
pub fn shift(s: &Sample, k: f64) -> Result<(), String> {
    let Some(a) = s.fit() else { return Ok(()) };
    let shifted = Sample {
        traits: s.traits.clone(),
        y: s.y.iter().map(|v| v + k).collect(),
    };
    let b = shifted.fit().ok_or("shifted fit failed")?;
    if ((b.intercept_raw - a.intercept_raw) - k).abs() > 1e-9 {
        return Err(format!(
            "intercept moved by {} not {k}",
            b.intercept_raw - a.intercept_raw
        ));
    }
    for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
        if !close(x.beta_raw, y.beta_raw, 1e-9) || !close(x.beta_std, y.beta_std, 1e-9) {
            return Err(format!("{:?} slope moved", x.trait_));
        }
    }
    Ok(())
}

/// Scaling the response by `k > 0` scales raw slopes by `k`; t and p stay put.
pub fn scale(s: &Sample, k: f64) -> Result<(), String> {
    let Some(a) = s.fit() else { return Ok(()) };
    let scaled = Sample {
        traits: s.traits.clone(),
        y: s.y.iter().map(|v| v * k).collect(),
    };
    let b = scaled.fit().ok_or("scaled fit failed")?;
    for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
        if !close(x.beta_raw * k, y.beta_raw, 1e-10) {
            return Err(format!(
                "{:?}: beta_raw {} * {k} vs {}",
                x.trait_, x.beta_raw, y.beta_raw
            ));
        }
        if !close(x.t, y.t, 1e-12) || (x.p - y.p).abs() > 1e-12 {
            return Err(format!("{:?}: t {} vs {}", x.trait_, x.t, y.t));
        }
    }
    Ok(())
}

/// Symmetric in t and strictly decreasing in |t|.
pub fn t_shape(t1: f64, t2: f64, df: u32) -> Result<(), String> {
    let (lo, hi) = if t1.abs() <= t2.abs() {
        (t1, t2)
    } else {
        (t2, t1)
    };
    let p = student_t_p(lo, df);
    if p != student_t_p(-lo, df) {
        return Err(format!("asymmetric at t={lo} df={df}"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(format!("p={p} out of range"));
    }
    if hi.abs() - lo.abs() > 1e-6 && student_t_p(hi, df) >= p {
        return Err(format!(
            "not decreasing between |{lo}| and |{hi}| at df={df}"
        ));
    }
    Ok(())
}
