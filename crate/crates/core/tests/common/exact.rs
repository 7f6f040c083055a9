//! Exact rational solve of small integer normal equations.

/// Fraction-free (Bareiss) determinant of an integer matrix.
pub fn det(mut m: Vec<Vec<i128>>) -> i128 {
    let n = m.len();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k][k] == 0 {
            let Some(swap) = (k + 1..n).find(|&r| m[r][k] != 0) else {
                return 0;
            };
            m.swap(k, swap);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    sign * m[n - 1][n - 1]
}

/// Solves `XᵀX β = Xᵀy` by Cramer's rule; each β is returned as (numerator, denominator).
pub fn normal_equations(x: &[Vec<i64>], y: &[i64]) -> Vec<(i128, i128)> {
    let k = x[0].len();
    let mut xtx = vec![vec![0i128; k]; k];
    let mut xty = vec![0i128; k];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..k {
            xty[i] += i128::from(row[i]) * i128::from(yi);
            for j in 0..k {
                xtx[i][j] += i128::from(row[i]) * i128::from(row[j]);
            }
        }
    }
    let d = det(xtx.clone());
    assert_ne!(d, 0, "singular design");
    (0..k)
        .map(|c| {
            let mut m = xtx.clone();
            for (r, row) in m.iter_mut().enumerate() {
                row[c] = xty[r];
            }
            (det(m), d)
        })
        .collect()
}

/// Twelve personas: five trait codes each and an integer response.
pub const TWELVE: [([i64; 5], i64); 12] = [
    ([-1, -1, -1, -1, -1], 3),
    ([1, -1, 0, 1, -1], 7),
    ([0, 1, -1, 0, 1], 5),
    ([1, 1, 1, -1, 0], 9),
    ([-1, 0, 1, 1, 1], 2),
    ([0, -1, 1, -1, 0], 6),
    ([1, 0, -1, 0, -1], 8),
    ([-1, 1, 0, -1, 1], 4),
    ([0, 0, 0, 1, -1], 6),
    ([1, -1, -1, 1, 1], 5),
    ([-1, 1, 1, 0, -1], 3),
    ([0, 0, -1, -1, 0], 7),
];
