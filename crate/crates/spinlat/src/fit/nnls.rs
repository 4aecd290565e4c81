//! Nonnegative linear least squares, Lawson-Hanson active set.
//!
//! The temperature models are linear in their coupling coefficients, so
//! the constrained fit is solved exactly here rather than iteratively.

use super::linalg;

/// Minimize ||a x - b||_2 subject to x >= 0.
///
/// `a` is row-major, `n_rows x n_cols`. Panics on shape mismatch; returns
/// `None` only if a restricted subproblem is singular (collinear columns).
pub fn nnls(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n_rows = a.len();
    let n_cols = if n_rows == 0 { 0 } else { a[0].len() };
    assert_eq!(b.len(), n_rows, "rhs length must match row count");
    assert!(a.iter().all(|r| r.len() == n_cols));

    let mut x = vec![0.0; n_cols];
    let mut passive = vec![false; n_cols];

    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(b.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
    let tol = scale * 1e-12;

    // gradient of 1/2 ||ax-b||^2 is -a^T (b - ax)
    let grad = |x: &[f64]| -> Vec<f64> {
        (0..n_cols)
            .map(|j| {
                (0..n_rows)
                    .map(|i| {
                        let ax: f64 = (0..n_cols).map(|k| a[i][k] * x[k]).sum();
                        a[i][j] * (b[i] - ax)
                    })
                    .sum()
            })
            .collect()
    };

    for _outer in 0..(3 * n_cols.max(1)) {
        let w = grad(&x);
        let candidate = (0..n_cols)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let j = match candidate {
            Some(j) if w[j] > tol => j,
            _ => break,
        };
        passive[j] = true;

        loop {
            let z = restricted_lsq(a, b, &passive)?;
            let negative: Vec<usize> = (0..n_cols).filter(|&k| passive[k] && z[k] <= 0.0).collect();
            if negative.is_empty() {
                for k in 0..n_cols {
                    x[k] = if passive[k] { z[k] } else { 0.0 };
                }
                break;
            }
            let alpha = negative
                .iter()
                .map(|&k| x[k] / (x[k] - z[k]))
                .fold(f64::INFINITY, f64::min);
            for k in 0..n_cols {
                if passive[k] {
                    x[k] += alpha * (z[k] - x[k]);
                }
            }
            for k in 0..n_cols {
                if passive[k] && x[k] <= tol.max(f64::EPSILON) {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    Some(x)
}

/// Unconstrained least squares over the passive columns, zeros elsewhere.
fn restricted_lsq(a: &[Vec<f64>], b: &[f64], passive: &[bool]) -> Option<Vec<f64>> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    if cols.is_empty() {
        return Some(vec![0.0; passive.len()]);
    }
    let m = cols.len();
    let mut ata = vec![vec![0.0; m]; m];
    let mut atb = vec![0.0; m];
    for (ci, &c1) in cols.iter().enumerate() {
        for (cj, &c2) in cols.iter().enumerate() {
            ata[ci][cj] = a.iter().map(|row| row[c1] * row[c2]).sum();
        }
        atb[ci] = a.iter().zip(b).map(|(row, rhs)| row[c1] * rhs).sum();
    }
    let sol = linalg::solve(&ata, &atb)?;
    let mut z = vec![0.0; passive.len()];
    for (ci, &c) in cols.iter().enumerate() {
        z[c] = sol[ci];
    }
    Some(z)
}
