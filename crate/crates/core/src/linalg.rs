//! Dense least squares and small matrix helpers over `nalgebra`.

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative residual norm below which a column counts as linearly dependent
/// on the columns before it.
pub const RANK_TOL: f64 = 1e-9;

/// Ordinary least-squares solution with the unscaled covariance `(X'X)^{-1}`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: Vec<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

/// Indices of columns that are (numerically) in the span of earlier columns.
///
/// Modified Gram-Schmidt in column order; a zero column is always dependent.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm0 = col.norm();
        if norm0 == 0.0 {
            out.push(j);
            continue;
        }
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let r = v.norm();
        if r <= RANK_TOL * norm0 {
            out.push(j);
        } else {
            basis.push(v / r);
        }
    }
    out
}

/// Solve `min ||y - X b||` by Householder QR. `names` labels the columns for
/// rank-deficiency reports.
pub fn least_squares(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<LeastSquares> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n < p {
        return Err(Error::InsufficientData(alloc::format!(
            "{n} observations for {p} coefficients"
        )));
    }
    let bad = dependent_columns(x);
    if !bad.is_empty() {
        let columns = bad
            .iter()
            .map(|&j| names.get(j).cloned().unwrap_or_else(|| alloc::format!("column {j}")))
            .collect();
        return Err(Error::RankDeficient { columns });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let yv = DVector::from_column_slice(y);
    let qty = q.transpose() * &yv;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient { columns: names.to_vec() })?;
    let rinv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient { columns: names.to_vec() })?;
    let xtx_inv = &rinv * rinv.transpose();
    let fitted = x * &coef;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    Ok(LeastSquares { coef: coef.iter().copied().collect(), xtx_inv, residuals, rss })
}

/// Inverse of a symmetric positive-definite matrix, or `None`.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse())
}

/// Solve a general square system.
pub fn solve(a: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let lu = a.clone().lu();
    lu.solve(&DVector::from_column_slice(b)).map(|v| v.iter().copied().collect())
}

/// Row-major construction helper.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, p, |i, j| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn detects_dependent_column() {
        let x = matrix_from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![1.0, 0.5, 1.5],
            vec![1.0, -1.0, 0.0],
            vec![1.0, 4.0, 5.0],
        ]);
        assert_eq!(dependent_columns(&x), vec![2]);
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| String::from(*s)).collect();
        match least_squares(&x, &[1.0, 2.0, 3.0, 4.0], &names) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec![String::from("c")]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exact_line() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| 1.0 + 2.0 * i as f64).collect();
        let fit = least_squares(&matrix_from_rows(&rows), &y, &[]).unwrap();
        assert!((fit.coef[0] - 1.0).abs() < 1e-12 && (fit.coef[1] - 2.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }
}
