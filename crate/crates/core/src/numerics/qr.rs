use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Relative pivot threshold below which a factorization is rejected.
pub const RANK_TOL: f64 = 1e-12;

/// Thin QR factors `M = Q R` with `Q` (rows × cols) orthonormal and `R`
/// upper triangular with a nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: Matrix,
    pub r: Matrix,
}

/// Householder QR of a tall matrix.
///
/// Fails with [`Error::RankDeficient`] when some `|R(i,i)|` falls to
/// `RANK_TOL · max_j |R(j,j)|` or below.
pub fn qr(m: &Matrix) -> Result<QrFactors> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows < cols {
        return Err(Error::InvalidArgument(format!(
            "qr needs rows >= cols, got {rows}x{cols}"
        )));
    }
    // Work column-major: a[j] is column j.
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut r = Matrix::zeros(cols, cols);

    for j in 0..cols {
        let x = &a[j][j..];
        let alpha = dot(x, x).sqrt();
        let mut v = x.to_vec();
        // Reflect onto -sign(x0)·‖x‖·e0, then flip rows below to keep R(j,j) >= 0.
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(j) {
                let tail = &mut col[j..];
                let f = 2.0 * dot(&v, tail) / vnorm2;
                for (t, vi) in tail.iter_mut().zip(&v) {
                    *t -= f * vi;
                }
            }
        }
        reflectors.push(if vnorm2 > 0.0 { v } else { Vec::new() });
        for i in 0..=j {
            r[(i, j)] = a[j][i];
        }
    }

    // Q = H_0 H_1 ... H_{n-1} applied to the first `cols` identity columns.
    let mut q_cols: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; rows];
            e[j] = 1.0;
            e
        })
        .collect();
    for (j, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        let vnorm2 = dot(v, v);
        for qc in q_cols.iter_mut() {
            let tail = &mut qc[j..];
            let f = 2.0 * dot(v, tail) / vnorm2;
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= f * vi;
            }
        }
    }

    // Fix signs so that diag(R) >= 0.
    for i in 0..cols {
        if r[(i, i)] < 0.0 {
            for j in i..cols {
                r[(i, j)] = -r[(i, j)];
            }
            for x in q_cols[i].iter_mut() {
                *x = -*x;
            }
        }
    }

    let max_diag = (0..cols).fold(0.0f64, |acc, i| acc.max(r[(i, i)]));
    for i in 0..cols {
        if r[(i, i)] <= RANK_TOL * max_diag || max_diag == 0.0 {
            return Err(Error::RankDeficient {
                column: i,
                pivot: r[(i, i)],
            });
        }
    }

    Ok(QrFactors {
        q: Matrix::from_columns(&q_cols)?,
        r,
    })
}

impl QrFactors {
    pub fn rows(&self) -> usize {
        self.q.rows()
    }

    pub fn cols(&self) -> usize {
        self.r.cols()
    }

    /// `Qᵀ y`.
    pub fn qt_mul(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.q.tr_matvec(y)
    }

    /// Solves `R x = b` by back substitution.
    pub fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let n = self.cols();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.r[(i, j)] * x[j];
            }
            x[i] /= self.r[(i, i)];
        }
        x
    }

    /// Least-squares solution `argmin ‖M x − y‖₂`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_r(&self.qt_mul(y)?))
    }

    /// Squared norm of the component of `y` orthogonal to `col(M)`.
    pub fn residual_sq(&self, y: &[f64]) -> Result<f64> {
        // explicit projection; ‖y‖² − ‖Qᵀy‖² cancels badly near zero
        let fit = self.q.matvec(&self.qt_mul(y)?)?;
        Ok(y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

/// Least squares through a fresh QR factorization.
pub fn lstsq(m: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != m.rows() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            got: y.len(),
        });
    }
    qr(m)?.solve(y)
}
