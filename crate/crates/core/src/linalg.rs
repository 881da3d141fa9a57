//! Householder QR for tall, thin least-squares problems.

use crate::error::{Error, Result};

/// Relative size below which a column counts as linearly dependent on its predecessors.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// Compact Householder factorization of an `m x q` column-major matrix.
#[derive(Debug, Clone)]
pub(crate) struct HouseholderQr {
    m: usize,
    q: usize,
    /// Strict upper triangle holds `R`; on and below the diagonal, the reflectors.
    a: Vec<f64>,
    betas: Vec<f64>,
    diag: Vec<f64>,
    col_norms: Vec<f64>,
}

impl HouseholderQr {
    pub fn new(mut a: Vec<f64>, m: usize, q: usize) -> Self {
        debug_assert_eq!(a.len(), m * q);
        let col_norms: Vec<f64> = (0..q)
            .map(|j| {
                a[j * m..(j + 1) * m]
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let steps = q.min(m);
        let mut betas = vec![0.0; steps];
        let mut diag = vec![0.0; q];
        for k in 0..steps {
            let (head, tail) = a.split_at_mut((k + 1) * m);
            let v = &mut head[k * m + k..k * m + m];
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            let beta = 2.0 / vnorm2;
            betas[k] = beta;
            diag[k] = alpha;
            for j in 0..q - k - 1 {
                let col = &mut tail[j * m + k..j * m + m];
                let s = beta * v.iter().zip(col.iter()).map(|(x, y)| x * y).sum::<f64>();
                col.iter_mut().zip(v.iter()).for_each(|(c, x)| *c -= s * x);
            }
        }
        Self {
            m,
            q,
            a,
            betas,
            diag,
            col_norms,
        }
    }

    /// First column whose component orthogonal to the preceding columns is negligible.
    pub fn first_dependent_column(&self) -> Option<usize> {
        if self.m < self.q {
            return Some(self.m);
        }
        (0..self.q).find(|&k| {
            let norm = self.col_norms[k];
            norm == 0.0 || self.diag[k].abs() <= RANK_TOL * norm
        })
    }

    /// Overwrites `y` with `Q^T y`.
    pub fn apply_qt(&self, y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.m);
        for (k, &beta) in self.betas.iter().enumerate() {
            if beta == 0.0 {
                continue;
            }
            let v = &self.a[k * self.m + k..(k + 1) * self.m];
            let yk = &mut y[k..];
            let s = beta * v.iter().zip(yk.iter()).map(|(x, y)| x * y).sum::<f64>();
            yk.iter_mut().zip(v).for_each(|(y, x)| *y -= s * x);
        }
    }

    /// `R[i][j]` for `i <= j`.
    pub fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[j]
        } else if i < j {
            self.a[j * self.m + i]
        } else {
            0.0
        }
    }

    /// The `q x q` triangle `R` in column-major order; needs `m >= q`.
    pub fn r_square(&self) -> Vec<f64> {
        debug_assert!(self.m >= self.q);
        let q = self.q;
        let mut out = vec![0.0; q * q];
        for j in 0..q {
            for i in 0..=j {
                out[j * q + i] = self.r(i, j);
            }
        }
        out
    }

    /// Solves `R b = z[..q]` by back substitution.
    fn back_substitute(&self, z: &[f64]) -> Vec<f64> {
        let q = self.q;
        let mut b = vec![0.0; q];
        for i in (0..q).rev() {
            let mut s = z[i];
            for (j, bj) in b.iter().enumerate().skip(i + 1) {
                s -= self.r(i, j) * bj;
            }
            b[i] = s / self.diag[i];
        }
        b
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub coef: Vec<f64>,
    pub rss: f64,
}

/// Least squares of `y` on the columns of a column-major `m x q` matrix.
/// Rank deficiency is an error, never silently regularized.
pub(crate) fn lstsq(design: Vec<f64>, m: usize, q: usize, y: &[f64]) -> Result<LeastSquares> {
    if y.len() != m {
        return Err(Error::Dimension(format!(
            "{} responses for a design with {m} rows",
            y.len()
        )));
    }
    if q == 0 {
        return Ok(LeastSquares {
            coef: Vec::new(),
            rss: y.iter().map(|v| v * v).sum(),
        });
    }
    let qr = HouseholderQr::new(design, m, q);
    if let Some(col) = qr.first_dependent_column() {
        return Err(Error::SingularDesign(format!(
            "column {col} of {q} is linearly dependent on the preceding columns"
        )));
    }
    let mut z = y.to_vec();
    qr.apply_qt(&mut z);
    let coef = qr.back_substitute(&z);
    let rss = z[q..].iter().map(|v| v * v).sum();
    Ok(LeastSquares { coef, rss })
}

/// Residual sum of squares only.
pub(crate) fn lstsq_rss(design: Vec<f64>, m: usize, q: usize, y: &[f64]) -> Option<f64> {
    lstsq(design, m, q, y).ok().map(|ls| ls.rss)
}
