//! Centering, empirical Karhunen-Loeve decomposition and the decomposition of
//! curves into a local component around `t` and an uncorrelated remainder.
//!
//! Inner products use a [`QuadratureRule`] with weights `w`. Writing
//! `A = X diag(sqrt(w))`, the empirical covariance operator is similar to the
//! symmetric `p x p` matrix `A^T A / n`, whose nonzero spectrum coincides with
//! that of the `n x n` Gram matrix `A A^T / n`. The smaller of the two is
//! diagonalized.

use faer::{Mat, MatRef, Side};
use serde::Serialize;

use crate::data::{CurveMatrix, FunctionalDataset, Grid};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// Means removed by [`center`], needed to re-center new curves at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataMeans {
    pub curves: Vec<f64>,
    pub response: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Centered {
    pub data: FunctionalDataset,
    pub means: DataMeans,
}

/// Subtracts column means from the curves and the mean from the responses.
pub fn center(data: &FunctionalDataset) -> Result<Centered> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "centering needs at least 2 curves, got {n}"
        )));
    }
    let col_means = data.curves.column_means();
    let mut curves = data.curves.clone();
    for i in 0..n {
        for (x, m) in curves.row_mut(i).iter_mut().zip(&col_means) {
            *x -= m;
        }
    }
    let (responses, response_mean) = match &data.responses {
        Some(y) => {
            let m = y.iter().sum::<f64>() / n as f64;
            (Some(y.iter().map(|v| v - m).collect()), Some(m))
        }
        None => (None, None),
    };
    Ok(Centered {
        data: FunctionalDataset {
            grid: data.grid,
            curves,
            responses,
            centered: true,
        },
        means: DataMeans {
            curves: col_means,
            response: response_mean,
        },
    })
}

/// Eigenvalues below this fraction of the leading one count as numerically zero.
const RANK_REL_TOL: f64 = 1e-12;

/// Truncated empirical Karhunen-Loeve triple.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    grid: Grid,
    rule: QuadratureRule,
    eigenvalues: Vec<f64>,
    /// `k x p`, row `j` is the `j`-th eigenfunction on the grid.
    eigenfunctions: CurveMatrix,
    /// `n x k`, entry `(i, j)` is `<X_i, psi_j>`.
    scores: CurveMatrix,
    rank: usize,
    requested: usize,
}

impl EigenSystem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunction(&self, j: usize) -> &[f64] {
        self.eigenfunctions.row(j)
    }

    pub fn eigenfunctions(&self) -> &CurveMatrix {
        &self.eigenfunctions
    }

    pub fn scores(&self) -> &CurveMatrix {
        &self.scores
    }

    /// Number of components retained.
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Components whose eigenvalue is numerically nonzero.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of components originally asked for.
    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn is_truncated(&self) -> bool {
        self.requested > self.k()
    }

    pub fn report(&self) -> EigenReport {
        EigenReport {
            eigenvalues: self.eigenvalues.clone(),
            p: self.grid.len(),
            eigenfunctions: self.eigenfunctions.as_slice().to_vec(),
            rank: self.rank,
        }
    }
}

/// Serializable summary of an [`EigenSystem`]; eigenfunction rows are concatenated.
#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub eigenvalues: Vec<f64>,
    pub p: usize,
    pub eigenfunctions: Vec<f64>,
    pub rank: usize,
}

/// Leading `k_max` eigenpairs of the empirical covariance operator of centered
/// curves. `k_max` is capped at `min(n - 1, p)`.
pub fn empirical_kl(
    data: &FunctionalDataset,
    k_max: usize,
    rule: &QuadratureRule,
) -> Result<EigenSystem> {
    if !data.centered {
        return Err(Error::NotCentered("the Karhunen-Loeve decomposition"));
    }
    let (n, p) = (data.n(), data.p());
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "decomposition needs at least 2 curves, got {n}"
        )));
    }
    if rule.len() != p {
        return Err(Error::Dimension(format!(
            "quadrature rule has {} weights, grid has {p} points",
            rule.len()
        )));
    }
    let cap = (n - 1).min(p);
    let k = if k_max > cap {
        log::warn!("requested {k_max} components but at most {cap} are identifiable; truncating");
        cap
    } else {
        k_max
    };

    let sqrt_w: Vec<f64> = rule.weights().iter().map(|w| w.sqrt()).collect();
    let mut scaled = data.curves.as_slice().to_vec();
    for row in scaled.chunks_exact_mut(p) {
        row.iter_mut().zip(&sqrt_w).for_each(|(x, s)| *x *= s);
    }
    let a = MatRef::from_row_major_slice(&scaled, n, p);
    let inv_n = 1.0 / n as f64;

    // Orthonormal vectors u_j in the scaled coordinates, leading first.
    let (eigenvalues, mut u) = if n <= p {
        let gram = a * a.transpose() * faer::Scale(inv_n);
        let evd = gram
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::DegenerateData(format!("eigendecomposition failed: {e:?}")))?;
        let vals = evd.S().column_vector();
        let vecs = evd.U();
        let mut lambdas = Vec::with_capacity(k);
        let mut u = Mat::<f64>::zeros(p, k);
        for j in 0..k {
            let src = n - 1 - j;
            lambdas.push(vals[src].max(0.0));
            let col = a.transpose() * vecs.col(src);
            for r in 0..p {
                u[(r, j)] = col[r];
            }
        }
        (lambdas, u)
    } else {
        let cov = a.transpose() * a * faer::Scale(inv_n);
        let evd = cov
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::DegenerateData(format!("eigendecomposition failed: {e:?}")))?;
        let vals = evd.S().column_vector();
        let vecs = evd.U();
        let mut lambdas = Vec::with_capacity(k);
        let mut u = Mat::<f64>::zeros(p, k);
        for j in 0..k {
            let src = p - 1 - j;
            lambdas.push(vals[src].max(0.0));
            for r in 0..p {
                u[(r, j)] = vecs[(r, src)];
            }
        }
        (lambdas, u)
    };

    let lead = eigenvalues.first().copied().unwrap_or(0.0);
    let rank = eigenvalues
        .iter()
        .take_while(|&&l| lead > 0.0 && l > RANK_REL_TOL * lead)
        .count();
    orthonormalize_columns(&mut u, rank);

    // Back to eigenfunctions, with the largest-magnitude entry made positive.
    let mut eigenfunctions = CurveMatrix::zeros(k, p);
    for j in 0..k {
        let psi = eigenfunctions.row_mut(j);
        for r in 0..p {
            psi[r] = u[(r, j)] / sqrt_w[r];
        }
        let pivot = psi
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (r, v)| {
                if v.abs() > best.1.abs() {
                    (r, *v)
                } else {
                    best
                }
            })
            .1;
        if pivot < 0.0 {
            psi.iter_mut().for_each(|v| *v = -*v);
            for r in 0..p {
                u[(r, j)] = -u[(r, j)];
            }
        }
    }

    let theta = a * &u;
    let mut scores = CurveMatrix::zeros(n, k);
    for i in 0..n {
        for (j, s) in scores.row_mut(i).iter_mut().enumerate() {
            *s = theta[(i, j)];
        }
    }

    Ok(EigenSystem {
        grid: data.grid,
        rule: rule.clone(),
        eigenvalues,
        eigenfunctions,
        scores,
        rank,
        requested: k_max,
    })
}

/// Modified Gram-Schmidt (two passes) on the columns of `u`. Columns past
/// `rank` carry no reliable direction and are completed with canonical vectors.
fn orthonormalize_columns(u: &mut Mat<f64>, rank: usize) {
    let (p, k) = (u.nrows(), u.ncols());
    let mut next_canonical = 0;
    for j in 0..k {
        let mut attempts = 0;
        loop {
            for _ in 0..2 {
                for l in 0..j {
                    let dot: f64 = (0..p).map(|r| u[(r, l)] * u[(r, j)]).sum();
                    for r in 0..p {
                        u[(r, j)] -= dot * u[(r, l)];
                    }
                }
            }
            let norm: f64 = (0..p).map(|r| u[(r, j)] * u[(r, j)]).sum::<f64>().sqrt();
            if norm > 1e-8 || (j < rank && norm > 0.0) {
                for r in 0..p {
                    u[(r, j)] /= norm;
                }
                break;
            }
            attempts += 1;
            if attempts > p {
                break;
            }
            for r in 0..p {
                u[(r, j)] = 0.0;
            }
            u[(next_canonical % p, j)] = 1.0;
            next_canonical += 1;
        }
    }
}

/// Scores `<curve, psi_j>` of a (centered) curve.
pub fn project_scores(curve: &[f64], eigsys: &EigenSystem) -> Result<Vec<f64>> {
    if curve.len() != eigsys.grid.len() {
        return Err(Error::Dimension(format!(
            "curve has {} values, eigenfunctions have {}",
            curve.len(),
            eigsys.grid.len()
        )));
    }
    Ok((0..eigsys.k())
        .map(|j| eigsys.rule.inner_unchecked(curve, eigsys.eigenfunction(j)))
        .collect())
}

/// `X_i = remainder_i + zeta_i f_hat`, with `zeta_i` the second difference of
/// `X_i` at `t` over half-width `delta` and `f_hat` the regression of `X(s)`
/// on `zeta`.
#[derive(Debug, Clone)]
pub struct LocalVariationDecomposition {
    pub t: f64,
    pub t_index: usize,
    pub delta: f64,
    pub k_delta: usize,
    pub f_hat: Vec<f64>,
    pub zeta: Vec<f64>,
    pub remainder: CurveMatrix,
}

impl LocalVariationDecomposition {
    /// Empirical correlation between `zeta` and the remainder at each grid point.
    /// Points where the remainder has (numerically) no variance report zero.
    pub fn remainder_correlations(&self) -> Vec<f64> {
        let n = self.zeta.len() as f64;
        let zbar = self.zeta.iter().sum::<f64>() / n;
        let zvar = self.zeta.iter().map(|z| (z - zbar).powi(2)).sum::<f64>() / n;
        let means = self.remainder.column_means();
        (0..self.remainder.ncols())
            .map(|s| {
                let mut cov = 0.0;
                let mut var = 0.0;
                for (i, z) in self.zeta.iter().enumerate() {
                    let r = self.remainder.get(i, s) - means[s];
                    cov += (z - zbar) * r;
                    var += r * r;
                }
                cov /= n;
                var /= n;
                if var <= 1e-28 * zvar.max(1e-300) {
                    0.0
                } else {
                    cov / (var * zvar).sqrt()
                }
            })
            .collect()
    }
}

pub fn local_variation_decompose(
    data: &FunctionalDataset,
    t: f64,
    delta: f64,
) -> Result<LocalVariationDecomposition> {
    let grid = &data.grid;
    let n = data.n();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "decomposition needs at least 2 curves, got {n}"
        )));
    }
    let j = grid.snap(t)?;
    let k = ((delta / grid.spacing()).round() as usize).max(1);
    if j < k || j + k >= grid.len() {
        return Err(Error::Window(format!(
            "[t - delta, t + delta] = [{}, {}] leaves the domain",
            grid.point(j) - k as f64 * grid.spacing(),
            grid.point(j) + k as f64 * grid.spacing()
        )));
    }
    let zeta: Vec<f64> = data
        .curves
        .rows()
        .map(|x| x[j] - 0.5 * (x[j - k] + x[j + k]))
        .collect();
    let nf = n as f64;
    let zbar = zeta.iter().sum::<f64>() / nf;
    let zc: Vec<f64> = zeta.iter().map(|z| z - zbar).collect();
    let zvar = zc.iter().map(|z| z * z).sum::<f64>() / nf;
    if zvar < 1e-14 {
        return Err(Error::DegenerateWindow {
            t: grid.point(j),
            variance: zvar,
        });
    }
    let p = data.p();
    let mut f_hat = vec![0.0; p];
    for (x, z) in data.curves.rows().zip(&zc) {
        f_hat.iter_mut().zip(x).for_each(|(f, v)| *f += z * v);
    }
    f_hat.iter_mut().for_each(|f| *f /= nf * zvar);
    let mut remainder = data.curves.clone();
    for (i, z) in zeta.iter().enumerate() {
        remainder
            .row_mut(i)
            .iter_mut()
            .zip(&f_hat)
            .for_each(|(r, f)| *r -= z * f);
    }
    Ok(LocalVariationDecomposition {
        t: grid.point(j),
        t_index: j,
        delta: k as f64 * grid.spacing(),
        k_delta: k,
        f_hat,
        zeta,
        remainder,
    })
}
