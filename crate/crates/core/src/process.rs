//! Gaussian process families used as functional covariates: Brownian motion,
//! fractional Brownian motion and the Ornstein-Uhlenbeck process started at zero.
//!
//! All three have a covariance that is non-differentiable on the diagonal,
//! `sigma(t, t) + sigma(t+d, t+d) - 2 sigma(t, t+d) ~ 2 c(t) |d|^kappa`, which is
//! what makes points of impact identifiable.

use faer::{Mat, MatRef, Side};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CurveMatrix, FunctionalDataset, Grid};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Largest grid handled by the dense covariance sampler.
pub const MAX_DENSE_GRID: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    BrownianMotion,
    FractionalBrownian { hurst: f64 },
    OrnsteinUhlenbeck { theta: f64, sigma_u: f64 },
}

/// Local roughness of the covariance at the diagonal. `c` is constant in `t`
/// for every supported family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roughness {
    pub kappa: f64,
    pub c: f64,
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ProcessSpec::BrownianMotion => Ok(()),
            ProcessSpec::FractionalBrownian { hurst } => {
                if hurst > 0.0 && hurst < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!(
                        "Hurst coefficient must lie in (0, 1), got {hurst}"
                    )))
                }
            }
            ProcessSpec::OrnsteinUhlenbeck { theta, sigma_u } => {
                if !(theta.is_finite() && theta > 0.0) {
                    Err(Error::InvalidSpec(format!(
                        "theta must be positive, got {theta}"
                    )))
                } else if !(sigma_u.is_finite() && sigma_u > 0.0) {
                    Err(Error::InvalidSpec(format!(
                        "sigma_u must be positive, got {sigma_u}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// All families start at time zero, so the grid must not extend below it.
    pub fn validate_domain(&self, grid: &Grid) -> Result<()> {
        self.validate()?;
        if grid.a() < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "process is defined on [0, inf), grid starts at {}",
                grid.a()
            )));
        }
        Ok(())
    }

    /// Covariance `sigma(t, s)`. Assumes a validated spec and `t, s >= 0`.
    pub fn covariance(&self, t: f64, s: f64) -> f64 {
        match *self {
            ProcessSpec::BrownianMotion => t.min(s),
            ProcessSpec::FractionalBrownian { hurst } => {
                let e = 2.0 * hurst;
                0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e))
            }
            ProcessSpec::OrnsteinUhlenbeck { theta, sigma_u } => {
                sigma_u * sigma_u / (2.0 * theta)
                    * ((-theta * (t - s).abs()).exp() - (-theta * (t + s)).exp())
            }
        }
    }

    pub fn roughness(&self) -> Roughness {
        match *self {
            ProcessSpec::BrownianMotion => Roughness { kappa: 1.0, c: 0.5 },
            ProcessSpec::FractionalBrownian { hurst } => Roughness {
                kappa: 2.0 * hurst,
                c: 0.5,
            },
            ProcessSpec::OrnsteinUhlenbeck { sigma_u, .. } => Roughness {
                kappa: 1.0,
                c: 0.5 * sigma_u * sigma_u,
            },
        }
    }
}

/// Validated covariance evaluation.
pub fn covariance_eval(spec: &ProcessSpec, t: f64, s: f64) -> Result<f64> {
    spec.validate()?;
    if !(t.is_finite() && s.is_finite()) || t < 0.0 || s < 0.0 {
        return Err(Error::InvalidSpec(format!(
            "covariance arguments must be nonnegative, got ({t}, {s})"
        )));
    }
    Ok(spec.covariance(t, s))
}

pub fn process_kappa_c(spec: &ProcessSpec) -> Result<Roughness> {
    spec.validate()?;
    Ok(spec.roughness())
}

/// Exact Ornstein-Uhlenbeck paths via the AR(1) transition over one grid step.
/// `X(a)` is drawn from the law of the process at time `a` given `X(0) = 0`,
/// which is the point mass at zero when `a = 0`. Row `i` uses stream `i` of `seed`.
pub fn simulate_ou(
    n: usize,
    grid: &Grid,
    theta: f64,
    sigma_u: f64,
    seed: u64,
) -> Result<FunctionalDataset> {
    let spec = ProcessSpec::OrnsteinUhlenbeck { theta, sigma_u };
    spec.validate_domain(grid)?;
    if n == 0 {
        return Err(Error::InsufficientData(
            "at least one curve is required".into(),
        ));
    }
    let p = grid.len();
    let h = grid.spacing();
    let stationary_var = sigma_u * sigma_u / (2.0 * theta);
    let decay = (-theta * h).exp();
    let step_sd = (stationary_var * (1.0 - (-2.0 * theta * h).exp())).sqrt();
    let start_sd = (stationary_var * (1.0 - (-2.0 * theta * grid.a()).exp())).sqrt();

    let mut curves = CurveMatrix::zeros(n, p);
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        let row = curves.row_mut(i);
        let z0: f64 = StandardNormal.sample(&mut rng);
        row[0] = start_sd * z0;
        for j in 1..p {
            let z: f64 = StandardNormal.sample(&mut rng);
            row[j] = decay * row[j - 1] + step_sd * z;
        }
    }
    FunctionalDataset::new(*grid, curves, None)
}

/// Exact sampler from the Cholesky factor of the grid covariance matrix.
#[derive(Debug, Clone)]
pub struct CovarianceSampler {
    grid: Grid,
    spec: ProcessSpec,
    factor: Mat<f64>,
    ridge: Option<f64>,
}

impl CovarianceSampler {
    pub fn new(grid: &Grid, spec: &ProcessSpec) -> Result<Self> {
        spec.validate_domain(grid)?;
        let p = grid.len();
        if p > MAX_DENSE_GRID {
            return Err(Error::InvalidSpec(format!(
                "dense covariance sampling supports at most {MAX_DENSE_GRID} grid points, got {p}"
            )));
        }
        let t = grid.points();
        let mut cov = Mat::<f64>::from_fn(p, p, |i, j| spec.covariance(t[i], t[j]));
        let (factor, ridge) = match cov.llt(Side::Lower) {
            Ok(llt) => (llt.L().to_owned(), None),
            Err(_) => {
                // Zero-variance points (the process at time zero) make the matrix
                // only semidefinite.
                let trace: f64 = (0..p).map(|j| cov[(j, j)]).sum();
                let ridge = 1e-12 * trace / p as f64;
                for j in 0..p {
                    cov[(j, j)] += ridge;
                }
                match cov.llt(Side::Lower) {
                    Ok(llt) => {
                        log::warn!("covariance factorization needed a diagonal ridge of {ridge:e}");
                        (llt.L().to_owned(), Some(ridge))
                    }
                    Err(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot {
                        index,
                    }) => {
                        return Err(Error::Factorization {
                            index,
                            t: t[index],
                            diagonal: cov[(index, index)],
                        })
                    }
                }
            }
        };
        Ok(Self {
            grid: *grid,
            spec: *spec,
            factor,
            ridge,
        })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    /// Diagonal ridge added to obtain a factorization, if any.
    pub fn ridge(&self) -> Option<f64> {
        self.ridge
    }

    /// `n` i.i.d. paths; row `i` is driven by stream `i` of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<FunctionalDataset> {
        if n == 0 {
            return Err(Error::InsufficientData(
                "at least one curve is required".into(),
            ));
        }
        let p = self.grid.len();
        let mut noise = vec![0.0; n * p];
        for (i, row) in noise.chunks_exact_mut(p).enumerate() {
            let mut rng = stream_rng(seed, i as u64);
            for v in row.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
        }
        let xi = MatRef::from_row_major_slice(&noise, n, p);
        let paths = xi * self.factor.transpose();
        let mut curves = CurveMatrix::zeros(n, p);
        for i in 0..n {
            for (j, v) in curves.row_mut(i).iter_mut().enumerate() {
                *v = paths[(i, j)];
            }
        }
        FunctionalDataset::new(self.grid, curves, None)
    }
}

pub fn simulate_from_covariance(
    n: usize,
    grid: &Grid,
    spec: &ProcessSpec,
    seed: u64,
) -> Result<FunctionalDataset> {
    CovarianceSampler::new(grid, spec)?.sample(n, seed)
}

/// Dispatches to the exact recursion for OU and the covariance factor otherwise.
pub fn simulate(n: usize, grid: &Grid, spec: &ProcessSpec, seed: u64) -> Result<FunctionalDataset> {
    match *spec {
        ProcessSpec::OrnsteinUhlenbeck { theta, sigma_u } => {
            simulate_ou(n, grid, theta, sigma_u, seed)
        }
        _ => simulate_from_covariance(n, grid, spec, seed),
    }
}
