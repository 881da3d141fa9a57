//! Scalar responses from the points-of-impact model
//! `Y = int beta(t) X(t) dt + sum_r beta_r X(tau_r) + eps`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{FunctionalDataset, Grid};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::rng::stream_rng;

/// Slope function of the integral term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlopeFunction {
    #[default]
    Zero,
    /// `sum_k coefficients[k] t^k`.
    Polynomial { coefficients: Vec<f64> },
    /// Values on the grid.
    Sampled { values: Vec<f64> },
}

impl SlopeFunction {
    pub fn is_zero(&self) -> bool {
        match self {
            SlopeFunction::Zero => true,
            SlopeFunction::Polynomial { coefficients } => coefficients.iter().all(|c| *c == 0.0),
            SlopeFunction::Sampled { values } => values.iter().all(|c| *c == 0.0),
        }
    }

    pub fn on_grid(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            SlopeFunction::Zero => Ok(vec![0.0; grid.len()]),
            SlopeFunction::Polynomial { coefficients } => Ok(grid
                .points()
                .iter()
                .map(|&t| coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c))
                .collect()),
            SlopeFunction::Sampled { values } => {
                if values.len() != grid.len() {
                    Err(Error::Dimension(format!(
                        "sampled slope has {} values, grid has {}",
                        values.len(),
                        grid.len()
                    )))
                } else {
                    Ok(values.clone())
                }
            }
        }
    }
}

/// Ground-truth generator for responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactModelSpec {
    pub taus: Vec<f64>,
    pub betas: Vec<f64>,
    #[serde(default)]
    pub slope: SlopeFunction,
    pub noise_sd: f64,
}

impl ImpactModelSpec {
    /// Two impacts at 0.25 and 0.75 with coefficients 2 and 1, unit noise; with
    /// `smooth_slope` the integral term uses `3.5t^3 - 5.5t^2 + 3t + 0.5`.
    pub fn two_impact_design(smooth_slope: bool) -> Self {
        Self {
            taus: vec![0.25, 0.75],
            betas: vec![2.0, 1.0],
            slope: if smooth_slope {
                SlopeFunction::Polynomial {
                    coefficients: vec![0.5, 3.0, -5.5, 3.5],
                }
            } else {
                SlopeFunction::Zero
            },
            noise_sd: 1.0,
        }
    }

    pub fn num_impacts(&self) -> usize {
        self.taus.len()
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.taus.len() != self.betas.len() {
            return Err(Error::InvalidSpec(format!(
                "{} impact locations but {} coefficients",
                self.taus.len(),
                self.betas.len()
            )));
        }
        if self.taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec(
                "impact locations must be strictly increasing".into(),
            ));
        }
        if let Some(t) = self.taus.iter().find(|&&t| !(t > grid.a() && t < grid.b())) {
            return Err(Error::InvalidSpec(format!(
                "impact location {t} outside the open interval ({}, {})",
                grid.a(),
                grid.b()
            )));
        }
        if self.betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidSpec("non-finite impact coefficient".into()));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise standard deviation must be nonnegative, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }

    /// Grid indices of the impact locations.
    pub fn impact_indices(&self, grid: &Grid) -> Result<Vec<usize>> {
        self.taus.iter().map(|&t| grid.snap(t)).collect()
    }
}

/// Responses for every curve. Noise for case `i` comes from stream `i` of `seed`.
pub fn generate_response(
    data: &FunctionalDataset,
    spec: &ImpactModelSpec,
    rule: &QuadratureRule,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate(&data.grid)?;
    if rule.len() != data.p() {
        return Err(Error::Dimension(format!(
            "quadrature rule has {} weights, grid has {} points",
            rule.len(),
            data.p()
        )));
    }
    let idx = spec.impact_indices(&data.grid)?;
    let slope = spec.slope.on_grid(&data.grid)?;
    let has_slope = !spec.slope.is_zero();
    let y = data
        .curves
        .rows()
        .enumerate()
        .map(|(i, x)| {
            let mut v = if has_slope {
                rule.inner_unchecked(&slope, x)
            } else {
                0.0
            };
            for (&j, b) in idx.iter().zip(&spec.betas) {
                v += b * x[j];
            }
            if spec.noise_sd > 0.0 {
                let z: f64 = StandardNormal.sample(&mut stream_rng(seed, i as u64));
                v += spec.noise_sd * z;
            }
            v
        })
        .collect();
    Ok(y)
}
