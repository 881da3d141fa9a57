//! Discretized `L^2([a, b])` inner product.

use serde::{Deserialize, Serialize};

use crate::data::Grid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureKind {
    #[default]
    Trapezoid,
    /// Equal weights `(b - a) / p`.
    Riemann,
}

/// Nonnegative weights on the grid summing to `b - a`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    kind: QuadratureKind,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(grid: &Grid, kind: QuadratureKind) -> Self {
        let p = grid.len();
        let weights = match kind {
            QuadratureKind::Trapezoid => {
                let h = grid.spacing();
                let mut w = vec![h; p];
                w[0] = 0.5 * h;
                w[p - 1] = 0.5 * h;
                w
            }
            QuadratureKind::Riemann => vec![grid.width() / p as f64; p],
        };
        Self { kind, weights }
    }

    pub fn trapezoid(grid: &Grid) -> Self {
        Self::new(grid, QuadratureKind::Trapezoid)
    }

    pub fn riemann(grid: &Grid) -> Self {
        Self::new(grid, QuadratureKind::Riemann)
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `sum_j w_j f(t_j) g(t_j)`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        if f.len() != self.len() || g.len() != self.len() {
            return Err(Error::Dimension(format!(
                "curves of length {} and {} on a {}-point rule",
                f.len(),
                g.len(),
                self.len()
            )));
        }
        Ok(self.inner_unchecked(f, g))
    }

    pub(crate) fn inner_unchecked(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// `sum_j w_j f(t_j)`.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::Dimension(format!(
                "curve of length {} on a {}-point rule",
                f.len(),
                self.len()
            )));
        }
        Ok(self.weights.iter().zip(f).map(|(w, x)| w * x).sum())
    }
}

/// Free-function form of [`QuadratureRule::inner`].
pub fn quadrature_inner(f: &[f64], g: &[f64], rule: &QuadratureRule) -> Result<f64> {
    rule.inner(f, g)
}
