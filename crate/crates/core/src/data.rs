//! Grids and sampled curve collections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equidistant grid `t_j = a + j (b - a) / (p - 1)`, `j = 0..p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    a: f64,
    b: f64,
    p: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, p: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidSpec(format!(
                "grid bounds must be finite with b > a, got [{a}, {b}]"
            )));
        }
        if p < 3 {
            return Err(Error::InvalidSpec(format!(
                "grid needs at least 3 points, got {p}"
            )));
        }
        Ok(Self { a, b, p })
    }

    /// Grid over `[0, 1]`.
    pub fn unit(p: usize) -> Result<Self> {
        Self::new(0.0, 1.0, p)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.p - 1) as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        if j + 1 == self.p {
            self.b
        } else {
            let m = (self.p - 1) as f64;
            (self.a * (m - j as f64) + self.b * j as f64) / m
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.p).map(|j| self.point(j)).collect()
    }

    /// Index of the grid point closest to `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let x = ((t - self.a) / self.spacing()).round();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.p - 1)
        }
    }

    /// Snaps `t` to its nearest grid point. Locations more than half a step
    /// away from every grid point are rejected; inexact snaps are logged.
    pub fn snap(&self, t: f64) -> Result<usize> {
        let h = self.spacing();
        if !t.is_finite() || t < self.a - 0.5 * h || t > self.b + 0.5 * h {
            return Err(Error::Location { tau: t });
        }
        let j = self.nearest_index(t);
        let dist = (self.point(j) - t).abs();
        if dist > 0.5 * h * (1.0 + 1e-12) {
            return Err(Error::Location { tau: t });
        }
        if dist > 1e-9 * h {
            log::warn!("location {t} snapped to grid point {}", self.point(j));
        }
        Ok(j)
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.p == other.p
            && (self.a - other.a).abs() <= 1e-12 * self.width()
            && (self.b - other.b).abs() <= 1e-12 * self.width()
    }
}

/// Dense row-major matrix; row `i` holds one curve sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl CurveMatrix {
    pub fn new(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension("rows have unequal lengths".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), ncols, data)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.ncols.max(1)).take(self.nrows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.ncols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Self {
            nrows: rows.len(),
            ncols: self.ncols,
            data,
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.ncols];
        for row in self.rows() {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        let n = self.nrows as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }
}

/// `n` curves observed on a shared grid, with optional scalar responses.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDataset {
    pub grid: Grid,
    pub curves: CurveMatrix,
    pub responses: Option<Vec<f64>>,
    pub centered: bool,
}

impl FunctionalDataset {
    pub fn new(grid: Grid, curves: CurveMatrix, responses: Option<Vec<f64>>) -> Result<Self> {
        if curves.ncols() != grid.len() {
            return Err(Error::Dimension(format!(
                "curves have {} columns but the grid has {} points",
                curves.ncols(),
                grid.len()
            )));
        }
        if let Some(y) = &responses {
            if y.len() != curves.nrows() {
                return Err(Error::Dimension(format!(
                    "{} responses for {} curves",
                    y.len(),
                    curves.nrows()
                )));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format("non-finite response".into()));
            }
        }
        if curves.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite curve value".into()));
        }
        Ok(Self {
            grid,
            curves,
            responses,
            centered: false,
        })
    }

    pub fn n(&self) -> usize {
        self.curves.nrows()
    }

    pub fn p(&self) -> usize {
        self.curves.ncols()
    }

    pub fn with_responses(mut self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::Dimension(format!(
                "{} responses for {} curves",
                y.len(),
                self.n()
            )));
        }
        self.responses = Some(y);
        Ok(self)
    }

    pub fn responses(&self) -> Result<&[f64]> {
        self.responses.as_deref().ok_or(Error::MissingResponse)
    }

    /// Subset of cases, keeping the grid. The centered flag is dropped.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            grid: self.grid,
            curves: self.curves.select_rows(rows),
            responses: self
                .responses
                .as_ref()
                .map(|y| rows.iter().map(|&i| y[i]).collect()),
            centered: false,
        }
    }
}
