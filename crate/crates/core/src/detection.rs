//! Detection of points of impact.
//!
//! For a window half-width `delta = k h` the second difference
//! `Z_i(t) = X_i(t) - (X_i(t - delta) + X_i(t + delta)) / 2` isolates the local
//! variation of `X_i` at `t`. Its empirical covariance with `Y` peaks near
//! points of impact. Candidates are picked greedily by `|mean(Z Y)|`, removing a
//! neighbourhood of each pick, and the number of impacts is read off where the
//! normalized statistic first drops below the cut-off.

use serde::{Deserialize, Serialize};

use crate::data::{CurveMatrix, FunctionalDataset, Grid};
use crate::error::{Error, Result};

/// Neighbourhood removed around each selected candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// Radius `sqrt(delta) / 2`.
    #[default]
    SqrtDelta,
    /// Radius `delta |log delta|`.
    DeltaLogDelta,
}

impl Exclusion {
    pub fn radius(&self, delta: f64) -> f64 {
        match self {
            Exclusion::SqrtDelta => 0.5 * delta.sqrt(),
            Exclusion::DeltaLogDelta => delta * delta.ln().abs(),
        }
    }
}

/// Default multiplier of the cut-off.
pub const DEFAULT_CUTOFF_A: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub delta: f64,
    #[serde(default)]
    pub exclusion: Exclusion,
    #[serde(default = "default_a")]
    pub cutoff_a: f64,
    #[serde(default)]
    pub max_candidates: Option<usize>,
}

fn default_a() -> f64 {
    DEFAULT_CUTOFF_A
}

impl DetectionConfig {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            exclusion: Exclusion::SqrtDelta,
            cutoff_a: DEFAULT_CUTOFF_A,
            max_candidates: None,
        }
    }

    /// `delta = (b - a) / sqrt(n)`.
    pub fn for_sample_size(n: usize, grid: &Grid) -> Self {
        Self::new(default_delta(n, grid))
    }

    pub fn with_exclusion(mut self, exclusion: Exclusion) -> Self {
        self.exclusion = exclusion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Window(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !self.cutoff_a.is_finite() || self.cutoff_a <= std::f64::consts::SQRT_2 {
            return Err(Error::InvalidSpec(format!(
                "cut-off multiplier must exceed sqrt(2), got {}",
                self.cutoff_a
            )));
        }
        if self.max_candidates == Some(0) {
            return Err(Error::InvalidSpec(
                "max_candidates must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Cap on the number of candidates: the explicit one, or `floor((b - a) / (sqrt(delta) / 2))`.
    pub fn candidate_cap(&self, grid: &Grid, delta: f64) -> usize {
        self.max_candidates
            .unwrap_or_else(|| ((grid.width() / (0.5 * delta.sqrt())).floor() as usize).max(1))
    }
}

pub fn default_delta(n: usize, grid: &Grid) -> f64 {
    grid.width() / (n.max(1) as f64).sqrt()
}

/// A window half-width expressed on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub k_delta: usize,
    pub delta: f64,
}

/// Rounds `delta` to the nearest positive multiple of the grid step.
pub fn resolve_window(grid: &Grid, delta: f64) -> Result<Window> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Window(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let h = grid.spacing();
    let k = ((delta / h).round() as usize).max(1);
    check_window(grid, k)?;
    let resolved = k as f64 * h;
    if (resolved - delta).abs() > 1e-9 * h {
        log::debug!("delta {delta} rounded to {resolved} ({k} grid steps)");
    }
    Ok(Window {
        k_delta: k,
        delta: resolved,
    })
}

fn check_window(grid: &Grid, k: usize) -> Result<()> {
    if k == 0 || 2 * k >= grid.len() - 1 {
        return Err(Error::Window(format!(
            "window of {k} grid steps leaves no admissible points on a {}-point grid",
            grid.len()
        )));
    }
    Ok(())
}

/// `Z` evaluated on the admissible grid indices `k..=p-1-k`.
#[derive(Debug, Clone)]
pub struct ZMatrix {
    pub window: Window,
    /// `n x |J|`; column `c` belongs to grid index `window.k_delta + c`.
    pub values: CurveMatrix,
}

impl ZMatrix {
    pub fn grid_index(&self, column: usize) -> usize {
        self.window.k_delta + column
    }
}

fn second_difference_row(x: &[f64], k: usize, out: &mut [f64]) {
    for (c, z) in out.iter_mut().enumerate() {
        let j = k + c;
        *z = x[j] - 0.5 * (x[j - k] + x[j + k]);
    }
}

pub fn z_delta(data: &FunctionalDataset, delta: f64) -> Result<ZMatrix> {
    let window = resolve_window(&data.grid, delta)?;
    z_for_window(data, window)
}

fn z_for_window(data: &FunctionalDataset, window: Window) -> Result<ZMatrix> {
    let k = window.k_delta;
    let cols = data.p() - 2 * k;
    let mut values = CurveMatrix::zeros(data.n(), cols);
    for i in 0..data.n() {
        second_difference_row(data.curves.row(i), k, values.row_mut(i));
    }
    Ok(ZMatrix { window, values })
}

/// Column statistics `(1/n) sum_i Z_ij Y_i` and `(1/n) sum_i Z_ij^2`.
fn column_moments(data: &FunctionalDataset, y: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let cols = data.p() - 2 * k;
    let mut cross = vec![0.0; cols];
    let mut square = vec![0.0; cols];
    let mut z = vec![0.0; cols];
    for (x, yi) in data.curves.rows().zip(y) {
        second_difference_row(x, k, &mut z);
        for c in 0..cols {
            cross[c] += z[c] * yi;
            square[c] += z[c] * z[c];
        }
    }
    let inv_n = 1.0 / data.n() as f64;
    cross.iter_mut().for_each(|v| *v *= inv_n);
    square.iter_mut().for_each(|v| *v *= inv_n);
    (cross, square)
}

fn normalize(raw: f64, second_moment: f64) -> f64 {
    if second_moment > 0.0 {
        raw / second_moment.sqrt()
    } else {
        0.0
    }
}

/// Statistic values along the admissible grid.
#[derive(Debug, Clone, Serialize)]
pub struct StatisticProfile {
    pub window: Window,
    pub locations: Vec<f64>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

pub fn statistic_profile(data: &FunctionalDataset, delta: f64) -> Result<StatisticProfile> {
    let y = data.responses()?;
    let window = resolve_window(&data.grid, delta)?;
    let (raw, square) = column_moments(data, y, window.k_delta);
    let normalized = raw
        .iter()
        .zip(&square)
        .map(|(r, s)| normalize(*r, *s))
        .collect();
    let locations = (0..raw.len())
        .map(|c| data.grid.point(window.k_delta + c))
        .collect();
    Ok(StatisticProfile {
        window,
        locations,
        raw,
        normalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub location: f64,
    pub grid_index: usize,
    /// `(1/n) sum_i Z_i(tau) Y_i`.
    pub raw: f64,
    /// `raw / sqrt((1/n) sum_i Z_i(tau)^2)`.
    pub normalized: f64,
    /// 1-based selection step.
    pub iteration: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateList {
    pub window: Window,
    pub radius: f64,
    pub candidates: Vec<Candidate>,
}

impl CandidateList {
    pub fn locations(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.location).collect()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Grid distance `|j - l| h` between two indices.
pub fn index_distance(grid: &Grid, j: usize, l: usize) -> f64 {
    j.abs_diff(l) as f64 * grid.spacing()
}

pub fn detect_candidates(
    data: &FunctionalDataset,
    config: &DetectionConfig,
) -> Result<CandidateList> {
    if !data.centered {
        return Err(Error::NotCentered("candidate detection"));
    }
    config.validate()?;
    let y = data.responses()?;
    let window = resolve_window(&data.grid, config.delta)?;
    let k = window.k_delta;
    let (raw, square) = column_moments(data, y, k);
    let radius = config.exclusion.radius(window.delta);
    let cap = config.candidate_cap(&data.grid, window.delta);

    let mut alive = vec![true; raw.len()];
    let mut remaining = raw.len();
    let mut candidates = Vec::new();
    while remaining > 0 && candidates.len() < cap {
        let mut best: Option<usize> = None;
        for (c, r) in raw.iter().enumerate() {
            if alive[c] && best.is_none_or(|b| r.abs() > raw[b].abs()) {
                best = Some(c);
            }
        }
        let Some(pick) = best else { break };
        let j = k + pick;
        candidates.push(Candidate {
            location: data.grid.point(j),
            grid_index: j,
            raw: raw[pick],
            normalized: normalize(raw[pick], square[pick]),
            iteration: candidates.len() + 1,
        });
        for (c, a) in alive.iter_mut().enumerate() {
            if *a && (c == pick || index_distance(&data.grid, k + c, j) < radius) {
                *a = false;
                remaining -= 1;
            }
        }
    }
    Ok(CandidateList {
        window,
        radius,
        candidates,
    })
}

/// `A sqrt(Var(Y) / n * log((b - a) / delta))` with the unbiased sample variance.
pub fn default_cutoff(responses: &[f64], width: f64, delta: f64, cutoff_a: f64) -> Result<f64> {
    let n = responses.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "the cut-off needs at least 2 responses, got {n}"
        )));
    }
    if !(delta > 0.0 && delta < width) {
        return Err(Error::Window(format!(
            "delta {delta} must lie strictly between 0 and the domain width {width}"
        )));
    }
    let nf = n as f64;
    let mean = responses.iter().sum::<f64>() / nf;
    let var = responses.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(cutoff_a * (var / nf * (width / delta).ln()).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub s_hat: usize,
    pub locations: Vec<f64>,
    /// False when no candidate fell below the cut-off; `s_hat` then counts all candidates.
    pub crossed: bool,
}

/// Number of candidates before the first normalized statistic below `lambda`.
/// A statistic of exactly zero carries no signal and also stops the count.
pub fn threshold_select(candidates: &CandidateList, lambda: f64) -> Threshold {
    let first_below = candidates
        .candidates
        .iter()
        .position(|c| c.normalized.abs() < lambda || c.normalized == 0.0);
    let s_hat = first_below.unwrap_or(candidates.len());
    Threshold {
        s_hat,
        locations: candidates.candidates[..s_hat]
            .iter()
            .map(|c| c.location)
            .collect(),
        crossed: first_below.is_some(),
    }
}

/// Rounds `delta` to the nearest even multiple (at least 2) of the grid step.
pub fn resolve_even_window(grid: &Grid, delta: f64) -> Result<Window> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Window(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let h = grid.spacing();
    let k = (2 * ((delta / (2.0 * h)).round() as usize)).max(2);
    check_window(grid, k)?;
    Ok(Window {
        k_delta: k,
        delta: k as f64 * h,
    })
}

/// Roughness exponent estimate `log2(sum Z_delta^2 / sum Z_{delta/2}^2)`, both
/// sums running over the admissible indices of the wider window.
pub fn estimate_kappa(data: &FunctionalDataset, delta: f64) -> Result<f64> {
    let window = resolve_even_window(&data.grid, delta)?;
    let k = window.k_delta;
    let half = k / 2;
    let p = data.p();
    let (mut wide, mut narrow, mut scale) = (0.0, 0.0, 0.0);
    for x in data.curves.rows() {
        for j in k..p - k {
            scale += x[j] * x[j];
            let zw = x[j] - 0.5 * (x[j - k] + x[j + k]);
            let zn = x[j] - 0.5 * (x[j - half] + x[j + half]);
            wide += zw * zw;
            narrow += zn * zn;
        }
    }
    // Rounding noise on affine curves sits near 1e-32 relative to the curve energy.
    let floor = 1e-24 * scale;
    if !(narrow > floor && wide > floor) {
        return Err(Error::DegenerateData(format!(
            "second differences vanish (sums {wide:e} and {narrow:e})"
        )));
    }
    Ok((wide / narrow).log2())
}

/// Everything the detection stage reports.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionResult {
    pub delta: f64,
    pub k_delta: usize,
    pub exclusion: Exclusion,
    pub exclusion_radius: f64,
    pub cutoff_a: f64,
    pub cutoff_lambda: f64,
    pub candidates: Vec<Candidate>,
    pub s_hat: usize,
    pub locations: Vec<f64>,
    pub cutoff_crossed: bool,
    pub kappa_hat: Option<f64>,
}

/// Candidate search, cut-off rule and roughness estimate on centered data.
pub fn run_detection(
    data: &FunctionalDataset,
    config: &DetectionConfig,
) -> Result<DetectionResult> {
    let list = detect_candidates(data, config)?;
    let lambda = default_cutoff(
        data.responses()?,
        data.grid.width(),
        list.window.delta,
        config.cutoff_a,
    )?;
    let threshold = threshold_select(&list, lambda);
    let kappa_hat = estimate_kappa(data, list.window.delta).ok();
    Ok(DetectionResult {
        delta: list.window.delta,
        k_delta: list.window.k_delta,
        exclusion: config.exclusion,
        exclusion_radius: list.radius,
        cutoff_a: config.cutoff_a,
        cutoff_lambda: lambda,
        candidates: list.candidates,
        s_hat: threshold.s_hat,
        locations: threshold.locations,
        cutoff_crossed: threshold.crossed,
        kappa_hat,
    })
}
