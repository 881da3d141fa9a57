//! Least squares for the points-of-impact model.
//!
//! The augmented model regresses centered responses on the first `k` principal
//! component scores and on the curve values at the estimated impact points.
//! Model size is chosen by BIC over nested score blocks crossed with subsets of
//! the candidate impact points.

use itertools::Itertools;
use serde::Serialize;

use crate::data::FunctionalDataset;
use crate::detection::{detect_candidates, DetectionConfig};
use crate::error::{Error, Result};
use crate::fpca::{center, DataMeans, EigenSystem};
use crate::linalg::{lstsq, lstsq_rss, HouseholderQr};

/// Largest number of least-squares fits a subset search may run.
pub const MAX_SUBSET_FITS: u128 = 1 << 20;

pub const DEFAULT_K_MAX: usize = 6;
pub const DEFAULT_MAX_VARS: usize = 6;

/// `n log(rss / n) + s log n`; an exact fit scores negative infinity.
pub fn bic_score(rss: f64, n: usize, s_params: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "BIC needs n >= 2, got {n}"
        )));
    }
    if !rss.is_finite() || rss < 0.0 {
        return Err(Error::InvalidSpec(format!(
            "residual sum of squares {rss} is invalid"
        )));
    }
    if rss == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let nf = n as f64;
    Ok(nf * (rss / nf).ln() + s_params as f64 * nf.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactOnlyFit {
    pub taus: Vec<f64>,
    pub beta_hats: Vec<f64>,
    pub rss: f64,
    pub sigma2_hat: Option<f64>,
}

/// `rss / (n - params - 1)` when the denominator is positive.
fn residual_variance(rss: f64, n: usize, params: usize) -> Option<f64> {
    (n > params + 1).then(|| rss / (n - params - 1) as f64)
}

fn require_centered(data: &FunctionalDataset, what: &'static str) -> Result<()> {
    if data.centered {
        Ok(())
    } else {
        Err(Error::NotCentered(what))
    }
}

fn snap_all(data: &FunctionalDataset, taus: &[f64]) -> Result<Vec<usize>> {
    taus.iter().map(|&t| data.grid.snap(t)).collect()
}

/// Least squares of centered `Y` on `X(tau_1), ..., X(tau_S)`.
pub fn fit_impact_only(data: &FunctionalDataset, tau_hats: &[f64]) -> Result<ImpactOnlyFit> {
    require_centered(data, "impact-only least squares")?;
    let y = data.responses()?;
    let idx = snap_all(data, tau_hats)?;
    let n = data.n();
    let mut design = Vec::with_capacity(n * idx.len());
    for &j in &idx {
        design.extend(data.curves.rows().map(|x| x[j]));
    }
    let ls = lstsq(design, n, idx.len(), y)?;
    Ok(ImpactOnlyFit {
        taus: idx.iter().map(|&j| data.grid.point(j)).collect(),
        beta_hats: ls.coef,
        rss: ls.rss,
        sigma2_hat: residual_variance(ls.rss, n, idx.len()),
    })
}

/// Joint fit on `k` scores and `S` impact points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentedFit {
    pub n: usize,
    pub k: usize,
    pub selected_taus: Vec<f64>,
    pub selected_indices: Vec<usize>,
    pub alpha_hat: Vec<f64>,
    pub beta_hat_impacts: Vec<f64>,
    /// `sum_j alpha_j psi_j` on the grid.
    pub beta_hat_curve: Vec<f64>,
    pub rss: f64,
    /// Negative infinity (serialized as null) for an exact fit.
    pub bic: f64,
    pub exact_fit: bool,
    pub sigma2_hat: Option<f64>,
}

impl AugmentedFit {
    pub fn num_impacts(&self) -> usize {
        self.selected_indices.len()
    }
}

/// Score columns for `k` components followed by curve values at `indices`, column-major.
fn design_columns(scores: &[Vec<f64>], curves: &FunctionalDataset, indices: &[usize]) -> Vec<f64> {
    let mut design = Vec::with_capacity(curves.n() * (scores.len() + indices.len()));
    for col in scores {
        design.extend_from_slice(col);
    }
    for &j in indices {
        design.extend(curves.curves.rows().map(|x| x[j]));
    }
    design
}

fn assemble_fit(
    data: &FunctionalDataset,
    eigsys: &EigenSystem,
    indices: &[usize],
    k: usize,
    coef: Vec<f64>,
    rss: f64,
) -> Result<AugmentedFit> {
    let n = data.n();
    let (alpha, beta) = coef.split_at(k);
    let mut curve = vec![0.0; data.p()];
    for (j, a) in alpha.iter().enumerate() {
        for (c, psi) in curve.iter_mut().zip(eigsys.eigenfunction(j)) {
            *c += a * psi;
        }
    }
    let params = k + indices.len();
    Ok(AugmentedFit {
        n,
        k,
        selected_taus: indices.iter().map(|&j| data.grid.point(j)).collect(),
        selected_indices: indices.to_vec(),
        alpha_hat: alpha.to_vec(),
        beta_hat_impacts: beta.to_vec(),
        beta_hat_curve: curve,
        rss,
        bic: bic_score(rss, n, params)?,
        exact_fit: rss == 0.0,
        sigma2_hat: residual_variance(rss, n, params),
    })
}

fn check_basis(data: &FunctionalDataset, eigsys: &EigenSystem, k: usize) -> Result<()> {
    if !data.grid.same_as(eigsys.grid()) {
        return Err(Error::Dimension(
            "data and eigenfunctions live on different grids".into(),
        ));
    }
    if k > eigsys.k() {
        return Err(Error::InvalidSpec(format!(
            "{k} components requested, {} available",
            eigsys.k()
        )));
    }
    Ok(())
}

fn check_size(n: usize, params: usize) -> Result<()> {
    if params + 1 > n {
        return Err(Error::InsufficientData(format!(
            "{params} regressors need more than {n} cases"
        )));
    }
    Ok(())
}

fn fit_indices(
    data: &FunctionalDataset,
    eigsys: &EigenSystem,
    indices: &[usize],
    k: usize,
) -> Result<AugmentedFit> {
    let y = data.responses()?;
    let scores = eigsys.scores();
    if scores.nrows() != data.n() {
        return Err(Error::Dimension(format!(
            "{} score rows for {} cases",
            scores.nrows(),
            data.n()
        )));
    }
    check_size(data.n(), k + indices.len())?;
    let cols: Vec<Vec<f64>> = (0..k).map(|j| scores.column(j)).collect();
    let design = design_columns(&cols, data, indices);
    let ls = lstsq(design, data.n(), k + indices.len(), y)?;
    assemble_fit(data, eigsys, indices, k, ls.coef, ls.rss)
}

/// Least squares of centered `Y` on the first `k` scores of `eigsys` and `X(tau_hat_r)`.
/// `eigsys` must come from the same centered data.
pub fn fit_augmented(
    data: &FunctionalDataset,
    eigsys: &EigenSystem,
    tau_hats: &[f64],
    k: usize,
) -> Result<AugmentedFit> {
    require_centered(data, "augmented least squares")?;
    check_basis(data, eigsys, k)?;
    let idx = snap_all(data, tau_hats)?;
    fit_indices(data, eigsys, &idx, k)
}

/// Refits coefficients on (uncentered) data while holding the eigenfunctions and
/// impact locations fixed. Returns the fit together with the centering means.
pub fn fit_fixed_basis(
    data: &FunctionalDataset,
    eigsys: &EigenSystem,
    indices: &[usize],
    k: usize,
) -> Result<(AugmentedFit, DataMeans)> {
    check_basis(data, eigsys, k)?;
    let c = center(data)?;
    let y = c.data.responses()?;
    let n = c.data.n();
    check_size(n, k + indices.len())?;
    let rule = eigsys.rule();
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            c.data
                .curves
                .rows()
                .map(|x| rule.inner_unchecked(x, eigsys.eigenfunction(j)))
                .collect()
        })
        .collect();
    let design = design_columns(&cols, &c.data, indices);
    let ls = lstsq(design, n, k + indices.len(), y)?;
    let fit = assemble_fit(&c.data, eigsys, indices, k, ls.coef, ls.rss)?;
    Ok((fit, c.means))
}

/// `mean_Y + sum_j alpha_j <X - mean_X, psi_j> + sum_r beta_r (X(tau_r) - mean_X(tau_r))`.
pub fn predict(
    fit: &AugmentedFit,
    eigsys: &EigenSystem,
    curves: &FunctionalDataset,
    means: &DataMeans,
) -> Result<Vec<f64>> {
    if !curves.grid.same_as(eigsys.grid()) || means.curves.len() != curves.p() {
        return Err(Error::Dimension(
            "prediction curves are on a different grid".into(),
        ));
    }
    check_basis(curves, eigsys, fit.k)?;
    let y_mean = means.response.unwrap_or(0.0);
    let rule = eigsys.rule();
    let mut diff = vec![0.0; curves.p()];
    Ok(curves
        .curves
        .rows()
        .map(|x| {
            for ((d, v), m) in diff.iter_mut().zip(x).zip(&means.curves) {
                *d = v - m;
            }
            let mut yhat = y_mean;
            for (j, a) in fit.alpha_hat.iter().enumerate() {
                yhat += a * rule.inner_unchecked(&diff, eigsys.eigenfunction(j));
            }
            for (&j, b) in fit.selected_indices.iter().zip(&fit.beta_hat_impacts) {
                yhat += b * diff[j];
            }
            yhat
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetSearchResult {
    pub best_fit: AugmentedFit,
    /// Smallest BIC among fits with `s` regressors, `s = 0..=max_vars`.
    pub best_bic_by_size: Vec<Option<f64>>,
    pub delta: Option<f64>,
    pub candidate_pool: Vec<f64>,
    pub fits_evaluated: usize,
    pub singular_skipped: usize,
}

/// Number of fits in an exhaustive search over score blocks `0..=k_max`
/// crossed with impact subsets of a pool of `m`, total size at most `max_vars`.
pub fn subset_count(k_max: usize, m: usize, max_vars: usize) -> u128 {
    let mut total: u128 = 0;
    for k in 0..=k_max.min(max_vars) {
        let mut c: u128 = 1;
        for s in 0..=(max_vars - k).min(m) {
            if s > 0 {
                c = c * (m - s + 1) as u128 / s as u128;
            }
            total = total.saturating_add(c);
        }
    }
    total
}

/// Total order used to break BIC ties: score block size, then grid indices.
type SubsetKey = (usize, Vec<usize>);

struct Best {
    bic: f64,
    key: SubsetKey,
}

fn better(bic: f64, key: &SubsetKey, best: &Option<Best>) -> bool {
    match best {
        None => true,
        Some(b) => bic < b.bic || (bic == b.bic && *key < b.key),
    }
}

/// Exhaustive BIC search over nested score blocks `1..k` (`k <= k_max`) crossed
/// with subsets of the candidate impact points, at most `max_vars` regressors.
pub fn best_subset_bic(
    data: &FunctionalDataset,
    eigsys: &EigenSystem,
    candidate_taus: &[f64],
    k_max: usize,
    max_vars: usize,
) -> Result<SubsetSearchResult> {
    require_centered(data, "subset selection")?;
    let y = data.responses()?;
    let n = data.n();
    let k_max = k_max.min(eigsys.k()).min(max_vars);
    check_basis(data, eigsys, k_max)?;
    let mut pool = snap_all(data, candidate_taus)?;
    let mut seen = std::collections::HashSet::new();
    pool.retain(|j| seen.insert(*j));
    let m = pool.len();
    let required = subset_count(k_max, m, max_vars);
    if required > MAX_SUBSET_FITS {
        return Err(Error::Budget {
            required,
            budget: MAX_SUBSET_FITS,
        });
    }
    let scores = eigsys.scores();
    let score_cols: Vec<Vec<f64>> = (0..k_max).map(|j| scores.column(j)).collect();
    let q = k_max + m;

    // Every subset regression is a regression on columns of the full pool, so
    // with A = QR it reduces to a q-row problem on the columns of R.
    let reduced = (n >= q && q > 0).then(|| {
        let full = design_columns(&score_cols, data, &pool);
        let qr = HouseholderQr::new(full, n, q);
        let mut z = y.to_vec();
        qr.apply_qt(&mut z);
        let base: f64 = z[q..].iter().map(|v| v * v).sum();
        z.truncate(q);
        (qr.r_square(), z, base)
    });
    let total_ss: f64 = y.iter().map(|v| v * v).sum();

    let mut best: Option<Best> = None;
    let mut by_size = vec![None::<f64>; max_vars + 1];
    let (mut evaluated, mut skipped) = (0usize, 0usize);
    for k in 0..=k_max {
        for s in 0..=(max_vars - k).min(m) {
            if k + s + 1 > n {
                continue;
            }
            for combo in (0..m).combinations(s) {
                let params = k + s;
                let rss = if params == 0 {
                    Some(total_ss)
                } else if let Some((r, z, base)) = &reduced {
                    let mut sub = Vec::with_capacity(q * params);
                    for c in (0..k).chain(combo.iter().map(|c| k_max + c)) {
                        sub.extend_from_slice(&r[c * q..(c + 1) * q]);
                    }
                    lstsq_rss(sub, q, params, z).map(|v| v + base)
                } else {
                    let idx: Vec<usize> = combo.iter().map(|&c| pool[c]).collect();
                    let design = design_columns(&score_cols[..k], data, &idx);
                    lstsq_rss(design, n, params, y)
                };
                let Some(rss) = rss else {
                    skipped += 1;
                    continue;
                };
                evaluated += 1;
                let bic = bic_score(rss.max(0.0), n, params)?;
                let slot = &mut by_size[params];
                if slot.is_none_or(|b| bic < b) {
                    *slot = Some(bic);
                }
                let mut idx: Vec<usize> = combo.iter().map(|&c| pool[c]).collect();
                idx.sort_unstable();
                let key = (k, idx);
                if better(bic, &key, &best) {
                    best = Some(Best { bic, key });
                }
            }
        }
    }
    let best = best.ok_or_else(|| {
        Error::SingularDesign("no subset of the candidate pool gave a full-rank design".into())
    })?;
    let (k, idx) = best.key;
    let best_fit = fit_indices(data, eigsys, &idx, k)?;
    Ok(SubsetSearchResult {
        best_fit,
        best_bic_by_size: by_size,
        delta: None,
        candidate_pool: pool.iter().map(|&j| data.grid.point(j)).collect(),
        fits_evaluated: evaluated,
        singular_skipped: skipped,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaSkip {
    pub delta: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaSelection {
    pub delta: f64,
    pub k_delta: usize,
    pub search: SubsetSearchResult,
    pub skipped: Vec<DeltaSkip>,
}

/// Candidate pool for one window: detected candidates with a nonzero statistic.
pub fn candidate_pool(
    data: &FunctionalDataset,
    config: &DetectionConfig,
) -> Result<(Vec<f64>, usize)> {
    let list = detect_candidates(data, config)?;
    let pool = list
        .candidates
        .iter()
        .filter(|c| c.normalized != 0.0)
        .map(|c| c.location)
        .collect();
    Ok((pool, list.window.k_delta))
}

/// Runs candidate detection and the subset search for every `delta` in the grid
/// and keeps the smallest BIC; ties go to the smaller `delta`.
pub fn select_delta(
    data: &FunctionalDataset,
    eigsys: &EigenSystem,
    delta_grid: &[f64],
    config: &DetectionConfig,
    k_max: usize,
    max_vars: usize,
) -> Result<DeltaSelection> {
    if delta_grid.is_empty() {
        return Err(Error::InvalidSpec("empty delta grid".into()));
    }
    let mut deltas = delta_grid.to_vec();
    deltas.sort_by(f64::total_cmp);
    let mut best: Option<(f64, usize, SubsetSearchResult)> = None;
    let mut skipped = Vec::new();
    let mut last_err = None;
    for &delta in &deltas {
        let cfg = DetectionConfig { delta, ..*config };
        let attempt = candidate_pool(data, &cfg).and_then(|(pool, k_delta)| {
            best_subset_bic(data, eigsys, &pool, k_max, max_vars).map(|r| (k_delta, r))
        });
        match attempt {
            Ok((k_delta, mut search)) => {
                let resolved = k_delta as f64 * data.grid.spacing();
                search.delta = Some(resolved);
                if best
                    .as_ref()
                    .is_none_or(|(_, _, b)| search.best_fit.bic < b.best_fit.bic)
                {
                    best = Some((resolved, k_delta, search));
                }
            }
            Err(e) => {
                log::debug!("delta {delta} skipped: {e}");
                skipped.push(DeltaSkip {
                    delta,
                    reason: e.to_string(),
                });
                last_err = Some(e);
            }
        }
    }
    match best {
        Some((delta, k_delta, search)) => Ok(DeltaSelection {
            delta,
            k_delta,
            search,
            skipped,
        }),
        None => Err(last_err.expect("nonempty grid")),
    }
}
