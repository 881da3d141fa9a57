//! Evaluation protocols: matching estimated impact points to the truth,
//! slope error, leave-one-out prediction error and the seeded simulation study.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FunctionalDataset, Grid};
use crate::detection::{run_detection, DetectionConfig, Exclusion, DEFAULT_CUTOFF_A};
use crate::error::{Error, Result};
use crate::fpca::{center, empirical_kl, DataMeans, EigenSystem};
use crate::process::{simulate_ou, CovarianceSampler, ProcessSpec};
use crate::quadrature::{QuadratureKind, QuadratureRule};
use crate::regression::{
    best_subset_bic, fit_fixed_basis, predict, select_delta, AugmentedFit, DEFAULT_K_MAX,
    DEFAULT_MAX_VARS,
};
use crate::response::{generate_response, ImpactModelSpec};
use crate::rng::derive_seed;

/// For each true point, the closest estimate inside its cell, where cells are
/// delimited by midpoints between consecutive true points. `true_taus` must be sorted.
pub fn match_impacts(true_taus: &[f64], estimated: &[f64]) -> Vec<Option<f64>> {
    let s = true_taus.len();
    (0..s)
        .map(|r| {
            let lo = if r == 0 {
                f64::NEG_INFINITY
            } else {
                0.5 * (true_taus[r - 1] + true_taus[r])
            };
            let hi = if r + 1 == s {
                f64::INFINITY
            } else {
                0.5 * (true_taus[r] + true_taus[r + 1])
            };
            estimated
                .iter()
                .copied()
                .filter(|&e| e >= lo && (e < hi || (r + 1 == s && e <= hi)))
                .min_by(|a, b| {
                    (a - true_taus[r])
                        .abs()
                        .total_cmp(&(b - true_taus[r]).abs())
                        .then(a.total_cmp(b))
                })
        })
        .collect()
}

/// `int (f - g)^2` under the quadrature rule.
pub fn integrated_squared_error(f: &[f64], g: &[f64], rule: &QuadratureRule) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::Dimension(format!(
            "curves of length {} and {}",
            f.len(),
            g.len()
        )));
    }
    let d: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
    rule.inner(&d, &d)
}

/// `count` equidistant values from `lo` to `hi` inclusive.
pub fn equidistant(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Scores and impact points.
    Augmented,
    /// Impact points only.
    ImpactOnly,
    /// Scores only.
    FlrOnly,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::Augmented,
        ModelKind::ImpactOnly,
        ModelKind::FlrOnly,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Augmented => "augmented",
            ModelKind::ImpactOnly => "impact-only",
            ModelKind::FlrOnly => "FLR-only",
        }
    }
}

/// Settings for model selection on a single data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub delta_grid: Vec<f64>,
    #[serde(default = "dlogd")]
    pub exclusion: Exclusion,
    #[serde(default = "default_a")]
    pub cutoff_a: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_max_vars")]
    pub max_vars: usize,
    #[serde(default)]
    pub quadrature: QuadratureKind,
}

fn dlogd() -> Exclusion {
    Exclusion::DeltaLogDelta
}
fn default_a() -> f64 {
    DEFAULT_CUTOFF_A
}
fn default_k_max() -> usize {
    DEFAULT_K_MAX
}
fn default_max_vars() -> usize {
    DEFAULT_MAX_VARS
}

impl Default for PipelineConfig {
    /// 146 equidistant windows between 0.10 and 0.49 on a unit-width domain.
    fn default() -> Self {
        Self {
            delta_grid: equidistant(0.10, 0.49, 146),
            exclusion: Exclusion::DeltaLogDelta,
            cutoff_a: DEFAULT_CUTOFF_A,
            k_max: DEFAULT_K_MAX,
            max_vars: DEFAULT_MAX_VARS,
            quadrature: QuadratureKind::Trapezoid,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_grid.is_empty() {
            return Err(Error::InvalidSpec("empty delta grid".into()));
        }
        if self.max_vars == 0 && self.k_max > 0 {
            log::warn!("max_vars = 0 only admits the empty model");
        }
        DetectionConfig {
            delta: self.delta_grid[0],
            exclusion: self.exclusion,
            cutoff_a: self.cutoff_a,
            max_candidates: None,
        }
        .validate()
    }
}

/// Model chosen on the full data.
#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub model: ModelKind,
    pub delta: Option<f64>,
    pub k: usize,
    pub taus: Vec<f64>,
    pub indices: Vec<usize>,
    pub fit: AugmentedFit,
}

/// Selects `k`, the impact points and (for models with impact points) `delta` by BIC.
pub fn select_model(
    data: &FunctionalDataset,
    config: &PipelineConfig,
    kind: ModelKind,
) -> Result<(Selection, EigenSystem, DataMeans)> {
    config.validate()?;
    let c = center(data)?;
    c.data.responses()?;
    let rule = QuadratureRule::new(&data.grid, config.quadrature);
    let eigsys = empirical_kl(&c.data, config.k_max, &rule)?;
    let (delta, search) = match kind {
        ModelKind::FlrOnly => (
            None,
            best_subset_bic(&c.data, &eigsys, &[], config.k_max, config.max_vars)?,
        ),
        ModelKind::Augmented | ModelKind::ImpactOnly => {
            let k_max = if kind == ModelKind::Augmented {
                config.k_max
            } else {
                0
            };
            let det = DetectionConfig {
                delta: config.delta_grid[0],
                exclusion: config.exclusion,
                cutoff_a: config.cutoff_a,
                max_candidates: None,
            };
            let sel = select_delta(
                &c.data,
                &eigsys,
                &config.delta_grid,
                &det,
                k_max,
                config.max_vars,
            )?;
            (Some(sel.delta), sel.search)
        }
    };
    let fit = search.best_fit;
    Ok((
        Selection {
            model: kind,
            delta,
            k: fit.k,
            taus: fit.selected_taus.clone(),
            indices: fit.selected_indices.clone(),
            fit,
        },
        eigsys,
        c.means,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct LoocvReport {
    pub model: ModelKind,
    pub n: usize,
    pub nested: bool,
    pub mspe: f64,
    pub median_squared_error: f64,
    pub k_hat: usize,
    pub s_hat: usize,
    pub delta: Option<f64>,
    pub taus: Vec<f64>,
    /// Null for folds whose design was singular.
    pub squared_errors: Vec<Option<f64>>,
    pub failed_folds: usize,
}

fn without(n: usize, i: usize) -> Vec<usize> {
    (0..n).filter(|&l| l != i).collect()
}

fn summarize(errors: &[Option<f64>]) -> Result<(f64, f64, usize)> {
    let mut ok: Vec<f64> = errors.iter().flatten().copied().collect();
    let failed = errors.len() - ok.len();
    if ok.is_empty() {
        return Err(Error::SingularDesign(
            "every cross-validation fold failed".into(),
        ));
    }
    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
    ok.sort_by(f64::total_cmp);
    let m = ok.len();
    let median = if m % 2 == 1 {
        ok[m / 2]
    } else {
        0.5 * (ok[m / 2 - 1] + ok[m / 2])
    };
    Ok((mean, median, failed))
}

/// Leave-one-out errors with the basis and impact locations of `selection` held
/// fixed and coefficients re-estimated on each fold.
pub fn loocv_fixed(
    data: &FunctionalDataset,
    eigsys: &EigenSystem,
    indices: &[usize],
    k: usize,
) -> Result<Vec<Option<f64>>> {
    let y = data.responses()?;
    let n = data.n();
    Ok((0..n)
        .map(|i| {
            let fold = data.select(&without(n, i));
            let held = data.select(&[i]);
            let pred = fit_fixed_basis(&fold, eigsys, indices, k)
                .and_then(|(fit, means)| predict(&fit, eigsys, &held, &means));
            match pred {
                Ok(p) => Some((y[i] - p[0]).powi(2)),
                Err(e) => {
                    log::debug!("fold {i} skipped: {e}");
                    None
                }
            }
        })
        .collect())
}

/// Leave-one-out mean and median squared prediction error. The model is selected
/// once on the full data unless `nested`, in which case every fold reselects.
pub fn loocv_mspe(
    data: &FunctionalDataset,
    config: &PipelineConfig,
    kind: ModelKind,
    nested: bool,
) -> Result<LoocvReport> {
    let n = data.n();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "cross-validation needs at least 3 cases, got {n}"
        )));
    }
    let y = data.responses()?;
    let (selection, eigsys, _) = select_model(data, config, kind)?;
    let errors = if nested {
        (0..n)
            .map(|i| {
                let fold = data.select(&without(n, i));
                let held = data.select(&[i]);
                let pred = select_model(&fold, config, kind)
                    .and_then(|(s, e, m)| predict(&s.fit, &e, &held, &m));
                pred.ok().map(|p| (y[i] - p[0]).powi(2))
            })
            .collect()
    } else {
        loocv_fixed(data, &eigsys, &selection.indices, selection.k)?
    };
    let (mspe, median, failed) = summarize(&errors)?;
    Ok(LoocvReport {
        model: kind,
        n,
        nested,
        mspe,
        median_squared_error: median,
        k_hat: selection.k,
        s_hat: selection.indices.len(),
        delta: selection.delta,
        taus: selection.taus,
        squared_errors: errors,
        failed_folds: failed,
    })
}

/// Cross-validation of all three model kinds.
#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    pub n: usize,
    pub p: usize,
    pub config: PipelineConfig,
    pub models: Vec<LoocvReport>,
}

pub fn cross_validate(
    data: &FunctionalDataset,
    config: &PipelineConfig,
    nested: bool,
) -> Result<CvReport> {
    let models = ModelKind::ALL
        .iter()
        .map(|&kind| loocv_mspe(data, config, kind, nested))
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport {
        n: data.n(),
        p: data.p(),
        config: config.clone(),
        models,
    })
}

pub fn render_cv_table(report: &CvReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>10} {:>10} {:>4} {:>4} {:>8}",
        "model", "MSPE", "median", "k", "S", "delta"
    );
    for m in &report.models {
        let delta = m.delta.map_or("-".to_string(), |d| format!("{d:.4}"));
        let _ = writeln!(
            out,
            "{:<12} {:>10.4} {:>10.4} {:>4} {:>4} {:>8}",
            m.model.label(),
            m.mspe,
            m.median_squared_error,
            m.k_hat,
            m.s_hat,
            delta
        );
    }
    out
}

/// How the window half-width is chosen for each sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaPolicy {
    /// `c (b - a) / sqrt(n)`.
    Rate {
        c: f64,
    },
    Fixed {
        delta: f64,
    },
}

impl Default for DeltaPolicy {
    fn default() -> Self {
        DeltaPolicy::Rate { c: 1.0 }
    }
}

impl DeltaPolicy {
    pub fn delta(&self, n: usize, grid: &Grid) -> f64 {
        match *self {
            DeltaPolicy::Rate { c } => c * grid.width() / (n as f64).sqrt(),
            DeltaPolicy::Fixed { delta } => delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSize {
    pub n: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub replications: usize,
    pub sizes: Vec<SampleSize>,
    #[serde(default = "unit_a")]
    pub domain_a: f64,
    #[serde(default = "unit_b")]
    pub domain_b: f64,
    pub process: ProcessSpec,
    pub model: ImpactModelSpec,
    #[serde(default)]
    pub delta: DeltaPolicy,
    #[serde(default)]
    pub exclusion: Exclusion,
    #[serde(default = "default_a")]
    pub cutoff_a: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_max_vars")]
    pub max_vars: usize,
    #[serde(default)]
    pub quadrature: QuadratureKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub parallel: bool,
    #[serde(default = "yes")]
    pub keep_records: bool,
}

fn unit_a() -> f64 {
    0.0
}
fn unit_b() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl StudyConfig {
    /// Two impacts at 0.25 and 0.75 on an OU process with `theta = 5`, `sigma_u = 3.5`.
    pub fn two_impact_design(
        smooth_slope: bool,
        sizes: Vec<SampleSize>,
        replications: usize,
    ) -> Self {
        Self {
            replications,
            sizes,
            domain_a: 0.0,
            domain_b: 1.0,
            process: ProcessSpec::OrnsteinUhlenbeck {
                theta: 5.0,
                sigma_u: 3.5,
            },
            model: ImpactModelSpec::two_impact_design(smooth_slope),
            delta: DeltaPolicy::default(),
            exclusion: Exclusion::SqrtDelta,
            cutoff_a: DEFAULT_CUTOFF_A,
            k_max: DEFAULT_K_MAX,
            max_vars: DEFAULT_MAX_VARS,
            quadrature: QuadratureKind::Trapezoid,
            seed: 0,
            parallel: true,
            keep_records: true,
        }
    }

    pub fn grid(&self, p: usize) -> Result<Grid> {
        Grid::new(self.domain_a, self.domain_b, p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidSpec("replications must be at least 1".into()));
        }
        if self.sizes.is_empty() {
            return Err(Error::InvalidSpec("no sample sizes given".into()));
        }
        self.process.validate()?;
        for s in &self.sizes {
            if s.n < 3 {
                return Err(Error::InvalidSpec(format!(
                    "sample size {} is too small",
                    s.n
                )));
            }
            let grid = self.grid(s.p)?;
            self.process.validate_domain(&grid)?;
            self.model.validate(&grid)?;
            self.detection(s.n, &grid).validate()?;
        }
        if let DeltaPolicy::Rate { c } = self.delta {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "delta rate constant must be positive, got {c}"
                )));
            }
        }
        Ok(())
    }

    fn detection(&self, n: usize, grid: &Grid) -> DetectionConfig {
        DetectionConfig {
            delta: self.delta.delta(n, grid),
            exclusion: self.exclusion,
            cutoff_a: self.cutoff_a,
            max_candidates: None,
        }
    }
}

/// Outcome of one simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub p: usize,
    pub replication: usize,
    pub seed: u64,
    pub delta: Option<f64>,
    pub s_hat_bic: Option<usize>,
    pub s_hat_cutoff: Option<usize>,
    pub k_hat: Option<usize>,
    pub tau_errors: Vec<Option<f64>>,
    pub beta_errors: Vec<Option<f64>>,
    pub ise: Option<f64>,
    pub mse: Option<f64>,
    pub kappa_hat: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub p: usize,
    pub replications: usize,
    pub failures: usize,
    pub mean_tau_error: Vec<Option<f64>>,
    pub mean_beta_error: Vec<Option<f64>>,
    pub unmatched: Vec<usize>,
    pub mean_s_hat: Option<f64>,
    pub p_correct_bic: Option<f64>,
    pub p_correct_cutoff: Option<f64>,
    pub mean_k_hat: Option<f64>,
    pub mean_ise: Option<f64>,
    pub mean_mse: Option<f64>,
    pub mean_kappa_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    pub records: Vec<ReplicationRecord>,
}

enum Sampler {
    Ou { theta: f64, sigma_u: f64 },
    Dense(CovarianceSampler),
}

impl Sampler {
    fn new(grid: &Grid, spec: &ProcessSpec) -> Result<Self> {
        Ok(match *spec {
            ProcessSpec::OrnsteinUhlenbeck { theta, sigma_u } => Sampler::Ou { theta, sigma_u },
            _ => Sampler::Dense(CovarianceSampler::new(grid, spec)?),
        })
    }

    fn sample(&self, n: usize, grid: &Grid, seed: u64) -> Result<FunctionalDataset> {
        match self {
            Sampler::Ou { theta, sigma_u } => simulate_ou(n, grid, *theta, *sigma_u, seed),
            Sampler::Dense(s) => s.sample(n, seed),
        }
    }
}

struct Outcome {
    delta: f64,
    s_hat_bic: usize,
    s_hat_cutoff: usize,
    k_hat: usize,
    tau_errors: Vec<Option<f64>>,
    beta_errors: Vec<Option<f64>>,
    ise: f64,
    mse: f64,
    kappa_hat: Option<f64>,
}

fn run_replication(
    config: &StudyConfig,
    size: SampleSize,
    grid: &Grid,
    sampler: &Sampler,
    truth: &[f64],
    rule: &QuadratureRule,
    seed: u64,
) -> Result<Outcome> {
    let x = sampler.sample(size.n, grid, derive_seed(seed, 0))?;
    let y = generate_response(&x, &config.model, rule, derive_seed(seed, 1))?;
    let data = center(&x.with_responses(y)?)?.data;
    let det = run_detection(&data, &config.detection(size.n, grid))?;
    let eigsys = empirical_kl(&data, config.k_max, rule)?;
    let pool: Vec<f64> = det
        .candidates
        .iter()
        .filter(|c| c.normalized != 0.0)
        .map(|c| c.location)
        .collect();
    let search = best_subset_bic(&data, &eigsys, &pool, config.k_max, config.max_vars)?;
    let fit = search.best_fit;
    let true_taus: Vec<f64> = config
        .model
        .impact_indices(grid)?
        .iter()
        .map(|&j| grid.point(j))
        .collect();
    let matched = match_impacts(&true_taus, &fit.selected_taus);
    let tau_errors = matched
        .iter()
        .zip(&true_taus)
        .map(|(m, t)| m.map(|e| (e - t).abs()))
        .collect();
    let beta_errors = matched
        .iter()
        .zip(&config.model.betas)
        .map(|(m, b)| {
            m.and_then(|e| {
                let pos = fit.selected_taus.iter().position(|&t| t == e)?;
                Some((fit.beta_hat_impacts[pos] - b).abs())
            })
        })
        .collect();
    Ok(Outcome {
        delta: det.delta,
        s_hat_bic: fit.num_impacts(),
        s_hat_cutoff: det.s_hat,
        k_hat: fit.k,
        tau_errors,
        beta_errors,
        ise: integrated_squared_error(&fit.beta_hat_curve, truth, rule)?,
        mse: fit.rss / size.n as f64,
        kappa_hat: det.kappa_hat,
    })
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

fn aggregate(size: SampleSize, s_true: usize, records: &[ReplicationRecord]) -> StudyRow {
    let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let prob = |f: &dyn Fn(&ReplicationRecord) -> bool| {
        (!ok.is_empty()).then(|| ok.iter().filter(|r| f(r)).count() as f64 / ok.len() as f64)
    };
    StudyRow {
        n: size.n,
        p: size.p,
        replications: records.len(),
        failures: records.len() - ok.len(),
        mean_tau_error: (0..s_true)
            .map(|r| mean_of(ok.iter().filter_map(|x| x.tau_errors[r])))
            .collect(),
        mean_beta_error: (0..s_true)
            .map(|r| mean_of(ok.iter().filter_map(|x| x.beta_errors[r])))
            .collect(),
        unmatched: (0..s_true)
            .map(|r| ok.iter().filter(|x| x.tau_errors[r].is_none()).count())
            .collect(),
        mean_s_hat: mean_of(ok.iter().filter_map(|x| x.s_hat_bic.map(|s| s as f64))),
        p_correct_bic: prob(&|x| x.s_hat_bic == Some(s_true)),
        p_correct_cutoff: prob(&|x| x.s_hat_cutoff == Some(s_true)),
        mean_k_hat: mean_of(ok.iter().filter_map(|x| x.k_hat.map(|k| k as f64))),
        mean_ise: mean_of(ok.iter().filter_map(|x| x.ise)),
        mean_mse: mean_of(ok.iter().filter_map(|x| x.mse)),
        mean_kappa_hat: mean_of(ok.iter().filter_map(|x| x.kappa_hat)),
    }
}

/// Simulates, fits and scores every replication at every sample size. Each
/// replication draws from its own derived seed, so the report does not depend on
/// whether replications run in parallel.
pub fn run_simulation_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let s_true = config.model.num_impacts();
    let mut rows = Vec::with_capacity(config.sizes.len());
    let mut all = Vec::new();
    for (size_index, &size) in config.sizes.iter().enumerate() {
        let grid = config.grid(size.p)?;
        let rule = QuadratureRule::new(&grid, config.quadrature);
        let sampler = Sampler::new(&grid, &config.process)?;
        let truth = config.model.slope.on_grid(&grid)?;
        let size_seed = derive_seed(config.seed, size_index as u64);
        let one = |rep: usize| {
            let seed = derive_seed(size_seed, rep as u64);
            let out = run_replication(config, size, &grid, &sampler, &truth, &rule, seed);
            match out {
                Ok(o) => ReplicationRecord {
                    n: size.n,
                    p: size.p,
                    replication: rep,
                    seed,
                    delta: Some(o.delta),
                    s_hat_bic: Some(o.s_hat_bic),
                    s_hat_cutoff: Some(o.s_hat_cutoff),
                    k_hat: Some(o.k_hat),
                    tau_errors: o.tau_errors,
                    beta_errors: o.beta_errors,
                    ise: Some(o.ise),
                    mse: Some(o.mse),
                    kappa_hat: o.kappa_hat,
                    error: None,
                },
                Err(e) => {
                    log::warn!("replication {rep} at n = {} failed: {e}", size.n);
                    ReplicationRecord {
                        n: size.n,
                        p: size.p,
                        replication: rep,
                        seed,
                        delta: None,
                        s_hat_bic: None,
                        s_hat_cutoff: None,
                        k_hat: None,
                        tau_errors: vec![None; s_true],
                        beta_errors: vec![None; s_true],
                        ise: None,
                        mse: None,
                        kappa_hat: None,
                        error: Some(format!("{}: {e}", e.kind())),
                    }
                }
            }
        };
        let records: Vec<ReplicationRecord> = if config.parallel {
            (0..config.replications).into_par_iter().map(one).collect()
        } else {
            (0..config.replications).map(one).collect()
        };
        rows.push(aggregate(size, s_true, &records));
        if config.keep_records {
            all.extend(records);
        }
    }
    Ok(StudyReport {
        config: config.clone(),
        rows,
        records: all,
    })
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.digits$}"))
}

/// Plain-text table with one line per sample size.
pub fn render_study_table(report: &StudyReport) -> String {
    let s = report.config.model.num_impacts();
    let mut header = format!("{:>6} {:>6}", "p", "n");
    for r in 1..=s {
        header += &format!(" {:>9}", format!("|tau{r}|"));
    }
    for r in 1..=s {
        header += &format!(" {:>9}", format!("|beta{r}|"));
    }
    header += &format!(
        " {:>6} {:>11} {:>6} {:>9} {:>7} {:>7} {:>5}",
        "S", "P(S) bic/ct", "k", "ISE", "MSE", "kappa", "fail"
    );
    let mut out = header;
    out.push('\n');
    for row in &report.rows {
        let mut line = format!("{:>6} {:>6}", row.p, row.n);
        for v in &row.mean_tau_error {
            line += &format!(" {:>9}", cell(*v, 4));
        }
        for v in &row.mean_beta_error {
            line += &format!(" {:>9}", cell(*v, 3));
        }
        line += &format!(
            " {:>6} {:>11} {:>6} {:>9} {:>7} {:>7} {:>5}",
            cell(row.mean_s_hat, 2),
            format!(
                "{}/{}",
                cell(row.p_correct_bic, 2),
                cell(row.p_correct_cutoff, 2)
            ),
            cell(row.mean_k_hat, 2),
            cell(row.mean_ise, 3),
            cell(row.mean_mse, 3),
            cell(row.mean_kappa_hat, 2),
            row.failures
        );
        out += &line;
        out.push('\n');
    }
    out
}
