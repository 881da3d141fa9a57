use std::io::Write;
use std::path::PathBuf;

use poi_core::config::RunConfig;
use poi_core::detection::{run_detection, statistic_profile, DetectionConfig, Exclusion};
use poi_core::evaluation::{
    cross_validate, render_cv_table, render_study_table, run_simulation_study, DeltaPolicy,
};
use poi_core::fpca::{center, empirical_kl};
use poi_core::io::{
    curves_to_string, load_curves, parse_delta_grid, parse_float_list, write_columns, LoadedCurves,
    MissingPolicy,
};
use poi_core::process::{simulate, ProcessSpec};
use poi_core::quadrature::QuadratureRule;
use poi_core::regression::select_delta;
use poi_core::report::{
    cv_report, detect_report, fit_report, study_report, CvBody, DetectBody, FitBody,
};
use poi_core::response::{generate_response, ImpactModelSpec, SlopeFunction};
use poi_core::rng::derive_seed;
use poi_core::{Error, Grid, Result};

use crate::args::{
    Common, CvArgs, DetectArgs, Detection, ExclusionArg, FitArgs, Input, ProcessArg, Selection,
    SimulateArgs, StudyArgs,
};

fn load_config(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
            other => other,
        }),
        None => Ok(RunConfig::default()),
    }
}

fn seed(common: &Common, cfg: &RunConfig) -> u64 {
    common.seed.or(cfg.seed).unwrap_or(0)
}

fn out_dir(common: &Common, cfg: &RunConfig) -> Option<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|o| o.dir.clone()))
}

/// Writes `name` under the output directory, or prints it when there is none and
/// `primary` is set.
fn emit(dir: &Option<PathBuf>, name: &str, content: &str, primary: bool) -> Result<()> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            std::fs::write(d.join(name), content)?;
        }
        None if primary => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
        }
        None => {}
    }
    Ok(())
}

fn exclusion(arg: Option<ExclusionArg>) -> Option<Exclusion> {
    arg.map(|e| match e {
        ExclusionArg::Sqrt => Exclusion::SqrtDelta,
        ExclusionArg::Dlogd => Exclusion::DeltaLogDelta,
    })
}

fn load_input(input: &Input, cfg: &RunConfig) -> Result<LoadedCurves> {
    let section = cfg.data.clone().unwrap_or_default();
    let path: PathBuf = input
        .data
        .clone()
        .or(section.path)
        .ok_or_else(|| Error::Config("no curve bundle given".into()))?;
    let policy = MissingPolicy {
        max_missing: input
            .max_missing
            .or(section.max_missing)
            .unwrap_or(MissingPolicy::default().max_missing),
    };
    let loaded = load_curves(&path, policy)?;
    for d in &loaded.report.dropped {
        log::warn!("row {} dropped: {}", d.row, d.reason);
    }
    Ok(loaded)
}

fn detection_config(args: &Detection, cfg: &RunConfig, n: usize, grid: &Grid) -> DetectionConfig {
    let section = cfg.detection.clone().unwrap_or_default();
    DetectionConfig {
        delta: args
            .delta
            .or(section.delta)
            .unwrap_or_else(|| poi_core::detection::default_delta(n, grid)),
        exclusion: exclusion(args.exclusion)
            .or(section.exclusion)
            .unwrap_or_default(),
        cutoff_a: args.cutoff_a.unwrap_or(cfg.cutoff_a()),
        max_candidates: args.max_candidates.or(section.max_candidates),
    }
}

fn delta_grid(args: &Selection, cfg: &RunConfig) -> Result<Option<Vec<f64>>> {
    match &args.delta_grid {
        Some(text) => parse_delta_grid(text).map(Some),
        None => Ok(cfg.detection.as_ref().and_then(|d| d.delta_grid.clone())),
    }
}

fn list(text: &Option<String>) -> Result<Option<Vec<f64>>> {
    text.as_deref().map(parse_float_list).transpose()
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let process = match args.process {
        Some(ProcessArg::Bm) => ProcessSpec::BrownianMotion,
        Some(ProcessArg::Fbm) => ProcessSpec::FractionalBrownian {
            hurst: args
                .hurst
                .ok_or_else(|| Error::Config("--hurst is required for fbm".into()))?,
        },
        Some(ProcessArg::Ou) => ProcessSpec::OrnsteinUhlenbeck {
            theta: args.theta.unwrap_or(5.0),
            sigma_u: args.sigma_u.unwrap_or(3.5),
        },
        None => cfg.process.unwrap_or(ProcessSpec::OrnsteinUhlenbeck {
            theta: 5.0,
            sigma_u: 3.5,
        }),
    };
    process
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
    let section = cfg.simulate.clone();
    let n = args
        .n
        .or(section.as_ref().map(|s| s.n))
        .ok_or_else(|| Error::Config("sample size --n is required".into()))?;
    let p = args
        .p
        .or(section.as_ref().map(|s| s.p))
        .ok_or_else(|| Error::Config("grid size --p is required".into()))?;
    let a = args.a.or(section.as_ref().map(|s| s.a)).unwrap_or(0.0);
    let b = args.b.or(section.as_ref().map(|s| s.b)).unwrap_or(1.0);
    let grid = Grid::new(a, b, p).map_err(|e| Error::Config(e.to_string()))?;

    let mut model = cfg.model.clone().unwrap_or(ImpactModelSpec {
        taus: Vec::new(),
        betas: Vec::new(),
        slope: SlopeFunction::Zero,
        noise_sd: 1.0,
    });
    if let Some(t) = list(&args.taus)? {
        model.taus = t;
    }
    if let Some(bs) = list(&args.betas)? {
        model.betas = bs;
    }
    if let Some(c) = list(&args.slope)? {
        model.slope = SlopeFunction::Polynomial { coefficients: c };
    }
    if let Some(s) = args.noise_sd {
        model.noise_sd = s;
    }
    model
        .validate(&grid)
        .map_err(|e| Error::Config(e.to_string()))?;

    let seed = seed(&args.common, &cfg);
    let x = simulate(n, &grid, &process, derive_seed(seed, 0))?;
    let data = if args.no_response {
        x
    } else {
        let rule = QuadratureRule::new(&grid, cfg.quadrature());
        let y = generate_response(&x, &model, &rule, derive_seed(seed, 1))?;
        x.with_responses(y)?
    };
    emit(
        &out_dir(&args.common, &cfg),
        "curves.csv",
        &curves_to_string(&data)?,
        true,
    )
}

pub fn detect_cmd(args: &DetectArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let loaded = load_input(&args.input, &cfg)?;
    let data = loaded.data;
    data.responses()?;
    let det = detection_config(&args.detection, &cfg, data.n(), &data.grid);
    det.validate()?;
    let centered = center(&data)?.data;
    let result = run_detection(&centered, &det)?;
    let profile = statistic_profile(&centered, det.delta)?;
    let abs: Vec<f64> = profile.raw.iter().map(|v| v.abs()).collect();
    let mut csv = Vec::new();
    write_columns(&mut csv, ["t", "abs_statistic"], &profile.locations, &abs)?;

    let report = detect_report(
        args.common.seed.or(cfg.seed),
        DetectBody {
            n: data.n(),
            p: data.p(),
            grid: data.grid,
            load: Some(loaded.report),
            result,
        },
    );
    let dir = out_dir(&args.common, &cfg);
    emit(&dir, "detection.json", &report.to_json()?, true)?;
    emit(&dir, "profile.csv", &String::from_utf8_lossy(&csv), false)
}

pub fn fit_cmd(args: &FitArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let loaded = load_input(&args.input, &cfg)?;
    let data = loaded.data;
    data.responses()?;
    let det = detection_config(&args.detection, &cfg, data.n(), &data.grid);
    det.validate()?;
    let k_max = args.selection.k_max.unwrap_or(cfg.k_max());
    let max_vars = args.selection.max_vars.unwrap_or(cfg.max_vars());
    let deltas = delta_grid(&args.selection, &cfg)?.unwrap_or_else(|| vec![det.delta]);

    let centered = center(&data)?.data;
    let rule = QuadratureRule::new(&data.grid, cfg.quadrature());
    let eigsys = empirical_kl(&centered, k_max, &rule)?;
    let sel = select_delta(&centered, &eigsys, &deltas, &det, k_max, max_vars)?;
    let fit = sel.search.best_fit.clone();
    let mut csv = Vec::new();
    write_columns(
        &mut csv,
        ["t", "beta_hat"],
        &data.grid.points(),
        &fit.beta_hat_curve,
    )?;

    let report = fit_report(
        args.common.seed.or(cfg.seed),
        FitBody {
            n: data.n(),
            p: data.p(),
            grid: data.grid,
            load: Some(loaded.report),
            delta: Some(sel.delta),
            k_delta: Some(sel.k_delta),
            candidate_pool: sel.search.candidate_pool,
            best_bic_by_size: sel.search.best_bic_by_size,
            fits_evaluated: sel.search.fits_evaluated,
            singular_skipped: sel.search.singular_skipped,
            skipped_deltas: sel.skipped,
            eigenvalues: eigsys.eigenvalues().to_vec(),
            fit,
        },
    );
    let dir = out_dir(&args.common, &cfg);
    emit(&dir, "fit.json", &report.to_json()?, true)?;
    emit(&dir, "slope.csv", &String::from_utf8_lossy(&csv), false)
}

pub fn cv_cmd(args: &CvArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let loaded = load_input(&args.input, &cfg)?;
    let data = loaded.data;
    data.responses()?;
    let mut pipeline = cfg.pipeline(&data.grid);
    if let Some(g) = delta_grid(&args.selection, &cfg)? {
        pipeline.delta_grid = g;
    } else if let Some(d) = args.detection.delta {
        pipeline.delta_grid = vec![d];
    }
    if let Some(e) = exclusion(args.detection.exclusion) {
        pipeline.exclusion = e;
    }
    if let Some(a) = args.detection.cutoff_a {
        pipeline.cutoff_a = a;
    }
    if let Some(k) = args.selection.k_max {
        pipeline.k_max = k;
    }
    if let Some(m) = args.selection.max_vars {
        pipeline.max_vars = m;
    }
    let cv = cross_validate(&data, &pipeline, args.nested)?;
    let table = render_cv_table(&cv);
    let report = cv_report(
        args.common.seed.or(cfg.seed),
        CvBody {
            load: Some(loaded.report),
            cv,
        },
    );
    let dir = out_dir(&args.common, &cfg);
    emit(&dir, "cv.json", &report.to_json()?, true)?;
    emit(&dir, "cv.txt", &table, false)
}

pub fn study_cmd(args: &StudyArgs) -> Result<()> {
    if args.common.config.is_none() {
        return Err(Error::Config(
            "study needs --config with a [study] section".into(),
        ));
    }
    let cfg = load_config(&args.common)?;
    let mut study = cfg.study_config()?;
    study.seed = seed(&args.common, &cfg);
    if let Some(r) = args.replications {
        study.replications = r;
    }
    if args.serial {
        study.parallel = false;
    }
    if let Some(d) = args.detection.delta {
        study.delta = DeltaPolicy::Fixed { delta: d };
    }
    if let Some(e) = exclusion(args.detection.exclusion) {
        study.exclusion = e;
    }
    if let Some(a) = args.detection.cutoff_a {
        study.cutoff_a = a;
    }
    if let Some(k) = args.selection.k_max {
        study.k_max = k;
    }
    if let Some(m) = args.selection.max_vars {
        study.max_vars = m;
    }
    study.validate()?;
    let report = run_simulation_study(&study)?;
    let table = render_study_table(&report);
    let json = study_report(Some(study.seed), report).to_json()?;
    let dir = out_dir(&args.common, &cfg);
    emit(&dir, "study.json", &json, true)?;
    emit(&dir, "study.txt", &table, false)
}
