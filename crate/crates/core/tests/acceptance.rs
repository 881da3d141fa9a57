//! Acceptance checks. Prints one PASS or FAIL line per criterion and exits
//! nonzero if any fails. An optional argument selects criteria by number,
//! e.g. `cargo test --test acceptance -- 3,7`.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::*;
use poi_core::data::Grid;
use poi_core::detection::{estimate_kappa, run_detection, z_delta, DetectionConfig};
use poi_core::evaluation::{
    cross_validate, match_impacts, run_simulation_study, ModelKind, PipelineConfig, SampleSize,
    StudyConfig,
};
use poi_core::fpca::{center, empirical_kl};
use poi_core::io::{curves_to_string, parse_curves, MissingPolicy};
use poi_core::process::{CovarianceSampler, ProcessSpec};
use poi_core::quadrature::QuadratureRule;
use poi_core::report::{cv_report, CvBody};
use poi_core::response::ImpactModelSpec;
use poi_core::rng::derive_seed;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

fn within(limit: Duration, started: Instant, detail: String) -> Outcome {
    let took = started.elapsed();
    if took <= limit {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}; took {:.1}s, limit {}s",
            took.as_secs_f64(),
            limit.as_secs()
        ))
    }
}

/// Sample variance of Z at t = 0.5 for Brownian motion is delta / 2.
fn z_variance() -> Outcome {
    let started = Instant::now();
    let grid = Grid::unit(201).unwrap();
    let data =
        poi_core::process::simulate(20_000, &grid, &ProcessSpec::BrownianMotion, 101).unwrap();
    let z = z_delta(&data, 0.02).unwrap();
    let j = grid.snap(0.5).unwrap();
    let var = sample_variance(&z.values.column(j - z.window.k_delta));
    let rel = (var / 0.01 - 1.0).abs();
    let detail = format!("Var Z = {var:.6}, relative error {rel:.4} (limit 0.05)");
    if rel > 0.05 {
        return Err(detail);
    }
    within(Duration::from_secs(10), started, detail)
}

/// kappa-hat within 0.1 of kappa in at least 95% of 50 runs, for BM and fBM H = 1/4.
fn kappa_accuracy() -> Outcome {
    let started = Instant::now();
    let grid = Grid::unit(2001).unwrap();
    let delta = 20.0 * grid.spacing();
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, spec, kappa) in [
        ("BM", ProcessSpec::BrownianMotion, 1.0),
        ("fBM", ProcessSpec::FractionalBrownian { hurst: 0.25 }, 0.5),
    ] {
        let sampler = CovarianceSampler::new(&grid, &spec).unwrap();
        let hits = (0..50u64)
            .filter(|&rep| {
                let data = sampler.sample(1000, derive_seed(202, rep)).unwrap();
                let k = estimate_kappa(&data, delta).unwrap();
                (k - kappa).abs() <= 0.1
            })
            .count();
        ok &= hits as f64 >= 0.95 * 50.0;
        parts.push(format!("{label} {hits}/50"));
    }
    let detail = format!("{} within 0.1 (need 48/50)", parts.join(", "));
    if !ok {
        return Err(detail);
    }
    within(Duration::from_secs(120), started, detail)
}

/// Reduced table row at n = 250, p = 1001, 200 replications.
fn table_row() -> Outcome {
    let started = Instant::now();
    let mut cfg = StudyConfig::two_impact_design(false, vec![SampleSize { n: 250, p: 1001 }], 200);
    cfg.seed = 303;
    cfg.keep_records = false;
    let report = run_simulation_study(&cfg).unwrap();
    let row = &report.rows[0];
    let tau1 = row.mean_tau_error[0].unwrap_or(f64::INFINITY);
    let beta1 = row.mean_beta_error[0].unwrap_or(f64::INFINITY);
    let p_bic = row.p_correct_bic.unwrap_or(0.0);
    let kappa = row.mean_kappa_hat.unwrap_or(f64::NAN);
    let detail = format!(
        "|tau1| {tau1:.4} (<= 0.010), |beta1| {beta1:.3} (<= 0.20), P(S=2) BIC {p_bic:.3} (>= 0.70), kappa {kappa:.3} (in [0.90, 1.05]), failures {}",
        row.failures
    );
    if tau1 <= 0.010 && beta1 <= 0.20 && p_bic >= 0.70 && (0.90..=1.05).contains(&kappa) {
        within(Duration::from_secs(900), started, detail)
    } else {
        Err(detail)
    }
}

/// Detection-only replications of the two-impact design, seeded like the study.
fn detection_runs(n: usize, p: usize, reps: u64, master: u64) -> Vec<(usize, Option<f64>)> {
    let grid = Grid::unit(p).unwrap();
    let tau1 = grid.point(grid.snap(0.25).unwrap());
    let truth = [tau1, grid.point(grid.snap(0.75).unwrap())];
    (0..reps)
        .map(|rep| {
            let data = two_impact_data(n, p, derive_seed(master, rep));
            let det = run_detection(&data, &DetectionConfig::for_sample_size(n, &grid)).unwrap();
            let m = match_impacts(&truth, &det.locations)[0].map(|e| (e - tau1).abs());
            (det.s_hat, m)
        })
        .collect()
}

/// Cut-off rule recovers S = 2 in at least 85% of 100 runs at n = 2000.
fn cutoff_consistency() -> Outcome {
    let runs = detection_runs(2000, 1001, 100, 404);
    let hits = runs.iter().filter(|(s, _)| *s == 2).count();
    let detail = format!("P(S-hat = 2) = {:.2} (need >= 0.85)", hits as f64 / 100.0);
    if hits >= 85 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Median |tau1-hat - tau1| falls with n and shrinks by more than 4 from n = 100 to 1600.
fn rate_trend() -> Outcome {
    // p = 4001 keeps the median above the grid resolution at n = 1600.
    let mut medians = Vec::new();
    let mut unmatched = 0;
    for (i, n) in [100usize, 400, 1600].into_iter().enumerate() {
        let runs = detection_runs(n, 4001, 100, derive_seed(505, i as u64));
        let mut errs: Vec<f64> = runs.iter().filter_map(|(_, e)| *e).collect();
        unmatched += 100 - errs.len();
        medians.push(median(&mut errs));
    }
    let detail = format!(
        "medians {:.5} > {:.5} > {:.5}, ratio {:.1} (need > 4), unmatched {unmatched}",
        medians[0],
        medians[1],
        medians[2],
        medians[0] / medians[2]
    );
    if medians[0] > medians[1] && medians[1] > medians[2] && medians[2] < 0.25 * medians[0] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Median integrated squared slope error falls across n = 100, 500, 2000.
fn slope_trend() -> Outcome {
    let sizes = [100usize, 500, 2000];
    let mut cfg = StudyConfig::two_impact_design(
        true,
        sizes.iter().map(|&n| SampleSize { n, p: 1001 }).collect(),
        100,
    );
    cfg.seed = 606;
    let report = run_simulation_study(&cfg).unwrap();
    let medians: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let mut v: Vec<f64> = report
                .records
                .iter()
                .filter(|r| r.n == n)
                .filter_map(|r| r.ise)
                .collect();
            median(&mut v)
        })
        .collect();
    let detail = format!(
        "median ISE {:.4} > {:.4} > {:.4}",
        medians[0], medians[1], medians[2]
    );
    if medians[0] > medians[1] && medians[1] > medians[2] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Leading eigenpairs of Brownian motion. Each sample eigenvalue has a relative
/// standard error near sqrt(2 / n) = 3.2%, so a single draw meets the 5% band
/// for only about two seeds in three.
fn fpca_oracle() -> Outcome {
    let grid = Grid::unit(500).unwrap();
    let data = poi_core::process::simulate(2000, &grid, &ProcessSpec::BrownianMotion, 707).unwrap();
    let data = center(&data).unwrap().data;
    let eig = empirical_kl(&data, 3, &QuadratureRule::trapezoid(&grid)).unwrap();
    let t = grid.points();
    let mut parts = Vec::new();
    let mut ok = true;
    for r in 0..3 {
        let freq = (r as f64 + 0.5) * PI;
        let lambda = 1.0 / (freq * freq);
        let rel = (eig.eigenvalues()[r] / lambda - 1.0).abs();
        let truth: Vec<f64> = t.iter().map(|s| 2f64.sqrt() * (freq * s).sin()).collect();
        let psi = eig.eigenfunction(r);
        let sign = if eig.rule().inner(psi, &truth).unwrap() < 0.0 {
            -1.0
        } else {
            1.0
        };
        let sup = psi
            .iter()
            .zip(&truth)
            .map(|(a, b)| (sign * a - b).abs())
            .fold(0.0, f64::max);
        ok &= rel <= 0.05 && sup <= 0.1;
        parts.push(format!("r={}: rel {rel:.4}, sup {sup:.4}", r + 1));
    }
    let detail = format!("{} (limits 0.05, 0.1)", parts.join("; "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_property<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<String, String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner
        .run(&strategy, test)
        .map(|_| format!("{name} x{cases}"))
        .map_err(|e| format!("{name}: {e}"))
}

/// Every property suite, deterministically seeded.
fn property_suites() -> Outcome {
    let results = [
        run_property(
            "z linearity",
            1024,
            (
                (3usize..8, 9usize..40)
                    .prop_flat_map(|(n, p)| (integer_matrix(n, p), integer_matrix(n, p))),
                -50i32..50,
                -50i32..50,
                any::<u64>(),
            ),
            |((x, w), a, b, seed)| prop_z_linearity(&x, &w, a, b, seed),
        ),
        run_property(
            "affine annihilation",
            1024,
            (
                (1usize..6).prop_flat_map(|n| {
                    (
                        prop::collection::vec(-10_000i32..10_000, n),
                        prop::collection::vec(-500i32..500, n),
                    )
                }),
                11usize..80,
                1usize..5,
                -100.0f64..100.0,
            ),
            |((c, s), p, k, slope)| prop_affine_annihilation(&c, &s, p, k, slope),
        ),
        run_property(
            "scaling invariance",
            256,
            (any::<u64>(), 30usize..200, 0.01f64..100.0, any::<bool>()),
            |(seed, n, c, d)| prop_scaling_invariance(seed, n, c, d),
        ),
        run_property(
            "candidate separation",
            256,
            (any::<u64>(), 10usize..300, 51usize..400, any::<bool>()),
            |(seed, n, p, d)| prop_candidate_separation(seed, n, p, d),
        ),
        run_property(
            "orthonormality",
            256,
            (
                any::<u64>(),
                3usize..60,
                5usize..90,
                any::<u8>(),
                1usize..12,
            ),
            |(seed, n, p, w, k)| prop_orthonormality(seed, n, p, w, k),
        ),
        run_property(
            "residual orthogonality, nesting, BIC",
            256,
            (any::<u64>(), 30usize..120, fit_taus(), 0usize..6),
            |(seed, n, taus, k)| prop_least_squares(seed, n, &taus, k),
        ),
        run_property(
            "match uniqueness",
            4096,
            (sorted_taus(), estimates()),
            |(t, e)| prop_match_uniqueness(&t, &e),
        ),
        run_property(
            "seed determinism",
            64,
            (any::<u64>(), any::<u8>()),
            |(seed, w)| prop_seed_determinism(seed, w),
        ),
    ];
    let (ok, failed): (Vec<_>, Vec<_>) = results.into_iter().partition(|r| r.is_ok());
    let ok: Vec<String> = ok.into_iter().map(|r| r.unwrap()).collect();
    if failed.is_empty() {
        Ok(ok.join(", "))
    } else {
        Err(failed
            .into_iter()
            .map(|r| r.unwrap_err())
            .collect::<Vec<_>>()
            .join(" | "))
    }
}

/// Three-model LOOCV on 25 small synthetic bundles.
fn cv_substitute() -> Outcome {
    let grid = Grid::unit(744).unwrap();
    let model = ImpactModelSpec::two_impact_design(true);
    let config = PipelineConfig::default();
    let mut wins = 0;
    for b in 0..25u64 {
        let seed = derive_seed(909, b);
        let x = poi_core::process::simulate(13, &grid, &OU, derive_seed(seed, 0)).unwrap();
        let rule = QuadratureRule::trapezoid(&grid);
        let y =
            poi_core::response::generate_response(&x, &model, &rule, derive_seed(seed, 1)).unwrap();
        let bundle = curves_to_string(&x.with_responses(y).unwrap()).unwrap();
        let loaded = parse_curves(&bundle, MissingPolicy::default()).map_err(|e| e.to_string())?;
        let cv =
            cross_validate(&loaded.data, &config, false).map_err(|e| format!("bundle {b}: {e}"))?;
        let report = cv_report(
            Some(seed),
            CvBody {
                load: Some(loaded.report),
                cv,
            },
        );
        let doc: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        validate_schema("cv", &doc).map_err(|e| format!("bundle {b}: {e}"))?;
        for m in doc["models"].as_array().unwrap() {
            for key in ["mspe", "median_squared_error", "k_hat", "s_hat"] {
                if m.get(key).is_none() {
                    return Err(format!("bundle {b}: column {key} missing"));
                }
            }
        }
        let mspe = |kind: ModelKind| {
            report
                .body
                .cv
                .models
                .iter()
                .find(|m| m.model == kind)
                .map(|m| m.mspe)
                .unwrap()
        };
        if mspe(ModelKind::Augmented) <= mspe(ModelKind::FlrOnly) {
            wins += 1;
        }
    }
    let detail = format!("augmented MSPE <= FLR-only in {wins}/25 (need 20), schema valid");
    if wins >= 20 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let filter: Option<Vec<usize>> = std::env::args()
        .skip(1)
        .find(|a| !a.starts_with('-'))
        .map(|a| a.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [Criterion; 9] = [
        (1, "Z variance oracle", z_variance),
        (2, "kappa-hat accuracy", kappa_accuracy),
        (3, "reduced table row", table_row),
        (4, "cut-off consistency", cutoff_consistency),
        (5, "impact location rate", rate_trend),
        (6, "slope recovery trend", slope_trend),
        (7, "FPCA oracle", fpca_oracle),
        (8, "property suites", property_suites),
        (9, "cross-validation report", cv_substitute),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if filter.as_ref().is_some_and(|f| !f.contains(&id)) {
            continue;
        }
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {id} ({name}): {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}): {d} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
