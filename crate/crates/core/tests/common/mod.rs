//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use poi_core::data::{CurveMatrix, FunctionalDataset, Grid};
use poi_core::detection::{
    default_cutoff, detect_candidates, estimate_kappa, index_distance, statistic_profile,
    threshold_select, z_delta, DetectionConfig, Exclusion,
};
use poi_core::evaluation::{match_impacts, run_simulation_study, SampleSize, StudyConfig};
use poi_core::fpca::{center, empirical_kl, EigenSystem};
use poi_core::process::{simulate, ProcessSpec};
use poi_core::quadrature::QuadratureRule;
use poi_core::regression::{bic_score, fit_augmented, AugmentedFit};
use poi_core::response::{generate_response, ImpactModelSpec};
use poi_core::rng::derive_seed;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const OU: ProcessSpec = ProcessSpec::OrnsteinUhlenbeck {
    theta: 5.0,
    sigma_u: 3.5,
};

/// Centered curves and responses from `spec` on `grid`.
pub fn simulate_design(
    n: usize,
    grid: &Grid,
    process: &ProcessSpec,
    model: &ImpactModelSpec,
    seed: u64,
) -> FunctionalDataset {
    let x = simulate(n, grid, process, derive_seed(seed, 0)).unwrap();
    let rule = QuadratureRule::trapezoid(grid);
    let y = generate_response(&x, model, &rule, derive_seed(seed, 1)).unwrap();
    center(&x.with_responses(y).unwrap()).unwrap().data
}

/// The two-impact design with zero slope on an OU process.
pub fn two_impact_data(n: usize, p: usize, seed: u64) -> FunctionalDataset {
    let grid = Grid::unit(p).unwrap();
    simulate_design(
        n,
        &grid,
        &OU,
        &ImpactModelSpec::two_impact_design(false),
        seed,
    )
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
        p += sign * 2.0 * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

/// Curves and responses with small integer entries, so sums and halvings are exact.
pub fn integer_dataset(rows: &[Vec<i32>], y: Option<Vec<i32>>) -> FunctionalDataset {
    let p = rows[0].len();
    let rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| f64::from(v)).collect())
        .collect();
    FunctionalDataset::new(
        Grid::unit(p).unwrap(),
        CurveMatrix::from_rows(&rows).unwrap(),
        y.map(|v| v.into_iter().map(f64::from).collect()),
    )
    .unwrap()
}

pub fn integer_matrix(n: usize, p: usize) -> impl Strategy<Value = Vec<Vec<i32>>> {
    prop::collection::vec(prop::collection::vec(-1000i32..1000, p), n)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn combine(a: &FunctionalDataset, b: &FunctionalDataset, ca: f64, cb: f64) -> FunctionalDataset {
    let data: Vec<f64> = a
        .curves
        .as_slice()
        .iter()
        .zip(b.curves.as_slice())
        .map(|(x, w)| ca * x + cb * w)
        .collect();
    let curves = CurveMatrix::new(a.n(), a.p(), data).unwrap();
    FunctionalDataset::new(a.grid, curves, None).unwrap()
}

/// `Z(aX + bW) = a Z(X) + b Z(W)`. Integer data with integer weights is exact;
/// simulated data agrees to rounding.
pub fn prop_z_linearity(
    x: &[Vec<i32>],
    w: &[Vec<i32>],
    a: i32,
    b: i32,
    seed: u64,
) -> Result<(), TestCaseError> {
    let (dx, dw) = (integer_dataset(x, None), integer_dataset(w, None));
    let delta = 2.0 * dx.grid.spacing();
    let lhs = z_delta(&combine(&dx, &dw, a.into(), b.into()), delta).unwrap();
    let (zx, zw) = (z_delta(&dx, delta).unwrap(), z_delta(&dw, delta).unwrap());
    for ((l, u), v) in lhs
        .values
        .as_slice()
        .iter()
        .zip(zx.values.as_slice())
        .zip(zw.values.as_slice())
    {
        check(*l == f64::from(a) * u + f64::from(b) * v, || {
            format!("{l} != {a}*{u} + {b}*{v}")
        })?;
    }

    let grid = Grid::unit(101).unwrap();
    let sx = simulate(6, &grid, &ProcessSpec::BrownianMotion, derive_seed(seed, 0)).unwrap();
    let sw = simulate(6, &grid, &OU, derive_seed(seed, 1)).unwrap();
    let (ca, cb) = (f64::from(a) / 7.0, f64::from(b) / 3.0);
    let lhs = z_delta(&combine(&sx, &sw, ca, cb), 0.05).unwrap();
    let (zx, zw) = (z_delta(&sx, 0.05).unwrap(), z_delta(&sw, 0.05).unwrap());
    for ((l, u), v) in lhs
        .values
        .as_slice()
        .iter()
        .zip(zx.values.as_slice())
        .zip(zw.values.as_slice())
    {
        let r = ca * u + cb * v;
        let scale = (ca * u).abs() + (cb * v).abs() + 1e-300;
        check((l - r).abs() <= 1e-12 * scale.max(1.0), || {
            format!("{l} vs {r}")
        })?;
    }
    Ok(())
}

/// Affine curves have identically zero second differences.
pub fn prop_affine_annihilation(
    intercepts: &[i32],
    slopes: &[i32],
    p: usize,
    k: usize,
    real_slope: f64,
) -> Result<(), TestCaseError> {
    let rows: Vec<Vec<i32>> = intercepts
        .iter()
        .zip(slopes)
        .map(|(c, s)| (0..p as i32).map(|j| c + s * j).collect())
        .collect();
    let data = integer_dataset(&rows, None);
    let z = z_delta(&data, k as f64 * data.grid.spacing()).unwrap();
    check(z.values.as_slice().iter().all(|v| *v == 0.0), || {
        "integer affine Z not zero".into()
    })?;

    let grid = Grid::new(-1.0, 2.0, p).unwrap();
    let rows: Vec<Vec<f64>> = intercepts
        .iter()
        .map(|&c| {
            grid.points()
                .iter()
                .map(|t| f64::from(c) + real_slope * t)
                .collect()
        })
        .collect();
    let scale = rows
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let data = FunctionalDataset::new(grid, CurveMatrix::from_rows(&rows).unwrap(), None).unwrap();
    let z = z_delta(&data, k as f64 * grid.spacing()).unwrap();
    check(
        z.values.as_slice().iter().all(|v| v.abs() <= 1e-13 * scale),
        || "real affine Z not negligible".into(),
    )
}

fn cutoff_outcome(
    data: &FunctionalDataset,
    cfg: &DetectionConfig,
) -> (Vec<usize>, usize, Vec<f64>) {
    let list = detect_candidates(data, cfg).unwrap();
    let lambda = default_cutoff(
        data.responses().unwrap(),
        data.grid.width(),
        list.window.delta,
        cfg.cutoff_a,
    )
    .unwrap();
    let t = threshold_select(&list, lambda);
    (
        list.candidates.iter().map(|c| c.grid_index).collect(),
        t.s_hat,
        list.candidates.iter().map(|c| c.normalized).collect(),
    )
}

fn scale_responses(data: &FunctionalDataset, c: f64) -> FunctionalDataset {
    let y = data.responses().unwrap().iter().map(|v| c * v).collect();
    let mut out = data.clone();
    out.responses = Some(y);
    out
}

fn scale_curves(data: &FunctionalDataset, c: f64) -> FunctionalDataset {
    let mut out = data.clone();
    out.curves = data.curves.scaled(c);
    out
}

/// Detection is unchanged by `Y -> cY` and `X -> cX` for `c > 0`; so is kappa-hat
/// under `X -> cX`.
pub fn prop_scaling_invariance(
    seed: u64,
    n: usize,
    c: f64,
    dlogd: bool,
) -> Result<(), TestCaseError> {
    let data = two_impact_data(n, 201, seed);
    let mut cfg = DetectionConfig::for_sample_size(n, &data.grid);
    if dlogd {
        cfg = cfg.with_exclusion(Exclusion::DeltaLogDelta);
    }
    let (idx, s, norm) = cutoff_outcome(&data, &cfg);

    let (idx_y, s_y, _) = cutoff_outcome(&scale_responses(&data, c), &cfg);
    check(idx == idx_y && s == s_y, || {
        format!("cY changed detection: {idx:?}/{s} vs {idx_y:?}/{s_y}")
    })?;

    let (idx_x, s_x, norm_x) = cutoff_outcome(&scale_curves(&data, c), &cfg);
    check(idx == idx_x && s == s_x, || {
        format!("cX changed detection: {idx:?}/{s} vs {idx_x:?}/{s_x}")
    })?;
    // |normalized| is bounded by the root mean square of Y, which sets the
    // scale of cancellation in the sums.
    let y = data.responses().unwrap();
    let bound = 1e-12 * (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
    for (u, v) in norm.iter().zip(&norm_x) {
        check((u - v).abs() <= bound, || format!("normalized {u} vs {v}"))?;
    }
    let prof = statistic_profile(&data, cfg.delta).unwrap();
    let prof_x = statistic_profile(&scale_curves(&data, c), cfg.delta).unwrap();
    for (u, v) in prof.normalized.iter().zip(&prof_x.normalized) {
        check((u - v).abs() <= bound, || format!("profile {u} vs {v}"))?;
    }

    let k1 = estimate_kappa(&data, 0.04).unwrap();
    let k2 = estimate_kappa(&scale_curves(&data, c), 0.04).unwrap();
    check((k1 - k2).abs() <= 1e-12, || format!("kappa {k1} vs {k2}"))
}

/// Every pair of candidates lies at least one exclusion radius apart.
pub fn prop_candidate_separation(
    seed: u64,
    n: usize,
    p: usize,
    dlogd: bool,
) -> Result<(), TestCaseError> {
    let data = two_impact_data(n, p, seed);
    let mut cfg = DetectionConfig::for_sample_size(n, &data.grid);
    if dlogd {
        cfg = cfg.with_exclusion(Exclusion::DeltaLogDelta);
    }
    let list = detect_candidates(&data, &cfg).unwrap();
    for (i, a) in list.candidates.iter().enumerate() {
        for b in &list.candidates[i + 1..] {
            let d = index_distance(&data.grid, a.grid_index, b.grid_index);
            check(d >= list.radius, || {
                format!(
                    "candidates {} and {} only {d} apart",
                    a.location, b.location
                )
            })?;
        }
    }
    Ok(())
}

/// Eigenfunctions are orthonormal under the quadrature inner product and the
/// scores are uncorrelated with variances equal to the eigenvalues.
pub fn check_eigensystem(eig: &EigenSystem, n: usize) -> Result<(), TestCaseError> {
    let rule = eig.rule();
    let k = eig.k();
    let lead = eig.eigenvalues().first().copied().unwrap_or(0.0);
    for j in 0..k {
        for l in 0..k {
            let ip = rule
                .inner(eig.eigenfunction(j), eig.eigenfunction(l))
                .unwrap();
            let want = if j == l { 1.0 } else { 0.0 };
            check((ip - want).abs() <= 1e-8, || {
                format!("<psi_{j}, psi_{l}> = {ip}")
            })?;
            let cov: f64 = (0..n)
                .map(|i| eig.scores().get(i, j) * eig.scores().get(i, l))
                .sum::<f64>()
                / n as f64;
            let want = if j == l { eig.eigenvalues()[j] } else { 0.0 };
            check((cov - want).abs() <= 1e-8 * lead, || {
                format!("score cov ({j},{l}) = {cov}, want {want}")
            })?;
        }
    }
    check(
        eig.eigenvalues().windows(2).all(|w| w[0] >= w[1])
            && eig.eigenvalues().iter().all(|v| *v >= 0.0),
        || "eigenvalues not sorted and nonnegative".into(),
    )
}

pub fn prop_orthonormality(
    seed: u64,
    n: usize,
    p: usize,
    which: u8,
    k_max: usize,
) -> Result<(), TestCaseError> {
    let process = match which % 3 {
        0 => ProcessSpec::BrownianMotion,
        1 => ProcessSpec::FractionalBrownian { hurst: 0.3 },
        _ => OU,
    };
    let grid = Grid::new(0.0, 1.0, p).unwrap();
    let x = simulate(n, &grid, &process, seed).unwrap();
    let data = center(&x).unwrap().data;
    let eig = empirical_kl(&data, k_max, &QuadratureRule::trapezoid(&grid)).unwrap();
    check_eigensystem(&eig, n)
}

/// Residuals of the augmented fit.
pub fn residuals(data: &FunctionalDataset, eig: &EigenSystem, fit: &AugmentedFit) -> Vec<f64> {
    let y = data.responses().unwrap();
    (0..data.n())
        .map(|i| {
            let mut r = y[i];
            for j in 0..fit.k {
                r -= fit.alpha_hat[j] * eig.scores().get(i, j);
            }
            for (b, &idx) in fit.beta_hat_impacts.iter().zip(&fit.selected_indices) {
                r -= b * data.curves.get(i, idx);
            }
            r
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Residuals are orthogonal to every design column, the reported RSS and BIC
/// agree with them, and adding a column never raises the RSS.
pub fn prop_least_squares(
    seed: u64,
    n: usize,
    taus: &[f64],
    k: usize,
) -> Result<(), TestCaseError> {
    let data = two_impact_data(n, 101, seed);
    let eig = empirical_kl(&data, 8, &QuadratureRule::trapezoid(&data.grid)).unwrap();
    let fit = fit_augmented(&data, &eig, taus, k).unwrap();
    let res = residuals(&data, &eig, &fit);
    let rn = norm(&res);
    let mut columns: Vec<Vec<f64>> = (0..fit.k).map(|j| eig.scores().column(j)).collect();
    columns.extend(fit.selected_indices.iter().map(|&j| data.curves.column(j)));
    for col in &columns {
        let dot: f64 = col.iter().zip(&res).map(|(a, b)| a * b).sum();
        check(dot.abs() <= 1e-8 * norm(col) * rn.max(1e-300), || {
            format!("residual dot {dot}")
        })?;
    }
    let rss: f64 = res.iter().map(|r| r * r).sum();
    check((rss - fit.rss).abs() <= 1e-8 * rss.max(1e-12), || {
        format!("rss {rss} vs {}", fit.rss)
    })?;

    let s = fit.num_impacts();
    let bic = bic_score(fit.rss, n, fit.k + s).unwrap();
    let ident = n as f64 * (fit.rss / n as f64).ln() + (fit.k + s) as f64 * (n as f64).ln();
    check(fit.bic == bic, || format!("bic {} vs {bic}", fit.bic))?;
    check((bic - ident).abs() <= 1e-9 * ident.abs().max(1.0), || {
        format!("bic {bic} vs {ident}")
    })?;

    // Nesting: drop impacts one at a time and lower k; rss must not fall.
    for drop in 0..taus.len() {
        let fewer: Vec<f64> = taus
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != drop)
            .map(|(_, t)| *t)
            .collect();
        let smaller = fit_augmented(&data, &eig, &fewer, k).unwrap();
        check(smaller.rss >= fit.rss * (1.0 - 1e-12), || {
            format!(
                "rss grew when adding a column: {} < {}",
                smaller.rss, fit.rss
            )
        })?;
    }
    if k > 0 {
        let smaller = fit_augmented(&data, &eig, taus, k - 1).unwrap();
        check(smaller.rss >= fit.rss * (1.0 - 1e-12), || {
            "rss grew when adding a component".into()
        })?;
    }
    Ok(())
}

/// Each estimate is matched at most once, and every match lies inside its cell
/// and no further than half the cell width from the truth.
pub fn prop_match_uniqueness(truth: &[f64], estimates: &[f64]) -> Result<(), TestCaseError> {
    let matched = match_impacts(truth, estimates);
    check(matched.len() == truth.len(), || {
        "one slot per true point".into()
    })?;
    let used: Vec<f64> = matched.iter().flatten().copied().collect();
    for (i, a) in used.iter().enumerate() {
        check(
            !used[i + 1..].iter().any(|b| a.to_bits() == b.to_bits()),
            || format!("estimate {a} matched twice"),
        )?;
    }
    for (r, m) in matched.iter().enumerate() {
        let lo = if r == 0 {
            0.0
        } else {
            0.5 * (truth[r - 1] + truth[r])
        };
        let hi = if r + 1 == truth.len() {
            1.0
        } else {
            0.5 * (truth[r] + truth[r + 1])
        };
        let inside: Vec<f64> = estimates
            .iter()
            .copied()
            .filter(|e| *e >= lo && (*e < hi || (r + 1 == truth.len() && *e <= hi)))
            .collect();
        match m {
            Some(e) => {
                check(inside.contains(e), || format!("{e} outside cell {r}"))?;
                // Half the gap to the neighbouring true point on that side.
                let bound = if *e >= truth[r] {
                    hi - truth[r]
                } else {
                    truth[r] - lo
                };
                check((e - truth[r]).abs() <= bound, || {
                    format!("{e} farther than half the gap")
                })?;
                let best = inside
                    .iter()
                    .map(|v| (v - truth[r]).abs())
                    .fold(f64::INFINITY, f64::min);
                check((e - truth[r]).abs() == best, || {
                    "not the closest estimate".into()
                })?;
            }
            None => check(inside.is_empty(), || {
                format!("cell {r} had candidates but none matched")
            })?,
        }
    }
    Ok(())
}

/// Same seed gives identical simulations and identical study reports, serial or parallel.
pub fn prop_seed_determinism(seed: u64, which: u8) -> Result<(), TestCaseError> {
    let grid = Grid::unit(65).unwrap();
    let process = match which % 3 {
        0 => ProcessSpec::BrownianMotion,
        1 => ProcessSpec::FractionalBrownian { hurst: 0.7 },
        _ => OU,
    };
    let a = simulate(7, &grid, &process, seed).unwrap();
    let b = simulate(7, &grid, &process, seed).unwrap();
    check(a == b, || "simulation not reproducible".into())?;
    let c = simulate(7, &grid, &process, seed.wrapping_add(1)).unwrap();
    check(a != c, || "different seeds gave identical curves".into())?;

    let mut cfg =
        StudyConfig::two_impact_design(which.is_multiple_of(2), vec![SampleSize { n: 40, p: 101 }], 6);
    cfg.process = process;
    cfg.seed = seed;
    cfg.parallel = true;
    let par = run_simulation_study(&cfg).unwrap();
    cfg.parallel = false;
    let ser = run_simulation_study(&cfg).unwrap();
    check(par.rows == ser.rows && par.records == ser.records, || {
        "parallel and serial studies differ".into()
    })?;
    let again = run_simulation_study(&cfg).unwrap();
    check(
        serde_json::to_string(&again).unwrap() == serde_json::to_string(&ser).unwrap(),
        || "study not reproducible".into(),
    )
}

/// Strategy for sorted, well separated true impact points in (0, 1).
pub fn sorted_taus() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(1u32..99, 1..5)
        .prop_map(|s| s.into_iter().map(|v| f64::from(v) / 100.0).collect())
}

pub fn estimates() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..=200, 0..8)
        .prop_map(|v| v.into_iter().map(|x| f64::from(x) / 200.0).collect())
}

/// Impact locations on the 101-point grid, distinct and away from the ends.
pub fn fit_taus() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(5u32..96, 0..4)
        .prop_map(|s| s.into_iter().map(|v| f64::from(v) / 100.0).collect())
}

/// Checks a JSON document against one of the published schema files.
pub fn validate_schema(name: &str, doc: &serde_json::Value) -> Result<(), String> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(format!("{name}.schema.json"));
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let schema: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("; "))
    }
}
