use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{
    EosScanConfig, ExtendConfig, ManifoldConfig, MapConfig, ProbeConfig, ProbeFunction, ProblemConfig, ScanMode,
    SolveConfig, SuiteName, SurgeryConfig, VerifyConfig,
};
use super::output::{write_diagnostics_csv, OutDir};
use super::CliError;
use crate::eos::{
    bifurcation_scan, factorization_base, first_departure, gauss_newton_operator, lambda1, locate_transition, mat2,
    minimiser_chart, scalar_scan, splitting_at, write_scan_csv, ClassifierThresholds, EosError, FactorizationProblem,
    ScalarQuadratic, ScanRow,
};
use crate::extension::{
    c1_distance_to_linearization, extend_map, find_safe_radius, verify_global_bounds, BoundReport, BundleMap,
    ExtendedMap, ExtensionError, RadiusProbe, SafeRadii, TubeGrid,
};
use crate::linalg::sym_eigen_desc;
use crate::manifold::{
    make_arc_model, make_circle_model, make_shear_benchmark, LinearBundleMap, ManifoldModel, ShearProfile,
};
use crate::nonsmooth::{lambda1_field, lip_vs_clarke_check, sample_jacobians, ClarkeError, ProbeReport};
use crate::surgery::{build_arc_surgery, verify_surgery, ArcSurgeryConfig, FrameChoice, SurgeryReport, VerifyGrid};
use crate::transform::{
    base_speed, contraction_ratio, derivative_bound_trace, invariance_residual, random_admissible_section,
    section_grid, solve_fixed_section, tangency_check, DerivativeReport, Section, TransformConfig, TransformError,
};

/// Largest number of halvings of `r_max` tried when certifying a radius.
pub const RADIUS_HALVINGS: usize = 12;

/// A map on a trivialised tube with its known invariant section.
pub struct Bundle {
    pub model: ManifoldModel,
    pub map: Arc<dyn BundleMap>,
    pub oracle: ShearProfile,
}

pub fn build_bundle(p: &ProblemConfig) -> Result<Bundle, CliError> {
    p.validate()?;
    let blocks = p.map.blocks();
    let ranks = blocks.ranks().map_err(|e| CliError::Config(e.to_string()))?;
    let model = match p.manifold {
        ManifoldConfig::Circle => make_circle_model(ranks),
        ManifoldConfig::Arc { lo, hi } => make_arc_model(lo, hi, ranks).map_err(|e| CliError::Config(e.to_string()))?,
    };
    let config_err = |e: crate::manifold::ManifoldError| CliError::Config(e.to_string());
    match &p.map {
        MapConfig::Shear { blocks, shear } => {
            let b = make_shear_benchmark(&model, blocks.clone(), shear.clone()).map_err(config_err)?;
            Ok(Bundle {
                model,
                map: b.map,
                oracle: b.oracle,
            })
        }
        MapConfig::Linear { blocks } => {
            let zero = ShearProfile::zero(ranks.stable);
            let mut plain = blocks.clone();
            plain.base_drift = 0.0;
            plain.stable_cubic = 0.0;
            // validates the spectrum
            make_shear_benchmark(&model, plain, zero.clone()).map_err(config_err)?;
            let diag: Vec<f64> = blocks
                .unstable
                .iter()
                .chain(&blocks.centre)
                .chain(&blocks.stable)
                .copied()
                .collect();
            Ok(Bundle {
                model,
                map: Arc::new(LinearBundleMap {
                    matrix: DMatrix::from_diagonal(&DVector::from_vec(diag)),
                }),
                oracle: zero,
            })
        }
    }
}

fn failure<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Failure(e.to_string())
}

fn extension_error(e: ExtensionError) -> CliError {
    match e {
        ExtensionError::RadiusTooLarge { .. } | ExtensionError::NonpositiveRadius(_) => CliError::Config(e.to_string()),
        other => CliError::Failure(other.to_string()),
    }
}

pub fn safe_radii(bundle: &Bundle, p: &ProblemConfig, seed: u64) -> Result<SafeRadii, CliError> {
    let probe = RadiusProbe {
        base_nodes: p.radius_probe.base_nodes,
        shells: p.radius_probe.shells,
        random_directions: p.radius_probe.random_directions,
        seed,
    };
    find_safe_radius(bundle.map.as_ref(), &bundle.model, &probe).map_err(extension_error)
}

fn bound_grid(bundle: &Bundle, p: &ProblemConfig, r: f64) -> TubeGrid {
    TubeGrid::ball_grid(&bundle.model, 4.0 * r, p.bound_grid.base_nodes, p.bound_grid.per_axis)
}

pub fn bounds_at(
    bundle: &Bundle,
    p: &ProblemConfig,
    radii: &SafeRadii,
    r: f64,
) -> Result<(ExtendedMap, BoundReport), CliError> {
    let ext = extend_map(bundle.map.clone(), &bundle.model, r, radii).map_err(extension_error)?;
    let rep = verify_global_bounds(&ext, p.epsilon, p.kappa(), &bound_grid(bundle, p, r)).map_err(extension_error)?;
    Ok((ext, rep))
}

/// Largest rung `r_max 2^-k`, `k <= RADIUS_HALVINGS`, on which the block
/// bounds hold.
pub fn certified_radius(bundle: &Bundle, p: &ProblemConfig, radii: &SafeRadii) -> Result<Option<f64>, CliError> {
    let mut r = radii.r_max;
    for _ in 0..=RADIUS_HALVINGS {
        if bounds_at(bundle, p, radii, r)?.1.pass {
            return Ok(Some(r));
        }
        r *= 0.5;
    }
    Ok(None)
}

/// The configured radius, or the certified one.
pub fn working_radius(bundle: &Bundle, p: &ProblemConfig, radii: &SafeRadii) -> Result<f64, CliError> {
    match p.r {
        Some(r) if r > radii.r_max => Err(CliError::Config(format!("r = {r} exceeds r_max = {}", radii.r_max))),
        Some(r) => Ok(r),
        None => certified_radius(bundle, p, radii)?
            .ok_or_else(|| CliError::Failure("no radius on the ladder satisfies the block bounds".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderRung {
    pub r: f64,
    pub c0: f64,
    pub c1: f64,
    pub bounds: BoundReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtendReport {
    pub radii: SafeRadii,
    pub certified_r: Option<f64>,
    pub ladder: Vec<LadderRung>,
    /// `c0(r) / c0(r/2)` down the ladder.
    pub c0_ratios: Vec<f64>,
    pub c1_ratios: Vec<f64>,
    /// Distances are non-increasing down the ladder.
    pub pass: bool,
}

fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[0] / w[1]).collect()
}

/// Safe radii, block bounds and C^1 distance to the linearisation over
/// `r, r/2, r/4`, starting from the configured `r` or `r_max`.
pub fn cmd_extend(cfg: &ExtendConfig) -> Result<ExtendReport, CliError> {
    let p = &cfg.problem;
    let bundle = build_bundle(p)?;
    let radii = safe_radii(&bundle, p, cfg.seed)?;
    let top = match p.r {
        Some(r) if r > radii.r_max => {
            return Err(CliError::Config(format!("r = {r} exceeds r_max = {}", radii.r_max)));
        }
        Some(r) => r,
        None => radii.r_max,
    };
    let mut ladder = Vec::new();
    for k in 0..3 {
        let r = top * 0.5f64.powi(k);
        let (ext, bounds) = bounds_at(&bundle, p, &radii, r)?;
        let d = c1_distance_to_linearization(&ext, &bound_grid(&bundle, p, r)).map_err(extension_error)?;
        log::info!(
            "rung r = {r:.3e}: c0 {:.3e}, c1 {:.3e}, bounds pass {}",
            d.c0,
            d.c1,
            bounds.pass
        );
        ladder.push(LadderRung {
            r,
            c0: d.c0,
            c1: d.c1,
            bounds,
        });
    }
    let c0: Vec<f64> = ladder.iter().map(|l| l.c0).collect();
    let c1: Vec<f64> = ladder.iter().map(|l| l.c1).collect();
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14);
    Ok(ExtendReport {
        certified_r: certified_radius(&bundle, p, &radii)?,
        radii,
        pass: monotone(&c0) && monotone(&c1),
        c0_ratios: ratios(&c0),
        c1_ratios: ratios(&c1),
        ladder,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckValue {
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckValue {
    fn at_most(value: f64, bound: f64) -> Self {
        CheckValue {
            value,
            bound,
            pass: value <= bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub r: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub contraction_rate: f64,
    pub base_nodes: usize,
    pub fibre_nodes: usize,
    pub sweeps: usize,
    pub final_residual: f64,
    pub projections: usize,
    pub bounds: BoundReport,
    /// `max |sigma - psi|` over grid nodes in `E_cu(r)`.
    pub oracle_error: CheckValue,
    /// Largest `|T s1 - T s2| / |s1 - s2|` over random section pairs.
    pub contraction: CheckValue,
    pub tangency_step: f64,
    pub tangency: CheckValue,
    pub invariance: CheckValue,
    pub derivatives: DerivativeReport,
    pub pass: bool,
}

/// Everything a solve produces.
pub struct SolveOutcome {
    pub report: SolveReport,
    pub section: Section,
    pub diagnostics: Vec<crate::transform::SweepDiagnostics>,
    pub lipschitz_estimate: f64,
}

pub fn oracle_error(sigma: &Section, oracle: &ShearProfile) -> f64 {
    let r = sigma.r;
    let mut worst: f64 = 0.0;
    let mut want = vec![0.0; sigma.grid.p];
    for idx in 0..sigma.grid.len() {
        let (x, q) = sigma.grid.node(idx);
        if q.iter().map(|a| a * a).sum::<f64>().sqrt() > r * (1.0 + 1e-12) {
            continue;
        }
        oracle.value_into(x, &q, &mut want);
        for (a, b) in sigma.node_value(idx).iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

fn transform_error(e: TransformError) -> CliError {
    match e {
        TransformError::InvalidConfig(m) => CliError::Config(m),
        other => CliError::Failure(other.to_string()),
    }
}

pub fn transform_config(cfg: &SolveConfig, r: f64) -> Result<TransformConfig, CliError> {
    let p = &cfg.problem;
    let mut tc = TransformConfig::new(r, p.epsilon, p.kappa(), cfg.grid.base_nodes, cfg.grid.fibre_nodes);
    if let Some(t) = cfg.grid.fixed_point_tol {
        tc.fixed_point_tol = t;
    }
    if let Some(m) = cfg.grid.max_sweeps {
        tc.max_sweeps = m;
    }
    tc.validate().map_err(transform_error)?;
    Ok(tc)
}

pub fn cmd_solve(cfg: &SolveConfig) -> Result<SolveOutcome, CliError> {
    let p = &cfg.problem;
    let bundle = build_bundle(p)?;
    // grid and rate constraints are checked before any work
    transform_config(cfg, p.r.unwrap_or(1.0))?;
    let radii = safe_radii(&bundle, p, cfg.seed)?;
    let r = working_radius(&bundle, p, &radii)?;
    let tc = transform_config(cfg, r)?;
    let (ext, bounds) = bounds_at(&bundle, p, &radii, r)?;
    log::info!("solving at r = {r:.3e} on {}x{} nodes", tc.base_nodes, tc.fibre_nodes);
    let (sigma, trace) = solve_fixed_section(&ext, &tc).map_err(transform_error)?;
    let speed = base_speed(&bundle.model);
    let err = oracle_error(&sigma, &bundle.oracle);

    let checks = &cfg.checks;
    let grid = section_grid(&bundle.model, &tc).map_err(transform_error)?;
    let ranks = bundle.model.ranks();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..checks.contraction_pairs {
        let l1 = rng.random_range(0.2..1.0);
        let l2 = rng.random_range(0.2..1.0);
        let s1 = random_admissible_section(&grid, r, ranks, l1, speed, &mut rng);
        let s2 = random_admissible_section(&grid, r, ranks, l2, speed, &mut rng);
        match contraction_ratio(&ext, &s1, &s2, &tc) {
            Ok(q) => worst_ratio = worst_ratio.max(q),
            Err(TransformError::IdenticalSections) => {}
            Err(e) => return Err(transform_error(e)),
        }
    }
    let h = checks.tangency_spacing_factor.max(2.0) * sigma.grid.fibre_spacing();
    let tangency = tangency_check(&sigma, h).map_err(transform_error)?;
    let inv = invariance_residual(&sigma, &ext, &bundle.model, checks.invariance_samples, cfg.seed)
        .map_err(transform_error)?;
    let derivatives = derivative_bound_trace(&trace, &tc).map_err(transform_error)?;
    let lipschitz_estimate = sigma.lipschitz_estimate(speed);

    let oracle_error = CheckValue::at_most(err, checks.oracle_tolerance);
    let contraction = CheckValue::at_most(worst_ratio, tc.contraction_rate() + checks.contraction_slack);
    let tangency = CheckValue::at_most(tangency, 10.0 * h);
    let invariance = CheckValue::at_most(inv, checks.invariance_factor * err + 1e-12);
    let pass = bounds.pass
        && oracle_error.pass
        && contraction.pass
        && tangency.pass
        && invariance.pass
        && derivatives.sup_d1_bounded
        && derivatives.lip_d1_bounded;
    let report = SolveReport {
        r,
        epsilon: p.epsilon,
        kappa: p.kappa(),
        contraction_rate: tc.contraction_rate(),
        base_nodes: tc.base_nodes,
        fibre_nodes: tc.fibre_nodes,
        sweeps: trace.sweeps(),
        final_residual: trace.residuals.last().copied().unwrap_or(f64::NAN),
        projections: trace.projections,
        bounds,
        oracle_error,
        contraction,
        tangency_step: h,
        tangency,
        invariance,
        derivatives,
        pass,
    };
    Ok(SolveOutcome {
        report,
        section: sigma,
        diagnostics: trace.diagnostics,
        lipschitz_estimate,
    })
}

pub fn write_solve(out: &OutDir, o: &SolveOutcome) -> Result<(), CliError> {
    out.write_json("solve_report.json", &o.report)?;
    out.write_json(
        "section.json",
        &o.section.dump(o.lipschitz_estimate, o.report.final_residual),
    )?;
    let w = out.writer("diagnostics.csv")?;
    write_diagnostics_csv(&o.diagnostics, w).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRecord {
    pub eta: f64,
    pub class: String,
    pub amplitude: f64,
    pub lambda1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EosScanReport {
    pub mode: ScanMode,
    pub lambda1: f64,
    pub eta_critical: f64,
    pub first_departure: Option<f64>,
    /// Convergence boundary located by bisection.
    pub transition: Option<f64>,
    pub transition_relative_error: Option<f64>,
    pub rows: Vec<ScanRecord>,
}

fn eos_error(e: EosError) -> CliError {
    CliError::Config(e.to_string())
}

pub fn cmd_eos_scan(cfg: &EosScanConfig) -> Result<(EosScanReport, Vec<ScanRow>), CliError> {
    let th = ClassifierThresholds::default();
    cfg.scan.validate().map_err(eos_error)?;
    let (rows, transition) = match cfg.mode {
        ScanMode::Scalar => {
            let rows = scalar_scan(&cfg.scan, &th).map_err(eos_error)?;
            let t = match cfg.bisect {
                Some(b) => Some(
                    locate_transition(&ScalarQuadratic, &[0.0], &[1.0], b.lo, b.hi, b.tol, &cfg.scan, &th)
                        .map_err(failure)?,
                ),
                None => None,
            };
            (rows, t)
        }
        ScanMode::Matrix => {
            let problem = FactorizationProblem::from_rows(cfg.y).map_err(eos_error)?;
            let (w1, w2) = minimiser_chart(&problem, &mat2(cfg.a)).map_err(eos_error)?;
            let rows = bifurcation_scan(&problem, &w1, &w2, &cfg.scan, &th).map_err(eos_error)?;
            let t = match cfg.bisect {
                Some(b) => {
                    let (sys, base, dir) = factorization_base(&problem, &w1, &w2).map_err(eos_error)?;
                    Some(locate_transition(&sys, &base, &dir, b.lo, b.hi, b.tol, &cfg.scan, &th).map_err(failure)?)
                }
                None => None,
            };
            (rows, t)
        }
    };
    let eta_critical = rows.first().map(|r| r.eta_critical).unwrap_or(f64::NAN);
    let report = EosScanReport {
        mode: cfg.mode,
        lambda1: 2.0 / eta_critical,
        eta_critical,
        first_departure: first_departure(&rows),
        transition,
        transition_relative_error: transition.map(|t| (t - eta_critical).abs() / eta_critical),
        rows: rows
            .iter()
            .map(|r| ScanRecord {
                eta: r.eta,
                class: r.class.to_string(),
                amplitude: r.amplitude,
                lambda1: r.lambda1,
            })
            .collect(),
    };
    Ok((report, rows))
}

pub fn write_eos_scan(out: &OutDir, report: &EosScanReport, rows: &[ScanRow]) -> Result<(), CliError> {
    let mut w = out.writer("scan.csv")?;
    write_scan_csv(rows, &mut w).map_err(|e| CliError::Io(e.to_string()))?;
    std::io::Write::flush(&mut w).map_err(|e| CliError::Io(e.to_string()))?;
    out.write_json("eos_scan.json", report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SurgeryRun {
    pub frames: FrameChoice,
    pub r: f64,
    pub collar_depth: f64,
    pub s_prime: (f64, f64),
    pub report: SurgeryReport,
}

pub fn cmd_surgery(cfg: &SurgeryConfig) -> Result<SurgeryRun, CliError> {
    let build = build_arc_surgery(&cfg.arc, cfg.frames).map_err(|e| CliError::Config(e.to_string()))?;
    let d = VerifyGrid::default();
    let grid = VerifyGrid {
        base_nodes: cfg.base_nodes.unwrap_or(d.base_nodes),
        fibre_samples: cfg.fibre_samples.unwrap_or(d.fibre_samples),
        seed: cfg.arc.seed,
        ..d
    };
    let report = verify_surgery(
        &build.patched,
        build.f.as_ref(),
        &build.collar,
        cfg.arc.blocks.kappa,
        &grid,
    )
    .map_err(failure)?;
    Ok(SurgeryRun {
        frames: cfg.frames,
        r: build.collar.r,
        collar_depth: build.collar.depth,
        s_prime: build.collar.s_prime,
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub suite: SuiteName,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub results: Vec<SuiteResult>,
    pub failures: Vec<SuiteName>,
    pub pass: bool,
}

fn suite(suite: SuiteName, value: f64, tolerance: f64, detail: String) -> SuiteResult {
    SuiteResult {
        suite,
        value,
        tolerance,
        pass: value <= tolerance,
        detail,
    }
}

fn eos_worked_example() -> Result<(FactorizationProblem, nalgebra::Matrix2<f64>), CliError> {
    let problem = FactorizationProblem::from_rows([[2.0, 0.0], [0.0, 1.0]]).map_err(failure)?;
    Ok((problem, mat2([[1.0, 0.0], [0.0, 2.0]])))
}

fn run_suite(name: SuiteName, cfg: &VerifyConfig) -> Result<SuiteResult, CliError> {
    let p = ProblemConfig::default();
    match name {
        SuiteName::Bounds => {
            let bundle = build_bundle(&p)?;
            let radii = safe_radii(&bundle, &p, cfg.seed)?;
            let r = working_radius(&bundle, &p, &radii)?;
            let (_, rep) = bounds_at(&bundle, &p, &radii, r)?;
            let worst = rep.margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(suite(
                name,
                worst,
                0.0,
                format!("largest block-bound margin at r = {r:e}"),
            ))
        }
        SuiteName::Contraction | SuiteName::Oracle => {
            let solve = SolveConfig {
                problem: p,
                grid: super::config::SolveGridConfig {
                    base_nodes: 17,
                    fibre_nodes: 17,
                    ..Default::default()
                },
                checks: super::config::SolveChecksConfig {
                    contraction_pairs: 5,
                    invariance_samples: 200,
                    ..Default::default()
                },
                seed: cfg.seed,
            };
            let o = cmd_solve(&solve)?;
            Ok(if name == SuiteName::Contraction {
                let c = &o.report.contraction;
                suite(name, c.value, c.bound, "worst empirical contraction ratio".into())
            } else {
                let c = &o.report.oracle_error;
                suite(name, c.value, c.bound, "max |sigma - psi| on E_cu(r)".into())
            })
        }
        SuiteName::EosSpectrum => {
            let (problem, a) = eos_worked_example()?;
            let (w1, w2) = minimiser_chart(&problem, &a).map_err(failure)?;
            let g = gauss_newton_operator(&w1, &w2);
            let (e, _) = sym_eigen_desc(&DMatrix::from_column_slice(4, 4, g.as_slice()));
            let want = [8.0, 5.0, 4.25, 1.25];
            let err = e.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let lam = (lambda1(&w1, &w2) - e[0]).abs();
            Ok(suite(
                name,
                err.max(lam),
                1e-12,
                "Gauss-Newton spectrum against {8, 5, 4.25, 1.25}".into(),
            ))
        }
        SuiteName::LiftedSpectrum => {
            let (problem, a) = eos_worked_example()?;
            let rep = splitting_at(&problem, &a).map_err(failure)?;
            let mut err: f64 = 0.0;
            if rep.plus_one_multiplicity != 5 || rep.minus_one_multiplicity != 1 {
                err = f64::INFINITY;
            }
            let mut stable = rep.stable_eigenvalues.clone();
            stable.sort_by(|a, b| a.total_cmp(b));
            for (s, w) in stable.iter().zip([-0.25, -0.0625, 0.6875]) {
                err = err.max((s - w).abs());
            }
            if stable.len() != 3 {
                err = f64::INFINITY;
            }
            Ok(suite(
                name,
                err,
                1e-8,
                "lifted Jacobian multiplicities and E_s spectrum".into(),
            ))
        }
        SuiteName::Surgery => {
            let frames = if cfg.inject_violation {
                FrameChoice::MixedCentre
            } else {
                FrameChoice::SignRespecting
            };
            let run = cmd_surgery(&SurgeryConfig {
                arc: ArcSurgeryConfig {
                    seed: cfg.seed,
                    ..Default::default()
                },
                frames,
                base_nodes: Some(24),
                fibre_samples: Some(12),
            })?;
            let failed: Vec<u8> = run.report.items.iter().filter(|i| !i.pass).map(|i| i.item).collect();
            Ok(SuiteResult {
                suite: name,
                value: failed.len() as f64,
                tolerance: 0.0,
                pass: run.report.pass,
                detail: format!("failed items {failed:?}"),
            })
        }
        SuiteName::Clarke => {
            let f = |v: &DVector<f64>| v.map(|a| a * a.abs());
            let c = lip_vs_clarke_check(&f, &[(-1.0, 1.0)], 10_000, cfg.seed).map_err(failure)?;
            // both estimates are sample-limited lower bounds of the true constant
            let consistent = c.consistent(1e-3);
            Ok(SuiteResult {
                suite: name,
                value: c.gap,
                tolerance: 1e-3,
                pass: consistent && c.gap <= 1e-3,
                detail: format!("lip {} vs clarke {}", c.lip_estimate, c.clarke_sup_estimate),
            })
        }
    }
}

pub fn cmd_verify(cfg: &VerifyConfig) -> Result<VerifyReport, CliError> {
    if cfg.suites.is_empty() {
        return Err(CliError::Config("no suites selected".into()));
    }
    let mut results = Vec::with_capacity(cfg.suites.len());
    for &name in &cfg.suites {
        let res = run_suite(name, cfg)?;
        log::info!("suite {name:?}: {}", if res.pass { "pass" } else { "FAIL" });
        results.push(res);
    }
    let failures: Vec<SuiteName> = results.iter().filter(|r| !r.pass).map(|r| r.suite).collect();
    Ok(VerifyReport {
        pass: failures.is_empty(),
        failures,
        results,
    })
}

fn probe_dims(f: &ProbeFunction) -> Option<usize> {
    match f {
        ProbeFunction::Relu2 => Some(2),
        ProbeFunction::Lambda1 => Some(8),
        ProbeFunction::Abs | ProbeFunction::XAbsX => None,
    }
}

pub fn probe_map(f: &ProbeFunction) -> fn(&DVector<f64>) -> DVector<f64> {
    match f {
        ProbeFunction::Abs => |v| v.map(f64::abs),
        ProbeFunction::XAbsX => |v| v.map(|a| a * a.abs()),
        ProbeFunction::Relu2 => |v| DVector::from_vec(vec![v[0].max(0.0) + v[1], v[0] - v[1].max(0.0)]),
        ProbeFunction::Lambda1 => lambda1_field,
    }
}

pub fn cmd_probe_clarke(cfg: &ProbeConfig) -> Result<ProbeReport, CliError> {
    if cfg.center.is_empty() {
        return Err(CliError::Config("probe centre is empty".into()));
    }
    if let Some(n) = probe_dims(&cfg.function) {
        if cfg.center.len() != n {
            return Err(CliError::Config(format!(
                "{:?} takes {n} coordinates, got {}",
                cfg.function,
                cfg.center.len()
            )));
        }
    }
    let f = probe_map(&cfg.function);
    let x = DVector::from_column_slice(&cfg.center);
    let set = sample_jacobians(&f, &x, cfg.radius, cfg.count, cfg.seed).map_err(|e| match e {
        ClarkeError::InvalidInput(m) => CliError::Config(m),
        other => CliError::Failure(other.to_string()),
    })?;
    Ok(ProbeReport::from_set(&set))
}
