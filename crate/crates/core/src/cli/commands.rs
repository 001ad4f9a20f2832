//! The `solve`, `exhaust` and `verify` commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::{ConfigError, RunConfig, Validated};
use super::report::{self, Check, ExhaustionReport, LpRow, Report, VerificationSummary};
use crate::exhaustion::{
    barrier_check, decay_fit, default_potential_grid, potential_bound_check, lp_summary, run_exhaustion,
    ExhaustionError, ExhaustionOptions, BARRIER_TOLERANCE,
};
use crate::field::{self, Exponent, Field, Region};
use crate::lattice::LatticeDomain;
use crate::linear::{linear_energy_eval, linear_solve, LinearSolveOptions, Method, DENSE_MAX_UNKNOWNS};
use crate::scheme::{
    max_symmetry_deviation, newton_solve, solve_bounded, BoundedSolution, NewtonOptions, SchemeError,
};

pub const DEFAULT_OUTPUT_DIR: &str = "out";
/// `max over B_R of f^{(R')} - f^{(R)}` allowed between nested radii.
pub const NESTED_TOLERANCE: f64 = 1e-8;
/// Allowed `|‖f^{(R_last)}‖₂ - ‖f^{(R_prev)}‖₂|`.
pub const L2_STABILIZATION: f64 = 1e-3;
/// Allowed shortfall of the fitted decay rate below `α(1-ε)`.
pub const DECAY_RATE_SLACK: f64 = 0.01;
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
pub const MAXIMALITY_TOLERANCE: f64 = 1e-8;
/// Shells checked by the barrier inequality.
pub const BARRIER_SHELLS: (u64, u64) = (2, 20);
/// Radius cap for the solves run by `verify`.
pub const VERIFY_RADIUS: u64 = 10;
pub const NEWTON_RADIUS: u64 = 8;
const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output_dir` from the config.
    pub output_dir: Option<PathBuf>,
    pub jobs: usize,
    pub quiet: bool,
}

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Convergence(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CommandError {
    /// Process exit code: 2 for bad input, 3 for convergence failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) | CommandError::Io(_) => 2,
            CommandError::Convergence(_) => 3,
        }
    }
}

fn prepare(config_path: &Path) -> Result<(RunConfig, Validated), CommandError> {
    let config = RunConfig::load(config_path)?;
    let validated = config.validate()?;
    Ok((config, validated))
}

fn output_dir(config: &RunConfig, opts: &RunOptions) -> PathBuf {
    opts.output_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn ball(config: &RunConfig, radius: u64) -> Arc<LatticeDomain> {
    Arc::new(LatticeDomain::ball(config.dimension, radius as i64).expect("validated dimension and radius"))
}

/// Writes whatever trace a failed solve left behind and converts the error.
/// A scheme integrity violation is a failed check, reported through `report`.
fn handle_solve_error(
    err: &SchemeError<f64>,
    radius: u64,
    dir: &Path,
    report: &mut Report,
) -> Result<(), CommandError> {
    if let Some(trace) = err.trace() {
        report::write_file(dir, &format!("trace_R{radius}.csv"), &report::trace_csv(trace))?;
    }
    match err {
        SchemeError::Integrity { .. } => {
            report.checks.push(Check::failed("monotone_iteration", format!("radius {radius}: {err}")));
            Ok(())
        }
        SchemeError::Lattice(e) => Err(ConfigError::Invalid { field: "vortices", message: e.to_string() }.into()),
        _ => Err(CommandError::Convergence(format!("radius {radius}: {err}"))),
    }
}

fn write_solution(
    config: &RunConfig,
    dir: &Path,
    sol: &BoundedSolution,
) -> Result<(), CommandError> {
    let r = sol.domain().radius();
    if config.emit.field_csv {
        report::write_file(dir, &format!("field_R{r}.csv"), &report::field_csv(&sol.field))?;
    }
    if config.emit.trace_csv {
        report::write_file(dir, &format!("trace_R{r}.csv"), &report::trace_csv(&sol.trace))?;
    }
    Ok(())
}

fn finish(config: &RunConfig, dir: &Path, name: &str, mut report: Report) -> Result<Report, CommandError> {
    report.finish();
    if config.emit.report_json {
        report::write_file(dir, name, &report.to_json())?;
    }
    Ok(report)
}

/// Solves on the largest configured radius.
pub fn cmd_solve(config_path: &Path, opts: &RunOptions) -> Result<Report, CommandError> {
    let (config, v) = prepare(config_path)?;
    let dir = output_dir(&config, opts);
    let radius = config.largest_radius();
    let mut report = Report::new("solve", &config);
    match solve_bounded(&ball(&config, radius), &v.vortices, &v.params, &v.solve) {
        Ok(sol) => {
            write_solution(&config, &dir, &sol)?;
            report.radii.push(report::radius_report(&sol, config.tol_nonlinear));
        }
        Err(e) => handle_solve_error(&e, radius, &dir, &mut report)?,
    }
    finish(&config, &dir, "solve_report.json", report)
}

/// Solves on every radius, compares nested solutions and fits the decay.
pub fn cmd_exhaust(config_path: &Path, opts: &RunOptions) -> Result<Report, CommandError> {
    let (config, v) = prepare(config_path)?;
    if config.radii.len() < 2 {
        return Err(ConfigError::Invalid { field: "radii", message: "exhaust needs at least two radii".into() }.into());
    }
    let dir = output_dir(&config, opts);
    let mut report = Report::new("exhaust", &config);
    let ex_opts = ExhaustionOptions { solve: v.solve, jobs: opts.jobs.max(1) };
    let result = match run_exhaustion(config.dimension, &v.vortices, &v.params, &config.radii, &ex_opts) {
        Ok(r) => r,
        Err(ExhaustionError::Solve { radius, source, .. }) => {
            handle_solve_error(&source, radius, &dir, &mut report)?;
            return finish(&config, &dir, "exhaust_report.json", report);
        }
        Err(e) => return Err(ConfigError::Invalid { field: "radii", message: e.to_string() }.into()),
    };

    for sol in &result.solutions {
        write_solution(&config, &dir, sol)?;
        report.radii.push(report::radius_report(sol, config.tol_nonlinear));
    }

    let max_delta = result.pointwise_deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report.checks.push(Check::at_most("nested_monotone", max_delta, NESTED_TOLERANCE));
    let l2_increments: Vec<f64> = result.l2_norms.windows(2).map(|w| w[1] - w[0]).collect();
    let worst_drop = l2_increments.iter().map(|&d| -d).fold(f64::NEG_INFINITY, f64::max);
    report.checks.push(Check::at_most("l2_nondecreasing", worst_drop, 1e-10));
    report.checks.push(Check::at_most("l2_stabilization", result.l2_last_increment(), L2_STABILIZATION));

    let p_list = [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Finite(4.0), Exponent::Infinity];
    let lp = lp_summary(&result, &p_list).expect("valid exponents");
    let mut lp_check = Check::at_most("lp_norms_ordered", 0.0, 0.0);
    lp_check.passed = lp.all_finite && lp.ordered;
    lp_check.detail = format!("finite: {}, nonincreasing in p: {}", lp.all_finite, lp.ordered);
    report.checks.push(lp_check);
    report.exhaustion = Some(ExhaustionReport {
        pointwise_deltas: result.pointwise_deltas.clone(),
        l2_increments,
        l1_increments: lp.l1_increments.clone(),
        lp_norms: lp
            .rows
            .iter()
            .map(|&(p, value)| LpRow {
                p: match p {
                    Exponent::Finite(p) => format!("{p}"),
                    Exponent::Infinity => "inf".into(),
                },
                value,
            })
            .collect(),
    });

    let largest = result.largest();
    match decay_fit(largest, config.epsilon) {
        Ok(fit) => {
            let floor = fit.guaranteed_rate - DECAY_RATE_SLACK;
            report.checks.push(Check {
                name: "decay_rate".into(),
                passed: fit.rate_holds(DECAY_RATE_SLACK),
                margin: Some(fit.fitted_rate - floor),
                detail: format!("fitted {:.6} >= {:.6}", fit.fitted_rate, floor),
            });
            let mut env = Check::at_most("decay_envelope", 0.0, 0.0);
            env.passed = fit.envelope_holds();
            env.detail = format!("C_fit = {:e} on window [{}, {}]", fit.c_fit, fit.window.0, fit.window.1);
            report.checks.push(env);
            report::write_file(&dir, "decay.csv", &report::decay_csv(&fit))?;
            report.decay = Some(report::decay_report(largest.domain().radius(), &fit));
        }
        Err(e) => report.checks.push(Check::failed("decay_rate", e.to_string())),
    }
    finish(&config, &dir, "exhaust_report.json", report)
}

fn random_interior(dom: &Arc<LatticeDomain>, rng: &mut ChaCha8Rng, scale: f64) -> Field {
    let vals: Vec<f64> = (0..dom.n_interior()).map(|_| rng.gen_range(-scale..scale)).collect();
    Field::dirichlet_from_interior(dom.clone(), &vals)
}

/// Largest radius whose ball has at most `limit` interior vertices, or
/// `None` if even `B_lo` is too large.
fn radius_within(dimension: usize, lo: u64, hi: u64, limit: usize) -> Option<u64> {
    (lo..=hi)
        .rev()
        .find(|&r| LatticeDomain::ball(dimension, r as i64).is_ok_and(|d| d.n_interior() <= limit))
}

fn check_summation_by_parts(dom: &Arc<LatticeDomain>, rng: &mut ChaCha8Rng) -> Check {
    let worst = (0..20)
        .map(|_| {
            let f = Field::from_fn(dom.clone(), |_| rng.gen_range(-1.0..1.0));
            let g = random_interior(dom, rng, 1.0);
            field::sum_by_parts_defect(&f, &g).expect("same domain").abs()
        })
        .fold(0.0, f64::max);
    Check::at_most("summation_by_parts", worst, 1e-10)
}

/// Iterative against dense solves, then the minimizer property of `F`.
fn check_linear_oracle(dimension: usize, rng: &mut ChaCha8Rng) -> Vec<Check> {
    let r_max = radius_within(dimension, 1, 40, 500).unwrap_or(0);
    let cg = LinearSolveOptions::default().with_tol(1e-14);
    let dense = LinearSolveOptions::default().with_method(Method::DenseLu);
    let mut worst: f64 = 0.0;
    let mut last = None;
    for _ in 0..20 {
        let r = rng.gen_range(r_max.min(1)..=r_max);
        let dom = Arc::new(LatticeDomain::ball(dimension, r as i64).expect("valid radius"));
        let k = rng.gen_range(0.1..5.0);
        let v = random_interior(&dom, rng, 1.0);
        let (x, y) = match (linear_solve(&v, k, &cg), linear_solve(&v, k, &dense)) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(e), _) | (_, Err(e)) => return vec![Check::failed("linear_oracle", e.to_string())],
        };
        let l2 = |f: &Field| field::norm(f, Exponent::Finite(2.0), Region::Interior).expect("finite exponent");
        let rel = l2(&x.zip_map(&y, |a, b| a - b).expect("same domain")) / l2(&y).max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        last = Some((v, k, y));
    }
    let mut checks = vec![Check::at_most("linear_oracle", worst, 1e-10)];

    let (v, k, u) = last.expect("twenty systems");
    let f0 = linear_energy_eval(&u, &v, k);
    let dom = v.domain().clone();
    let drop = (0..100)
        .map(|_| {
            let phi = random_interior(&dom, rng, 1.0);
            let t = rng.gen_range(-1.0..1.0);
            let moved = u.zip_map(&phi, |a, b| a + t * b).expect("same domain");
            f0 - linear_energy_eval(&moved, &v, k)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("linear_minimizer", drop, 1e-12));
    checks
}

fn check_newton_maximality(config: &RunConfig, v: &Validated, rng: &mut ChaCha8Rng) -> Check {
    let lo = v.vortices.min_radius();
    let Some(r) = radius_within(config.dimension, lo, NEWTON_RADIUS.max(lo), DENSE_MAX_UNKNOWNS) else {
        return Check {
            name: "newton_maximality".into(),
            passed: true,
            margin: None,
            detail: format!("skipped: B_{lo} exceeds the dense limit of {DENSE_MAX_UNKNOWNS} unknowns"),
        };
    };
    let dom = ball(config, r);
    let sol = match solve_bounded(&dom, &v.vortices, &v.params, &v.solve) {
        Ok(s) => s,
        Err(e) => return Check::failed("newton_maximality", format!("maximal solution on B_{r}: {e}")),
    };
    let mut converged = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let vals: Vec<f64> = (0..dom.n_interior()).map(|_| -rng.gen_range(0.0..4.0)).collect();
        let init = Field::dirichlet_from_interior(dom.clone(), &vals);
        if let Ok(out) = newton_solve(&dom, &v.vortices, &v.params, &init, &NewtonOptions::default()) {
            converged += 1;
            worst = worst.max(out.field.max_excess_over(&sol.field).expect("same domain"));
        }
    }
    if converged == 0 {
        return Check::failed("newton_maximality", format!("no Newton start converged on B_{r}"));
    }
    let mut c = Check::at_most("newton_maximality", worst, MAXIMALITY_TOLERANCE);
    c.detail = format!("{converged}/10 roots on B_{r}, max excess {worst:e}");
    c
}

/// Runs the property suite at desk scale.
pub fn cmd_verify(config_path: &Path, opts: &RunOptions) -> Result<Report, CommandError> {
    let (config, v) = prepare(config_path)?;
    let dir = output_dir(&config, opts);
    let mut report = Report::new("verify", &config);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let bound = potential_bound_check(v.params.a(), &default_potential_grid()).expect("a > 0 and nonpositive grid");
    report.checks.push(Check {
        name: "potential_lower_bound".into(),
        passed: bound.all_hold,
        margin: Some(bound.c_est),
        detail: format!("c_est = {} at x = {}", bound.c_est, bound.argmin),
    });
    if config.a == 1.0 {
        let dist = (bound.c_est - 0.5).abs();
        report.checks.push(Check::at_most("potential_lower_bound_unit_a", dist, 0.01));
    }

    let barrier = barrier_check(config.dimension, &v.params, config.epsilon, BARRIER_SHELLS)
        .expect("validated epsilon and shell range");
    report.checks.push(Check {
        name: "barrier".into(),
        passed: barrier.all_hold,
        margin: Some(barrier.min_margin + BARRIER_TOLERANCE),
        detail: format!(
            "{} points on shells [{}, {}], c1 = {}, min relative margin {:e}",
            barrier.points_checked, BARRIER_SHELLS.0, BARRIER_SHELLS.1, barrier.c1, barrier.min_margin
        ),
    });
    report.verification = Some(VerificationSummary {
        potential_bound_c_est: bound.c_est,
        barrier_min_margin: barrier.min_margin,
    });

    let radius = config.radii[0].max(config.largest_radius().min(VERIFY_RADIUS));
    let dom = ball(&config, radius);
    report.checks.push(check_summation_by_parts(&dom, &mut rng));
    report.checks.extend(check_linear_oracle(config.dimension, &mut rng));

    match solve_bounded(&dom, &v.vortices, &v.params, &v.solve) {
        Ok(sol) => {
            let symmetric = v.vortices.vortices().iter().all(|x| x.point.norm1() == 0);
            if symmetric {
                let dev = max_symmetry_deviation(&sol.field);
                report.checks.push(Check::at_most("lattice_symmetry", dev, SYMMETRY_TOLERANCE));
            }
            report.radii.push(report::radius_report(&sol, config.tol_nonlinear));
        }
        // Any failure of the iteration itself, including a stall caused by
        // inexact linear solves, fails the monotone-iteration check.
        Err(e) => {
            if let Some(trace) = e.trace() {
                report::write_file(&dir, &format!("trace_R{radius}.csv"), &report::trace_csv(trace))?;
            }
            report.checks.push(Check::failed("monotone_iteration", format!("radius {radius}: {e}")));
        }
    }
    report.checks.push(check_newton_maximality(&config, &v, &mut rng));
    finish(&config, &dir, "verify_report.json", report)
}
