//! Monotone iteration for `Δf = λe^f(e^{af} - 1) + g` on a bounded domain.
//!
//! Starting from `f_0 = 0`, each step solves the linear Dirichlet problem
//!
//! ```text
//! (Δ - K) f_k = λ e^{f_{k-1}} (e^{a f_{k-1}} - 1) + g - K f_{k-1}   in Ω
//!         f_k = 0                                                  on ∂Ω
//! ```
//!
//! with `K > aλ`. The iterates decrease pointwise and the energy `I(f_k)`
//! decreases; both are checked at every step. The limit is the maximal
//! solution on Ω. A damped Newton solver is provided as an independent
//! oracle for maximality tests.

use std::sync::Arc;

use thiserror::Error;

use crate::field::{self, Field};
use crate::lattice::{assemble_source, LatticeDomain, LatticeError, Params, VortexConfig};
use crate::linear::{DenseLu, LinearError, LinearSolveOptions, LinearSystem, DENSE_MAX_UNKNOWNS};
use crate::scalar::Real;

/// Consecutive steps with `‖f_k - f_{k-1}‖_∞ < tol` but the residual above
/// its cap after which the run is declared stalled.
pub const STALL_STEPS: usize = 50;

/// Allowed pointwise increase `f_k - f_{k-1}` before a step is rejected.
pub const MONOTONICITY_SLACK: f64 = 1e-8;

/// `λ e^f (e^{af} - 1)`, written with `expm1` so it stays accurate near 0
/// and flushes to 0 for very negative `f`.
#[inline]
pub fn nonlinearity<T: Real>(f: T, params: &Params<T>) -> T {
    params.lambda() * f.exp() * (params.a() * f).exp_m1()
}

/// Derivative of [`nonlinearity`]: `λ e^f [(a+1)(e^{af} - 1) + a]`.
#[inline]
pub fn nonlinearity_derivative<T: Real>(f: T, params: &Params<T>) -> T {
    let a = params.a();
    params.lambda() * f.exp() * ((a + T::one()) * (a * f).exp_m1() + a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegrityKind<T: Real> {
    /// `max_x (f_k - f_{k-1})` exceeded the slack.
    Monotonicity { excess: T },
    /// `I(f_k)` rose above `I(f_{k-1})` (or above 0) by more than the slack.
    Energy { previous: T, current: T },
}

#[derive(Debug, Clone, Error)]
pub enum SchemeError<T: Real> {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("linear solve failed at step {step}: {source}")]
    Linear {
        step: usize,
        #[source]
        source: LinearError<T>,
    },
    #[error("no convergence after {steps} steps{} (last sup-difference {last_sup_diff:e}, residual {last_residual:e})", if *stalled { ", iteration stalled" } else { "" })]
    NotConverged {
        steps: usize,
        /// The iterates stopped moving while the residual stayed above its cap,
        /// typically because the linear solves are too inexact.
        stalled: bool,
        last_sup_diff: T,
        last_residual: T,
        trace: IterationTrace<T>,
        last: Field<T>,
    },
    #[error("scheme integrity violated at step {step}: {kind:?}")]
    Integrity { step: usize, kind: IntegrityKind<T>, trace: IterationTrace<T> },
    #[error("newton solve failed after {steps} steps: {reason} (residual {residual:e})")]
    NewtonFailed { steps: usize, residual: T, reason: String },
}

impl<T: Real> SchemeError<T> {
    /// Trace recorded up to the failure, when the failure happened mid-run.
    pub fn trace(&self) -> Option<&IterationTrace<T>> {
        match self {
            SchemeError::NotConverged { trace, .. } | SchemeError::Integrity { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<T: Real = f64> {
    pub k: usize,
    /// `‖f_k - f_{k-1}‖_∞`
    pub sup_diff: T,
    /// `max_x (f_k - f_{k-1})`; nonpositive for an exactly monotone step.
    pub max_increase: T,
    /// `I(f_k)`
    pub energy: T,
    /// `‖Δf_k - λe^{f_k}(e^{af_k} - 1) - g‖_∞` over the interior.
    pub residual: T,
}

/// Per-step history of a monotone iteration, starting at `k = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace<T: Real = f64> {
    pub records: Vec<IterationRecord<T>>,
}

impl<T: Real> IterationTrace<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord<T>> {
        self.records.last()
    }

    /// Largest pointwise increase over all steps `k >= 1`.
    pub fn max_increase(&self) -> T {
        self.records.iter().skip(1).map(|r| r.max_increase).fold(T::neg_infinity(), T::max)
    }

    /// Largest `I(f_k) - I(f_{k-1})` over all steps.
    pub fn max_energy_increase(&self) -> T {
        self.records
            .windows(2)
            .map(|w| w[1].energy - w[0].energy)
            .fold(T::neg_infinity(), T::max)
    }

    /// Largest `I(f_k)` over `k >= 1`.
    pub fn max_energy(&self) -> T {
        self.records.iter().skip(1).map(|r| r.energy).fold(T::neg_infinity(), T::max)
    }

    pub fn is_monotone(&self, slack: T) -> bool {
        self.len() < 2 || self.max_increase() <= slack
    }

    pub fn energy_nonincreasing(&self, slack: T) -> bool {
        self.len() < 2 || (self.max_energy_increase() <= slack && self.max_energy() <= slack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions<T: Real = f64> {
    /// Stop once `‖f_k - f_{k-1}‖_∞ < tol_nonlinear` and the residual is at
    /// most `100 * tol_nonlinear`.
    pub tol_nonlinear: T,
    pub max_steps: usize,
    pub linear: LinearSolveOptions<T>,
    /// Slack for the per-step monotonicity and energy checks.
    pub integrity_slack: T,
    /// Also require the geometric tail estimate `s_k ρ/(1-ρ)`, with
    /// `ρ = s_k / s_{k-1}` and `s_k = ‖f_k - f_{k-1}‖_∞`, to be below
    /// `tol_nonlinear`, so the tolerance bounds the distance to the limit.
    pub tail_estimate: bool,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol_nonlinear: T::lit(1e-10),
            max_steps: 10_000,
            linear: LinearSolveOptions::default(),
            integrity_slack: T::lit(MONOTONICITY_SLACK),
            tail_estimate: true,
        }
    }
}

/// Converged maximal solution on a bounded domain.
#[derive(Debug, Clone)]
pub struct BoundedSolution<T: Real = f64> {
    pub field: Field<T>,
    pub source: Field<T>,
    pub trace: IterationTrace<T>,
    pub params: Params<T>,
    pub vortices: VortexConfig,
}

impl<T: Real> BoundedSolution<T> {
    pub fn domain(&self) -> &Arc<LatticeDomain> {
        self.field.domain()
    }

    pub fn steps(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    /// Residual recomputed from the field, independent of the trace.
    pub fn terminal_residual(&self) -> T {
        sup_interior(&residual(&self.field, &self.source, &self.params))
    }

    pub fn flux_check(&self) -> FluxCheck<T> {
        flux_check(&self.field, &self.vortices, &self.params)
    }
}

/// The interior right-hand side `λe^{f}(e^{af} - 1) + g - K f`.
fn iteration_rhs<T: Real>(f_prev: &Field<T>, g: &Field<T>, params: &Params<T>) -> Field<T> {
    let n = f_prev.domain().n_interior();
    let mut v = Field::zeros(f_prev.domain().clone());
    let (fv, gv) = (f_prev.values(), g.values());
    for (i, out) in v.values_mut()[..n].iter_mut().enumerate() {
        *out = nonlinearity(fv[i], params) + gv[i] - params.k() * fv[i];
    }
    v
}

fn step<T: Real>(
    f_prev: &Field<T>,
    g: &Field<T>,
    params: &Params<T>,
    opts: &LinearSolveOptions<T>,
) -> Result<Field<T>, LinearError<T>> {
    let v = iteration_rhs(f_prev, g, params);
    LinearSystem::new(&v, params.k())?.solve(opts)
}

/// One step of the monotone scheme from `f_prev`.
pub fn iterate_once<T: Real>(
    f_prev: &Field<T>,
    g: &Field<T>,
    params: &Params<T>,
    opts: &LinearSolveOptions<T>,
) -> Result<Field<T>, SchemeError<T>> {
    let f = step(f_prev, g, params, opts).map_err(|source| SchemeError::Linear { step: 1, source })?;
    let excess = f.max_excess_over(f_prev).expect("same domain");
    if excess > T::lit(MONOTONICITY_SLACK) {
        return Err(SchemeError::Integrity {
            step: 1,
            kind: IntegrityKind::Monotonicity { excess },
            trace: IterationTrace::default(),
        });
    }
    Ok(f)
}

/// `I(f) = ½∫|∇f|² + λ/(a+1)∫(e^{(a+1)f} - 1) + λ∫(1 - e^f) + ∫ g f`.
pub fn energy_eval<T: Real>(f: &Field<T>, g: &Field<T>, params: &Params<T>) -> T {
    let (lambda, a1) = (params.lambda(), params.a() + T::one());
    let potential = f.interior_values().iter().fold(T::zero(), |acc, &x| {
        acc + lambda / a1 * (a1 * x).exp_m1() - lambda * x.exp_m1()
    });
    let pairing = f
        .interior_values()
        .iter()
        .zip(g.interior_values())
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    T::lit(0.5) * field::grad_energy(f) + potential + pairing
}

/// `r(x) = Δf(x) - λe^{f(x)}(e^{af(x)} - 1) - g(x)` on the interior, zero on the boundary.
pub fn residual<T: Real>(f: &Field<T>, g: &Field<T>, params: &Params<T>) -> Field<T> {
    let mut r = field::laplacian(f);
    let n = f.domain().n_interior();
    let (fv, gv) = (f.values(), g.values());
    for (i, out) in r.values_mut()[..n].iter_mut().enumerate() {
        *out = *out - nonlinearity(fv[i], params) - gv[i];
    }
    r
}

fn sup_interior<T: Real>(f: &Field<T>) -> T {
    f.interior_values().iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

fn record<T: Real>(k: usize, f: &Field<T>, prev: &Field<T>, g: &Field<T>, params: &Params<T>) -> IterationRecord<T> {
    IterationRecord {
        k,
        sup_diff: f.sup_distance(prev).expect("same domain"),
        max_increase: f.max_excess_over(prev).expect("same domain"),
        energy: energy_eval(f, g, params),
        residual: sup_interior(&residual(f, g, params)),
    }
}

/// Runs the monotone scheme from `f_0 = 0` to convergence.
pub fn solve_bounded<T: Real>(
    dom: &Arc<LatticeDomain>,
    vc: &VortexConfig,
    params: &Params<T>,
    opts: &SolveOptions<T>,
) -> Result<BoundedSolution<T>, SchemeError<T>> {
    let g = assemble_source(dom, vc)?;
    let mut f = Field::zeros(dom.clone());
    let mut trace = IterationTrace::default();
    trace.records.push(IterationRecord {
        k: 0,
        sup_diff: T::zero(),
        max_increase: T::zero(),
        energy: energy_eval(&f, &g, params),
        residual: sup_interior(&residual(&f, &g, params)),
    });
    let slack = opts.integrity_slack;
    let residual_cap = T::lit(100.0) * opts.tol_nonlinear;
    let mut stalled_for = 0;

    for k in 1..=opts.max_steps {
        let next = step(&f, &g, params, &opts.linear).map_err(|source| SchemeError::Linear { step: k, source })?;
        let rec = record(k, &next, &f, &g, params);
        let prev_energy = trace.records[k - 1].energy;
        trace.records.push(rec);

        if !(rec.max_increase <= slack) {
            return Err(SchemeError::Integrity {
                step: k,
                kind: IntegrityKind::Monotonicity { excess: rec.max_increase },
                trace,
            });
        }
        let energy_slack = slack * (T::one() + prev_energy.abs());
        if !(rec.energy <= prev_energy + energy_slack && rec.energy <= energy_slack) {
            return Err(SchemeError::Integrity {
                step: k,
                kind: IntegrityKind::Energy { previous: prev_energy, current: rec.energy },
                trace,
            });
        }
        f = next;
        let tail_ok = !opts.tail_estimate || rec.sup_diff.is_zero() || {
            let prev = trace.records[k - 1].sup_diff;
            let rho = rec.sup_diff / prev;
            k >= 2 && rho < T::one() && rec.sup_diff * rho / (T::one() - rho) < opts.tol_nonlinear
        };
        if rec.sup_diff < opts.tol_nonlinear && rec.residual <= residual_cap && tail_ok {
            return Ok(BoundedSolution {
                field: f,
                source: g,
                trace,
                params: *params,
                vortices: vc.clone(),
            });
        }
        if rec.sup_diff < opts.tol_nonlinear && rec.residual > residual_cap {
            stalled_for += 1;
        } else {
            stalled_for = 0;
        }
        if stalled_for >= STALL_STEPS {
            return Err(SchemeError::NotConverged {
                steps: k,
                stalled: true,
                last_sup_diff: rec.sup_diff,
                last_residual: rec.residual,
                trace,
                last: f,
            });
        }
    }
    let last = *trace.last().expect("nonempty trace");
    Err(SchemeError::NotConverged {
        steps: opts.max_steps,
        stalled: false,
        last_sup_diff: last.sup_diff,
        last_residual: last.residual,
        trace,
        last: f,
    })
}

/// Summed form of the equation over Ω: `Σ_Ω λe^f(e^{af}-1) + N` against the
/// boundary flux `Σ_{x∈Ω, y∈∂Ω, y~x} (f(y) - f(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxCheck<T: Real = f64> {
    pub source_mass: T,
    pub boundary_flux: T,
    pub discrepancy: T,
}

pub fn flux_check<T: Real>(f: &Field<T>, vc: &VortexConfig, params: &Params<T>) -> FluxCheck<T> {
    let dom = f.domain();
    let n = dom.n_interior();
    let fv = f.values();
    let nonlin = fv[..n].iter().fold(T::zero(), |acc, &x| acc + nonlinearity(x, params));
    let source_mass = nonlin + vc.total_flux::<T>();
    let mut boundary_flux = T::zero();
    for i in 0..n {
        for &j in dom.neighbors(i) {
            if j >= n {
                boundary_flux = boundary_flux + (fv[j] - fv[i]);
            }
        }
    }
    FluxCheck { source_mass, boundary_flux, discrepancy: (source_mass - boundary_flux).abs() }
}

/// Largest deviation of `f` under the signed coordinate permutations of Z^n.
pub fn max_symmetry_deviation<T: Real>(f: &Field<T>) -> T {
    let dom = f.domain();
    let n = dom.dimension();
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &perms {
            for i in (0..n).filter(|i| !p.contains(i)) {
                let mut q = p.clone();
                q.push(i);
                next.push(q);
            }
        }
        perms = next;
    }
    let mut worst = T::zero();
    for perm in &perms {
        for signs in 0u32..(1 << n) {
            for (i, p) in dom.points().iter().enumerate() {
                let image: Vec<i64> = (0..n)
                    .map(|axis| {
                        let c = p.coords()[perm[axis]];
                        if signs & (1 << axis) != 0 {
                            -c
                        } else {
                            c
                        }
                    })
                    .collect();
                let j = dom
                    .index_of(&crate::lattice::LatticePoint::new(image))
                    .expect("balls are symmetric");
                worst = worst.max((f.values()[i] - f.values()[j]).abs());
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions<T: Real = f64> {
    pub tol: T,
    pub max_steps: usize,
    pub max_halvings: usize,
}

impl<T: Real> Default for NewtonOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-11), max_steps: 100, max_halvings: 30 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome<T: Real = f64> {
    pub field: Field<T>,
    pub steps: usize,
    pub residual: T,
}

/// Damped Newton on `r(f) = 0` with Jacobian `Δ - diag(λ[(a+1)e^{(a+1)f} - e^f])`.
///
/// Each step is halved (up to `max_halvings` times) until `‖r‖_∞` decreases.
/// Uses a dense factorization, so it is limited to small domains.
pub fn newton_solve<T: Real>(
    dom: &Arc<LatticeDomain>,
    vc: &VortexConfig,
    params: &Params<T>,
    f_init: &Field<T>,
    opts: &NewtonOptions<T>,
) -> Result<NewtonOutcome<T>, SchemeError<T>> {
    let g = assemble_source(dom, vc)?;
    let n = dom.n_interior();
    if n > DENSE_MAX_UNKNOWNS {
        return Err(SchemeError::NewtonFailed {
            steps: 0,
            residual: T::nan(),
            reason: format!("{n} unknowns exceeds the dense limit {DENSE_MAX_UNKNOWNS}"),
        });
    }
    let mut f = Field::dirichlet_from_interior(dom.clone(), &f_init.interior_values()[..n]);
    let mut r = residual(&f, &g, params);
    let mut rnorm = sup_interior(&r);
    let fail = |steps, residual, reason: &str| SchemeError::NewtonFailed { steps, residual, reason: reason.into() };

    for steps in 0..=opts.max_steps {
        if rnorm <= opts.tol {
            return Ok(NewtonOutcome { field: f, steps, residual: rnorm });
        }
        if steps == opts.max_steps || !rnorm.is_finite() {
            break;
        }
        let mut jac = vec![T::zero(); n * n];
        let two_n = T::from_count(2 * dom.dimension());
        for i in 0..n {
            jac[i * n + i] = -two_n - nonlinearity_derivative(f.values()[i], params);
            for &j in dom.neighbors(i) {
                if j < n {
                    jac[i * n + j] = jac[i * n + j] + T::one();
                }
            }
        }
        let lu = DenseLu::factor(jac, n).ok_or_else(|| fail(steps, rnorm, "singular Jacobian"))?;
        let minus_r: Vec<T> = r.interior_values().iter().map(|&x| -x).collect();
        let delta = lu.solve(&minus_r);

        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<T> = (0..n).map(|i| f.values()[i] + t * delta[i]).collect();
            let trial = Field::dirichlet_from_interior(dom.clone(), &trial);
            let tr = residual(&trial, &g, params);
            let tn = sup_interior(&tr);
            if tn < rnorm {
                f = trial;
                r = tr;
                rnorm = tn;
                accepted = true;
                break;
            }
            t = t * T::lit(0.5);
        }
        if !accepted {
            return Err(fail(steps, rnorm, "line search exhausted"));
        }
    }
    Err(fail(opts.max_steps, rnorm, "residual above tolerance"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticePoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dom(n: usize, r: i64) -> Arc<LatticeDomain> {
        Arc::new(LatticeDomain::ball(n, r).unwrap())
    }

    fn unit_params() -> Params {
        Params::new(1.0, 1.0, 2.0).unwrap()
    }

    /// Bisection on `4t + e^t(e^t - 1) + 4π = 0` over [-15, 0].
    fn single_vertex_root() -> f64 {
        let h = |t: f64| 4.0 * t + t.exp() * (t.exp() - 1.0) + 4.0 * PI;
        let (mut lo, mut hi) = (-15.0f64, 0.0f64);
        assert!(h(lo) < 0.0 && h(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn nonlinearity_values() {
        let p = unit_params();
        assert_eq!(nonlinearity(0.0, &p), 0.0);
        assert!((nonlinearity(-(2.0f64.ln()), &p) + 0.25).abs() < 1e-15);
        let p2 = Params::new(2.0, 0.5, 2.0).unwrap();
        // 2 e^{-1} (e^{-1/2} - 1) = -0.289384...
        let expected = 2.0 * (-1.0f64).exp() * ((-0.5f64).exp() - 1.0);
        assert!((nonlinearity(-1.0, &p2) - expected).abs() < 1e-15);
        // high-precision value of 2e^{-1}(e^{-1/2} - 1)
        assert!((expected + 0.289_498_562_046).abs() < 1e-12);
        assert!(nonlinearity(-800.0, &p) == 0.0);
        for x in [-3.0, -0.5, -1e-3] {
            assert!(nonlinearity(x, &p) < 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let p = Params::new(1.7, 0.6, 2.0).unwrap();
        for x in [-5.0f64, -1.0, -0.1, 0.0, 0.3] {
            let h = 1e-6f64;
            let fd = (nonlinearity(x + h, &p) - nonlinearity(x - h, &p)) / (2.0 * h);
            assert!((fd - nonlinearity_derivative(x, &p)).abs() < 1e-8);
        }
    }

    #[test]
    fn first_steps_single_vertex() {
        let d = dom(2, 0);
        let vc = VortexConfig::single_at_origin(2, 1);
        let g = assemble_source(&d, &vc).unwrap();
        let p = unit_params();
        let opts = LinearSolveOptions::default();

        let zero = Field::zeros(d.clone());
        let empty_g: Field = Field::zeros(d.clone());
        let f = iterate_once(&zero, &empty_g, &p, &opts).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));

        let f1 = iterate_once(&zero, &g, &p, &opts).unwrap();
        assert!((f1.values()[0] + 2.0 * PI / 3.0).abs() < 1e-12);
        let t = -2.0 * PI / 3.0;
        let expected = -((t.exp() * (t.exp() - 1.0)) + 4.0 * PI - 2.0 * t) / 6.0;
        let f2 = iterate_once(&f1, &g, &p, &opts).unwrap();
        assert!((f2.values()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        let d = dom(2, 0);
        let p = unit_params();
        let g = assemble_source(&d, &VortexConfig::single_at_origin(2, 1)).unwrap();
        assert_eq!(energy_eval(&Field::zeros(d.clone()), &g, &p), 0.0);
        let f = Field::dirichlet_from_interior(d, &[-1.0]);
        let expected = 2.0 + 0.5 * ((-2.0f64).exp() - 1.0) + (1.0 - (-1.0f64).exp()) - 4.0 * PI;
        assert!((energy_eval(&f, &g, &p) - expected).abs() < 1e-13);
        assert!((expected + 10.366582).abs() < 1e-6);
    }

    #[test]
    fn residual_examples() {
        let d = dom(2, 3);
        let p = unit_params();
        let z: Field = Field::zeros(d.clone());
        assert!(residual(&z, &z, &p).values().iter().all(|&v| v == 0.0));
        let g = assemble_source(&d, &VortexConfig::single_at_origin(2, 1)).unwrap();
        let r = residual(&z, &g, &p);
        for (pt, &v) in d.points().iter().zip(r.values()) {
            let expected = if pt.norm1() == 0 { -4.0 * PI } else { 0.0 };
            assert_eq!(v, expected);
        }
    }

    #[test]
    fn empty_vortex_set_converges_immediately() {
        let d = dom(2, 4);
        let sol = solve_bounded(&d, &VortexConfig::empty(), &unit_params(), &SolveOptions::default()).unwrap();
        assert_eq!(sol.steps(), 1);
        assert!(sol.field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_vertex_limit_matches_bisection() {
        let d = dom(2, 0);
        let sol =
            solve_bounded(&d, &VortexConfig::single_at_origin(2, 1), &unit_params(), &SolveOptions::default())
                .unwrap();
        assert!((sol.field.values()[0] - single_vertex_root()).abs() < 1e-9);
        let newton = newton_solve(
            &d,
            &VortexConfig::single_at_origin(2, 1),
            &unit_params(),
            &Field::zeros(d.clone()),
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!((newton.field.values()[0] - single_vertex_root()).abs() < 1e-10);
    }

    #[test]
    fn bounded_solution_invariants() {
        let d = dom(2, 8);
        let vc = VortexConfig::single_at_origin(2, 1);
        let p = unit_params();
        let opts = SolveOptions { tol_nonlinear: 1e-11, ..SolveOptions::default() };
        let sol = solve_bounded(&d, &vc, &p, &opts).unwrap();
        assert!(sol.trace.is_monotone(1e-10));
        assert!(sol.trace.energy_nonincreasing(1e-10));
        assert!(sol.field.values().iter().all(|&v| v <= 0.0));
        assert!(sol.field.value_at(&LatticePoint::origin(2)).unwrap() < 0.0);
        assert!(sol.terminal_residual() <= 1e-8);
        assert!(sol.flux_check().discrepancy < 1e-8);
        assert!(max_symmetry_deviation(&sol.field) < 1e-10);

        let newton = newton_solve(&d, &vc, &p, &sol.field, &NewtonOptions::default()).unwrap();
        assert!(newton.steps <= 3);
        assert!(newton.field.sup_distance(&sol.field).unwrap() < 1e-10);
    }

    #[test]
    fn limit_does_not_depend_on_shift() {
        let d = dom(2, 6);
        let vc = VortexConfig::new(vec![
            crate::lattice::Vortex { point: LatticePoint::new(vec![1, 0]), multiplicity: 2 },
            crate::lattice::Vortex { point: LatticePoint::new(vec![-2, 1]), multiplicity: 1 },
        ])
        .unwrap();
        let opts = SolveOptions::default();
        let a = solve_bounded(&d, &vc, &Params::new(1.0, 1.0, 2.0).unwrap(), &opts).unwrap();
        let b = solve_bounded(&d, &vc, &Params::new(1.0, 1.0, 6.0).unwrap(), &opts).unwrap();
        assert!(a.field.sup_distance(&b.field).unwrap() <= 10.0 * opts.tol_nonlinear);
    }

    #[test]
    fn newton_roots_lie_below_maximal_solution() {
        let d = dom(2, 5);
        let vc = VortexConfig::single_at_origin(2, 1);
        let p = unit_params();
        let sol = solve_bounded(&d, &vc, &p, &SolveOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..4 {
            let vals: Vec<f64> = (0..d.n_interior()).map(|_| -rng.gen_range(0.0..4.0)).collect();
            let init = Field::dirichlet_from_interior(d.clone(), &vals);
            if let Ok(out) = newton_solve(&d, &vc, &p, &init, &NewtonOptions::default()) {
                assert!(out.field.max_excess_over(&sol.field).unwrap() <= 1e-8);
            }
        }
    }

    #[test]
    fn iterate_once_flags_non_monotone_input() {
        // starting above the maximal solution's supersolution breaks the chain
        let d = dom(2, 2);
        let p = unit_params();
        let g = assemble_source(&d, &VortexConfig::single_at_origin(2, 1)).unwrap();
        let below = Field::from_fn(d.clone(), |q| if q.norm1() <= 2 { -20.0 } else { 0.0 });
        assert!(matches!(
            iterate_once(&below, &g, &p, &LinearSolveOptions::default()),
            Err(SchemeError::Integrity { kind: IntegrityKind::Monotonicity { .. }, .. })
        ));
    }

    #[test]
    fn reports_non_convergence() {
        let d = dom(2, 4);
        let opts = SolveOptions { max_steps: 2, ..SolveOptions::default() };
        let err = solve_bounded(&d, &VortexConfig::single_at_origin(2, 1), &unit_params(), &opts).unwrap_err();
        match err {
            SchemeError::NotConverged { steps, trace, stalled, .. } => {
                assert_eq!(steps, 2);
                assert!(!stalled);
                assert_eq!(trace.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inexact_linear_solves_stall() {
        let d = dom(2, 6);
        let mut opts = SolveOptions::default();
        opts.linear.tol_rel = 0.5;
        let err = solve_bounded(&d, &VortexConfig::single_at_origin(2, 1), &unit_params(), &opts).unwrap_err();
        match err {
            SchemeError::NotConverged { stalled, last_residual, trace, .. } => {
                assert!(stalled);
                assert!(last_residual > 1e-3);
                assert!(trace.len() < 1000);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn f32_scheme_runs() {
        let d = dom(2, 3);
        let p = Params::<f32>::new(1.0, 1.0, 2.0).unwrap();
        let opts = SolveOptions::<f32> {
            tol_nonlinear: 1e-4,
            linear: LinearSolveOptions::default().with_tol(1e-6),
            integrity_slack: 1e-4,
            ..Default::default()
        };
        let sol = solve_bounded(&d, &VortexConfig::single_at_origin(2, 1), &p, &opts).unwrap();
        let sol64 =
            solve_bounded(&d, &VortexConfig::single_at_origin(2, 1), &unit_params(), &SolveOptions::default())
                .unwrap();
        for (a, b) in sol.field.values().iter().zip(sol64.field.values()) {
            assert!((*a as f64 - b).abs() < 1e-3);
        }
    }
}
