//! Serialized artifacts: report JSON and plot-ready CSV files.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::exhaustion::DecayFit;
use crate::field::{self, Exponent, Field, Region};
use crate::lattice::LatticePoint;
use crate::scheme::{BoundedSolution, IterationTrace};

/// Largest pointwise increase tolerated between consecutive iterates.
pub const MONOTONE_TOLERANCE: f64 = 1e-10;
/// Slack for the energy chain `I(f_k) <= I(f_{k-1})`, `I(f_k) <= 0`.
pub const ENERGY_TOLERANCE: f64 = 1e-10;
/// Allowed gap in the summed equation.
pub const FLUX_TOLERANCE: f64 = 1e-8;

/// One pass/fail check. `margin` is signed so that a nonnegative value
/// means the check holds; its units are those of the checked quantity. It is
/// absent when the quantity could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub margin: Option<f64>,
    pub detail: String,
}

impl Check {
    /// `value <= limit`, with margin `limit - value`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        let passed = value <= limit;
        Self { name: name.into(), passed, margin: Some(limit - value), detail: format!("{value:e} <= {limit:e}") }
    }

    pub fn failed(name: &str, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: false, margin: None, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub initial: f64,
    pub last: f64,
    pub max_increase: f64,
    pub max_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSummary {
    pub source_mass: f64,
    pub boundary_flux: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub radius: u64,
    pub unknowns: usize,
    pub iterations: usize,
    pub terminal_residual: f64,
    pub max_increase: f64,
    pub energy: EnergySummary,
    pub norms: Norms,
    pub flux: FluxSummary,
    /// `f` at the origin, which is always an interior vertex.
    pub origin_value: f64,
    pub min_value: f64,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub radius: u64,
    pub alpha_theory: f64,
    pub epsilon: f64,
    pub guaranteed_rate: f64,
    pub fitted_rate: f64,
    #[serde(rename = "C_fit")]
    pub c_fit: f64,
    pub window: (u64, u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    /// `"inf"` for the sup norm.
    pub p: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionReport {
    pub pointwise_deltas: Vec<f64>,
    pub l2_increments: Vec<f64>,
    pub l1_increments: Vec<f64>,
    pub lp_norms: Vec<LpRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub potential_bound_c_est: f64,
    pub barrier_min_margin: f64,
}

/// Consolidated report written by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    pub radii: Vec<RadiusReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exhaustion: Option<ExhaustionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationSummary>,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            radii: Vec::new(),
            exhaustion: None,
            decay: None,
            verification: None,
            checks: Vec::new(),
            all_passed: true,
        }
    }

    /// Recomputes `all_passed` from the top-level and per-radius checks.
    pub fn finish(&mut self) {
        self.all_passed = self.checks.iter().chain(self.radii.iter().flat_map(|r| &r.checks)).all(|c| c.passed);
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.radii.iter().flat_map(|r| &r.checks).chain(&self.checks).filter(|c| !c.passed).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Per-radius statistics and checks; the residual check uses the solver's
/// stopping cap `100 * tol_nonlinear`.
pub fn radius_report(sol: &BoundedSolution, tol_nonlinear: f64) -> RadiusReport {
    let trace = &sol.trace;
    let f = &sol.field;
    let norm = |p| field::norm(f, p, Region::Interior).expect("valid exponent");
    let flux = sol.flux_check();
    let residual = sol.terminal_residual();
    let energy = EnergySummary {
        initial: trace.records.first().map_or(0.0, |r| r.energy),
        last: trace.last().map_or(0.0, |r| r.energy),
        max_increase: if trace.len() < 2 { 0.0 } else { trace.max_energy_increase() },
        max_value: if trace.len() < 2 { 0.0 } else { trace.max_energy() },
    };
    let max_increase = if trace.len() < 2 { 0.0 } else { trace.max_increase() };
    let dim = sol.domain().dimension();
    let checks = vec![
        Check::at_most("monotone_iteration", max_increase, MONOTONE_TOLERANCE),
        Check::at_most("energy_nonincreasing", energy.max_increase, ENERGY_TOLERANCE),
        Check::at_most("energy_nonpositive", energy.max_value, ENERGY_TOLERANCE),
        Check::at_most("terminal_residual", residual, 100.0 * tol_nonlinear),
        Check::at_most("flux_identity", flux.discrepancy, FLUX_TOLERANCE),
    ];
    RadiusReport {
        radius: sol.domain().radius(),
        unknowns: sol.domain().n_interior(),
        iterations: sol.steps(),
        terminal_residual: residual,
        max_increase,
        energy,
        norms: Norms { l1: norm(Exponent::Finite(1.0)), l2: norm(Exponent::Finite(2.0)), sup: norm(Exponent::Infinity) },
        flux: FluxSummary {
            source_mass: flux.source_mass,
            boundary_flux: flux.boundary_flux,
            discrepancy: flux.discrepancy,
        },
        origin_value: f.value_at(&LatticePoint::origin(dim)).expect("origin is interior"),
        min_value: f.interior_values().iter().copied().fold(0.0, f64::min),
        checks,
    }
}

pub fn decay_report(radius: u64, fit: &DecayFit) -> DecayReport {
    DecayReport {
        radius,
        alpha_theory: fit.alpha_theory,
        epsilon: fit.epsilon,
        guaranteed_rate: fit.guaranteed_rate,
        fitted_rate: fit.fitted_rate,
        c_fit: fit.c_fit,
        window: fit.window,
    }
}

fn push_float(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("write to string");
}

/// `x1,...,xn,d,f` over the closure, interior vertices first.
pub fn field_csv(f: &Field) -> String {
    let dom = f.domain();
    let n = dom.dimension();
    let mut out = String::new();
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).chain(["d".into(), "f".into()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (p, &v) in dom.points().iter().zip(f.values()) {
        for c in p.coords() {
            write!(out, "{c},").expect("write to string");
        }
        write!(out, "{},", p.norm1()).expect("write to string");
        push_float(&mut out, v);
        out.push('\n');
    }
    out
}

/// `k,sup_diff,energy,residual`, one row per iterate from `k = 0`.
pub fn trace_csv(trace: &IterationTrace) -> String {
    let mut out = String::from("k,sup_diff,energy,residual\n");
    for r in &trace.records {
        write!(out, "{},", r.k).expect("write to string");
        push_float(&mut out, r.sup_diff);
        out.push(',');
        push_float(&mut out, r.energy);
        out.push(',');
        push_float(&mut out, r.residual);
        out.push('\n');
    }
    out
}

/// `d,shell_max_abs,envelope` with envelope `C e^{-α(1-ε)d}`.
pub fn decay_csv(fit: &DecayFit) -> String {
    let mut out = String::from("d,shell_max_abs,envelope\n");
    for s in &fit.shells {
        write!(out, "{},", s.d).expect("write to string");
        push_float(&mut out, s.max_abs);
        out.push(',');
        push_float(&mut out, fit.envelope(s.d));
        out.push('\n');
    }
    out
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)
}
