//! A fast invariant suite on the configured device, for checking a build
//! or a parameter set before a long run. Checks run in sector 0.

use std::f64::consts::PI;

use circsim_core::analysis::linspace;
use circsim_core::device::{build_loop_hamiltonian, solve_loop, BiasPoint, DeviceParams};
use circsim_core::dynamics::{steady_state, DriveStrength, LoopModel};
use circsim_core::linalg::{c, hermitian_eigen, hermiticity_error, max_abs3, trace, unitarity_error, CMat, Mat3, ZERO};
use circsim_core::network::{build_capacitance_matrix, waveguide_smatrix_finite, waveguide_smatrix_limit};
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, RunOutput, Table};

/// Bias used when none is configured: near the clockwise operating point
/// of the fitted device.
pub const PROBE_BIAS: BiasPoint = BiasPoint {
    phi_x: 2.76502,
    n_g: [0.0, 0.41860, 0.0],
};

struct Check {
    name: &'static str,
    /// Measured deviation; the check passes when it is at most `tolerance`.
    value: f64,
    tolerance: f64,
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn lowest_eigenvalue(m: &CMat) -> Result<f64, CliError> {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    Ok(hermitian_eigen(&h, 1)?.0[0])
}

/// Deterministic full-rank density matrix.
fn probe_density(d: usize) -> CMat {
    let m = CMat::from_fn(d, d, |i, j| c((1.3 * (i + 2 * j) as f64).sin(), (0.7 * (3 * i + j) as f64).cos()));
    let rho = &m * m.adjoint();
    let tr = trace(&rho);
    rho / tr
}

type Probe = fn(&DeviceParams, &BiasPoint) -> Result<f64, CliError>;

fn network_unitarity(_: &DeviceParams, _: &BiasPoint) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for z in linspace(0.0, 1.0, 41) {
        worst = worst.max(unitarity_error(&waveguide_smatrix_limit(z)?.a));
    }
    for cc in [1.0, 1e2, 1e4, 1e6, 1e8] {
        let cap = build_capacitance_matrix(75.0, cc)?;
        worst = worst.max(unitarity_error(&waveguide_smatrix_finite(7.25, 50.0, &cap)?.a));
    }
    Ok(worst)
}

fn shunt_free_reduction(p: &DeviceParams, b: &BiasPoint) -> Result<f64, CliError> {
    let mut p = p.clone();
    p.c_x = 0.0;
    let model = LoopModel::new(&p, *b, Default::default())?;
    let cs = model.compose(7.25, [ZERO; 3])?;
    let hs = cs.h_s.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    Ok(max_abs3(&(cs.s_wl - Mat3::identity())).max(hs))
}

fn hamiltonian_hermiticity(p: &DeviceParams, b: &BiasPoint) -> Result<f64, CliError> {
    Ok(hermiticity_error(&build_loop_hamiltonian(p, b, Default::default())?.matrix))
}

fn charge_gauge(p: &DeviceParams, b: &BiasPoint) -> Result<f64, CliError> {
    let shifted = BiasPoint::new(b.phi_x, b.n_g.map(|g| g + 0.37));
    let a = solve_loop(p, b, Default::default())?;
    let s = solve_loop(p, &shifted, Default::default())?;
    Ok(max_gap(&a.omega, &s.omega))
}

fn flux_period(p: &DeviceParams, b: &BiasPoint) -> Result<f64, CliError> {
    let a = solve_loop(p, b, Default::default())?;
    let s = solve_loop(p, &BiasPoint::new(b.phi_x + 2.0 * PI, b.n_g), Default::default())?;
    Ok(max_gap(&a.energies, &s.energies))
}

fn truncation(p: &DeviceParams, b: &BiasPoint) -> Result<f64, CliError> {
    Ok(solve_loop(p, b, Default::default())?.boundary_weight)
}

fn liouvillian_trace(p: &DeviceParams, b: &BiasPoint) -> Result<f64, CliError> {
    let model = LoopModel::new(p, *b, Default::default())?;
    let l = model.liouvillian(7.25, [c(0.01, 0.0), c(0.0, 0.02), c(-0.01, 0.0)])?;
    let out = l.apply(&probe_density(model.es.n_levels()));
    Ok(trace(&out).norm().max(hermiticity_error(&out)))
}

fn steady_state_density(p: &DeviceParams, b: &BiasPoint) -> Result<f64, CliError> {
    let model = LoopModel::new(p, *b, Default::default())?;
    let ss = steady_state(&model.liouvillian(7.25, [c(0.05, 0.0), ZERO, ZERO])?)?;
    let trace_err = (trace(&ss.rho) - c(1.0, 0.0)).norm();
    let negativity = (-lowest_eigenvalue(&ss.rho)?).max(0.0);
    Ok(trace_err.max(hermiticity_error(&ss.rho)).max(negativity).max(ss.residual))
}

fn reciprocity(p: &DeviceParams, b: &BiasPoint) -> Result<f64, CliError> {
    let model = LoopModel::new(p, BiasPoint::new(0.0, b.n_g), Default::default())?;
    let w1 = model.es.omega[1];
    let mut worst: f64 = 0.0;
    for f in [w1 - 0.1, w1, w1 + 0.1] {
        let s = model.smatrix_adiabatic(f)?.s;
        worst = worst.max(max_abs3(&(s - s.transpose())));
    }
    Ok(worst)
}

fn passivity(p: &DeviceParams, b: &BiasPoint) -> Result<f64, CliError> {
    let model = LoopModel::new(p, *b, Default::default())?;
    let mut worst: f64 = 0.0;
    for f in linspace(7.0, 7.5, 6) {
        worst = worst.max(model.smatrix_full(f, DriveStrength::WeakAuto)?.max_singular_value() - 1.0);
    }
    Ok(worst.max(0.0))
}

fn adiabatic_agreement(p: &DeviceParams, b: &BiasPoint) -> Result<f64, CliError> {
    let model = LoopModel::new(p, *b, Default::default())?;
    let mut worst: f64 = 0.0;
    for f in linspace(7.0, 7.5, 6) {
        let full = model.smatrix_full(f, DriveStrength::WeakAuto)?.s;
        let ad = model.smatrix_adiabatic(f)?.s;
        worst = worst.max(max_abs3(&(full - ad)));
    }
    Ok(worst)
}

const PROBES: &[(&str, Probe, f64)] = &[
    ("network_unitarity", network_unitarity, 1e-12),
    ("shunt_free_reduction", shunt_free_reduction, 1e-14),
    ("hamiltonian_hermiticity", hamiltonian_hermiticity, 1e-12),
    ("charge_gauge", charge_gauge, 1e-8),
    ("flux_period", flux_period, 1e-8),
    ("truncation_boundary_weight", truncation, circsim_core::device::TRUNCATION_WARN_WEIGHT),
    ("liouvillian_trace", liouvillian_trace, 1e-10),
    ("steady_state_density", steady_state_density, 1e-10),
    ("reciprocity_zero_flux", reciprocity, 1e-6),
    ("passivity", passivity, 1e-3),
    ("adiabatic_vs_full", adiabatic_agreement, 1e-2),
];

pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let params = cfg.device();
    let bias = cfg.bias().unwrap_or(PROBE_BIAS);
    let checks: Vec<Check> = PROBES
        .par_iter()
        .map(|&(name, probe, tolerance)| {
            // a solver failure fails the check rather than the run
            let value = probe(&params, &bias).unwrap_or(f64::INFINITY);
            Check { name, value, tolerance }
        })
        .collect();
    let mut table = Table::new(["check", "value", "tolerance", "passed"]);
    let mut failed = Vec::new();
    for ch in &checks {
        let ok = ch.value <= ch.tolerance;
        if !ok {
            failed.push(ch.name);
        }
        table.push(vec![ch.name.to_string(), num(ch.value), num(ch.tolerance), ok.to_string()]);
    }
    Ok(RunOutput {
        command: "selftest",
        table,
        summary: json!({
            "passed": checks.len() - failed.len(),
            "failed": failed.len(),
            "failed_checks": failed,
            "bias": { "phi_x": bias.phi_x, "n_g": bias.n_g },
        }),
        warnings: Vec::new(),
    })
}
