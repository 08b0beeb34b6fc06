//! Frequency grids and the junction-spread study.

use alloc::vec::Vec;

use super::fidelity::{circulation_fidelities, Direction, FidelityReport};
use super::optimize::{optimize_bias, OptimizationResult, OptimizerConfig};
use crate::device::{junction_energies_from_spread, DeviceParams, QuasiparticleSector};
use crate::dynamics::{DriveStrength, LoopModel, Method, ScatteringMatrix};
use crate::{Error, Result};

/// Inclusive grid `f_min, f_min + step, ..` up to `f_max` (GHz; step in MHz).
/// Points are computed from their index, so no rounding drift accumulates.
pub fn frequency_grid(f_min_ghz: f64, f_max_ghz: f64, step_mhz: f64) -> Result<Vec<f64>> {
    if !(step_mhz > 0.0 && step_mhz.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "f_step_mhz",
            value: step_mhz,
            bound: "finite and > 0",
        });
    }
    if !(f_min_ghz > 0.0 && f_max_ghz >= f_min_ghz && f_max_ghz.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "f_max_ghz",
            value: f_max_ghz,
            bound: ">= f_min_ghz > 0",
        });
    }
    let step = step_mhz * 1e-3;
    let n = libm::floor((f_max_ghz - f_min_ghz) / step + 1e-9) as usize + 1;
    Ok((0..n).map(|i| f_min_ghz + step * i as f64).collect())
}

/// `n` evenly spaced points spanning `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn scattering_at(model: &LoopModel, f_ghz: f64, method: Method) -> Result<ScatteringMatrix> {
    match method {
        Method::Full => model.smatrix_full(f_ghz, DriveStrength::WeakAuto),
        Method::Adiabatic => model.smatrix_adiabatic(f_ghz),
    }
}

pub fn smatrix_sweep(model: &LoopModel, freqs: &[f64], method: Method) -> Result<Vec<ScatteringMatrix>> {
    freqs.iter().map(|&f| scattering_at(model, f, method)).collect()
}

pub fn fidelity_sweep(model: &LoopModel, freqs: &[f64], method: Method) -> Result<Vec<(f64, FidelityReport)>> {
    freqs
        .iter()
        .map(|&f| Ok((f, circulation_fidelities(&scattering_at(model, f, method)?.s))))
        .collect()
}

/// Device with the worst-case junction assignment for spread `delta` around
/// the mean `E_J` of `base`, and shunt capacitance `c_x`.
pub fn spread_params(base: &DeviceParams, delta: f64, c_x: f64) -> Result<DeviceParams> {
    let mean = (base.e_j[0] + base.e_j[1] + base.e_j[2]) / 3.0;
    let mut p = base.clone();
    p.e_j = junction_energies_from_spread(mean, delta)?;
    p.c_x = c_x;
    p.validate()?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadRow {
    pub delta: f64,
    pub c_x: f64,
    pub result: OptimizationResult,
}

pub const MAX_SPREAD: f64 = 0.05;

pub fn check_spread_grid(delta_grid: &[f64]) -> Result<()> {
    for &d in delta_grid {
        if !(0.0..=MAX_SPREAD).contains(&d) {
            return Err(Error::InvalidParameter {
                field: "delta",
                value: d,
                bound: "in [0, 0.05]",
            });
        }
    }
    Ok(())
}

/// Optimised clockwise fidelity for every `(δ, C_X)` pair, δ-major.
pub fn fidelity_vs_spread_sweep(
    params_base: &DeviceParams,
    delta_grid: &[f64],
    c_x_list: &[f64],
    sector: QuasiparticleSector,
    config: &OptimizerConfig,
) -> Result<Vec<SpreadRow>> {
    check_spread_grid(delta_grid)?;
    let mut rows = Vec::with_capacity(delta_grid.len() * c_x_list.len());
    for &delta in delta_grid {
        for &c_x in c_x_list {
            let p = spread_params(params_base, delta, c_x)?;
            let result = optimize_bias(&p, sector, Direction::Cw, config)?;
            rows.push(SpreadRow { delta, c_x, result });
        }
    }
    Ok(rows)
}
