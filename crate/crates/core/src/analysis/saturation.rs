//! Saturation of the circulator under increasing drive power.

use alloc::vec::Vec;

use super::fidelity::{circulation_fidelities, Direction};
use crate::device::EigenSystem;
use crate::dynamics::{alpha_from_power_dbm, DriveStrength, LoopModel};
use crate::{Error, Result, PLANCK};

/// Fidelity drop defining the compression point.
pub const COMPRESSION_DB: f64 = 3.0;
/// Lowest-power fidelity must sit this close to the linear-response value
/// to count as a plateau.
pub const PLATEAU_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub p_dbm: f64,
    /// Drive amplitude in √GHz.
    pub alpha: f64,
    pub fidelity: f64,
    /// `20 log10(F_plateau / F)`.
    pub drop_db: f64,
    pub ground_population: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationReport {
    pub direction: Direction,
    pub omega_d_ghz: f64,
    /// Interpolated power where the drop first reaches 3 dB; `None` if the
    /// grid does not bracket it.
    pub p_3db_dbm: Option<f64>,
    pub points: Vec<PowerPoint>,
    /// One photon per excited-state lifetime.
    pub p_sat_dbm: f64,
    /// Weak-drive (adiabatic) fidelity for comparison with the plateau.
    pub f_linear: f64,
    pub plateau_reached: bool,
}

/// `P_sat = h f / τ_e` with `τ_e = 1/(Γ |⟨e|q̂|g⟩|²)`, taking the excited
/// level and coupling operator with the largest matrix element. `Γ` is the
/// ordinary rate in GHz.
pub fn saturation_estimate(es: &EigenSystem, gamma_ghz: f64, f_ghz: f64) -> Result<f64> {
    let (_, _, m2) = es.dominant_transition();
    if !(m2 > 1e-12) {
        return Err(Error::VanishingMatrixElement);
    }
    Ok(saturation_power_dbm(gamma_ghz, m2, f_ghz))
}

pub fn saturation_power_dbm(gamma_ghz: f64, m2: f64, f_ghz: f64) -> f64 {
    let rate = gamma_ghz * 1e9 * m2;
    let watts = PLANCK * f_ghz * 1e9 * rate;
    10.0 * libm::log10(watts / 1e-3)
}

/// Full master-equation fidelity over a power grid (dBm, ascending).
pub fn power_sweep(
    model: &LoopModel,
    omega_d_ghz: f64,
    power_grid_dbm: &[f64],
    direction: Direction,
) -> Result<SaturationReport> {
    let mut points = Vec::with_capacity(power_grid_dbm.len());
    for &p in power_grid_dbm {
        points.push(power_point(model, omega_d_ghz, p, direction)?);
    }
    summarize(model, omega_d_ghz, points, direction)
}

/// One grid point of [`power_sweep`]; `drop_db` is filled in by
/// [`summarize`].
pub fn power_point(model: &LoopModel, omega_d_ghz: f64, p_dbm: f64, direction: Direction) -> Result<PowerPoint> {
    if !p_dbm.is_finite() {
        return Err(Error::InvalidParameter {
            field: "power_dbm",
            value: p_dbm,
            bound: "finite",
        });
    }
    let alpha = alpha_from_power_dbm(p_dbm, omega_d_ghz);
    let s = model.smatrix_full(omega_d_ghz, DriveStrength::Amplitude(alpha))?;
    Ok(PowerPoint {
        p_dbm,
        alpha,
        fidelity: direction.fidelity(&circulation_fidelities(&s.s)),
        drop_db: 0.0,
        ground_population: s.min_ground_population,
    })
}

/// Plateau, drops and compression point from evaluated grid points.
pub fn summarize(
    model: &LoopModel,
    omega_d_ghz: f64,
    mut points: Vec<PowerPoint>,
    direction: Direction,
) -> Result<SaturationReport> {
    points.sort_by(|a, b| a.p_dbm.total_cmp(&b.p_dbm));
    let f_linear = direction.fidelity(&circulation_fidelities(&model.smatrix_adiabatic(omega_d_ghz)?.s));
    let plateau = points.first().map_or(f64::NAN, |p| p.fidelity);
    for p in &mut points {
        p.drop_db = if p.fidelity > 0.0 {
            20.0 * libm::log10(plateau / p.fidelity)
        } else {
            f64::INFINITY
        };
    }
    let p_3db_dbm = points.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        (a.drop_db < COMPRESSION_DB && b.drop_db >= COMPRESSION_DB).then(|| {
            if b.drop_db.is_finite() {
                a.p_dbm + (b.p_dbm - a.p_dbm) * (COMPRESSION_DB - a.drop_db) / (b.drop_db - a.drop_db)
            } else {
                b.p_dbm
            }
        })
    });
    let p_sat_dbm = saturation_estimate(&model.es, model.params.gamma_ordinary(), omega_d_ghz)?;
    Ok(SaturationReport {
        direction,
        omega_d_ghz,
        p_3db_dbm,
        plateau_reached: (plateau - f_linear).abs() <= PLATEAU_TOLERANCE,
        points,
        p_sat_dbm,
        f_linear,
    })
}
