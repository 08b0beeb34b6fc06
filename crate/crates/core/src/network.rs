//! Capacitively coupled waveguides: three exterior ports joined pairwise by
//! shunt capacitors `C_X` and tied through `C̃_C` to three interior ports
//! that feed the junction loop.
//!
//! The dimensionless coupling is `z = 2π f Z_wg C_X` with `f` the ordinary
//! drive frequency, so `z(7.25 GHz, 50 Ω, 75 fF) ≈ 0.171`.

use core::f64::consts::PI;

use nalgebra::SMatrix;

use crate::device::{CouplingCapacitance, DeviceParams};
use crate::linalg::{c, Mat3, C64, ONE};
use crate::{Error, Result};

pub type Mat6 = SMatrix<f64, 6, 6>;
pub type CMat6 = SMatrix<C64, 6, 6>;

/// Condition number above which the Cayley resolvent is rejected.
const MAX_RESOLVENT_CONDITION: f64 = 1e12;

/// Real symmetric 6×6 capacitance matrix in fF, ordered
/// `(a_1, a_2, a_3, b_1, b_2, b_3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitanceMatrix(pub Mat6);

impl CapacitanceMatrix {
    pub fn matrix(&self) -> &Mat6 {
        &self.0
    }
}

/// `[[C_X - C_Σ, C_C], [C_C, -C_C]]` with `C_Σ = (C̃_C + 2C_X)·1`,
/// `C_C = C̃_C·1` and `C_X` hollow with every off-diagonal equal to `C_X`.
pub fn build_capacitance_matrix(c_x: f64, c_c_tilde: f64) -> Result<CapacitanceMatrix> {
    if !(c_x >= 0.0 && c_x.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "c_x",
            value: c_x,
            bound: "finite and >= 0",
        });
    }
    if !(c_c_tilde > 0.0 && c_c_tilde.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "c_c_tilde",
            value: c_c_tilde,
            bound: "finite and > 0",
        });
    }
    let c_sigma = c_c_tilde + 2.0 * c_x;
    let m = Mat6::from_fn(|r, col| {
        let (br, bc) = (r / 3, col / 3);
        let same = r % 3 == col % 3;
        match (br, bc) {
            (0, 0) if same => -c_sigma,
            (0, 0) => c_x,
            (1, 1) if same => -c_c_tilde,
            _ if same => c_c_tilde,
            _ => 0.0,
        }
    });
    Ok(CapacitanceMatrix(m))
}

/// The 6×6 scattering block `A` of the waveguide network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideScattering {
    pub a: CMat6,
    pub z: f64,
}

impl WaveguideScattering {
    fn block(&self, r: usize, col: usize) -> Mat3 {
        self.a.fixed_view::<3, 3>(3 * r, 3 * col).into_owned()
    }

    /// Exterior-to-exterior block.
    pub fn a11(&self) -> Mat3 {
        self.block(0, 0)
    }

    /// Interior inputs to exterior outputs.
    pub fn a12(&self) -> Mat3 {
        self.block(0, 1)
    }

    /// Exterior inputs to interior outputs.
    pub fn a21(&self) -> Mat3 {
        self.block(1, 0)
    }

    /// Interior-to-interior block.
    pub fn a22(&self) -> Mat3 {
        self.block(1, 1)
    }

    pub fn from_blocks(a11: &Mat3, a12: &Mat3, a21: &Mat3, a22: &Mat3, z: f64) -> Self {
        let mut a = CMat6::zeros();
        a.fixed_view_mut::<3, 3>(0, 0).copy_from(a11);
        a.fixed_view_mut::<3, 3>(0, 3).copy_from(a12);
        a.fixed_view_mut::<3, 3>(3, 0).copy_from(a21);
        a.fixed_view_mut::<3, 3>(3, 3).copy_from(a22);
        Self { a, z }
    }
}

/// `z = 2π f Z_wg C_X` for `f` in GHz, `Z_wg` in Ω and `C_X` in fF.
pub fn coupling_z(omega_d_ghz: f64, z_wg: f64, c_x: f64) -> f64 {
    2.0 * PI * omega_d_ghz * 1e9 * z_wg * c_x * 1e-15
}

/// Cayley transform `A = [1 + iωZC]^{-1} [1 - iωZC]`.
///
/// `ωZC` is real symmetric, so the transform is taken on its eigenvalues;
/// the result is unitary to rounding even when `C̃_C` is huge.
pub fn waveguide_smatrix_finite(
    omega_d_ghz: f64,
    z_wg: f64,
    cap: &CapacitanceMatrix,
) -> Result<WaveguideScattering> {
    let scale = 2.0 * PI * omega_d_ghz * 1e9 * z_wg * 1e-15;
    let gen = cap.0 * scale;
    let eig = nalgebra::SymmetricEigen::try_new(gen, 1e-15, 0).ok_or(Error::NonConvergence {
        context: "waveguide generator eigenvalues",
        residual: f64::NAN,
    })?;
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let cond = libm::sqrt(1.0 + lmax * lmax);
    if !(cond < MAX_RESOLVENT_CONDITION) {
        return Err(Error::Singular {
            context: "waveguide resolvent",
            condition: cond,
        });
    }
    let v = eig.eigenvectors.map(|x| c(x, 0.0));
    let phases = CMat6::from_diagonal(&eig.eigenvalues.map(|l| c(1.0, -l) / c(1.0, l)));
    let a = v * phases * v.transpose();
    // Off-diagonal C_X entries of the exterior block; every one is equal.
    let z = scale * cap.0[(0, 1)];
    Ok(WaveguideScattering { a, z })
}

/// Closed form for `C̃_C → ∞`:
/// `A11 = A22 = z/(2i+3z)·(J - 3·1)`,
/// `A12 = A21 = z/(2i+3z)·J + 2i/(2i+3z)·1`, with `J` the all-ones matrix.
pub fn waveguide_smatrix_limit(z: f64) -> Result<WaveguideScattering> {
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "z",
            value: z,
            bound: "finite and >= 0",
        });
    }
    let denom = c(3.0 * z, 2.0);
    let f = c(z, 0.0) / denom;
    let diag = c(0.0, 2.0) / denom;
    let reflect = Mat3::from_fn(|r, col| if r == col { f * -2.0 } else { f });
    let through = Mat3::from_fn(|r, col| if r == col { f + diag } else { f });
    Ok(WaveguideScattering::from_blocks(
        &reflect, &through, &through, &reflect, z,
    ))
}

/// Waveguide block for a device at drive frequency `omega_d_ghz`, using the
/// closed form unless a finite `C̃_C` is configured.
pub fn waveguide_smatrix(params: &DeviceParams, omega_d_ghz: f64) -> Result<WaveguideScattering> {
    match params.c_c_tilde {
        CouplingCapacitance::Infinite => {
            waveguide_smatrix_limit(coupling_z(omega_d_ghz, params.z_wg, params.c_x))
        }
        CouplingCapacitance::Finite(cc) => {
            let cap = build_capacitance_matrix(params.c_x, cc)?;
            waveguide_smatrix_finite(omega_d_ghz, params.z_wg, &cap)
        }
    }
}

/// Cyclic port relabelling `1 → 2 → 3 → 1` applied to both port triplets.
pub fn cyclic_port_permutation() -> CMat6 {
    let mut p = CMat6::zeros();
    for block in 0..2 {
        for i in 0..3 {
            p[(3 * block + (i + 1) % 3, 3 * block + i)] = ONE;
        }
    }
    p
}
