//! The three-junction loop: Hamiltonian in the two-charge basis, its
//! low-lying eigensystem and the coupling charge operators.
//!
//! The loop is written in the reduced charges `n'_1 = n_1`, `n'_2 = -n_2`
//! with the conserved total charge `n_0 = n_1 + n_2 + n_3` fixed to zero.
//! The phase operator conjugate to `n'_j` acts as a unit translation:
//! `e^{iφ'_j}` raises `n'_j` by one.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::{c, hermitian_lowest, strict_upper, CMat, C64, ZERO};
use crate::{Error, Result};

/// Ground-state weight on the outermost charge states above which the
/// truncation is flagged as too small.
pub const TRUNCATION_WARN_WEIGHT: f64 = 1e-8;

/// Interior coupling capacitance `C̃_C` of the waveguide network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingCapacitance {
    /// Finite value in fF.
    Finite(f64),
    /// Galvanic connection, evaluated with the closed-form limit.
    Infinite,
}

/// How the configured loop-waveguide coupling rate is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaConvention {
    /// `gamma_ghz` is an ordinary frequency, like every energy in the model.
    #[default]
    Ordinary,
    /// `gamma_ghz` is an angular rate in rad/ns and is divided by 2π.
    Angular,
}

/// Electrical constants of the chip. Energies are `E/h` in GHz.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    pub e_c_sigma: f64,
    pub e_j: [f64; 3],
    /// Inter-waveguide shunt capacitance in fF.
    pub c_x: f64,
    pub c_c_tilde: CouplingCapacitance,
    /// Waveguide impedance in Ω.
    pub z_wg: f64,
    /// Loop-waveguide coupling rate in GHz.
    pub gamma: f64,
    pub gamma_convention: GammaConvention,
    /// Charge truncation: `n'_1, n'_2 ∈ [-n_cut, n_cut]`.
    pub n_cut: usize,
    /// Retained loop eigenlevels, ground state included.
    pub n_levels: usize,
}

impl DeviceParams {
    pub const DEFAULT_N_CUT: usize = 7;
    pub const DEFAULT_N_LEVELS: usize = 5;
    pub const DEFAULT_Z_WG: f64 = 50.0;

    /// Parameters with the documented defaults for everything but the
    /// fitted constants.
    pub fn new(e_c_sigma: f64, e_j: [f64; 3], c_x: f64, gamma: f64) -> Self {
        Self {
            e_c_sigma,
            e_j,
            c_x,
            c_c_tilde: CouplingCapacitance::Infinite,
            z_wg: Self::DEFAULT_Z_WG,
            gamma,
            gamma_convention: GammaConvention::Ordinary,
            n_cut: Self::DEFAULT_N_CUT,
            n_levels: Self::DEFAULT_N_LEVELS,
        }
    }

    /// The fitted device: `E_CΣ = 3.09 GHz`, `E_J = {14.73, 15.15, 15.22}`
    /// GHz, `C_X = 76 fF`, `Γ = 0.27 GHz`.
    pub fn fitted() -> Self {
        Self::new(3.09, [14.73, 15.15, 15.22], 76.0, 0.27)
    }

    pub fn validate(&self) -> Result<()> {
        positive("e_c_sigma", self.e_c_sigma)?;
        for &e in &self.e_j {
            positive("e_j", e)?;
        }
        non_negative("c_x", self.c_x)?;
        if let CouplingCapacitance::Finite(cc) = self.c_c_tilde {
            positive("c_c_tilde", cc)?;
        }
        positive("z_wg", self.z_wg)?;
        non_negative("gamma", self.gamma)?;
        if self.n_cut < 3 {
            return Err(Error::InvalidParameter {
                field: "n_cut",
                value: self.n_cut as f64,
                bound: ">= 3",
            });
        }
        let dim = (2 * self.n_cut + 1) * (2 * self.n_cut + 1);
        if self.n_levels < 3 || self.n_levels > dim {
            return Err(Error::InvalidParameter {
                field: "n_levels",
                value: self.n_levels as f64,
                bound: ">= 3 and <= (2 n_cut + 1)^2",
            });
        }
        Ok(())
    }

    /// Coupling rate as an ordinary frequency in GHz.
    pub fn gamma_ordinary(&self) -> f64 {
        match self.gamma_convention {
            GammaConvention::Ordinary => self.gamma,
            GammaConvention::Angular => self.gamma / (2.0 * PI),
        }
    }

    /// Relative junction spread `(max - min) / mean`.
    pub fn junction_spread(&self) -> f64 {
        junction_spread(self.e_j)
    }
}

fn positive(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            value,
            bound: "finite and > 0",
        })
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            value,
            bound: "finite and >= 0",
        })
    }
}

/// External controls: dimensionless flux `φ_x = 2πΦ_x/Φ_0` and the three
/// island charge biases in Cooper-pair units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiasPoint {
    pub phi_x: f64,
    pub n_g: [f64; 3],
}

impl BiasPoint {
    pub fn new(phi_x: f64, n_g: [f64; 3]) -> Self {
        Self { phi_x, n_g }
    }

    /// Flux reduced to `[0, 2π)`.
    pub fn reduced_phi(&self) -> f64 {
        wrap_2pi(self.phi_x)
    }

    /// The time-reversed bias `φ_x → -φ_x`, which transposes the scattering
    /// matrix and so swaps the circulation direction.
    pub fn mirrored(&self) -> Self {
        Self {
            phi_x: wrap_2pi(2.0 * PI - self.reduced_phi()),
            n_g: self.n_g,
        }
    }
}

/// One of the four quasiparticle sectors, realised as half-integer offsets
/// on `(n_g,1, n_g,2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct QuasiparticleSector(u8);

impl QuasiparticleSector {
    pub const ALL: [QuasiparticleSector; 4] = [Self(0), Self(1), Self(2), Self(3)];

    pub fn new(id: u8) -> Result<Self> {
        if id < 4 {
            Ok(Self(id))
        } else {
            Err(Error::InvalidParameter {
                field: "sector",
                value: id as f64,
                bound: "in 0..=3",
            })
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Offsets added to `(n_g,1, n_g,2)`:
    /// `(0,0)`, `(½,0)`, `(0,½)`, `(½,½)` for sectors 0..3.
    pub fn charge_offsets(self) -> [f64; 2] {
        match self.0 {
            0 => [0.0, 0.0],
            1 => [0.5, 0.0],
            2 => [0.0, 0.5],
            _ => [0.5, 0.5],
        }
    }
}

/// `(E_J(1 - δ/2), E_J, E_J(1 + δ/2))`: junction 2 at the mean, junctions 1
/// and 3 pushed apart symmetrically.
pub fn junction_energies_from_spread(e_j_mean: f64, delta: f64) -> Result<[f64; 3]> {
    if !(0.0..2.0).contains(&delta) {
        return Err(Error::InvalidParameter {
            field: "delta",
            value: delta,
            bound: "in [0, 2)",
        });
    }
    positive("e_j_mean", e_j_mean)?;
    Ok([
        e_j_mean * (1.0 - delta / 2.0),
        e_j_mean,
        e_j_mean * (1.0 + delta / 2.0),
    ])
}

pub fn junction_spread(e_j: [f64; 3]) -> f64 {
    let max = e_j.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = e_j.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = (e_j[0] + e_j[1] + e_j[2]) / 3.0;
    (max - min) / mean
}

/// Truncated product basis `|n'_1, n'_2⟩` with `|n'_j| ≤ n_cut`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChargeBasis {
    pub n_cut: usize,
}

impl ChargeBasis {
    pub fn side(&self) -> usize {
        2 * self.n_cut + 1
    }

    pub fn dim(&self) -> usize {
        self.side() * self.side()
    }

    pub fn index(&self, n1: i64, n2: i64) -> usize {
        let off = self.n_cut as i64;
        ((n1 + off) as usize) * self.side() + (n2 + off) as usize
    }

    /// `(n'_1, n'_2)` of a flat index.
    pub fn charges(&self, idx: usize) -> (i64, i64) {
        let off = self.n_cut as i64;
        (
            (idx / self.side()) as i64 - off,
            (idx % self.side()) as i64 - off,
        )
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (n1, n2) = self.charges(idx);
        let m = self.n_cut as i64;
        n1.abs() == m || n2.abs() == m
    }
}

/// Loop Hamiltonian on the truncated charge basis, in GHz.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopHamiltonian {
    pub basis: ChargeBasis,
    pub matrix: CMat,
}

pub fn build_loop_hamiltonian(
    params: &DeviceParams,
    bias: &BiasPoint,
    sector: QuasiparticleSector,
) -> Result<LoopHamiltonian> {
    params.validate()?;
    let basis = ChargeBasis {
        n_cut: params.n_cut,
    };
    let dim = basis.dim();
    let [off1, off2] = sector.charge_offsets();
    let g13 = bias.n_g[0] + off1 - bias.n_g[2];
    let g23 = bias.n_g[1] + off2 - bias.n_g[2];
    let ec = params.e_c_sigma;

    let mut h = CMat::zeros(dim, dim);
    for idx in 0..dim {
        let (n1, n2) = basis.charges(idx);
        let (n1, n2) = (n1 as f64, n2 as f64);
        let a = n1 - 0.5 * g13;
        let b = n2 + 0.5 * g23;
        h[(idx, idx)] = c(ec * (a * a + b * b - n1 * n2), 0.0);
    }

    let third = bias.phi_x / 3.0;
    // -E_J cos(φ - θ) = -(E_J/2)(e^{-iθ} e^{iφ} + h.c.)
    let hop = |e_j: f64, theta: f64| -> C64 {
        c(-0.5 * e_j * libm::cos(theta), 0.5 * e_j * libm::sin(theta))
    };
    let t1 = hop(params.e_j[0], third);
    let t2 = hop(params.e_j[1], third);
    let t12 = hop(params.e_j[2], -third);
    let m = params.n_cut as i64;
    for idx in 0..dim {
        let (n1, n2) = basis.charges(idx);
        let mut put = |to: usize, amp: C64| {
            h[(to, idx)] += amp;
            h[(idx, to)] += amp.conj();
        };
        if n1 < m {
            put(basis.index(n1 + 1, n2), t1);
        }
        if n2 < m {
            put(basis.index(n1, n2 + 1), t2);
        }
        if n1 < m && n2 < m {
            put(basis.index(n1 + 1, n2 + 1), t12);
        }
    }
    Ok(LoopHamiltonian { basis, matrix: h })
}

/// Low-lying eigensystem of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Absolute eigenenergies in GHz, ascending.
    pub energies: Vec<f64>,
    /// `ω_k = E_k - E_0` in GHz; `omega[0] = 0`.
    pub omega: Vec<f64>,
    /// Eigenvectors in the charge basis (one column per level).
    pub states: CMat,
    /// `⟨k|q̂_j|ℓ⟩` for `q̂_1 = n'_1`, `q̂_2 = -n'_2`, `q̂_3 = -n'_1 + n'_2`.
    pub q: [CMat; 3],
    /// Ground-state probability on the outermost charge states.
    pub boundary_weight: f64,
}

impl EigenSystem {
    pub fn n_levels(&self) -> usize {
        self.omega.len()
    }

    /// `ω_1 .. ω_{n-1}`.
    pub fn transition_frequencies(&self) -> &[f64] {
        &self.omega[1..]
    }

    pub fn truncation_warning(&self) -> bool {
        self.boundary_weight > TRUNCATION_WARN_WEIGHT
    }

    /// Excited level and port with the largest `|⟨k|q̂_j|0⟩|²`.
    pub fn dominant_transition(&self) -> (usize, usize, f64) {
        let mut best = (1, 0, 0.0);
        for k in 1..self.n_levels() {
            for (j, q) in self.q.iter().enumerate() {
                let m = q[(k, 0)].norm_sqr();
                if m > best.2 {
                    best = (k, j, m);
                }
            }
        }
        best
    }
}

pub fn eigensystem(h: &LoopHamiltonian, n_levels: usize) -> Result<EigenSystem> {
    let (energies, states) = hermitian_lowest(&h.matrix, n_levels)?;
    let basis = h.basis;
    let dim = basis.dim();

    let mut qd = [
        alloc::vec![0.0; dim],
        alloc::vec![0.0; dim],
        alloc::vec![0.0; dim],
    ];
    for idx in 0..dim {
        let (n1, n2) = basis.charges(idx);
        qd[0][idx] = n1 as f64;
        qd[1][idx] = -(n2 as f64);
        qd[2][idx] = (n2 - n1) as f64;
    }
    let project = |diag: &[f64]| -> CMat {
        let mut scaled = states.clone();
        for (r, &d) in diag.iter().enumerate() {
            for col in 0..scaled.ncols() {
                scaled[(r, col)] *= d;
            }
        }
        let m = states.adjoint() * scaled;
        // exact Hermitian symmetrisation
        (&m + m.adjoint()) * c(0.5, 0.0)
    };
    let q = [project(&qd[0]), project(&qd[1]), project(&qd[2])];

    let boundary_weight = (0..dim)
        .filter(|&i| basis.is_boundary(i))
        .map(|i| states[(i, 0)].norm_sqr())
        .sum();
    let omega = energies.iter().map(|e| e - energies[0]).collect();
    Ok(EigenSystem {
        energies,
        omega,
        states,
        q,
        boundary_weight,
    })
}

/// Builds and diagonalises the loop in one step.
pub fn solve_loop(
    params: &DeviceParams,
    bias: &BiasPoint,
    sector: QuasiparticleSector,
) -> Result<EigenSystem> {
    let h = build_loop_hamiltonian(params, bias, sector)?;
    eigensystem(&h, params.n_levels)
}

/// `L_loop,j = √Γ · Σ_{k<ℓ} ⟨k|q̂_j|ℓ⟩ |k⟩⟨ℓ|`, with `Γ` as an ordinary rate
/// in GHz.
pub fn coupling_operators(es: &EigenSystem, gamma: f64) -> [CMat; 3] {
    let s = c(libm::sqrt(gamma.max(0.0)), 0.0);
    core::array::from_fn(|j| {
        if gamma == 0.0 {
            CMat::from_element(es.n_levels(), es.n_levels(), ZERO)
        } else {
            strict_upper(&es.q[j]) * s
        }
    })
}

/// One row of a flux sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub phi_x: f64,
    pub sector: QuasiparticleSector,
    /// `ω_1 .. ω_{n_levels-1}` in GHz.
    pub omega: Vec<f64>,
    pub boundary_weight: f64,
}

/// Transition frequencies from the ground state over a flux grid, one row
/// per grid point per sector (grid-major order).
pub fn transition_spectrum(
    params: &DeviceParams,
    n_g: [f64; 3],
    flux_grid: &[f64],
    sectors: &[QuasiparticleSector],
) -> Result<Vec<SpectrumRow>> {
    let mut rows = Vec::with_capacity(flux_grid.len() * sectors.len());
    for &phi_x in flux_grid {
        if !phi_x.is_finite() {
            return Err(Error::InvalidParameter {
                field: "phi_x",
                value: phi_x,
                bound: "finite",
            });
        }
        for &sector in sectors {
            rows.push(spectrum_row(params, n_g, phi_x, sector)?);
        }
    }
    Ok(rows)
}

pub fn spectrum_row(
    params: &DeviceParams,
    n_g: [f64; 3],
    phi_x: f64,
    sector: QuasiparticleSector,
) -> Result<SpectrumRow> {
    let es = solve_loop(params, &BiasPoint::new(phi_x, n_g), sector)?;
    Ok(SpectrumRow {
        phi_x,
        sector,
        omega: es.transition_frequencies().to_vec(),
        boundary_weight: es.boundary_weight,
    })
}


fn wrap_2pi(x: f64) -> f64 {
    let p = 2.0 * PI;
    let r = x - p * libm::floor(x / p);
    if r >= p {
        0.0
    } else {
        r
    }
}
