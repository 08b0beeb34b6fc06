//! Rotating-frame Lindblad dynamics of the junction loop and the scattering
//! matrix obtained from it.
//!
//! Everything upstream is expressed as ordinary frequencies in GHz; the
//! Liouvillian multiplies the whole generator by 2π, so its eigenvalues are
//! angular rates in rad/ns and [`evolve`] integrates in nanoseconds. Drive
//! amplitudes live in the same units as the coupling rate: `|α|²` is a photon
//! flux in photons per ns.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Vector3;

use crate::device::{coupling_operators, solve_loop, BiasPoint, DeviceParams, EigenSystem, QuasiparticleSector};
use crate::linalg::{
    c, kron, max_abs, norm_inf, trace, trace_product, CMat, Mat3, C64, ONE, ZERO,
};
use crate::network::waveguide_smatrix;
use crate::slh::{compose_circulator, rotating_loop_hamiltonian, ComposedSystem};
use crate::{Error, Result, PLANCK};

/// Excited-state population targeted by the automatic weak-drive amplitude.
pub const WEAK_DRIVE_POPULATION: f64 = 1e-8;
/// Ground-state population below which a "linear-response" solve is flagged.
pub const WEAK_DRIVE_WARN_GROUND: f64 = 0.99;
/// Required residual `‖L ρ_ss‖` of a steady state.
pub const STEADY_STATE_RESIDUAL: f64 = 1e-10;

/// Vectorised generator `ρ̇ = L vec(ρ)` with column-stacking `vec`.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    pub matrix: CMat,
    pub dim: usize,
    pub omega_d_ghz: f64,
    pub alpha: [C64; 3],
}

impl Liouvillian {
    /// Generator from an explicit Hamiltonian and jump operators (both in
    /// GHz units); the result is scaled to rad/ns.
    pub fn from_operators(h: &CMat, jumps: &[CMat]) -> Self {
        let d = h.nrows();
        let id = CMat::identity(d, d);
        let minus_i = c(0.0, -1.0);
        let mut m = (kron(&id, h) - kron(&h.transpose(), &id)) * minus_i;
        for l in jumps {
            let ldl = l.adjoint() * l;
            m += kron(&l.map(|z| z.conj()), l);
            m -= kron(&id, &ldl) * c(0.5, 0.0);
            m -= kron(&ldl.transpose(), &id) * c(0.5, 0.0);
        }
        Self {
            matrix: m * c(2.0 * PI, 0.0),
            dim: d,
            omega_d_ghz: f64::NAN,
            alpha: [ZERO; 3],
        }
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let v = vectorize(rho);
        unvectorize(&(&self.matrix * v), self.dim)
    }
}

pub fn vectorize(rho: &CMat) -> CMat {
    CMat::from_column_slice(rho.len(), 1, rho.as_slice())
}

pub fn unvectorize(v: &CMat, dim: usize) -> CMat {
    CMat::from_column_slice(dim, dim, v.as_slice())
}

/// `ρ̇ = -i[H'_tot, ρ] + Σ_j D[L_tot,j] ρ`, scaled by 2π.
pub fn build_liouvillian(cs: &ComposedSystem, omega_d_ghz: f64) -> Liouvillian {
    let mut l = Liouvillian::from_operators(&cs.h_tot_rot, &cs.l_tot);
    l.omega_d_ghz = omega_d_ghz;
    l.alpha = cs.alpha;
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub rho: CMat,
    /// `max |L vec(ρ_ss)|`.
    pub residual: f64,
}

impl SteadyState {
    pub fn ground_population(&self) -> f64 {
        self.rho[(0, 0)].re
    }
}

/// Null vector of the Liouvillian, from the bordered system
/// `[[L, t̄], [tᵀ, 0]] [x; λ] = [0; 1]` with `t = vec(1)`.
pub fn steady_state(l: &Liouvillian) -> Result<SteadyState> {
    let n = l.matrix.nrows();
    let d = l.dim;
    check_kernel(l)?;

    let mut bordered = CMat::zeros(n + 1, n + 1);
    bordered.view_mut((0, 0), (n, n)).copy_from(&l.matrix);
    for i in 0..d {
        let k = i + d * i;
        bordered[(k, n)] = ONE;
        bordered[(n, k)] = ONE;
    }
    let mut rhs = CMat::zeros(n + 1, 1);
    rhs[(n, 0)] = ONE;
    let lu = bordered.clone().full_piv_lu();
    let mut sol = lu.solve(&rhs).ok_or(Error::Singular {
        context: "bordered steady-state system",
        condition: f64::INFINITY,
    })?;
    // one step of iterative refinement
    let r = &rhs - &bordered * &sol;
    if let Some(corr) = lu.solve(&r) {
        sol += corr;
    }

    let x = sol.rows(0, n).into_owned();
    let rho = unvectorize(&x, d);
    let rho = (&rho + rho.adjoint()) * c(0.5, 0.0);
    let tr = trace(&rho);
    let rho = rho / tr;
    let residual = max_abs(&(&l.matrix * vectorize(&rho)));
    if !(residual < STEADY_STATE_RESIDUAL) {
        return Err(Error::NonConvergence {
            context: "steady-state solve",
            residual,
        });
    }
    Ok(SteadyState { rho, residual })
}

fn check_kernel(l: &Liouvillian) -> Result<()> {
    let svd = l.matrix.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    let scale = 1.0 + norm_inf(&l.matrix);
    if sv.len() > 1 && sv[1] < 1e-11 * scale {
        return Err(Error::DegenerateKernel {
            smallest: sv[0],
            second_smallest: sv[1],
        });
    }
    Ok(())
}

/// Bound on the fastest rate of the generator (infinity norm, rad/ns).
pub fn max_rate(l: &Liouvillian) -> f64 {
    norm_inf(&l.matrix)
}

/// Classical fourth-order Runge-Kutta integration of `ρ̇ = L ρ` up to
/// `t_final` ns. Requires `dt · max_rate < 0.1`.
pub fn evolve(l: &Liouvillian, rho0: &CMat, t_final: f64, dt: f64) -> Result<CMat> {
    let rate = max_rate(l);
    if !(dt > 0.0) || dt * rate >= 0.1 {
        return Err(Error::StepTooLarge {
            dt,
            limit: if rate > 0.0 { 0.1 / rate } else { f64::INFINITY },
        });
    }
    let m = &l.matrix;
    let mut v = vectorize(rho0);
    let mut t = 0.0;
    while t < t_final {
        let h = dt.min(t_final - t);
        let k1 = m * &v;
        let k2 = m * (&v + &k1 * c(0.5 * h, 0.0));
        let k3 = m * (&v + &k2 * c(0.5 * h, 0.0));
        let k4 = m * (&v + &k3 * c(h, 0.0));
        v += (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0);
        t += h;
    }
    Ok(unvectorize(&v, l.dim))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Full,
    Adiabatic,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Adiabatic => "adiabatic",
        }
    }
}

/// 3×3 device response `S_ji = ⟨a_out,j⟩ / α_i` at one drive frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub s: Mat3,
    pub omega_d_ghz: f64,
    pub method: Method,
    /// Drive amplitude used by the full solve (0 for the adiabatic path).
    pub alpha_mag: f64,
    /// Smallest ground-state population over the three port solves.
    pub min_ground_population: f64,
}

impl ScatteringMatrix {
    pub fn get(&self, out_port: usize, in_port: usize) -> C64 {
        self.s[(out_port, in_port)]
    }

    /// The drive pushed the loop out of the linear-response regime.
    pub fn weak_drive_warning(&self) -> bool {
        self.min_ground_population < WEAK_DRIVE_WARN_GROUND
    }

    /// Largest singular value of `S`.
    pub fn max_singular_value(&self) -> f64 {
        self.s.singular_values().iter().copied().fold(0.0, f64::max)
    }
}

/// Weak-drive response of the loop in the adiabatic-elimination picture.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopResponse {
    pub r_loop: Mat3,
    /// Complex waveguide-induced rates `Γ_k` (decay plus shift) in rad/ns,
    /// for `k = 1..n_levels-1`.
    pub gamma_k: Vec<C64>,
    /// `Δω_k = 2π(ω_k - ω_d)` in rad/ns.
    pub detuning: Vec<f64>,
    /// Excited-state coherences `⟨k|ρ|0⟩` per unit drive on each port.
    pub coherence_per_port: [Vec<C64>; 3],
}

/// Loop response after eliminating the excited manifold.
///
/// With `E` the excited block of the effective non-Hermitian Hamiltonian
/// `H'_loop + H_s - (i/2) Σ_j L_wl,j† L_wl,j`,
/// `R_loop = -U (iE)^{-1} V`, `U_ik = ⟨0|L_wl,i|k⟩`, `V_kj = ⟨k|L_wl,j†|0⟩`.
/// The diagonal of `iE` is `iΔω_k + Γ_k/2`; its off-diagonal part couples
/// nearly degenerate excited levels and is kept.
pub fn loop_response(es: &EigenSystem, cs: &ComposedSystem, omega_d_ghz: f64) -> Result<LoopResponse> {
    let n = es.n_levels();
    let ne = n - 1;
    let two_pi = 2.0 * PI;

    let mut decay = CMat::zeros(n, n);
    for l in &cs.l_wl {
        decay += l.adjoint() * l;
    }
    // i·E in rad/ns
    let mut ie = CMat::zeros(ne, ne);
    let mut gamma_k = Vec::with_capacity(ne);
    let mut detuning = Vec::with_capacity(ne);
    for a in 0..ne {
        for b in 0..ne {
            let (ka, kb) = (a + 1, b + 1);
            let nonherm = cs.h_s[(ka, kb)] - decay[(ka, kb)] * c(0.0, 0.5);
            ie[(a, b)] = c(0.0, two_pi) * nonherm;
        }
        let k = a + 1;
        let dw = two_pi * (es.omega[k] - omega_d_ghz);
        ie[(a, a)] += c(0.0, dw);
        detuning.push(dw);
        // H_eff,kk = Δ_k - (i/2) Γ_k
        gamma_k.push((cs.h_s[(k, k)] - decay[(k, k)] * c(0.0, 0.5)) * c(0.0, 2.0 * two_pi));
    }

    let u = CMat::from_fn(3, ne, |i, k| cs.l_wl[i][(0, k + 1)] * libm::sqrt(two_pi));
    let v = CMat::from_fn(ne, 3, |k, j| cs.l_wl[j][(0, k + 1)].conj() * libm::sqrt(two_pi));
    let lu = ie.lu();
    let coh = lu.solve(&v).ok_or(Error::Singular {
        context: "adiabatic excited-state block",
        condition: f64::INFINITY,
    })?;
    let r = -(&u * &coh);
    let r_loop = Mat3::from_fn(|i, j| r[(i, j)]);
    let coherence_per_port = core::array::from_fn(|j| (0..ne).map(|k| -coh[(k, j)]).collect());
    Ok(LoopResponse {
        r_loop,
        gamma_k,
        detuning,
        coherence_per_port,
    })
}

/// Photon-flux amplitude for an input power: `|α|² = P/(h f)` photons per
/// second, expressed per ns.
pub fn alpha_from_power_dbm(p_dbm: f64, f_ghz: f64) -> f64 {
    let watts = libm::pow(10.0, p_dbm / 10.0) * 1e-3;
    libm::sqrt(watts / (PLANCK * f_ghz * 1e9) * 1e-9)
}

/// Inverse of [`alpha_from_power_dbm`].
pub fn power_dbm_from_alpha(alpha: f64, f_ghz: f64) -> f64 {
    let watts = alpha * alpha * 1e9 * PLANCK * f_ghz * 1e9;
    10.0 * libm::log10(watts / 1e-3)
}

/// Drive amplitude for [`LoopModel::smatrix_full`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DriveStrength {
    /// Chosen so the excited population stays near [`WEAK_DRIVE_POPULATION`].
    #[default]
    WeakAuto,
    Amplitude(f64),
}

/// A loop at a fixed bias and sector, ready for frequency sweeps.
#[derive(Debug, Clone)]
pub struct LoopModel {
    pub params: DeviceParams,
    pub bias: BiasPoint,
    pub sector: QuasiparticleSector,
    pub es: EigenSystem,
    pub l_loop: [CMat; 3],
}

impl LoopModel {
    pub fn new(params: &DeviceParams, bias: BiasPoint, sector: QuasiparticleSector) -> Result<Self> {
        let es = solve_loop(params, &bias, sector)?;
        Ok(Self::from_eigensystem(params, bias, sector, es))
    }

    pub fn from_eigensystem(
        params: &DeviceParams,
        bias: BiasPoint,
        sector: QuasiparticleSector,
        es: EigenSystem,
    ) -> Self {
        let l_loop = coupling_operators(&es, params.gamma_ordinary());
        Self {
            params: params.clone(),
            bias,
            sector,
            es,
            l_loop,
        }
    }

    pub fn compose(&self, omega_d_ghz: f64, alpha: [C64; 3]) -> Result<ComposedSystem> {
        let a = waveguide_smatrix(&self.params, omega_d_ghz)?;
        let h_rot = rotating_loop_hamiltonian(&self.es.omega, omega_d_ghz);
        compose_circulator(&a, &self.l_loop, &h_rot, alpha, omega_d_ghz)
    }

    pub fn liouvillian(&self, omega_d_ghz: f64, alpha: [C64; 3]) -> Result<Liouvillian> {
        Ok(build_liouvillian(&self.compose(omega_d_ghz, alpha)?, omega_d_ghz))
    }

    pub fn loop_response(&self, omega_d_ghz: f64) -> Result<LoopResponse> {
        let cs = self.compose(omega_d_ghz, [ZERO; 3])?;
        loop_response(&self.es, &cs, omega_d_ghz)
    }

    /// `S = (1 + R_loop) S_w⟵l`.
    pub fn smatrix_adiabatic(&self, omega_d_ghz: f64) -> Result<ScatteringMatrix> {
        let cs = self.compose(omega_d_ghz, [ZERO; 3])?;
        let resp = loop_response(&self.es, &cs, omega_d_ghz)?;
        Ok(ScatteringMatrix {
            s: (Mat3::identity() + resp.r_loop) * cs.s_wl,
            omega_d_ghz,
            method: Method::Adiabatic,
            alpha_mag: 0.0,
            min_ground_population: 1.0,
        })
    }

    /// Amplitude putting at most [`WEAK_DRIVE_POPULATION`] into the excited
    /// manifold on any single port, estimated from the adiabatic coherences.
    pub fn weak_drive_amplitude(&self, omega_d_ghz: f64) -> Result<f64> {
        let cs = self.compose(omega_d_ghz, [ZERO; 3])?;
        let resp = loop_response(&self.es, &cs, omega_d_ghz)?;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            let mut e = Vector3::from_element(ZERO);
            e[i] = ONE;
            let beta = cs.s_wl * e;
            let pop: f64 = (0..self.es.n_levels() - 1)
                .map(|k| {
                    let amp: C64 = (0..3).map(|j| resp.coherence_per_port[j][k] * beta[j]).sum();
                    amp.norm_sqr()
                })
                .sum();
            worst = worst.max(pop);
        }
        if worst > 0.0 {
            Ok(libm::sqrt(WEAK_DRIVE_POPULATION / worst).min(1.0))
        } else {
            Ok(1.0)
        }
    }

    /// Drives each port in turn and reads `S_ji = Tr(L_tot,j ρ_ss) / α_i`.
    pub fn smatrix_full(&self, omega_d_ghz: f64, drive: DriveStrength) -> Result<ScatteringMatrix> {
        let amp = match drive {
            DriveStrength::WeakAuto => self.weak_drive_amplitude(omega_d_ghz)?,
            DriveStrength::Amplitude(a) => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::InvalidParameter {
                        field: "alpha_mag",
                        value: a,
                        bound: "finite and > 0",
                    });
                }
                a
            }
        };
        let mut s = Mat3::zeros();
        let mut min_ground: f64 = 1.0;
        for i in 0..3 {
            let mut alpha = [ZERO; 3];
            alpha[i] = c(amp, 0.0);
            let cs = self.compose(omega_d_ghz, alpha)?;
            let ss = steady_state(&build_liouvillian(&cs, omega_d_ghz))?;
            min_ground = min_ground.min(ss.ground_population());
            for j in 0..3 {
                s[(j, i)] = trace_product(&cs.l_tot[j], &ss.rho) / amp;
            }
        }
        Ok(ScatteringMatrix {
            s,
            omega_d_ghz,
            method: Method::Full,
            alpha_mag: amp,
            min_ground_population: min_ground,
        })
    }
}

/// Full master-equation scattering matrix at one bias and frequency.
pub fn smatrix_full(
    params: &DeviceParams,
    bias: &BiasPoint,
    sector: QuasiparticleSector,
    omega_d_ghz: f64,
    drive: DriveStrength,
) -> Result<ScatteringMatrix> {
    LoopModel::new(params, *bias, sector)?.smatrix_full(omega_d_ghz, drive)
}

/// Adiabatic-elimination scattering matrix at one bias and frequency.
pub fn smatrix_adiabatic(
    params: &DeviceParams,
    bias: &BiasPoint,
    sector: QuasiparticleSector,
    omega_d_ghz: f64,
) -> Result<ScatteringMatrix> {
    LoopModel::new(params, *bias, sector)?.smatrix_adiabatic(omega_d_ghz)
}
