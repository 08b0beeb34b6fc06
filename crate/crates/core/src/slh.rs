//! SLH triples `(S, L, H)` with scalar scattering blocks and operators on the
//! retained loop eigenbasis, plus the composed circulator network.

use alloc::vec::Vec;

use crate::linalg::{
    c, hermiticity_error, inverse, inverse3, minus_half_i_antihermitian, mix_ports,
    port_quadratic, CMat, Mat3, C64, ZERO,
};
use crate::network::WaveguideScattering;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SlhTriple {
    /// `n × n` scattering block.
    pub s: CMat,
    /// One coupling operator per port.
    pub l: Vec<CMat>,
    pub h: CMat,
}

impl SlhTriple {
    pub fn new(s: CMat, l: Vec<CMat>, h: CMat) -> Result<Self> {
        let n = s.nrows();
        if s.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "SLH scattering block",
                left: n,
                right: s.ncols(),
            });
        }
        if l.len() != n {
            return Err(Error::DimensionMismatch {
                context: "SLH coupling vector",
                left: n,
                right: l.len(),
            });
        }
        let d = h.nrows();
        if let Some(bad) = l.iter().find(|op| op.nrows() != d || op.ncols() != d) {
            return Err(Error::DimensionMismatch {
                context: "SLH coupling operator",
                left: d,
                right: bad.nrows(),
            });
        }
        let herm = hermiticity_error(&h);
        if herm > 1e-12 * (1.0 + crate::linalg::max_abs(&h)) {
            return Err(Error::InvalidParameter {
                field: "H",
                value: herm,
                bound: "Hermitian",
            });
        }
        Ok(Self { s, l, h })
    }

    /// `(1, 0, 0)` on `n` ports.
    pub fn identity(n_ports: usize, dim: usize) -> Self {
        Self {
            s: CMat::identity(n_ports, n_ports),
            l: (0..n_ports).map(|_| CMat::zeros(dim, dim)).collect(),
            h: CMat::zeros(dim, dim),
        }
    }

    /// Coherent source `(1, α·1, 0)`.
    pub fn drive(alpha: &[C64], dim: usize) -> Self {
        let n = alpha.len();
        Self {
            s: CMat::identity(n, n),
            l: alpha.iter().map(|&a| CMat::identity(dim, dim) * a).collect(),
            h: CMat::zeros(dim, dim),
        }
    }

    /// Passive linear network `(A, 0, 0)`.
    pub fn passive(s: CMat, dim: usize) -> Self {
        let n = s.nrows();
        Self {
            s,
            l: (0..n).map(|_| CMat::zeros(dim, dim)).collect(),
            h: CMat::zeros(dim, dim),
        }
    }

    pub fn n_ports(&self) -> usize {
        self.s.nrows()
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }
}

fn check_dims(context: &'static str, a: &SlhTriple, b: &SlhTriple) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context,
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// `Σ_j M_ij ops[j]` for arbitrary port counts.
fn mix(m: &CMat, ops: &[CMat]) -> Vec<CMat> {
    let d = ops.first().map_or(0, |o| o.nrows());
    (0..m.nrows())
        .map(|i| {
            let mut acc = CMat::zeros(d, d);
            for (j, op) in ops.iter().enumerate() {
                let w = m[(i, j)];
                if w != ZERO {
                    acc += op * w;
                }
            }
            acc
        })
        .collect()
}

/// `Σ_ij a_i† M_ij b_j` for arbitrary port counts.
fn quadratic(a: &[CMat], m: &CMat, b: &[CMat]) -> CMat {
    let d = a.first().map_or(0, |o| o.nrows());
    let mut out = CMat::zeros(d, d);
    for (i, ai) in a.iter().enumerate() {
        let ad = ai.adjoint();
        for (j, bj) in b.iter().enumerate() {
            let w = m[(i, j)];
            if w != ZERO {
                out += &ad * bj * w;
            }
        }
    }
    out
}

/// Series product `G2 ◁ G1`: the outputs of `g1` drive the inputs of `g2`.
///
/// `S = S2 S1`, `L = L2 + S2 L1`, `H = H1 + H2 - (i/2)(L2† S2 L1 - h.c.)`.
pub fn series(g2: &SlhTriple, g1: &SlhTriple) -> Result<SlhTriple> {
    if g2.n_ports() != g1.n_ports() {
        return Err(Error::DimensionMismatch {
            context: "series product ports",
            left: g2.n_ports(),
            right: g1.n_ports(),
        });
    }
    check_dims("series product Hilbert space", g2, g1)?;
    let s = &g2.s * &g1.s;
    let s2l1 = mix(&g2.s, &g1.l);
    let l = g2.l.iter().zip(&s2l1).map(|(a, b)| a + b).collect();
    let cross = quadratic(&g2.l, &g2.s, &g1.l);
    let h = &g1.h + &g2.h + minus_half_i_antihermitian(&cross);
    Ok(SlhTriple { s, l, h })
}

/// Concatenation `G_a ⊞ G_b`: block-diagonal `S`, stacked `L`, summed `H`.
pub fn concat(a: &SlhTriple, b: &SlhTriple) -> Result<SlhTriple> {
    check_dims("concatenation Hilbert space", a, b)?;
    let (na, nb) = (a.n_ports(), b.n_ports());
    let mut s = CMat::zeros(na + nb, na + nb);
    s.view_mut((0, 0), (na, na)).copy_from(&a.s);
    s.view_mut((na, na), (nb, nb)).copy_from(&b.s);
    let l = a.l.iter().chain(&b.l).cloned().collect();
    Ok(SlhTriple {
        s,
        l,
        h: &a.h + &b.h,
    })
}

/// Feedback reduction: the last `internal` output ports are wired back into
/// the last `internal` input ports and eliminated.
///
/// With port blocks 1 (kept) and 2 (internal) and `X = (1 - S22)^{-1}`:
/// `S = S11 + S12 X S21`, `L = L1 + S12 X L2`,
/// `H = H - (i/2)((L1† S12 + L2† S22) X L2 - h.c.)`.
pub fn feedback_reduce(g: &SlhTriple, internal: usize) -> Result<SlhTriple> {
    let n = g.n_ports();
    if internal == 0 || internal > n {
        return Err(Error::DimensionMismatch {
            context: "feedback internal ports",
            left: n,
            right: internal,
        });
    }
    let ext = n - internal;
    let s11 = g.s.view((0, 0), (ext, ext)).into_owned();
    let s12 = g.s.view((0, ext), (ext, internal)).into_owned();
    let s21 = g.s.view((ext, 0), (internal, ext)).into_owned();
    let s22 = g.s.view((ext, ext), (internal, internal)).into_owned();
    let resolvent = CMat::identity(internal, internal) - &s22;
    let (x, _) = inverse(&resolvent, "feedback resolvent (1 - S22)")?;

    let s12x = &s12 * &x;
    let s = &s11 + &s12x * &s21;
    let (l1, l2) = g.l.split_at(ext);
    let fed = mix(&s12x, l2);
    let l = l1.iter().zip(&fed).map(|(a, b)| a + b).collect();

    let s22x = &s22 * &x;
    let cross = quadratic(l1, &s12x, l2) + quadratic(l2, &s22x, l2);
    let h = &g.h + minus_half_i_antihermitian(&cross);
    Ok(SlhTriple { s, l, h })
}

/// The drive, waveguide and loop triples combined as
/// `G_d ◁ (G_wg ⟵ G_loop)`, split into the pieces the master equation uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedSystem {
    /// `S_w⟵l = A11 + A12 (1 - A22)^{-1} A21`.
    pub s_wl: Mat3,
    /// `A_s = A22 (1 - A22)^{-1}`.
    pub a_s: Mat3,
    pub l_loop: [CMat; 3],
    /// `L_w⟵l = A12 (1 - A22)^{-1} L_loop`.
    pub l_wl: [CMat; 3],
    /// Frequency-shift Hamiltonian `-(i/2)(L_loop† A_s L_loop - h.c.)`.
    pub h_s: CMat,
    /// Drive Hamiltonian `-(i/2)(L_wl† S_wl L_d - h.c.)`.
    pub h_d: CMat,
    /// Output fields `L_wl + S_wl L_d`.
    pub l_tot: [CMat; 3],
    pub h_tot_rot: CMat,
    pub alpha: [C64; 3],
}

impl ComposedSystem {
    pub fn dim(&self) -> usize {
        self.h_tot_rot.nrows()
    }

    /// `S_wl α`, the input fields seen by the loop.
    pub fn drive_fields(&self) -> [C64; 3] {
        let v = self.s_wl * nalgebra::Vector3::from(self.alpha);
        [v[0], v[1], v[2]]
    }
}

/// Assembles the composed system directly from the closed-form reduction.
/// `omega_d_ghz` only labels the error if `1 - A22` is singular.
pub fn compose_circulator(
    a: &WaveguideScattering,
    l_loop: &[CMat; 3],
    h_loop_rot: &CMat,
    alpha: [C64; 3],
    omega_d_ghz: f64,
) -> Result<ComposedSystem> {
    let a11 = a.a11();
    let a12 = a.a12();
    let a21 = a.a21();
    let a22 = a.a22();
    let (x, cond) = inverse3(&(Mat3::identity() - a22)).ok_or(Error::FeedbackSingular {
        omega_d_ghz,
        condition: f64::INFINITY,
    })?;
    if cond > 1e12 {
        return Err(Error::FeedbackSingular {
            omega_d_ghz,
            condition: cond,
        });
    }
    let m = a12 * x;
    let s_wl = a11 + m * a21;
    let a_s = a22 * x;
    let l_wl = mix_ports(&m, l_loop);
    let h_s = minus_half_i_antihermitian(&port_quadratic(l_loop, &a_s, l_loop));

    let d = h_loop_rot.nrows();
    let beta = s_wl * nalgebra::Vector3::from(alpha);
    let mut drive = CMat::zeros(d, d);
    for i in 0..3 {
        if beta[i] != ZERO {
            drive += l_wl[i].adjoint() * beta[i];
        }
    }
    let h_d = minus_half_i_antihermitian(&drive);
    let l_tot = core::array::from_fn(|i| &l_wl[i] + CMat::identity(d, d) * beta[i]);
    let h_tot_rot = h_loop_rot + &h_s + &h_d;
    Ok(ComposedSystem {
        s_wl,
        a_s,
        l_loop: l_loop.clone(),
        l_wl,
        h_s,
        h_d,
        l_tot,
        h_tot_rot,
        alpha,
    })
}

/// `Σ_{k≥1} (ω_k - ω_d)|k⟩⟨k|` in GHz.
pub fn rotating_loop_hamiltonian(omega: &[f64], omega_d_ghz: f64) -> CMat {
    let d = omega.len();
    CMat::from_fn(d, d, |r, col| {
        if r == col && r > 0 {
            c(omega[r] - omega_d_ghz, 0.0)
        } else {
            ZERO
        }
    })
}

/// Waveguide block as an SLH triple on `dim`-dimensional loop space.
pub fn waveguide_triple(a: &WaveguideScattering, dim: usize) -> SlhTriple {
    let s = CMat::from_fn(6, 6, |r, col| a.a[(r, col)]);
    SlhTriple::passive(s, dim)
}

/// `(1, L_loop, H_loop)`.
pub fn loop_triple(l_loop: &[CMat; 3], h_loop: &CMat) -> SlhTriple {
    SlhTriple {
        s: CMat::identity(3, 3),
        l: l_loop.to_vec(),
        h: h_loop.clone(),
    }
}

