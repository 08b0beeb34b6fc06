//! Dense complex linear-algebra helpers shared by the physics modules.

use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};

use crate::{Error, Result};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
/// Dynamically sized complex matrix (loop operators, superoperators).
pub type CMat = DMatrix<C64>;
/// 3×3 complex matrix (port-space scattering blocks).
pub type Mat3 = Matrix3<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest elementwise modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs3(m: &Mat3) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |M - M†|`.
pub fn hermiticity_error(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `max |U†U - 1|`.
pub fn unitarity_error<R, C, S>(u: &nalgebra::Matrix<C64, R, C, S>) -> f64
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::RawStorage<C64, R, C>,
{
    let n = u.ncols();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..u.nrows() {
                acc += u[(k, i)].conj() * u[(k, j)];
            }
            if i == j {
                acc -= ONE;
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |r, col| {
        a[(r / br, col / bc)] * b[(r % br, col % bc)]
    })
}

/// Infinity norm (maximum absolute row sum).
pub fn norm_inf(m: &CMat) -> f64 {
    (0..m.nrows())
        .map(|r| m.row(r).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn norm_inf3(m: &Mat3) -> f64 {
    (0..3)
        .map(|r| m.row(r).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a 3×3 block together with its infinity-norm condition number.
pub fn inverse3(m: &Mat3) -> Option<(Mat3, f64)> {
    let inv = m.try_inverse()?;
    let cond = norm_inf3(m) * norm_inf3(&inv);
    cond.is_finite().then_some((inv, cond))
}

/// Inverse of a square matrix with its infinity-norm condition number.
pub fn inverse(m: &CMat, context: &'static str) -> Result<(CMat, f64)> {
    let inv = m.clone().try_inverse().ok_or(Error::Singular {
        context,
        condition: f64::INFINITY,
    })?;
    let cond = norm_inf(m) * norm_inf(&inv);
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::Singular {
            context,
            condition: cond,
        });
    }
    Ok((inv, cond))
}

/// Eigenpairs of a Hermitian matrix, sorted by ascending eigenvalue and
/// truncated to the lowest `keep`. Eigenvectors are the columns of the
/// returned matrix.
pub fn hermitian_eigen(h: &CMat, keep: usize) -> Result<(Vec<f64>, CMat)> {
    let n = h.nrows();
    let keep = keep.min(n);
    let eig = SymmetricEigen::try_new(h.clone(), 1e-14, 0).ok_or_else(|| {
        Error::NonConvergence {
            context: "Hermitian eigensolver",
            residual: f64::NAN,
        }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order[..keep].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, keep, |r, col| eig.eigenvectors[(r, order[col])]);

    let residual = (0..keep)
        .map(|k| {
            let v = vectors.column(k);
            (h * v - v * c(values[k], 0.0)).norm()
        })
        .fold(0.0, f64::max);
    let scale = 1.0 + norm_inf(h);
    if !(residual <= 1e-9 * scale) {
        return Err(Error::NonConvergence {
            context: "Hermitian eigensolver",
            residual,
        });
    }
    Ok((values, vectors))
}

/// Lowest `keep` eigenpairs of a sparse banded Hermitian matrix, by block
/// Davidson iteration whose corrections come from a banded factorisation of
/// `H - θ`. Falls back to the dense solver for small matrices or when the
/// iteration stalls.
pub fn hermitian_lowest(h: &CMat, keep: usize) -> Result<(Vec<f64>, CMat)> {
    let n = h.nrows();
    if n <= 64 || keep + 3 > n / 4 {
        return hermitian_eigen(h, keep);
    }
    match davidson(h, keep) {
        Some(found) => Ok(found),
        None => hermitian_eigen(h, keep),
    }
}

type CVec = nalgebra::DVector<C64>;

fn davidson(h: &CMat, keep: usize) -> Option<(Vec<f64>, CMat)> {
    let n = h.nrows();
    let block = keep + 3;
    let max_basis = (4 * block).min(n);
    let scale = 1.0 + norm_inf(h);
    let tol = 1e-12 * scale;
    let diag: Vec<f64> = (0..n).map(|i| h[(i, i)].re).collect();
    // the loop Hamiltonian has five entries per row
    let rows: Vec<Vec<(usize, C64)>> = (0..n)
        .map(|r| (0..n).filter(|&col| h[(r, col)] != ZERO).map(|col| (col, h[(r, col)])).collect())
        .collect();
    let apply = |x: &CVec| CVec::from_fn(n, |r, _| rows[r].iter().map(|&(col, z)| z * x[col]).sum());

    let bw = BandLdl::bandwidth(h);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let mut v: Vec<CVec> = Vec::with_capacity(max_basis);
    for (j, &i) in order[..block].iter().enumerate() {
        // fixed, irregular perturbation so no symmetry sector is missed
        let mut x = CVec::from_fn(n, |r, _| {
            c(1e-2 * libm::sin((r * 7 + j * 13 + 1) as f64 * 0.618_033_988_75), 0.0)
        });
        x[i] += ONE;
        let x = orthonormalize_against(&v, x)?;
        v.push(x);
    }
    let mut w: Vec<CVec> = v.iter().map(&apply).collect();
    let mut g = CMat::zeros(0, 0);

    for _ in 0..200 {
        let m = v.len();
        let old = g.nrows();
        let mut grown = CMat::zeros(m, m);
        grown.view_mut((0, 0), (old, old)).copy_from(&g);
        for a in 0..m {
            for b in old.max(a)..m {
                let z = v[a].dotc(&w[b]);
                grown[(a, b)] = z;
                grown[(b, a)] = z.conj();
            }
        }
        for a in old..m {
            grown[(a, a)] = c(grown[(a, a)].re, 0.0);
        }
        g = grown;

        let eig = SymmetricEigen::try_new(g.clone(), 1e-15, 0)?;
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let nb = block.min(m);
        let theta: Vec<f64> = idx[..nb].iter().map(|&k| eig.eigenvalues[k]).collect();
        let combine = |basis: &[CVec], k: usize| {
            let mut out = CVec::zeros(n);
            for (a, col) in basis.iter().enumerate() {
                out.axpy(eig.eigenvectors[(a, idx[k])], col, ONE);
            }
            out
        };
        let x: Vec<CVec> = (0..nb).map(|k| combine(&v, k)).collect();
        let hx: Vec<CVec> = (0..nb).map(|k| combine(&w, k)).collect();

        let residuals: Vec<CVec> = (0..nb).map(|k| &hx[k] - &x[k] * c(theta[k], 0.0)).collect();
        let worst = residuals[..keep.min(nb)].iter().map(|r| r.norm()).fold(0.0, f64::max);
        if worst <= tol && nb >= keep {
            let mut vectors = CMat::zeros(n, keep);
            for k in 0..keep {
                vectors.column_mut(k).copy_from(&x[k]);
            }
            return Some((theta[..keep].to_vec(), vectors));
        }

        if m + block > max_basis {
            v = x.clone();
            w = hx;
            g = CMat::from_diagonal(&nalgebra::DVector::from_fn(nb, |k, _| c(theta[k], 0.0)));
        }
        let before = v.len();
        for (k, r) in residuals.iter().enumerate() {
            if r.norm() <= tol {
                continue;
            }
            // Olsen correction with the exactly shifted operator, which makes
            // each step a Rayleigh-quotient iteration
            let prec = BandLdl::new(h, bw, theta[k]);
            let mr = prec.solve(r);
            let mx = prec.solve(&x[k]);
            let eps = x[k].dotc(&mr) / x[k].dotc(&mx);
            let t = mr - mx * eps;
            if let Some(t) = orthonormalize_against(&v, t) {
                w.push(apply(&t));
                v.push(t);
            }
        }
        if v.len() == before {
            return None;
        }
    }
    None
}

/// `L D L†` factor of the banded Hermitian matrix `H - σ`, without pivoting.
/// Tiny pivots are nudged away from zero; the factor is only used to build
/// correction vectors, so that perturbation costs at most an iteration.
struct BandLdl {
    n: usize,
    bw: usize,
    // row i holds L[i][i-bw..i] followed by D[i]
    l: Vec<C64>,
}

impl BandLdl {
    fn bandwidth(h: &CMat) -> usize {
        let n = h.nrows();
        let mut bw = 0;
        for r in 0..n {
            for col in 0..r {
                if h[(r, col)] != ZERO {
                    bw = bw.max(r - col);
                }
            }
        }
        bw
    }

    fn new(h: &CMat, bw: usize, sigma: f64) -> Self {
        let n = h.nrows();
        let w = bw + 1;
        let mut l = alloc::vec![ZERO; n * w];
        let mut tmp = alloc::vec![ZERO; w];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                // tmp_j = L_ij D_j before division
                let mut s = h[(i, j)];
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= tmp[k - lo] * l[j * w + (k + bw - j)].conj();
                }
                tmp[j - lo] = s;
            }
            let mut d = h[(i, i)].re - sigma;
            for j in lo..i {
                let dj = l[j * w + bw].re;
                let lij = tmp[j - lo] / dj;
                d -= (lij * tmp[j - lo].conj()).re;
                l[i * w + (j + bw - i)] = lij;
            }
            if d.abs() < 1e-12 {
                d = if d < 0.0 { -1e-12 } else { 1e-12 };
            }
            l[i * w + bw] = c(d, 0.0);
        }
        Self { n, bw, l }
    }

    fn at(&self, i: usize, j: usize) -> C64 {
        self.l[i * (self.bw + 1) + (j + self.bw - i)]
    }

    fn solve(&self, b: &CVec) -> CVec {
        let (n, bw) = (self.n, self.bw);
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.at(i, k) * y[k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.at(k, i).conj() * y[k];
            }
            y[i] = s;
        }
        y
    }
}

/// Two Gram-Schmidt passes against an orthonormal set, then normalisation;
/// `None` when `x` is numerically inside the span.
fn orthonormalize_against(v: &[CVec], mut x: CVec) -> Option<CVec> {
    let start = x.norm();
    if !(start > 0.0) {
        return None;
    }
    for _ in 0..2 {
        for col in v {
            let proj = col.dotc(&x);
            x.axpy(-proj, col, ONE);
        }
    }
    let norm = x.norm();
    if !(norm > 1e-10 * start) {
        return None;
    }
    Some(x / c(norm, 0.0))
}

/// Strictly upper-triangular part of a square matrix.
pub fn strict_upper(m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |r, col| if col > r { m[(r, col)] } else { ZERO })
}

/// `Σ_j w_j · ops[j]` for three operators.
pub fn weighted_sum(weights: [C64; 3], ops: &[CMat; 3]) -> CMat {
    let mut out = CMat::zeros(ops[0].nrows(), ops[0].ncols());
    for (w, op) in weights.iter().zip(ops) {
        if *w != ZERO {
            out += op * *w;
        }
    }
    out
}

/// Row `i` of a port matrix applied to an operator vector:
/// `out_i = Σ_j M_ij · ops[j]`.
pub fn mix_ports(m: &Mat3, ops: &[CMat; 3]) -> [CMat; 3] {
    core::array::from_fn(|i| weighted_sum([m[(i, 0)], m[(i, 1)], m[(i, 2)]], ops))
}

/// `Σ_ij a_i† M_ij b_j`.
pub fn port_quadratic(a: &[CMat; 3], m: &Mat3, b: &[CMat; 3]) -> CMat {
    let mut out = CMat::zeros(a[0].nrows(), a[0].ncols());
    for i in 0..3 {
        let ad = a[i].adjoint();
        for j in 0..3 {
            let w = m[(i, j)];
            if w != ZERO {
                out += &ad * &b[j] * w;
            }
        }
    }
    out
}

/// `-(i/2)(X - X†)`, the Hermitian part generated by an SLH interference term.
pub fn minus_half_i_antihermitian(x: &CMat) -> CMat {
    (x - x.adjoint()) * c(0.0, -0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_matches_definition() {
        let a = CMat::from_fn(2, 2, |r, c_| c((r * 2 + c_) as f64, 1.0));
        let b = CMat::from_fn(3, 3, |r, c_| c(r as f64, c_ as f64));
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..3 {
                    for q in 0..3 {
                        assert_eq!(k[(i * 3 + p, j * 3 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn hermitian_eigen_sorted_and_orthonormal() {
        let h = CMat::from_fn(6, 6, |r, col| {
            let base = c((r + col) as f64 * 0.3, (r as f64 - col as f64) * 0.7);
            if r == col {
                c(r as f64 * 1.7 - 3.0, 0.0)
            } else {
                base
            }
        });
        let h = (&h + h.adjoint()) * c(0.5, 0.0);
        let (vals, vecs) = hermitian_eigen(&h, 6).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert!(unitarity_error(&vecs) < 1e-12);
    }

    #[test]
    fn banded_lowest_matches_dense() {
        use crate::device::{build_loop_hamiltonian, BiasPoint, DeviceParams, QuasiparticleSector};
        let cases = [
            (DeviceParams::fitted(), 2.765, [0.0, 0.4186, 0.0]),
            (DeviceParams::fitted(), 0.0, [0.0, 0.0, 0.0]),
            (DeviceParams::new(3.09, [15.03; 3], 0.0, 0.27), 2.4, [0.0, 0.0, 0.0]),
            (DeviceParams::new(3.09, [15.03; 3], 0.0, 0.27), 0.0, [0.0, 0.0, 0.0]),
            (DeviceParams::new(3.09, [14.58, 15.03, 15.48], 75.0, 0.27), 5.1, [0.9, 2.3, 0.4]),
        ];
        for (k, (p, phi, ng)) in cases.iter().enumerate() {
            let h = build_loop_hamiltonian(p, &BiasPoint::new(*phi, *ng), QuasiparticleSector::ALL[k % 4]).unwrap();
            let (a, va) = hermitian_lowest(&h.matrix, 5).unwrap();
            let (d, vd) = hermitian_eigen(&h.matrix, 6).unwrap();
            for i in 0..5 {
                assert!((a[i] - d[i]).abs() < 1e-9, "case {k}: {a:?} vs {d:?}");
            }
            assert!(unitarity_error(&va) < 1e-10);
            if d[5] - d[4] > 1e-3 {
                let overlap = vd.columns(0, 5).adjoint() * &va;
                assert!(unitarity_error(&overlap) < 1e-8, "case {k}");
            }
        }
    }
}
