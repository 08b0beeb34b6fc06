mod common;

use circsim_core::device::{coupling_operators, solve_loop, BiasPoint, DeviceParams, QuasiparticleSector};
use circsim_core::linalg::{c, hermiticity_error, unitarity_error, CMat, Mat3, C64, ZERO};
use circsim_core::network::{coupling_z, waveguide_smatrix_limit, WaveguideScattering};
use circsim_core::slh::*;
use common::*;
use rand::rngs::SmallRng;

fn random_triple(r: &mut SmallRng, ports: usize, dim: usize) -> SlhTriple {
    SlhTriple::new(
        unitary(r, ports),
        (0..ports).map(|_| cmat(r, dim, dim)).collect(),
        hermitian(r, dim),
    )
    .unwrap()
}

fn triple_diff(a: &SlhTriple, b: &SlhTriple) -> f64 {
    let mut d = max_diff(&a.s, &b.s).max(max_diff(&a.h, &b.h));
    for (x, y) in a.l.iter().zip(&b.l) {
        d = d.max(max_diff(x, y));
    }
    d
}

fn random_loop(r: &mut SmallRng, dim: usize) -> ([CMat; 3], CMat) {
    let l = core::array::from_fn(|_| {
        let m = cmat(r, dim, dim) * c(0.4, 0.0);
        CMat::from_fn(dim, dim, |i, j| if j > i { m[(i, j)] } else { ZERO })
    });
    let omega: Vec<f64> = (0..dim).map(|k| k as f64 * 0.7 - 0.3).collect();
    (l, rotating_loop_hamiltonian(&omega, 0.0))
}

fn to_ws(a: &CMat) -> WaveguideScattering {
    let mut w = waveguide_smatrix_limit(0.0).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            w.a[(i, j)] = a[(i, j)];
        }
    }
    w
}

#[test]
fn identity_is_neutral_in_series() {
    let mut r = rng(1);
    let g = random_triple(&mut r, 3, 4);
    let id = SlhTriple::identity(3, 4);
    assert!(triple_diff(&series(&id, &g).unwrap(), &g) < 1e-15);
    assert!(triple_diff(&series(&g, &id).unwrap(), &g) < 1e-15);
}

#[test]
fn drive_through_trivial_loop_gives_alpha_identity() {
    let alpha = [c(0.1, 0.0), c(0.0, -0.2), c(0.3, 0.3)];
    let g = series(&SlhTriple::identity(3, 3), &SlhTriple::drive(&alpha, 3)).unwrap();
    for (l, a) in g.l.iter().zip(alpha) {
        assert!(max_diff(l, &(CMat::identity(3, 3) * a)) < 1e-15);
    }
}

#[test]
fn series_is_associative() {
    let mut r = rng(2);
    for _ in 0..10 {
        let (g1, g2, g3) = (random_triple(&mut r, 2, 3), random_triple(&mut r, 2, 3), random_triple(&mut r, 2, 3));
        let left = series(&g3, &series(&g2, &g1).unwrap()).unwrap();
        let right = series(&series(&g3, &g2).unwrap(), &g1).unwrap();
        assert!(triple_diff(&left, &right) < 1e-10);
    }
}

#[test]
fn series_rejects_port_mismatch() {
    let mut r = rng(3);
    assert!(series(&random_triple(&mut r, 2, 3), &random_triple(&mut r, 3, 3)).is_err());
}

#[test]
fn concat_stacks_blocks() {
    let six = concat(&SlhTriple::identity(3, 4), &SlhTriple::identity(3, 4)).unwrap();
    assert!(triple_diff(&six, &SlhTriple::identity(6, 4)) < 1e-15);

    let mut r = rng(4);
    let (l, h) = random_loop(&mut r, 4);
    let g = concat(&SlhTriple::identity(3, 4), &loop_triple(&l, &h)).unwrap();
    assert_eq!(g.n_ports(), 6);
    for k in 0..3 {
        assert_eq!(g.l[k], CMat::zeros(4, 4));
        assert_eq!(g.l[k + 3], l[k]);
    }
    assert_eq!(g.h, h);
}

#[test]
fn feedback_through_decoupled_port_returns_original() {
    let mut r = rng(5);
    let g = random_triple(&mut r, 3, 3);
    let internal = SlhTriple::passive(CMat::zeros(1, 1), 3);
    let reduced = feedback_reduce(&concat(&g, &internal).unwrap(), 1).unwrap();
    assert!(triple_diff(&reduced, &g) < 1e-15);
}

#[test]
fn feedback_without_shunt_is_transparent() {
    let mut r = rng(6);
    let (l, h) = random_loop(&mut r, 5);
    let cs = compose_circulator(&waveguide_smatrix_limit(0.0).unwrap(), &l, &h, [ZERO; 3], 7.0).unwrap();
    assert!((cs.s_wl - Mat3::identity()).norm() < 1e-15);
    assert_eq!(cs.h_s, CMat::zeros(5, 5));
    for k in 0..3 {
        assert!(max_diff(&cs.l_wl[k], &l[k]) < 1e-15);
    }
    assert!(max_diff(&cs.h_tot_rot, &h) < 1e-15);
}

#[test]
fn feedback_without_coupling_leaves_loop_alone() {
    let z = coupling_z(7.25, 50.0, 75.0);
    let a = waveguide_smatrix_limit(z).unwrap();
    let zero = core::array::from_fn(|_| CMat::zeros(4, 4));
    let h = rotating_loop_hamiltonian(&[0.0, 0.1, 0.5, 1.0], 0.2);
    let cs = compose_circulator(&a, &zero, &h, [c(0.1, 0.0); 3], 7.25).unwrap();
    for k in 0..3 {
        assert_eq!(cs.l_wl[k], CMat::zeros(4, 4));
    }
    assert!(max_diff(&cs.h_tot_rot, &h) < 1e-15);
}

#[test]
fn lossless_network_closes_to_unitary() {
    let mut r = rng(7);
    for _ in 0..20 {
        let a = to_ws(&unitary(&mut r, 6));
        let (l, h) = random_loop(&mut r, 3);
        let cs = compose_circulator(&a, &l, &h, [ZERO; 3], 7.0).unwrap();
        assert!(unitarity_error(&cs.s_wl) < 1e-10);
    }
    let a = waveguide_smatrix_limit(0.171).unwrap();
    let (l, h) = random_loop(&mut r, 3);
    let cs = compose_circulator(&a, &l, &h, [ZERO; 3], 7.0).unwrap();
    assert!(unitarity_error(&cs.s_wl) < 1e-12);
}

#[test]
fn composed_operators_are_hermitian() {
    let mut r = rng(8);
    for _ in 0..20 {
        let a = to_ws(&unitary(&mut r, 6));
        let (l, h) = random_loop(&mut r, 5);
        let alpha = [cnum(&mut r), cnum(&mut r), cnum(&mut r)];
        let cs = compose_circulator(&a, &l, &h, alpha, 7.0).unwrap();
        assert!(hermiticity_error(&cs.h_s) < 1e-12);
        assert!(hermiticity_error(&cs.h_d) < 1e-12);
        assert!(hermiticity_error(&cs.h_tot_rot) < 1e-12);
    }
}

#[test]
fn zero_drive_and_linearity() {
    let mut r = rng(9);
    let a = waveguide_smatrix_limit(0.2).unwrap();
    let (l, h) = random_loop(&mut r, 4);
    let off = compose_circulator(&a, &l, &h, [ZERO; 3], 7.0).unwrap();
    assert_eq!(off.h_d, CMat::zeros(4, 4));
    for k in 0..3 {
        assert_eq!(off.l_tot[k], off.l_wl[k]);
    }
    let alpha = [c(0.01, 0.02), c(-0.03, 0.0), c(0.0, 0.005)];
    let once = compose_circulator(&a, &l, &h, alpha, 7.0).unwrap();
    let twice = compose_circulator(&a, &l, &h, alpha.map(|x| x * 2.0), 7.0).unwrap();
    for k in 0..3 {
        let d1 = &once.l_tot[k] - &once.l_wl[k];
        let d2 = &twice.l_tot[k] - &twice.l_wl[k];
        assert!(max_diff(&(d1 * c(2.0, 0.0)), &d2) < 1e-15);
    }
    assert!(max_diff(&(&once.h_d * c(2.0, 0.0)), &twice.h_d) < 1e-15);
}

/// The closed-form composition against the triple algebra: the drive feeds
/// the waveguide-loop network, whose interior ports close on the loop.
#[test]
fn closed_form_matches_triple_pipeline() {
    let p = DeviceParams::fitted();
    let es = solve_loop(&p, &BiasPoint::new(2.765, [0.0, 0.4186, 0.0]), QuasiparticleSector::ALL[0]).unwrap();
    let l_loop = coupling_operators(&es, p.gamma);
    let omega_d = 7.3;
    let h = rotating_loop_hamiltonian(&es.omega, omega_d);
    let a = waveguide_smatrix_limit(coupling_z(omega_d, p.z_wg, p.c_x)).unwrap();
    let alpha: [C64; 3] = [c(0.01, 0.0), c(0.0, 0.02), c(-0.005, 0.001)];
    let cs = compose_circulator(&a, &l_loop, &h, alpha, omega_d).unwrap();

    let d = es.n_levels();
    let inner = concat(&SlhTriple::identity(3, d), &loop_triple(&l_loop, &h)).unwrap();
    let closed = feedback_reduce(&series(&inner, &waveguide_triple(&a, d)).unwrap(), 3).unwrap();
    let total = series(&closed, &SlhTriple::drive(&alpha, d)).unwrap();

    let s_wl = CMat::from_fn(3, 3, |i, j| cs.s_wl[(i, j)]);
    assert!(max_diff(&total.s, &s_wl) < 1e-10);
    for k in 0..3 {
        assert!(max_diff(&total.l[k], &cs.l_tot[k]) < 1e-10);
        assert!(max_diff(&closed.l[k], &cs.l_wl[k]) < 1e-10);
    }
    assert!(max_diff(&total.h, &cs.h_tot_rot) < 1e-10);
    assert!(max_diff(&(&closed.h - &h), &cs.h_s) < 1e-10);
}
