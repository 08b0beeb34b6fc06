#![allow(dead_code)]

use circsim_core::linalg::{c, CMat, C64};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> SmallRng {
    SmallRng::seed_from_u64(seed)
}

pub fn cnum(r: &mut SmallRng) -> C64 {
    c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

pub fn cmat(r: &mut SmallRng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cnum(r))
}

pub fn hermitian(r: &mut SmallRng, d: usize) -> CMat {
    let m = cmat(r, d, d);
    (&m + m.adjoint()) * c(0.5, 0.0)
}

/// Cayley transform of a random Hermitian matrix.
pub fn unitary(r: &mut SmallRng, n: usize) -> CMat {
    let h = hermitian(r, n) * c(2.0, 0.0);
    let id = CMat::identity(n, n);
    let plus = &id + &h * c(0.0, 1.0);
    let minus = &id - &h * c(0.0, 1.0);
    plus.try_inverse().unwrap() * minus
}

/// Random density matrix of full rank.
pub fn density(r: &mut SmallRng, d: usize) -> CMat {
    let m = cmat(r, d, d);
    let rho = &m * m.adjoint();
    let tr = rho.trace();
    rho / tr
}

pub fn max_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
}
