use circsim_core::analysis::fidelity::point_metrics;
use circsim_core::analysis::*;
use circsim_core::device::{junction_spread, solve_loop, BiasPoint, DeviceParams, QuasiparticleSector};
use circsim_core::dynamics::{DriveStrength, LoopModel};
use circsim_core::linalg::{c, Mat3, ZERO};

const SECTOR: QuasiparticleSector = QuasiparticleSector::ALL[0];

fn cw_bias() -> BiasPoint {
    BiasPoint::new(2.76502, [0.0, 0.41860, 0.0])
}

fn quick_config(seed: u64) -> OptimizerConfig {
    OptimizerConfig {
        starts: 2,
        screening_per_start: 4,
        max_evals_per_start: 40,
        seed,
        verify_full: false,
        ..OptimizerConfig::default()
    }
}

#[test]
fn ideal_circulator_scores_one() {
    let mut s = Mat3::from_element(ZERO);
    s[(0, 2)] = c(1.0, 0.0);
    s[(2, 1)] = c(0.0, 1.0);
    s[(1, 0)] = c(-1.0, 0.0);
    let f = circulation_fidelities(&s);
    assert_eq!(f.f_cw, 1.0);
    assert_eq!(f.f_ccw, 0.0);
    assert_eq!(f.r_avg, 0.0);
    let f = circulation_fidelities(&s.transpose());
    assert_eq!(f.f_ccw, 1.0);
}

#[test]
fn identity_reflects_everything() {
    let f = circulation_fidelities(&Mat3::identity());
    assert_eq!((f.f_cw, f.f_ccw, f.r_avg), (0.0, 0.0, 1.0));
    let (il, is, r) = point_metrics(&f);
    assert!(il.is_infinite() && is.is_infinite());
    assert_eq!(r, 0.0);
}

#[test]
fn isolation_of_a_twelve_percent_leak() {
    assert!((loss_db(0.12) - 18.416).abs() < 1e-3);
    assert!((loss_db(0.97) - 0.2646).abs() < 1e-4);
    assert_eq!(loss_db(0.0), f64::INFINITY);
}

#[test]
fn bandwidth_of_a_synthetic_resonance() {
    // F_cw(f) = 1 - 4 (f - 7.25)^2 crosses IL = 1 dB at |f - 7.25| = sqrt(0.1087/4)
    let freqs = frequency_grid(7.0, 7.5, 2.0).unwrap();
    assert_eq!(freqs.len(), 251);
    let sweep: Vec<(f64, FidelityReport)> = freqs
        .iter()
        .map(|&f| {
            let mut s = Mat3::from_element(ZERO);
            let t = c(1.0 - 4.0 * (f - 7.25) * (f - 7.25), 0.0);
            s[(0, 2)] = t;
            s[(2, 1)] = t;
            s[(1, 0)] = t;
            (f, circulation_fidelities(&s))
        })
        .collect();
    let p = performance_db(&sweep[125].1, &sweep);
    let half = ((1.0 - 10f64.powf(-1.0 / 20.0)) / 4.0).sqrt();
    let want = 2.0 * half * 1e3;
    let got = p.bandwidth_il_1db_mhz.unwrap();
    assert!((got - want).abs() < 0.1, "{got} {want}");
    assert_eq!(p.bandwidth_is_14db_mhz, Some(500.0));
}

#[test]
fn frequency_grid_is_exact_and_validated() {
    let g = frequency_grid(7.0, 7.5, 10.0).unwrap();
    assert_eq!(g.len(), 51);
    assert_eq!(g[0], 7.0);
    assert!((g[50] - 7.5).abs() < 1e-12);
    assert!(frequency_grid(7.0, 7.5, 0.0).is_err());
    assert!(frequency_grid(7.5, 7.0, 1.0).is_err());
    assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
}

#[test]
fn mirrored_bias_reverses_circulation() {
    let p = DeviceParams::fitted();
    let f = 7.27218;
    let a = LoopModel::new(&p, cw_bias(), SECTOR).unwrap().smatrix_adiabatic(f).unwrap();
    let b = LoopModel::new(&p, cw_bias().mirrored(), SECTOR).unwrap().smatrix_adiabatic(f).unwrap();
    let fa = circulation_fidelities(&a.s);
    let fb = circulation_fidelities(&b.s);
    assert!(fa.f_cw > 0.97, "{fa:?}");
    assert!(fa.f_ccw <= 0.2, "{fa:?}");
    assert!((fa.f_cw - fb.f_ccw).abs() < 1e-8);
    assert!((fa.f_ccw - fb.f_cw).abs() < 1e-8);
}

#[test]
fn optimizer_is_deterministic() {
    let p = DeviceParams::fitted();
    let a = optimize_bias(&p, SECTOR, Direction::Cw, &quick_config(7)).unwrap();
    let b = optimize_bias(&p, SECTOR, Direction::Cw, &quick_config(7)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fidelity.to_bits(), b.fidelity.to_bits());
    let c = optimize_bias(&p, SECTOR, Direction::Cw, &quick_config(8)).unwrap();
    assert_ne!(a.starts[0].x0, c.starts[0].x0);
}

#[test]
fn reported_optimum_is_reproducible() {
    let p = DeviceParams::fitted();
    let r = optimize_bias(&p, SECTOR, Direction::Cw, &quick_config(3)).unwrap();
    assert!(r.fidelity > 0.0 && r.fidelity <= 1.0);
    assert!(r.evaluations() <= 2 * 40 + 2);
    let s = LoopModel::new(&p, r.bias, SECTOR).unwrap().smatrix_adiabatic(r.omega_d_ghz).unwrap();
    let f = circulation_fidelities(&s.s).f_cw;
    assert!((f - r.fidelity).abs() < 1e-6, "{f} {}", r.fidelity);
    let lo = SearchBounds::default().lower;
    let hi = SearchBounds::default().upper;
    let x = r.starts[r.best_start].best.x;
    assert!((0..4).all(|i| (lo[i]..=hi[i]).contains(&x[i])));
}

#[test]
fn split_optimizer_matches_run() {
    let p = DeviceParams::fitted();
    let opt = BiasOptimizer::new(&p, SECTOR, Direction::Ccw, quick_config(11)).unwrap();
    let whole = opt.run().unwrap();
    let candidates = opt.screening_candidates();
    let mut screened: Vec<_> = candidates.iter().rev().map(|x| opt.screen(x)).collect();
    screened.reverse();
    let starts = opt.select_starts(&screened);
    let mut outcomes: Vec<_> = starts.iter().enumerate().rev().map(|(i, x)| opt.run_start(i, *x)).collect();
    outcomes.reverse();
    outcomes.rotate_left(1);
    assert_eq!(opt.finish(outcomes).unwrap(), whole);
}

#[test]
fn optimizer_rejects_empty_budget() {
    let p = DeviceParams::fitted();
    let mut cfg = quick_config(0);
    cfg.starts = 0;
    assert!(optimize_bias(&p, SECTOR, Direction::Cw, &cfg).is_err());
    let mut cfg = quick_config(0);
    cfg.max_evals_per_start = 2;
    assert!(optimize_bias(&p, SECTOR, Direction::Cw, &cfg).is_err());
}

#[test]
fn spread_devices_follow_the_worst_case_assignment() {
    let base = DeviceParams::new(3.09, [15.03; 3], 75.0, 0.27);
    let p = spread_params(&base, 0.03, 150.0).unwrap();
    assert!((junction_spread(p.e_j) - 0.03).abs() < 1e-12);
    assert_eq!(p.e_j[1], 15.03);
    assert_eq!(p.c_x, 150.0);
    let err = fidelity_vs_spread_sweep(&base, &[0.06], &[75.0], SECTOR, &quick_config(0));
    assert!(err.is_err());
}

#[test]
fn saturation_estimate_on_the_fitted_device() {
    let es = solve_loop(&DeviceParams::fitted(), &cw_bias(), SECTOR).unwrap();
    let p = saturation_estimate(&es, 0.27, 7.25).unwrap();
    assert!((p + 124.0).abs() <= 2.0, "{p}");
}

#[test]
fn power_sweep_finds_the_compression_point() {
    let p = DeviceParams::fitted();
    let model = LoopModel::new(&p, cw_bias(), SECTOR).unwrap();
    let grid: Vec<f64> = (0..=12).map(|k| -150.0 + 2.5 * k as f64).collect();
    let rep = power_sweep(&model, 7.46, &grid, Direction::Ccw).unwrap();
    assert!(rep.plateau_reached, "{} {}", rep.points[0].fidelity, rep.f_linear);
    let p3 = rep.p_3db_dbm.unwrap();
    assert!((p3 + 126.0).abs() <= 5.0, "{p3}");
    assert!(rep.points.windows(2).all(|w| w[1].fidelity <= w[0].fidelity + 1e-6));
    let weak = model.smatrix_full(7.46, DriveStrength::WeakAuto).unwrap();
    assert!((circulation_fidelities(&weak.s).f_ccw - rep.f_linear).abs() < 1e-3);
}
