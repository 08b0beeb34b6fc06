//! Multi-start bounded Nelder-Mead search over flux bias, two charge biases
//! and the drive detuning from the first loop transition.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fidelity::{circulation_fidelities, Direction, FidelityReport};
use crate::device::{solve_loop, BiasPoint, DeviceParams, QuasiparticleSector};
use crate::dynamics::{DriveStrength, LoopModel};
use crate::{Error, Result};

/// Search variables `(φ_x, n_g1, n_g2, ω_d - ω_1)`.
pub type Point = [f64; 4];

/// Box constraints of the search.
///
/// The charge-bias spectrum repeats on a lattice generated by
/// `(Δn_g1, Δn_g2) = (-1, 1)` and `(1, 2)`, so one full cell needs `n_g2` to
/// range over three units when `n_g1` ranges over one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBounds {
    pub lower: Point,
    pub upper: Point,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            lower: [0.0, 0.0, 0.0, -1.0],
            upper: [2.0 * PI, 1.0, 3.0, 1.0],
        }
    }
}

impl SearchBounds {
    fn clamp(&self, x: &Point) -> Point {
        core::array::from_fn(|i| x[i].clamp(self.lower[i], self.upper[i]))
    }

    fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Number of simplex starts.
    pub starts: usize,
    /// Random candidates screened per start; the best `starts` seed simplexes.
    pub screening_per_start: usize,
    /// Detunings tried per screening candidate, evenly spanning the detuning
    /// bounds. The transition is narrow, so a random detuning rarely lands.
    pub screening_detunings: usize,
    pub max_evals_per_start: usize,
    pub seed: u64,
    /// Stop once the simplex spread in fidelity falls below this.
    pub f_tol: f64,
    /// ... and its extent below this fraction of every box width.
    pub x_tol: f64,
    pub bounds: SearchBounds,
    /// Charge bias on island 3, held fixed.
    pub n_g3: f64,
    /// Re-evaluate the optimum with the full master equation.
    pub verify_full: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            screening_per_start: 16,
            screening_detunings: 81,
            max_evals_per_start: 600,
            seed: 0,
            f_tol: 1e-10,
            x_tol: 1e-7,
            bounds: SearchBounds::default(),
            n_g3: 0.0,
            verify_full: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub start: usize,
    pub x: Point,
    pub omega_d_ghz: f64,
    /// Adiabatic fidelity in the requested direction; 0 where the solve failed.
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartOutcome {
    pub index: usize,
    pub x0: Point,
    pub initial_fidelity: f64,
    pub best: Evaluation,
    /// Tolerances met before the evaluation budget ran out.
    pub converged: bool,
    pub trace: Vec<Evaluation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub direction: Direction,
    pub bias: BiasPoint,
    pub omega_d_ghz: f64,
    /// Objective value at the optimum (adiabatic path).
    pub fidelity: f64,
    /// Full master-equation report at the optimum, if requested.
    pub full_report: Option<FidelityReport>,
    pub best_start: usize,
    /// At least one start improved on its initial point.
    pub converged: bool,
    pub starts: Vec<StartOutcome>,
}

impl OptimizationResult {
    pub fn evaluations(&self) -> usize {
        self.starts.iter().map(|s| s.trace.len()).sum()
    }
}

/// A bias search broken into independent pieces so callers may run the
/// screening evaluations and the starts concurrently. [`BiasOptimizer::run`]
/// does everything in order.
#[derive(Debug, Clone)]
pub struct BiasOptimizer {
    pub params: DeviceParams,
    pub sector: QuasiparticleSector,
    pub direction: Direction,
    pub config: OptimizerConfig,
}

impl BiasOptimizer {
    pub fn new(
        params: &DeviceParams,
        sector: QuasiparticleSector,
        direction: Direction,
        config: OptimizerConfig,
    ) -> Result<Self> {
        params.validate()?;
        if config.starts == 0 {
            return Err(Error::InvalidParameter {
                field: "opt_starts",
                value: 0.0,
                bound: ">= 1",
            });
        }
        if config.max_evals_per_start < 5 {
            return Err(Error::InvalidParameter {
                field: "opt_max_evals",
                value: config.max_evals_per_start as f64,
                bound: ">= 5",
            });
        }
        Ok(Self {
            params: params.clone(),
            sector,
            direction,
            config,
        })
    }

    pub fn bias_of(&self, x: &Point) -> BiasPoint {
        BiasPoint::new(x[0], [x[1], x[2], self.config.n_g3])
    }

    /// Loop model and drive frequency for a search point.
    pub fn model_at(&self, x: &Point) -> Result<(LoopModel, f64)> {
        let bias = self.bias_of(x);
        let es = solve_loop(&self.params, &bias, self.sector)?;
        let omega_d = es.omega[1] + x[3];
        Ok((LoopModel::from_eigensystem(&self.params, bias, self.sector, es), omega_d))
    }

    /// Adiabatic fidelity at `x`; solver failures score zero.
    pub fn evaluate(&self, start: usize, x: &Point) -> Evaluation {
        let x = self.config.bounds.clamp(x);
        let (fidelity, omega_d_ghz) = match self.model_at(&x) {
            Ok((model, omega_d)) => match model.smatrix_adiabatic(omega_d) {
                Ok(s) => {
                    let f = self.direction.fidelity(&circulation_fidelities(&s.s));
                    (if f.is_finite() { f } else { 0.0 }, omega_d)
                }
                Err(_) => (0.0, omega_d),
            },
            Err(_) => (0.0, f64::NAN),
        };
        Evaluation {
            start,
            x,
            omega_d_ghz,
            fidelity,
        }
    }

    /// Screening score of `x`: one eigensolve, then the best detuning on the
    /// screening grid replaces `x[3]`.
    pub fn screen(&self, x: &Point) -> Evaluation {
        let b = &self.config.bounds;
        let x = b.clamp(x);
        let n = self.config.screening_detunings;
        if n < 2 {
            return self.evaluate(usize::MAX, &x);
        }
        let mut best = Evaluation {
            start: usize::MAX,
            x,
            omega_d_ghz: f64::NAN,
            fidelity: 0.0,
        };
        let Ok((model, _)) = self.model_at(&x) else {
            return best;
        };
        let omega_1 = model.es.omega[1];
        for k in 0..n {
            let detune = b.lower[3] + b.width(3) * k as f64 / (n - 1) as f64;
            let Ok(s) = model.smatrix_adiabatic(omega_1 + detune) else {
                continue;
            };
            let f = self.direction.fidelity(&circulation_fidelities(&s.s));
            if f.is_finite() && f > best.fidelity {
                best.x[3] = detune;
                best.omega_d_ghz = omega_1 + detune;
                best.fidelity = f;
            }
        }
        best
    }

    /// Seeded screening candidates, uniform in the box.
    pub fn screening_candidates(&self) -> Vec<Point> {
        let b = &self.config.bounds;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let count = self.config.starts * self.config.screening_per_start.max(1);
        (0..count)
            .map(|_| core::array::from_fn(|i| b.lower[i] + b.width(i) * rng.random::<f64>()))
            .collect()
    }

    /// Best `starts` screened points; ties keep candidate order.
    pub fn select_starts(&self, screened: &[Evaluation]) -> Vec<Point> {
        let mut order: Vec<usize> = (0..screened.len()).collect();
        order.sort_by(|&a, &b| screened[b].fidelity.total_cmp(&screened[a].fidelity).then(a.cmp(&b)));
        order
            .into_iter()
            .take(self.config.starts)
            .map(|i| screened[i].x)
            .collect()
    }

    /// Bounded Nelder-Mead from `x0`, maximising the fidelity.
    pub fn run_start(&self, index: usize, x0: Point) -> StartOutcome {
        let b = self.config.bounds;
        let mut trace = Vec::new();
        let eval = |x: &Point, trace: &mut Vec<Evaluation>| {
            let e = self.evaluate(index, x);
            trace.push(e);
            e
        };

        let first = eval(&x0, &mut trace);
        let mut simplex: Vec<Evaluation> = Vec::with_capacity(5);
        simplex.push(first);
        for i in 0..4 {
            let mut x = first.x;
            let step = 0.1 * b.width(i);
            x[i] = if x[i] + step <= b.upper[i] { x[i] + step } else { x[i] - step };
            simplex.push(eval(&x, &mut trace));
        }

        let mut converged = false;
        while trace.len() < self.config.max_evals_per_start {
            // best first; ties by insertion order keep the run deterministic
            simplex.sort_by(|a, c| c.fidelity.total_cmp(&a.fidelity));
            let spread = simplex[0].fidelity - simplex[4].fidelity;
            let extent = (0..4)
                .map(|i| {
                    let (lo, hi) = simplex.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), e| {
                        (l.min(e.x[i]), h.max(e.x[i]))
                    });
                    (hi - lo) / b.width(i)
                })
                .fold(0.0, f64::max);
            if spread <= self.config.f_tol && extent <= self.config.x_tol {
                converged = true;
                break;
            }

            let centroid: Point = core::array::from_fn(|i| simplex[..4].iter().map(|e| e.x[i]).sum::<f64>() / 4.0);
            let worst = simplex[4];
            let along = |t: f64| -> Point { b.clamp(&core::array::from_fn(|i| centroid[i] + t * (worst.x[i] - centroid[i]))) };

            let reflected = eval(&along(-1.0), &mut trace);
            if reflected.fidelity > simplex[0].fidelity {
                let expanded = eval(&along(-2.0), &mut trace);
                simplex[4] = if expanded.fidelity > reflected.fidelity { expanded } else { reflected };
                continue;
            }
            if reflected.fidelity > simplex[3].fidelity {
                simplex[4] = reflected;
                continue;
            }
            let contracted = if reflected.fidelity > worst.fidelity {
                eval(&along(-0.5), &mut trace)
            } else {
                eval(&along(0.5), &mut trace)
            };
            if contracted.fidelity > worst.fidelity.max(reflected.fidelity) {
                simplex[4] = contracted;
                continue;
            }
            // shrink towards the best vertex
            let best = simplex[0].x;
            for k in 1..5 {
                let x: Point = core::array::from_fn(|i| best[i] + 0.5 * (simplex[k].x[i] - best[i]));
                simplex[k] = eval(&x, &mut trace);
            }
        }
        simplex.sort_by(|a, c| c.fidelity.total_cmp(&a.fidelity));
        let best = trace
            .iter()
            .copied()
            .fold(simplex[0], |acc, e| if e.fidelity > acc.fidelity { e } else { acc });
        StartOutcome {
            index,
            x0,
            initial_fidelity: first.fidelity,
            best,
            converged,
            trace,
        }
    }

    /// Picks the winning start (lowest index on ties) and optionally
    /// re-verifies it with the full master equation.
    pub fn finish(&self, mut outcomes: Vec<StartOutcome>) -> Result<OptimizationResult> {
        outcomes.sort_by_key(|o| o.index);
        let winner = outcomes
            .iter()
            .fold(None::<&StartOutcome>, |acc, o| match acc {
                Some(a) if a.best.fidelity >= o.best.fidelity => Some(a),
                _ => Some(o),
            })
            .ok_or(Error::InvalidParameter {
                field: "opt_starts",
                value: 0.0,
                bound: ">= 1",
            })?;
        let best = winner.best;
        let best_start = winner.index;
        let bias = self.bias_of(&best.x);
        let full_report = if self.config.verify_full {
            let (model, omega_d) = self.model_at(&best.x)?;
            let s = model.smatrix_full(omega_d, DriveStrength::WeakAuto)?;
            Some(circulation_fidelities(&s.s))
        } else {
            None
        };
        let converged = outcomes.iter().any(|o| o.best.fidelity > o.initial_fidelity);
        Ok(OptimizationResult {
            direction: self.direction,
            bias,
            omega_d_ghz: best.omega_d_ghz,
            fidelity: best.fidelity,
            full_report,
            best_start,
            converged,
            starts: outcomes,
        })
    }

    pub fn run(&self) -> Result<OptimizationResult> {
        let candidates = self.screening_candidates();
        let screened: Vec<Evaluation> = candidates.iter().map(|x| self.screen(x)).collect();
        let starts = self.select_starts(&screened);
        let outcomes = starts
            .iter()
            .enumerate()
            .map(|(i, x0)| self.run_start(i, *x0))
            .collect();
        self.finish(outcomes)
    }
}

/// Maximises the chosen circulation fidelity over bias and drive frequency.
pub fn optimize_bias(
    params: &DeviceParams,
    sector: QuasiparticleSector,
    direction: Direction,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    BiasOptimizer::new(params, sector, direction, config.clone())?.run()
}
