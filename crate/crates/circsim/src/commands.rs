//! One function per subcommand. Each returns its table and summary; writing
//! happens afterwards in one place.

use circsim_core::analysis::fidelity::point_metrics;
use circsim_core::analysis::saturation::{power_point, summarize};
use circsim_core::analysis::{
    circulation_fidelities, frequency_grid, performance_db, spread_params, BiasOptimizer, Direction,
    FidelityReport, OptimizationResult, OptimizerConfig, PerformanceReport,
};
use circsim_core::device::{spectrum_row, BiasPoint, DeviceParams, QuasiparticleSector, TRUNCATION_WARN_WEIGHT};
use circsim_core::dynamics::{LoopModel, ScatteringMatrix};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, RunOutput, Table};
use crate::selftest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Smatrix,
    Fidelity,
    Optimize,
    SpreadSweep,
    PowerSweep,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Spectrum,
        Command::Smatrix,
        Command::Fidelity,
        Command::Optimize,
        Command::SpreadSweep,
        Command::PowerSweep,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Smatrix => "smatrix",
            Command::Fidelity => "fidelity",
            Command::Optimize => "optimize",
            Command::SpreadSweep => "spread-sweep",
            Command::PowerSweep => "power-sweep",
            Command::Selftest => "selftest",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<RunOutput, CliError> {
    match command {
        Command::Spectrum => spectrum(cfg),
        Command::Smatrix => smatrix(cfg),
        Command::Fidelity => fidelity(cfg),
        Command::Optimize => optimize(cfg),
        Command::SpreadSweep => spread_sweep(cfg),
        Command::PowerSweep => power_sweep(cfg),
        Command::Selftest => selftest::run(cfg),
    }
}

/// The optimiser with screening and starts spread over the thread pool.
/// Every evaluation is pure and the pieces are reassembled in index order,
/// so the result equals [`BiasOptimizer::run`].
pub fn optimize_parallel(
    params: &DeviceParams,
    sector: QuasiparticleSector,
    direction: Direction,
    config: &OptimizerConfig,
) -> Result<OptimizationResult, CliError> {
    let opt = BiasOptimizer::new(params, sector, direction, config.clone())?;
    let candidates = opt.screening_candidates();
    let screened: Vec<_> = candidates.par_iter().map(|x| opt.screen(x)).collect();
    let starts = opt.select_starts(&screened);
    let outcomes = starts
        .par_iter()
        .enumerate()
        .map(|(i, x)| opt.run_start(i, *x))
        .collect();
    Ok(opt.finish(outcomes)?)
}

/// Bias and drive frequency for commands that act at one operating point.
struct OperatingPoint {
    bias: BiasPoint,
    omega_d_ghz: Option<f64>,
    optimization: Option<OptimizationResult>,
}

fn operating_point(cfg: &RunConfig) -> Result<OperatingPoint, CliError> {
    if let Some(bias) = cfg.bias() {
        return Ok(OperatingPoint {
            bias,
            omega_d_ghz: cfg.f_drive_ghz,
            optimization: None,
        });
    }
    let r = optimize_parallel(&cfg.device(), cfg.sector(), cfg.direction(), &cfg.optimizer())?;
    Ok(OperatingPoint {
        bias: r.bias,
        omega_d_ghz: Some(cfg.f_drive_ghz.unwrap_or(r.omega_d_ghz)),
        optimization: Some(r),
    })
}

fn bias_json(b: &BiasPoint) -> Value {
    json!({ "phi_x": b.phi_x, "n_g": b.n_g })
}

fn optimization_json(r: &OptimizationResult) -> Value {
    json!({
        "direction": r.direction.as_str(),
        "bias": bias_json(&r.bias),
        "omega_d_ghz": r.omega_d_ghz,
        "fidelity_adiabatic": r.fidelity,
        "fidelity_full": r.full_report.map(|f| r.direction.fidelity(&f)),
        "fidelity_reverse_full": r.full_report.map(|f| r.direction.reversed().fidelity(&f)),
        "best_start": r.best_start,
        "evaluations": r.evaluations(),
        "converged": r.converged,
    })
}

fn operating_json(op: &OperatingPoint) -> Value {
    json!({
        "bias": bias_json(&op.bias),
        "omega_d_ghz": op.omega_d_ghz,
        "optimization": op.optimization.as_ref().map(optimization_json),
    })
}

/// The report seen from the configured direction: `f_cw` holds the forward
/// fidelity, so the clockwise dB metrics apply unchanged.
fn oriented(r: FidelityReport, dir: Direction) -> FidelityReport {
    match dir {
        Direction::Cw => r,
        Direction::Ccw => FidelityReport {
            f_cw: r.f_ccw,
            f_ccw: r.f_cw,
            cw_terms: r.ccw_terms,
            ccw_terms: r.cw_terms,
            ..r
        },
    }
}

fn performance_json(p: &PerformanceReport) -> Value {
    json!({
        "il_db": p.il_db,
        "is_db": p.is_db,
        "r_db": p.r_db,
        "bandwidth_il_1db_mhz": p.bandwidth_il_1db_mhz,
        "bandwidth_is_14db_mhz": p.bandwidth_is_14db_mhz,
    })
}

fn spectrum(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let params = cfg.device();
    let sectors: Vec<QuasiparticleSector> = cfg
        .spectrum_sectors
        .iter()
        .map(|&s| QuasiparticleSector::ALL[s as usize])
        .collect();
    let flux = cfg.flux_grid();
    let rows: Vec<_> = flux
        .par_iter()
        .map(|&phi| {
            sectors
                .iter()
                .map(|&s| spectrum_row(&params, cfg.n_g, phi, s))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let levels = params.n_levels - 1;
    let mut table = Table::new(
        ["phi_x".to_string(), "sector".to_string()]
            .into_iter()
            .chain((1..=levels).map(|k| format!("omega_{k}"))),
    );
    let mut flagged = 0;
    for row in rows.iter().flatten() {
        if row.boundary_weight > TRUNCATION_WARN_WEIGHT {
            flagged += 1;
        }
        let mut r = vec![num(row.phi_x), row.sector.id().to_string()];
        r.extend(row.omega.iter().map(|&w| num(w)));
        table.push(r);
    }
    let mut warnings = Vec::new();
    if flagged > 0 {
        warnings.push(format!(
            "{flagged} spectrum rows have ground-state weight above {TRUNCATION_WARN_WEIGHT:e} on the charge boundary; raise n_cut"
        ));
    }
    Ok(RunOutput {
        command: "spectrum",
        table,
        summary: json!({ "flux_points": flux.len(), "sectors": cfg.spectrum_sectors, "n_g": cfg.n_g }),
        warnings,
    })
}

fn sweep(cfg: &RunConfig, model: &LoopModel) -> Result<(Vec<f64>, Vec<ScatteringMatrix>), CliError> {
    let freqs = frequency_grid(cfg.f_min_ghz, cfg.f_max_ghz, cfg.f_step_mhz)?;
    let method = cfg.method();
    let s = freqs
        .par_iter()
        .map(|&f| circsim_core::analysis::sweep::scattering_at(model, f, method))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((freqs, s))
}

fn weak_drive_warnings(s: &[ScatteringMatrix]) -> Vec<String> {
    let n = s.iter().filter(|m| m.weak_drive_warning()).count();
    if n == 0 {
        Vec::new()
    } else {
        vec![format!("{n} frequency points left the weak-drive regime (ground population below 0.99)")]
    }
}

fn smatrix(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let op = operating_point(cfg)?;
    let model = LoopModel::new(&cfg.device(), op.bias, cfg.sector())?;
    let (freqs, s) = sweep(cfg, &model)?;
    let pairs: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
    let mut table = Table::new(
        std::iter::once("f_ghz".to_string())
            .chain(pairs.iter().map(|(i, j)| format!("abs_S{}{}", i + 1, j + 1)))
            .chain(pairs.iter().map(|(i, j)| format!("arg_S{}{}", i + 1, j + 1))),
    );
    for (f, m) in freqs.iter().zip(&s) {
        let mut r = vec![num(*f)];
        r.extend(pairs.iter().map(|&(i, j)| num(m.s[(i, j)].norm())));
        r.extend(pairs.iter().map(|&(i, j)| num(m.s[(i, j)].arg())));
        table.push(r);
    }
    Ok(RunOutput {
        command: "smatrix",
        table,
        summary: json!({ "method": cfg.method().as_str(), "operating_point": operating_json(&op) }),
        warnings: weak_drive_warnings(&s),
    })
}

fn fidelity(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let dir = cfg.direction();
    let op = operating_point(cfg)?;
    let model = LoopModel::new(&cfg.device(), op.bias, cfg.sector())?;
    let (freqs, s) = sweep(cfg, &model)?;
    let reports: Vec<(f64, FidelityReport)> = freqs
        .iter()
        .zip(&s)
        .map(|(&f, m)| (f, oriented(circulation_fidelities(&m.s), dir)))
        .collect();
    let mut table = Table::new(["f_ghz", "F_cw", "F_ccw", "R_avg", "IL_db", "IS_db", "R_db"]);
    for ((f, r), m) in reports.iter().zip(&s) {
        let raw = circulation_fidelities(&m.s);
        let (il, is, rdb) = point_metrics(r);
        table.push(vec![num(*f), num(raw.f_cw), num(raw.f_ccw), num(raw.r_avg), num(il), num(is), num(rdb)]);
    }
    // on resonance: the operating drive frequency, else the best grid point
    let centre = match op.omega_d_ghz {
        Some(f) => {
            let m = circsim_core::analysis::sweep::scattering_at(&model, f, cfg.method())?;
            (f, oriented(circulation_fidelities(&m.s), dir))
        }
        None => *reports
            .iter()
            .fold(None::<&(f64, FidelityReport)>, |acc, x| match acc {
                Some(a) if a.1.f_cw >= x.1.f_cw => Some(a),
                _ => Some(x),
            })
            .ok_or_else(|| CliError::Config("empty frequency grid".into()))?,
    };
    let perf = performance_db(&centre.1, &reports);
    Ok(RunOutput {
        command: "fidelity",
        table,
        summary: json!({
            "direction": dir.as_str(),
            "method": cfg.method().as_str(),
            "operating_point": operating_json(&op),
            "centre_ghz": centre.0,
            "fidelity_forward": centre.1.f_cw,
            "fidelity_reverse": centre.1.f_ccw,
            "performance": performance_json(&perf),
        }),
        warnings: weak_drive_warnings(&s),
    })
}

fn optimize(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let r = optimize_parallel(&cfg.device(), cfg.sector(), cfg.direction(), &cfg.optimizer())?;
    let mut table = Table::new([
        "start",
        "phi_x_0",
        "ng1_0",
        "ng2_0",
        "detune_0_ghz",
        "F_initial",
        "phi_x",
        "ng1",
        "ng2",
        "f_ghz",
        "F",
        "evaluations",
        "converged",
    ]);
    for s in &r.starts {
        table.push(vec![
            s.index.to_string(),
            num(s.x0[0]),
            num(s.x0[1]),
            num(s.x0[2]),
            num(s.x0[3]),
            num(s.initial_fidelity),
            num(s.best.x[0]),
            num(s.best.x[1]),
            num(s.best.x[2]),
            num(s.best.omega_d_ghz),
            num(s.best.fidelity),
            s.trace.len().to_string(),
            s.converged.to_string(),
        ]);
    }
    let mut warnings = Vec::new();
    if !r.converged {
        warnings.push("no start improved on its initial point".to_string());
    }
    Ok(RunOutput {
        command: "optimize",
        table,
        summary: json!({ "optimum": optimization_json(&r), "n_g3": cfg.optimizer().n_g3 }),
        warnings,
    })
}

fn spread_sweep(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let base = cfg.device();
    let pairs: Vec<(f64, f64)> = cfg
        .delta_grid
        .iter()
        .flat_map(|&d| cfg.c_x_list.iter().map(move |&c| (d, c)))
        .collect();
    let opt = cfg.optimizer();
    let results = pairs
        .par_iter()
        .map(|&(d, c)| {
            let p = spread_params(&base, d, c)?;
            optimize_parallel(&p, cfg.sector(), Direction::Cw, &opt)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(["delta", "c_x_ff", "F_opt", "phi_x_opt", "ng1_opt", "ng2_opt", "f_opt_ghz"]);
    let mut f_opt = Vec::with_capacity(results.len());
    for (&(d, c), r) in pairs.iter().zip(&results) {
        let f = r.full_report.map_or(r.fidelity, |f| f.f_cw);
        f_opt.push(f);
        table.push(vec![num(d), num(c), num(f), num(r.bias.phi_x), num(r.bias.n_g[0]), num(r.bias.n_g[1]), num(r.omega_d_ghz)]);
    }
    // F against C_X at each spread, in the order given
    let n_c = cfg.c_x_list.len();
    let monotone: Vec<Value> = cfg
        .delta_grid
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let row = &f_opt[k * n_c..(k + 1) * n_c];
            json!({ "delta": d, "nondecreasing_in_c_x": row.windows(2).all(|w| w[1] >= w[0]) })
        })
        .collect();
    Ok(RunOutput {
        command: "spread-sweep",
        table,
        summary: json!({ "fidelity_column": if opt.verify_full { "full" } else { "adiabatic" }, "ordering": monotone }),
        warnings: Vec::new(),
    })
}

fn power_sweep(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let op = operating_point(cfg)?;
    let omega_d = op
        .omega_d_ghz
        .ok_or_else(|| CliError::Config("power-sweep with a fixed phi_x needs f_drive_ghz".into()))?;
    let model = LoopModel::new(&cfg.device(), op.bias, cfg.sector())?;
    let metric = cfg.power_metric();
    let points = cfg
        .power_dbm
        .par_iter()
        .map(|&p| power_point(&model, omega_d, p, metric))
        .collect::<Result<Vec<_>, _>>()?;
    let rep = summarize(&model, omega_d, points, metric)?;
    let mut table = Table::new(["p_dbm", "F", "F_db_drop"]);
    for p in &rep.points {
        table.push(vec![num(p.p_dbm), num(p.fidelity), num(p.drop_db)]);
    }
    let mut warnings = Vec::new();
    if !rep.plateau_reached {
        warnings.push(format!(
            "lowest power {} dBm is not on the linear plateau (F = {}, weak-drive F = {}); extend power_dbm downwards",
            rep.points[0].p_dbm, rep.points[0].fidelity, rep.f_linear
        ));
    }
    if rep.p_3db_dbm.is_none() {
        warnings.push("power grid does not bracket the 3 dB compression point".into());
    }
    Ok(RunOutput {
        command: "power-sweep",
        table,
        summary: json!({
            "metric": metric.as_str(),
            "omega_d_ghz": omega_d,
            "operating_point": operating_json(&op),
            "p_3db_dbm": rep.p_3db_dbm,
            "p_sat_estimate_dbm": rep.p_sat_dbm,
            "f_linear": rep.f_linear,
            "plateau_reached": rep.plateau_reached,
        }),
        warnings,
    })
}
