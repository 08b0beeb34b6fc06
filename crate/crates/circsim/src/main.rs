use std::path::PathBuf;
use std::process::ExitCode;

use circsim::config::parse_override;
use circsim::{load_config, run, write_outputs, CliError, Command};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "circsim", version, about = "Shunted three-junction circulator: spectra, scattering, optimisation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set c_x_ff=150` or
    /// `--set bias.n_g=[0,0.4,0]`. Repeatable; applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (same as `--set out_dir=...`).
    #[arg(short, long, global = true)]
    out_dir: Option<PathBuf>,

    /// Fill missing device keys with the fitted device.
    #[arg(long, global = true)]
    fitted_device: bool,

    /// Worker threads (default: one per core).
    #[arg(short = 'j', long, global = true)]
    threads: Option<usize>,

    /// Only print errors.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Transition frequencies over a flux grid, per quasiparticle sector.
    Spectrum,
    /// |S_ij| and arg S_ij over the frequency grid.
    Smatrix,
    /// Circulation fidelities and dB metrics over the frequency grid.
    Fidelity,
    /// Multi-start bias optimisation.
    Optimize,
    /// Optimised fidelity against junction spread and shunt capacitance.
    SpreadSweep,
    /// Fidelity against drive power and the 3 dB compression point.
    PowerSweep,
    /// Invariant checks on the configured device.
    Selftest,
}

impl Cmd {
    fn command(self) -> Command {
        match self {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Smatrix => Command::Smatrix,
            Cmd::Fidelity => Command::Fidelity,
            Cmd::Optimize => Command::Optimize,
            Cmd::SpreadSweep => Command::SpreadSweep,
            Cmd::PowerSweep => Command::PowerSweep,
            Cmd::Selftest => Command::Selftest,
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let mut overrides = cli
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(dir) = &cli.out_dir {
        overrides.push(("out_dir".into(), toml::Value::String(dir.display().to_string())));
    }
    let command = cli.command.command();
    let fitted = cli.fitted_device || (command == Command::Selftest && cli.config.is_none());
    let cfg = load_config(cli.config.as_deref(), &overrides, fitted)?;
    if !cli.quiet {
        eprintln!(
            "circsim {}: E_CΣ = {} GHz, E_J = {:?} GHz (δE_J = {:.1}%), C_X = {} fF, Γ = {} GHz",
            command.name(),
            cfg.e_c_sigma_ghz,
            cfg.e_j_ghz,
            100.0 * cfg.delta_e_j,
            cfg.c_x_ff,
            cfg.gamma_ghz
        );
    }
    if let Some(n) = cli.threads {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = run(command, &cfg)?;
    let written = write_outputs(&cfg, &out)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let failed = out.summary.get("failed").and_then(|v| v.as_u64()).unwrap_or(0);
    if !cli.quiet {
        eprintln!("wrote {} ({} rows) and {}", written.csv.display(), out.table.rows.len(), written.json.display());
        if command == Command::Selftest {
            eprintln!("selftest: {} passed, {failed} failed", out.table.rows.len() as u64 - failed);
        }
    }
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
