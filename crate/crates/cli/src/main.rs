use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smclab::experiments::SaturationSweepOptions;
use smclab::{EqLaw, Executor};

mod commands;
mod config;
mod output;

use output::Failure;

#[derive(Parser)]
#[command(name = "smclab", version, about = "Discrete-time sliding-mode control studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop scenario and write trace.csv, resolved.conf and manifest.txt.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a key, e.g. `--set run.h=0.1`. Repeatable.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit the one-step error order of an equivalent-control law.
    OrderCheck {
        #[arg(long)]
        law: String,
        #[arg(long, default_value_t = 1e-4)]
        h_min: f64,
        #[arg(long, default_value_t = 1e-2)]
        h_max: f64,
        #[arg(long, default_value_t = 12)]
        points: usize,
        /// State to evaluate at, comma separated. Defaults to the scenario x0.
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        /// Plant configuration; the benchmark plant when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        sets: Vec<String>,
        /// Exit with status 4 when the slope is outside the law's band.
        #[arg(long)]
        assert: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Batch studies on the benchmark plant.
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Solve a box-constrained AVI from a file with `M`, `q` and `alpha`.
    AviSolve { file: PathBuf },
}

#[derive(Subcommand)]
enum SweepKind {
    /// The seven eq-law and u^s pairings.
    FigMatrix {
        #[arg(long, default_value_t = 0.3)]
        h: f64,
        /// Add the decaying sinusoidal perturbation.
        #[arg(long)]
        perturbed: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Implicit and explicit u^s for several gains under 0.9 sin t.
    GainStudy {
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
        alphas: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Saturated u^s over an h × ε grid against the implicit baseline.
    Saturation {
        /// Grid size as `N_h x N_ε`.
        #[arg(long, default_value = "20x20")]
        grid: String,
        #[arg(long, default_value_t = 150.0)]
        t_end: f64,
        #[arg(long, default_value_t = 20.0)]
        window: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn executor() -> Result<Executor, Failure> {
    match std::env::var("SMCLAB_THREADS") {
        Err(_) => Ok(Executor::default()),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| Executor::with_threads(Some(n)))
            .map_err(|_| Failure::Config(format!("SMCLAB_THREADS must be a thread count, got `{v}`"))),
    }
}

fn parse_state(s: &str) -> Result<Vec<f64>, Failure> {
    config::parse_vector(s).ok_or_else(|| Failure::Config(format!("--x expects numbers, got `{s}`")))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, sets, out } => commands::simulate(config.as_deref(), &sets, &out),
        Command::OrderCheck { law, h_min, h_max, points, x, config, sets, assert, out } => {
            let law = EqLaw::parse(&law).ok_or_else(|| Failure::Config(format!("unknown law `{law}`")))?;
            let x = x.as_deref().map(parse_state).transpose()?;
            let args = commands::OrderArgs { law, h_min, h_max, points, x, assert };
            commands::order_check(&args, config.as_deref(), &sets, &out)
        }
        Command::Sweep { kind } => {
            let exec = executor()?;
            match kind {
                SweepKind::FigMatrix { h, perturbed, out } => commands::fig_matrix(h, perturbed, exec, &out),
                SweepKind::GainStudy { h, alphas, out } => commands::gain_study(h, &alphas, exec, &out),
                SweepKind::Saturation { grid, t_end, window, out } => {
                    let grid = commands::parse_grid(&grid)?;
                    let opts = SaturationSweepOptions { t_end, window, ..Default::default() };
                    commands::saturation(grid, &opts, exec, &out)
                }
            }
        }
        Command::AviSolve { file } => commands::avi_solve(&file),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("smclab: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
