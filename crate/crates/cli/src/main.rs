//! `phsreg` command-line front end.
//!
//! Exit status: 0 on success, 1 when a check fails, 2 for malformed input.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "phsreg",
    version,
    about = "Output regulation of boundary-controlled port-Hamiltonian systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Structural and boundary-condition checks of a model file.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Discretize a model and verify discrete passivity.
    Discretize {
        #[command(flatten)]
        plant: PlantArgs,
        /// Static output feedback gain applied before export.
        #[arg(long)]
        dc: Option<f64>,
        /// KYP tolerance relative to ‖M‖.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Directory receiving `plant.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimum eigenvalue of the symmetric part of P(±iω) at each frequency.
    Zeros {
        #[command(flatten)]
        plant: PlantArgs,
        #[command(flatten)]
        freqs: FreqArgs,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Build the internal-model controller and write `controller.toml`.
    Synth {
        #[command(flatten)]
        plant: PlantArgs,
        /// Comma-separated frequencies in rad/s.
        #[arg(long, value_delimiter = ',', required = true)]
        freqs: Vec<f64>,
        /// Add the zero-frequency (constant) mode.
        #[arg(long)]
        include_zero: bool,
        #[arg(long)]
        dc: f64,
        /// Coupling gain; chosen by a sweep when absent.
        #[arg(long)]
        delta_c: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectral abscissa of the closed loop over a grid of coupling gains.
    Sweep {
        #[command(flatten)]
        plant: PlantArgs,
        #[command(flatten)]
        ctrl: ControllerArgs,
        /// Comma-separated gains; a logarithmic default grid otherwise.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
    },
    /// Simulate the closed loop; writes CSV, plot script and report.
    Simulate {
        #[command(flatten)]
        plant: PlantArgs,
        #[command(flatten)]
        ctrl: ControllerArgs,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 5e-4)]
        dt: f64,
        /// Fail instead of warning when dt is coarse for the signal.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quadratic Lyapunov certificate of the closed loop.
    Certify {
        #[command(flatten)]
        plant: PlantArgs,
        #[command(flatten)]
        ctrl: ControllerArgs,
    },
    /// Full beam reproduction: model, checks, controller, sweep, simulation.
    DemoPiezo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        nf: Option<usize>,
        #[arg(long)]
        dc: Option<f64>,
        #[arg(long)]
        delta_c: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Debug, Args)]
struct PlantArgs {
    #[arg(long)]
    model: PathBuf,
    /// Number of finite elements.
    #[arg(long, default_value_t = 50)]
    nf: usize,
}

#[derive(Debug, Args)]
struct FreqArgs {
    /// Controller file supplying the frequencies.
    #[arg(long, conflicts_with = "freqs")]
    controller: Option<PathBuf>,
    /// Comma-separated frequencies in rad/s.
    #[arg(long, value_delimiter = ',')]
    freqs: Vec<f64>,
    #[arg(long)]
    include_zero: bool,
}

#[derive(Debug, Args)]
struct ControllerArgs {
    #[arg(long)]
    controller: PathBuf,
    /// Overrides the coupling gain of the controller file.
    #[arg(long)]
    delta_c: Option<f64>,
    /// Overrides the static gain of the controller file (times identity).
    #[arg(long)]
    dc: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
