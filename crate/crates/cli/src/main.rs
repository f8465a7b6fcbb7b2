//! `plap`: experiment runner for the radial p-Laplacian numerics.
//!
//! Settings come from defaults, then an optional `--config` file of
//! `key = value` lines, then flags. Exit codes: 0 success, 1 numerical
//! failure, 2 usage error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, UsageError};
use output::Run;

#[derive(Parser)]
#[command(
    name = "plap",
    version,
    about = "Radial p-Laplacian eigenvalue and resonance experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// First eigenpair by shooting, with asymptotics and identity residuals.
    Eig(Settings),
    /// Hypothesis report of a weight.
    CheckWeight(Settings),
    /// Improved Poincare constant of the discrete quadratic form.
    Poincare(Settings),
    /// Lowest `k` eigenvalues of the discrete pencil.
    Spectrum(Settings),
    /// Reduced profile `j(tau; h)` over slice minimizers.
    ReducedProfile(Settings),
    /// Solutions of the resonant problem with source `h`.
    Solve(Settings),
    /// Cut-off approximation of the eigenfunction in Y.
    ApproxY(Settings),
    /// Full acceptance suite.
    Accept(Settings),
}

/// Options shared by every subcommand; each overrides the config key of the same name.
#[derive(Args, Default)]
struct Settings {
    /// File of `key = value` lines applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the canonical configuration and exit.
    #[arg(long)]
    echo_config: bool,
    /// Weight id, e.g. `linear_r4`, `power?alpha=4`, `k1?zeta=2&iota=1`, `k3?eta=0.5`.
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// Space dimension.
    #[arg(long = "N")]
    n: Option<String>,
    /// Truncation radius of the grid.
    #[arg(long)]
    r_max: Option<String>,
    /// Number of grid cells.
    #[arg(long)]
    m: Option<String>,
    /// `geometric` or `uniform`.
    #[arg(long)]
    grading: Option<String>,
    /// `tail` or `dirichlet`.
    #[arg(long)]
    outer: Option<String>,
    /// Relative bracket width of the eigenvalue bisection.
    #[arg(long)]
    tol: Option<String>,
    /// End of the forward shooting integration.
    #[arg(long)]
    rend: Option<String>,
    #[arg(long)]
    r_asym: Option<String>,
    #[arg(long)]
    ode_rtol: Option<String>,
    /// Samples of the trajectory dump and identity checks.
    #[arg(long)]
    samples: Option<String>,
    /// Source term, e.g. `bump?center=3&width=0.5&amp=1&orthogonalize=true` or `kphi?xi=0.01`.
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    tau_max: Option<String>,
    #[arg(long)]
    tau_points: Option<String>,
    #[arg(long)]
    tau_adaptive: Option<String>,
    #[arg(long)]
    gtol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    residual_tol: Option<String>,
    /// Number of pencil eigenvalues.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    poincare_samples: Option<String>,
    /// Target distance of the approximation in Y.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

impl Settings {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs = [
            ("weight", &self.weight),
            ("p", &self.p),
            ("N", &self.n),
            ("r_max", &self.r_max),
            ("m", &self.m),
            ("grading", &self.grading),
            ("outer", &self.outer),
            ("tol", &self.tol),
            ("r_end", &self.rend),
            ("r_asym", &self.r_asym),
            ("ode_rtol", &self.ode_rtol),
            ("samples", &self.samples),
            ("h", &self.h),
            ("tau_max", &self.tau_max),
            ("tau_points", &self.tau_points),
            ("tau_adaptive", &self.tau_adaptive),
            ("gtol", &self.gtol),
            ("max_iter", &self.max_iter),
            ("residual_tol", &self.residual_tol),
            ("k", &self.k),
            ("poincare_samples", &self.poincare_samples),
            ("eps", &self.eps),
            ("seed", &self.seed),
            ("out", &self.out),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
            .collect()
    }

    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.overrides() {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<bool> {
    let (name, settings) = match &command {
        Command::Eig(s) => ("eig", s),
        Command::CheckWeight(s) => ("check-weight", s),
        Command::Poincare(s) => ("poincare", s),
        Command::Spectrum(s) => ("spectrum", s),
        Command::ReducedProfile(s) => ("reduced-profile", s),
        Command::Solve(s) => ("solve", s),
        Command::ApproxY(s) => ("approx-y", s),
        Command::Accept(s) => ("accept", s),
    };
    let cfg = settings.resolve()?;
    if settings.echo_config {
        print!("{}", cfg.echo());
        return Ok(true);
    }
    if name != "accept" {
        // Surface a missing or unknown weight before any output is created.
        cfg.weight()?;
        cfg.params()?;
    }
    let mut run = Run::start(name, &cfg)?;
    let outcome = match command {
        Command::Eig(_) => commands::eig(&cfg, &mut run),
        Command::CheckWeight(_) => commands::check_weight(&cfg, &mut run),
        Command::Poincare(_) => commands::poincare(&cfg, &mut run),
        Command::Spectrum(_) => commands::spectrum(&cfg, &mut run),
        Command::ReducedProfile(_) => commands::reduced(&cfg, &mut run),
        Command::Solve(_) => commands::solve(&cfg, &mut run),
        Command::ApproxY(_) => commands::approx_y(&cfg, &mut run),
        Command::Accept(_) => commands::accept(&mut run),
    };
    let status = match &outcome {
        Ok(true) => "ok",
        Ok(false) => "failed",
        Err(_) => "error",
    };
    let manifest = run.finish(status)?;
    eprintln!("manifest: {}", manifest.display());
    outcome
}

/// Exit code of an error: 2 for usage and invalid input, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<plap_core::Error>() {
            return if matches!(e, plap_core::Error::InvalidArgument(_)) {
                2
            } else {
                1
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
