//! `swimopt` command-line front end.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ProblemKind, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "swimopt", version, about = "Shape and slip optimization of axisymmetric microswimmers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Towing, swimming and optimal-slip solves on a fixed shape.
    Solve,
    /// Shape optimization under a reduced-volume constraint.
    Optimize,
    /// Analytic-versus-finite-difference shape gradients and sphere identities.
    Validate,
    /// Reduced-volume sweep of spheroid and optimized shapes.
    Sweep,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true, value_enum)]
    problem: Option<ProblemKind>,
    /// Target reduced volume.
    #[arg(long, global = true)]
    nu: Option<f64>,
    /// sphere | spheroid | spheroid:<a/b> | peanut | min-drag | <csv>
    #[arg(long, global = true)]
    shape: Option<String>,
    /// auto | sphere | spheroid | peanut | min-drag | <csv>
    #[arg(long, global = true)]
    init: Option<String>,
    /// optimal | sin | sin2t | <csv>
    #[arg(long, global = true)]
    slip: Option<String>,
    #[arg(long, global = true)]
    n_gamma: Option<usize>,
    #[arg(long, global = true)]
    n_u: Option<usize>,
    #[arg(long, global = true)]
    panels: Option<usize>,
    #[arg(long, global = true)]
    order: Option<usize>,
    #[arg(long, global = true)]
    pole_refine: Option<usize>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    constraint_tol: Option<f64>,
    #[arg(long, global = true)]
    g_tol: Option<f64>,
    #[arg(long, global = true)]
    max_outer: Option<usize>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    sigma0: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Relative gradient error accepted by `validate`.
    #[arg(long, global = true)]
    grad_tol: Option<f64>,
    /// Report finite-difference errors over a range of steps.
    #[arg(long, global = true)]
    eta_sweep: bool,
    #[arg(long, global = true)]
    random_directions: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated reduced volumes for `sweep`.
    #[arg(long, global = true, value_delimiter = ',')]
    nus: Option<Vec<f64>>,
    /// Run drag minimization in `sweep`.
    #[arg(long, global = true)]
    min_drag: bool,
    /// Run efficiency maximization (from the min-drag shape) in `sweep`.
    #[arg(long, global = true)]
    max_eff: bool,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Export the velocity on an off-surface grid.
    #[arg(long, global = true)]
    flow_grid: bool,
    /// Output directory; relative paths are placed under $SWIMOPT_OUTPUT_ROOT if set.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

impl Overrides {
    fn apply(self, c: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(problem, nu, shape, init, slip, n_u, panels, order, pole_refine, mu, constraint_tol, g_tol,
             max_outer, max_iter, sigma0, eta, grad_tol, random_directions, seed, nus, workers, output);
        if self.n_gamma.is_some() {
            c.n_gamma = self.n_gamma;
        }
        c.eta_sweep |= self.eta_sweep;
        c.sweep_min_drag |= self.min_drag || self.max_eff;
        c.sweep_max_eff |= self.max_eff;
        c.flow_grid |= self.flow_grid;
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    log::info!("config sha256 {}", cfg.hash());
    match cli.command {
        Command::Solve => commands::solve(&cfg).map(|_| ()),
        Command::Optimize => commands::optimize(&cfg).map(|_| ()),
        Command::Validate => commands::validate(&cfg).map(|_| ()),
        Command::Sweep => commands::sweep(&cfg).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
