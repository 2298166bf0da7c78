//! Run configuration: JSON file, then command-line overrides, then validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use swimopt::optimizer::{Problem, OPT_N_GAMMA};
use swimopt::stokes_bie::Discretization;

use crate::error::CliError;

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "SWIMOPT_OUTPUT_ROOT";

/// Default shape basis of fixed-shape commands.
pub const SOLVE_N_GAMMA: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    MaxEff,
    MinDrag,
}

impl From<ProblemKind> for Problem {
    fn from(p: ProblemKind) -> Self {
        match p {
            ProblemKind::MaxEff => Problem::MaxEfficiency,
            ProblemKind::MinDrag => Problem::MinDrag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    /// Target reduced volume `ν₀`.
    pub nu: f64,
    /// Shape for `solve`: `sphere`, `spheroid`, `spheroid:<a/b>`, `peanut`,
    /// `min-drag`, or a `(t,R,Z)` CSV path.
    pub shape: String,
    /// Start shape for `optimize`; `auto` is `min-drag` for efficiency and
    /// `spheroid` for drag.
    pub init: String,
    /// Slip for `solve`: `optimal`, `sin`, `sin2t`, or a `(t,u_S)` CSV path.
    pub slip: String,
    /// Shape basis size; defaults to 24 for fixed shapes and 16 for optimization.
    pub n_gamma: Option<usize>,
    /// Slip basis size for CSV slips.
    pub n_u: usize,
    pub panels: usize,
    pub order: usize,
    pub refine: usize,
    pub pole_refine: usize,
    pub mu: f64,
    pub constraint_tol: f64,
    pub g_tol: f64,
    pub max_outer: usize,
    pub max_iter: usize,
    pub sigma0: f64,
    /// Finite-difference step of `validate`.
    pub eta: f64,
    /// Relative gradient error accepted by `validate`.
    pub grad_tol: f64,
    /// Also report truncation errors over a range of steps.
    pub eta_sweep: bool,
    pub random_directions: usize,
    pub seed: u64,
    /// Reduced volumes of `sweep`.
    pub nus: Vec<f64>,
    pub sweep_min_drag: bool,
    pub sweep_max_eff: bool,
    /// Parallel sweep workers.
    pub workers: usize,
    /// Export the velocity on an off-surface grid.
    pub flow_grid: bool,
    pub grid_nr: usize,
    pub grid_nz: usize,
    /// Grid half-extent in multiples of the body's half-length.
    pub grid_extent: f64,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = Discretization::default();
        Self {
            problem: ProblemKind::MaxEff,
            nu: 0.7,
            shape: "sphere".into(),
            init: "auto".into(),
            slip: "optimal".into(),
            n_gamma: None,
            n_u: 16,
            panels: d.n_panels,
            order: d.order,
            refine: d.refine,
            pole_refine: d.pole_refine,
            mu: d.mu,
            constraint_tol: 1e-6,
            g_tol: 1e-6,
            max_outer: 20,
            max_iter: 200,
            sigma0: 1e4,
            eta: 1e-3,
            grad_tol: 1e-4,
            eta_sweep: false,
            random_directions: 5,
            seed: 20240601,
            nus: vec![0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0],
            sweep_min_drag: false,
            sweep_max_eff: false,
            workers: 1,
            flow_grid: false,
            grid_nr: 40,
            grid_nz: 80,
            grid_extent: 2.0,
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))
    }

    pub fn discretization(&self) -> Discretization {
        Discretization {
            n_panels: self.panels,
            order: self.order,
            refine: self.refine,
            pole_refine: self.pole_refine,
            mu: self.mu,
        }
    }

    pub fn solve_n_gamma(&self) -> usize {
        self.n_gamma.unwrap_or(SOLVE_N_GAMMA)
    }

    pub fn opt_n_gamma(&self) -> usize {
        self.n_gamma.unwrap_or(OPT_N_GAMMA)
    }

    /// Hex SHA-256 of the canonical JSON form, excluding the output location.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            output: PathBuf::new(),
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Output directory with the environment root applied to relative paths.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output.is_relative() => PathBuf::from(root).join(&self.output),
            _ => self.output.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Input(m));
        let in_nu = |v: f64| v > 0.0 && v <= 1.0;
        if !in_nu(self.nu) {
            return bad(format!("nu must lie in (0, 1], got {}", self.nu));
        }
        if let Some(v) = self.nus.iter().find(|v| !in_nu(**v)) {
            return bad(format!("sweep reduced volume {v} not in (0, 1]"));
        }
        if self.nus.is_empty() {
            return bad("sweep needs at least one reduced volume".into());
        }
        if let Some(n) = self.n_gamma {
            if n < 16 {
                return bad(format!("n_gamma must be at least 16, got {n}"));
            }
        }
        if self.n_u == 0 {
            return bad("n_u must be positive".into());
        }
        if ![8, 12, 16].contains(&self.order) {
            return bad(format!("order must be 8, 12 or 16, got {}", self.order));
        }
        if self.panels < 2 || self.refine == 0 {
            return bad("panels must be at least 2 and refine positive".into());
        }
        if self.pole_refine > 8 {
            return bad(format!("pole_refine must be at most 8, got {}", self.pole_refine));
        }
        for (name, v) in [
            ("mu", self.mu),
            ("constraint_tol", self.constraint_tol),
            ("g_tol", self.g_tol),
            ("sigma0", self.sigma0),
            ("grad_tol", self.grad_tol),
            ("grid_extent", self.grid_extent),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.eta > 0.0 && self.eta < 0.1) {
            return bad(format!("eta must lie in (0, 0.1), got {}", self.eta));
        }
        if self.max_outer == 0 || self.max_iter == 0 || self.workers == 0 {
            return bad("max_outer, max_iter and workers must be positive".into());
        }
        if self.grid_nr < 2 || self.grid_nz < 2 {
            return bad("flow grid needs at least 2 points per direction".into());
        }
        Ok(())
    }
}
