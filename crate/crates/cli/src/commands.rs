//! The four subcommands.

use std::f64::consts::PI;
use std::time::Instant;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use swimopt::error::SwimError;
use swimopt::functionals::{optimal_slip, power_loss, towing_power, EfficiencyReport};
use swimopt::optimizer::{initial_curve, optimize_shape, InitialShape, OptOptions, OptResult, Problem};
use swimopt::shape_sens::{modal_direction, reference_directions, Objective, ShapeEvaluation};
use swimopt::splinecurve::io::{read_curve_csv, read_slip_csv};
use swimopt::splinecurve::{
    build_basis, peanut_for_nu, spheroid_aspect_for_nu, AnalyticCurve, GeneratingCurve, Meridian, SlipBasis,
    SlipProfile,
};
use swimopt::stokes_bie::{
    dissipation, eval_offsurface, reciprocity_check, solve_adjoint, solve_forward, BieProblem, FlowSolution,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Artifacts;

/// Tolerance of the sphere identities in the validation suite.
pub const SPHERE_TOL: f64 = 1e-6;

/// Samples written per exported meridian.
const CURVE_SAMPLES: usize = 201;

fn read_file(path: &str) -> Result<std::fs::File, CliError> {
    std::fs::File::open(path).map_err(|e| CliError::Input(format!("cannot open {path}: {e}")))
}

/// Shape keyword or `(t,R,Z)` CSV path for fixed-shape commands.
fn resolve_shape(spec: &str, cfg: &RunConfig) -> Result<Box<dyn Meridian>, CliError> {
    let input = |e: SwimError| CliError::Input(format!("shape {spec}: {e}"));
    Ok(match spec {
        "sphere" => Box::new(AnalyticCurve::Sphere { radius: 1.0 }),
        "spheroid" => Box::new(AnalyticCurve::Spheroid {
            a: spheroid_aspect_for_nu(cfg.nu).map_err(input)?,
            b: 1.0,
        }),
        "peanut" => Box::new(peanut_for_nu(cfg.nu).map_err(input)?),
        "min-drag" => Box::new(initial_curve(&InitialShape::MinDrag, cfg.nu, &opt_options(cfg))?),
        s if s.starts_with("spheroid:") => {
            let k: f64 = s["spheroid:".len()..]
                .parse()
                .map_err(|_| CliError::Input(format!("bad aspect ratio in {s}")))?;
            if !(k > 0.0 && k.is_finite()) {
                return Err(CliError::Input(format!("aspect ratio must be positive in {s}")));
            }
            Box::new(AnalyticCurve::Spheroid { a: k, b: 1.0 })
        }
        path => {
            let samples = read_curve_csv(read_file(path)?).map_err(input)?;
            let basis = build_basis(cfg.solve_n_gamma() - 5, PI)?;
            Box::new(GeneratingCurve::fit_samples(&samples, &basis).map_err(input)?)
        }
    })
}

fn initial_shape(cfg: &RunConfig) -> Result<InitialShape, CliError> {
    Ok(match cfg.init.as_str() {
        "auto" => match Problem::from(cfg.problem) {
            Problem::MaxEfficiency => InitialShape::MinDrag,
            Problem::MinDrag => InitialShape::Spheroid,
        },
        "sphere" => InitialShape::Sphere,
        "spheroid" => InitialShape::Spheroid,
        "peanut" => InitialShape::Peanut,
        "min-drag" => InitialShape::MinDrag,
        path => InitialShape::Samples(
            read_curve_csv(read_file(path)?).map_err(|e| CliError::Input(format!("init {path}: {e}")))?,
        ),
    })
}

pub fn opt_options(cfg: &RunConfig) -> OptOptions {
    let mut o = OptOptions {
        disc: cfg.discretization(),
        n_gamma: cfg.opt_n_gamma(),
        ..Default::default()
    };
    o.alm.sigma0 = cfg.sigma0;
    o.alm.constraint_tol = cfg.constraint_tol;
    o.alm.max_outer = cfg.max_outer;
    o.bfgs.g_tol = cfg.g_tol;
    o.bfgs.max_iter = cfg.max_iter;
    o
}

/// Nodal slip values for a slip keyword or `(t,u_S)` CSV path.
fn resolve_slip(spec: &str, cfg: &RunConfig, problem: &BieProblem, optimal: &[f64]) -> Result<Vec<f64>, CliError> {
    let t = &problem.geom.t;
    Ok(match spec {
        "optimal" => optimal.to_vec(),
        "sin" => t.iter().map(|t| t.sin()).collect(),
        "sin2t" => t.iter().map(|t| (2.0 * t).sin()).collect(),
        path => {
            let s = read_slip_csv(read_file(path)?).map_err(|e| CliError::Input(format!("slip {path}: {e}")))?;
            if s.len() < 2 || s.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(CliError::Input(format!("slip {path}: need increasing t samples")));
            }
            let lin = |x: f64| {
                let k = s.partition_point(|p| p.0 <= x).clamp(1, s.len() - 1);
                let (a, b) = (s[k - 1], s[k]);
                a.1 + (x - a.0) / (b.0 - a.0) * (b.1 - a.1)
            };
            SlipProfile::interpolate(lin, &SlipBasis::new(cfg.n_u)?).values(t)
        }
    })
}

fn sampled(curve: &dyn Meridian) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = (0..CURVE_SAMPLES).map(|i| PI * i as f64 / (CURVE_SAMPLES - 1) as f64).collect();
    let (r, z) = t.iter().map(|&t| curve.point(t)).map(|p| (p.r, p.z)).unzip();
    (t, r, z)
}

fn write_shape(art: &Artifacts, name: &str, curve: &dyn Meridian, extra: &[(&str, String)]) -> Result<(), CliError> {
    let (t, r, z) = sampled(curve);
    art.csv(name, extra, &["t", "R", "Z"], &[&t, &r, &z])?;
    Ok(())
}

fn write_surface(art: &Artifacts, name: &str, problem: &BieProblem, sol: &FlowSolution, what: &str) -> Result<(), CliError> {
    art.csv(
        name,
        &[("problem", what.into())],
        &["t", "f_tau", "f_n", "p"],
        &[&problem.geom.t, &sol.f_tau, &sol.f_n, &sol.p],
    )?;
    Ok(())
}

/// Lab-frame velocity on a cell-centred `(r, z)` grid; NaN inside the body.
fn write_flow_grid(art: &Artifacts, cfg: &RunConfig, problem: &BieProblem, curve: &dyn Meridian, sol: &FlowSolution) -> Result<(), CliError> {
    let half = problem.geom.z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let ext = cfg.grid_extent * half.max(problem.geom.r.iter().cloned().fold(0.0, f64::max));
    let (dr, dz) = (ext / cfg.grid_nr as f64, 2.0 * ext / cfg.grid_nz as f64);
    let points: Vec<(f64, f64)> = (0..cfg.grid_nz)
        .flat_map(|j| (0..cfg.grid_nr).map(move |i| ((i as f64 + 0.5) * dr, -ext + (j as f64 + 0.5) * dz)))
        .collect();
    let vel: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&x| match eval_offsurface(problem, curve, &sol.zeta, &[x]) {
            Ok(v) => Ok(v[0]),
            Err(SwimError::PointInside(..)) => Ok((f64::NAN, f64::NAN)),
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()?;
    let (r, z): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    let (ur, uz): (Vec<f64>, Vec<f64>) = vel.into_iter().unzip();
    art.csv("flow.csv", &[("frame", "lab".into())], &["r", "z", "u_r", "u_z"], &[&r, &z, &ur, &uz])?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    pub shape: String,
    pub slip: String,
    pub nodes: usize,
    pub volume: f64,
    pub area: f64,
    pub nu: f64,
    /// Towing drag `F0` at unit speed.
    pub f0: f64,
    /// `F0/(6πμ r)` with `r` the equal-volume radius.
    pub j_drag: f64,
    /// Swim speed, power loss and efficiency of the prescribed slip.
    pub u: f64,
    pub j_w: f64,
    pub j_e: f64,
    /// Maximal efficiency of the shape and the matching swim speed.
    pub optimal_e: f64,
    pub optimal_u: f64,
    pub rayleigh_discrepancy: Option<f64>,
    /// Reciprocity residual between the swimming and towing problems.
    pub reciprocity: f64,
    pub dissipation_forward: f64,
    pub dissipation_towing: f64,
}

pub fn solve(cfg: &RunConfig) -> Result<SolveSummary, CliError> {
    let curve = resolve_shape(&cfg.shape, cfg)?;
    let problem = BieProblem::new(curve.as_ref(), &cfg.discretization())?;
    let opt = optimal_slip(&problem, true)?;
    let slip = resolve_slip(&cfg.slip, cfg, &problem, &opt.report.z_s)?;
    let fw = solve_forward(&problem, &slip)?;
    let (adjoint, f0) = solve_adjoint(&problem)?;
    let j_w = power_loss(&problem, &fw);
    let summary = SolveSummary {
        shape: cfg.shape.clone(),
        slip: cfg.slip.clone(),
        nodes: problem.len(),
        volume: opt.report.volume,
        area: opt.report.area,
        nu: opt.report.nu,
        f0,
        j_drag: opt.report.j_drag,
        u: fw.u,
        j_w,
        j_e: if j_w > 0.0 { towing_power(f0, fw.u) / j_w } else { f64::NAN },
        optimal_e: opt.report.e,
        optimal_u: opt.report.u,
        rayleigh_discrepancy: opt.report.rayleigh_discrepancy,
        reciprocity: reciprocity_check(&problem, &fw, &adjoint),
        dissipation_forward: dissipation(&problem, &fw),
        dissipation_towing: dissipation(&problem, &adjoint),
    };

    let art = Artifacts::new(cfg.output_dir(), "solve", cfg, cfg.solve_n_gamma())?;
    let g = &problem.geom;
    art.csv("shape.csv", &[], &["t", "R", "Z"], &[&g.t, &g.r, &g.z])?;
    art.csv("slip.csv", &[("slip", cfg.slip.clone())], &["t", "u_S"], &[&g.t, &slip])?;
    art.csv("optimal_slip.csv", &[], &["t", "u_S"], &[&g.t, &opt.report.z_s])?;
    write_surface(&art, "surface.csv", &problem, &fw, "swimming")?;
    write_surface(&art, "surface_towing.csv", &problem, &adjoint, "towing")?;
    if cfg.flow_grid {
        write_flow_grid(&art, cfg, &problem, curve.as_ref(), &fw)?;
    }
    art.json("summary.json", cfg, &summary)?;
    println!(
        "nodes {}  nu {:.6}  F0 {:.10}  J_drag {:.10}  U {:.10}  J_E {:.8}  E* {:.8}",
        summary.nodes, summary.nu, summary.f0, summary.j_drag, summary.u, summary.j_e, summary.optimal_e
    );
    println!("artifacts: {}", art.dir.display());
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct OptReport<'a> {
    problem: Problem,
    nu0: f64,
    value: f64,
    nu: f64,
    converged: bool,
    outer_iterations: usize,
    inner_iterations: usize,
    evaluations: usize,
    inner_failures: usize,
    report: &'a EfficiencyReport,
    curve: &'a GeneratingCurve,
    lambda: f64,
    sigma: f64,
}

fn write_opt_result(art: &Artifacts, cfg: &RunConfig, res: &OptResult) -> Result<(), CliError> {
    write_shape(art, "shape.csv", &res.curve, &[])?;
    let problem = BieProblem::new(&res.curve, &cfg.discretization())?;
    art.csv("slip.csv", &[("slip", "optimal".into())], &["t", "u_S"], &[&problem.geom.t, &res.report.z_s])?;
    let s = &res.snapshots;
    let col = |f: fn(&swimopt::optimizer::Snapshot) -> f64| s.iter().map(f).collect::<Vec<f64>>();
    art.csv(
        "snapshots.csv",
        &[("rows", "inner steps have NaN value/nu/c_nu; outer rows carry them".into())],
        &["outer", "inner", "value", "nu", "c_nu", "lagrangian", "lambda", "sigma", "grad_norm"],
        &[
            &col(|x| x.outer as f64),
            &col(|x| x.inner as f64),
            &col(|x| x.value),
            &col(|x| x.nu),
            &col(|x| x.c_nu),
            &col(|x| x.lagrangian),
            &col(|x| x.lambda),
            &col(|x| x.sigma),
            &col(|x| x.grad_norm),
        ],
    )?;
    // outer-iteration shapes for convergence plots
    for snap in s.iter().filter(|x| !x.value.is_nan()) {
        let c = GeneratingCurve::from_free_params(&snap.params, &res.curve.basis)?;
        write_shape(art, &format!("shape_outer_{:02}.csv", snap.outer), &c, &[("outer", snap.outer.to_string())])?;
    }
    let report = OptReport {
        problem: res.problem,
        nu0: res.nu0,
        value: res.value,
        nu: res.nu,
        converged: res.converged,
        outer_iterations: res.outer_iterations,
        inner_iterations: res.inner_iterations,
        evaluations: res.evaluations,
        inner_failures: res.inner_failures,
        report: &res.report,
        curve: &res.curve,
        lambda: res.state.lambda,
        sigma: res.state.sigma,
    };
    art.json("report.json", cfg, &report)?;
    Ok(())
}

pub fn optimize(cfg: &RunConfig) -> Result<OptResult, CliError> {
    let opts = opt_options(cfg);
    let problem = Problem::from(cfg.problem);
    let shape = initial_shape(cfg)?;
    let art = Artifacts::new(cfg.output_dir(), "optimize", cfg, opts.n_gamma)?;
    let clock = Instant::now();
    if shape == InitialShape::MinDrag && cfg.nu < 1.0 {
        println!("building the min-drag start shape at nu = {}", cfg.nu);
    }
    let init = initial_curve(&shape, cfg.nu, &opts)?;
    write_shape(&art, "initial_shape.csv", &init, &[("init", cfg.init.clone())])?;
    let label = match problem {
        Problem::MaxEfficiency => "E",
        Problem::MinDrag => "J_drag",
    };
    println!("{:>5} {:>14} {:>12} {:>10} {:>10}", "iter", label, "nu", "|C_nu|", "|grad|");
    let res = optimize_shape(problem, &init, cfg.nu, &opts, |s| {
        println!("{:>5} {:>14.8} {:>12.8} {:>10.2e} {:>10.2e}", s.outer, s.value, s.nu, s.c_nu.abs(), s.grad_norm);
    })?;
    write_opt_result(&art, cfg, &res)?;
    println!(
        "final {label} = {:.8}, nu = {:.8}, E = {:.8}, J_drag = {:.8}, converged = {}, {:.1} s",
        res.value,
        res.nu,
        res.report.e,
        res.report.j_drag,
        res.converged,
        clock.elapsed().as_secs_f64()
    );
    println!("artifacts: {}", art.dir.display());
    if !res.converged {
        return Err(CliError::NotConverged(format!(
            "|C_nu| = {:.2e} after {} outer iterations; best-effort artifacts in {}",
            (res.nu - cfg.nu).abs(),
            res.outer_iterations,
            art.dir.display()
        )));
    }
    Ok(res)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientRow {
    pub direction: String,
    pub objective: &'static str,
    pub analytic: f64,
    pub fd: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub name: &'static str,
    pub value: f64,
    pub expected: f64,
    pub err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaRow {
    pub eta: f64,
    pub abs_err_e: f64,
    pub abs_err_drag: f64,
    /// Observed order against the previous (larger) step.
    pub order_e: f64,
    pub order_drag: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub shape: String,
    pub eta: f64,
    pub tolerance: f64,
    pub identities: Vec<IdentityRow>,
    pub gradients: Vec<GradientRow>,
    pub eta_sweep: Vec<EtaRow>,
    pub max_rel_err: f64,
    pub pass: bool,
}

fn sphere_identities(cfg: &RunConfig) -> Result<Vec<IdentityRow>, CliError> {
    let disc = cfg.discretization();
    let sphere = AnalyticCurve::Sphere { radius: 1.0 };
    let p = BieProblem::new(&sphere, &disc)?;
    let opt = optimal_slip(&p, true)?;
    let sin: Vec<f64> = p.geom.t.iter().map(|t| t.sin()).collect();
    let fw = solve_forward(&p, &sin)?;
    let m = p.geom.measures();
    let row = |name, value: f64, expected: f64| {
        let err = (value - expected).abs() / expected.abs().max(1.0);
        IdentityRow { name, value, expected, err, pass: err <= SPHERE_TOL }
    };
    Ok(vec![
        row("volume", m.volume, 4.0 * PI / 3.0),
        row("area", m.area, 4.0 * PI),
        row("reduced_volume", m.reduced_volume, 1.0),
        row("drag_ratio", opt.report.f0 / (6.0 * PI * cfg.mu), 1.0),
        row("optimal_efficiency", opt.report.e, 0.5),
        row("squirmer_speed", fw.u.abs(), 2.0 / 3.0),
    ])
}

/// `(E, J_drag)` of a free-parameter vector.
fn values(x: &[f64], basis: &swimopt::splinecurve::BasisSet, cfg: &RunConfig) -> Result<(f64, f64), CliError> {
    let c = GeneratingCurve::from_free_params(x, basis)?;
    let ev = ShapeEvaluation::new(&c, &cfg.discretization(), true)?;
    Ok((ev.value(Objective::Efficiency)?, ev.j_drag))
}

fn central(x: &[f64], d: &[f64], eta: f64, basis: &swimopt::splinecurve::BasisSet, cfg: &RunConfig) -> Result<(f64, f64), CliError> {
    let at = |s: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + s * b).collect() };
    let (ep, dp) = values(&at(eta), basis, cfg)?;
    let (em, dm) = values(&at(-eta), basis, cfg)?;
    Ok(((ep - em) / (2.0 * eta), (dp - dm) / (2.0 * eta)))
}

pub fn validate(cfg: &RunConfig) -> Result<ValidationReport, CliError> {
    let clock = Instant::now();
    let identities = sphere_identities(cfg)?;

    let curve = GeneratingCurve::fit(&peanut_for_nu(cfg.nu)?, cfg.solve_n_gamma())?;
    let basis = curve.basis;
    let ev = ShapeEvaluation::new(&curve, &cfg.discretization(), true)?;
    let x = curve.free_params();
    let mut dirs: Vec<(String, Vec<f64>)> = reference_directions(&basis)?
        .into_iter()
        .map(|(n, d)| (n.to_string(), d))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for k in 0..cfg.random_directions {
        let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        dirs.push((format!("random-{}", k + 1), modal_direction(&basis, &c)?));
    }
    let rows: Vec<Vec<GradientRow>> = dirs
        .par_iter()
        .map(|(name, d)| -> Result<Vec<GradientRow>, CliError> {
            let pert = ev.perturbation(d)?;
            let ae = ev.derivative(Objective::Efficiency, &pert)?;
            let ad = ev.derivative(Objective::Drag, &pert)?;
            let (fe, fd) = central(&x, d, cfg.eta, &basis, cfg)?;
            let row = |objective, analytic: f64, fd: f64| GradientRow {
                direction: name.clone(),
                objective,
                analytic,
                fd,
                rel_err: (analytic - fd).abs() / fd.abs().max(f64::MIN_POSITIVE),
            };
            Ok(vec![row("E", ae, fe), row("J_drag", ad, fd)])
        })
        .collect::<Result<_, _>>()?;
    let gradients: Vec<GradientRow> = rows.into_iter().flatten().collect();

    let mut eta_sweep = Vec::new();
    if cfg.eta_sweep {
        let d = &dirs[0].1;
        let pert = ev.perturbation(d)?;
        let ae = ev.derivative(Objective::Efficiency, &pert)?;
        let ad = ev.derivative(Objective::Drag, &pert)?;
        let etas = [1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3];
        let fds = etas
            .par_iter()
            .map(|&h| central(&x, d, h, &basis, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        for (k, (&h, (fe, fd))) in etas.iter().zip(&fds).enumerate() {
            let (ee, ed) = ((fe - ae).abs(), (fd - ad).abs());
            let order = |now: f64, prev: f64, hp: f64| (prev / now).ln() / (hp / h).ln();
            let (oe, od) = if k == 0 {
                (f64::NAN, f64::NAN)
            } else {
                let prev: &EtaRow = &eta_sweep[k - 1];
                (order(ee, prev.abs_err_e, prev.eta), order(ed, prev.abs_err_drag, prev.eta))
            };
            eta_sweep.push(EtaRow { eta: h, abs_err_e: ee, abs_err_drag: ed, order_e: oe, order_drag: od });
        }
    }

    let max_rel_err = gradients.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let pass = max_rel_err <= cfg.grad_tol && identities.iter().all(|r| r.pass);
    let report = ValidationReport {
        shape: format!("peanut nu={}", cfg.nu),
        eta: cfg.eta,
        tolerance: cfg.grad_tol,
        identities,
        gradients,
        eta_sweep,
        max_rel_err,
        pass,
    };

    let art = Artifacts::new(cfg.output_dir(), "validate", cfg, cfg.solve_n_gamma())?;
    let g = &report.gradients;
    let ids: Vec<f64> = (0..g.len()).map(|k| (k / 2) as f64).collect();
    let obj: Vec<f64> = g.iter().map(|r| if r.objective == "E" { 0.0 } else { 1.0 }).collect();
    art.csv(
        "gradients.csv",
        &[
            ("direction_index", "0-2 reference (elongation, asymmetric, corrugation), then random".into()),
            ("objective_index", "0 = E, 1 = J_drag".into()),
            ("eta", cfg.eta.to_string()),
        ],
        &["direction", "objective", "analytic", "fd", "rel_err"],
        &[
            &ids,
            &obj,
            &g.iter().map(|r| r.analytic).collect::<Vec<_>>(),
            &g.iter().map(|r| r.fd).collect::<Vec<_>>(),
            &g.iter().map(|r| r.rel_err).collect::<Vec<_>>(),
        ],
    )?;
    if !report.eta_sweep.is_empty() {
        let s = &report.eta_sweep;
        art.csv(
            "eta_sweep.csv",
            &[("direction", dirs[0].0.clone())],
            &["eta", "abs_err_e", "abs_err_drag", "order_e", "order_drag"],
            &[
                &s.iter().map(|r| r.eta).collect::<Vec<_>>(),
                &s.iter().map(|r| r.abs_err_e).collect::<Vec<_>>(),
                &s.iter().map(|r| r.abs_err_drag).collect::<Vec<_>>(),
                &s.iter().map(|r| r.order_e).collect::<Vec<_>>(),
                &s.iter().map(|r| r.order_drag).collect::<Vec<_>>(),
            ],
        )?;
    }
    art.json("validation.json", cfg, &report)?;

    for r in &report.identities {
        println!("{:<20} {:>16.10} expected {:>14.10} err {:.2e} {}", r.name, r.value, r.expected, r.err, verdict(r.pass));
    }
    println!("{:<14} {:<7} {:>16} {:>16} {:>10}", "direction", "J", "analytic", "FD", "rel err");
    for r in &report.gradients {
        println!("{:<14} {:<7} {:>16.9e} {:>16.9e} {:>10.2e}", r.direction, r.objective, r.analytic, r.fd, r.rel_err);
    }
    for r in &report.eta_sweep {
        println!("eta {:>9.3e}  err E {:.3e} (order {:.2})  err J_drag {:.3e} (order {:.2})", r.eta, r.abs_err_e, r.order_e, r.abs_err_drag, r.order_drag);
    }
    println!("max rel err {:.2e} (tol {:.0e}), {:.1} s", report.max_rel_err, cfg.grad_tol, clock.elapsed().as_secs_f64());
    println!("artifacts: {}", art.dir.display());
    if !report.pass {
        return Err(CliError::Validation(format!("max relative error {:.2e}", report.max_rel_err)));
    }
    Ok(report)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub nu: f64,
    pub spheroid_j_e: f64,
    pub spheroid_j_drag: f64,
    pub min_drag_j_drag: f64,
    pub min_drag_j_e: f64,
    pub min_drag_converged: Option<bool>,
    pub max_eff_j_e: f64,
    pub max_eff_j_drag: f64,
    pub max_eff_converged: Option<bool>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Reduced volume of the smallest optimized drag, if it is interior to the sweep.
    pub drag_minimum_nu: Option<f64>,
    pub failures: usize,
}

fn sweep_one(nu: f64, cfg: &RunConfig, art: &Artifacts) -> SweepRow {
    let mut row = SweepRow {
        nu,
        spheroid_j_e: f64::NAN,
        spheroid_j_drag: f64::NAN,
        min_drag_j_drag: f64::NAN,
        min_drag_j_e: f64::NAN,
        min_drag_converged: None,
        max_eff_j_e: f64::NAN,
        max_eff_j_drag: f64::NAN,
        max_eff_converged: None,
        errors: Vec::new(),
    };
    let run = || -> Result<EfficiencyReport, CliError> {
        let a = spheroid_aspect_for_nu(nu)?;
        let p = BieProblem::new(&AnalyticCurve::Spheroid { a, b: 1.0 }, &cfg.discretization())?;
        Ok(optimal_slip(&p, false)?.report)
    };
    match run() {
        Ok(r) => {
            row.spheroid_j_e = r.e;
            row.spheroid_j_drag = r.j_drag;
        }
        Err(e) => row.errors.push(format!("spheroid: {e}")),
    }
    if !(cfg.sweep_min_drag || cfg.sweep_max_eff) {
        return row;
    }
    let dir = match art.child(&format!("nu_{nu:.3}")) {
        Ok(d) => d,
        Err(e) => {
            row.errors.push(e.to_string());
            return row;
        }
    };
    let opts = opt_options(cfg);
    let min_drag = || -> Result<OptResult, CliError> {
        let init = initial_curve(&InitialShape::Spheroid, nu, &opts)?;
        let res = optimize_shape(Problem::MinDrag, &init, nu, &opts, |_| {})?;
        write_opt_result(&dir.child("min_drag")?, cfg, &res)?;
        Ok(res)
    };
    let md = match min_drag() {
        Ok(r) => {
            row.min_drag_j_drag = r.report.j_drag;
            row.min_drag_j_e = r.report.e;
            row.min_drag_converged = Some(r.converged);
            Some(r.curve)
        }
        Err(e) => {
            row.errors.push(format!("min-drag: {e}"));
            None
        }
    };
    if cfg.sweep_max_eff {
        let max_eff = || -> Result<OptResult, CliError> {
            let start = md.clone().ok_or_else(|| CliError::NotConverged("no min-drag start shape".into()))?;
            let res = optimize_shape(Problem::MaxEfficiency, &start, nu, &opts, |_| {})?;
            write_opt_result(&dir.child("max_eff")?, cfg, &res)?;
            Ok(res)
        };
        match max_eff() {
            Ok(r) => {
                row.max_eff_j_e = r.report.e;
                row.max_eff_j_drag = r.report.j_drag;
                row.max_eff_converged = Some(r.converged);
            }
            Err(e) => row.errors.push(format!("max-eff: {e}")),
        }
    }
    for e in &row.errors {
        warn!("nu = {nu}: {e}");
    }
    info!("nu = {nu}: done");
    row
}

/// Interior minimum of `(nu, value)` pairs, ignoring NaN entries.
pub fn interior_minimum(points: &[(f64, f64)]) -> Option<f64> {
    let mut p: Vec<(f64, f64)> = points.iter().copied().filter(|q| q.1.is_finite()).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = (0..p.len()).min_by(|&i, &j| p[i].1.total_cmp(&p[j].1))?;
    (k > 0 && k + 1 < p.len()).then(|| p[k].0)
}

pub fn sweep(cfg: &RunConfig) -> Result<SweepReport, CliError> {
    let clock = Instant::now();
    let art = Artifacts::new(cfg.output_dir(), "sweep", cfg, cfg.opt_n_gamma())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| cfg.nus.par_iter().map(|&nu| sweep_one(nu, cfg, &art)).collect());
    let drag_minimum_nu = interior_minimum(&rows.iter().map(|r| (r.nu, r.min_drag_j_drag)).collect::<Vec<_>>());
    let failures = rows.iter().filter(|r| !r.errors.is_empty()).count();
    let report = SweepReport { rows, drag_minimum_nu, failures };

    let r = &report.rows;
    let col = |f: fn(&SweepRow) -> f64| r.iter().map(f).collect::<Vec<f64>>();
    let flag = |v: Option<bool>| v.map_or(f64::NAN, |b| if b { 1.0 } else { 0.0 });
    art.csv(
        "table.csv",
        &[("flags", "converged columns: 1 yes, 0 no, NaN not run".into())],
        &[
            "nu",
            "spheroid_j_e",
            "spheroid_j_drag",
            "min_drag_j_drag",
            "min_drag_j_e",
            "min_drag_converged",
            "max_eff_j_e",
            "max_eff_j_drag",
            "max_eff_converged",
        ],
        &[
            &col(|x| x.nu),
            &col(|x| x.spheroid_j_e),
            &col(|x| x.spheroid_j_drag),
            &col(|x| x.min_drag_j_drag),
            &col(|x| x.min_drag_j_e),
            &r.iter().map(|x| flag(x.min_drag_converged)).collect::<Vec<_>>(),
            &col(|x| x.max_eff_j_e),
            &col(|x| x.max_eff_j_drag),
            &r.iter().map(|x| flag(x.max_eff_converged)).collect::<Vec<_>>(),
        ],
    )?;
    art.json("sweep.json", cfg, &report)?;

    println!(
        "{:>6} {:>12} {:>12} {:>14} {:>12} {:>12}",
        "nu", "spheroid J_E", "spheroid J_d", "min-drag J_d", "min-drag J_E", "max-eff J_E"
    );
    for x in r {
        println!(
            "{:>6.3} {:>12.6} {:>12.6} {:>14.6} {:>12.6} {:>12.6}",
            x.nu, x.spheroid_j_e, x.spheroid_j_drag, x.min_drag_j_drag, x.min_drag_j_e, x.max_eff_j_e
        );
    }
    if let Some(nu) = report.drag_minimum_nu {
        println!("drag minimum at nu = {nu}");
    }
    println!("{} failed entries, {:.1} s", report.failures, clock.elapsed().as_secs_f64());
    println!("artifacts: {}", art.dir.display());
    if report.failures > 0 {
        return Err(CliError::NotConverged(format!("{} sweep entries failed", report.failures)));
    }
    Ok(report)
}
