//! Reduced-volume–constrained shape optimization: augmented-Lagrangian outer loop,
//! BFGS inner loop, with the optimal slip recomputed at every shape.
//!
//! All objectives are scale invariant, so after every accepted step the curve is
//! rescaled to surface area `4π` and re-centered on `z = 0`; the gradient is
//! transformed accordingly (`∇f(cx) = ∇f(x)/c`).

use std::f64::consts::PI;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwimError};
use crate::functionals::{optimal_slip, EfficiencyReport};
use crate::shape_sens::{Objective, ShapeEvaluation};
use crate::splinecurve::{
    build_basis, BasisSet, peanut_for_nu, spheroid_aspect_for_nu, AnalyticCurve, GeneratingCurve, Meridian,
};
use crate::stokes_bie::{BieProblem, Discretization, FlowSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    MaxEfficiency,
    MinDrag,
}

impl Problem {
    fn objective(self) -> Objective {
        match self {
            Problem::MaxEfficiency => Objective::Efficiency,
            Problem::MinDrag => Objective::Drag,
        }
    }

    /// Sign turning the problem into a minimization.
    fn sign(self) -> f64 {
        match self {
            Problem::MaxEfficiency => -1.0,
            Problem::MinDrag => 1.0,
        }
    }
}

/// Multiplier and penalty of the augmented Lagrangian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmState {
    pub lambda: f64,
    pub sigma: f64,
    pub outer_iter: usize,
    /// `|C_ν|` at the end of each completed outer iteration.
    pub constraint_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlmOptions {
    /// Initial multiplier; `None` uses the least-squares estimate
    /// `argmin_λ |s∇J − λ∇C|` at the start shape.
    pub lambda0: Option<f64>,
    pub sigma0: f64,
    pub gamma: f64,
    pub rho: f64,
    pub constraint_tol: f64,
    pub max_outer: usize,
    /// Inner gradient tolerance of the first outer iteration; divided by 10 per
    /// outer iteration down to the BFGS tolerance.
    pub inner_tol0: f64,
}

impl Default for AlmOptions {
    fn default() -> Self {
        Self {
            lambda0: None,
            sigma0: 1e4,
            gamma: 10.0,
            rho: 0.25,
            constraint_tol: 1e-6,
            max_outer: 20,
            inner_tol0: 1e-4,
        }
    }
}

impl AlmState {
    pub fn new(opts: &AlmOptions) -> Self {
        Self {
            lambda: opts.lambda0.unwrap_or(0.0),
            sigma: opts.sigma0,
            outer_iter: 0,
            constraint_history: Vec::new(),
        }
    }
}

/// `λ ← λ − σC`; `σ ← γσ` unless `|C|` shrank by the factor `ρ` since the previous
/// outer iteration.
pub fn update_multipliers(state: &AlmState, c_nu: f64, opts: &AlmOptions) -> AlmState {
    let mut next = state.clone();
    next.lambda = state.lambda - state.sigma * c_nu;
    let shrank = match state.constraint_history.last() {
        Some(&prev) => c_nu.abs() <= opts.rho * prev,
        None => c_nu.abs() <= opts.constraint_tol,
    };
    if !shrank {
        next.sigma = state.sigma * opts.gamma;
    }
    next.outer_iter += 1;
    next.constraint_history.push(c_nu.abs());
    next
}

/// `L_A = s·J − λC + σC²/2` and its gradient, `s = −1` for efficiency, `+1` for drag.
pub fn augmented_lagrangian(
    problem: Problem,
    value: f64,
    grad: &[f64],
    c_nu: f64,
    c_grad: &[f64],
    state: &AlmState,
) -> (f64, Vec<f64>) {
    let s = problem.sign();
    let l = s * value - state.lambda * c_nu + 0.5 * state.sigma * c_nu * c_nu;
    let g = grad
        .iter()
        .zip(c_grad)
        .map(|(gj, cj)| s * gj + (state.sigma * c_nu - state.lambda) * cj)
        .collect();
    (l, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfgsOptions {
    pub g_tol: f64,
    pub max_iter: usize,
    /// Largest allowed component of a trial step.
    pub max_step: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Stop when the objective decreased by less than this (relative) over
    /// `stall_iters` consecutive iterations.
    pub f_tol: f64,
    pub stall_iters: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            g_tol: 1e-6,
            max_iter: 200,
            max_step: 0.05,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 15,
            f_tol: 1e-9,
            stall_iters: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub line_search_failed: bool,
    /// Objective after each accepted step.
    pub history: Vec<f64>,
    /// Final inverse-Hessian approximation, row-major.
    #[serde(skip)]
    pub inverse_hessian: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with backtracking line search.
///
/// `f_and_grad` failures count as `+∞` during the line search. `project` maps an
/// accepted `(x, ∇f)` to an equivalent representative (identity if `None`);
/// `on_step` observes every accepted iterate.
pub fn bfgs_minimize(
    mut f_and_grad: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    x0: &[f64],
    h0: Option<&[f64]>,
    opts: &BfgsOptions,
    project: Option<&dyn Fn(&[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)>>,
    mut on_step: impl FnMut(usize, &[f64], f64, &[f64]),
) -> Result<BfgsResult> {
    let n = x0.len();
    let (mut f, mut g) = f_and_grad(x0)?;
    let mut x = x0.to_vec();
    if let Some(p) = project {
        let (xp, gp) = p(&x, &g)?;
        x = xp;
        g = gp;
    }
    let mut evaluations = 1;
    // inverse Hessian, dense row-major
    let identity = |scale: f64| {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = scale;
        }
        h
    };
    let (mut h, mut fresh) = match h0 {
        Some(h0) if h0.len() == n * n => (h0.to_vec(), false),
        _ => (identity(1.0), true),
    };
    let mut history = vec![f];
    let mut stall = 0;
    let mut line_search_failed = false;
    let mut converged = inf_norm(&g) <= opts.g_tol;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            // not a descent direction: restart from steepest descent
            h = identity(1.0);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
        }
        let cap = inf_norm(&d);
        let mut step = if cap > opts.max_step { opts.max_step / cap } else { 1.0 };
        let first_step = step;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            evaluations += 1;
            let trial_result = f_and_grad(&trial);
            let rejected = trial_result.is_err();
            if let Err(e) = &trial_result {
                debug!("bfgs: trial rejected at step {step:.3e}: {e}");
            }
            if let Ok((ft, gt)) = trial_result {
                if ft.is_finite() && ft <= f + opts.armijo * step * slope {
                    let projected = match project {
                        Some(p) => p(&trial, &gt),
                        None => Ok((trial, gt)),
                    };
                    if let Ok((xt, gt)) = projected {
                        accepted = Some((xt, ft, gt));
                        break;
                    }
                }
            }
            // inadmissible trials back off faster
            step *= if rejected { opts.backtrack * opts.backtrack * opts.backtrack } else { opts.backtrack };
        }
        let Some((xn, fnew, gn)) = accepted else {
            debug!("bfgs: line search failed (fresh = {fresh}, slope = {slope:.3e}, |d| = {cap:.3e})");
            if fresh {
                line_search_failed = true;
                break;
            }
            // retry once from steepest descent before giving up
            h = identity(1.0);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if fresh {
                h = identity(sy / dot(&y, &y));
                fresh = false;
            }
            // H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        } else {
            // curvature condition violated: reset
            h = identity(1.0);
            fresh = true;
        }
        if step < 1e-3 * first_step {
            // quasi-Newton direction runs into a wall: restart from steepest descent
            h = identity(1.0);
            fresh = true;
        }
        iterations += 1;
        let decrease = f - fnew;
        x = xn;
        g = gn;
        f = fnew;
        history.push(f);
        on_step(iterations, &x, f, &g);
        debug!("bfgs {iterations}: f = {f:.12e}, |g| = {:.3e}, step = {step:.3e}", inf_norm(&g));
        stall = if decrease <= opts.f_tol * f.abs().max(1.0) { stall + 1 } else { 0 };
        converged = inf_norm(&g) <= opts.g_tol || stall >= opts.stall_iters;
    }
    Ok(BfgsResult {
        x,
        f,
        grad: g,
        iterations,
        evaluations,
        converged,
        line_search_failed,
        history,
        inverse_hessian: h,
    })
}

/// Smallest admitted `R/d`, `d` the distance to the nearer pole.
pub const AXIS_CHORD_MIN: f64 = 0.02;

/// Rejects meridians that self-intersect, touch or pinch onto the axis in the
/// interior, or meet the axis tangentially.
pub fn admissible(curve: &dyn Meridian) -> bool {
    inadmissibility(curve).is_none()
}

/// Reason a meridian is inadmissible, if it is.
pub fn inadmissibility(curve: &dyn Meridian) -> Option<&'static str> {
    let n = 600;
    let pts: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let p = curve.point(PI * k as f64 / n as f64);
            (p.r, p.z)
        })
        .collect();
    let scale = pts.iter().fold(0.0f64, |m, p| m.max(p.0.hypot(p.1)));
    if pts[1..n].iter().any(|p| !(p.0 > 1e-6 * scale)) {
        return Some("meridian touches the axis");
    }
    // R is bounded below by the distance to the nearer pole times the sine of a
    // minimal chord angle
    let (top, bottom) = (pts[0], pts[n]);
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    if pts[1..n]
        .iter()
        .any(|&p| p.0 < AXIS_CHORD_MIN * dist(p, top).min(dist(p, bottom)))
    {
        return Some("meridian pinches onto the axis");
    }
    if !(curve.point(0.0).dr > 0.0 && curve.point(PI).dr < 0.0) {
        return Some("meridian meets the axis tangentially");
    }
    let cross = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    for i in 0..n {
        for j in i + 2..n {
            let (p1, p2, q1, q2) = (pts[i], pts[i + 1], pts[j], pts[j + 1]);
            let d1 = cross(p1, p2, q1);
            let d2 = cross(p1, p2, q2);
            let d3 = cross(q1, q2, p1);
            let d4 = cross(q1, q2, p2);
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                return Some("meridian self-intersects");
            }
        }
    }
    None
}

/// Largest admitted [`rigid_traction_residual`].
pub const RESOLUTION_TOL: f64 = 1e-4;

/// `max|f_n + p| / max|f|` for a rigidly translating body, where `f_n + p`
/// vanishes identically; an a-posteriori indicator of quadrature resolution.
pub fn rigid_traction_residual(adjoint: &FlowSolution) -> f64 {
    let fmax = adjoint.f_n.iter().chain(&adjoint.f_tau).fold(0.0f64, |m, v| m.max(v.abs()));
    let r = adjoint.f_n.iter().zip(&adjoint.p).fold(0.0f64, |m, (f, p)| m.max((f + p).abs()));
    r / fmax
}

/// Weight of the tip barrier.
pub const BARRIER_WEIGHT: f64 = 1e-5;
/// Smallest admitted scale-free pole slope `|R′|/(Z(0) − Z(π))`.
pub const POLE_SLOPE_MIN: f64 = 2e-4;
/// Parameter length of the tip regions watched by the barrier; with
/// `TIP_SAMPLES` the samples coincide with the admissibility grid.
const TIP_SPAN: f64 = PI / 6.0;
const TIP_SAMPLES: usize = 100;

/// Tip barrier of one curve, `None` outside its domain:
/// `−w Σ ln(ρ − ρ_min)` over the scale-free pole slopes plus the mean of
/// `−w ln(q − q_min)` over the chord ratios `q = R/|P − P_pole|` sampled near
/// each tip. Keeps pointed ends away from cusps and needles while leaving the
/// rest of the shape free.
fn barrier_value(curve: &dyn Meridian) -> Option<f64> {
    let (a, b) = (curve.point(0.0), curve.point(PI));
    let extent = a.z - b.z;
    if !(extent > 0.0) {
        return None;
    }
    let mut total = 0.0;
    for slope in [a.dr / extent, -b.dr / extent] {
        if !(slope > POLE_SLOPE_MIN) {
            return None;
        }
        total -= (slope - POLE_SLOPE_MIN).ln();
    }
    let mut tips = 0.0;
    for k in 1..=TIP_SAMPLES {
        let h = TIP_SPAN * k as f64 / TIP_SAMPLES as f64;
        for (t, pole) in [(h, &a), (PI - h, &b)] {
            let p = curve.point(t);
            let q = p.r / (p.r - pole.r).hypot(p.z - pole.z);
            if !(q > AXIS_CHORD_MIN) {
                return None;
            }
            tips -= (q - AXIS_CHORD_MIN).ln();
        }
    }
    Some(BARRIER_WEIGHT * (total + tips / TIP_SAMPLES as f64))
}

/// Tip barrier and its gradient (central differences) at free parameters `x`;
/// an error outside the barrier's domain.
pub fn shape_barrier(x: &[f64], basis: &BasisSet) -> Result<(f64, Vec<f64>)> {
    let at = |x: &[f64]| -> Option<f64> { barrier_value(&GeneratingCurve::from_free_params(x, basis).ok()?) };
    let value = at(x).ok_or_else(|| SwimError::DegenerateCurve("tip outside the barrier".into()))?;
    let h = 1e-6;
    let mut e = x.to_vec();
    let grad = (0..x.len())
        .map(|j| {
            e[j] = x[j] + h;
            let up = at(&e);
            e[j] = x[j] - h;
            let down = at(&e);
            e[j] = x[j];
            match (up, down) {
                (Some(u), Some(d)) => (u - d) / (2.0 * h),
                (Some(u), None) => (u - value) / h,
                (None, Some(d)) => (value - d) / h,
                (None, None) => 0.0,
            }
        })
        .collect();
    Ok((value, grad))
}

/// Rescales to area `4π` and centers the poles on `z = 0`; returns the curve and
/// the scale factor applied.
pub fn normalize(curve: &GeneratingCurve) -> Result<(GeneratingCurve, f64)> {
    let area = crate::splinecurve::measures(curve)?.area;
    let c = (4.0 * PI / area).sqrt();
    let scaled = curve.scaled(c);
    let (top, bottom) = (scaled.point(0.0).z, scaled.point(PI).z);
    Ok((scaled.shifted_z(-0.5 * (top + bottom)), c))
}

/// Shape basis size for optimization. Finer bases let drag minimization below
/// `ν ≈ 0.9` trade area for corrugations instead of converging to the smooth
/// local optimum.
pub const OPT_N_GAMMA: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptOptions {
    pub alm: AlmOptions,
    pub bfgs: BfgsOptions,
    pub disc: Discretization,
    /// Shape basis size of the preset start curves.
    pub n_gamma: usize,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self {
            alm: AlmOptions::default(),
            bfgs: BfgsOptions::default(),
            disc: Discretization::default(),
            n_gamma: OPT_N_GAMMA,
        }
    }
}

/// State after an accepted inner step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub outer: usize,
    pub inner: usize,
    /// `E` or `J_drag`.
    pub value: f64,
    pub nu: f64,
    pub c_nu: f64,
    pub lagrangian: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub grad_norm: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptResult {
    pub problem: Problem,
    pub nu0: f64,
    pub curve: GeneratingCurve,
    /// `E` (efficiency problem) or `J_drag` (drag problem).
    pub value: f64,
    pub nu: f64,
    /// Slip optimum of the final shape (both problems).
    pub report: EfficiencyReport,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub inner_failures: usize,
    pub state: AlmState,
    pub snapshots: Vec<Snapshot>,
}

/// Objective value, `ν`, and both gradients at free parameters `x`.
pub struct Evaluated {
    pub value: f64,
    pub nu: f64,
    pub grad: Vec<f64>,
    pub nu_grad: Vec<f64>,
    pub barrier: f64,
    pub barrier_grad: Vec<f64>,
}

impl Evaluated {
    /// `L_A` plus the pole barrier, and its gradient.
    pub fn lagrangian(&self, problem: Problem, nu0: f64, state: &AlmState) -> (f64, Vec<f64>) {
        let (l, mut g) = augmented_lagrangian(problem, self.value, &self.grad, self.nu - nu0, &self.nu_grad, state);
        g.iter_mut().zip(&self.barrier_grad).for_each(|(a, b)| *a += b);
        (l + self.barrier, g)
    }
}

pub fn evaluate(
    problem: Problem,
    x: &[f64],
    basis: &BasisSet,
    disc: &Discretization,
    resolution_tol: f64,
) -> Result<Evaluated> {
    let curve = GeneratingCurve::from_free_params(x, basis)?;
    if let Some(why) = inadmissibility(&curve) {
        return Err(SwimError::DegenerateCurve(why.into()));
    }
    let (barrier, barrier_grad) = shape_barrier(x, basis)?;
    let ev = ShapeEvaluation::new(&curve, disc, problem == Problem::MaxEfficiency)?;
    if !(ev.f0 > 0.0) {
        return Err(SwimError::NonFinite("non-positive drag"));
    }
    let residual = rigid_traction_residual(&ev.adjoint);
    if !(residual <= resolution_tol) {
        return Err(SwimError::DegenerateCurve(format!(
            "shape under-resolved: rigid-body traction residual {residual:.2e}"
        )));
    }
    let objective = problem.objective();
    Ok(Evaluated {
        value: ev.value(objective)?,
        nu: ev.measures.reduced_volume,
        grad: ev.gradient(objective)?.values,
        nu_grad: ev.gradient(Objective::ReducedVolume)?.values,
        barrier,
        barrier_grad,
    })
}

/// Objective value and `ν` at `x`, without admissibility guards or gradients.
struct Values {
    value: f64,
    nu: f64,
}

fn values_at(problem: Problem, x: &[f64], basis: &BasisSet, disc: &Discretization) -> Result<Values> {
    let curve = GeneratingCurve::from_free_params(x, basis)?;
    let ev = ShapeEvaluation::new(&curve, disc, problem == Problem::MaxEfficiency)?;
    Ok(Values {
        value: ev.value(problem.objective())?,
        nu: ev.measures.reduced_volume,
    })
}

/// Runs the augmented-Lagrangian/BFGS loop for `problem` at reduced volume `nu0`.
pub fn optimize_shape(
    problem: Problem,
    init: &GeneratingCurve,
    nu0: f64,
    opts: &OptOptions,
    mut on_snapshot: impl FnMut(&Snapshot),
) -> Result<OptResult> {
    if !(nu0 > 0.0 && nu0 <= 1.0) {
        return Err(SwimError::InvalidArgument(format!("reduced volume {nu0} not in (0, 1]")));
    }
    if nu0 >= 1.0 - 1e-12 {
        // the sphere is the only shape with ν = 1
        let sphere = normalize(&GeneratingCurve::fit(&AnalyticCurve::Sphere { radius: 1.0 }, init.n_gamma())?)?.0;
        return finish(problem, nu0, sphere, 0, 0, 0, true, 0, AlmState::new(&opts.alm), Vec::new(), &opts.disc);
    }
    let basis = init.basis;
    let (start, _) = normalize(init)?;
    let mut x = start.free_params();
    // trial shapes may not be resolved worse than the start shape
    let resolution_tol = {
        let bie = BieProblem::new(&start, &opts.disc)?;
        let (adjoint, _) = crate::stokes_bie::solve_adjoint(&bie)?;
        RESOLUTION_TOL.max(2.0 * rigid_traction_residual(&adjoint))
    };
    let mut state = AlmState::new(&opts.alm);
    if opts.alm.lambda0.is_none() {
        let e = evaluate(problem, &x, &basis, &opts.disc, f64::INFINITY)?;
        let cc = dot(&e.nu_grad, &e.nu_grad);
        if cc > 0.0 {
            state.lambda = problem.sign() * dot(&e.grad, &e.nu_grad) / cc;
        }
    }
    let mut snapshots = Vec::new();
    let mut inner_total = 0;
    let mut evaluations = 0;
    let mut inner_failures = 0;
    let mut converged = false;
    let mut hessian: Option<Vec<f64>> = None;

    let project = |x: &[f64], g: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let (c, s) = normalize(&GeneratingCurve::from_free_params(x, &basis)?)?;
        Ok((c.free_params(), g.iter().map(|v| v / s).collect()))
    };

    while state.outer_iter < opts.alm.max_outer {
        let st = state.clone();
        let mut f_and_grad = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            evaluate(problem, x, &basis, &opts.disc, resolution_tol).map(|e| e.lagrangian(problem, nu0, &st))
        };
        let mut steps = Vec::new();
        // inner tolerance tightens with the outer iteration
        let inner = BfgsOptions {
            g_tol: (opts.alm.inner_tol0 * 0.1f64.powi(state.outer_iter as i32)).max(opts.bfgs.g_tol),
            ..opts.bfgs
        };
        let res = match bfgs_minimize(&mut f_and_grad, &x, hessian.as_deref(), &inner, Some(&project), |k, xk, f, g| {
            steps.push((k, xk.to_vec(), f, inf_norm(g)));
        }) {
            Ok(r) => r,
            Err(e) => {
                warn!("inner run aborted: {e}");
                inner_failures += 1;
                break;
            }
        };
        // the closure's last evaluation is not necessarily the accepted point;
        // accepted points passed the guards already
        let final_eval = values_at(problem, &res.x, &basis, &opts.disc)?;
        evaluations += res.evaluations + 1;
        inner_total += res.iterations;
        if !res.converged {
            inner_failures += 1;
        }
        for (k, xk, f, gn) in steps {
            let snap = Snapshot {
                outer: state.outer_iter,
                inner: k,
                value: f64::NAN,
                nu: f64::NAN,
                c_nu: f64::NAN,
                lagrangian: f,
                lambda: st.lambda,
                sigma: st.sigma,
                grad_norm: gn,
                params: xk,
            };
            snapshots.push(snap);
        }
        let c = final_eval.nu - nu0;
        let snap = Snapshot {
            outer: state.outer_iter,
            inner: res.iterations,
            value: final_eval.value,
            nu: final_eval.nu,
            c_nu: c,
            lagrangian: res.f,
            lambda: st.lambda,
            sigma: st.sigma,
            grad_norm: inf_norm(&res.grad),
            params: res.x.clone(),
        };
        info!(
            "outer {}: value = {:.6}, nu = {:.8}, |C| = {:.2e}, |grad| = {:.2e}, inner = {}, lambda = {:.4e}, sigma = {:.1e}",
            state.outer_iter,
            final_eval.value,
            final_eval.nu,
            c.abs(),
            snap.grad_norm,
            res.iterations,
            st.lambda,
            st.sigma
        );
        on_snapshot(&snap);
        snapshots.push(snap);
        x = res.x;
        hessian = Some(res.inverse_hessian);
        state = update_multipliers(&state, c, &opts.alm);
        let final_tol = inner.g_tol <= opts.bfgs.g_tol;
        if c.abs() <= opts.alm.constraint_tol && final_tol && (res.converged || res.line_search_failed) {
            converged = true;
            break;
        }
        if res.iterations == 0 && res.line_search_failed {
            // no admissible descent at all: further penalty growth cannot help
            break;
        }
    }

    let curve = GeneratingCurve::from_free_params(&x, &basis)?;
    let outer = state.outer_iter;
    finish(problem, nu0, curve, outer, inner_total, evaluations, converged, inner_failures, state, snapshots, &opts.disc)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: Problem,
    nu0: f64,
    curve: GeneratingCurve,
    outer_iterations: usize,
    inner_iterations: usize,
    evaluations: usize,
    converged: bool,
    inner_failures: usize,
    state: AlmState,
    snapshots: Vec<Snapshot>,
    disc: &Discretization,
) -> Result<OptResult> {
    let bie = BieProblem::new(&curve, disc)?;
    let report = optimal_slip(&bie, false)?.report;
    let value = match problem {
        Problem::MaxEfficiency => report.e,
        Problem::MinDrag => report.j_drag,
    };
    Ok(OptResult {
        problem,
        nu0,
        nu: report.nu,
        curve,
        value,
        report,
        outer_iterations,
        inner_iterations,
        evaluations,
        converged,
        inner_failures,
        state,
        snapshots,
    })
}

/// Initial-shape library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialShape {
    Sphere,
    /// Prolate spheroid with the target reduced volume.
    Spheroid,
    /// Two-lobed body with the target reduced volume.
    Peanut,
    /// Samples `(t, R, Z)`, e.g. read from a curve CSV.
    Samples(Vec<(f64, f64, f64)>),
    /// Result of a drag minimization at the target reduced volume, started from the
    /// spheroid.
    MinDrag,
}

/// Builds the spline start curve for `shape` at reduced volume `nu0`.
pub fn initial_curve(shape: &InitialShape, nu0: f64, opts: &OptOptions) -> Result<GeneratingCurve> {
    let n_gamma = opts.n_gamma;
    let curve = match shape {
        InitialShape::Sphere => GeneratingCurve::fit(&AnalyticCurve::Sphere { radius: 1.0 }, n_gamma)?,
        InitialShape::Spheroid => {
            let a = spheroid_aspect_for_nu(nu0)?;
            GeneratingCurve::fit(&AnalyticCurve::Spheroid { a, b: 1.0 }, n_gamma)?
        }
        InitialShape::Peanut => GeneratingCurve::fit(&peanut_for_nu(nu0)?, n_gamma)?,
        InitialShape::Samples(s) => {
            let basis = build_basis(n_gamma.saturating_sub(5), PI)?;
            GeneratingCurve::fit_samples(s, &basis)?
        }
        InitialShape::MinDrag => {
            let start = initial_curve(&InitialShape::Spheroid, nu0, opts)?;
            optimize_shape(Problem::MinDrag, &start, nu0, opts, |_| {})?.curve
        }
    };
    Ok(normalize(&curve)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic_bowl() {
        let a = [1.0, -2.0, 0.5, 3.0];
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let g: Vec<f64> = x.iter().zip(&a).map(|(x, a)| 2.0 * (x - a)).collect();
            Ok((x.iter().zip(&a).map(|(x, a)| (x - a).powi(2)).sum(), g))
        };
        let opts = BfgsOptions {
            max_step: 10.0,
            ..Default::default()
        };
        let r = bfgs_minimize(f, &[0.0; 4], None, &opts, None, |_, _, _, _| {}).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= a.len() + 2, "{}", r.iterations);
        for (x, a) in r.x.iter().zip(&a) {
            assert!((x - a).abs() < 1e-6);
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let opts = BfgsOptions {
            max_step: 1.0,
            g_tol: 1e-10,
            max_iter: 500,
            f_tol: 0.0,
            ..Default::default()
        };
        let mut last = f64::INFINITY;
        let r = bfgs_minimize(f, &[-1.2, 1.0], None, &opts, None, |_, _, fk, _| {
            assert!(fk <= last);
            last = fk;
        })
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn failed_evaluations_are_rejected() {
        // f undefined for x < 0.5: the line search must back off
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            if x[0] < 0.5 {
                return Err(SwimError::NonFinite("test"));
            }
            Ok((x[0] * x[0], vec![2.0 * x[0]]))
        };
        let r = bfgs_minimize(f, &[2.0], None, &BfgsOptions::default(), None, |_, _, _, _| {}).unwrap();
        assert!(r.x[0] >= 0.5 && r.x[0] < 0.6, "{:?}", r);
    }

    #[test]
    fn multiplier_rules() {
        let opts = AlmOptions::default();
        let s0 = AlmState::new(&opts);
        let s1 = update_multipliers(&s0, 0.0, &opts);
        assert_eq!(s1.lambda, 0.0);
        assert_eq!(s1.sigma, opts.sigma0);
        let s2 = update_multipliers(&s0, 0.1, &opts);
        assert_eq!(s2.sigma, opts.sigma0 * opts.gamma);
        assert!((s2.lambda + opts.sigma0 * 0.1).abs() < 1e-15);
        // shrink by 10×: σ unchanged, λ updated
        let s3 = update_multipliers(&s2, 0.01, &opts);
        assert_eq!(s3.sigma, s2.sigma);
        assert!((s3.lambda - (s2.lambda - s2.sigma * 0.01)).abs() < 1e-15);
        // stagnation escalates
        let s4 = update_multipliers(&s3, 0.009, &opts);
        assert_eq!(s4.sigma, s3.sigma * opts.gamma);
    }

    #[test]
    fn alm_solves_toy_constrained_quadratic() {
        // min (x−2)² + (y−1)² s.t. x + y = 1 → (1, 0), ∇f = λ∇C gives λ = −2
        let opts = AlmOptions {
            sigma0: 10.0,
            lambda0: Some(0.0),
            ..Default::default()
        };
        let mut st = AlmState::new(&opts);
        let mut x = vec![0.0, 0.0];
        let bopts = BfgsOptions {
            max_step: 10.0,
            g_tol: 1e-10,
            f_tol: 0.0,
            ..Default::default()
        };
        for _ in 0..opts.max_outer {
            let s = st.clone();
            let f = |v: &[f64]| -> Result<(f64, Vec<f64>)> {
                let val = (v[0] - 2.0).powi(2) + (v[1] - 1.0).powi(2);
                let g = [2.0 * (v[0] - 2.0), 2.0 * (v[1] - 1.0)];
                let c = v[0] + v[1] - 1.0;
                Ok(augmented_lagrangian(Problem::MinDrag, val, &g, c, &[1.0, 1.0], &s))
            };
            x = bfgs_minimize(f, &x, None, &bopts, None, |_, _, _, _| {}).unwrap().x;
            let c = x[0] + x[1] - 1.0;
            st = update_multipliers(&st, c, &opts);
            if c.abs() < 1e-9 {
                break;
            }
        }
        assert!((x[0] - 1.0).abs() < 1e-6 && x[1].abs() < 1e-6, "{x:?}");
        assert!((st.lambda + 2.0).abs() < 1e-5, "{}", st.lambda);
    }

    #[test]
    fn lagrangian_reduces_to_objective() {
        let st = AlmState {
            lambda: 0.3,
            sigma: 10.0,
            outer_iter: 0,
            constraint_history: vec![],
        };
        let (l, g) = augmented_lagrangian(Problem::MaxEfficiency, 2.0, &[1.0, 2.0], 0.0, &[5.0, 5.0], &st);
        assert_eq!(l, -2.0);
        assert_eq!(g, vec![-1.0 + -0.3 * 5.0, -2.0 + -0.3 * 5.0]);
        let st0 = AlmState {
            lambda: 0.0,
            sigma: 0.0,
            ..st
        };
        let (l, _) = augmented_lagrangian(Problem::MinDrag, 1.5, &[0.0], 0.2, &[1.0], &st0);
        assert_eq!(l, 1.5);
    }

    #[test]
    fn admissibility_and_normalization() {
        let sphere = GeneratingCurve::fit(&AnalyticCurve::Sphere { radius: 2.0 }, 24).unwrap();
        assert!(admissible(&sphere));
        let (n, c) = normalize(&sphere.shifted_z(0.7)).unwrap();
        assert!((c - 0.5).abs() < 1e-8);
        let m = crate::splinecurve::measures(&n).unwrap();
        assert!((m.area - 4.0 * PI).abs() < 1e-10);
        assert!((n.point(0.0).z + n.point(PI).z).abs() < 1e-12);
        assert!(!admissible(&AnalyticCurve::Peanut { beta: 1.2 }));
    }

    #[test]
    fn lagrangian_gradient_matches_finite_differences() {
        let curve = initial_curve(&InitialShape::Peanut, 0.7, &OptOptions::default()).unwrap();
        let disc = Discretization::default();
        let st = AlmState {
            lambda: 0.4,
            sigma: 10.0,
            outer_iter: 0,
            constraint_history: vec![],
        };
        let la = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            Ok(evaluate(Problem::MaxEfficiency, x, &curve.basis, &disc, RESOLUTION_TOL)?.lagrangian(Problem::MaxEfficiency, 0.65, &st))
        };
        let x = curve.free_params();
        let dir = crate::shape_sens::reference_directions(&curve.basis).unwrap().remove(0).1;
        let (_, g) = la(&x).unwrap();
        let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let r = crate::shape_sens::fd_check(|x| Ok(la(x)?.0), &x, &dir, 1e-3, analytic).unwrap();
        assert!(r.rel_err < 1e-4, "{r:?}");
    }

    #[test]
    fn reduced_volume_is_stationary_at_sphere() {
        let opts = OptOptions::default();
        let init = initial_curve(&InitialShape::Sphere, 1.0, &opts).unwrap();
        let ev = ShapeEvaluation::new(&init, &opts.disc, true).unwrap();
        let g = ev.gradient(Objective::ReducedVolume).unwrap();
        assert!(inf_norm(&g.values) < 1e-6, "{}", inf_norm(&g.values));
        assert!((ev.value(Objective::Efficiency).unwrap() - 0.5).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn normalization_fixes_area_and_center(a in 0.7f64..3.0, c in 0.3f64..4.0, dz in -3.0f64..3.0) {
            let s = GeneratingCurve::fit(&AnalyticCurve::Spheroid { a, b: 1.0 }, 16).unwrap();
            let (n, scale) = normalize(&s.scaled(c).shifted_z(dz)).unwrap();
            let m = crate::splinecurve::measures(&n).unwrap();
            prop_assert!((m.area - 4.0 * PI).abs() < 1e-10);
            prop_assert!((n.point(0.0).z + n.point(PI).z).abs() < 1e-10);
            prop_assert!(scale > 0.0);
            let (again, s2) = normalize(&n).unwrap();
            prop_assert!((s2 - 1.0).abs() < 1e-12);
            prop_assert!(again.free_params().iter().zip(n.free_params()).all(|(x, y)| (x - y).abs() < 1e-12));
        }

        #[test]
        fn augmented_lagrangian_gradient_is_consistent(
            v in -2.0f64..2.0, c in -0.1f64..0.1, lambda in -5.0f64..5.0, sigma in 1.0f64..1e4,
        ) {
            let st = AlmState { lambda, sigma, outer_iter: 0, constraint_history: vec![] };
            // one-dimensional model J = v x, C = c + x, differentiated at x = 0
            let f = |x: f64| augmented_lagrangian(Problem::MinDrag, v * x, &[v], c + x, &[1.0], &st).0;
            let g = augmented_lagrangian(Problem::MinDrag, 0.0, &[v], c, &[1.0], &st).1[0];
            let h = 1e-6;
            prop_assert!(((f(h) - f(-h)) / (2.0 * h) - g).abs() < 1e-6 * (1.0 + sigma));
        }
    }
}
