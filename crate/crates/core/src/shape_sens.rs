//! Analytic shape derivatives of the geometric and flow functionals, objective
//! gradients with respect to the free spline parameters, and a central-difference
//! checker.
//!
//! Every flow derivative is a boundary integral of the nodal solution fields against
//! the normal transformation velocity `θ_n` (and, for convected-slip formulas, the
//! tangential one `θ_τ`); no solution derivative is ever needed.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwimError};
use crate::functionals::{normalized_drag, optimal_slip, SlipOptimum};
use crate::splinecurve::{
    perturbation_field, BasisSet, GeneratingCurve, Measures, Meridian, ShapePerturbation,
};
use crate::stokes_bie::{solve_adjoint, BieProblem, Discretization, FlowSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    Efficiency,
    Drag,
    ReducedVolume,
    JW,
    U,
    F0,
}

/// Directional derivatives along each free-parameter basis direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeGradient {
    pub objective: Objective,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureDerivatives {
    pub volume: f64,
    pub area: f64,
    pub reduced_volume: f64,
}

/// `2π ∫ g R dt` by the grid rule.
fn meridian_integral(problem: &BieProblem, g: impl Fn(usize) -> f64) -> f64 {
    let geom = &problem.geom;
    2.0 * PI * (0..problem.len()).map(|i| geom.grid.w[i] * geom.r[i] * g(i)).sum::<f64>()
}

fn check_len(problem: &BieProblem, pert: &ShapePerturbation) -> Result<()> {
    if pert.len() != problem.len() {
        return Err(SwimError::DimensionMismatch {
            expected: problem.len(),
            got: pert.len(),
        });
    }
    Ok(())
}

/// `V′ = −2π∫θ_n Rα dt`, `A′ = 2π∫(Z′ − κRα)θ_n dt`, `ν′ = ν(V′/V − 3A′/2A)`.
pub fn d_measures(problem: &BieProblem, pert: &ShapePerturbation) -> Result<MeasureDerivatives> {
    check_len(problem, pert)?;
    let g = &problem.geom;
    let m = g.measures();
    let dv = -meridian_integral(problem, |i| pert.theta_n[i] * g.alpha[i]);
    let da = 2.0
        * PI
        * (0..g.len())
            .map(|i| g.grid.w[i] * (g.dz[i] - g.kappa[i] * g.r[i] * g.alpha[i]) * pert.theta_n[i])
            .sum::<f64>();
    Ok(MeasureDerivatives {
        volume: dv,
        area: da,
        reduced_volume: m.reduced_volume * (dv / m.volume - 1.5 * da / m.area),
    })
}

/// `F0′ = −(2π/μ)∫ f̂_τ² θ_n R α dt`.
pub fn d_f0(problem: &BieProblem, adjoint: &FlowSolution, pert: &ShapePerturbation) -> Result<f64> {
    check_len(problem, pert)?;
    let g = &problem.geom;
    Ok(-meridian_integral(problem, |i| adjoint.f_tau[i].powi(2) * pert.theta_n[i] * g.alpha[i])
        / problem.mu())
}

/// Power-loss derivative for a slip convected by the perturbation; `d_slip` holds
/// nodal `(u^S)′`.
pub fn d_jw(
    problem: &BieProblem,
    forward: &FlowSolution,
    d_slip: &[f64],
    pert: &ShapePerturbation,
) -> Result<f64> {
    check_len(problem, pert)?;
    let g = &problem.geom;
    let mu = problem.mu();
    let (f_tau, f_n, p, u) = (&forward.f_tau, &forward.f_n, &forward.p, &forward.slip);
    Ok(meridian_integral(problem, |i| {
        let strain = g.dr[i] * u[i] * d_slip[i] / (g.r[i] * g.alpha[i] * g.alpha[i]);
        let bracket = -4.0 * mu * strain - f_tau[i] * f_tau[i] / mu
            + (f_n[i] + p[i]) * p[i] / mu
            + 2.0 * g.kappa[i] * u[i] * f_tau[i];
        bracket * g.alpha[i] * pert.theta_n[i] - 2.0 * f_tau[i] * d_slip[i] * pert.theta_tau[i]
            + 2.0 * u[i] * f_n[i] * pert.d_theta_n[i]
    }))
}

/// Swim-speed derivative for a slip convected by the perturbation.
pub fn d_u(
    problem: &BieProblem,
    forward: &FlowSolution,
    adjoint: &FlowSolution,
    f0: f64,
    d_slip: &[f64],
    pert: &ShapePerturbation,
) -> Result<f64> {
    check_len(problem, pert)?;
    let g = &problem.geom;
    let mu = problem.mu();
    let (f_tau, f_n, p, u) = (&forward.f_tau, &forward.f_n, &forward.p, &forward.slip);
    let (hf, hp) = (&adjoint.f_tau, &adjoint.p);
    let integral = meridian_integral(problem, |i| {
        let bracket = g.kappa[i] * u[i] * hf[i] - f_tau[i] * hf[i] / mu
            + 0.5 * (f_n[i] + p[i]) * hp[i] / mu;
        bracket * g.alpha[i] * pert.theta_n[i] - hf[i] * d_slip[i] * pert.theta_tau[i]
            - u[i] * hp[i] * pert.d_theta_n[i]
    });
    Ok(-integral / f0)
}

/// `J_drag′ = J_drag (F0′/F0 − V′/3V)`.
pub fn d_drag(
    problem: &BieProblem,
    adjoint: &FlowSolution,
    f0: f64,
    pert: &ShapePerturbation,
) -> Result<f64> {
    let df0 = d_f0(problem, adjoint, pert)?;
    let dm = d_measures(problem, pert)?;
    let v = problem.geom.measures().volume;
    Ok(normalized_drag(problem, f0) * (df0 / f0 - dm.volume / (3.0 * v)))
}

/// Derivative of the maximal efficiency; depends on `θ_n` only.
pub fn d_efficiency(problem: &BieProblem, opt: &SlipOptimum, pert: &ShapePerturbation) -> Result<f64> {
    check_len(problem, pert)?;
    let g = &problem.geom;
    let mu = problem.mu();
    let (f0, u) = (opt.report.f0, opt.report.u);
    let (z, dz) = (&opt.report.z_s, &opt.dz_s);
    let (hf, hp) = (&opt.adjoint.f_tau, &opt.adjoint.p);
    let (tn, tp) = (&opt.auxiliary.f_n, &opt.auxiliary.p);
    let integral = meridian_integral(problem, |i| {
        let strain = g.dr[i] * z[i] * dz[i] / (g.r[i] * g.alpha[i] * g.alpha[i]);
        let bracket = -4.0 * mu * strain
            + (tn[i] + tp[i]) * (tp[i] - hp[i]) / mu
            + (1.0 + u) * hf[i] * hf[i] / mu;
        2.0 * z[i] * (tn[i] + hp[i]) * pert.d_theta_n[i] + bracket * g.alpha[i] * pert.theta_n[i]
    });
    Ok(-integral / (f0 * (1.0 + u).powi(2)))
}

/// Forward solution at the optimal slip reconstructed from the adjoint and
/// auxiliary fields: `f_τ = (1+U) f̂_τ`, `f_n = f̃_n − U p̂`, `p = p̃ + U p̂`.
pub fn optimal_forward(opt: &SlipOptimum) -> FlowSolution {
    let u = opt.report.u;
    let (hat, aux) = (&opt.adjoint, &opt.auxiliary);
    let mut fw = aux.clone();
    fw.kind = crate::stokes_bie::FlowKind::Forward;
    fw.u = u;
    fw.slip = opt.report.z_s.clone();
    fw.f_tau = hat.f_tau.iter().map(|v| (1.0 + u) * v).collect();
    fw.f_n = aux.f_n.iter().zip(&hat.p).map(|(a, b)| a - u * b).collect();
    fw.p = aux.p.iter().zip(&hat.p).map(|(a, b)| a + u * b).collect();
    fw
}

/// Efficiency derivative through `(J_D′ − E J_W′)/J_W` with the convected-slip
/// formulas; an independent route to [`d_efficiency`].
pub fn d_efficiency_dual(problem: &BieProblem, opt: &SlipOptimum, pert: &ShapePerturbation) -> Result<f64> {
    let r = &opt.report;
    let fw = optimal_forward(opt);
    let dz = &opt.dz_s;
    let dfo = d_f0(problem, &opt.adjoint, pert)?;
    let du = d_u(problem, &fw, &opt.adjoint, r.f0, dz, pert)?;
    let djw = d_jw(problem, &fw, dz, pert)?;
    let djd = dfo * r.u * r.u + 2.0 * r.f0 * r.u * du;
    Ok((djd - r.e * djw) / r.j_w)
}

/// Adjoint (and, for efficiency objectives, auxiliary) solutions of one shape,
/// with everything needed for values and gradients.
#[derive(Debug, Clone)]
pub struct ShapeEvaluation {
    pub curve: GeneratingCurve,
    pub problem: BieProblem,
    pub adjoint: FlowSolution,
    pub f0: f64,
    pub optimum: Option<SlipOptimum>,
    pub measures: Measures,
    pub j_drag: f64,
}

impl ShapeEvaluation {
    pub fn new(curve: &GeneratingCurve, disc: &Discretization, with_efficiency: bool) -> Result<Self> {
        let problem = BieProblem::new(curve, disc)?;
        let (adjoint, f0, optimum) = if with_efficiency {
            let opt = optimal_slip(&problem, false)?;
            (opt.adjoint.clone(), opt.report.f0, Some(opt))
        } else {
            let (a, f0) = solve_adjoint(&problem)?;
            (a, f0, None)
        };
        let measures = problem.geom.measures();
        let j_drag = normalized_drag(&problem, f0);
        Ok(Self {
            curve: curve.clone(),
            problem,
            adjoint,
            f0,
            optimum,
            measures,
            j_drag,
        })
    }

    fn optimum(&self) -> Result<&SlipOptimum> {
        self.optimum
            .as_ref()
            .ok_or_else(|| SwimError::InvalidArgument("efficiency requires the slip optimum".into()))
    }

    pub fn value(&self, objective: Objective) -> Result<f64> {
        Ok(match objective {
            Objective::Efficiency => self.optimum()?.report.e,
            Objective::Drag => self.j_drag,
            Objective::ReducedVolume => self.measures.reduced_volume,
            Objective::JW => self.optimum()?.report.j_w,
            Objective::U => self.optimum()?.report.u,
            Objective::F0 => self.f0,
        })
    }

    /// Directional derivative along a given perturbation.
    pub fn derivative(&self, objective: Objective, pert: &ShapePerturbation) -> Result<f64> {
        let p = &self.problem;
        match objective {
            Objective::Efficiency => d_efficiency(p, self.optimum()?, pert),
            Objective::Drag => d_drag(p, &self.adjoint, self.f0, pert),
            Objective::ReducedVolume => Ok(d_measures(p, pert)?.reduced_volume),
            Objective::F0 => d_f0(p, &self.adjoint, pert),
            Objective::JW | Objective::U => {
                // optimal slip held fixed (convected)
                let opt = self.optimum()?;
                let fw = optimal_forward(opt);
                if objective == Objective::JW {
                    d_jw(p, &fw, &opt.dz_s, pert)
                } else {
                    d_u(p, &fw, &self.adjoint, self.f0, &opt.dz_s, pert)
                }
            }
        }
    }

    /// Perturbation generated by a free-parameter direction.
    pub fn perturbation(&self, direction: &[f64]) -> Result<ShapePerturbation> {
        perturbation_field(direction, &self.curve, &self.problem.geom)
    }

    /// Gradient with respect to the free spline parameters.
    pub fn gradient(&self, objective: Objective) -> Result<ShapeGradient> {
        let m = self.curve.free_dof();
        let values = (0..m)
            .into_par_iter()
            .map(|k| {
                let mut e = vec![0.0; m];
                e[k] = 1.0;
                self.derivative(objective, &self.perturbation(&e)?)
            })
            .collect::<Result<_>>()?;
        Ok(ShapeGradient { objective, values })
    }
}

/// Gradient of one objective at a shape (convenience wrapper).
pub fn gradient_vector(eval: &ShapeEvaluation, objective: Objective) -> Result<ShapeGradient> {
    eval.gradient(objective)
}

/// Free-parameter direction reproducing a meridian displacement `(δR, δZ)(t)` in the
/// least-squares sense, scaled to unit maximal displacement.
pub fn smooth_direction(basis: &BasisSet, field: impl Fn(f64) -> (f64, f64)) -> Result<Vec<f64>> {
    let n = 40 * basis.basis_count();
    let samples: Vec<(f64, f64, f64)> = (0..=n)
        .map(|k| {
            let t = PI * k as f64 / n as f64;
            let (r, z) = field(t);
            (t, r, z)
        })
        .collect();
    let fitted = GeneratingCurve::fit_samples(&samples, basis)?;
    let peak = (0..=n)
        .map(|k| {
            let p = fitted.point(PI * k as f64 / n as f64);
            p.r.hypot(p.z)
        })
        .fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(SwimError::InvalidArgument("zero displacement field".into()));
    }
    Ok(fitted.free_params().iter().map(|v| v / peak).collect())
}

/// Low-mode displacement `δR = Σ a_k sin kt`, `δZ = Σ b_k cos kt`, `k = 1..=m` with
/// `coeffs = [a_1..a_m, b_1..b_m]`.
pub fn modal_direction(basis: &BasisSet, coeffs: &[f64]) -> Result<Vec<f64>> {
    let m = coeffs.len() / 2;
    smooth_direction(basis, |t| {
        (1..=m).fold((0.0, 0.0), |(r, z), k| {
            let kt = k as f64 * t;
            (r + coeffs[k - 1] * kt.sin(), z + coeffs[m + k - 1] * kt.cos())
        })
    })
}

/// Three qualitatively distinct test directions: axial elongation with slimming, a
/// fore–aft asymmetric swelling, and a fore–aft symmetric corrugation.
pub fn reference_directions(basis: &BasisSet) -> Result<Vec<(&'static str, Vec<f64>)>> {
    Ok(vec![
        ("elongation", smooth_direction(basis, |t| (-0.3 * t.sin(), t.cos()))?),
        ("asymmetric", smooth_direction(basis, |t| (t.sin() * (1.0 + t.cos()), 0.0))?),
        ("corrugation", smooth_direction(basis, |t| (t.sin() * (4.0 * t).cos(), 0.0))?),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdCheck {
    pub analytic: f64,
    pub fd: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

/// Central difference `[J(ξ+ηζ) − J(ξ−ηζ)]/2η` compared with an analytic value.
pub fn fd_check(
    objective: impl Fn(&[f64]) -> Result<f64>,
    params: &[f64],
    direction: &[f64],
    eta: f64,
    analytic: f64,
) -> Result<FdCheck> {
    if !(eta > 0.0) {
        return Err(SwimError::InvalidArgument(format!("step must be positive, got {eta}")));
    }
    if params.len() != direction.len() {
        return Err(SwimError::DimensionMismatch {
            expected: params.len(),
            got: direction.len(),
        });
    }
    let shifted = |s: f64| -> Vec<f64> { params.iter().zip(direction).map(|(x, d)| x + s * d).collect() };
    let plus = objective(&shifted(eta))?;
    let minus = objective(&shifted(-eta))?;
    let fd = (plus - minus) / (2.0 * eta);
    let abs_err = (analytic - fd).abs();
    Ok(FdCheck {
        analytic,
        fd,
        abs_err,
        rel_err: abs_err / fd.abs().max(f64::MIN_POSITIVE),
    })
}
