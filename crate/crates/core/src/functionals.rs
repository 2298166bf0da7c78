//! Scalar objectives: power losses, efficiency, normalized drag, and the optimal
//! slip of a fixed shape.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwimError};
use crate::stokes_bie::{solve_adjoint, solve_auxiliary, BieProblem, FlowSolution, ForwardSolver};

/// Summary of the slip optimum on one shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    /// Maximal efficiency.
    pub e: f64,
    /// Swim speed produced by the optimal slip.
    pub u: f64,
    /// Optimal slip at the grid nodes.
    pub z_s: Vec<f64>,
    pub j_w: f64,
    pub j_d: f64,
    pub f0: f64,
    pub j_drag: f64,
    pub nu: f64,
    pub volume: f64,
    pub area: f64,
    /// `|J_D/J_W − E|/E` from an independent forward solve at `z^S`, if requested.
    pub rayleigh_discrepancy: Option<f64>,
}

/// Adjoint and auxiliary solutions behind an [`EfficiencyReport`]; everything the
/// shape derivatives need.
#[derive(Debug, Clone)]
pub struct SlipOptimum {
    pub report: EfficiencyReport,
    /// Nodal `(z^S)′`.
    pub dz_s: Vec<f64>,
    pub adjoint: FlowSolution,
    pub auxiliary: FlowSolution,
}

/// `J_W = ⟨f_τ, u^S⟩_Γ`.
pub fn power_loss(problem: &BieProblem, forward: &FlowSolution) -> f64 {
    problem.dot(&forward.f_tau, &forward.slip)
}

/// `J_D = F0 U²`.
pub fn towing_power(f0: f64, u: f64) -> f64 {
    f0 * u * u
}

/// `J_E = J_D/J_W`.
pub fn efficiency(j_d: f64, j_w: f64) -> Result<f64> {
    if !(j_w > 0.0) {
        return Err(SwimError::UndefinedEfficiency(j_w));
    }
    Ok(j_d / j_w)
}

/// `F0/(6πμ r)` with `r` the radius of the sphere of equal volume.
pub fn normalized_drag(problem: &BieProblem, f0: f64) -> f64 {
    let v = problem.geom.measures().volume;
    f0 / (6.0 * PI * problem.mu() * (3.0 * v / (4.0 * PI)).cbrt())
}

/// Efficiency of an arbitrary slip, `J_D/J_W` from one forward solve.
pub fn rayleigh_quotient(
    problem: &BieProblem,
    solver: &ForwardSolver,
    f0: f64,
    slip: &[f64],
) -> Result<f64> {
    let fw = solver.solve(slip)?;
    efficiency(towing_power(f0, fw.u), power_loss(problem, &fw))
}

/// Optimal slip of a fixed shape from the adjoint and auxiliary solves.
pub fn optimal_slip(problem: &BieProblem, cross_check: bool) -> Result<SlipOptimum> {
    let (adjoint, f0) = solve_adjoint(problem)?;
    let auxiliary = solve_auxiliary(problem, &adjoint)?;
    let z_s = auxiliary.u_tau.clone();
    let u = -problem.dot(&adjoint.f_tau, &z_s) / f0;
    if !(u > -1.0 && u <= 0.0) {
        return Err(SwimError::SwimSpeedOutOfRange(u));
    }
    let e = -u / (1.0 + u);
    let j_d = towing_power(f0, u);
    let j_w = -f0 * u * (1.0 + u);
    let rayleigh_discrepancy = if cross_check {
        let q = rayleigh_quotient(problem, &ForwardSolver::new(problem), f0, &z_s)?;
        Some((q - e).abs() / e.max(f64::MIN_POSITIVE))
    } else {
        None
    };
    let m = problem.geom.measures();
    let report = EfficiencyReport {
        e,
        u,
        z_s,
        j_w,
        j_d,
        f0,
        j_drag: normalized_drag(problem, f0),
        nu: m.reduced_volume,
        volume: m.volume,
        area: m.area,
        rayleigh_discrepancy,
    };
    Ok(SlipOptimum {
        dz_s: problem.geom.grid.differentiate(&report.z_s),
        report,
        adjoint,
        auxiliary,
    })
}

/// `U = −E/(1+E)`, inverse of `E = −U/(1+U)`.
pub fn speed_from_efficiency(e: f64) -> f64 {
    -e / (1.0 + e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splinecurve::{AnalyticCurve, GeneratingCurve, Meridian};
    use crate::stokes_bie::{solve_forward, Discretization};
    use rand::{Rng, SeedableRng};

    fn problem(c: &dyn Meridian) -> BieProblem {
        BieProblem::new(c, &Discretization::default()).unwrap()
    }

    #[test]
    fn scalar_helpers() {
        assert_eq!(towing_power(3.0, 0.0), 0.0);
        assert_eq!(towing_power(6.0 * PI, -1.0 / 3.0), towing_power(6.0 * PI, 1.0 / 3.0));
        assert!((towing_power(6.0 * PI, -1.0 / 3.0) - 2.0 * PI / 3.0).abs() < 1e-14);
        assert!(efficiency(1.0, 0.0).is_err());
        let e = 2.517;
        let u = speed_from_efficiency(e);
        assert!((-u / (1.0 + u) - e).abs() < 1e-14);
    }

    #[test]
    fn sphere_optimum() {
        let c = AnalyticCurve::Sphere { radius: 1.0 };
        let p = problem(&c);
        let opt = optimal_slip(&p, true).unwrap();
        let r = &opt.report;
        assert!((r.e - 0.5).abs() < 1e-8, "{}", r.e);
        assert!((r.u + 1.0 / 3.0).abs() < 1e-8);
        assert!((r.j_w - 4.0 * PI / 3.0).abs() < 1e-7);
        assert!((r.j_drag - 1.0).abs() < 1e-8);
        assert!(r.rayleigh_discrepancy.unwrap() < 1e-6);
        // power loss of the optimal slip from an explicit forward solve
        let fw = solve_forward(&p, &r.z_s).unwrap();
        assert!((power_loss(&p, &fw) - r.j_w).abs() < 1e-7);
        // quadratic scaling
        let fw2 = solve_forward(&p, &r.z_s.iter().map(|v| 3.0 * v).collect::<Vec<_>>()).unwrap();
        assert!((power_loss(&p, &fw2) / power_loss(&p, &fw) - 9.0).abs() < 1e-10);
    }

    #[test]
    fn spheroid_reference_efficiency_and_drag() {
        // prolate spheroid of reduced volume 0.7
        let ratio = crate::splinecurve::spheroid_aspect_for_nu(0.7).unwrap();
        let c = AnalyticCurve::Spheroid { a: ratio, b: 1.0 };
        let opt = optimal_slip(&problem(&c), true).unwrap();
        assert!((opt.report.nu - 0.7).abs() < 1e-10);
        assert!((opt.report.e / 2.517108 - 1.0).abs() < 1e-2, "{}", opt.report.e);
        assert!((opt.report.j_drag / 1.002602 - 1.0).abs() < 1e-3, "{}", opt.report.j_drag);
        assert!(opt.report.rayleigh_discrepancy.unwrap() < 1e-6);
    }

    #[test]
    fn drag_is_scale_invariant() {
        let c = GeneratingCurve::fit(&AnalyticCurve::Peanut { beta: 0.25 }, 24).unwrap();
        let p1 = problem(&c);
        let p2 = problem(&c.scaled(1.7));
        let (_, f1) = solve_adjoint(&p1).unwrap();
        let (_, f2) = solve_adjoint(&p2).unwrap();
        assert!((normalized_drag(&p1, f1) - normalized_drag(&p2, f2)).abs() < 1e-10);
    }

    #[test]
    fn optimum_dominates_random_slips_and_solves_eigen_equation() {
        let c = GeneratingCurve::fit(&AnalyticCurve::Peanut { beta: 0.25 }, 24).unwrap();
        let p = problem(&c);
        let opt = optimal_slip(&p, false).unwrap();
        let e = opt.report.e;
        let solver = ForwardSolver::new(&p);
        let fz = solver.solve(&opt.report.z_s).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..6 {
            let coef: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = p
                .geom
                .t
                .iter()
                .map(|t| coef.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * t).sin()).sum())
                .collect();
            let q = rayleigh_quotient(&p, &solver, opt.report.f0, &w).unwrap();
            assert!(q <= e + 1e-6, "{q} > {e}");
            // A_D(z, w) − E A_W(z, w) = F0 U_z U_w − E ⟨f_τ[z], w⟩ = 0
            let fw = solver.solve(&w).unwrap();
            let ad = opt.report.f0 * fz.u * fw.u;
            let aw = p.dot(&fz.f_tau, &w);
            assert!((ad - e * aw).abs() < 1e-7 * (ad.abs() + aw.abs()));
        }
    }

    proptest::proptest! {
        #[test]
        fn speed_and_efficiency_are_inverse(e in 1e-6f64..100.0) {
            let u = speed_from_efficiency(e);
            proptest::prop_assert!(u > -1.0 && u < 0.0);
            proptest::prop_assert!((-u / (1.0 + u) / e - 1.0).abs() < 1e-12);
        }
    }
}
