//! Forward, adjoint and auxiliary Stokes problems via a single-layer ansatz.
//!
//! The velocity is `u = S[ζ]`; on the surface the traction (w.r.t. the normal
//! pointing into the body) is `f = ½ζ + K[ζ]` and the pressure `p = −½ζ·n + P[ζ]`.
//! The axisymmetric single layer annihilates the normal density `ζ = n`, which also
//! produces no traction or exterior pressure. The systems are therefore solved with
//! the deflated operator `S̃ = S + n⟨n, ·⟩_Γ`, whose solutions satisfy `⟨n, ζ⟩_Γ = 0`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::axiquad::{
    assemble_operators, build_singular_rule, single_layer_at, KernelKind, OperatorSet, SingularRule,
};
use crate::error::{Result, SwimError};
use crate::splinecurve::{geometry_at, GeometryCache, Grid, Meridian, SlipProfile};

/// Relative residual above which a dense solve is reported as singular.
const RESIDUAL_TOL: f64 = 1e-8;

/// Grid and quadrature sizes for one boundary discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// Uniform panel count for analytic curves.
    pub n_panels: usize,
    /// Gauss–Legendre nodes per panel (8, 12 or 16).
    pub order: usize,
    /// Panels per knot interval for spline curves.
    pub refine: usize,
    /// Dyadic refinement levels of the pole panels of spline curves.
    #[serde(default)]
    pub pole_refine: usize,
    pub mu: f64,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            n_panels: 16,
            order: 16,
            refine: 1,
            pole_refine: 2,
            mu: 1.0,
        }
    }
}

/// Geometry, quadrature and assembled operators of one shape.
#[derive(Debug, Clone)]
pub struct BieProblem {
    pub geom: GeometryCache,
    pub ops: OperatorSet,
    pub rule: SingularRule,
    /// Surface quadrature weights `2π R α w`.
    pub weights: Vec<f64>,
}

impl BieProblem {
    pub fn new(curve: &dyn Meridian, disc: &Discretization) -> Result<Self> {
        let grid = Grid::for_curve_graded(curve, disc.n_panels, disc.order, disc.refine, disc.pole_refine)?;
        let geom = geometry_at(curve, &grid)?;
        let rule = build_singular_rule(disc.order)?;
        Self::from_geometry(curve, geom, rule, disc.mu)
    }

    pub fn from_geometry(
        curve: &dyn Meridian,
        geom: GeometryCache,
        rule: SingularRule,
        mu: f64,
    ) -> Result<Self> {
        let ops = assemble_operators(
            curve,
            &geom,
            &rule,
            mu,
            &[KernelKind::SingleLayer, KernelKind::Traction, KernelKind::Pressure],
        )?;
        let weights = geom.surface_weights();
        Ok(Self {
            geom,
            ops,
            rule,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.geom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geom.is_empty()
    }

    pub fn mu(&self) -> f64 {
        self.ops.mu
    }

    /// `⟨a, b⟩_Γ` for nodal scalars.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    /// `⟨a, b⟩_Γ` for interleaved `(r, z)` vector fields.
    pub fn dot_vec(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (a[2 * i] * b[2 * i] + a[2 * i + 1] * b[2 * i + 1]))
            .sum()
    }

    /// Deflated single layer `S + n⟨n, ·⟩_Γ`.
    fn deflated_single_layer(&self) -> DMatrix<f64> {
        let g = &self.geom;
        let n = self.len();
        let mut m = self.ops.single_layer.clone();
        for i in 0..n {
            let ni = [g.n_r[i], g.n_z[i]];
            for j in 0..n {
                let wn = [self.weights[j] * g.n_r[j], self.weights[j] * g.n_z[j]];
                for a in 0..2 {
                    m[(2 * i + a, 2 * j)] += ni[a] * wn[0];
                    m[(2 * i + a, 2 * j + 1)] += ni[a] * wn[1];
                }
            }
        }
        m
    }

    /// Traction vector `½ζ + K[ζ]`, interleaved.
    pub fn traction(&self, zeta: &[f64]) -> Vec<f64> {
        let z = DVector::from_column_slice(zeta);
        let k = &self.ops.traction * &z;
        k.iter().zip(zeta).map(|(k, z)| k + 0.5 * z).collect()
    }

    /// Surface pressure `−½ζ·n + P[ζ]`.
    pub fn pressure(&self, zeta: &[f64]) -> Vec<f64> {
        let g = &self.geom;
        let p = &self.ops.pressure * DVector::from_column_slice(zeta);
        (0..self.len())
            .map(|i| p[i] - 0.5 * (zeta[2 * i] * g.n_r[i] + zeta[2 * i + 1] * g.n_z[i]))
            .collect()
    }

    /// Surface velocity `S[ζ]`, interleaved.
    pub fn velocity(&self, zeta: &[f64]) -> Vec<f64> {
        (&self.ops.single_layer * DVector::from_column_slice(zeta))
            .iter()
            .copied()
            .collect()
    }

    fn project(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = &self.geom;
        (0..self.len())
            .map(|i| {
                let (a, b) = (v[2 * i], v[2 * i + 1]);
                (a * g.tau_r[i] + b * g.tau_z[i], a * g.n_r[i] + b * g.n_z[i])
            })
            .unzip()
    }

    fn solution(&self, kind: FlowKind, zeta: Vec<f64>, u: f64, slip: Vec<f64>) -> FlowSolution {
        let (f_tau, f_n) = self.project(&self.traction(&zeta));
        let p = self.pressure(&zeta);
        let (u_tau, u_n) = self.project(&self.velocity(&zeta));
        FlowSolution {
            kind,
            zeta,
            u,
            f_tau,
            f_n,
            p,
            u_tau,
            u_n,
            slip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowKind {
    Forward,
    Adjoint,
    Auxiliary,
}

/// Nodal solution of one of the three boundary-value problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub kind: FlowKind,
    /// Single-layer density, interleaved `(ζ_r, ζ_z)`.
    pub zeta: Vec<f64>,
    /// Axial swim speed; 1 for the adjoint (towing) problem, 0 for the auxiliary one.
    pub u: f64,
    pub f_tau: Vec<f64>,
    pub f_n: Vec<f64>,
    pub p: Vec<f64>,
    /// Boundary velocity components in the lab frame.
    pub u_tau: Vec<f64>,
    pub u_n: Vec<f64>,
    /// Nodal tangential Dirichlet data: `u^S` (forward), `z^S` (auxiliary), 0 (adjoint).
    pub slip: Vec<f64>,
}

impl FlowSolution {
    /// Traction as an interleaved `(f_r, f_z)` vector.
    pub fn traction_vec(&self, geom: &GeometryCache) -> Vec<f64> {
        combine(geom, &self.f_tau, &self.f_n)
    }

    /// Boundary velocity as an interleaved `(u_r, u_z)` vector.
    pub fn velocity_vec(&self, geom: &GeometryCache) -> Vec<f64> {
        combine(geom, &self.u_tau, &self.u_n)
    }

    /// Prescribed Dirichlet data `U e_z + u^S τ` (exact, not the computed trace).
    pub fn dirichlet_vec(&self, geom: &GeometryCache) -> Vec<f64> {
        let mut v = vec![0.0; 2 * self.slip.len()];
        for i in 0..self.slip.len() {
            v[2 * i] = self.slip[i] * geom.tau_r[i];
            v[2 * i + 1] = self.slip[i] * geom.tau_z[i] + self.u;
        }
        v
    }
}

fn combine(geom: &GeometryCache, tau: &[f64], n: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; 2 * tau.len()];
    for i in 0..tau.len() {
        v[2 * i] = tau[i] * geom.tau_r[i] + n[i] * geom.n_r[i];
        v[2 * i + 1] = tau[i] * geom.tau_z[i] + n[i] * geom.n_z[i];
    }
    v
}

/// LU factorization with a residual check on every solve.
struct Factored {
    matrix: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    what: &'static str,
}

impl Factored {
    fn new(matrix: DMatrix<f64>, what: &'static str) -> Self {
        let lu = matrix.clone().lu();
        Self { matrix, lu, what }
    }

    fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.lu.solve(rhs).ok_or(SwimError::Singular(self.what))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SwimError::Singular(self.what));
        }
        let res = (&self.matrix * &x - rhs).amax();
        let scale = self.matrix.amax() * x.amax() + rhs.amax();
        if scale > 0.0 && res > RESIDUAL_TOL * scale {
            return Err(SwimError::Singular(self.what));
        }
        Ok(x)
    }
}

/// Towing problem `S[ζ̂] = e_z`; returns the solution and the drag `F0 = ⟨f̂, e_z⟩_Γ`.
pub fn solve_adjoint(problem: &BieProblem) -> Result<(FlowSolution, f64)> {
    let n = problem.len();
    let sys = Factored::new(problem.deflated_single_layer(), "adjoint system");
    let rhs = DVector::from_fn(2 * n, |k, _| if k % 2 == 1 { 1.0 } else { 0.0 });
    let zeta: Vec<f64> = sys.solve(&rhs)?.iter().copied().collect();
    let sol = problem.solution(FlowKind::Adjoint, zeta, 1.0, vec![0.0; n]);
    let f0 = force_z(problem, &sol);
    Ok((sol, f0))
}

/// Axial force `⟨f, e_z⟩_Γ`.
pub fn force_z(problem: &BieProblem, sol: &FlowSolution) -> f64 {
    let g = &problem.geom;
    (0..problem.len())
        .map(|i| problem.weights[i] * (sol.f_tau[i] * g.tau_z[i] + sol.f_n[i] * g.n_z[i]))
        .sum()
}

/// Factored bordered system of the forward problem, reusable across slips.
pub struct ForwardSolver<'a> {
    problem: &'a BieProblem,
    sys: Factored,
}

impl<'a> ForwardSolver<'a> {
    pub fn new(problem: &'a BieProblem) -> Self {
        let n = problem.len();
        let m2 = 2 * n;
        let mut m = DMatrix::zeros(m2 + 1, m2 + 1);
        m.view_mut((0, 0), (m2, m2))
            .copy_from(&problem.deflated_single_layer());
        for i in 0..n {
            m[(2 * i + 1, m2)] = -1.0;
        }
        // no-net-force row ⟨½ζ + K[ζ], e_z⟩_Γ = 0
        let k = &problem.ops.traction;
        for j in 0..m2 {
            let mut s: f64 = (0..n).map(|i| problem.weights[i] * k[(2 * i + 1, j)]).sum();
            if j % 2 == 1 {
                s += 0.5 * problem.weights[j / 2];
            }
            m[(m2, j)] = s;
        }
        Self {
            problem,
            sys: Factored::new(m, "forward system"),
        }
    }

    /// Solves for nodal slip values `u^S(t_i)`.
    pub fn solve(&self, slip: &[f64]) -> Result<FlowSolution> {
        let p = self.problem;
        let n = p.len();
        if slip.len() != n {
            return Err(SwimError::DimensionMismatch {
                expected: n,
                got: slip.len(),
            });
        }
        let mut rhs = DVector::zeros(2 * n + 1);
        for i in 0..n {
            rhs[2 * i] = slip[i] * p.geom.tau_r[i];
            rhs[2 * i + 1] = slip[i] * p.geom.tau_z[i];
        }
        let x = self.sys.solve(&rhs)?;
        let zeta = x.rows(0, 2 * n).iter().copied().collect();
        Ok(p.solution(FlowKind::Forward, zeta, x[2 * n], slip.to_vec()))
    }
}

/// Free-swimming problem with prescribed tangential slip and no net axial force.
pub fn solve_forward(problem: &BieProblem, slip: &[f64]) -> Result<FlowSolution> {
    ForwardSolver::new(problem).solve(slip)
}

pub fn solve_forward_profile(problem: &BieProblem, slip: &SlipProfile) -> Result<FlowSolution> {
    solve_forward(problem, &slip.values(&problem.geom.t))
}

/// Mixed problem `f̃·τ = f̂_τ`, `ũ·n = 0`; its tangential trace `ũ·τ` (stored in
/// `u_tau`) is the optimal slip `z^S`.
pub fn solve_auxiliary(problem: &BieProblem, adjoint: &FlowSolution) -> Result<FlowSolution> {
    if adjoint.kind != FlowKind::Adjoint {
        return Err(SwimError::InvalidArgument(
            "auxiliary problem needs the adjoint solution".into(),
        ));
    }
    let n = problem.len();
    let g = &problem.geom;
    let s = &problem.ops.single_layer;
    let k = &problem.ops.traction;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let (tr, tz, nr, nz) = (g.tau_r[i], g.tau_z[i], g.n_r[i], g.n_z[i]);
        for j in 0..2 * n {
            m[(i, j)] = tr * k[(2 * i, j)] + tz * k[(2 * i + 1, j)];
            let wn = problem.weights[j / 2] * if j % 2 == 0 { g.n_r[j / 2] } else { g.n_z[j / 2] };
            m[(n + i, j)] = nr * s[(2 * i, j)] + nz * s[(2 * i + 1, j)] + wn;
        }
        m[(i, 2 * i)] += 0.5 * tr;
        m[(i, 2 * i + 1)] += 0.5 * tz;
    }
    let rhs = DVector::from_fn(2 * n, |r, _| if r < n { adjoint.f_tau[r] } else { 0.0 });
    let x = Factored::new(m, "auxiliary system").solve(&rhs)?;
    let zeta = x.iter().copied().collect();
    let mut sol = problem.solution(FlowKind::Auxiliary, zeta, 0.0, vec![0.0; n]);
    sol.slip = sol.u_tau.clone();
    Ok(sol)
}

/// Even–odd crossing test of `(r, z)` against the closed meridian polygon.
fn inside_body(geom: &GeometryCache, x: (f64, f64)) -> bool {
    let mut poly: Vec<(f64, f64)> = Vec::with_capacity(geom.len() + 2);
    poly.push((0.0, geom.z[0]));
    poly.extend(geom.r.iter().copied().zip(geom.z.iter().copied()));
    poly.push((0.0, *geom.z.last().unwrap()));
    let mut inside = false;
    let m = poly.len();
    for k in 0..m {
        let (a, b) = (poly[k], poly[(k + 1) % m]);
        if (a.1 > x.1) != (b.1 > x.1) {
            let rc = a.0 + (x.1 - a.1) / (b.1 - a.1) * (b.0 - a.0);
            if x.0 < rc {
                inside = !inside;
            }
        }
    }
    inside
}

/// Velocity `S[ζ](x)` at points strictly outside the body.
pub fn eval_offsurface(
    problem: &BieProblem,
    curve: &dyn Meridian,
    zeta: &[f64],
    points: &[(f64, f64)],
) -> Result<Vec<(f64, f64)>> {
    let g = &problem.geom;
    let h_min = (0..problem.len())
        .map(|i| g.alpha[i] * g.grid.w[i])
        .fold(f64::INFINITY, f64::min);
    points
        .iter()
        .map(|&x| {
            let d = (0..problem.len())
                .map(|i| (g.r[i] - x.0).hypot(g.z[i] - x.1))
                .fold(f64::INFINITY, f64::min);
            if inside_body(g, x) || d < 1e-3 * h_min || x.0 < 0.0 {
                return Err(SwimError::PointInside(x.0, x.1));
            }
            single_layer_at(x, curve, g, &problem.rule, problem.mu(), zeta)
        })
        .collect()
}

/// `|⟨u₁^D, f₂⟩ − ⟨u₂^D, f₁⟩|` relative to `‖u₁^D‖‖f₂‖ + ‖u₂^D‖‖f₁‖`.
pub fn reciprocity_check(problem: &BieProblem, sol1: &FlowSolution, sol2: &FlowSolution) -> f64 {
    let g = &problem.geom;
    let (u1, f1) = (sol1.dirichlet_vec(g), sol1.traction_vec(g));
    let (u2, f2) = (sol2.dirichlet_vec(g), sol2.traction_vec(g));
    let norm = |v: &[f64]| problem.dot_vec(v, v).sqrt();
    let scale = norm(&u1) * norm(&f2) + norm(&u2) * norm(&f1);
    if scale == 0.0 {
        return 0.0;
    }
    (problem.dot_vec(&u1, &f2) - problem.dot_vec(&u2, &f1)).abs() / scale
}

/// Dissipation `⟨u^D, f⟩_Γ`; nonnegative for every solved problem.
pub fn dissipation(problem: &BieProblem, sol: &FlowSolution) -> f64 {
    let g = &problem.geom;
    problem.dot_vec(&sol.dirichlet_vec(g), &sol.traction_vec(g))
}

/// Stokes drag of a unit sphere, `6πμa`.
pub fn stokes_drag(mu: f64, radius: f64) -> f64 {
    6.0 * PI * mu * radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::splinecurve::{AnalyticCurve, GeneratingCurve};

    fn problem(c: &dyn Meridian) -> BieProblem {
        BieProblem::new(c, &Discretization::default()).unwrap()
    }

    fn prolate_drag(a: f64, b: f64) -> f64 {
        let e = (1.0 - (b / a).powi(2)).sqrt();
        16.0 * PI * a * e.powi(3) / ((1.0 + e * e) * ((1.0 + e) / (1.0 - e)).ln() - 2.0 * e)
    }

    #[test]
    fn sphere_towing() {
        let c = AnalyticCurve::Sphere { radius: 1.0 };
        let p = problem(&c);
        let (s, f0) = solve_adjoint(&p).unwrap();
        assert!((f0 / (6.0 * PI) - 1.0).abs() < 1e-8, "{f0}");
        // uniform traction 3/2 e_z: f_τ = −3/2 sin t, f_n = −3/2 cos t, p = 3/2 cos t
        for i in 0..p.len() {
            let (st, ct) = p.geom.t[i].sin_cos();
            assert!((s.f_tau[i] + 1.5 * st).abs() < 1e-8);
            assert!((s.f_n[i] + 1.5 * ct).abs() < 1e-8);
            assert!((s.p[i] - 1.5 * ct).abs() < 1e-7, "{} {}", s.p[i], 1.5 * ct);
            assert!((s.u_tau[i] + st).abs() < 1e-10 && (s.u_n[i] + ct).abs() < 1e-10);
        }
    }

    #[test]
    fn prolate_spheroid_drag() {
        for ratio in [1.5, 2.0, 4.0] {
            let c = AnalyticCurve::Spheroid { a: ratio, b: 1.0 };
            let (_, f0) = solve_adjoint(&problem(&c)).unwrap();
            let exact = prolate_drag(ratio, 1.0);
            assert!((f0 / exact - 1.0).abs() < 1e-6, "a/b={ratio}: {f0} vs {exact}");
        }
    }

    #[test]
    fn squirmer() {
        let c = AnalyticCurve::Sphere { radius: 1.0 };
        let p = problem(&c);
        let slip: Vec<f64> = p.geom.t.iter().map(|t| t.sin()).collect();
        let s = solve_forward(&p, &slip).unwrap();
        assert!((s.u - 2.0 / 3.0).abs() < 1e-9, "{}", s.u);
        assert!(force_z(&p, &s).abs() < 1e-10);
        let zero = solve_forward(&p, &vec![0.0; p.len()]).unwrap();
        assert_eq!(zero.u, 0.0);
        assert!(zero.zeta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reciprocal_swim_speed_and_superposition() {
        let c = GeneratingCurve::fit(&AnalyticCurve::Peanut { beta: 0.25 }, 24).unwrap();
        let p = problem(&c);
        let (adj, f0) = solve_adjoint(&p).unwrap();
        let s1: Vec<f64> = p.geom.t.iter().map(|t| t.sin() * (1.0 + t.cos())).collect();
        let s2: Vec<f64> = p.geom.t.iter().map(|t| (2.0 * t).sin() * t.sin()).collect();
        let fs = ForwardSolver::new(&p);
        let a = fs.solve(&s1).unwrap();
        let b = fs.solve(&s2).unwrap();
        let sum: Vec<f64> = s1.iter().zip(&s2).map(|(x, y)| x + y).collect();
        let ab = fs.solve(&sum).unwrap();
        assert!((ab.u - a.u - b.u).abs() < 1e-10);
        let u_rec = -p.dot(&adj.f_tau, &s1) / f0;
        assert!((u_rec / a.u - 1.0).abs() < 1e-8, "{u_rec} vs {}", a.u);
        assert!(reciprocity_check(&p, &a, &b) < 1e-7);
        assert!(reciprocity_check(&p, &a, &adj) < 1e-8);
        assert_eq!(reciprocity_check(&p, &a, &a), 0.0);
        assert!(dissipation(&p, &a) > 0.0);
    }

    #[test]
    fn auxiliary_on_sphere() {
        let c = AnalyticCurve::Sphere { radius: 1.0 };
        let p = problem(&c);
        let (adj, f0) = solve_adjoint(&p).unwrap();
        let aux = solve_auxiliary(&p, &adj).unwrap();
        assert!(aux.u_n.iter().all(|v| v.abs() < 1e-8));
        for i in 0..p.len() {
            assert!((aux.f_tau[i] - adj.f_tau[i]).abs() < 1e-8);
        }
        let zs = &aux.u_tau;
        let scale = zs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sign = zs[p.len() / 2].signum();
        for i in 0..p.len() {
            assert!((sign * zs[i] / scale - p.geom.t[i].sin()).abs() < 1e-4);
        }
        // forward solve at the optimal slip: f_τ = (1 + U) f̂_τ
        let fw = solve_forward(&p, zs).unwrap();
        let u_opt = -p.dot(&adj.f_tau, zs) / f0;
        assert!((fw.u - u_opt).abs() < 1e-9);
        assert!((u_opt + 1.0 / 3.0).abs() < 1e-8, "{u_opt}");
        for i in 0..p.len() {
            assert!((fw.f_tau[i] - (1.0 + fw.u) * adj.f_tau[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn towed_sphere_exterior_flow() {
        let c = AnalyticCurve::Sphere { radius: 1.0 };
        let p = problem(&c);
        let (adj, _) = solve_adjoint(&p).unwrap();
        let pts: Vec<(f64, f64)> = (0..7)
            .map(|k| {
                let th = 0.2 + 0.45 * k as f64;
                (2.0 * th.sin(), 2.0 * th.cos())
            })
            .collect();
        let u = eval_offsurface(&p, &c, &adj.zeta, &pts).unwrap();
        for (x, v) in pts.iter().zip(&u) {
            // sphere towed with e_z: u = (3/4)(e_z/r + z x/r³) + (1/4)(e_z/r³ − 3 z x/r⁵)
            let r = x.0.hypot(x.1);
            let ex = |c: f64| 0.75 * x.1 * c / r.powi(3) - 0.75 * x.1 * c / r.powi(5);
            let ur = ex(x.0);
            let uz = 0.75 / r + 0.25 / r.powi(3) + ex(x.1);
            assert!((v.0 - ur).abs() < 1e-7 && (v.1 - uz).abs() < 1e-7, "{v:?} vs {ur} {uz}");
        }
        assert!(eval_offsurface(&p, &c, &adj.zeta, &[(0.5, 0.1)]).is_err());
        // far-field decay
        let far = eval_offsurface(&p, &c, &adj.zeta, &[(0.0, 100.0), (0.0, 200.0)]).unwrap();
        assert!((far[0].1 / far[1].1 - 2.0).abs() < 0.01);
    }

    #[test]
    fn pressure_gauge_identity_for_rigid_motion() {
        // rigid towing: f_n + p = 0 on any shape
        let c = GeneratingCurve::fit(&AnalyticCurve::Peanut { beta: 0.25 }, 24).unwrap();
        let p = problem(&c);
        let (adj, _) = solve_adjoint(&p).unwrap();
        let scale = adj.p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..p.len() {
            assert!((adj.f_n[i] + adj.p[i]).abs() < 1e-6 * scale, "{i}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]
        #[test]
        fn drag_scales_with_size_and_viscosity(radius in 0.2f64..5.0, mu in 0.1f64..10.0) {
            let disc = Discretization { mu, ..Default::default() };
            let p = BieProblem::new(&AnalyticCurve::Sphere { radius }, &disc).unwrap();
            let (_, f0) = solve_adjoint(&p).unwrap();
            prop_assert!((f0 / stokes_drag(mu, radius) - 1.0).abs() < 1e-9);
        }
    }
}
