//! Dense Nyström discretization of the reduced layer operators.
//!
//! Unknowns are nodal vectors interleaved as `(ζ_r, ζ_z)` per grid node. Far panels
//! use the grid's own Gauss–Legendre rule; panels within the rule's band around the
//! target are integrated on graded points with the density interpolated by the
//! source panel's Lagrange polynomial.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gauss::{gauss_legendre, Interpolator};
use super::kernel::{
    moments, pressure_block, single_layer_block, traction_block, MomentMask, Moments, Pair,
};
use super::rule::SingularRule;
use crate::error::{Result, SwimError};
use crate::splinecurve::{GeometryCache, Meridian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    SingleLayer,
    Traction,
    Pressure,
}

/// Dense operator `(2N × 2N)` for single layer/traction, `(N × 2N)` for pressure.
/// Jump terms are not included.
#[derive(Debug, Clone)]
pub struct ReducedKernel {
    pub kind: KernelKind,
    pub values: DMatrix<f64>,
}

/// Every operator needed by the solvers, assembled in one sweep.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub mu: f64,
    pub single_layer: DMatrix<f64>,
    pub traction: DMatrix<f64>,
    pub pressure: DMatrix<f64>,
}

/// Target data for a kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPoint {
    pub r: f64,
    pub z: f64,
    pub n_r: f64,
    pub n_z: f64,
}

/// Azimuthally integrated kernel block for one target/source pair (source ring
/// measure `y_r dφ` not included). Rows are output components, columns `(r, z)`.
pub fn azimuthal_reduce(kind: KernelKind, target: &TargetPoint, source: (f64, f64)) -> Result<Vec<f64>> {
    let pair = Pair::new((target.r, target.z), source);
    let mask = mask_for(&[kind]);
    let mo = moments(&pair, mask)?;
    Ok(match kind {
        KernelKind::SingleLayer => single_layer_block(&pair, &mo).concat(),
        KernelKind::Traction => traction_block(&pair, &mo, target.n_r, target.n_z).concat(),
        KernelKind::Pressure => pressure_block(&pair, &mo).to_vec(),
    })
}

fn mask_for(kinds: &[KernelKind]) -> MomentMask {
    MomentMask {
        i1: kinds.contains(&KernelKind::SingleLayer),
        i3: kinds.contains(&KernelKind::SingleLayer) || kinds.contains(&KernelKind::Pressure),
        i5: kinds.contains(&KernelKind::Traction),
    }
}

/// Chords shorter than this (in `t`) are integrated from `x′` to avoid cancellation.
const CHORD_INTEGRATE_BELOW: f64 = 0.01;

/// Cancellation-free chord `x(t) − x(s)` for nearby parameters.
struct Chord<'a> {
    curve: &'a dyn Meridian,
    breaks: Option<Vec<f64>>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> Chord<'a> {
    fn new(curve: &'a dyn Meridian) -> Self {
        // exact on the quartic x′ of a quintic spline piece
        let (nodes, weights) = gauss_legendre(3);
        Self {
            curve,
            breaks: curve.breakpoints(),
            nodes,
            weights,
        }
    }

    fn integrate(&self, lo: f64, hi: f64) -> (f64, f64) {
        let h = 0.5 * (hi - lo);
        let c = 0.5 * (hi + lo);
        let mut acc = (0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let p = self.curve.point(c + h * x);
            acc.0 += h * w * p.dr;
            acc.1 += h * w * p.dz;
        }
        acc
    }

    /// Returns `(x_r(t) − x_r(s), x_z(t) − x_z(s))`.
    fn delta(&self, t: f64, xt: (f64, f64), s: f64, ys: (f64, f64)) -> (f64, f64) {
        if (t - s).abs() >= CHORD_INTEGRATE_BELOW {
            return (xt.0 - ys.0, xt.1 - ys.1);
        }
        let (lo, hi) = if s < t { (s, t) } else { (t, s) };
        let mut acc = (0.0, 0.0);
        let mut start = lo;
        if let Some(b) = &self.breaks {
            let first = b.partition_point(|&k| k <= lo);
            for &k in b[first..].iter().take_while(|&&k| k < hi) {
                let piece = self.integrate(start, k);
                acc.0 += piece.0;
                acc.1 += piece.1;
                start = k;
            }
        }
        let piece = self.integrate(start, hi);
        acc.0 += piece.0;
        acc.1 += piece.1;
        if s < t {
            acc
        } else {
            (-acc.0, -acc.1)
        }
    }
}

struct RowOut {
    sl: [Vec<f64>; 2],
    tr: [Vec<f64>; 2],
    pr: Vec<f64>,
}

struct Accumulator<'a> {
    geom: &'a GeometryCache,
    target: usize,
    kinds: MomentMask,
    want: [bool; 3],
    row: RowOut,
}

impl<'a> Accumulator<'a> {
    /// Adds `weight · block(target, source)` distributed over columns via `coeffs`.
    fn add(&mut self, pair: &Pair, weight: f64, cols: &[(usize, f64)]) -> Result<()> {
        let mo: Moments = moments(pair, self.kinds)?;
        let g = self.geom;
        let i = self.target;
        if self.want[0] {
            let b = single_layer_block(pair, &mo);
            for &(j, c) in cols {
                let wc = weight * c;
                for a in 0..2 {
                    self.row.sl[a][2 * j] += wc * b[a][0];
                    self.row.sl[a][2 * j + 1] += wc * b[a][1];
                }
            }
        }
        if self.want[1] {
            let b = traction_block(pair, &mo, g.n_r[i], g.n_z[i]);
            for &(j, c) in cols {
                let wc = weight * c;
                for a in 0..2 {
                    self.row.tr[a][2 * j] += wc * b[a][0];
                    self.row.tr[a][2 * j + 1] += wc * b[a][1];
                }
            }
        }
        if self.want[2] {
            let b = pressure_block(pair, &mo);
            for &(j, c) in cols {
                let wc = weight * c;
                self.row.pr[2 * j] += wc * b[0];
                self.row.pr[2 * j + 1] += wc * b[1];
            }
        }
        Ok(())
    }
}

fn assemble_row(
    i: usize,
    curve: &dyn Meridian,
    geom: &GeometryCache,
    rule: &SingularRule,
    interp: &Interpolator,
    chord: &Chord,
    kinds: &[KernelKind],
) -> Result<RowOut> {
    let n = geom.len();
    let grid = &geom.grid;
    let want = [
        kinds.contains(&KernelKind::SingleLayer),
        kinds.contains(&KernelKind::Traction),
        kinds.contains(&KernelKind::Pressure),
    ];
    let zeros = |on: bool| if on { vec![0.0; 2 * n] } else { Vec::new() };
    let mut acc = Accumulator {
        geom,
        target: i,
        kinds: mask_for(kinds),
        want,
        row: RowOut {
            sl: [zeros(want[0]), zeros(want[0])],
            tr: [zeros(want[1]), zeros(want[1])],
            pr: zeros(want[2]),
        },
    };
    let t = geom.t[i];
    let xt = (geom.r[i], geom.z[i]);
    let p = grid.panel_of(i);
    let np = grid.n_panels();
    let lo = p.saturating_sub(rule.band);
    let hi = (p + rule.band).min(np - 1);
    let order = grid.order;
    let mut lrow = vec![0.0; order];
    let mut cols: Vec<(usize, f64)> = Vec::with_capacity(order);
    // Cauchy part of the pressure kernel: −ζ_τ(t)/(2π(s − t)).
    let mut cauchy = 0.0;

    for q in 0..np {
        if q < lo || q > hi {
            for j in grid.panel_range(q) {
                let pair = Pair::new(xt, (geom.r[j], geom.z[j]));
                let w = geom.r[j] * geom.alpha[j] * grid.w[j];
                acc.add(&pair, w, &[(j, 1.0)])?;
            }
            continue;
        }
        let (a, b) = grid.panel_bounds(q);
        let base = q * order;
        for (s, ws) in rule.graded(a, b, t) {
            let y = curve.point(s);
            let (dr, dz) = chord.delta(t, xt, s, (y.r, y.z));
            let pair = Pair {
                x_r: xt.0,
                y_r: y.r,
                dr,
                dz,
            };
            let alpha = y.dr.hypot(y.dz);
            interp.row_into(grid.to_reference(q, s), &mut lrow);
            cols.clear();
            cols.extend(lrow.iter().enumerate().map(|(k, &l)| (base + k, l)));
            acc.add(&pair, y.r * alpha * ws, &cols)?;
            if want[2] {
                cauchy += ws / (s - t);
            }
        }
    }
    if want[2] {
        let (a, _) = grid.panel_bounds(lo);
        let (_, b) = grid.panel_bounds(hi);
        let c = -1.0 / (2.0 * PI) * (((b - t) / (t - a)).ln() - cauchy);
        acc.row.pr[2 * i] += c * geom.tau_r[i];
        acc.row.pr[2 * i + 1] += c * geom.tau_z[i];
    }
    Ok(acc.row)
}

/// Assembles the requested operators; those not requested are returned empty.
pub fn assemble_operators(
    curve: &dyn Meridian,
    geom: &GeometryCache,
    rule: &SingularRule,
    mu: f64,
    kinds: &[KernelKind],
) -> Result<OperatorSet> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(SwimError::InvalidArgument(format!("viscosity must be positive, got {mu}")));
    }
    if geom.grid.order != rule.order {
        return Err(SwimError::InvalidArgument(format!(
            "grid order {} does not match singular rule order {}",
            geom.grid.order, rule.order
        )));
    }
    let n = geom.len();
    let interp = geom.grid.interpolator();
    let chord = Chord::new(curve);
    let rows: Vec<RowOut> = (0..n)
        .into_par_iter()
        .map(|i| assemble_row(i, curve, geom, rule, &interp, &chord, kinds))
        .collect::<Result<_>>()?;
    let sl_scale = 1.0 / (8.0 * PI * mu);
    let mut out = OperatorSet {
        mu,
        single_layer: DMatrix::zeros(0, 0),
        traction: DMatrix::zeros(0, 0),
        pressure: DMatrix::zeros(0, 0),
    };
    if kinds.contains(&KernelKind::SingleLayer) {
        out.single_layer = DMatrix::from_fn(2 * n, 2 * n, |r, c| sl_scale * rows[r / 2].sl[r % 2][c]);
    }
    if kinds.contains(&KernelKind::Traction) {
        out.traction = DMatrix::from_fn(2 * n, 2 * n, |r, c| rows[r / 2].tr[r % 2][c]);
    }
    if kinds.contains(&KernelKind::Pressure) {
        out.pressure = DMatrix::from_fn(n, 2 * n, |r, c| rows[r].pr[c]);
    }
    if [&out.single_layer, &out.traction, &out.pressure]
        .iter()
        .any(|m| m.iter().any(|v| !v.is_finite()))
    {
        return Err(SwimError::NonFinite("assembled operator"));
    }
    Ok(out)
}

pub fn assemble_operator(
    kind: KernelKind,
    curve: &dyn Meridian,
    geom: &GeometryCache,
    rule: &SingularRule,
    mu: f64,
) -> Result<ReducedKernel> {
    let set = assemble_operators(curve, geom, rule, mu, &[kind])?;
    let values = match kind {
        KernelKind::SingleLayer => set.single_layer,
        KernelKind::Traction => set.traction,
        KernelKind::Pressure => set.pressure,
    };
    Ok(ReducedKernel { kind, values })
}

/// Single-layer velocity `S[ζ](x)` at a point off the surface.
pub fn single_layer_at(
    x: (f64, f64),
    curve: &dyn Meridian,
    geom: &GeometryCache,
    rule: &SingularRule,
    mu: f64,
    zeta: &[f64],
) -> Result<(f64, f64)> {
    let grid = &geom.grid;
    let interp = grid.interpolator();
    let mut lrow = vec![0.0; grid.order];
    let mut u = (0.0, 0.0);
    let mut add = |y: (f64, f64), w: f64, zr: f64, zz: f64| -> Result<()> {
        let pair = Pair::new(x, y);
        let mo = moments(
            &pair,
            MomentMask {
                i1: true,
                i3: true,
                i5: false,
            },
        )?;
        let b = single_layer_block(&pair, &mo);
        u.0 += w * (b[0][0] * zr + b[0][1] * zz);
        u.1 += w * (b[1][0] * zr + b[1][1] * zz);
        Ok(())
    };
    for q in 0..grid.n_panels() {
        let range = grid.panel_range(q);
        let (a, b) = grid.panel_bounds(q);
        // nearest node and its distance decide whether the panel is near
        let (jmin, dmin) = range
            .clone()
            .map(|j| (j, (geom.r[j] - x.0).hypot(geom.z[j] - x.1)))
            .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
        let panel_len: f64 = range.clone().map(|j| geom.alpha[j] * grid.w[j]).sum();
        if dmin > panel_len {
            for j in range {
                add(
                    (geom.r[j], geom.z[j]),
                    geom.r[j] * geom.alpha[j] * grid.w[j],
                    zeta[2 * j],
                    zeta[2 * j + 1],
                )?;
            }
            continue;
        }
        // Grade towards the parameter of the nearest node, pushed slightly off the
        // surface so the rule stops at the point's distance.
        let t_near = geom.t[jmin];
        let pts = {
            let mut v = rule.graded(a, b, t_near);
            v.retain(|&(s, _)| s > a && s < b);
            v
        };
        for (s, ws) in pts {
            let y = curve.point(s);
            interp.row_into(grid.to_reference(q, s), &mut lrow);
            let (mut zr, mut zz) = (0.0, 0.0);
            for (k, j) in range.clone().enumerate() {
                zr += lrow[k] * zeta[2 * j];
                zz += lrow[k] * zeta[2 * j + 1];
            }
            add((y.r, y.z), y.r * y.dr.hypot(y.dz) * ws, zr, zz)?;
        }
    }
    let c = 1.0 / (8.0 * PI * mu);
    Ok((c * u.0, c * u.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axiquad::rule::build_singular_rule;
    use crate::splinecurve::{geometry_at, AnalyticCurve, GeneratingCurve, Grid};

    fn sphere(n_panels: usize) -> (AnalyticCurve, GeometryCache) {
        let c = AnalyticCurve::Sphere { radius: 1.0 };
        let g = geometry_at(&c, &Grid::uniform(n_panels, 16).unwrap()).unwrap();
        (c, g)
    }

    fn apply(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        (m * nalgebra::DVector::from_column_slice(v)).iter().copied().collect()
    }

    #[test]
    fn uniform_density_on_sphere() {
        // A uniform force density e_z on a sphere of radius a induces the uniform
        // velocity 2a/(3μ) e_z on the surface.
        let (c, g) = sphere(8);
        let rule = build_singular_rule(16).unwrap();
        let ops = assemble_operators(&c, &g, &rule, 1.0, &[KernelKind::SingleLayer]).unwrap();
        let n = g.len();
        let zeta: Vec<f64> = (0..2 * n).map(|k| (k % 2) as f64).collect();
        let u = apply(&ops.single_layer, &zeta);
        for i in 0..n {
            assert!(u[2 * i].abs() < 1e-11, "u_r[{i}] = {}", u[2 * i]);
            assert!((u[2 * i + 1] - 2.0 / 3.0).abs() < 1e-11, "u_z[{i}] = {}", u[2 * i + 1]);
        }
    }

    #[test]
    fn normal_density_is_in_the_null_space() {
        let (c, g) = sphere(8);
        let rule = build_singular_rule(16).unwrap();
        let kinds = [KernelKind::SingleLayer, KernelKind::Traction];
        let ops = assemble_operators(&c, &g, &rule, 1.0, &kinds).unwrap();
        let n = g.len();
        let mut zeta = vec![0.0; 2 * n];
        for i in 0..n {
            zeta[2 * i] = g.n_r[i];
            zeta[2 * i + 1] = g.n_z[i];
        }
        let u = apply(&ops.single_layer, &zeta);
        assert!(u.iter().all(|v| v.abs() < 1e-11));
        // exterior traction ½ζ + K[ζ] vanishes
        let f = apply(&ops.traction, &zeta);
        for k in 0..2 * n {
            assert!((0.5 * zeta[k] + f[k]).abs() < 1e-10, "k={k}: {}", 0.5 * zeta[k] + f[k]);
        }
    }

    #[test]
    fn total_exterior_traction_equals_total_density() {
        // The interior flow of a single layer exerts no net force, so the jump
        // relation makes the exterior traction integrate to ∫ ζ dS.
        let c = AnalyticCurve::Spheroid { a: 1.6, b: 1.0 };
        let g = geometry_at(&c, &Grid::uniform(16, 16).unwrap()).unwrap();
        let rule = build_singular_rule(16).unwrap();
        let ops = assemble_operators(&c, &g, &rule, 1.0, &[KernelKind::Traction]).unwrap();
        let n = g.len();
        let zeta: Vec<f64> = (0..n)
            .flat_map(|i| [g.t[i].sin() * (1.0 + g.t[i].cos()), 1.0 + 0.3 * g.t[i].cos()])
            .collect();
        let f = apply(&ops.traction, &zeta);
        let fz: Vec<f64> = (0..n).map(|i| 0.5 * zeta[2 * i + 1] + f[2 * i + 1]).collect();
        let zz: Vec<f64> = (0..n).map(|i| zeta[2 * i + 1]).collect();
        // total force of the exterior flow equals the total single-layer density
        let a = g.surface_integral(&fz);
        let b = g.surface_integral(&zz);
        assert!((a - b).abs() < 1e-9 * b.abs(), "{a} vs {b}");
    }

    #[test]
    fn self_convergence_on_spline_curve() {
        let curve = GeneratingCurve::fit(&AnalyticCurve::Peanut { beta: 0.2 }, 24).unwrap();
        let rule = build_singular_rule(16).unwrap();
        let kinds = [KernelKind::SingleLayer, KernelKind::Traction, KernelKind::Pressure];
        let g1 = geometry_at(&curve, &Grid::for_curve(&curve, 0, 16, 1).unwrap()).unwrap();
        let g2 = geometry_at(&curve, &Grid::for_curve(&curve, 0, 16, 2).unwrap()).unwrap();
        let o1 = assemble_operators(&curve, &g1, &rule, 1.0, &kinds).unwrap();
        let o2 = assemble_operators(&curve, &g2, &rule, 1.0, &kinds).unwrap();
        let dens = |g: &GeometryCache| -> Vec<f64> {
            (0..g.len())
                .flat_map(|i| {
                    let t = g.t[i];
                    [t.sin() * (2.0 - t.cos()), (2.0 * t).cos() + 0.5]
                })
                .collect()
        };
        let (v1, v2) = (dens(&g1), dens(&g2));
        for (m1, m2, width) in [
            (&o1.single_layer, &o2.single_layer, 2),
            (&o1.traction, &o2.traction, 2),
            (&o1.pressure, &o2.pressure, 1),
        ] {
            let (a, b) = (apply(m1, &v1), apply(m2, &v2));
            let mut err: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for &t in &[0.05, 0.4, 1.3, 2.0, 3.0] {
                for comp in 0..width {
                    let pick = |vals: &[f64], g: &GeometryCache| {
                        let comp_vals: Vec<f64> = (0..g.len()).map(|i| vals[width * i + comp]).collect();
                        g.grid.interpolate(&comp_vals, t)
                    };
                    let (x, y) = (pick(&a, &g1), pick(&b, &g2));
                    err = err.max((x - y).abs());
                    scale = scale.max(y.abs());
                }
            }
            assert!(err < 1e-8 * scale.max(1.0), "self-convergence error {err}");
        }
    }

    #[test]
    fn off_surface_velocity_matches_on_surface_limit() {
        let (c, g) = sphere(8);
        let rule = build_singular_rule(16).unwrap();
        let n = g.len();
        let zeta: Vec<f64> = (0..2 * n).map(|k| (k % 2) as f64).collect();
        // outside a sphere the uniform density gives a Stokeslet + degenerate quadrupole
        for &(r, th) in &[(1.5, 0.7), (3.0, 2.0), (1.05, 1.2)] {
            let x = (r * f64::sin(th), r * f64::cos(th));
            let u = single_layer_at(x, &c, &g, &rule, 1.0, &zeta).unwrap();
            // exact: total force F = 4π e_z, flow of a translating sphere with drag F
            let f = 4.0 * PI;
            let (rr, zz) = x;
            let rho = (rr * rr + zz * zz).sqrt();
            let st = |i: usize| -> f64 {
                // (F/(8π))[(δ_iz/ρ + x_i x_z/ρ³) + (1/3)(δ_iz/ρ³ − 3 x_i x_z/ρ⁵)]
                let xi = if i == 0 { rr } else { zz };
                let d = if i == 1 { 1.0 } else { 0.0 };
                f / (8.0 * PI)
                    * (d / rho + xi * zz / rho.powi(3)
                        + (d / rho.powi(3) - 3.0 * xi * zz / rho.powi(5)) / 3.0)
            };
            assert!((u.0 - st(0)).abs() < 1e-9, "{:?} vs {}", u, st(0));
            assert!((u.1 - st(1)).abs() < 1e-9, "{:?} vs {}", u, st(1));
        }
    }
}

