//! Composite Gauss–Legendre grids on `(0, π)` and nodal geometry.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::curve::Meridian;
use crate::axiquad::gauss::{gauss_legendre, Interpolator};
use crate::error::{Result, SwimError};

/// Panels `[breaks[i], breaks[i+1]]`, each carrying `order` Gauss–Legendre nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub breaks: Vec<f64>,
    pub order: usize,
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    /// Reference nodes on `[-1, 1]`.
    pub ref_nodes: Vec<f64>,
    pub ref_weights: Vec<f64>,
}

impl Grid {
    pub fn from_breaks(breaks: Vec<f64>, order: usize) -> Result<Self> {
        if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SwimError::InvalidArgument(
                "panel breaks must be strictly increasing".into(),
            ));
        }
        if order < 2 {
            return Err(SwimError::InvalidArgument(format!(
                "panel order must be at least 2, got {order}"
            )));
        }
        let (xr, wr) = gauss_legendre(order);
        let mut t = Vec::with_capacity((breaks.len() - 1) * order);
        let mut w = Vec::with_capacity(t.capacity());
        for p in breaks.windows(2) {
            let h = 0.5 * (p[1] - p[0]);
            let c = 0.5 * (p[1] + p[0]);
            for (x, wi) in xr.iter().zip(&wr) {
                t.push(c + h * x);
                w.push(h * wi);
            }
        }
        Ok(Self {
            breaks,
            order,
            t,
            w,
            ref_nodes: xr,
            ref_weights: wr,
        })
    }

    /// `n_panels` equal panels on `[0, π]`.
    pub fn uniform(n_panels: usize, order: usize) -> Result<Self> {
        if n_panels == 0 {
            return Err(SwimError::InvalidArgument("need at least one panel".into()));
        }
        let breaks = (0..=n_panels)
            .map(|i| PI * i as f64 / n_panels as f64)
            .collect();
        Self::from_breaks(breaks, order)
    }

    /// Panels aligned with the curve's breakpoints when it has any (subdividing each
    /// interval `refine` times), otherwise `n_panels` uniform panels.
    pub fn for_curve(
        curve: &dyn Meridian,
        n_panels: usize,
        order: usize,
        refine: usize,
    ) -> Result<Self> {
        Self::for_curve_graded(curve, n_panels, order, refine, 0)
    }

    /// As [`Grid::for_curve`], additionally halving the two pole panels of a spline
    /// curve `pole_levels` times (dyadic grading towards `t = 0, π`).
    pub fn for_curve_graded(
        curve: &dyn Meridian,
        n_panels: usize,
        order: usize,
        refine: usize,
        pole_levels: usize,
    ) -> Result<Self> {
        match curve.breakpoints() {
            Some(knots) => {
                let refine = refine.max(1);
                let mut breaks = Vec::with_capacity((knots.len() - 1) * refine + 1 + 2 * pole_levels);
                for k in knots.windows(2) {
                    for j in 0..refine {
                        breaks.push(k[0] + (k[1] - k[0]) * j as f64 / refine as f64);
                    }
                }
                breaks.push(*knots.last().unwrap());
                let m = breaks.len();
                let (h0, h1) = (breaks[1] - breaks[0], breaks[m - 1] - breaks[m - 2]);
                let (t0, t1) = (breaks[0], breaks[m - 1]);
                for j in 1..=pole_levels {
                    let f = 0.5f64.powi(j as i32);
                    breaks.push(t0 + h0 * f);
                    breaks.push(t1 - h1 * f);
                }
                breaks.sort_by(f64::total_cmp);
                Self::from_breaks(breaks, order)
            }
            None => Self::uniform(n_panels, order),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn n_panels(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn panel_of(&self, node: usize) -> usize {
        node / self.order
    }

    pub fn panel_range(&self, panel: usize) -> std::ops::Range<usize> {
        panel * self.order..(panel + 1) * self.order
    }

    pub fn panel_bounds(&self, panel: usize) -> (f64, f64) {
        (self.breaks[panel], self.breaks[panel + 1])
    }

    /// Panel containing parameter `t` (clamped to the grid).
    pub fn locate(&self, t: f64) -> usize {
        let p = self.breaks.partition_point(|&b| b <= t);
        p.saturating_sub(1).min(self.n_panels() - 1)
    }

    /// Interpolator on the reference nodes.
    pub fn interpolator(&self) -> Interpolator {
        Interpolator::new(&self.ref_nodes)
    }

    /// Maps `t` in panel `p` to the reference coordinate.
    pub fn to_reference(&self, panel: usize, t: f64) -> f64 {
        let (a, b) = self.panel_bounds(panel);
        (2.0 * t - a - b) / (b - a)
    }

    /// Interpolates nodal values at arbitrary `t` with the panel polynomial.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        let p = self.locate(t);
        let row = self.interpolator().row(self.to_reference(p, t));
        self.panel_range(p)
            .zip(&row)
            .map(|(i, l)| values[i] * l)
            .sum()
    }

    /// Derivative in `t` of the panelwise interpolant, evaluated at the nodes.
    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        let d = self.interpolator().diff_matrix();
        let mut out = vec![0.0; values.len()];
        for p in 0..self.n_panels() {
            let (a, b) = self.panel_bounds(p);
            let scale = 2.0 / (b - a);
            let r = self.panel_range(p);
            for (i, gi) in r.clone().enumerate() {
                out[gi] = scale
                    * r.clone()
                        .enumerate()
                        .map(|(j, gj)| d[i][j] * values[gj])
                        .sum::<f64>();
            }
        }
        out
    }

    /// `∫_0^π f dt` for nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.w).map(|(v, w)| v * w).sum()
    }
}

/// Nodal geometry on a [`Grid`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryCache {
    pub grid: Grid,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub dr: Vec<f64>,
    pub dz: Vec<f64>,
    pub ddr: Vec<f64>,
    pub ddz: Vec<f64>,
    pub alpha: Vec<f64>,
    pub kappa: Vec<f64>,
    /// `R α`.
    pub area_element: Vec<f64>,
    /// Inward unit normal `(Z′, −R′)/α`.
    pub n_r: Vec<f64>,
    pub n_z: Vec<f64>,
    /// Unit tangent `(R′, Z′)/α`.
    pub tau_r: Vec<f64>,
    pub tau_z: Vec<f64>,
}

pub fn geometry_at(curve: &dyn Meridian, grid: &Grid) -> Result<GeometryCache> {
    let n = grid.len();
    let mut g = GeometryCache {
        grid: grid.clone(),
        t: grid.t.clone(),
        r: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        dr: Vec::with_capacity(n),
        dz: Vec::with_capacity(n),
        ddr: Vec::with_capacity(n),
        ddz: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
        kappa: Vec::with_capacity(n),
        area_element: Vec::with_capacity(n),
        n_r: Vec::with_capacity(n),
        n_z: Vec::with_capacity(n),
        tau_r: Vec::with_capacity(n),
        tau_z: Vec::with_capacity(n),
    };
    for &t in &grid.t {
        let p = curve.point(t);
        let vals = [p.r, p.z, p.dr, p.dz, p.ddr, p.ddz];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(SwimError::NonFinite("curve evaluation"));
        }
        let alpha = p.dr.hypot(p.dz);
        if !(alpha > 1e-14) {
            return Err(SwimError::DegenerateParametrization(t));
        }
        g.r.push(p.r);
        g.z.push(p.z);
        g.dr.push(p.dr);
        g.dz.push(p.dz);
        g.ddr.push(p.ddr);
        g.ddz.push(p.ddz);
        g.alpha.push(alpha);
        g.kappa
            .push((p.dz * p.ddr - p.dr * p.ddz) / (alpha * alpha * alpha));
        g.area_element.push(p.r * alpha);
        g.n_r.push(p.dz / alpha);
        g.n_z.push(-p.dr / alpha);
        g.tau_r.push(p.dr / alpha);
        g.tau_z.push(p.dz / alpha);
    }
    let r_max = g.r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r_min = g.r.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(r_max > 0.0) || r_min <= 1e-8 * r_max {
        return Err(SwimError::DegenerateCurve(format!(
            "min R = {r_min:e} on the grid (max R = {r_max:e})"
        )));
    }
    Ok(g)
}

/// Volume, area and reduced volume of the body of revolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub volume: f64,
    pub area: f64,
    pub reduced_volume: f64,
}

impl GeometryCache {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Quadrature weight for `∫_Γ f dS` at node `i`: `2π R α w_i`.
    pub fn surface_weight(&self, i: usize) -> f64 {
        2.0 * PI * self.area_element[i] * self.grid.w[i]
    }

    pub fn surface_weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.surface_weight(i)).collect()
    }

    /// `∫_Γ f dS` for nodal values `f`.
    pub fn surface_integral(&self, f: &[f64]) -> f64 {
        f.iter()
            .enumerate()
            .map(|(i, v)| v * self.surface_weight(i))
            .sum()
    }

    pub fn measures(&self) -> Measures {
        let vol: Vec<f64> = (0..self.len())
            .map(|i| -PI * self.r[i] * self.r[i] * self.dz[i])
            .collect();
        let volume = self.grid.integrate(&vol);
        let area = self.surface_integral(&vec![1.0; self.len()]);
        Measures {
            volume,
            area,
            reduced_volume: reduced_volume(volume, area),
        }
    }
}

pub fn reduced_volume(volume: f64, area: f64) -> f64 {
    6.0 * PI.sqrt() * volume / area.powf(1.5)
}

/// Measures on a fine grid adapted to the curve.
pub fn measures(curve: &dyn Meridian) -> Result<Measures> {
    let grid = Grid::for_curve(curve, 32, 16, 2)?;
    Ok(geometry_at(curve, &grid)?.measures())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::splinecurve::curve::{AnalyticCurve, GeneratingCurve};
    use approx::assert_relative_eq;

    fn prolate_area(a: f64, b: f64) -> f64 {
        let e = (1.0 - b * b / (a * a)).sqrt();
        2.0 * PI * b * b * (1.0 + a / (b * e) * e.asin())
    }

    #[test]
    fn unit_sphere_geometry() {
        let grid = Grid::uniform(16, 16).unwrap();
        let g = geometry_at(&AnalyticCurve::Sphere { radius: 1.0 }, &grid).unwrap();
        for i in 0..g.len() {
            assert_relative_eq!(g.kappa[i], 1.0, epsilon = 1e-14);
            assert_relative_eq!(g.alpha[i], 1.0, epsilon = 1e-14);
            assert_relative_eq!(g.n_r[i], -g.t[i].sin(), epsilon = 1e-14);
            assert_relative_eq!(g.n_z[i], -g.t[i].cos(), epsilon = 1e-14);
            assert!((g.n_r[i] * g.tau_r[i] + g.n_z[i] * g.tau_z[i]).abs() < 1e-15);
        }
        let m = g.measures();
        assert_relative_eq!(m.volume, 4.0 * PI / 3.0, max_relative = 1e-13);
        assert_relative_eq!(m.area, 4.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(m.reduced_volume, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn spheroid_curvature_and_measures() {
        let c = AnalyticCurve::Spheroid { a: 2.0, b: 1.0 };
        let grid = Grid::from_breaks(vec![0.0, 1.0, PI / 2.0 - 0.3, PI / 2.0 + 0.3, PI], 16).unwrap();
        let g = geometry_at(&c, &grid).unwrap();
        // Ellipse curvature ab/(a² sin²t + b² cos²t)^{3/2}: a/b² at the poles,
        // b/a² at the equator.
        let exact = |t: f64| 2.0 / (4.0 * t.sin().powi(2) + t.cos().powi(2)).powf(1.5);
        assert_relative_eq!(exact(0.0), 2.0);
        for i in 0..g.len() {
            assert_relative_eq!(g.kappa[i], exact(g.t[i]), max_relative = 1e-13);
        }
        assert_relative_eq!(grid.interpolate(&g.kappa, PI / 2.0), 0.25, max_relative = 1e-9);
        let m = measures(&c).unwrap();
        assert_relative_eq!(m.volume, 8.0 * PI / 3.0, max_relative = 1e-12);
        let area = prolate_area(2.0, 1.0);
        assert_relative_eq!(m.area, area, max_relative = 1e-12);
        assert_relative_eq!(
            m.reduced_volume,
            6.0 * PI.sqrt() * (8.0 * PI / 3.0) / area.powf(1.5),
            max_relative = 1e-12
        );
    }

    #[test]
    fn scaling_leaves_reduced_volume_unchanged() {
        let c = GeneratingCurve::fit(&AnalyticCurve::Peanut { beta: 0.2 }, 24).unwrap();
        let m1 = measures(&c).unwrap();
        let m2 = measures(&c.scaled(2.0)).unwrap();
        assert_relative_eq!(m2.volume, 8.0 * m1.volume, max_relative = 1e-12);
        assert_relative_eq!(m2.area, 4.0 * m1.area, max_relative = 1e-12);
        assert_relative_eq!(m2.reduced_volume, m1.reduced_volume, max_relative = 1e-12);
        assert!(m1.reduced_volume < 1.0);
    }

    #[test]
    fn frenet_identity_on_spline_curve() {
        let c = GeneratingCurve::fit(&AnalyticCurve::Spheroid { a: 1.5, b: 1.0 }, 24).unwrap();
        let grid = Grid::for_curve(&c, 0, 16, 1).unwrap();
        let g = geometry_at(&c, &grid).unwrap();
        let dtr = grid.differentiate(&g.tau_r);
        let dtz = grid.differentiate(&g.tau_z);
        for i in 0..g.len() {
            let ak = g.alpha[i] * g.kappa[i];
            assert!((dtr[i] - ak * g.n_r[i]).abs() < 1e-7, "i={i}");
            assert!((dtz[i] - ak * g.n_z[i]).abs() < 1e-7, "i={i}");
        }
    }

    #[test]
    fn degenerate_curves_are_rejected() {
        let basis = crate::splinecurve::basis::build_basis(19, PI).unwrap();
        let zero = GeneratingCurve::from_free_params(&vec![0.0; 44], &basis).unwrap();
        let grid = Grid::for_curve(&zero, 0, 16, 1).unwrap();
        assert!(geometry_at(&zero, &grid).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn reduced_volume_is_similarity_invariant(a in 1.0f64..3.0, c in 0.2f64..5.0, dz in -2.0f64..2.0) {
            let s = GeneratingCurve::fit(&AnalyticCurve::Spheroid { a, b: 1.0 }, 20).unwrap();
            let m0 = measures(&s).unwrap();
            let m1 = measures(&s.scaled(c).shifted_z(dz)).unwrap();
            prop_assert!((m0.reduced_volume - m1.reduced_volume).abs() < 1e-12);
            prop_assert!((m1.volume / m0.volume - c.powi(3)).abs() < 1e-10 * c.powi(3));
            prop_assert!(m0.reduced_volume <= 1.0 + 1e-12);
        }
    }
}
