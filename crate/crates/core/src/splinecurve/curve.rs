//! Generating curves `t ↦ (R(t), Z(t))`, `t ∈ [0, π]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::{build_basis, BasisSet};
use crate::error::{Result, SwimError};

/// Position and first two parameter derivatives of the meridian at one `t`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CurvePoint {
    pub r: f64,
    pub z: f64,
    pub dr: f64,
    pub dz: f64,
    pub ddr: f64,
    pub ddz: f64,
}

/// Anything that can be evaluated as a meridian arc on `[0, π]`.
pub trait Meridian: Send + Sync {
    fn point(&self, t: f64) -> CurvePoint;

    /// Parameter values where the curve is only finitely smooth. Grids align
    /// panel boundaries with these; `None` means analytic everywhere.
    fn breakpoints(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Closed-form curves used as oracles and optimizer presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnalyticCurve {
    Sphere { radius: f64 },
    /// `R = b sin t`, `Z = a cos t`; `a` is the semi-axis along the symmetry axis.
    Spheroid { a: f64, b: f64 },
    /// Polar curve `ρ(t) = 1 + β cos 2t`.
    Peanut { beta: f64 },
    /// Elongated two-lobed body `R = sin t (1 + β cos 2t)`, `Z = a cos t`.
    Bilobed { a: f64, beta: f64 },
}

impl Meridian for AnalyticCurve {
    fn point(&self, t: f64) -> CurvePoint {
        let (s, c) = t.sin_cos();
        match *self {
            AnalyticCurve::Sphere { radius } => CurvePoint {
                r: radius * s,
                z: radius * c,
                dr: radius * c,
                dz: -radius * s,
                ddr: -radius * s,
                ddz: -radius * c,
            },
            AnalyticCurve::Spheroid { a, b } => CurvePoint {
                r: b * s,
                z: a * c,
                dr: b * c,
                dz: -a * s,
                ddr: -b * s,
                ddz: -a * c,
            },
            AnalyticCurve::Peanut { beta } => {
                let (s2, c2) = (2.0 * t).sin_cos();
                let rho = 1.0 + beta * c2;
                let drho = -2.0 * beta * s2;
                let ddrho = -4.0 * beta * c2;
                CurvePoint {
                    r: rho * s,
                    z: rho * c,
                    dr: drho * s + rho * c,
                    dz: drho * c - rho * s,
                    ddr: ddrho * s + 2.0 * drho * c - rho * s,
                    ddz: ddrho * c - 2.0 * drho * s - rho * c,
                }
            }
            AnalyticCurve::Bilobed { a, beta } => {
                let (s2, c2) = (2.0 * t).sin_cos();
                let g = 1.0 + beta * c2;
                let dg = -2.0 * beta * s2;
                let ddg = -4.0 * beta * c2;
                CurvePoint {
                    r: s * g,
                    z: a * c,
                    dr: c * g + s * dg,
                    dz: -a * s,
                    ddr: -s * g + 2.0 * c * dg + s * ddg,
                    ddz: -a * c,
                }
            }
        }
    }
}

/// Reduced volume of the prolate spheroid with axis ratio `a/b = k ≥ 1`.
pub fn spheroid_nu(k: f64) -> f64 {
    if k <= 1.0 {
        return 1.0;
    }
    let e = (1.0 - 1.0 / (k * k)).sqrt();
    let volume = 4.0 / 3.0 * PI * k;
    let area = 2.0 * PI * (1.0 + k / e * e.asin());
    super::grid::reduced_volume(volume, area)
}

/// Axis ratio `a/b` of the prolate spheroid with reduced volume `nu`.
pub fn spheroid_aspect_for_nu(nu: f64) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(SwimError::InvalidArgument(format!("reduced volume {nu} not in (0, 1]")));
    }
    if nu == 1.0 {
        return Ok(1.0);
    }
    Ok(bisect(|k| spheroid_nu(k) - nu, 1.0, 1e4))
}

/// Waist parameter of the peanut preset.
pub const PEANUT_WAIST: f64 = 0.5;

/// Peanut preset: the bilobed body with `β = PEANUT_WAIST` elongated to reduced
/// volume `nu`.
pub fn peanut_for_nu(nu: f64) -> Result<AnalyticCurve> {
    let shape = |a: f64| AnalyticCurve::Bilobed {
        a,
        beta: PEANUT_WAIST,
    };
    let nu_of = |a: f64| {
        super::grid::measures(&shape(a))
            .map(|m| m.reduced_volume)
            .unwrap_or(0.0)
    };
    let (lo, hi) = (0.8, 20.0);
    if !(nu <= nu_of(lo) && nu >= nu_of(hi)) {
        return Err(SwimError::InvalidArgument(format!("no peanut with reduced volume {nu}")));
    }
    Ok(shape(bisect(|a| nu_of(a) - nu, lo, hi)))
}

/// Root of a decreasing function on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// B-spline meridian with pole constraints eliminated.
///
/// `xi_r`, `xi_z` hold all `N_γ = N_L + 5` coefficients; the first and last of each
/// are dependent and recomputed from the free ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingCurve {
    pub xi_r: Vec<f64>,
    pub xi_z: Vec<f64>,
    pub basis: BasisSet,
}

/// How the dependent end coefficient is recovered: `ξ_0 = Σ_{k=1..4} c_k ξ_k`.
#[derive(Debug, Clone, Copy)]
struct EndElimination {
    head: [f64; 4],
    tail: [f64; 4],
}

fn elimination(basis: &BasisSet, deriv: usize) -> Result<EndElimination> {
    let n = basis.basis_count();
    let r0 = basis.dense_row(0.0, deriv);
    let r1 = basis.dense_row(basis.domain_length, deriv);
    let p0 = r0[0];
    let p1 = r1[n - 1];
    if p0.abs() < 1e-14 || p1.abs() < 1e-14 {
        return Err(SwimError::Singular("pole constraint elimination"));
    }
    let mut head = [0.0; 4];
    let mut tail = [0.0; 4];
    for k in 0..4 {
        head[k] = -r0[k + 1] / p0;
        tail[k] = -r1[n - 5 + k] / p1;
    }
    Ok(EndElimination { head, tail })
}

fn complete(inner: &[f64], e: &EndElimination) -> Vec<f64> {
    let m = inner.len();
    let mut xi = Vec::with_capacity(m + 2);
    let first: f64 = (0..4).map(|k| e.head[k] * inner[k]).sum();
    let last: f64 = (0..4).map(|k| e.tail[k] * inner[m - 4 + k]).sum();
    xi.push(first);
    xi.extend_from_slice(inner);
    xi.push(last);
    xi
}

impl GeneratingCurve {
    /// Number of spline coefficients per component (`N_γ`).
    pub fn n_gamma(&self) -> usize {
        self.basis.basis_count()
    }

    pub fn free_dof(&self) -> usize {
        2 * self.n_gamma() - 4
    }

    /// Builds the full coefficient vectors from `[ξ_R[1..N-1], ξ_Z[1..N-1]]`.
    pub fn from_free_params(free: &[f64], basis: &BasisSet) -> Result<Self> {
        let n = basis.basis_count();
        let expected = 2 * n - 4;
        if free.len() != expected {
            return Err(SwimError::DimensionMismatch {
                expected,
                got: free.len(),
            });
        }
        if free.iter().any(|v| !v.is_finite()) {
            return Err(SwimError::NonFinite("free shape parameters"));
        }
        let er = elimination(basis, 0)?;
        let ez = elimination(basis, 1)?;
        let m = n - 2;
        Ok(Self {
            xi_r: complete(&free[..m], &er),
            xi_z: complete(&free[m..], &ez),
            basis: *basis,
        })
    }

    pub fn free_params(&self) -> Vec<f64> {
        let n = self.n_gamma();
        let mut v = Vec::with_capacity(2 * n - 4);
        v.extend_from_slice(&self.xi_r[1..n - 1]);
        v.extend_from_slice(&self.xi_z[1..n - 1]);
        v
    }

    /// Maps a free-parameter direction to full coefficient perturbations `(ζ_R, ζ_Z)`.
    pub fn expand_direction(&self, zeta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let c = Self::from_free_params(zeta, &self.basis)?;
        Ok((c.xi_r, c.xi_z))
    }

    /// Least-squares fit to a sampled meridian, honoring the pole constraints.
    pub fn fit_samples(samples: &[(f64, f64, f64)], basis: &BasisSet) -> Result<Self> {
        let n = basis.basis_count();
        let m = n - 2;
        if samples.len() < m {
            return Err(SwimError::InvalidArgument(format!(
                "need at least {m} samples to fit the curve, got {}",
                samples.len()
            )));
        }
        let er = elimination(basis, 0)?;
        let ez = elimination(basis, 1)?;
        let design = |e: &EndElimination| {
            let mut a = DMatrix::<f64>::zeros(samples.len(), m);
            for (i, &(t, _, _)) in samples.iter().enumerate() {
                let row = basis.dense_row(t, 0);
                for k in 0..m {
                    let mut v = row[k + 1];
                    if k < 4 {
                        v += e.head[k] * row[0];
                    }
                    if k >= m - 4 {
                        v += e.tail[k + 4 - m] * row[n - 1];
                    }
                    a[(i, k)] = v;
                }
            }
            a
        };
        let solve = |a: DMatrix<f64>, rhs: DVector<f64>| -> Result<Vec<f64>> {
            let svd = a.svd(true, true);
            let x = svd
                .solve(&rhs, 1e-13)
                .map_err(|_| SwimError::Singular("curve fit"))?;
            Ok(x.iter().copied().collect())
        };
        let rr = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
        let zz = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.2));
        let mut free = solve(design(&er), rr)?;
        free.extend(solve(design(&ez), zz)?);
        Self::from_free_params(&free, basis)
    }

    /// Fits a spline with `n_gamma` coefficients to another meridian.
    pub fn fit(target: &dyn Meridian, n_gamma: usize) -> Result<Self> {
        if n_gamma < 6 {
            return Err(SwimError::TooFewIntervals(n_gamma.saturating_sub(5)));
        }
        let basis = build_basis(n_gamma - 5, PI)?;
        let n_samples = 40 * n_gamma;
        let samples: Vec<(f64, f64, f64)> = (0..=n_samples)
            .map(|i| {
                let t = PI * i as f64 / n_samples as f64;
                let p = target.point(t);
                (t, p.r, p.z)
            })
            .collect();
        Self::fit_samples(&samples, &basis)
    }

    /// Uniform scaling about the origin.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            xi_r: self.xi_r.iter().map(|v| v * c).collect(),
            xi_z: self.xi_z.iter().map(|v| v * c).collect(),
            basis: self.basis,
        }
    }

    /// Rigid shift along the axis (partition of unity makes this a coefficient shift).
    pub fn shifted_z(&self, dz: f64) -> Self {
        Self {
            xi_r: self.xi_r.clone(),
            xi_z: self.xi_z.iter().map(|v| v + dz).collect(),
            basis: self.basis,
        }
    }
}

impl Meridian for GeneratingCurve {
    fn point(&self, t: f64) -> CurvePoint {
        let e = self.basis.eval(t);
        let (r, dr, ddr) = e.combine(&self.xi_r);
        let (z, dz, ddz) = e.combine(&self.xi_z);
        CurvePoint {
            r,
            z,
            dr,
            dz,
            ddr,
            ddz,
        }
    }

    fn breakpoints(&self) -> Option<Vec<f64>> {
        Some(self.basis.knots())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bilobed_derivatives() {
        let c = AnalyticCurve::Bilobed { a: 2.0, beta: 0.5 };
        let h = 1e-5;
        for &t in &[0.3, 1.1, 2.5] {
            let (p, m, q) = (c.point(t + h), c.point(t - h), c.point(t));
            assert!(((p.r - m.r) / (2.0 * h) - q.dr).abs() < 1e-8);
            assert!(((p.dr - m.dr) / (2.0 * h) - q.ddr).abs() < 1e-8);
            assert!(((p.dz - m.dz) / (2.0 * h) - q.ddz).abs() < 1e-8);
        }
    }

    #[test]
    fn reduced_volume_presets() {
        for nu in [0.6, 0.7, 0.9] {
            let k = spheroid_aspect_for_nu(nu).unwrap();
            let m = super::super::grid::measures(&AnalyticCurve::Spheroid { a: k, b: 1.0 }).unwrap();
            assert!((m.reduced_volume - nu).abs() < 1e-12);
        }
        for nu in [0.65, 0.7, 0.75] {
            let m = super::super::grid::measures(&peanut_for_nu(nu).unwrap()).unwrap();
            assert!((m.reduced_volume - nu).abs() < 1e-12);
        }
        assert_eq!(spheroid_aspect_for_nu(1.0).unwrap(), 1.0);
        assert!(spheroid_aspect_for_nu(1.2).is_err());
    }

    #[test]
    fn sphere_fit_is_accurate() {
        let c = GeneratingCurve::fit(&AnalyticCurve::Sphere { radius: 1.0 }, 24).unwrap();
        assert_eq!(c.free_dof(), 44);
        let mut err: f64 = 0.0;
        for i in 0..=1000 {
            let t = PI * i as f64 / 1000.0;
            let p = c.point(t);
            err = err.max((p.r - t.sin()).abs()).max((p.z - t.cos()).abs());
        }
        assert!(err < 1e-6, "fit error {err}");
        assert!(c.point(0.0).r.abs() < 1e-12);
        assert!(c.point(PI).r.abs() < 1e-12);
    }

    #[test]
    fn free_round_trip() {
        let c = GeneratingCurve::fit(&AnalyticCurve::Spheroid { a: 2.0, b: 1.0 }, 20).unwrap();
        let free = c.free_params();
        let c2 = GeneratingCurve::from_free_params(&free, &c.basis).unwrap();
        assert_eq!(c, c2);
        assert!(GeneratingCurve::from_free_params(&free[1..], &c.basis).is_err());
    }

    #[test]
    fn peanut_derivatives_match_differences() {
        let p = AnalyticCurve::Peanut { beta: 0.3 };
        let h = 1e-5;
        for &t in &[0.2, 1.1, 2.9] {
            let (a, b, c) = (p.point(t - h), p.point(t), p.point(t + h));
            assert!(((c.r - a.r) / (2.0 * h) - b.dr).abs() < 1e-8);
            assert!(((c.z - a.z) / (2.0 * h) - b.dz).abs() < 1e-8);
            assert!(((c.dr - a.dr) / (2.0 * h) - b.ddr).abs() < 1e-8);
            assert!(((c.dz - a.dz) / (2.0 * h) - b.ddz).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn pole_constraints_hold_for_random_params(
            free in proptest::collection::vec(-3.0f64..3.0, 44)
        ) {
            let basis = build_basis(19, PI).unwrap();
            let c = GeneratingCurve::from_free_params(&free, &basis).unwrap();
            let norm = c.xi_r.iter().chain(&c.xi_z).map(|v| v * v).sum::<f64>().sqrt();
            let (a, b) = (c.point(0.0), c.point(PI));
            let tol = 1e-10 * norm.max(1e-300);
            prop_assert!(a.r.abs() <= tol && b.r.abs() <= tol);
            prop_assert!(a.dz.abs() <= tol && b.dz.abs() <= tol);
        }
    }
}
