//! Transformation velocity fields `θ` restricted to the boundary.

use serde::{Deserialize, Serialize};

use super::curve::GeneratingCurve;
use super::grid::GeometryCache;
use crate::error::{Result, SwimError};

/// Nodal tangential/normal components of a boundary perturbation.
///
/// `theta_n` is measured along the inward normal of the geometry it was built on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapePerturbation {
    /// Coefficient perturbations; empty for fields not generated by the spline.
    pub zeta_r: Vec<f64>,
    pub zeta_z: Vec<f64>,
    pub theta_tau: Vec<f64>,
    pub theta_n: Vec<f64>,
    /// `dθ_n/dt`.
    pub d_theta_n: Vec<f64>,
}

impl ShapePerturbation {
    /// Builds nodal components from `θ = θ_r e_r + θ_z e_z` and its `t`-derivative.
    ///
    /// `field(t) = (θ_r, θ_z, θ_r′, θ_z′)`.
    pub fn from_field(geom: &GeometryCache, field: impl Fn(f64) -> [f64; 4]) -> Self {
        let n = geom.len();
        let mut theta_tau = Vec::with_capacity(n);
        let mut theta_n = Vec::with_capacity(n);
        let mut d_theta_n = Vec::with_capacity(n);
        for i in 0..n {
            let [tr, tz, dtr, dtz] = field(geom.t[i]);
            let tt = tr * geom.tau_r[i] + tz * geom.tau_z[i];
            theta_tau.push(tt);
            theta_n.push(tr * geom.n_r[i] + tz * geom.n_z[i]);
            // n′ = −ακ τ
            let ak = geom.alpha[i] * geom.kappa[i];
            d_theta_n.push(dtr * geom.n_r[i] + dtz * geom.n_z[i] - ak * tt);
        }
        Self {
            zeta_r: Vec::new(),
            zeta_z: Vec::new(),
            theta_tau,
            theta_n,
            d_theta_n,
        }
    }

    /// Purely normal field `θ = θ_n n` given nodal `θ_n` and `θ_n′`.
    pub fn normal(theta_n: Vec<f64>, d_theta_n: Vec<f64>) -> Self {
        let n = theta_n.len();
        Self {
            zeta_r: Vec::new(),
            zeta_z: Vec::new(),
            theta_tau: vec![0.0; n],
            theta_n,
            d_theta_n,
        }
    }

    pub fn len(&self) -> usize {
        self.theta_n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_n.is_empty()
    }
}

/// Perturbation generated by moving the free shape parameters along `zeta`.
pub fn perturbation_field(
    zeta: &[f64],
    curve: &GeneratingCurve,
    geom: &GeometryCache,
) -> Result<ShapePerturbation> {
    if geom.is_empty() {
        return Err(SwimError::InvalidArgument("empty geometry".into()));
    }
    let (zr, zz) = curve.expand_direction(zeta)?;
    let mut p = ShapePerturbation::from_field(geom, |t| {
        let e = curve.basis.eval(t);
        let (r, dr, _) = e.combine(&zr);
        let (z, dz, _) = e.combine(&zz);
        [r, z, dr, dz]
    });
    p.zeta_r = zr;
    p.zeta_z = zz;
    Ok(p)
}
