//! Tangential slip profiles `u^S(t) = Σ_k ξ_k w_k(t)`.
//!
//! The `N_u` coefficients are slip values at the interior nodes `t_j = jπ/(N_u+1)`.
//! The sample vector is extended oddly about `t = π` to `[0, 2π]` and interpolated by
//! a quintic spline whose first four derivatives agree at `0` and `2π`, so the
//! profile is a smooth odd periodic function and vanishes at both poles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, LU};
use serde::{Deserialize, Serialize};

use super::basis::{BasisSet, DEGREE};
use crate::error::{Result, SwimError};

/// Linear map from interior samples to spline coefficients on `[0, 2π]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlipBasis {
    pub n_u: usize,
    pub basis: BasisSet,
    /// `basis_count × n_u`, row-major: column `k` holds the coefficients of `w_k`.
    pub coef: Vec<f64>,
}

impl SlipBasis {
    pub fn new(n_u: usize) -> Result<Self> {
        if n_u == 0 {
            return Err(SwimError::InvalidArgument("slip needs N_u >= 1".into()));
        }
        let n_l = 2 * n_u + 2;
        // The shape-curve minimum on interval count does not apply here: N_u >= 1
        // already gives at least four cells on [0, 2π].
        let basis = BasisSet {
            order: DEGREE,
            n_intervals: n_l,
            domain_length: 2.0 * PI,
        };
        let nb = basis.basis_count();
        let h = basis.spacing();

        // Rows: interpolation at every knot of [0, 2π], then periodicity of d^1..d^4.
        let mut a = DMatrix::<f64>::zeros(nb, nb);
        for j in 0..=n_l {
            let row = basis.dense_row(j as f64 * h, 0);
            for k in 0..nb {
                a[(j, k)] = row[k];
            }
        }
        for d in 1..=4 {
            let r0 = basis.dense_row(0.0, d);
            let r1 = basis.dense_row(2.0 * PI, d);
            for k in 0..nb {
                a[(n_l + d, k)] = r1[k] - r0[k];
            }
        }
        let lu = LU::new(a);

        let mut coef = vec![0.0; nb * n_u];
        for k in 0..n_u {
            // Odd extension of e_k: +1 at t_{k+1}, −1 at its mirror 2π − t_{k+1}.
            let mut rhs = nalgebra::DVector::<f64>::zeros(nb);
            rhs[k + 1] = 1.0;
            rhs[n_l - (k + 1)] = -1.0;
            let c = lu
                .solve(&rhs)
                .ok_or(SwimError::Singular("slip interpolation system"))?;
            for i in 0..nb {
                coef[i * n_u + k] = c[i];
            }
        }
        Ok(Self { n_u, basis, coef })
    }

    /// Interior sample locations `jπ/(N_u+1)`, `j = 1..N_u`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = PI / (self.n_u as f64 + 1.0);
        (1..=self.n_u).map(|j| j as f64 * h).collect()
    }

    /// Values (`deriv = 0`) or derivatives of every `w_k` at `t`.
    pub fn eval_all(&self, t: f64, deriv: usize) -> Vec<f64> {
        let e = self.basis.eval(t);
        let mut out = vec![0.0; self.n_u];
        for r in 0..e.val.len() {
            let i = e.first + r;
            let b = match deriv {
                0 => e.val[r],
                1 => e.d1[r],
                _ => e.d2[r],
            };
            if b == 0.0 {
                continue;
            }
            let row = &self.coef[i * self.n_u..(i + 1) * self.n_u];
            for (o, c) in out.iter_mut().zip(row) {
                *o += b * c;
            }
        }
        out
    }
}

/// A slip profile: coefficients plus the cardinal basis they multiply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlipProfile {
    pub xi_u: Vec<f64>,
    pub basis: SlipBasis,
}

pub fn slip_from_params(xi_u: &[f64], basis: &SlipBasis) -> Result<SlipProfile> {
    if xi_u.len() != basis.n_u {
        return Err(SwimError::DimensionMismatch {
            expected: basis.n_u,
            got: xi_u.len(),
        });
    }
    if xi_u.iter().any(|v| !v.is_finite()) {
        return Err(SwimError::NonFinite("slip coefficients"));
    }
    Ok(SlipProfile {
        xi_u: xi_u.to_vec(),
        basis: basis.clone(),
    })
}

impl SlipProfile {
    /// Samples `f` at the interior nodes.
    pub fn interpolate(f: impl Fn(f64) -> f64, basis: &SlipBasis) -> Self {
        let xi_u = basis.nodes().into_iter().map(f).collect();
        Self {
            xi_u,
            basis: basis.clone(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        dot(&self.basis.eval_all(t, 0), &self.xi_u)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        dot(&self.basis.eval_all(t, 1), &self.xi_u)
    }

    pub fn values(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.value(t)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
