//! Uniform quintic B-spline basis on `[0, L]`.
//!
//! The basis is the shifted cardinal quintic spline `b(x)` supported on `[0, 6]`,
//! rescaled so that `[0, L]` holds `n_intervals` unit cells. Knots extend past both
//! ends of the domain (no clamping), so exactly `n_intervals + 5` functions overlap
//! the domain and the first/last five are the only ones nonzero at `t = 0` / `t = L`.

use crate::error::{Result, SwimError};

/// Polynomial degree of every basis function (support of six cells, C⁴ joins).
pub const DEGREE: usize = 5;
/// Number of basis functions that are nonzero on one knot cell.
pub const SUPPORT: usize = DEGREE + 1;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BasisSet {
    /// Fixed at 5 (quintic); kept for serialization.
    pub order: usize,
    pub n_intervals: usize,
    pub domain_length: f64,
}

/// Values and derivatives of the six basis functions that are nonzero at one point.
#[derive(Debug, Clone, Copy)]
pub struct BasisEval {
    /// Index of the first nonzero basis function.
    pub first: usize,
    pub val: [f64; SUPPORT],
    pub d1: [f64; SUPPORT],
    pub d2: [f64; SUPPORT],
}

impl BasisEval {
    /// Contract coefficient vector `c` against the basis: returns (f, f', f'').
    pub fn combine(&self, c: &[f64]) -> (f64, f64, f64) {
        let mut f = 0.0;
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        for r in 0..SUPPORT {
            let j = self.first + r;
            if let Some(&cj) = c.get(j) {
                f += cj * self.val[r];
                f1 += cj * self.d1[r];
                f2 += cj * self.d2[r];
            }
        }
        (f, f1, f2)
    }
}

/// Builds a quintic basis with `n_intervals` uniform cells on `[0, domain_length]`.
pub fn build_basis(n_intervals: usize, domain_length: f64) -> Result<BasisSet> {
    if n_intervals <= 10 {
        return Err(SwimError::TooFewIntervals(n_intervals));
    }
    if !(domain_length.is_finite() && domain_length > 0.0) {
        return Err(SwimError::InvalidArgument(format!(
            "domain length must be positive, got {domain_length}"
        )));
    }
    Ok(BasisSet {
        order: DEGREE,
        n_intervals,
        domain_length,
    })
}

/// Cox-de Boor triangle on unit-spaced knots for local coordinate `u` in `[0, 1]`.
///
/// `rows[d][r]` holds the degree-`d` function whose support starts `d - r` cells
/// to the left of the current cell.
fn cox_de_boor_rows(u: f64) -> [[f64; SUPPORT]; SUPPORT] {
    let mut rows = [[0.0; SUPPORT]; SUPPORT];
    rows[0][0] = 1.0;
    for d in 1..=DEGREE {
        let df = d as f64;
        for r in 0..=d {
            let left = if r >= 1 { rows[d - 1][r - 1] } else { 0.0 };
            let right = if r < d { rows[d - 1][r] } else { 0.0 };
            rows[d][r] = ((u + df - r as f64) * left + (r as f64 + 1.0 - u) * right) / df;
        }
    }
    rows
}

impl BasisSet {
    pub fn basis_count(&self) -> usize {
        self.n_intervals + DEGREE
    }

    /// Cell width in parameter units.
    pub fn spacing(&self) -> f64 {
        self.domain_length / self.n_intervals as f64
    }

    /// Knot positions inside the domain, including both ends.
    pub fn knots(&self) -> Vec<f64> {
        (0..=self.n_intervals)
            .map(|i| i as f64 * self.spacing())
            .collect()
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let x = t * self.n_intervals as f64 / self.domain_length;
        let cell = (x.floor().max(0.0) as usize).min(self.n_intervals - 1);
        (cell, x - cell as f64)
    }

    /// `k`-th derivative (`k ≤ 5`) of the six functions nonzero on the cell of `t`.
    pub fn derivatives(&self, t: f64, k: usize) -> (usize, [f64; SUPPORT]) {
        assert!(k <= DEGREE, "derivative order {k} exceeds the spline degree");
        let (cell, u) = self.locate(t);
        let rows = cox_de_boor_rows(u);
        (cell, self.differentiate_rows(&rows, k))
    }

    /// The `k`-th derivative of a uniform B-spline is the `k`-th backward difference
    /// of the degree-`5−k` functions, scaled by `(N_L/L)^k`.
    fn differentiate_rows(&self, rows: &[[f64; SUPPORT]; SUPPORT], k: usize) -> [f64; SUPPORT] {
        let scale = (self.n_intervals as f64 / self.domain_length).powi(k as i32);
        let deg = DEGREE - k;
        let lower = |j: isize| -> f64 {
            if (0..=deg as isize).contains(&j) {
                rows[deg][j as usize]
            } else {
                0.0
            }
        };
        let mut out = [0.0; SUPPORT];
        for (r, o) in out.iter_mut().enumerate() {
            let mut binom = 1.0;
            let mut acc = 0.0;
            for j in 0..=k {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binom * lower(r as isize - k as isize + j as isize);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
            *o = acc * scale;
        }
        out
    }

    pub fn eval(&self, t: f64) -> BasisEval {
        let (first, u) = self.locate(t);
        let rows = cox_de_boor_rows(u);
        BasisEval {
            first,
            val: rows[DEGREE],
            d1: self.differentiate_rows(&rows, 1),
            d2: self.differentiate_rows(&rows, 2),
        }
    }

    /// Dense row of all basis functions (or their `deriv`-th derivatives) at `t`.
    pub fn dense_row(&self, t: f64, deriv: usize) -> Vec<f64> {
        let (first, vals) = self.derivatives(t, deriv);
        let mut row = vec![0.0; self.basis_count()];
        for (r, v) in vals.iter().enumerate() {
            if let Some(slot) = row.get_mut(first + r) {
                *slot = *v;
            }
        }
        row
    }
}
