//! Azimuthal integration of the Stokeslet, its stress and its pressure.
//!
//! For a target `x = (x_r, 0, x_z)` and a source ring of radius `y_r` at height `y_z`,
//! all reduced kernels are combinations of the moments
//! `I(n, k) = ∫₀^{2π} (1 − cos φ)^k ρ^{−n} dφ`, `ρ² = Δr² + Δz² + 2 x_r y_r (1 − cos φ)`.
//! With `w = 1 − cos φ = 2cos²ψ` these become complete elliptic integrals in the
//! parameter `m = 4 x_r y_r / ((x_r + y_r)² + Δz²)`.

use std::f64::consts::PI;

use super::elliptic::complete_ke;
use crate::error::{Result, SwimError};

/// Switch from the elliptic reduction to periodic trapezoidal quadrature below this `m`.
const TRAPEZOID_MAX_M: f64 = 0.75;
/// Trapezoid points on `[0, 2π)` (even).
const TRAPEZOID_POINTS: usize = 48;

/// Azimuthal moments `I(1,0..2)`, `I(3,0..3)`, `I(5,0..4)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub i1: [f64; 2],
    pub i3: [f64; 3],
    pub i5: [f64; 4],
}

/// Which moment families to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentMask {
    pub i1: bool,
    pub i3: bool,
    pub i5: bool,
}

impl MomentMask {
    pub const ALL: Self = Self {
        i1: true,
        i3: true,
        i5: true,
    };
}

/// Relative position of a target and a source ring. `dr = x_r − y_r` and
/// `dz = x_z − y_z` are passed separately so callers can supply them without
/// cancellation when the two points nearly coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub x_r: f64,
    pub y_r: f64,
    pub dr: f64,
    pub dz: f64,
}

impl Pair {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self {
            x_r: x.0,
            y_r: y.0,
            dr: x.0 - y.0,
            dz: x.1 - y.1,
        }
    }
}

pub fn moments(p: &Pair, mask: MomentMask) -> Result<Moments> {
    let sum_r = p.x_r + p.y_r;
    let apb = sum_r * sum_r + p.dz * p.dz;
    let amb = p.dr * p.dr + p.dz * p.dz;
    if !(amb > 0.0) || !apb.is_finite() {
        return Err(SwimError::EllipticModulus(1.0));
    }
    let m = (4.0 * p.x_r * p.y_r / apb).max(0.0);
    let m1 = amb / apb;
    if m <= TRAPEZOID_MAX_M {
        Ok(trapezoid(p, mask))
    } else {
        elliptic(m, m1, apb, mask)
    }
}

fn trapezoid(p: &Pair, mask: MomentMask) -> Moments {
    let amb = p.dr * p.dr + p.dz * p.dz;
    let b = 2.0 * p.x_r * p.y_r;
    let n = TRAPEZOID_POINTS;
    let h = 2.0 * PI / n as f64;
    let mut out = Moments::default();
    for j in 0..=n / 2 {
        let wt = if j == 0 || j == n / 2 { h } else { 2.0 * h };
        let w = 1.0 - (j as f64 * h).cos();
        let rho2 = amb + b * w;
        let inv_rho = 1.0 / rho2.sqrt();
        let inv_rho2 = inv_rho * inv_rho;
        let r1 = inv_rho * wt;
        let r3 = r1 * inv_rho2;
        let r5 = r3 * inv_rho2;
        if mask.i1 {
            out.i1[0] += r1;
            out.i1[1] += r1 * w;
        }
        if mask.i3 {
            out.i3[0] += r3;
            out.i3[1] += r3 * w;
            out.i3[2] += r3 * w * w;
        }
        if mask.i5 {
            out.i5[0] += r5;
            out.i5[1] += r5 * w;
            out.i5[2] += r5 * w * w;
            out.i5[3] += r5 * w * w * w;
        }
    }
    out
}

/// `P_q = ∫₀^{π/2} (1 − m sin²ψ)^{q/2} dψ` for odd `q ∈ [−5, 5]`, indexed by `(q + 5)/2`.
fn p_table(m: f64, m1: f64) -> Result<[f64; 6]> {
    let (k, e) = complete_ke(m1)?;
    let pm1 = k;
    let p1 = e;
    let pm3 = e / m1;
    let pm5 = (2.0 * (2.0 - m) * pm3 - k) / (3.0 * m1);
    let p3 = (2.0 * (2.0 - m) * e - m1 * k) / 3.0;
    let p5 = (4.0 * (2.0 - m) * p3 - 3.0 * m1 * p1) / 5.0;
    Ok([pm5, pm3, pm1, p1, p3, p5])
}

fn elliptic(m: f64, m1: f64, apb: f64, mask: MomentMask) -> Result<Moments> {
    let p = p_table(m, m1)?;
    let pq = |q: i32| p[((q + 5) / 2) as usize];
    // ∫ cos^{2k}ψ D^{−n/2} dψ with cos²ψ = (D − m1)/m.
    let q_kn = |k: i32, n: i32| -> f64 {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for i in 0..=k {
            acc += binom * (-m1).powi(k - i) * pq(2 * i - n);
            binom = binom * (k - i) as f64 / (i + 1) as f64;
        }
        acc / m.powi(k)
    };
    let s = apb.sqrt();
    let moment = |n: i32, k: i32| 4.0 * 2f64.powi(k) * q_kn(k, n) / s.powi(n);
    let mut out = Moments::default();
    if mask.i1 {
        out.i1 = [moment(1, 0), moment(1, 1)];
    }
    if mask.i3 {
        out.i3 = [moment(3, 0), moment(3, 1), moment(3, 2)];
    }
    if mask.i5 {
        out.i5 = [moment(5, 0), moment(5, 1), moment(5, 2), moment(5, 3)];
    }
    Ok(out)
}

/// Reduced single-layer block (without `1/(8πμ)`), rows/cols `(r, z)`.
pub fn single_layer_block(p: &Pair, mo: &Moments) -> [[f64; 2]; 2] {
    let (dr, dz) = (p.dr, p.dz);
    let [a0, a1] = mo.i1;
    let [b0, b1, b2] = mo.i3;
    [
        [
            a0 - a1 + dr * dr * (b0 - b1) - p.x_r * p.y_r * b2,
            dz * (dr * b0 + p.y_r * b1),
        ],
        [dz * (dr * b0 - p.x_r * b1), a0 + dz * dz * b0],
    ]
}

/// Reduced stress block `−(3/4π) ∫ r_i r_j (r·n_x)/ρ⁵ dφ` for target normal `(n_r, n_z)`.
pub fn traction_block(p: &Pair, mo: &Moments, n_r: f64, n_z: f64) -> [[f64; 2]; 2] {
    let (dr, dz, xr, yr) = (p.dr, p.dz, p.x_r, p.y_r);
    let h = n_r * dr + n_z * dz;
    let g = n_r * yr;
    let i = mo.i5;
    let dr2 = dr * dr;
    let xy = xr * yr;
    let rr = dr2 * h * i[0] + dr2 * (g - h) * i[1] - (dr2 * g + xy * h) * i[2] - xy * g * i[3];
    let rz = dz * (dr * h * i[0] + (dr * g + yr * h) * i[1] + yr * g * i[2]);
    let zr = dz * (dr * h * i[0] + (dr * g - xr * h) * i[1] - xr * g * i[2]);
    let zz = dz * dz * (h * i[0] + g * i[1]);
    let c = -3.0 / (4.0 * PI);
    [[c * rr, c * rz], [c * zr, c * zz]]
}

/// Reduced pressure row `(1/4π) ∫ r·ζ/ρ³ dφ`, columns `(r, z)`.
pub fn pressure_block(p: &Pair, mo: &Moments) -> [f64; 2] {
    let c = 1.0 / (4.0 * PI);
    [
        c * (p.dr * mo.i3[0] - p.x_r * mo.i3[1]),
        c * p.dz * mo.i3[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct trapezoid over φ with many points, using the 3-D kernels.
    fn brute(x: (f64, f64), y: (f64, f64), n: (f64, f64)) -> ([[f64; 2]; 2], [[f64; 2]; 2], [f64; 2]) {
        let np = 20000;
        let h = 2.0 * PI / np as f64;
        let mut s = [[0.0; 2]; 2];
        let mut t = [[0.0; 2]; 2];
        let mut pr = [0.0; 2];
        let xv = [x.0, 0.0, x.1];
        let nv = [n.0, 0.0, n.1];
        for j in 0..np {
            let phi = j as f64 * h;
            let (sp, cp) = phi.sin_cos();
            let yv = [y.0 * cp, y.0 * sp, y.1];
            let r = [xv[0] - yv[0], xv[1] - yv[1], xv[2] - yv[2]];
            let rho = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            // source directions e_r(φ), e_z; output directions e_x, e_z at the target
            let src = [[cp, sp, 0.0], [0.0, 0.0, 1.0]];
            let out = [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
            let rn = r[0] * nv[0] + r[2] * nv[2];
            for a in 0..2 {
                let ra = r[0] * out[a][0] + r[2] * out[a][2];
                for b in 0..2 {
                    let rb = r[0] * src[b][0] + r[1] * src[b][1] + r[2] * src[b][2];
                    let dab = out[a][0] * src[b][0] + out[a][2] * src[b][2];
                    s[a][b] += h * (dab / rho + ra * rb / rho.powi(3));
                    t[a][b] += h * (-3.0 / (4.0 * PI)) * ra * rb * rn / rho.powi(5);
                }
            }
            for b in 0..2 {
                let rb = r[0] * src[b][0] + r[1] * src[b][1] + r[2] * src[b][2];
                pr[b] += h * rb / rho.powi(3) / (4.0 * PI);
            }
        }
        (s, t, pr)
    }

    fn check(x: (f64, f64), y: (f64, f64), n: (f64, f64), tol: f64) {
        let p = Pair::new(x, y);
        let mo = moments(&p, MomentMask::ALL).unwrap();
        let (s, t, pr) = brute(x, y, n);
        let s2 = single_layer_block(&p, &mo);
        let t2 = traction_block(&p, &mo, n.0, n.1);
        let p2 = pressure_block(&p, &mo);
        let scale_s = s.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale_t = t.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale_p = pr.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for a in 0..2 {
            for b in 0..2 {
                assert!((s[a][b] - s2[a][b]).abs() <= tol * scale_s, "S{a}{b} {x:?} {y:?}");
                assert!((t[a][b] - t2[a][b]).abs() <= tol * scale_t, "T{a}{b} {x:?} {y:?}");
            }
            assert!((pr[a] - p2[a]).abs() <= tol * scale_p, "P{a} {x:?} {y:?}");
        }
    }

    #[test]
    fn matches_brute_force_for_separated_points() {
        let n = (0.6, -0.8);
        check((1.0, 0.2), (0.7, -0.5), n, 1e-10); // moderate m
        check((1.0, 0.0), (0.95, 0.1), n, 1e-10); // m close to 1: elliptic branch
        check((0.3, 1.0), (2.0, -1.0), n, 1e-10); // small m: trapezoid branch
        check((1.0, 0.0), (0.999, 0.02), n, 1e-10);
    }

    #[test]
    fn near_axis_limit() {
        let n = (0.0, -1.0);
        check((1e-4, 1.0), (0.8, 0.3), n, 1e-10);
        check((0.5, 1.0), (1e-5, 0.2), n, 1e-10);
    }

    #[test]
    fn branches_agree_at_switch() {
        // pick points straddling m = 0.75 and compare both evaluations directly
        let p = Pair::new((1.0, 0.0), (1.0, 2.0 / 3.0f64.sqrt()));
        let apb = (p.x_r + p.y_r).powi(2) + p.dz * p.dz;
        let m = 4.0 * p.x_r * p.y_r / apb;
        let m1 = (p.dr * p.dr + p.dz * p.dz) / apb;
        let a = trapezoid(&p, MomentMask::ALL);
        let b = elliptic(m, m1, apb, MomentMask::ALL).unwrap();
        for (u, v) in a.i5.iter().zip(&b.i5).chain(a.i3.iter().zip(&b.i3)) {
            assert!((u - v).abs() < 1e-12 * u.abs().max(1e-300), "{u} {v}");
        }
    }

    #[test]
    fn stokeslet_reciprocity() {
        for &(x, y) in &[((1.0, 0.3), (0.4, -0.2)), ((0.9, 0.0), (0.91, 0.01)), ((0.2, 1.0), (1.5, 0.0))] {
            let p = Pair::new(x, y);
            let q = Pair::new(y, x);
            let a = single_layer_block(&p, &moments(&p, MomentMask::ALL).unwrap());
            let b = single_layer_block(&q, &moments(&q, MomentMask::ALL).unwrap());
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[i][j] - b[j][i]).abs() < 1e-12 * a[i][j].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn log_coefficient_of_self_limit() {
        // S_zz ~ −(2/x_r) ln d as the source approaches the target along the surface.
        let x = (1.0, 0.0);
        let f = |d: f64| {
            let p = Pair::new(x, (1.0, d));
            single_layer_block(&p, &moments(&p, MomentMask::ALL).unwrap())[1][1]
        };
        let (d1, d2) = (1e-6, 1e-7);
        let slope = (f(d2) - f(d1)) / (d2.ln() - d1.ln());
        assert!((slope + 2.0).abs() < 1e-5, "slope {slope}");
    }
}
