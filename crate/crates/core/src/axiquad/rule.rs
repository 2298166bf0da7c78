//! Geometrically graded Gauss–Legendre rules for log-singular and Cauchy-type kernels.
//!
//! A panel containing (or adjacent to) the singular point `t` is split into
//! subintervals whose lengths shrink by `ratio` towards `t`; each carries a
//! Gauss–Legendre rule of the panel order. Integrands with `log|s − t|` or bounded
//! jump behavior are then integrated to near machine precision. Principal values
//! of `f(s)/(s − t)` are obtained by subtracting `f(t)/(s − t)` and adding its
//! closed-form integral.

use serde::{Deserialize, Serialize};

use super::gauss::gauss_legendre;
use crate::error::{Result, SwimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularRule {
    pub order: usize,
    /// Base Gauss–Legendre rule on `[-1, 1]`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Length ratio between consecutive graded subintervals.
    pub ratio: f64,
    /// Geometric grading towards an interior singular point stops at this fraction
    /// of the side length; the remainder `[0, δ]` uses the substitution `s = δ u^power`.
    pub inner_fraction: f64,
    pub inner_power: i32,
    /// Panels on each side of the target's panel treated as near field.
    pub band: usize,
}

pub fn build_singular_rule(panel_order: usize) -> Result<SingularRule> {
    // Chosen so a log endpoint singularity at the short end of each subinterval is
    // resolved to ~1e-13 by the panel's Gauss–Legendre rule.
    let ratio = match panel_order {
        8 => 0.45,
        12 => 0.3,
        16 => 0.2,
        _ => return Err(SwimError::UnsupportedOrder(panel_order)),
    };
    let (nodes, weights) = gauss_legendre(panel_order);
    Ok(SingularRule {
        order: panel_order,
        nodes,
        weights,
        ratio,
        inner_fraction: 1e-2,
        inner_power: 6,
        band: 2,
    })
}

impl SingularRule {
    fn push_interval(&self, lo: f64, hi: f64, out: &mut Vec<(f64, f64)>) {
        let h = 0.5 * (hi - lo);
        let c = 0.5 * (hi + lo);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            out.push((c + h * x, h * w));
        }
    }

    /// Geometric subintervals on `[e, e + len·dir]` shrinking towards `e` until the
    /// uncovered remainder `[e, e + rest·dir]` is no longer than `stop`; returns `rest`.
    fn graded_levels(&self, e: f64, len: f64, dir: f64, stop: f64, out: &mut Vec<(f64, f64)>) -> f64 {
        let mut outer = len;
        while outer > stop {
            let inner = outer * self.ratio;
            let (a, b) = (e + dir * inner, e + dir * outer);
            self.push_interval(a.min(b), a.max(b), out);
            outer = inner;
        }
        outer
    }

    /// Geometric levels towards `t` followed by the polynomial substitution on the
    /// innermost piece, for one side `[t, t + len·dir]`.
    fn singular_side(&self, t: f64, len: f64, dir: f64, tiny: f64, out: &mut Vec<(f64, f64)>) {
        let delta = self.graded_levels(t, len, dir, self.inner_fraction * len, out);
        let p = self.inner_power;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let u = 0.5 * (x + 1.0);
            let off = (delta * u.powi(p)).max(tiny);
            out.push((t + dir * off, 0.5 * w * delta * p as f64 * u.powi(p - 1)));
        }
    }

    /// Nodes and weights on `[a, b]` refined towards the point `t`.
    pub fn graded(&self, a: f64, b: f64, t: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(8 * self.order);
        // Never place nodes closer to `t` than floating point can separate.
        let tiny = 1e3 * f64::EPSILON * t.abs().max(a.abs()).max(b.abs());
        if t >= a && t <= b {
            if b > t {
                self.singular_side(t, b - t, 1.0, tiny, &mut out);
            }
            if t > a {
                self.singular_side(t, t - a, -1.0, tiny, &mut out);
            }
        } else {
            let len = b - a;
            let (e, dir, d) = if t < a { (a, 1.0, a - t) } else { (b, -1.0, t - b) };
            let rest = self.graded_levels(e, len, dir, 2.0 * d, &mut out);
            let (lo, hi) = (e, e + dir * rest);
            self.push_interval(lo.min(hi), lo.max(hi), &mut out);
        }
        out
    }

    /// `∫_a^b f(s) ds` for `f` smooth apart from log-type behavior at `t`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, t: f64) -> f64 {
        self.graded(a, b, t).iter().map(|&(s, w)| w * f(s)).sum()
    }

    /// Principal value `PV ∫_a^b f(s)/(s − t) ds` for interior `t`.
    pub fn principal_value(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, t: f64) -> f64 {
        let ft = f(t);
        self.integrate(|s| (f(s) - ft) / (s - t), a, b, t) + ft * ((b - t) / (t - a)).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsupported_orders() {
        assert!(build_singular_rule(10).is_err());
        for p in [8, 12, 16] {
            assert_eq!(build_singular_rule(p).unwrap().order, p);
        }
    }

    #[test]
    fn log_integrals() {
        let r = build_singular_rule(16).unwrap();
        let v = r.integrate(f64::ln, 0.0, 1.0, 0.0);
        assert!((v + 1.0).abs() < 1e-12, "{v}");
        let v = r.integrate(|s| s * s * s.abs().ln(), -1.0, 1.0, 0.0);
        assert!((v + 2.0 / 9.0).abs() < 1e-12, "{v}");
        for p in [8, 12] {
            let r = build_singular_rule(p).unwrap();
            let v = r.integrate(f64::ln, 0.0, 1.0, 0.0);
            assert!((v + 1.0).abs() < 1e-10, "order {p}: {v}");
        }
    }

    #[test]
    fn log_times_polynomial_at_interior_point() {
        // ∫_{-1}^{1} s^k log|s − t| ds against an adaptive-free closed form.
        let r = build_singular_rule(16).unwrap();
        let t: f64 = 0.37;
        let exact = {
            // ∫ (s−t+t)^2 log|s−t| = ∫ u² + 2tu + t², u = s − t
            let prim = |u: f64, k: i32| {
                if u == 0.0 {
                    return 0.0;
                }
                let k1 = (k + 1) as f64;
                u.abs().powi(k + 1) * u.signum().powi(k + 1) * (u.abs().ln() / k1 - 1.0 / (k1 * k1))
            };
            let seg = |k: i32| prim(1.0 - t, k) - prim(-1.0 - t, k);
            seg(2) + 2.0 * t * seg(1) + t * t * seg(0)
        };
        let v = r.integrate(|s| s * s * (s - t).abs().ln(), -1.0, 1.0, t);
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn cauchy_principal_value() {
        // PV ∫_{-1}^{1} e^s/(s − t) ds against subtraction with a very fine composite rule.
        let r = build_singular_rule(16).unwrap();
        let t = 0.2;
        let v = r.principal_value(f64::exp, -1.0, 1.0, t);
        let oracle = {
            let n = 200_000;
            let h = 2.0 / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let s = -1.0 + (i as f64 + 0.5) * h;
                acc += h * (s.exp() - t.exp()) / (s - t);
            }
            acc + t.exp() * ((1.0 - t) / (1.0 + t)).ln()
        };
        assert!((v - oracle).abs() < 1e-9, "{v} vs {oracle}");
    }

    #[test]
    fn nearby_exterior_singularity() {
        let r = build_singular_rule(16).unwrap();
        // ∫_0^1 log(s + d) ds with d small
        let d: f64 = 1e-6;
        let exact = (1.0 + d) * (1.0 + d).ln() - 1.0 - d * d.ln();
        let v = r.integrate(|s| (s + d).ln(), 0.0, 1.0, -d);
        assert!((v - exact).abs() < 1e-12);
    }
}
