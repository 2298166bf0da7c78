//! Complete elliptic integrals through Carlson's symmetric forms.
//!
//! Arguments are given as the complementary parameter `m1 = 1 − m` so that the
//! logarithmic end `m → 1` keeps full relative accuracy.

use crate::error::{Result, SwimError};

/// `R_F(x, y, z)` by the duplication theorem.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    loop {
        let a = (x + y + z) / 3.0;
        let dx = 1.0 - x / a;
        let dy = 1.0 - y / a;
        let dz = 1.0 - z / a;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 1.5e-3 {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0)
                / a.sqrt();
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let l = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + l);
        y = 0.25 * (y + l);
        z = 0.25 * (z + l);
    }
}

/// `R_D(x, y, z)` by the duplication theorem.
pub fn carlson_rd(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = 0.0;
    let mut fac = 1.0;
    loop {
        let a = (x + y + 3.0 * z) / 5.0;
        let dx = 1.0 - x / a;
        let dy = 1.0 - y / a;
        let dz = 1.0 - z / a;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 1e-3 {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - 6.0 * eb;
            let ee = ed + ec + ec;
            let s = 1.0
                + ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 4.5 / 26.0 * dz * ee)
                + dz * (ee / 6.0 + dz * (-9.0 / 22.0 * ec + 3.0 / 26.0 * dz * ea));
            return 3.0 * sum + fac * s / (a * a.sqrt());
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let l = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + l));
        fac *= 0.25;
        x = 0.25 * (x + l);
        y = 0.25 * (y + l);
        z = 0.25 * (z + l);
    }
}

/// `(K(m), E(m))` for parameter `m = 1 − m1`, `m1 ∈ (0, 1]`.
pub fn complete_ke(m1: f64) -> Result<(f64, f64)> {
    if !(m1 > 0.0 && m1 <= 1.0) {
        return Err(SwimError::EllipticModulus(1.0 - m1));
    }
    let m = 1.0 - m1;
    let k = carlson_rf(0.0, m1, 1.0);
    let e = k - m / 3.0 * carlson_rd(0.0, m1, 1.0);
    Ok((k, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn agm_k(m: f64) -> f64 {
        let (mut a, mut b) = (1.0, (1.0 - m).sqrt());
        for _ in 0..40 {
            let a2 = 0.5 * (a + b);
            b = (a * b).sqrt();
            a = a2;
        }
        PI / (2.0 * a)
    }

    #[test]
    fn reference_values() {
        let (k, e) = complete_ke(1.0).unwrap();
        assert!((k - PI / 2.0).abs() < 1e-15 && (e - PI / 2.0).abs() < 1e-15);
        // K(1/2), E(1/2) from tables
        let (k, e) = complete_ke(0.5).unwrap();
        assert!((k - 1.854_074_677_301_372).abs() < 1e-14);
        assert!((e - 1.350_643_881_047_675_5).abs() < 1e-14);
    }

    #[test]
    fn agrees_with_agm_and_legendre_relation() {
        for &m in &[0.1, 0.5, 0.9, 0.999, 1.0 - 1e-9] {
            let (k, e) = complete_ke(1.0 - m).unwrap();
            assert!((k - agm_k(m)).abs() < 1e-13 * k);
            // E K' + E' K − K K' = π/2
            let (kp, ep) = complete_ke(m).unwrap();
            assert!((e * kp + ep * k - k * kp - PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn logarithmic_limit() {
        // K ≈ ln(4/√m1) as m1 → 0
        let m1 = 1e-14;
        let (k, e) = complete_ke(m1).unwrap();
        assert!((k - (4.0 / m1.sqrt()).ln()).abs() < 1e-10);
        assert!((e - 1.0).abs() < 1e-12);
        assert!(complete_ke(0.0).is_err());
    }

    proptest! {
        #[test]
        fn legendre_relation(m in 1e-6f64..(1.0 - 1e-6)) {
            let (k, e) = complete_ke(1.0 - m).unwrap();
            let (kp, ep) = complete_ke(m).unwrap();
            prop_assert!((e * kp + ep * k - k * kp - PI / 2.0).abs() < 1e-11);
            prop_assert!(k >= PI / 2.0 && e <= PI / 2.0 && e >= 1.0);
        }
    }
}
