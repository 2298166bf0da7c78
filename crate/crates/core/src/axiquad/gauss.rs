//! Gauss-Legendre rules and polynomial interpolation on their nodes.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn mapped(nodes: &[f64], weights: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (
        nodes.iter().map(|x| c + h * x).collect(),
        weights.iter().map(|w| h * w).collect(),
    )
}

/// Barycentric Lagrange interpolation on a fixed node set.
#[derive(Debug, Clone)]
pub struct Interpolator {
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl Interpolator {
    pub fn new(nodes: &[f64]) -> Self {
        let n = nodes.len();
        let mut bary = vec![1.0; n];
        for j in 0..n {
            for k in 0..n {
                if k != j {
                    bary[j] /= nodes[j] - nodes[k];
                }
            }
        }
        Self {
            nodes: nodes.to_vec(),
            bary,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Writes the interpolation weights `l_j(x)` into `out`.
    pub fn row_into(&self, x: f64, out: &mut [f64]) {
        if let Some(j) = self.nodes.iter().position(|&xj| xj == x) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[j] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for j in 0..self.nodes.len() {
            let t = self.bary[j] / (x - self.nodes[j]);
            out[j] = t;
            denom += t;
        }
        for v in out.iter_mut() {
            *v /= denom;
        }
    }

    pub fn row(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        self.row_into(x, &mut out);
        out
    }

    /// Spectral differentiation matrix `D[i][j] = l_j'(x_i)` on the nodes.
    pub fn diff_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.nodes.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = self.bary[j] / self.bary[i] / (self.nodes[i] - self.nodes[j]);
                    d[i][j] = v;
                    diag -= v;
                }
            }
            d[i][i] = diag;
        }
        d
    }
}
