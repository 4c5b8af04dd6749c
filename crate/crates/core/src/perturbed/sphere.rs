//! Angular quadrature on the unit sphere. Weights sum to `4π`.

use std::f64::consts::PI;

use crate::potential::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct AngularRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl AngularRule {
    /// 26-point Lebedev rule, exact for spherical polynomials of degree 7.
    pub fn lebedev26() -> Self {
        let mut points = Vec::with_capacity(26);
        let mut weights = Vec::with_capacity(26);
        let w = 4.0 * PI;
        for a in 0..3 {
            for s in [-1.0, 1.0] {
                let mut p = [0.0; 3];
                p[a] = s;
                points.push(p);
                weights.push(w / 21.0);
            }
        }
        let q = 0.5f64.sqrt();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            for s in [-1.0, 1.0] {
                for t in [-1.0, 1.0] {
                    let mut p = [0.0; 3];
                    p[a] = s * q;
                    p[b] = t * q;
                    points.push(p);
                    weights.push(w * 4.0 / 105.0);
                }
            }
        }
        let c = (1.0f64 / 3.0).sqrt();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    points.push([sx * c, sy * c, sz * c]);
                    weights.push(w * 9.0 / 280.0);
                }
            }
        }
        Self { points, weights }
    }

    /// Gauss–Legendre in `cos θ` times the trapezoid rule in `φ` with
    /// `2 n_theta` points; exact to degree `2 n_theta − 1`.
    pub fn product(n_theta: usize) -> Self {
        let (x, wx) = gauss_legendre(n_theta);
        let n_phi = 2 * n_theta;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (ct, wt) in x.iter().zip(&wx) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = (k as f64 + 0.5) * dphi;
                points.push([st * phi.cos(), st * phi.sin(), *ct]);
                weights.push(wt * dphi);
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

/// Nodes and weights of `n`-point Gauss–Legendre quadrature on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i10: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((i10 - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn rules_are_exact_on_low_degree_monomials() {
        for rule in [AngularRule::lebedev26(), AngularRule::product(6)] {
            assert!((rule.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-13);
            let cases = [
                ([2, 0, 0], 1.0 / 3.0),
                ([0, 2, 2], 1.0 / 15.0),
                ([4, 0, 0], 1.0 / 5.0),
                ([2, 2, 2], 1.0 / 105.0),
                ([1, 0, 0], 0.0),
                ([3, 1, 0], 0.0),
                ([0, 0, 6], 1.0 / 7.0),
            ];
            for (e, avg) in cases {
                let got = rule.integrate(|p| p[0].powi(e[0]) * p[1].powi(e[1]) * p[2].powi(e[2]));
                assert!((got - 4.0 * PI * avg).abs() < 1e-13, "{e:?}: {got}");
            }
        }
    }
}
