//! Preconditioned MINRES for symmetric, possibly indefinite systems, with an
//! optional Euclidean deflation of a few known near-null directions.

use super::grid::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final preconditioned residual estimate relative to its initial value.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Orthonormal basis of a deflation space.
#[derive(Debug, Clone, Default)]
pub struct Deflation {
    basis: Vec<Vec<f64>>,
}

impl Deflation {
    /// Modified Gram–Schmidt over the given vectors; numerically dependent
    /// ones are dropped.
    pub fn new(vectors: &[Vec<f64>]) -> Self {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for v in vectors {
            let mut w = v.clone();
            let norm0 = dot(&w, &w).sqrt();
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
            let norm = dot(&w, &w).sqrt();
            if norm > 1e-10 * norm0 && norm > 0.0 {
                w.iter_mut().for_each(|a| *a /= norm);
                basis.push(w);
            }
        }
        Self { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `x ← (I − QQᵀ) x`.
    pub fn project(&self, x: &mut [f64]) {
        for q in &self.basis {
            let c = dot(q, x);
            x.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
    }
}

/// Solves `A x = b` by MINRES with symmetric positive definite preconditioner
/// `M ≈ A⁻¹`. With a deflation space the iteration runs on `PAP x = Pb`.
#[allow(clippy::type_complexity)]
pub fn minres(
    a: &dyn Fn(&[f64], &mut [f64]),
    m: Option<&dyn Fn(&[f64], &mut [f64])>,
    b: &[f64],
    x0: Option<&[f64]>,
    deflation: Option<&Deflation>,
    tol: f64,
    max_iter: usize,
) -> KrylovResult {
    let n = b.len();
    let project = |v: &mut [f64]| {
        if let Some(d) = deflation {
            d.project(v);
        }
    };
    let op = |x: &[f64], y: &mut [f64]| {
        let mut px = x.to_vec();
        project(&mut px);
        a(&px, y);
        project(y);
    };
    let prec = |x: &[f64], y: &mut [f64]| match m {
        Some(m) => {
            let mut px = x.to_vec();
            project(&mut px);
            m(&px, y);
            project(y);
        }
        None => {
            y.copy_from_slice(x);
            project(y);
        }
    };

    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    project(&mut x);
    let mut r1 = b.to_vec();
    project(&mut r1);
    if x0.is_some() {
        let mut ax = vec![0.0; n];
        op(&x, &mut ax);
        r1.iter_mut().zip(&ax).for_each(|(r, v)| *r -= v);
    }
    let mut y = vec![0.0; n];
    prec(&r1, &mut y);
    let beta1_sq = dot(&r1, &y);
    if !(beta1_sq > 0.0) {
        return KrylovResult { x, iterations: 0, relative_residual: 0.0, converged: true };
    }
    let beta1 = beta1_sq.sqrt();
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut iterations = 0;
    let mut rel = 1.0;

    while iterations < max_iter {
        iterations += 1;
        let s = 1.0 / beta;
        v.iter_mut().zip(&y).for_each(|(vi, yi)| *vi = s * yi);
        op(&v, &mut y);
        if iterations >= 2 {
            let f = beta / oldb;
            y.iter_mut().zip(&r1).for_each(|(yi, ri)| *yi -= f * ri);
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        y.iter_mut().zip(&r2).for_each(|(yi, ri)| *yi -= f * ri);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        prec(&r2, &mut y);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 {
            // Preconditioner lost definiteness; stop with what we have.
            break;
        }
        beta = beta_sq.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        rel = phibar / beta1;
        if rel < tol || beta == 0.0 {
            break;
        }
    }
    project(&mut x);
    KrylovResult { x, iterations, relative_residual: rel, converged: rel < tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(diag: Vec<f64>) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            let n = x.len();
            for i in 0..n {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s -= x[i - 1];
                }
                if i + 1 < n {
                    s -= x[i + 1];
                }
                y[i] = s;
            }
        }
    }

    #[test]
    fn solves_indefinite_tridiagonal_system() {
        let n = 60;
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64 - 1.7).collect();
        let a = tridiag(diag);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        a(&x_true, &mut b);
        let res = minres(&a, None, &b, None, None, 1e-12, 500);
        assert!(res.converged);
        let err: f64 = res.x.iter().zip(&x_true).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn jacobi_preconditioner_reduces_iterations() {
        let n = 200;
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + i as f64).collect();
        let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
        let a = tridiag(diag);
        let m = move |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                y[i] = inv[i] * x[i];
            }
        };
        let b = vec![1.0; n];
        let plain = minres(&a, None, &b, None, None, 1e-10, 1000);
        let pre = minres(&a, Some(&m), &b, None, None, 1e-10, 1000);
        assert!(plain.converged && pre.converged);
        assert!(pre.iterations < plain.iterations);
    }

    #[test]
    fn deflation_handles_singular_operator() {
        // Discrete Neumann Laplacian: constants form the kernel.
        let n = 40;
        let a = |x: &[f64], y: &mut [f64]| {
            let n = x.len();
            for i in 0..n {
                let left = if i > 0 { x[i - 1] } else { x[i] };
                let right = if i + 1 < n { x[i + 1] } else { x[i] };
                y[i] = 2.0 * x[i] - left - right;
            }
        };
        let d = Deflation::new(&[vec![1.0; n]]);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 - 19.5) * 0.01).collect();
        let res = minres(&a, None, &b, None, Some(&d), 1e-12, 500);
        assert!(res.converged);
        let mut ax = vec![0.0; n];
        a(&res.x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
        assert!(res.x.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn initial_guess_is_honoured() {
        let n = 30;
        let a = tridiag(vec![3.0; n]);
        let x_true = vec![1.0; n];
        let mut b = vec![0.0; n];
        a(&x_true, &mut b);
        let res = minres(&a, None, &b, Some(&x_true), None, 1e-12, 100);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.x, x_true);
    }
}
