//! Geometric multigrid V-cycle for `κ(−Δ_h) + σ` with Dirichlet boundary.
//! Used as a symmetric positive definite preconditioner: the smoother is
//! red-black Gauss–Seidel run in mirrored order before and after the coarse
//! correction, and restriction is the scaled transpose of trilinear
//! prolongation.

use super::grid::Box3D;

const PRE_SWEEPS: usize = 2;
const COARSE_SWEEPS: usize = 20;

#[derive(Debug, Clone, Copy)]
struct Level {
    n: usize,
    h: f64,
}

impl Level {
    fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }
}

#[derive(Debug, Clone)]
pub struct ShiftedLaplacianMg {
    levels: Vec<Level>,
    kappa: f64,
    sigma: f64,
}

impl ShiftedLaplacianMg {
    pub fn new(grid: &Box3D, kappa: f64, sigma: f64) -> Self {
        let mut levels = vec![Level { n: grid.n, h: grid.h() }];
        loop {
            let last = *levels.last().unwrap();
            if (last.n - 1) % 2 != 0 || last.n <= 5 {
                break;
            }
            levels.push(Level { n: (last.n - 1) / 2 + 1, h: 2.0 * last.h });
        }
        Self { levels, kappa, sigma }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// One V-cycle from a zero initial guess: `z ≈ A⁻¹ r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.cycle(0, r, z);
    }

    fn cycle(&self, l: usize, f: &[f64], u: &mut [f64]) {
        let lev = self.levels[l];
        if l + 1 == self.levels.len() {
            for _ in 0..COARSE_SWEEPS {
                self.smooth(lev, f, u, 0);
                self.smooth(lev, f, u, 1);
            }
            for _ in 0..COARSE_SWEEPS {
                self.smooth(lev, f, u, 1);
                self.smooth(lev, f, u, 0);
            }
            return;
        }
        for _ in 0..PRE_SWEEPS {
            self.smooth(lev, f, u, 0);
            self.smooth(lev, f, u, 1);
        }
        let res = self.residual(lev, f, u);
        let coarse = self.levels[l + 1];
        let fc = restrict(lev, coarse, &res);
        let mut uc = vec![0.0; coarse.len()];
        self.cycle(l + 1, &fc, &mut uc);
        prolong_add(coarse, lev, &uc, u);
        for _ in 0..PRE_SWEEPS {
            self.smooth(lev, f, u, 1);
            self.smooth(lev, f, u, 0);
        }
    }

    fn smooth(&self, lev: Level, f: &[f64], u: &mut [f64], color: usize) {
        let n = lev.n;
        let off = self.kappa / (lev.h * lev.h);
        let inv_diag = 1.0 / (6.0 * off + self.sigma);
        let (sx, sy) = (n * n, n);
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let k0 = 1 + (i + j + 1 + color) % 2;
                let mut k = k0;
                while k < n - 1 {
                    let idx = lev.idx(i, j, k);
                    let s = u[idx - sx] + u[idx + sx] + u[idx - sy] + u[idx + sy] + u[idx - 1] + u[idx + 1];
                    u[idx] = (f[idx] + off * s) * inv_diag;
                    k += 2;
                }
            }
        }
    }

    fn residual(&self, lev: Level, f: &[f64], u: &[f64]) -> Vec<f64> {
        let n = lev.n;
        let off = self.kappa / (lev.h * lev.h);
        let diag = 6.0 * off + self.sigma;
        let (sx, sy) = (n * n, n);
        let mut r = vec![0.0; lev.len()];
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let row = lev.idx(i, j, 0);
                for idx in row + 1..row + n - 1 {
                    let s = u[idx - sx] + u[idx + sx] + u[idx - sy] + u[idx + sy] + u[idx - 1] + u[idx + 1];
                    r[idx] = f[idx] - (diag * u[idx] - off * s);
                }
            }
        }
        r
    }
}

const W1: [f64; 3] = [0.5, 1.0, 0.5];

/// Full weighting, the transpose of [`prolong_add`] divided by 8.
fn restrict(fine: Level, coarse: Level, r: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; coarse.len()];
    let nc = coarse.n;
    for i in 1..nc - 1 {
        for j in 1..nc - 1 {
            for k in 1..nc - 1 {
                let (fi, fj, fk) = (2 * i, 2 * j, 2 * k);
                let mut acc = 0.0;
                for (a, wa) in W1.iter().enumerate() {
                    for (b, wb) in W1.iter().enumerate() {
                        for (c, wc) in W1.iter().enumerate() {
                            acc += wa * wb * wc * r[fine.idx(fi + a - 1, fj + b - 1, fk + c - 1)];
                        }
                    }
                }
                out[coarse.idx(i, j, k)] = acc / 8.0;
            }
        }
    }
    out
}

/// Trilinear interpolation of the coarse correction, added to `u`.
fn prolong_add(coarse: Level, fine: Level, uc: &[f64], u: &mut [f64]) {
    let nc = coarse.n;
    for i in 1..nc - 1 {
        for j in 1..nc - 1 {
            for k in 1..nc - 1 {
                let v = uc[coarse.idx(i, j, k)];
                if v == 0.0 {
                    continue;
                }
                let (fi, fj, fk) = (2 * i, 2 * j, 2 * k);
                for (a, wa) in W1.iter().enumerate() {
                    for (b, wb) in W1.iter().enumerate() {
                        for (c, wc) in W1.iter().enumerate() {
                            let (x, y, z) = (fi + a - 1, fj + b - 1, fk + c - 1);
                            if x == 0 || y == 0 || z == 0 || x == fine.n - 1 || y == fine.n - 1 || z == fine.n - 1 {
                                continue;
                            }
                            u[fine.idx(x, y, z)] += wa * wb * wc * v;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbed::grid::{dot, laplacian_into};
    use crate::perturbed::krylov::minres;

    fn operator(grid: Box3D, kappa: f64, sigma: f64) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            laplacian_into(&grid, x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = -kappa * *yi + sigma * xi;
            }
            zero_boundary(&grid, y);
        }
    }

    fn zero_boundary(grid: &Box3D, y: &mut [f64]) {
        let n = grid.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if grid.is_boundary(i, j, k) {
                        y[grid.index(i, j, k)] = 0.0;
                    }
                }
            }
        }
    }

    fn random_interior(grid: &Box3D, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut v: Vec<f64> = (0..grid.len())
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect();
        zero_boundary(grid, &mut v);
        v
    }

    #[test]
    fn hierarchy_depth() {
        let mg = ShiftedLaplacianMg::new(&Box3D::default(), 1.0, 1.0);
        assert_eq!(mg.depth(), 6);
    }

    #[test]
    fn vcycle_is_symmetric_and_positive() {
        let grid = Box3D::new(6.0, 25).unwrap();
        let mg = ShiftedLaplacianMg::new(&grid, 1.7, 1.0);
        let x = random_interior(&grid, 1);
        let y = random_interior(&grid, 2);
        let mut mx = vec![0.0; grid.len()];
        let mut my = vec![0.0; grid.len()];
        mg.apply(&x, &mut mx);
        mg.apply(&y, &mut my);
        let (a, b) = (dot(&y, &mx), dot(&x, &my));
        assert!((a - b).abs() < 1e-12 * a.abs().max(b.abs()), "{a} vs {b}");
        assert!(dot(&x, &mx) > 0.0);
    }

    #[test]
    fn vcycle_contracts_error() {
        let grid = Box3D::new(6.0, 33).unwrap();
        let (kappa, sigma) = (1.3, 1.0);
        let a = operator(grid, kappa, sigma);
        let mg = ShiftedLaplacianMg::new(&grid, kappa, sigma);
        let x_true = random_interior(&grid, 7);
        let mut b = vec![0.0; grid.len()];
        a(&x_true, &mut b);
        let mut x = vec![0.0; grid.len()];
        for _ in 0..8 {
            let mut ax = vec![0.0; grid.len()];
            a(&x, &mut ax);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            let mut z = vec![0.0; grid.len()];
            mg.apply(&r, &mut z);
            x.iter_mut().zip(&z).for_each(|(p, q)| *p += q);
        }
        let err = x.iter().zip(&x_true).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "err = {err}");
    }

    #[test]
    fn preconditioned_minres_converges_fast() {
        let grid = Box3D::new(8.0, 49).unwrap();
        let a = operator(grid, 1.0, 1.0);
        let mg = ShiftedLaplacianMg::new(&grid, 1.0, 1.0);
        let m = |x: &[f64], y: &mut [f64]| mg.apply(x, y);
        let b = random_interior(&grid, 3);
        let res = minres(&a, Some(&m), &b, None, None, 1e-10, 200);
        assert!(res.converged);
        assert!(res.iterations < 30, "iterations = {}", res.iterations);
    }
}
