//! Uniform cubic grid on `[−L, L]³` with homogeneous Dirichlet boundary.

use serde::{Deserialize, Serialize};

use super::PerturbedError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub half_width: f64,
    pub n: usize,
}

impl Default for Box3D {
    fn default() -> Self {
        Self { half_width: 14.0, n: 97 }
    }
}

impl Box3D {
    pub fn new(half_width: f64, n: usize) -> Result<Self, PerturbedError> {
        let b = Self { half_width, n };
        b.validate()?;
        Ok(b)
    }

    /// Accepts any odd `n ≥ 5` and `L > 0`; the `L ≥ 12` production floor is
    /// checked by [`Box3D::validate_production`].
    pub fn validate(&self) -> Result<(), PerturbedError> {
        if self.n < 5 || self.n.is_multiple_of(2) {
            return Err(PerturbedError::InvalidBox(format!("n must be odd and at least 5, got {}", self.n)));
        }
        if !(self.half_width > 0.0) {
            return Err(PerturbedError::InvalidBox(format!("half width must be positive, got {}", self.half_width)));
        }
        Ok(())
    }

    pub fn validate_production(&self) -> Result<(), PerturbedError> {
        self.validate()?;
        if self.half_width < 12.0 {
            return Err(PerturbedError::InvalidBox(format!("half width must be at least 12, got {}", self.half_width)));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    pub fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        let m = self.n - 1;
        i == 0 || j == 0 || k == 0 || i == m || j == m || k == m
    }

    /// Index of the node at the origin.
    pub fn center(&self) -> usize {
        let c = self.n / 2;
        self.index(c, c, c)
    }

    /// Cell volume `h³`.
    pub fn volume(&self) -> f64 {
        self.h().powi(3)
    }
}

/// Nodal values on a [`Box3D`], boundary nodes included (and kept at zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Field3D {
    pub grid: Box3D,
    pub values: Vec<f64>,
}

impl Field3D {
    pub fn zeros(grid: Box3D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    /// Samples `f` at interior nodes; the boundary layer stays zero.
    pub fn from_fn(grid: Box3D, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        let n = grid.n;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                for k in 1..n - 1 {
                    let idx = grid.index(i, j, k);
                    out.values[idx] = f([grid.coord(i), grid.coord(j), grid.coord(k)]);
                }
            }
        }
        out
    }

    pub fn from_values(grid: Box3D, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Field3D) -> f64 {
        dot(&self.values, &other.values)
    }

    /// `self + α other`.
    pub fn add_scaled(&self, alpha: f64, other: &Field3D) -> Field3D {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + alpha * b).collect();
        Field3D { grid: self.grid, values }
    }

    pub fn scale(&self, alpha: f64) -> Field3D {
        Field3D { grid: self.grid, values: self.values.iter().map(|v| alpha * v).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Index and value of the largest entry.
    pub fn argmax(&self) -> (usize, f64) {
        self.values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
    }

    /// Smallest value over interior nodes.
    pub fn interior_min(&self) -> f64 {
        let g = self.grid;
        let n = g.n;
        let mut m = f64::INFINITY;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let row = g.index(i, j, 0);
                for v in &self.values[row + 1..row + n - 1] {
                    m = m.min(*v);
                }
            }
        }
        m
    }

    /// Trilinear interpolation; zero outside the box.
    pub fn interpolate(&self, x: [f64; 3]) -> f64 {
        let g = self.grid;
        let h = g.h();
        let mut base = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..3 {
            let s = (x[a] + g.half_width) / h;
            if !(s >= 0.0) || s > (g.n - 1) as f64 {
                return 0.0;
            }
            let i = (s.floor() as usize).min(g.n - 2);
            base[a] = i;
            t[a] = s - i as f64;
        }
        let mut acc = 0.0;
        for di in 0..2 {
            for dj in 0..2 {
                for dk in 0..2 {
                    let w = (if di == 1 { t[0] } else { 1.0 - t[0] })
                        * (if dj == 1 { t[1] } else { 1.0 - t[1] })
                        * (if dk == 1 { t[2] } else { 1.0 - t[2] });
                    acc += w * self.values[g.index(base[0] + di, base[1] + dj, base[2] + dk)];
                }
            }
        }
        acc
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Seven-point `Δ_h u` at interior nodes; boundary entries of `out` are zero.
pub fn laplacian_into(grid: &Box3D, u: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let inv = 1.0 / (grid.h() * grid.h());
    let sx = n * n;
    let sy = n;
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let row = grid.index(i, j, 0);
            for idx in row + 1..row + n - 1 {
                let s = u[idx - sx] + u[idx + sx] + u[idx - sy] + u[idx + sy] + u[idx - 1] + u[idx + 1];
                out[idx] = (s - 6.0 * u[idx]) * inv;
            }
        }
    }
}

pub fn laplacian(u: &Field3D) -> Field3D {
    let mut out = Field3D::zeros(u.grid);
    laplacian_into(&u.grid, &u.values, &mut out.values);
    out
}

/// Discrete Dirichlet form `Σ_edges (u_a − u_b)(v_a − v_b) h`, the grid
/// analogue of `∫∇u·∇v`. Bitwise symmetric in `u` and `v`, and equal to
/// `−h³ Σ v Δ_h u` for fields vanishing on the boundary.
pub fn dirichlet_form(u: &Field3D, v: &Field3D) -> f64 {
    let g = u.grid;
    let n = g.n;
    let (a, b) = (&u.values, &v.values);
    let strides = [n * n, n, 1];
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let idx = g.index(i, j, k);
                let pos = [i, j, k];
                for d in 0..3 {
                    if pos[d] + 1 < n {
                        let nb = idx + strides[d];
                        acc += (a[nb] - a[idx]) * (b[nb] - b[idx]);
                    }
                }
            }
        }
    }
    acc * g.h()
}

/// Central-difference `∂_{z_axis} u` at interior nodes.
pub fn partial(u: &Field3D, axis: usize) -> Field3D {
    let g = u.grid;
    let n = g.n;
    let stride = [n * n, n, 1][axis];
    let inv = 0.5 / g.h();
    let mut out = Field3D::zeros(g);
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let row = g.index(i, j, 0);
            for idx in row + 1..row + n - 1 {
                out.values[idx] = (u.values[idx + stride] - u.values[idx - stride]) * inv;
            }
        }
    }
    out
}
