//! The blown-up equation `−(a + b‖∇u‖²)Δu + V(εz+y)u = u₊^p` on a box:
//! residual, matrix-free Jacobian, energy and the `⟨·,·⟩_ε` geometry.

use crate::ground_state::KirchhoffParams;

use super::grid::{dirichlet_form, dot, laplacian_into, Box3D, Field3D};
use super::{EpsilonFrame, PerturbedError};

/// Floor applied to `u` in `p u^{p−1}` when `p < 2`.
pub const DERIVATIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PerturbedProblem {
    pub params: KirchhoffParams,
    pub frame: EpsilonFrame,
    pub grid: Box3D,
    /// `V(εz + y)` at every node.
    pub potential: Field3D,
}

impl PerturbedProblem {
    pub fn new(params: KirchhoffParams, frame: EpsilonFrame, grid: Box3D) -> Result<Self, PerturbedError> {
        params.validate()?;
        grid.validate()?;
        let mut potential = Field3D::zeros(grid);
        for idx in 0..grid.len() {
            potential.values[idx] = frame.potential_at(grid.point(idx));
        }
        Ok(Self { params, frame, grid, potential })
    }

    /// `∫|∇u|²` in blown-up coordinates.
    pub fn gradient_sq(&self, u: &Field3D) -> f64 {
        dirichlet_form(u, u)
    }

    pub fn residual(&self, u: &Field3D) -> Field3D {
        let KirchhoffParams { a, b, p } = self.params;
        let coef = a + b * self.gradient_sq(u);
        let mut out = Field3D::zeros(self.grid);
        laplacian_into(&self.grid, &u.values, &mut out.values);
        for_interior(&self.grid, |idx| {
            let ui = u.values[idx];
            out.values[idx] = -coef * out.values[idx] + self.potential.values[idx] * ui - ui.max(0.0).powf(p);
        });
        out
    }

    pub fn linearize(&self, u: &Field3D) -> Linearization {
        let KirchhoffParams { a, b, p } = self.params;
        let grad_sq = self.gradient_sq(u);
        let mut lap_u = vec![0.0; self.grid.len()];
        laplacian_into(&self.grid, &u.values, &mut lap_u);
        let mut dnl = vec![0.0; self.grid.len()];
        for_interior(&self.grid, |idx| {
            let ui = u.values[idx];
            dnl[idx] = if ui > 0.0 {
                let base = if p < 2.0 { ui.max(DERIVATIVE_FLOOR) } else { ui };
                p * base.powf(p - 1.0)
            } else {
                0.0
            };
        });
        Linearization {
            grid: self.grid,
            coef: a + b * grad_sq,
            b,
            lap_u,
            dnl,
            potential: self.potential.values.clone(),
        }
    }

    pub fn jacobian_apply(&self, u: &Field3D, v: &Field3D) -> Field3D {
        let lin = self.linearize(u);
        let mut out = Field3D::zeros(self.grid);
        lin.apply(&v.values, &mut out.values);
        out
    }

    /// `Ī(u) = ½(a‖∇u‖² + ∫Vu²) + (b/4)‖∇u‖⁴ − ∫u₊^{p+1}/(p+1)`; the physical
    /// energy is `ε³ Ī`.
    pub fn energy_bar(&self, u: &Field3D) -> f64 {
        let KirchhoffParams { a, b, p } = self.params;
        let g = self.gradient_sq(u);
        let vol = self.grid.volume();
        let mut quad = 0.0;
        let mut nonlin = 0.0;
        for (ui, vi) in u.values.iter().zip(&self.potential.values) {
            quad += vi * ui * ui;
            nonlin += ui.max(0.0).powf(p + 1.0);
        }
        0.5 * (a * g + vol * quad) + 0.25 * b * g * g - vol * nonlin / (p + 1.0)
    }

    pub fn energy(&self, u: &Field3D) -> f64 {
        self.frame.eps.powi(3) * self.energy_bar(u)
    }

    /// `⟨u, v⟩_ε = ε³(a∫∇ū·∇v̄ + ∫V(εz+y)ūv̄)`. Bitwise symmetric.
    pub fn inner(&self, u: &Field3D, v: &Field3D) -> f64 {
        let vol = self.grid.volume();
        let mut mass = 0.0;
        for ((ui, vi), wi) in u.values.iter().zip(&v.values).zip(&self.potential.values) {
            mass += wi * (ui * vi);
        }
        self.frame.eps.powi(3) * (self.params.a * dirichlet_form(u, v) + vol * mass)
    }

    pub fn norm(&self, u: &Field3D) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// `(−aΔ_h + V) v`, so that `⟨u, v⟩_ε = ε³h³ Σ u·(riesz_apply v)`.
    pub fn riesz_apply(&self, v: &[f64], out: &mut [f64]) {
        laplacian_into(&self.grid, v, out);
        let a = self.params.a;
        for_interior(&self.grid, |idx| {
            out[idx] = -a * out[idx] + self.potential.values[idx] * v[idx];
        });
    }

    /// `‖φ‖_{L^q} / (ε^{3/q − 3/2}‖φ‖_ε)` with both norms in physical units.
    pub fn eps_sobolev_ratio(&self, phi: &Field3D, q: f64) -> Result<f64, PerturbedError> {
        if !(2.0..=6.0).contains(&q) {
            return Err(PerturbedError::InvalidFrame(format!("q must lie in [2, 6], got {q}")));
        }
        let eps = self.frame.eps;
        let norm = self.norm(phi);
        if !(norm > 0.0) {
            return Err(PerturbedError::DivisionByZeroNorm);
        }
        let lq_bar = (self.grid.volume() * phi.values.iter().map(|v| v.abs().powf(q)).sum::<f64>()).powf(1.0 / q);
        let lq = eps.powf(3.0 / q) * lq_bar;
        Ok(lq / (eps.powf(3.0 / q - 1.5) * norm))
    }

    pub fn potential_min(&self) -> f64 {
        let mut m = f64::INFINITY;
        for_interior(&self.grid, |idx| m = m.min(self.potential.values[idx]));
        m
    }
}

/// `J[u]` frozen at one state; applying it costs one stencil and one
/// reduction for the rank-one term.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub grid: Box3D,
    /// `a + b‖∇u‖²`.
    pub coef: f64,
    b: f64,
    lap_u: Vec<f64>,
    dnl: Vec<f64>,
    potential: Vec<f64>,
}

impl Linearization {
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        laplacian_into(&self.grid, v, out);
        // ∫∇u·∇v = −h³ Σ v Δ_h u for fields vanishing on the boundary.
        let pairing = -self.grid.volume() * dot(v, &self.lap_u);
        let rank_one = 2.0 * self.b * pairing;
        let coef = self.coef;
        for_interior(&self.grid, |idx| {
            out[idx] = -coef * out[idx] - rank_one * self.lap_u[idx] + (self.potential[idx] - self.dnl[idx]) * v[idx];
        });
    }
}

pub(crate) fn for_interior(grid: &Box3D, mut f: impl FnMut(usize)) {
    let n = grid.n;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let row = grid.index(i, j, 0);
            for idx in row + 1..row + n - 1 {
                f(idx);
            }
        }
    }
}
