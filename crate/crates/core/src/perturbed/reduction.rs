//! Solutions `u = U_{ε,y} + φ`: the Newton path (with recentering on the
//! peak) and the Lyapunov–Schmidt path (projection onto `E_{ε,y}`, Picard
//! iteration of `φ = −L_ε⁻¹(l_ε + R'_ε(φ))`, minimization of `j_ε`).
//!
//! `U_{ε,y}` is represented on the grid by the discrete reference profile,
//! the Newton solution of the `V ≡ 1` problem started from the sampled
//! continuum profile. Measuring `φ` against it removes the `O(h²)` profile
//! error, which is larger than `φ` itself at desk-scale `ε`.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::ground_state::{KirchhoffGroundState, KirchhoffParams};
use crate::potential::{Point, PotentialModel};

use super::grid::{dot, partial, Box3D, Field3D};
use super::krylov::{minres, Deflation};
use super::multigrid::ShiftedLaplacianMg;
use super::newton::{newton_solve, NewtonOptions, NewtonOutcome};
use super::problem::PerturbedProblem;
use super::{distance, EpsilonFrame, PerturbedError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionPath {
    Newton,
    Reduction,
}

#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub frame: EpsilonFrame,
    /// `ū` in blown-up coordinates around `frame.y`.
    pub field: Field3D,
    /// `φ̄ = ū − Ū_h`.
    pub correction: Field3D,
    /// `‖φ_ε‖_ε`.
    pub correction_norm: f64,
    /// `‖F‖∞` for the Newton path, `‖P F‖∞` (projected) for the reduction.
    pub residual_norm: f64,
    /// `I_ε(u)`.
    pub energy: f64,
    /// `j_ε(y)`, only for the reduction path.
    pub reduced_energy: Option<f64>,
    pub path: SolutionPath,
    pub iterations: usize,
    pub log: Vec<String>,
}

impl ReducedSolution {
    /// `‖φ_ε‖_ε / ε^{3/2}`.
    pub fn scaled_correction(&self) -> f64 {
        self.correction_norm / self.frame.eps.powf(1.5)
    }

    /// `|y − x₀| / ε`.
    pub fn center_ratio(&self) -> f64 {
        distance(&self.frame.y, &self.frame.potential.x0) / self.frame.eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedPointOptions {
    /// Stop once `‖φ_{k+1} − φ_k‖_ε / ε^{3/2}` falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub krylov_tol: f64,
    pub krylov_max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 60, krylov_tol: 1e-10, krylov_max_iter: 600 }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub phi: Field3D,
    pub iterations: usize,
    /// `‖φ_{k+1} − φ_k‖_ε` per iteration.
    pub increments: Vec<f64>,
    /// `‖P F(Ū_h + φ)‖∞`.
    pub projected_residual: f64,
    /// Coefficients of `F(Ū_h + φ)` on the Riesz images of the translation
    /// modes; they vanish at a critical point of `j_ε`.
    pub multipliers: [f64; 3],
}

/// `l_ε` as density `(V − V(x₀))Ū_h`, with its Riesz representative.
#[derive(Debug, Clone)]
pub struct LinearFunctional {
    pub density: Field3D,
    pub riesz: Field3D,
    /// `‖l_ε‖ = ‖riesz‖_ε`.
    pub dual_norm: f64,
    eps: f64,
}

impl LinearFunctional {
    /// `l_ε(φ) = ε³ h³ Σ density·φ̄`.
    pub fn apply(&self, phi: &Field3D) -> f64 {
        self.eps.powi(3) * phi.grid.volume() * self.density.dot(phi)
    }
}

/// `R_ε = A₁ − A₂` and its derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum Remainder {
    Value {
        a1: f64,
        a2: f64,
        total: f64,
    },
    /// Nodal density `r` with `R'_ε(φ)ψ = ε³h³ Σ r ψ̄`.
    Gradient(Field3D),
    /// `R''_ε(φ)[v, w]`.
    Hessian(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RemainderOrder<'a> {
    Value,
    Gradient,
    Hessian(&'a Field3D, &'a Field3D),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSearch {
    pub y: Point,
    pub reduced_energy: f64,
    /// Every `(y, j_ε(y))` evaluated.
    pub evaluations: Vec<(Point, f64)>,
    /// All coarse samples tie within tolerance (translation invariance).
    pub degenerate: bool,
}

/// Everything that depends only on the ground state and the box.
#[derive(Debug, Clone)]
pub struct PerturbedSetup {
    pub gs: KirchhoffGroundState,
    pub grid: Box3D,
    pub newton: NewtonOptions,
    /// `U(|z|)` sampled at the nodes.
    pub sampled: Field3D,
    /// Discrete reference profile `Ū_h`.
    pub reference: Field3D,
    /// `∂_{zᵢ} Ū_h`.
    pub modes: [Field3D; 3],
    pub log: Vec<String>,
}

impl PerturbedSetup {
    pub fn new(gs: KirchhoffGroundState, grid: Box3D, newton: NewtonOptions) -> Result<Self, PerturbedError> {
        grid.validate()?;
        let sampled = Field3D::from_fn(grid, |z| gs.eval((z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt()));
        let frame = EpsilonFrame::new(0.1, [0.0; 3], PotentialModel::constant())?;
        let problem = PerturbedProblem::new(gs.params, frame, grid)?;
        let out = newton_solve(&problem, &sampled, &newton)?;
        let log = vec![format!(
            "reference profile: {} Newton steps, |F| = {:.3e}, start |F| = {:.3e}",
            out.iterations,
            out.residual,
            out.history.first().map(|s| s.residual).unwrap_or(out.residual)
        )];
        let reference = out.field;
        let modes = [partial(&reference, 0), partial(&reference, 1), partial(&reference, 2)];
        Ok(Self { gs, grid, newton, sampled, reference, modes, log })
    }

    pub fn params(&self) -> KirchhoffParams {
        self.gs.params
    }

    pub fn problem(&self, frame: &EpsilonFrame) -> Result<PerturbedProblem, PerturbedError> {
        frame.validate()?;
        PerturbedProblem::new(self.gs.params, frame.clone(), self.grid)
    }

    /// `‖Ū_h − U‖_ε` in the given frame: the measured discretization error of
    /// the profile.
    pub fn discretization_error(&self, frame: &EpsilonFrame) -> Result<f64, PerturbedError> {
        let pb = self.problem(frame)?;
        Ok(pb.norm(&self.reference.add_scaled(-1.0, &self.sampled)))
    }

    #[allow(clippy::too_many_arguments)]
    fn wrap(
        &self,
        problem: &PerturbedProblem,
        field: Field3D,
        path: SolutionPath,
        residual_norm: f64,
        iterations: usize,
        reduced_energy: Option<f64>,
        log: Vec<String>,
    ) -> ReducedSolution {
        let correction = field.add_scaled(-1.0, &self.reference);
        let correction_norm = problem.norm(&correction);
        let energy = problem.energy(&field);
        ReducedSolution {
            frame: problem.frame.clone(),
            field,
            correction,
            correction_norm,
            residual_norm,
            energy,
            reduced_energy,
            path,
            iterations,
            log,
        }
    }

    /// Newton solve in a fixed frame, started from `initial` (default `Ū_h`).
    pub fn newton(
        &self,
        frame: &EpsilonFrame,
        initial: Option<&Field3D>,
    ) -> Result<(ReducedSolution, NewtonOutcome), PerturbedError> {
        let pb = self.problem(frame)?;
        let out = newton_solve(&pb, initial.unwrap_or(&self.reference), &self.newton)?;
        let log = out
            .history
            .iter()
            .map(|s| {
                format!(
                    "newton {}: |F| = {:.3e} alpha = {} minres {} ({:.1e}){}",
                    s.iteration,
                    s.residual,
                    s.step_length,
                    s.krylov_iterations,
                    s.krylov_residual,
                    if s.deflated { " deflated" } else { "" }
                )
            })
            .collect();
        let sol = self.wrap(&pb, out.field.clone(), SolutionPath::Newton, out.residual, out.iterations, None, log);
        Ok((sol, out))
    }

    /// Newton solve followed by moving the frame until the sub-grid peak of
    /// the solution sits at `z = 0`. The discrete solution is partly pinned to
    /// the grid, so a shift of the frame by `εz` moves the peak by much less
    /// than `z`; the update is a per-axis secant step on the peak offset.
    pub fn newton_centered(&self, frame: &EpsilonFrame, max_rounds: usize) -> Result<ReducedSolution, PerturbedError> {
        let eps = frame.eps;
        let mut frame = frame.clone();
        let mut initial = self.reference.clone();
        let mut log = Vec::new();
        let mut total = 0;
        let mut previous: Option<(Point, Point)> = None;
        let rounds = max_rounds.max(1);
        for round in 0..rounds {
            let (sol, out) = self.newton(&frame, Some(&initial))?;
            total += out.iterations;
            log.extend(sol.log.iter().cloned());
            let g = peak_offset(&sol.field);
            let shift = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            log.push(format!("center round {round}: y = {:?}, peak offset {:.3e}", frame.y, shift));
            if shift < CENTER_TOL || round + 1 == rounds {
                return Ok(ReducedSolution { log, iterations: total, ..sol });
            }
            let mut step = g;
            if let Some((y_prev, g_prev)) = previous {
                for a in 0..3 {
                    let dz = (frame.y[a] - y_prev[a]) / eps;
                    if dz.abs() > 0.0 {
                        let slope = (g[a] - g_prev[a]) / dz;
                        if (-1.5..=-0.02).contains(&slope) {
                            step[a] = -g[a] / slope;
                        }
                    }
                }
            }
            previous = Some((frame.y, g));
            let y = frame.physical(step);
            initial = Field3D::from_fn(self.grid, |x| {
                sol.field.interpolate([x[0] + step[0], x[1] + step[1], x[2] + step[2]])
            });
            frame = frame.with_center(y);
        }
        unreachable!("loop returns on its last round")
    }

    pub fn l_eps(&self, problem: &PerturbedProblem) -> Result<LinearFunctional, PerturbedError> {
        let v0 = problem.frame.potential.eval(&problem.frame.potential.x0);
        let mut density = Field3D::zeros(self.grid);
        for (d, (w, v)) in density.values.iter_mut().zip(self.reference.values.iter().zip(&problem.potential.values)) {
            *d = (v - v0) * w;
        }
        let riesz = if density.max_abs() == 0.0 {
            Field3D::zeros(self.grid)
        } else {
            let mg = ShiftedLaplacianMg::new(&self.grid, problem.params.a, problem.potential_min().max(0.1));
            let a = |x: &[f64], y: &mut [f64]| problem.riesz_apply(x, y);
            let m = |x: &[f64], y: &mut [f64]| mg.apply(x, y);
            let sol = minres(&a, Some(&m), &density.values, None, None, 1e-12, 500);
            if !sol.converged {
                return Err(PerturbedError::LinearSolve(format!("Riesz map stalled at {:.1e}", sol.relative_residual)));
            }
            Field3D::from_values(self.grid, sol.x)
        };
        let dual_norm = problem.norm(&riesz);
        Ok(LinearFunctional { density, riesz, dual_norm, eps: problem.frame.eps })
    }

    pub fn remainder(&self, problem: &PerturbedProblem, phi: &Field3D, order: RemainderOrder) -> Remainder {
        let w = &self.reference;
        let eps3 = problem.frame.eps.powi(3);
        let vol = self.grid.volume();
        match order {
            RemainderOrder::Value => {
                let KirchhoffParams { b, p, .. } = problem.params;
                let g_phi = problem.gradient_sq(phi);
                let g_mix = super::grid::dirichlet_form(w, phi);
                let a1 = eps3 * 0.25 * b * (g_phi * g_phi + 4.0 * g_phi * g_mix);
                let mut acc = 0.0;
                for (wi, fi) in w.values.iter().zip(&phi.values) {
                    let wp = wi.max(0.0);
                    acc += (wi + fi).max(0.0).powf(p + 1.0)
                        - wp.powf(p + 1.0)
                        - (p + 1.0) * wp.powf(p) * fi
                        - 0.5 * (p + 1.0) * p * wp.powf(p - 1.0) * fi * fi;
                }
                let a2 = eps3 * vol * acc / (p + 1.0);
                Remainder::Value { a1, a2, total: a1 - a2 }
            }
            RemainderOrder::Gradient => Remainder::Gradient(self.remainder_gradient(problem, phi)),
            RemainderOrder::Hessian(v, x) => {
                let j1 = problem.jacobian_apply(&w.add_scaled(1.0, phi), v);
                let j0 = problem.jacobian_apply(w, v);
                Remainder::Hessian(eps3 * vol * x.dot(&j1.add_scaled(-1.0, &j0)))
            }
        }
    }

    fn remainder_gradient(&self, problem: &PerturbedProblem, phi: &Field3D) -> Field3D {
        let w = &self.reference;
        let f1 = problem.residual(&w.add_scaled(1.0, phi));
        let f0 = problem.residual(w);
        let j = problem.jacobian_apply(w, phi);
        let mut out = f1;
        for ((o, a), b) in out.values.iter_mut().zip(&f0.values).zip(&j.values) {
            *o -= a + b;
        }
        out
    }

    /// Gram matrix `⟨∂ᵢŪ, ∂ⱼŪ⟩_ε`.
    fn gram(&self, problem: &PerturbedProblem) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                g[i][j] = problem.inner(&self.modes[i], &self.modes[j]);
                g[j][i] = g[i][j];
            }
        }
        g
    }

    /// `⟨·,·⟩_ε`-orthogonal projection onto `E_{ε,y}`.
    pub fn project_e(&self, problem: &PerturbedProblem, phi: &Field3D) -> Field3D {
        let g = self.gram(problem);
        let rhs: Vec<f64> = (0..3).map(|i| problem.inner(&self.modes[i], phi)).collect();
        let flat: Vec<f64> = g.iter().flatten().copied().collect();
        let alpha = solve_dense(3, flat, rhs).unwrap_or_else(|| vec![0.0; 3]);
        let mut out = phi.clone();
        for (i, a) in alpha.iter().enumerate() {
            out = out.add_scaled(-a, &self.modes[i]);
        }
        out
    }

    /// `max_i |⟨φ, ∂ᵢŪ⟩_ε| / (‖φ‖_ε ‖∂ᵢŪ‖_ε)`.
    pub fn orthogonality_defect(&self, problem: &PerturbedProblem, phi: &Field3D) -> f64 {
        let n = problem.norm(phi);
        if n == 0.0 {
            return 0.0;
        }
        (0..3)
            .map(|i| problem.inner(phi, &self.modes[i]).abs() / (n * problem.norm(&self.modes[i])))
            .fold(0.0, f64::max)
    }

    /// Riesz images `(−aΔ_h + V)∂ᵢŪ`; Euclidean orthogonality to them is
    /// `⟨·,·⟩_ε`-orthogonality to the modes.
    fn mode_images(&self, problem: &PerturbedProblem) -> Vec<Vec<f64>> {
        self.modes
            .iter()
            .map(|m| {
                let mut out = vec![0.0; self.grid.len()];
                problem.riesz_apply(&m.values, &mut out);
                out
            })
            .collect()
    }

    pub fn reduce_fixed_point(
        &self,
        problem: &PerturbedProblem,
        opts: &FixedPointOptions,
        warm_start: Option<&Field3D>,
    ) -> Result<FixedPoint, PerturbedError> {
        let eps = problem.frame.eps;
        let scale = eps.powf(1.5);
        let l = self.l_eps(problem)?;
        let images = self.mode_images(problem);
        let deflation = Deflation::new(&images);
        let lin = problem.linearize(&self.reference);
        let mg = ShiftedLaplacianMg::new(&self.grid, lin.coef, problem.potential_min().max(0.1));
        let a = |x: &[f64], y: &mut [f64]| lin.apply(x, y);
        let m = |x: &[f64], y: &mut [f64]| mg.apply(x, y);

        let mut phi = match warm_start {
            Some(w) => {
                let mut v = w.values.clone();
                deflation.project(&mut v);
                Field3D::from_values(self.grid, v)
            }
            None => Field3D::zeros(self.grid),
        };
        let mut increments: Vec<f64> = Vec::new();
        let mut growth = 0;
        let mut iterations = 0;
        loop {
            if iterations == opts.max_iter {
                let last = increments.last().copied().unwrap_or(f64::NAN);
                return Err(PerturbedError::ContractionFailure { iteration: iterations, increment: last });
            }
            iterations += 1;
            let r = self.remainder_gradient(problem, &phi);
            let rhs: Vec<f64> = l.density.values.iter().zip(&r.values).map(|(p, q)| -(p + q)).collect();
            let sol =
                minres(&a, Some(&m), &rhs, Some(&phi.values), Some(&deflation), opts.krylov_tol, opts.krylov_max_iter);
            if !sol.converged && sol.relative_residual > 1e3 * opts.krylov_tol {
                return Err(PerturbedError::LinearSolve(format!(
                    "projected solve stalled at {:.1e} after {} iterations",
                    sol.relative_residual, sol.iterations
                )));
            }
            let next = Field3D::from_values(self.grid, sol.x);
            let inc = problem.norm(&next.add_scaled(-1.0, &phi));
            debug!("picard {iterations}: increment {:.3e}, minres {} its", inc / scale, sol.iterations);
            if let Some(&prev) = increments.last() {
                if inc > prev {
                    growth += 1;
                    if growth >= 3 {
                        return Err(PerturbedError::ContractionFailure { iteration: iterations, increment: inc });
                    }
                } else {
                    growth = 0;
                }
            }
            increments.push(inc);
            phi = next;
            if !inc.is_finite() {
                return Err(PerturbedError::ContractionFailure { iteration: iterations, increment: inc });
            }
            if inc / scale < opts.tol {
                break;
            }
        }
        let f = problem.residual(&self.reference.add_scaled(1.0, &phi));
        let mut pf = f.values.clone();
        deflation.project(&mut pf);
        let projected_residual = pf.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let multipliers = least_squares_coefficients(&images, &f.values);
        Ok(FixedPoint { phi, iterations, increments, projected_residual, multipliers })
    }

    /// `j_ε(y) = I_ε(Ū_h + φ_{ε,y})`.
    pub fn reduced_energy(
        &self,
        frame: &EpsilonFrame,
        opts: &FixedPointOptions,
        warm_start: Option<&Field3D>,
    ) -> Result<(f64, FixedPoint), PerturbedError> {
        let pb = self.problem(frame)?;
        let fp = self.reduce_fixed_point(&pb, opts, warm_start)?;
        Ok((pb.energy(&self.reference.add_scaled(1.0, &fp.phi)), fp))
    }

    /// Reduction-path solution at a given center.
    pub fn reduction_at(
        &self,
        frame: &EpsilonFrame,
        opts: &FixedPointOptions,
        warm_start: Option<&Field3D>,
    ) -> Result<ReducedSolution, PerturbedError> {
        let pb = self.problem(frame)?;
        let fp = self.reduce_fixed_point(&pb, opts, warm_start)?;
        let field = self.reference.add_scaled(1.0, &fp.phi);
        let j = pb.energy(&field);
        let log = vec![format!(
            "reduction at y = {:?}: {} Picard steps, last increment {:.3e}, |PF| = {:.3e}, multipliers {:?}",
            frame.y,
            fp.iterations,
            fp.increments.last().copied().unwrap_or(0.0),
            fp.projected_residual,
            fp.multipliers
        )];
        Ok(self.wrap(&pb, field, SolutionPath::Reduction, fp.projected_residual, fp.iterations, Some(j), log))
    }

    /// Minimizes `j_ε` over `B_δ(x₀)`: a 27-point grid at spacing `δ/2`
    /// fitted by a full quadratic, then a 7-point axis stencil at the
    /// predicted minimizer.
    pub fn minimize_center(
        &self,
        template: &EpsilonFrame,
        delta: f64,
        opts: &FixedPointOptions,
    ) -> Result<CenterSearch, PerturbedError> {
        let x0 = template.potential.x0;
        if !(delta > 0.0 && delta <= template.potential.cap_radius) {
            return Err(PerturbedError::InvalidFrame(format!("search radius {delta} must lie in (0, cap radius]")));
        }
        let mut evaluations: Vec<(Point, f64)> = Vec::new();
        let mut warm: Option<Field3D> = None;
        let mut eval = |y: Point, evaluations: &mut Vec<(Point, f64)>| -> Result<f64, PerturbedError> {
            let (j, fp) = self.reduced_energy(&template.with_center(y), opts, warm.as_ref())?;
            warm = Some(fp.phi);
            evaluations.push((y, j));
            Ok(j)
        };
        let s = 0.5 * delta;
        let mut rows = Vec::with_capacity(27);
        let mut values = Vec::with_capacity(27);
        for i in -1i32..=1 {
            for j in -1i32..=1 {
                for k in -1i32..=1 {
                    let d = [i as f64, j as f64, k as f64];
                    let y = [x0[0] + s * d[0], x0[1] + s * d[1], x0[2] + s * d[2]];
                    let v = eval(y, &mut evaluations)?;
                    rows.push(quadratic_row(&d));
                    values.push(v);
                }
            }
        }
        let (jmin, jmax) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if jmax - jmin <= 1e-10 * jmax.abs().max(jmin.abs()) {
            return Ok(CenterSearch { y: x0, reduced_energy: values[13], evaluations, degenerate: true });
        }
        let coarse = fit_quadratic_minimizer(&rows, &values);
        let best = values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
            .0;
        let d_star = match coarse {
            Some(d) if d.iter().all(|v| v.abs() <= 1.5) => d,
            _ => {
                let y = evaluations[best].0;
                if distance(&y, &x0) > 0.99 * s {
                    return Err(PerturbedError::BoundaryMinimizer { y });
                }
                [0.0; 3]
            }
        };
        let center = [x0[0] + s * d_star[0], x0[1] + s * d_star[1], x0[2] + s * d_star[2]];
        // Refinement stencil.
        let t = 0.25 * s;
        let j0 = eval(center, &mut evaluations)?;
        let mut y = center;
        for a in 0..3 {
            let mut yp = center;
            yp[a] += t;
            let mut ym = center;
            ym[a] -= t;
            let jp = eval(yp, &mut evaluations)?;
            let jm = eval(ym, &mut evaluations)?;
            let curv = (jp - 2.0 * j0 + jm) / (t * t);
            let slope = (jp - jm) / (2.0 * t);
            if curv > 0.0 {
                y[a] = center[a] - (slope / curv).clamp(-2.0 * t, 2.0 * t);
            }
        }
        if distance(&y, &x0) >= delta {
            return Err(PerturbedError::BoundaryMinimizer { y });
        }
        let jy = eval(y, &mut evaluations)?;
        let (y, j) = if jy <= j0 { (y, jy) } else { (center, j0) };
        Ok(CenterSearch { y, reduced_energy: j, evaluations, degenerate: false })
    }

    /// Full reduction path: minimize `j_ε`, then return `Ū_h + φ` there.
    pub fn reduction_solve(
        &self,
        template: &EpsilonFrame,
        delta: f64,
        opts: &FixedPointOptions,
    ) -> Result<(ReducedSolution, CenterSearch), PerturbedError> {
        let search = self.minimize_center(template, delta, opts)?;
        let mut sol = self.reduction_at(&template.with_center(search.y), opts, None)?;
        sol.log.insert(0, format!("center search: {} evaluations, y = {:?}", search.evaluations.len(), search.y));
        Ok((sol, search))
    }
}

/// Blown-up tolerance on the peak offset when recentering.
const CENTER_TOL: f64 = 1e-5;

/// Sub-grid location of the maximum of `u` (per-axis parabola through the
/// discrete maximum and its neighbours).
pub fn peak_offset(u: &Field3D) -> Point {
    let g = u.grid;
    let n = g.n;
    let (idx, _) = u.argmax();
    let pos = [idx / (n * n), (idx / n) % n, idx % n];
    let strides = [n * n, n, 1];
    let h = g.h();
    let mut z = [0.0; 3];
    for a in 0..3 {
        z[a] = g.coord(pos[a]);
        if pos[a] == 0 || pos[a] == n - 1 {
            continue;
        }
        let (fm, f0, fp) = (u.values[idx - strides[a]], u.values[idx], u.values[idx + strides[a]]);
        let den = fm - 2.0 * f0 + fp;
        if den < 0.0 {
            z[a] += 0.5 * h * (fm - fp) / den;
        }
    }
    z
}

fn quadratic_row(d: &[f64; 3]) -> Vec<f64> {
    vec![1.0, d[0], d[1], d[2], d[0] * d[0], d[1] * d[1], d[2] * d[2], d[0] * d[1], d[0] * d[2], d[1] * d[2]]
}

/// Least-squares quadratic through the samples; returns its stationary point
/// when the Hessian is positive definite.
fn fit_quadratic_minimizer(rows: &[Vec<f64>], values: &[f64]) -> Option<[f64; 3]> {
    let m = rows[0].len();
    let mut ata = vec![0.0; m * m];
    let mut atb = vec![0.0; m];
    // Center the data to keep the normal equations well scaled.
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for (row, v) in rows.iter().zip(values) {
        for i in 0..m {
            atb[i] += row[i] * (v - mean);
            for j in 0..m {
                ata[i * m + j] += row[i] * row[j];
            }
        }
    }
    let c = solve_dense(m, ata, atb)?;
    let g = [c[1], c[2], c[3]];
    let h = [2.0 * c[4], c[7], c[8], c[7], 2.0 * c[5], c[9], c[8], c[9], 2.0 * c[6]];
    // Positive definite by leading minors.
    let m1 = h[0];
    let m2 = h[0] * h[4] - h[1] * h[3];
    let m3 = det3(&h);
    if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0) {
        return None;
    }
    let d = solve_dense(3, h.to_vec(), g.iter().map(|v| -v).collect())?;
    Some([d[0], d[1], d[2]])
}

fn det3(h: &[f64; 9]) -> f64 {
    h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) + h[2] * (h[3] * h[7] - h[4] * h[6])
}

/// Coefficients `β` minimizing `‖f − Σ βᵢ kᵢ‖₂`.
fn least_squares_coefficients(k: &[Vec<f64>], f: &[f64]) -> [f64; 3] {
    let mut g = vec![0.0; 9];
    let mut rhs = vec![0.0; 3];
    for i in 0..3 {
        rhs[i] = dot(&k[i], f);
        for j in 0..3 {
            g[i * 3 + j] = dot(&k[i], &k[j]);
        }
    }
    match solve_dense(3, g, rhs) {
        Some(b) => [b[0], b[1], b[2]],
        None => [f64::NAN; 3],
    }
}

/// Gaussian elimination with partial pivoting on a row-major `n×n` system.
pub(crate) fn solve_dense(n: usize, mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col] == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= a[r * n + k] * x[k];
        }
        x[r] = s / a[r * n + r];
    }
    Some(x)
}
