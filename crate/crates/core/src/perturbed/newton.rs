//! Damped Newton–Krylov for `F(u) = 0`.

use log::debug;
use serde::{Deserialize, Serialize};

use super::grid::{partial, Field3D};
use super::krylov::{minres, Deflation};
use super::multigrid::ShiftedLaplacianMg;
use super::problem::PerturbedProblem;
use super::PerturbedError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    /// Target `‖F‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative (preconditioned) residual for the inner MINRES solves.
    pub krylov_tol: f64,
    pub krylov_max_iter: usize,
    /// Smallest damping factor tried before giving up.
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 30, krylov_tol: 1e-7, krylov_max_iter: 400, min_step: 1.0 / 1024.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub iteration: usize,
    /// `‖F‖∞` before the step.
    pub residual: f64,
    pub step_length: f64,
    pub krylov_iterations: usize,
    pub krylov_residual: f64,
    pub deflated: bool,
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub field: Field3D,
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<NewtonStep>,
}

/// Largest value a converged field must reach to count as nontrivial.
const TRIVIAL_PEAK: f64 = 1e-6;

/// Iterates `u ← u + αδ` with `J[u]δ = −F(u)` solved by preconditioned
/// MINRES. The damping `α` halves until `‖F‖∞` strictly decreases; if MINRES
/// stagnates the solve is repeated with the translation modes `∂ᵢu` deflated.
pub fn newton_solve(
    problem: &PerturbedProblem,
    initial: &Field3D,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome, PerturbedError> {
    let grid = problem.grid;
    let mut u = initial.clone();
    let mut f = problem.residual(&u);
    let mut fnorm = f.max_abs();
    let mut history = Vec::new();
    let sigma = problem.potential_min().max(0.1);
    let mut iterations = 0;
    while fnorm >= opts.tol {
        if iterations == opts.max_iter {
            return Err(PerturbedError::NoConvergence { iterations, residual: fnorm });
        }
        iterations += 1;
        let lin = problem.linearize(&u);
        let mg = ShiftedLaplacianMg::new(&grid, lin.coef, sigma);
        let a = |x: &[f64], y: &mut [f64]| lin.apply(x, y);
        let m = |x: &[f64], y: &mut [f64]| mg.apply(x, y);
        let rhs: Vec<f64> = f.values.iter().map(|v| -v).collect();
        let mut sol = minres(&a, Some(&m), &rhs, None, None, opts.krylov_tol, opts.krylov_max_iter);
        let mut deflated = false;
        if !sol.converged {
            let modes: Vec<Vec<f64>> = (0..3).map(|i| partial(&u, i).values).collect();
            let defl = Deflation::new(&modes);
            let retry = minres(&a, Some(&m), &rhs, None, Some(&defl), opts.krylov_tol, opts.krylov_max_iter);
            if retry.relative_residual < sol.relative_residual {
                sol = retry;
                deflated = true;
            }
        }
        let delta = Field3D::from_values(grid, sol.x);
        let mut alpha = 1.0;
        let accepted = loop {
            let trial = u.add_scaled(alpha, &delta);
            let ft = problem.residual(&trial);
            let tn = ft.max_abs();
            if tn < fnorm && tn.is_finite() {
                break Some((trial, ft, tn));
            }
            alpha *= 0.5;
            if alpha < opts.min_step {
                break None;
            }
        };
        history.push(NewtonStep {
            iteration: iterations,
            residual: fnorm,
            step_length: if accepted.is_some() { alpha } else { 0.0 },
            krylov_iterations: sol.iterations,
            krylov_residual: sol.relative_residual,
            deflated,
        });
        debug!(
            "newton {iterations}: |F| = {fnorm:.3e}, alpha = {alpha}, minres {} its ({:.1e})",
            sol.iterations, sol.relative_residual
        );
        match accepted {
            Some((trial, ft, tn)) => {
                u = trial;
                f = ft;
                fnorm = tn;
            }
            None => return Err(PerturbedError::NoConvergence { iterations, residual: fnorm }),
        }
    }
    check_positive(&u, opts.tol)?;
    Ok(NewtonOutcome { field: u, residual: fnorm, iterations, history })
}

/// Rejects the trivial branch and fields with negative values beyond the
/// solver noise floor.
pub fn check_positive(u: &Field3D, tol: f64) -> Result<(), PerturbedError> {
    let min = u.interior_min();
    let (_, peak) = u.argmax();
    if !(peak > TRIVIAL_PEAK) || min < -positivity_floor(tol) {
        return Err(PerturbedError::LostPositivity { min: if peak > TRIVIAL_PEAK { min } else { peak } });
    }
    Ok(())
}

/// Far-field values sit at the level of the Newton tolerance, so sign
/// checks ignore anything smaller than this.
pub fn positivity_floor(tol: f64) -> f64 {
    100.0 * tol
}
