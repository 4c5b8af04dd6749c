//! Singularly perturbed Kirchhoff problem in blown-up coordinates
//! `z = (x − y)/ε`: full Newton–Krylov solves and the Lyapunov–Schmidt
//! reduction path.

pub mod composite;
pub mod grid;
pub mod krylov;
pub mod multigrid;
pub mod newton;
pub mod problem;
pub mod reduction;
pub mod sphere;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ground_state::GroundStateError;
use crate::potential::{Point, PotentialError, PotentialModel};

pub use composite::{composite_energy, composite_norm_sq, composite_potential_moment};
pub use grid::{Box3D, Field3D};
pub use newton::{newton_solve, NewtonOptions, NewtonOutcome, NewtonStep};
pub use problem::{Linearization, PerturbedProblem};
pub use reduction::{
    CenterSearch, FixedPoint, FixedPointOptions, LinearFunctional, PerturbedSetup, ReducedSolution, Remainder,
    RemainderOrder, SolutionPath,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbedError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("‖φ‖_ε vanishes")]
    DivisionByZeroNorm,
    #[error("Newton did not converge after {iterations} iterations (‖F‖∞ = {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("solution lost positivity (interior minimum {min:e})")]
    LostPositivity { min: f64 },
    #[error("fixed-point iteration diverged at step {iteration} (increment {increment:e})")]
    ContractionFailure { iteration: usize, increment: f64 },
    #[error("reduced energy minimum lies on the search boundary at y = {y:?}")]
    BoundaryMinimizer { y: Point },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error(transparent)]
    GroundState(#[from] GroundStateError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Scale `ε`, center `y` and potential of `U_{ε,y}(x) = U((x − y)/ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonFrame {
    pub eps: f64,
    pub y: Point,
    pub potential: PotentialModel,
}

impl EpsilonFrame {
    pub fn new(eps: f64, y: Point, potential: PotentialModel) -> Result<Self, PerturbedError> {
        let frame = Self { eps, y, potential };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<(), PerturbedError> {
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(PerturbedError::InvalidFrame(format!("ε must lie in (0, 0.5], got {}", self.eps)));
        }
        self.potential.validate()?;
        let d = distance(&self.y, &self.potential.x0);
        if !(d <= self.potential.cap_radius) {
            return Err(PerturbedError::InvalidFrame(format!(
                "center {:?} lies outside the cap radius {} of the potential",
                self.y, self.potential.cap_radius
            )));
        }
        Ok(())
    }

    pub fn with_center(&self, y: Point) -> Self {
        Self { y, ..self.clone() }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    /// Physical point `εz + y`.
    pub fn physical(&self, z: Point) -> Point {
        [self.eps * z[0] + self.y[0], self.eps * z[1] + self.y[1], self.eps * z[2] + self.y[2]]
    }

    /// `V(εz + y)`.
    pub fn potential_at(&self, z: Point) -> f64 {
        self.potential.eval(&self.physical(z))
    }
}

pub(crate) fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_validation() {
        let v = PotentialModel::power_well(2.0, [1.0; 3]);
        assert!(EpsilonFrame::new(0.0, [0.0; 3], v.clone()).is_err());
        assert!(EpsilonFrame::new(0.6, [0.0; 3], v.clone()).is_err());
        assert!(EpsilonFrame::new(0.1, [10.0, 0.0, 0.0], v.clone()).is_err());
        let f = EpsilonFrame::new(0.1, [0.5, 0.0, 0.0], v).unwrap();
        assert_eq!(f.physical([1.0, 2.0, 3.0]), [0.6, 0.2, 0.30000000000000004]);
    }
}
