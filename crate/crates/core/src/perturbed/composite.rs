//! Continuum evaluation of functionals of `U_{ε,y}` by radial Simpson
//! quadrature on the ground-state grid times an angular rule. Free of 3D
//! discretization error, so these serve as oracles for the grid code.

use crate::ground_state::KirchhoffGroundState;
use crate::potential::Point;
use crate::radial::simpson;

use super::sphere::AngularRule;
use super::EpsilonFrame;

/// Angular resolution used when no rule is given.
pub const DEFAULT_ANGULAR_ORDER: usize = 16;

/// `∫ f(z) U(|z|)² dz` over ℝ³.
pub fn weighted_by_profile_sq(gs: &KirchhoffGroundState, rule: &AngularRule, f: impl Fn(Point) -> f64) -> f64 {
    let grid = gs.grid();
    let h = grid.step();
    let u = gs.u.values();
    let samples: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(u)
        .map(|(&r, &ur)| {
            let w = r * r * ur * ur;
            if w == 0.0 {
                return 0.0;
            }
            w * rule.integrate(|om| f([r * om[0], r * om[1], r * om[2]]))
        })
        .collect();
    simpson(&samples, h)
}

/// `∫ V(εz + y) U(|z|)² dz`.
pub fn composite_potential_moment(gs: &KirchhoffGroundState, frame: &EpsilonFrame, rule: &AngularRule) -> f64 {
    weighted_by_profile_sq(gs, rule, |z| frame.potential_at(z))
}

/// `‖U_{ε,y}‖²_ε = ε³(a K_U + ∫V(εz+y)U²)`.
pub fn composite_norm_sq(gs: &KirchhoffGroundState, frame: &EpsilonFrame, rule: &AngularRule) -> f64 {
    let a = gs.params.a;
    frame.eps.powi(3) * (a * gs.k_u + composite_potential_moment(gs, frame, rule))
}

/// `I_ε(U_{ε,y}) = ε³[½(aK_U + ∫V(εz+y)U²) + (b/4)K_U² − P_U/(p+1)]`.
pub fn composite_energy(gs: &KirchhoffGroundState, frame: &EpsilonFrame, rule: &AngularRule) -> f64 {
    let p = gs.params;
    let moment = composite_potential_moment(gs, frame, rule);
    frame.eps.powi(3) * (0.5 * (p.a * gs.k_u + moment) + 0.25 * p.b * gs.k_u * gs.k_u - gs.p_u / (p.p + 1.0))
}
