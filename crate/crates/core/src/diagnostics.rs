//! Local Pohozaev identity, concentration traces and solution comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ground_state::{KirchhoffGroundState, KirchhoffParams};
use crate::perturbed::composite::weighted_by_profile_sq;
use crate::perturbed::grid::{partial, Field3D};
use crate::perturbed::sphere::AngularRule;
use crate::perturbed::{EpsilonFrame, PerturbedError, PerturbedSetup, ReducedSolution};
use crate::potential::{Point, PotentialError};

/// Default angular order of the product rule on Pohozaev spheres.
pub const POHOZAEV_ANGULAR_ORDER: usize = 16;
/// Number of candidate radii scanned for the Pohozaev ball.
pub const POHOZAEV_CANDIDATES: usize = 5;
/// Blown-up radius outside which `ξ` must have decayed.
pub const DECAY_RADIUS: f64 = 10.0;
const DECAY_LEVEL: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("sphere of blown-up radius {radius} does not fit in the box (limit {limit})")]
    SphereOutsideDomain { radius: f64, limit: f64 },
    #[error("solutions are identical (sup difference {sup:e})")]
    IdenticalSolutions { sup: f64 },
    #[error("solutions are not comparable: {0}")]
    Mismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Perturbed(#[from] PerturbedError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Both sides of the local Pohozaev identity on `B_d(y_ε)`, divided by `ε²`
/// and written in blown-up coordinates:
/// `ε∫_{B_R} ∂ᵢV(εz+y) ū² = (a + b‖∇ū‖²)∫_{∂B_R}(|∇ū|²νᵢ − 2∂_νū ∂ᵢū)
///   + ∫_{∂B_R} V ū² νᵢ − (2/(p+1))∫_{∂B_R} ū₊^{p+1} νᵢ` with `R = d/ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    /// `i ∈ {1,2,3}`.
    pub component: usize,
    /// Physical radius `d`.
    pub radius: f64,
    pub blown_up_radius: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Gradient, potential and nonlinear boundary terms.
    pub boundary_terms: [f64; 3],
    /// `ε∫_{B_R}|∂ᵢV| ū²`, or the ball energy when `∇V ≡ 0`.
    pub scale: f64,
    /// `|lhs − rhs| / max(|lhs|, scale)`.
    pub discrepancy: f64,
    /// `∫_{∂B_R}((a + b‖∇ū‖²)|∇ū|² + Vū² + ū₊^{p+1})`.
    pub boundary_energy: f64,
}

/// Largest blown-up radius whose sphere keeps the interpolation and
/// gradient stencils inside the box.
pub fn max_sphere_radius(solution: &ReducedSolution) -> f64 {
    let g = solution.field.grid;
    g.half_width - 2.0 * g.h()
}

struct SphereData {
    grads: [Field3D; 3],
    coef: f64,
    p: f64,
}

impl SphereData {
    fn new(params: &KirchhoffParams, solution: &ReducedSolution) -> Self {
        let u = &solution.field;
        let grads = [partial(u, 0), partial(u, 1), partial(u, 2)];
        let g = crate::perturbed::grid::dirichlet_form(u, u);
        Self { grads, coef: params.a + params.b * g, p: params.p }
    }

    /// Boundary terms for component `i` and the boundary energy.
    fn boundary(&self, solution: &ReducedSolution, radius: f64, i: usize, rule: &AngularRule) -> ([f64; 3], f64) {
        let u = &solution.field;
        let frame = &solution.frame;
        let mut terms = [0.0; 3];
        let mut energy = 0.0;
        let area = radius * radius;
        for (om, w) in rule.points.iter().zip(&rule.weights) {
            let z = [radius * om[0], radius * om[1], radius * om[2]];
            let uz = u.interpolate(z);
            let grad = [self.grads[0].interpolate(z), self.grads[1].interpolate(z), self.grads[2].interpolate(z)];
            let g2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
            let dn = grad[0] * om[0] + grad[1] * om[1] + grad[2] * om[2];
            let v = frame.potential_at(z);
            let up = uz.max(0.0).powf(self.p + 1.0);
            let wa = w * area;
            terms[0] += wa * self.coef * (g2 * om[i] - 2.0 * dn * grad[i]);
            terms[1] += wa * v * uz * uz * om[i];
            terms[2] -= wa * 2.0 / (self.p + 1.0) * up * om[i];
            energy += wa * (self.coef * g2 + v * uz * uz + up);
        }
        (terms, energy)
    }
}

/// Candidate blown-up radii: `d ∈ [1, 2]` mapped to `d/ε`, capped by the box.
pub fn pohozaev_candidates(solution: &ReducedSolution) -> Vec<f64> {
    let eps = solution.frame.eps;
    let limit = max_sphere_radius(solution);
    let lo = (1.0 / eps).min(limit);
    let hi = (2.0 / eps).min(limit);
    let lo = lo.min(0.75 * limit).min(hi);
    (0..POHOZAEV_CANDIDATES).map(|k| lo + (hi - lo) * k as f64 / (POHOZAEV_CANDIDATES - 1) as f64).collect()
}

/// Evaluates the identity for component `i ∈ {1,2,3}` on `B_d(y_ε)`. With
/// `d = None` the radius is the candidate with the smallest boundary energy.
pub fn pohozaev_check(
    params: &KirchhoffParams,
    solution: &ReducedSolution,
    d: Option<f64>,
    i: usize,
    rule: &AngularRule,
) -> Result<PohozaevReport, DiagnosticsError> {
    if !(1..=3).contains(&i) {
        return Err(DiagnosticsError::InvalidArgument(format!("component index {i} out of range")));
    }
    let i = i - 1;
    let eps = solution.frame.eps;
    let limit = max_sphere_radius(solution);
    let data = SphereData::new(params, solution);
    let radius = match d {
        Some(d) => {
            let r = d / eps;
            if !(r > 0.0 && r <= limit) {
                return Err(DiagnosticsError::SphereOutsideDomain { radius: r, limit });
            }
            r
        }
        None => {
            let mut best = (f64::INFINITY, 0.0);
            for r in pohozaev_candidates(solution) {
                let (_, e) = data.boundary(solution, r, i, rule);
                if e < best.0 {
                    best = (e, r);
                }
            }
            best.1
        }
    };
    let (terms, boundary_energy) = data.boundary(solution, radius, i, rule);
    let rhs = terms.iter().sum::<f64>();

    let u = &solution.field;
    let grid = u.grid;
    let vol = grid.volume();
    let frame = &solution.frame;
    let mut lhs = 0.0;
    let mut abs_lhs = 0.0;
    let mut ball_energy = 0.0;
    let gradsq: Vec<f64> = {
        let mut g = vec![0.0; grid.len()];
        for a in 0..3 {
            for (gi, v) in g.iter_mut().zip(&data.grads[a].values) {
                *gi += v * v;
            }
        }
        g
    };
    for idx in 0..grid.len() {
        let z = grid.point(idx);
        if z[0] * z[0] + z[1] * z[1] + z[2] * z[2] > radius * radius {
            continue;
        }
        let uz = u.values[idx];
        if uz == 0.0 {
            continue;
        }
        let x = frame.physical(z);
        let dv = frame.potential.gradient(&x)?[i];
        lhs += eps * dv * uz * uz;
        abs_lhs += eps * dv.abs() * uz * uz;
        ball_energy += data.coef * gradsq[idx] + frame.potential.eval(&x) * uz * uz;
    }
    lhs *= vol;
    abs_lhs *= vol;
    ball_energy *= vol;
    let scale = if abs_lhs > 0.0 { abs_lhs } else { ball_energy };
    let discrepancy = (lhs - rhs).abs() / lhs.abs().max(scale);
    Ok(PohozaevReport {
        component: i + 1,
        radius: radius * eps,
        blown_up_radius: radius,
        lhs,
        rhs,
        boundary_terms: terms,
        scale,
        discrepancy,
        boundary_energy,
    })
}

/// `∫ |εzᵢ + yᵢ|^{m−2}(εzᵢ + yᵢ) U(|z|)² dz`, `i ∈ {1,2,3}`.
pub fn moment_functional(
    gs: &KirchhoffGroundState,
    eps: f64,
    y: Point,
    m: f64,
    i: usize,
) -> Result<f64, DiagnosticsError> {
    if !(m > 1.0) {
        return Err(DiagnosticsError::InvalidArgument(format!("moment order must exceed 1, got {m}")));
    }
    if !(1..=3).contains(&i) {
        return Err(DiagnosticsError::InvalidArgument(format!("component index {i} out of range")));
    }
    let i = i - 1;
    let rule = AngularRule::product(24);
    Ok(weighted_by_profile_sq(gs, &rule, |z| {
        let t = eps * z[i] + y[i];
        if t == 0.0 {
            0.0
        } else {
            t.abs().powf(m - 2.0) * t
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub eps: f64,
    pub y: Option<Point>,
    pub center_ratio: Option<f64>,
    pub correction_norm: Option<f64>,
    pub scaled_correction: Option<f64>,
    /// Slope of `log‖φ_ε‖_ε` against `log ε` between this and the previous
    /// successful row.
    pub local_exponent: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTrace {
    pub rows: Vec<TraceRow>,
    /// Least-squares slope of `log‖φ_ε‖_ε` against `log ε`.
    pub fitted_exponent: Option<f64>,
    /// `(β, [‖φ_ε‖_ε / ε^{3/2+β}])` for a sweep of `β`.
    pub beta_sweep: Vec<(f64, Vec<f64>)>,
}

impl ConcentrationTrace {
    pub fn center_ratios_strictly_decreasing(&self) -> bool {
        let r: Vec<f64> = self.rows.iter().filter_map(|r| r.center_ratio).collect();
        r.len() == self.rows.len() && r.windows(2).all(|w| w[1] < w[0])
    }

    /// CSV with columns `eps,y1,y2,y3,center_ratio,correction_norm,
    /// scaled_correction,local_exponent,fitted_exponent,error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "eps,y1,y2,y3,center_ratio,correction_norm,scaled_correction,local_exponent,fitted_exponent,error\n",
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for r in &self.rows {
            let y = r.y.map(|y| y.map(|v| format!("{v:.12e}"))).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.eps,
                y[0],
                y[1],
                y[2],
                opt(r.center_ratio),
                opt(r.correction_norm),
                opt(r.scaled_correction),
                opt(r.local_exponent),
                opt(self.fitted_exponent),
                r.error.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        out
    }
}

pub const BETA_SWEEP: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];

/// Runs the centered Newton pipeline for each `ε` (in parallel). Per-`ε`
/// failures are recorded and the sweep continues.
pub fn concentration_sweep(
    setup: &PerturbedSetup,
    template: &EpsilonFrame,
    eps_list: &[f64],
    max_rounds: usize,
) -> Result<(ConcentrationTrace, Vec<Option<ReducedSolution>>), DiagnosticsError> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(DiagnosticsError::InvalidArgument("ε list must be strictly decreasing".into()));
    }
    let results: Vec<Result<ReducedSolution, PerturbedError>> = eps_list
        .par_iter()
        .map(|&eps| {
            let frame = EpsilonFrame::new(eps, template.potential.x0, template.potential.clone())?;
            setup.newton_centered(&frame, max_rounds)
        })
        .collect();
    Ok(trace_from_results(eps_list, results))
}

/// Builds the trace (fits included) from per-`ε` outcomes.
pub fn trace_from_results(
    eps_list: &[f64],
    results: Vec<Result<ReducedSolution, PerturbedError>>,
) -> (ConcentrationTrace, Vec<Option<ReducedSolution>>) {
    let mut rows = Vec::new();
    let mut sols = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    let mut pts = Vec::new();
    for (&eps, res) in eps_list.iter().zip(results) {
        match res {
            Ok(sol) => {
                let norm = sol.correction_norm;
                let local = last.map(|(e0, n0)| (norm / n0).ln() / (eps / e0).ln());
                last = Some((eps, norm));
                pts.push((eps.ln(), norm.ln()));
                rows.push(TraceRow {
                    eps,
                    y: Some(sol.frame.y),
                    center_ratio: Some(sol.center_ratio()),
                    correction_norm: Some(norm),
                    scaled_correction: Some(sol.scaled_correction()),
                    local_exponent: local,
                    error: None,
                });
                sols.push(Some(sol));
            }
            Err(e) => {
                rows.push(TraceRow {
                    eps,
                    y: None,
                    center_ratio: None,
                    correction_norm: None,
                    scaled_correction: None,
                    local_exponent: None,
                    error: Some(e.to_string()),
                });
                sols.push(None);
            }
        }
    }
    let fitted_exponent = fit_slope(&pts);
    let beta_sweep = BETA_SWEEP
        .iter()
        .map(|&beta| {
            let ratios = rows.iter().filter_map(|r| r.correction_norm.map(|n| n / r.eps.powf(1.5 + beta))).collect();
            (beta, ratios)
        })
        .collect();
    (ConcentrationTrace { rows, fitted_exponent, beta_sweep }, sols)
}

/// Least-squares slope through `(x, y)` points; `None` with fewer than two.
pub fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

#[derive(Debug, Clone)]
pub struct Comparison {
    /// `(ū₁ − ū₂)/‖ū₁ − ū₂‖∞`.
    pub xi: Field3D,
    pub sup_difference: f64,
    /// Blown-up location where `|ξ| = 1`.
    pub sup_location: Point,
    /// `max |ξ|` outside the blown-up ball of radius [`DECAY_RADIUS`].
    pub outer_max: f64,
    pub decays: bool,
}

/// Normalized difference of two solutions on the same frame and grid.
/// Differences below `tol` in maximum norm yield
/// [`DiagnosticsError::IdenticalSolutions`].
pub fn compare_solutions(u1: &ReducedSolution, u2: &ReducedSolution, tol: f64) -> Result<Comparison, DiagnosticsError> {
    compare_fields(&u1.field, &u2.field, tol).and_then(|c| {
        if u1.frame != u2.frame {
            Err(DiagnosticsError::Mismatch("solutions live in different frames".into()))
        } else {
            Ok(c)
        }
    })
}

pub fn compare_fields(f1: &Field3D, f2: &Field3D, tol: f64) -> Result<Comparison, DiagnosticsError> {
    if f1.grid != f2.grid {
        return Err(DiagnosticsError::Mismatch("solutions live on different grids".into()));
    }
    let diff = f1.add_scaled(-1.0, f2);
    let (mut arg, mut sup) = (0, 0.0);
    for (i, v) in diff.values.iter().enumerate() {
        if v.abs() > sup {
            sup = v.abs();
            arg = i;
        }
    }
    if sup < tol {
        return Err(DiagnosticsError::IdenticalSolutions { sup });
    }
    let xi = diff.scale(1.0 / sup);
    let grid = xi.grid;
    let mut outer_max: f64 = 0.0;
    for (idx, v) in xi.values.iter().enumerate() {
        let z = grid.point(idx);
        if z[0] * z[0] + z[1] * z[1] + z[2] * z[2] > DECAY_RADIUS * DECAY_RADIUS {
            outer_max = outer_max.max(v.abs());
        }
    }
    Ok(Comparison {
        sup_location: grid.point(arg),
        xi,
        sup_difference: sup,
        outer_max,
        decays: outer_max < DECAY_LEVEL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = [0.2f64, 0.1, 0.05].iter().map(|e| (e.ln(), (3.0 * e.powf(3.5)).ln())).collect();
        assert!((fit_slope(&pts).unwrap() - 3.5).abs() < 1e-12);
        assert!(fit_slope(&pts[..1]).is_none());
    }

    #[test]
    fn identical_fields_are_reported() {
        let g = crate::perturbed::Box3D::new(4.0, 9).unwrap();
        let f = Field3D::from_fn(g, |x| (-x[0] * x[0]).exp());
        assert!(matches!(compare_fields(&f, &f, 1e-14), Err(DiagnosticsError::IdenticalSolutions { .. })));
        let f2 = f.add_scaled(1e-3, &Field3D::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()));
        let c = compare_fields(&f2, &f, 1e-14).unwrap();
        assert!((c.sup_difference - 1e-3).abs() < 1e-15);
        assert_eq!(c.sup_location, [0.0, 0.0, 0.0]);
        assert!(c.decays);
    }
}
