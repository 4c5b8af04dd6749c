//! Classical profile `Q` by shooting and the Kirchhoff ground state obtained
//! from it by the scaling `U(r) = Q(r/√c)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radial::{
    fit_tail, integrate_radial, radial_laplacian, RadialError, RadialFunction, RadialGrid, Tail, Weight,
};

const BLOWUP: f64 = 1e6;
const DECAYED: f64 = 1e-8;
/// A shot whose first event happens only after `Q` fell below this level is
/// indistinguishable from the decaying solution in double precision.
const DECAY_FLOOR: f64 = 1e-5;
const BRACKET_LOW: f64 = 1.0 + 1e-3;
const BRACKET_HIGH: f64 = 1e3;
const BRACKET_SCAN: usize = 400;
/// RK4 steps per grid interval.
const SUBSTEPS: usize = 4;
/// Length of the tail-fit window, in units of r.
const FIT_SPAN: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundStateError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("shooting blew up at r = {radius}")]
    IntegrationBlowup { radius: f64 },
    #[error("no sign change of the shooting outcome in q0 ∈ [{low}, {high}]")]
    BracketNotFound { low: f64, high: f64 },
    #[error("central value must be positive, got {0}")]
    NonPositiveCentralValue(f64),
    #[error("profile never reached the reliable decay regime (last reliable r = {radius})")]
    UnreliableTail { radius: f64 },
    #[error(transparent)]
    Radial(#[from] RadialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KirchhoffParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl KirchhoffParams {
    pub fn new(a: f64, b: f64, p: f64) -> Result<Self, GroundStateError> {
        let params = Self { a, b, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), GroundStateError> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(GroundStateError::InvalidParams(format!("a must be positive, got {}", self.a)));
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(GroundStateError::InvalidParams(format!("b must be nonnegative, got {}", self.b)));
        }
        validate_exponent(self.p)
    }
}

fn validate_exponent(p: f64) -> Result<(), GroundStateError> {
    if p > 1.0 && p < 5.0 {
        Ok(())
    } else {
        Err(GroundStateError::InvalidParams(format!("p must lie in (1, 5), got {p}")))
    }
}

/// Grid and bisection settings for the shooting solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingOptions {
    pub step: f64,
    pub r_max: f64,
    pub tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { step: crate::radial::DEFAULT_STEP, r_max: crate::radial::DEFAULT_R_MAX, tol: 1e-12 }
    }
}

/// Radial solution of `−ΔQ + Q = Q^p` and its norms over ℝ³.
#[derive(Debug, Clone)]
pub struct ClassicalProfile {
    pub p: f64,
    pub q: RadialFunction,
    pub dq: RadialFunction,
    pub central_value: f64,
    /// `∫|∇Q|²`
    pub k: f64,
    /// `∫Q²`
    pub m: f64,
    /// `∫Q^{p+1}`
    pub p_norm: f64,
    /// Radius beyond which the values come from the fitted tail.
    pub splice_radius: f64,
}

impl ClassicalProfile {
    pub fn nehari_defect(&self) -> f64 {
        (self.k + self.m - self.p_norm).abs() / self.p_norm
    }

    pub fn pohozaev_defect(&self) -> f64 {
        let expected = 3.0 * (self.p - 1.0) / (5.0 - self.p);
        (self.k / self.m - expected).abs() / expected
    }
}

#[derive(Debug, Clone)]
pub enum ShotOutcome {
    /// `Q` reached zero at the given radius.
    Crossing {
        radius: f64,
    },
    /// `Q` turned upward or climbed above `q0` at the given radius.
    NoDecay {
        radius: f64,
    },
    Decaying(Box<ClassicalProfile>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Crossing,
    NoDecay,
    None,
}

/// Raw RK4 trajectory up to the first event.
struct Trajectory {
    q: Vec<f64>,
    dq: Vec<f64>,
    event: Event,
}

fn rhs(p: f64, r: f64, q: f64, dq: f64) -> f64 {
    q - q.max(0.0).powf(p) - 2.0 * dq / r
}

fn shoot(p: f64, q0: f64, grid: &RadialGrid) -> Result<Trajectory, GroundStateError> {
    let h = grid.step();
    let n = grid.len();
    let mut q = Vec::with_capacity(n);
    let mut dq = Vec::with_capacity(n);
    q.push(q0);
    dq.push(0.0);
    // Q = q0 + α r² + β r⁴ + O(r⁶) near the origin.
    let alpha = (q0 - q0.powf(p)) / 6.0;
    let beta = (1.0 - p * q0.powf(p - 1.0)) * alpha / 20.0;
    let (mut y, mut v) = (q0 + alpha * h * h + beta * h.powi(4), 2.0 * alpha * h + 4.0 * beta * h.powi(3));
    let mut event = Event::None;
    for j in 1..n {
        let r = j as f64 * h;
        if j > 1 {
            let hs = h / SUBSTEPS as f64;
            for k in 0..SUBSTEPS {
                let rp = r - h + k as f64 * hs;
                let k1y = v;
                let k1v = rhs(p, rp, y, v);
                let k2y = v + 0.5 * hs * k1v;
                let k2v = rhs(p, rp + 0.5 * hs, y + 0.5 * hs * k1y, k2y);
                let k3y = v + 0.5 * hs * k2v;
                let k3v = rhs(p, rp + 0.5 * hs, y + 0.5 * hs * k2y, k3y);
                let k4y = v + hs * k3v;
                let k4v = rhs(p, rp + hs, y + hs * k3y, k4y);
                y += hs / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
                v += hs / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            }
        }
        if y <= 0.0 {
            event = Event::Crossing;
            break;
        }
        if y.abs() > BLOWUP || !y.is_finite() {
            return Err(GroundStateError::IntegrationBlowup { radius: r });
        }
        q.push(y);
        dq.push(v);
        if v > 0.0 || (r > 1.0 && y > q0) {
            event = Event::NoDecay;
            break;
        }
    }
    Ok(Trajectory { q, dq, event })
}

/// Integrates from `Q(0) = q0`, `Q'(0) = 0` on the default grid and classifies
/// the outcome.
pub fn classify_shot(p: f64, q0: f64) -> Result<ShotOutcome, GroundStateError> {
    classify_shot_on(p, q0, &RadialGrid::default_grid())
}

pub fn classify_shot_on(p: f64, q0: f64, grid: &RadialGrid) -> Result<ShotOutcome, GroundStateError> {
    if !(q0 > 0.0) {
        return Err(GroundStateError::NonPositiveCentralValue(q0));
    }
    validate_exponent(p)?;
    let traj = shoot(p, q0, grid)?;
    let last = traj.q.len() - 1;
    let radius = last as f64 * grid.step();
    let settled =
        traj.q.iter().position(|&v| v < DECAY_FLOOR).is_some_and(|j| j as f64 * grid.step() >= 2.0 * FIT_SPAN);
    match traj.event {
        Event::Crossing | Event::NoDecay if settled => {
            // The instability grows like e^r; a few units before the event
            // the trajectory is still accurate.
            let floor = traj.q.iter().position(|&v| v < DECAY_FLOOR).unwrap_or(last);
            let margin = (3.0 / grid.step()).round() as usize;
            let reliable = floor.max(last.saturating_sub(margin));
            let profile = assemble_profile(p, grid, &traj.q, &traj.dq, reliable)?;
            Ok(ShotOutcome::Decaying(Box::new(profile)))
        }
        Event::Crossing => Ok(ShotOutcome::Crossing { radius: radius + grid.step() }),
        Event::NoDecay => Ok(ShotOutcome::NoDecay { radius }),
        Event::None => {
            if traj.q[last].abs() < DECAYED {
                let profile = assemble_profile(p, grid, &traj.q, &traj.dq, last)?;
                Ok(ShotOutcome::Decaying(Box::new(profile)))
            } else {
                Ok(ShotOutcome::NoDecay { radius })
            }
        }
    }
}

/// Bisection on `q0` between a NoDecay and a Crossing shot on the default grid.
pub fn solve_classical(p: f64, tol: f64) -> Result<ClassicalProfile, GroundStateError> {
    solve_classical_with(p, ShootingOptions { tol, ..ShootingOptions::default() })
}

pub fn solve_classical_with(p: f64, opts: ShootingOptions) -> Result<ClassicalProfile, GroundStateError> {
    validate_exponent(p)?;
    let grid = RadialGrid::uniform(opts.step, opts.r_max)?;
    let (lo, hi) = find_bracket(p, &grid, BRACKET_LOW, BRACKET_HIGH)?;
    solve_in_bracket(p, &grid, lo, hi, opts.tol)
}

/// Same as [`solve_classical_with`] but bisecting from a caller-supplied
/// bracket; used to check that the answer does not depend on it.
pub fn solve_classical_in(
    p: f64,
    opts: ShootingOptions,
    low: f64,
    high: f64,
) -> Result<ClassicalProfile, GroundStateError> {
    validate_exponent(p)?;
    let grid = RadialGrid::uniform(opts.step, opts.r_max)?;
    let (lo, hi) = find_bracket(p, &grid, low, high)?;
    solve_in_bracket(p, &grid, lo, hi, opts.tol)
}

fn event_of(p: f64, q0: f64, grid: &RadialGrid) -> Result<Event, GroundStateError> {
    let traj = shoot(p, q0, grid)?;
    Ok(match traj.event {
        Event::None => Event::NoDecay,
        e => e,
    })
}

/// Geometric scan for adjacent values with NoDecay below and Crossing above.
fn find_bracket(p: f64, grid: &RadialGrid, low: f64, high: f64) -> Result<(f64, f64), GroundStateError> {
    let not_found = GroundStateError::BracketNotFound { low, high };
    if !(low > 0.0) || !(high > low) {
        return Err(not_found);
    }
    let ratio = (high / low).powf(1.0 / BRACKET_SCAN as f64);
    let mut prev = low;
    let mut prev_event = event_of(p, prev, grid)?;
    for k in 1..=BRACKET_SCAN {
        let q0 = if k == BRACKET_SCAN { high } else { low * ratio.powi(k as i32) };
        let e = match event_of(p, q0, grid) {
            Ok(e) => e,
            Err(GroundStateError::IntegrationBlowup { .. }) => Event::Crossing,
            Err(err) => return Err(err),
        };
        if prev_event == Event::NoDecay && e == Event::Crossing {
            return Ok((prev, q0));
        }
        prev = q0;
        prev_event = e;
    }
    Err(not_found)
}

fn solve_in_bracket(
    p: f64,
    grid: &RadialGrid,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<ClassicalProfile, GroundStateError> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match event_of(p, mid, grid)? {
            Event::Crossing => hi = mid,
            _ => lo = mid,
        }
    }
    let low = shoot(p, lo, grid)?;
    let high = shoot(p, hi, grid)?;
    // The two shots agree until the instability separates them; past that
    // radius neither is trustworthy.
    let common = low.q.len().min(high.q.len());
    let mut reliable = 0;
    for j in 0..common {
        let (a, b) = (low.q[j], high.q[j]);
        if (a - b).abs() > 1e-3 * a.abs().max(b.abs()) || low.dq[j] >= 0.0 && j > 0 {
            break;
        }
        reliable = j;
    }
    let q = &low.q;
    let dq = &low.dq;
    let mut profile = assemble_profile(p, grid, q, dq, reliable)?;
    profile.central_value = 0.5 * (lo + hi);
    Ok(profile)
}

/// Values up to node `reliable` come from the trajectory, the rest from an
/// exponential tail fitted just before it.
fn assemble_profile(
    p: f64,
    grid: &RadialGrid,
    q: &[f64],
    dq: &[f64],
    reliable: usize,
) -> Result<ClassicalProfile, GroundStateError> {
    let h = grid.step();
    let span = (FIT_SPAN / h).round() as usize;
    let radius = reliable as f64 * h;
    if reliable < span + 2 || radius < 2.0 * FIT_SPAN {
        return Err(GroundStateError::UnreliableTail { radius });
    }
    let grid = Arc::new(grid.clone());
    let n = grid.len();
    let mut values = vec![0.0; n];
    values[..=reliable].copy_from_slice(&q[..=reliable]);
    let partial = RadialFunction::new(Arc::clone(&grid), values.clone(), None)?;
    // The fit certifies exponential decay; the spliced tail itself matches
    // value and slope at the splice node so the profile stays C¹.
    fit_tail(&partial, reliable - span..reliable + 1)?;
    let (qr, dqr) = (q[reliable], dq[reliable]);
    let rate = -dqr / qr - 1.0 / radius;
    if !(rate > 0.0) {
        return Err(GroundStateError::UnreliableTail { radius });
    }
    let tail = Tail::yukawa(qr * radius * (rate * radius).exp(), rate);
    let mut dvalues = vec![0.0; n];
    dvalues[..=reliable].copy_from_slice(&dq[..=reliable]);
    for j in reliable + 1..n {
        let r = grid.nodes()[j];
        values[j] = tail.eval(r);
        dvalues[j] = tail.derivative(r);
    }
    let q = RadialFunction::new(Arc::clone(&grid), values, Some(tail))?;
    let dq = RadialFunction::new(grid, dvalues, None)?;
    let k = integrate_radial(&dq.powf(2.0), Weight::Spherical)?;
    let m = integrate_radial(&q.powf(2.0), Weight::Spherical)?;
    let p_norm = integrate_radial(&q.powf(p + 1.0), Weight::Spherical)?;
    Ok(ClassicalProfile { p, central_value: q.values()[0], q, dq, k, m, p_norm, splice_radius: radius })
}

/// `c` with `√c = ½(bK + √(b²K² + 4a))`, the positive root of `c = a + bK√c`.
pub fn scaling_constant(params: &KirchhoffParams, k: f64) -> f64 {
    let bk = params.b * k;
    let s = 0.5 * (bk + (bk * bk + 4.0 * params.a).sqrt());
    s * s
}

/// Ground state `U(r) = Q(r/√c)` of `−(a + b∫|∇U|²)ΔU + U = U^p`.
#[derive(Debug, Clone)]
pub struct KirchhoffGroundState {
    pub params: KirchhoffParams,
    pub profile: ClassicalProfile,
    pub c: f64,
    pub sqrt_c: f64,
    pub u: RadialFunction,
    pub du: RadialFunction,
    pub k_u: f64,
    pub m_u: f64,
    pub p_u: f64,
    pub energy: f64,
    pub a_const: f64,
    pub b_const: f64,
}

impl KirchhoffGroundState {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u.grid()
    }

    /// Effective diffusion coefficient `a + b K_U`.
    pub fn coefficient(&self) -> f64 {
        self.params.a + self.params.b * self.k_u
    }

    /// `|c − a − b K_U| / c`.
    pub fn self_consistency(&self) -> f64 {
        (self.c - self.coefficient()).abs() / self.c
    }

    /// `U(|x|)` at an arbitrary radius.
    pub fn eval(&self, r: f64) -> f64 {
        self.u.eval(r)
    }

    pub fn eval_derivative(&self, r: f64) -> f64 {
        let r = r.abs();
        if r > self.u.grid().r_max() {
            return self.u.tail().map_or(0.0, |t| t.derivative(r));
        }
        self.du.eval(r) * if r == 0.0 { 0.0 } else { 1.0 }
    }

    /// `U''` from the equation: `c U'' = U − U^p + ... − 2c U'/r`, with the
    /// limit `U''(0) = (U(0) − U(0)^p)/(3c)`.
    pub fn second_derivative(&self) -> RadialFunction {
        let c = self.c;
        let p = self.params.p;
        let du = self.du.values();
        self.u.map_with_index(|j, r, u| {
            let source = (u - u.max(0.0).powf(p)) / c;
            if j == 0 {
                source / 3.0
            } else {
                source - 2.0 * du[j] / r
            }
        })
    }

    /// Max-norm residual of `−(a + bK_U)ΔU + U − U^p` over interior nodes,
    /// with the second-order stencil.
    pub fn residual(&self) -> f64 {
        self.residual_with(&radial_laplacian(&self.u))
    }

    fn residual_with(&self, lap: &RadialFunction) -> f64 {
        let coef = self.coefficient();
        let p = self.params.p;
        let n = self.u.values().len();
        (1..n - 1)
            .map(|j| {
                let u = self.u.values()[j];
                (-coef * lap.values()[j] + u - u.max(0.0).powf(p)).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl RadialFunction {
    pub fn map_with_index(&self, f: impl Fn(usize, f64, f64) -> f64) -> RadialFunction {
        let values: Vec<f64> =
            self.grid().nodes().iter().zip(self.values()).enumerate().map(|(j, (&r, &v))| f(j, r, v)).collect();
        RadialFunction::new(Arc::clone(self.grid()), values, None).expect("finite map")
    }
}

pub fn build_ground_state(params: KirchhoffParams) -> Result<KirchhoffGroundState, GroundStateError> {
    build_ground_state_with(params, ShootingOptions::default())
}

pub fn build_ground_state_with(
    params: KirchhoffParams,
    opts: ShootingOptions,
) -> Result<KirchhoffGroundState, GroundStateError> {
    params.validate()?;
    let profile = solve_classical_with(params.p, opts)?;
    scale_profile(params, profile)
}

/// Builds `U` from an already computed `Q` with the same exponent.
pub fn scale_profile(
    params: KirchhoffParams,
    profile: ClassicalProfile,
) -> Result<KirchhoffGroundState, GroundStateError> {
    params.validate()?;
    if profile.p != params.p {
        return Err(GroundStateError::InvalidParams(format!(
            "profile exponent {} differs from p = {}",
            profile.p, params.p
        )));
    }
    let c = scaling_constant(&params, profile.k);
    let s = c.sqrt();
    let grid = Arc::new(profile.q.grid().scaled(s));
    let u =
        RadialFunction::new(Arc::clone(&grid), profile.q.values().to_vec(), profile.q.tail().map(|t| t.rescaled(s)))?;
    let du = RadialFunction::new(grid, profile.dq.values().iter().map(|v| v / s).collect(), None)?;
    let k_u = integrate_radial(&du.powf(2.0), Weight::Spherical)?;
    let m_u = integrate_radial(&u.powf(2.0), Weight::Spherical)?;
    let p_u = integrate_radial(&u.powf(params.p + 1.0), Weight::Spherical)?;
    let mut gs = KirchhoffGroundState {
        params,
        profile,
        c,
        sqrt_c: s,
        u,
        du,
        k_u,
        m_u,
        p_u,
        energy: 0.0,
        a_const: 0.0,
        b_const: 0.0,
    };
    let (a, b, m) = energy_constants(&gs);
    gs.a_const = a;
    gs.b_const = b;
    gs.energy = m;
    Ok(gs)
}

/// `I(u) = ½∫(a|∇u|² + u²) + (b/4)(∫|∇u|²)² − (1/(p+1))∫|u|^{p+1}` from norms.
pub fn kirchhoff_energy(params: &KirchhoffParams, k: f64, m: f64, p_norm: f64) -> f64 {
    0.5 * (params.a * k + m) + 0.25 * params.b * k * k - p_norm / (params.p + 1.0)
}

/// `(A, B, m)`: energy constant of the expansion, `½∫U²`, and `I(U)` with
/// `V(0) = 1`, so `m = A`.
pub fn energy_constants(gs: &KirchhoffGroundState) -> (f64, f64, f64) {
    let a = kirchhoff_energy(&gs.params, gs.k_u, gs.m_u, gs.p_u);
    (a, 0.5 * gs.m_u, a)
}
