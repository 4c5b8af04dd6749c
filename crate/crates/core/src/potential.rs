//! Bounded potentials with a prescribed local shape near their minimum.
//!
//! Every model equals its local formula inside `cap_radius` of `x0` and blends
//! to a constant plateau over `[cap_radius, 2 cap_radius]` with a quintic
//! smoothstep, so `V` stays bounded and `C²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 3];

pub const DEFAULT_CAP_RADIUS: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("gradient is not available for {0}")]
    NotDifferentiable(&'static str),
    #[error("invalid potential: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `V ≡ 1`.
    Constant,
    /// `1 + Σ cᵢ|tᵢ|^m + dᵢ tᵢ³ + eᵢ tᵢ⁴` with `t = x − x0`. The optional cubic
    /// and quartic terms are the higher-order part of the expansion and break
    /// reflection symmetry.
    PowerWell {
        m: f64,
        c: Point,
        #[serde(default)]
        cubic: Point,
        #[serde(default)]
        quartic: Point,
    },
    /// `1 + κ|x − x0|^α`, Hölder of order `α` at `x0`.
    HolderWell { kappa: f64, alpha: f64 },
    /// Radial table `V(|x − x0|)`, linearly interpolated, constant past the
    /// last radius.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialModel {
    #[serde(flatten)]
    pub kind: PotentialKind,
    #[serde(default)]
    pub x0: Point,
    #[serde(default = "default_cap")]
    pub cap_radius: f64,
}

fn default_cap() -> f64 {
    DEFAULT_CAP_RADIUS
}

/// Quintic smoothstep on `[0, 1]` and its derivative.
fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        (s, ds)
    }
}

fn sub(x: &Point, y: &Point) -> Point {
    [x[0] - y[0], x[1] - y[1], x[2] - y[2]]
}

fn norm(t: &Point) -> f64 {
    (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt()
}

impl PotentialModel {
    pub fn constant() -> Self {
        Self { kind: PotentialKind::Constant, x0: [0.0; 3], cap_radius: DEFAULT_CAP_RADIUS }
    }

    pub fn power_well(m: f64, c: Point) -> Self {
        Self {
            kind: PotentialKind::PowerWell { m, c, cubic: [0.0; 3], quartic: [0.0; 3] },
            x0: [0.0; 3],
            cap_radius: DEFAULT_CAP_RADIUS,
        }
    }

    /// Power well plus per-axis cubic and quartic terms.
    pub fn power_well_with_corrections(m: f64, c: Point, cubic: Point, quartic: Point) -> Self {
        Self { kind: PotentialKind::PowerWell { m, c, cubic, quartic }, x0: [0.0; 3], cap_radius: DEFAULT_CAP_RADIUS }
    }

    pub fn holder_well(kappa: f64, alpha: f64) -> Self {
        Self { kind: PotentialKind::HolderWell { kappa, alpha }, x0: [0.0; 3], cap_radius: DEFAULT_CAP_RADIUS }
    }

    pub fn table(radii: Vec<f64>, values: Vec<f64>) -> Self {
        Self { kind: PotentialKind::Table { radii, values }, x0: [0.0; 3], cap_radius: DEFAULT_CAP_RADIUS }
    }

    pub fn with_center(mut self, x0: Point) -> Self {
        self.x0 = x0;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PotentialKind::Constant => "constant",
            PotentialKind::PowerWell { .. } => "power_well",
            PotentialKind::HolderWell { .. } => "holder_well",
            PotentialKind::Table { .. } => "table",
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, PotentialKind::Constant)
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        let bad = |msg: String| Err(PotentialError::InvalidModel(msg));
        if !(self.cap_radius > 0.0) {
            return bad(format!("cap radius must be positive, got {}", self.cap_radius));
        }
        match &self.kind {
            PotentialKind::Constant => {}
            PotentialKind::PowerWell { m, c, cubic, quartic } => {
                if !(*m > 1.0) {
                    return bad(format!("exponent m must exceed 1, got {m}"));
                }
                if c.iter().any(|v| *v == 0.0 || !v.is_finite()) {
                    return bad("coefficients c must be finite and nonzero".into());
                }
                if cubic.iter().chain(quartic).any(|v| !v.is_finite()) {
                    return bad("correction coefficients must be finite".into());
                }
            }
            PotentialKind::HolderWell { kappa, alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return bad(format!("Hölder order must lie in (0, 1], got {alpha}"));
                }
                if !(*kappa > 0.0) {
                    return bad(format!("kappa must be positive, got {kappa}"));
                }
            }
            PotentialKind::Table { radii, values } => {
                if radii.len() != values.len() || radii.len() < 2 {
                    return bad("table needs matching radii and values, at least two".into());
                }
                if radii[0] != 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("table radii must start at 0 and increase".into());
                }
                if values.iter().any(|v| !(*v > 0.0)) {
                    return bad("table values must be positive".into());
                }
            }
        }
        let (floor, _) = self.sampled_bounds(24);
        if !(floor > 0.0) {
            return bad(format!("potential is not bounded below by a positive constant (sampled min {floor})"));
        }
        Ok(())
    }

    /// Local formula and its gradient, no cap.
    fn local(&self, t: &Point) -> (f64, Point) {
        match &self.kind {
            PotentialKind::Constant => (1.0, [0.0; 3]),
            PotentialKind::PowerWell { m, c, cubic, quartic } => {
                let mut v = 1.0;
                let mut g = [0.0; 3];
                for i in 0..3 {
                    let a = t[i].abs();
                    v += c[i] * a.powf(*m) + cubic[i] * t[i].powi(3) + quartic[i] * t[i].powi(4);
                    let power = if a == 0.0 { 0.0 } else { m * c[i] * a.powf(m - 2.0) * t[i] };
                    g[i] = power + 3.0 * cubic[i] * t[i] * t[i] + 4.0 * quartic[i] * t[i].powi(3);
                }
                (v, g)
            }
            PotentialKind::HolderWell { kappa, alpha } => {
                let rho = norm(t);
                let v = 1.0 + kappa * rho.powf(*alpha);
                let g = if rho == 0.0 {
                    [f64::NAN; 3]
                } else {
                    let f = kappa * alpha * rho.powf(alpha - 2.0);
                    [f * t[0], f * t[1], f * t[2]]
                };
                (v, g)
            }
            PotentialKind::Table { radii, values } => (table_lookup(radii, values, norm(t)), [f64::NAN; 3]),
        }
    }

    /// Value the cap blends into.
    pub fn plateau(&self) -> f64 {
        let r = self.cap_radius;
        match &self.kind {
            PotentialKind::Constant => 1.0,
            PotentialKind::PowerWell { m, c, cubic, quartic } => {
                1.0 + (0..3)
                    .map(|i| c[i].abs() * r.powf(*m) + cubic[i].abs() * r.powi(3) + quartic[i].abs() * r.powi(4))
                    .sum::<f64>()
            }
            PotentialKind::HolderWell { kappa, alpha } => 1.0 + kappa * r.powf(*alpha),
            PotentialKind::Table { radii, values } => table_lookup(radii, values, r),
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        let t = sub(x, &self.x0);
        let rho = norm(&t);
        if rho <= self.cap_radius {
            return self.local(&t).0;
        }
        let (s, _) = smoothstep((rho - self.cap_radius) / self.cap_radius);
        if s == 1.0 {
            return self.plateau();
        }
        let (v, _) = self.local(&t);
        (1.0 - s) * v + s * self.plateau()
    }

    pub fn gradient(&self, x: &Point) -> Result<Point, PotentialError> {
        let t = sub(x, &self.x0);
        let rho = norm(&t);
        match &self.kind {
            PotentialKind::Table { .. } => return Err(PotentialError::NotDifferentiable("tabulated potentials")),
            PotentialKind::HolderWell { .. } if rho == 0.0 => {
                return Err(PotentialError::NotDifferentiable("a Hölder well at its center"))
            }
            _ => {}
        }
        let (v, g) = self.local(&t);
        if rho <= self.cap_radius {
            return Ok(g);
        }
        let (s, ds) = smoothstep((rho - self.cap_radius) / self.cap_radius);
        if s == 1.0 {
            return Ok([0.0; 3]);
        }
        let plateau = self.plateau();
        let mut out = [0.0; 3];
        for i in 0..3 {
            let dsi = ds / self.cap_radius * t[i] / rho;
            out[i] = (1.0 - s) * g[i] + (plateau - v) * dsi;
        }
        Ok(out)
    }

    /// Minimum and maximum of `V` over a uniform sample of the blend ball
    /// and the plateau.
    pub fn sampled_bounds(&self, n: usize) -> (f64, f64) {
        let reach = 2.0 * self.cap_radius;
        let mut lo = self.plateau();
        let mut hi = lo;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let f = |q: usize| -reach + 2.0 * reach * q as f64 / n as f64;
                    let x = [self.x0[0] + f(i), self.x0[1] + f(j), self.x0[2] + f(k)];
                    let v = self.eval(&x);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }
}

fn table_lookup(radii: &[f64], values: &[f64], r: f64) -> f64 {
    let last = radii.len() - 1;
    if r >= radii[last] {
        return values[last];
    }
    let j = radii.partition_point(|&x| x <= r).saturating_sub(1).min(last - 1);
    let t = (r - radii[j]) / (radii[j + 1] - radii[j]);
    values[j] * (1.0 - t) + values[j + 1] * t
}

/// Free-function form of [`PotentialModel::eval`].
pub fn eval_v(model: &PotentialModel, x: &Point) -> f64 {
    model.eval(x)
}

/// Free-function form of [`PotentialModel::gradient`].
pub fn eval_grad_v(model: &PotentialModel, x: &Point) -> Result<Point, PotentialError> {
    model.gradient(x)
}
