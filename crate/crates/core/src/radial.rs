//! Radial grids, quadrature for exponentially decaying integrands, the radial
//! Laplacian stencil and exponential tail fitting.
//!
//! Every profile in this crate is a function of `r = |x|` on a uniform grid
//! starting at the origin. Values beyond the last node are either zero or
//! described by an attached [`Tail`] of the form `C e^{-δ r} r^{-s}`.

use std::f64::consts::PI;
use std::ops::Range;
use std::sync::Arc;

use thiserror::Error;

/// Default uniform step.
pub const DEFAULT_STEP: f64 = 0.01;
/// Default truncation radius.
pub const DEFAULT_R_MAX: f64 = 40.0;

/// Largest last-node magnitude tolerated without an attached tail.
const NON_DECAYING_LIMIT: f64 = 1e-6;
/// Largest log-scale deviation from the fitted line before a tail fit is rejected.
const TAIL_FIT_RESIDUAL: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("grid needs a positive step and at least {min} nodes (step {step}, r_max {r_max})")]
    InvalidGrid { step: f64, r_max: f64, min: usize },
    #[error("integrand does not decay: last value {last:e} with no tail attached")]
    NonDecayingIntegrand { last: f64 },
    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },
    #[error("values are not strictly positive on the fit window (node {index})")]
    NonPositiveWindow { index: usize },
    #[error("tail is not exponential: residual {residual:e}, rate {rate}")]
    TailNotExponential { residual: f64, rate: f64 },
    #[error("fit window {start}..{end} is invalid for a grid of {len} nodes")]
    InvalidWindow { start: usize, end: usize, len: usize },
    #[error("functions live on different grids")]
    GridMismatch,
}

/// Uniform radial grid `r_j = j h`, `j = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    step: f64,
}

impl RadialGrid {
    pub fn uniform(step: f64, r_max: f64) -> Result<Self, RadialError> {
        if !(step > 0.0) || !(r_max > 0.0) || !step.is_finite() || !r_max.is_finite() {
            return Err(RadialError::InvalidGrid { step, r_max, min: 3 });
        }
        let intervals = (r_max / step).round() as usize;
        if intervals < 2 {
            return Err(RadialError::InvalidGrid { step, r_max, min: 3 });
        }
        let nodes = (0..=intervals).map(|j| j as f64 * step).collect();
        Ok(Self { nodes, step })
    }

    /// `h = 0.01`, `r_max = 40`.
    pub fn default_grid() -> Self {
        Self::uniform(DEFAULT_STEP, DEFAULT_R_MAX).expect("default grid is valid")
    }

    /// Same node count, every radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { nodes: self.nodes.iter().map(|r| r * factor).collect(), step: self.step * factor }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().expect("grid is never empty")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node closest to `r`, clamped to the grid.
    pub fn index_of(&self, r: f64) -> usize {
        ((r / self.step).round().max(0.0) as usize).min(self.len() - 1)
    }
}

/// Analytic continuation `C e^{-δ r} r^{-s}` beyond the last node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tail {
    pub amplitude: f64,
    pub rate: f64,
    pub power: f64,
}

impl Tail {
    /// The usual `C e^{-δ r}/r` form.
    pub fn yukawa(amplitude: f64, rate: f64) -> Self {
        Self { amplitude, rate, power: 1.0 }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.amplitude * (-self.rate * r).exp() * r.powf(-self.power)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        -self.eval(r) * (self.rate + self.power / r)
    }

    /// Tail of `f^k`.
    pub fn powi(&self, k: f64) -> Self {
        Self {
            amplitude: self.amplitude.abs().powf(k) * self.amplitude.signum().powi(k as i32),
            rate: self.rate * k,
            power: self.power * k,
        }
    }

    pub fn product(&self, other: &Tail) -> Self {
        Self {
            amplitude: self.amplitude * other.amplitude,
            rate: self.rate + other.rate,
            power: self.power + other.power,
        }
    }

    /// Tail of `r ↦ f(r / s)`.
    pub fn rescaled(&self, s: f64) -> Self {
        Self { amplitude: self.amplitude * s.powf(self.power), rate: self.rate / s, power: self.power }
    }

    /// `∫_R^∞ r^w · tail(r) dr`.
    fn moment_from(&self, w: i32, r0: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let a = w as f64 - self.power + 1.0;
        let x = self.rate * r0;
        self.amplitude * upper_incomplete_gamma(a, x) / self.rate.powf(a)
    }
}

/// Weight applied by [`integrate_radial`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// `∫ f dr`
    Flat,
    /// `∫ r f dr`
    Linear,
    /// `∫ 4π r² f dr`, the integral over ℝ³ of a radial function.
    Spherical,
}

impl Weight {
    pub fn from_power(w: u32) -> Option<Self> {
        match w {
            0 => Some(Self::Flat),
            1 => Some(Self::Linear),
            2 => Some(Self::Spherical),
            _ => None,
        }
    }

    fn power(self) -> i32 {
        match self {
            Self::Flat => 0,
            Self::Linear => 1,
            Self::Spherical => 2,
        }
    }

    fn prefactor(self) -> f64 {
        match self {
            Self::Spherical => 4.0 * PI,
            _ => 1.0,
        }
    }
}

/// Values on a radial grid plus an optional analytic tail.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    tail: Option<Tail>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, tail: Option<Tail>) -> Result<Self, RadialError> {
        assert_eq!(grid.len(), values.len(), "one value per node");
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(RadialError::NonFinite { index });
        }
        Ok(Self { grid, values, tail })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values, tail: None }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values, tail: None }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> Option<&Tail> {
        self.tail.as_ref()
    }

    pub fn with_tail(mut self, tail: Option<Tail>) -> Self {
        self.tail = tail;
        self
    }

    /// Pointwise map; the tail is dropped.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.grid.nodes().iter().zip(&self.values).map(|(&r, &v)| f(r, v)).collect();
        Self { grid: Arc::clone(&self.grid), values, tail: None }
    }

    /// `|f|^k` with the tail carried along.
    pub fn powf(&self, k: f64) -> Self {
        let mut out = self.map(|_, v| v.abs().powf(k));
        out.tail = self.tail.map(|t| Tail { amplitude: t.amplitude.abs(), ..t }.powi(k));
        out
    }

    /// Pointwise product, tails multiplied when both are present.
    pub fn mul(&self, other: &RadialFunction) -> Result<Self, RadialError> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        let tail = match (self.tail, other.tail) {
            (Some(a), Some(b)) => Some(a.product(&b)),
            _ => None,
        };
        Ok(Self { grid: Arc::clone(&self.grid), values, tail })
    }

    /// `α f + β g`; tails are kept only when they coincide in rate and power.
    pub fn lin_comb(&self, alpha: f64, other: &RadialFunction, beta: f64) -> Result<Self, RadialError> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect();
        let tail = match (self.tail, other.tail) {
            (Some(a), Some(b)) if a.rate == b.rate && a.power == b.power => {
                Some(Tail { amplitude: alpha * a.amplitude + beta * b.amplitude, ..a })
            }
            (Some(a), None) if beta == 0.0 => Some(Tail { amplitude: alpha * a.amplitude, ..a }),
            (None, Some(b)) if alpha == 0.0 => Some(Tail { amplitude: beta * b.amplitude, ..b }),
            _ => None,
        };
        Ok(Self { grid: Arc::clone(&self.grid), values, tail })
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let values = self.values.iter().map(|v| alpha * v).collect();
        let tail = self.tail.map(|t| Tail { amplitude: alpha * t.amplitude, ..t });
        Self { grid: Arc::clone(&self.grid), values, tail }
    }

    /// Value at an arbitrary radius: cubic Lagrange interpolation inside the
    /// grid (even reflection through the origin), tail or zero outside.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let h = self.grid.step();
        let last = self.grid.len() - 1;
        if r > self.grid.r_max() {
            return self.tail.map_or(0.0, |t| t.eval(r));
        }
        let s = r / h;
        let j = (s.floor() as usize).min(last.saturating_sub(1));
        let t = s - j as f64;
        let at = |k: isize| -> f64 {
            if k < 0 {
                self.values[(-k) as usize]
            } else if (k as usize) <= last {
                self.values[k as usize]
            } else {
                let rk = k as f64 * h;
                self.tail.map_or(0.0, |tl| tl.eval(rk))
            }
        };
        let j = j as isize;
        let (fm, f0, f1, f2) = (at(j - 1), at(j), at(j + 1), at(j + 2));
        // Lagrange basis on nodes -1, 0, 1, 2.
        let wm = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
        wm * fm + w0 * f0 + w1 * f1 + w2 * f2
    }

    fn check_grid(&self, other: &RadialFunction) -> Result<(), RadialError> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(RadialError::GridMismatch)
        }
    }
}

/// Composite Simpson over the grid plus the analytic tail contribution.
pub fn integrate_radial(f: &RadialFunction, weight: Weight) -> Result<f64, RadialError> {
    let last = *f.values.last().expect("grid is never empty");
    if f.tail.is_none() && last.abs() > NON_DECAYING_LIMIT {
        return Err(RadialError::NonDecayingIntegrand { last });
    }
    let w = weight.power();
    let integrand: Vec<f64> = f.grid.nodes().iter().zip(&f.values).map(|(&r, &v)| v * r.powi(w)).collect();
    let mut total = simpson(&integrand, f.grid.step());
    if let Some(tail) = f.tail {
        total += tail.moment_from(w, f.grid.r_max());
    }
    Ok(weight.prefactor() * total)
}

/// Composite Simpson on uniformly spaced samples. An odd number of intervals
/// closes with the 3/8 rule on the last three.
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (samples[0] + samples[1]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail38) = if intervals.is_multiple_of(2) {
                (n - 1, false)
            } else if intervals >= 3 {
                (n - 4, true)
            } else {
                unreachable!()
            };
            let mut acc = samples[0] + samples[even_end];
            for (k, v) in samples.iter().enumerate().take(even_end).skip(1) {
                acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = acc * h / 3.0;
            if tail38 {
                let s = &samples[n - 4..];
                total += 3.0 * h / 8.0 * (s[0] + 3.0 * s[1] + 3.0 * s[2] + s[3]);
            }
            total
        }
    }
}

/// `f'' + (2/r) f'` by centered second-order differences. The origin uses the
/// regularity limit `3 f''(0)` of an even function. The last node borrows its
/// outer neighbour from the tail, or falls back to one-sided stencils.
pub fn radial_laplacian(f: &RadialFunction) -> RadialFunction {
    let n = f.grid.len();
    assert!(n >= 3, "radial Laplacian needs at least three nodes");
    let h = f.grid.step();
    let r = f.grid.nodes();
    let v = &f.values;
    let mut out = vec![0.0; n];
    out[0] = 6.0 * (v[1] - v[0]) / (h * h);
    for j in 1..n - 1 {
        let d2 = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h);
        let d1 = (v[j + 1] - v[j - 1]) / (2.0 * h);
        out[j] = d2 + 2.0 / r[j] * d1;
    }
    let j = n - 1;
    out[j] = match f.tail {
        Some(t) => {
            let outer = t.eval(r[j] + h);
            (outer - 2.0 * v[j] + v[j - 1]) / (h * h) + 2.0 / r[j] * (outer - v[j - 1]) / (2.0 * h)
        }
        None if n >= 4 => {
            let d2 = (2.0 * v[j] - 5.0 * v[j - 1] + 4.0 * v[j - 2] - v[j - 3]) / (h * h);
            let d1 = (3.0 * v[j] - 4.0 * v[j - 1] + v[j - 2]) / (2.0 * h);
            d2 + 2.0 / r[j] * d1
        }
        None => out[j - 1],
    };
    RadialFunction { grid: Arc::clone(&f.grid), values: out, tail: None }
}

/// Least-squares fit of `log(r f(r)) = log C − δ r` over the node window.
pub fn fit_tail(f: &RadialFunction, window: Range<usize>) -> Result<(f64, f64), RadialError> {
    let n = f.grid.len();
    if window.start >= window.end || window.end > n || window.end - window.start < 2 {
        return Err(RadialError::InvalidWindow { start: window.start, end: window.end, len: n });
    }
    let r = f.grid.nodes();
    let mut xs = Vec::with_capacity(window.len());
    let mut ys = Vec::with_capacity(window.len());
    for j in window {
        let v = f.values[j];
        if !(v > 0.0) || r[j] <= 0.0 {
            return Err(RadialError::NonPositiveWindow { index: j });
        }
        xs.push(r[j]);
        ys.push((r[j] * v).ln());
    }
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
    let rate = -slope;
    if residual > TAIL_FIT_RESIDUAL || !(rate > 0.0) {
        return Err(RadialError::TailNotExponential { residual, rate });
    }
    Ok((intercept.exp(), rate))
}

/// `Γ(a, x)` for real `a` and `x > 0` by the Legendre continued fraction
/// (modified Lentz). Converges quickly once `x` exceeds `a + 1`; smaller
/// arguments fall back to quadrature of the defining integral.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    assert!(x > 0.0, "upper incomplete gamma needs x > 0");
    if x < a + 1.0 || x < 1.0 {
        return incomplete_gamma_quadrature(a, x);
    }
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln()).exp() * h
}

fn incomplete_gamma_quadrature(a: f64, x: f64) -> f64 {
    // Substitute t = x + s and integrate s^0..∞ of (x+s)^{a-1} e^{-(x+s)}.
    let span = 60.0 + a.abs() * 4.0;
    let steps = 20_000;
    let h = span / steps as f64;
    let samples: Vec<f64> = (0..=steps)
        .map(|k| {
            let t = x + k as f64 * h;
            t.powf(a - 1.0) * (-t).exp()
        })
        .collect();
    simpson(&samples, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> Arc<RadialGrid> {
        Arc::new(RadialGrid::default_grid())
    }

    #[test]
    fn default_grid_shape() {
        let g = RadialGrid::default_grid();
        assert_eq!(g.nodes()[0], 0.0);
        assert!(g.r_max() >= 30.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.len(), 4001);
    }

    #[test]
    fn zero_integrand() {
        let f = RadialFunction::zeros(grid());
        assert_eq!(integrate_radial(&f, Weight::Spherical).unwrap(), 0.0);
    }

    #[test]
    fn spherical_integral_of_exponential() {
        let f = RadialFunction::from_fn(grid(), |r| (-r).exp());
        let v = integrate_radial(&f, Weight::Spherical).unwrap();
        assert_relative_eq!(v, 8.0 * PI, max_relative = 1e-8);
    }

    #[test]
    fn flat_integral_of_exponential() {
        let f = RadialFunction::from_fn(grid(), |r| (-2.0 * r).exp());
        let v = integrate_radial(&f, Weight::Flat).unwrap();
        assert!((v - 0.5).abs() < 1e-8);
    }

    #[test]
    fn non_decaying_rejected() {
        let f = RadialFunction::from_fn(grid(), |_| 1.0);
        assert!(matches!(integrate_radial(&f, Weight::Flat), Err(RadialError::NonDecayingIntegrand { .. })));
    }

    #[test]
    fn tail_restores_truncated_mass() {
        // e^{-r}/r truncated at r = 8, tail carries the rest of ∫ 4π r² f.
        let g = Arc::new(RadialGrid::uniform(0.001, 8.0).unwrap());
        let f = RadialFunction::from_fn(Arc::clone(&g), |r| if r == 0.0 { 0.0 } else { (-r).exp() / r })
            .with_tail(Some(Tail::yukawa(1.0, 1.0)));
        // r² e^{-r}/r = r e^{-r}, integrand vanishes at 0.
        let v = integrate_radial(&f, Weight::Spherical).unwrap();
        assert_relative_eq!(v, 4.0 * PI, max_relative = 1e-9);
    }

    #[test]
    fn incomplete_gamma_matches_closed_forms() {
        // Γ(1, x) = e^{-x}, Γ(2, x) = (x + 1) e^{-x}, Γ(0, x) = E1(x).
        for &x in &[2.0, 10.0, 35.0] {
            assert_relative_eq!(upper_incomplete_gamma(1.0, x), (-x).exp(), max_relative = 1e-12);
            assert_relative_eq!(upper_incomplete_gamma(2.0, x), (x + 1.0) * (-x).exp(), max_relative = 1e-12);
        }
        // E1(1) = 0.21938393439552...
        assert_relative_eq!(upper_incomplete_gamma(0.0, 1.0), 0.219_383_934_395_520_3, max_relative = 1e-8);
    }

    #[test]
    fn laplacian_of_quadratic_and_constant() {
        let g = Arc::new(RadialGrid::uniform(0.05, 5.0).unwrap());
        let q = radial_laplacian(&RadialFunction::from_fn(Arc::clone(&g), |r| r * r));
        for v in &q.values()[..q.values().len() - 1] {
            assert!((v - 6.0).abs() < 1e-9, "{v}");
        }
        let c = radial_laplacian(&RadialFunction::from_fn(g, |_| 1.0));
        assert!(c.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn laplacian_of_exponential_is_second_order() {
        let err = |h: f64| {
            let g = Arc::new(RadialGrid::uniform(h, 10.0).unwrap());
            let f = RadialFunction::from_fn(Arc::clone(&g), |r| (-r).exp());
            let lap = radial_laplacian(&f);
            g.nodes()
                .iter()
                .zip(lap.values())
                .skip(1)
                .take(g.len() - 2)
                .filter(|(r, _)| **r >= 0.5)
                .map(|(r, v)| (v - (1.0 - 2.0 / r) * (-r).exp()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e2 < 1e-4);
        assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn fit_recovers_yukawa_tail() {
        let g = grid();
        let window = g.index_of(20.0)..g.index_of(30.0) + 1;
        let f = RadialFunction::from_fn(Arc::clone(&g), |r| (-r).exp() / r.max(1e-300));
        let (c, d) = fit_tail(&f, window.clone()).unwrap();
        assert!((c - 1.0).abs() < 1e-4 && (d - 1.0).abs() < 1e-4);
        let f = RadialFunction::from_fn(Arc::clone(&g), |r| 5.0 * (-2.0 * r).exp() / r.max(1e-300));
        let (c, d) = fit_tail(&f, window.clone()).unwrap();
        assert!((c - 5.0).abs() < 1e-3 && (d - 2.0).abs() < 1e-3);
        let f = RadialFunction::from_fn(g, |r| 1.0 / (r * r).max(1e-300));
        assert!(matches!(fit_tail(&f, window), Err(RadialError::TailNotExponential { .. })));
    }

    #[test]
    fn eval_interpolates_smooth_profiles() {
        let g = Arc::new(RadialGrid::uniform(0.01, 20.0).unwrap());
        let f = RadialFunction::from_fn(g, |r| (-r * r).exp());
        for &r in &[0.0, 0.003, 0.4567, 1.23456] {
            assert!((f.eval(r) - (-r * r).exp()).abs() < 1e-8);
        }
        assert_eq!(f.eval(25.0), 0.0);
    }

    #[test]
    fn simpson_handles_odd_interval_counts() {
        // ∫_0^1 x^3 = 1/4 exactly for both rules.
        for n in [5usize, 6, 7, 8] {
            let h = 1.0 / (n - 1) as f64;
            let s: Vec<f64> = (0..n).map(|k| (k as f64 * h).powi(3)).collect();
            assert!((simpson(&s, h) - 0.25).abs() < 1e-14, "n = {n}");
        }
    }
}
