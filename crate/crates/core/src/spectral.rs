//! Spherical-harmonic sectors of the linearized operator at the ground state.
//!
//! With `w = r φ` the radial operator `c(−Δ_r + λ_k/r²) + 1 − pU^{p−1}` becomes
//! the symmetric tridiagonal matrix `T_k` acting on interior nodes with
//! Dirichlet conditions at both ends. In the radial sector (`k = 0`) the
//! nonlocal Kirchhoff term contributes the positive form `2b(∫∇U·∇φ)²`,
//! represented as the rank-one update `ρ s sᵀ` with `s_j = r_j ΔU_j`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ground_state::KirchhoffGroundState;
use crate::radial::{integrate_radial, radial_laplacian, RadialFunction, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorIndex {
    pub k: u32,
}

impl SectorIndex {
    pub fn new(k: u32) -> Self {
        Self { k }
    }

    /// Eigenvalue `k(k+1)` of the Laplace–Beltrami operator on S².
    pub fn lambda(&self) -> f64 {
        let k = self.k as f64;
        k * (k + 1.0)
    }

    /// `M_k − M_{k−2}` with `M_k = (k+1)(k+2)/2`, i.e. `2k + 1`.
    pub fn multiplicity(&self) -> usize {
        let m = |k: i64| if k < 0 { 0 } else { ((k + 1) * (k + 2) / 2) as usize };
        let k = self.k as i64;
        m(k) - m(k - 2)
    }
}

/// Symmetric rank-one term `ρ s sᵀ`.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub weight: f64,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub sector: SectorIndex,
    /// Interior radii `r_1 .. r_{N−1}`.
    pub radii: Vec<f64>,
    pub diag: Vec<f64>,
    /// Constant off-diagonal `−c/h²`.
    pub off: f64,
    pub nonlocal: Option<RankOne>,
}

pub fn build_sector(gs: &KirchhoffGroundState, k: u32) -> SectorOperator {
    let sector = SectorIndex::new(k);
    let grid = gs.grid();
    let h = grid.step();
    let c = gs.c;
    let p = gs.params.p;
    let n = grid.len();
    let u = gs.u.values();
    let lam = sector.lambda();
    let radii: Vec<f64> = grid.nodes()[1..n - 1].to_vec();
    let diag: Vec<f64> = (1..n - 1)
        .map(|j| {
            let r = grid.nodes()[j];
            2.0 * c / (h * h) + c * lam / (r * r) + 1.0 - p * u[j].max(0.0).powf(p - 1.0)
        })
        .collect();
    let nonlocal = (k == 0).then(|| RankOne {
        weight: 8.0 * PI * gs.params.b * h,
        vector: (1..n - 1).map(|j| grid.nodes()[j] * (u[j] - u[j].max(0.0).powf(p)) / c).collect(),
    });
    SectorOperator { sector, radii, diag, off: -c / (h * h), nonlocal }
}

impl SectorOperator {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Matrix–vector product in the `w` variables, rank-one term included.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = self.apply_local(w);
        if let Some(r1) = &self.nonlocal {
            let dot = r1.weight * dot(&r1.vector, w);
            for (o, s) in out.iter_mut().zip(&r1.vector) {
                *o += dot * s;
            }
        }
        out
    }

    /// Tridiagonal part only.
    pub fn apply_local(&self, w: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(w.len(), n);
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * w[i];
                if i > 0 {
                    v += self.off * w[i - 1];
                }
                if i + 1 < n {
                    v += self.off * w[i + 1];
                }
                v
            })
            .collect()
    }

    /// Applies the sector operator to a radial profile `φ` given on every
    /// node; returns `A_k φ` at the interior nodes.
    pub fn apply_to_profile(&self, phi: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = self.radii.iter().zip(&phi[1..phi.len() - 1]).map(|(r, v)| r * v).collect();
        self.apply(&w).iter().zip(&self.radii).map(|(v, r)| v / r).collect()
    }

    /// The same operator without its rank-one term.
    pub fn local_part(&self) -> SectorOperator {
        SectorOperator { nonlocal: None, ..self.clone() }
    }

    /// Number of eigenvalues strictly below `lambda`.
    pub fn count_below(&self, lambda: f64) -> usize {
        let (neg, g) = self.sturm(lambda);
        match &self.nonlocal {
            Some(r1) if r1.weight != 0.0 => {
                // Inertia of T − λ + ρssᵀ from that of T − λ: the count drops
                // by one exactly when 1 + ρ sᵀ(T − λ)⁻¹s ≤ 0.
                let f = 1.0 + r1.weight * g;
                if f <= 0.0 {
                    neg - 1
                } else {
                    neg
                }
            }
            _ => neg,
        }
    }

    /// Negative pivots of `LDLᵀ = T − λ` and `sᵀ(T − λ)⁻¹s`.
    fn sturm(&self, lambda: f64) -> (usize, f64) {
        let e2 = self.off * self.off;
        let s = self.nonlocal.as_ref().map(|r| r.vector.as_slice());
        let mut neg = 0;
        let mut d_prev = 1.0;
        let mut z_prev = 0.0;
        let mut g = 0.0;
        for i in 0..self.dim() {
            let mut d = self.diag[i] - lambda - if i > 0 { e2 / d_prev } else { 0.0 };
            if d == 0.0 {
                d = f64::EPSILON * (self.diag[i].abs() + self.off.abs());
            }
            if d < 0.0 {
                neg += 1;
            }
            if let Some(s) = s {
                let z = s[i] - if i > 0 { self.off / d_prev * z_prev } else { 0.0 };
                g += z * z / d;
                z_prev = z;
            }
            d_prev = d;
        }
        (neg, g)
    }

    fn bounds(&self) -> (f64, f64) {
        let spread = 2.0 * self.off.abs();
        let lo = self.diag.iter().fold(f64::INFINITY, |m, &d| m.min(d - spread));
        let mut hi = self.diag.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d + spread));
        if let Some(r1) = &self.nonlocal {
            hi += r1.weight.max(0.0) * dot(&r1.vector, &r1.vector);
            let lo_shift = r1.weight.min(0.0) * dot(&r1.vector, &r1.vector);
            return (lo + lo_shift - 1.0, hi + 1.0);
        }
        (lo - 1.0, hi + 1.0)
    }

    /// The `index`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        assert!(index < self.dim());
        let (mut lo, mut hi) = self.bounds();
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector (normalized in the Euclidean `w` inner product) for the
    /// `index`-th eigenvalue by shifted inverse iteration.
    pub fn eigenpair(&self, index: usize) -> (f64, Vec<f64>) {
        let lambda = self.eigenvalue(index);
        let n = self.dim();
        let gap_lo = if index > 0 { lambda - self.eigenvalue(index - 1) } else { f64::INFINITY };
        let gap_hi = if index + 1 < n { self.eigenvalue(index + 1) - lambda } else { f64::INFINITY };
        let gap = gap_lo.min(gap_hi);
        let shift = lambda - (1e-10 * (1.0 + lambda.abs())).min(1e-3 * gap);
        let lu = TridiagLu::factor(&self.diag, self.off, shift);
        let solve = |b: &[f64]| -> Vec<f64> {
            let x = lu.solve(b);
            match &self.nonlocal {
                Some(r1) if r1.weight != 0.0 => {
                    let y = lu.solve(&r1.vector);
                    let coef = r1.weight * dot(&r1.vector, &x) / (1.0 + r1.weight * dot(&r1.vector, &y));
                    x.iter().zip(&y).map(|(a, b)| a - coef * b).collect()
                }
                _ => x,
            }
        };
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i % 7) as f64)).collect();
        normalize(&mut v);
        for _ in 0..6 {
            v = solve(&v);
            normalize(&mut v);
        }
        (lambda, v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// LU with partial pivoting of a tridiagonal matrix with constant
/// off-diagonal, shifted by `−σ`.
struct TridiagLu {
    l: Vec<f64>,
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(diag: &[f64], off: f64, sigma: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|x| x - sigma).collect();
        let mut du = vec![off; n.saturating_sub(1)];
        let dl = vec![off; n.saturating_sub(1)];
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                let f = dl[i] / d[i];
                l[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                let f = d[i] / dl[i];
                l[i] = f;
                swapped[i] = true;
                d[i] = dl[i];
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -f;
                }
            }
        }
        for x in d.iter_mut() {
            if *x == 0.0 {
                *x = f64::EPSILON;
            }
        }
        Self { l, u0: d, u1: du, u2: du2, swapped }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.u0.len();
        let mut x = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
                x[i + 1] -= self.l[i] * x[i];
            } else {
                x[i + 1] -= self.l[i] * x[i];
            }
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= self.u2[i] * x[i + 2];
            }
            x[i] = v / self.u0[i];
        }
        x
    }
}

/// Lowest `n_eigs` eigenvalues in ascending order.
pub fn sector_spectrum(op: &SectorOperator, n_eigs: usize) -> Vec<f64> {
    assert!(n_eigs >= 1, "ask for at least one eigenvalue");
    (0..n_eigs.min(op.dim())).map(|i| op.eigenvalue(i)).collect()
}

/// Smallest `|λ|` of the full radial operator (local part plus rank-one term).
pub fn radial_nondegeneracy(gs: &KirchhoffGroundState) -> f64 {
    smallest_singular_value(&build_sector(gs, 0))
}

pub fn smallest_singular_value(op: &SectorOperator) -> f64 {
    let below = op.count_below(0.0);
    let mut best = f64::INFINITY;
    if below > 0 {
        best = best.min(op.eigenvalue(below - 1).abs());
    }
    if below < op.dim() {
        best = best.min(op.eigenvalue(below).abs());
    }
    best
}

/// `(b/2c) K_U` computed as `∫∇U·∇ψ` with `ψ = −(b/c) r U'`.
pub fn gradient_pairing(gs: &KirchhoffGroundState) -> f64 {
    let b = gs.params.b;
    let c = gs.c;
    let upp = gs.second_derivative();
    let du = gs.du.values();
    let integrand = gs.du.map_with_index(|j, r, d| -(b / c) * d * (du[j] + r * upp.values()[j]));
    integrate_radial(&integrand, Weight::Spherical).expect("integrand decays with U")
}

/// `−c Δφ + φ − p U^{p−1} φ`, the local linearization with the frozen
/// coefficient `c`.
pub fn apply_au(gs: &KirchhoffGroundState, phi: &RadialFunction) -> RadialFunction {
    let lap = radial_laplacian(phi);
    let p = gs.params.p;
    let c = gs.c;
    let u = gs.u.values();
    phi.map_with_index(|j, _, v| -c * lap.values()[j] + v - p * u[j].max(0.0).powf(p - 1.0) * v)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub name: String,
    pub absolute: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuIdentityReport {
    pub step: f64,
    pub identities: Vec<IdentityResidual>,
}

impl AuIdentityReport {
    pub fn max_relative(&self) -> f64 {
        self.identities.iter().map(|i| i.relative).fold(0.0, f64::max)
    }
}

fn l2(f: &RadialFunction) -> f64 {
    integrate_radial(&f.powf(2.0), Weight::Spherical).expect("residuals decay with U").sqrt()
}

/// `‖𝒜φ − target‖` in `L²(ℝ³)`, absolute and relative to `‖target‖`.
pub fn identity_residual(
    gs: &KirchhoffGroundState,
    name: &str,
    phi: &RadialFunction,
    target: &RadialFunction,
) -> IdentityResidual {
    let applied = apply_au(gs, phi).with_tail(None);
    let diff = applied.lin_comb(1.0, &target.clone().with_tail(None), -1.0).expect("same grid");
    let absolute = l2(&diff);
    let reference = l2(&target.clone().with_tail(None));
    IdentityResidual { name: name.to_string(), absolute, relative: absolute / reference }
}

/// Residuals of `𝒜U = −(p−1)U^p`, `𝒜S = −2U` with `S = 2U/(p−1) + rU'`, and
/// `𝒜(−rU'/(2c)) = ΔU`.
pub fn verify_au_identities(gs: &KirchhoffGroundState) -> AuIdentityReport {
    let p = gs.params.p;
    let c = gs.c;
    let u = gs.u.clone().with_tail(None);
    let du = gs.du.values();
    let target1 = u.map(|_, v| -(p - 1.0) * v.max(0.0).powf(p));
    let s = u.map_with_index(|j, r, v| 2.0 * v / (p - 1.0) + r * du[j]);
    let target2 = u.scale(-2.0);
    let psi = u.map_with_index(|j, r, _| -r * du[j] / (2.0 * c));
    let lap_u = u.map(|_, v| (v - v.max(0.0).powf(p)) / c);
    AuIdentityReport {
        step: gs.grid().step() / gs.sqrt_c,
        identities: vec![
            identity_residual(gs, "AU + (p-1)U^p", &u, &target1),
            identity_residual(gs, "AS + 2U", &s, &target2),
            identity_residual(gs, "A(-rU'/2c) - dU", &psi, &lap_u),
        ],
    }
}

/// `|λ| < 50 h² max(p U^{p−1})` with `h` the step of the unscaled profile.
pub fn near_zero_threshold(gs: &KirchhoffGroundState) -> f64 {
    let h = gs.grid().step() / gs.sqrt_c;
    let p = gs.params.p;
    let scale = gs.u.values().iter().fold(0.0f64, |m, &v| m.max(p * v.max(0.0).powf(p - 1.0)));
    50.0 * h * h * scale
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorReport {
    pub k: u32,
    pub lambda_k: f64,
    pub multiplicity: usize,
    pub eigenvalues: Vec<f64>,
    pub near_zero: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub threshold: f64,
    pub sectors: Vec<SectorReport>,
    pub smallest_singular_value: f64,
    /// Near-zero eigenvalues counted with spherical multiplicity.
    pub kernel_dimension: usize,
    /// Cosine between the lowest k = 1 eigenvector and `U'`.
    pub kernel_cosine: f64,
    pub monotone_in_k: bool,
    pub certified: bool,
}

pub fn spectral_report(gs: &KirchhoffGroundState, max_k: u32, n_eigs: usize) -> SpectralReport {
    let threshold = near_zero_threshold(gs);
    let sectors: Vec<SectorReport> = (0..=max_k)
        .map(|k| {
            let op = build_sector(gs, k);
            let eigenvalues = sector_spectrum(&op, n_eigs);
            let near_zero = eigenvalues.iter().filter(|l| l.abs() < threshold).count();
            let index = SectorIndex::new(k);
            SectorReport { k, lambda_k: index.lambda(), multiplicity: index.multiplicity(), eigenvalues, near_zero }
        })
        .collect();
    let kernel_dimension = sectors.iter().map(|s| s.near_zero * s.multiplicity).sum();
    let kernel_cosine = kernel_cosine(gs);
    let smallest_singular_value = radial_nondegeneracy(gs);
    let mins: Vec<f64> = sectors.iter().filter(|s| s.k >= 1).map(|s| s.eigenvalues[0]).collect();
    let monotone_in_k = mins.windows(2).all(|w| w[1] >= w[0]);
    let only_k1 = sectors.iter().all(|s| (s.k == 1) == (s.near_zero > 0));
    let certified = only_k1
        && kernel_dimension == 3
        && kernel_cosine > 0.999
        && smallest_singular_value > threshold
        && monotone_in_k;
    SpectralReport {
        threshold,
        sectors,
        smallest_singular_value,
        kernel_dimension,
        kernel_cosine,
        monotone_in_k,
        certified,
    }
}

/// Cosine between the lowest k = 1 eigenvector and `w = r U'`.
pub fn kernel_cosine(gs: &KirchhoffGroundState) -> f64 {
    let op = build_sector(gs, 1);
    let (_, v) = op.eigenpair(0);
    let n = gs.grid().len();
    let w: Vec<f64> = (1..n - 1).map(|j| gs.grid().nodes()[j] * gs.du.values()[j]).collect();
    dot(&v, &w).abs() / (dot(&v, &v) * dot(&w, &w)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_index_values() {
        assert_eq!(SectorIndex::new(0).lambda(), 0.0);
        assert_eq!(SectorIndex::new(1).lambda(), 2.0);
        assert_eq!(SectorIndex::new(2).lambda(), 6.0);
        assert_eq!(SectorIndex::new(1).multiplicity(), 3);
        for k in 0..6 {
            assert_eq!(SectorIndex::new(k).multiplicity(), 2 * k as usize + 1);
        }
    }

    fn diag_op(diag: Vec<f64>, off: f64, r1: Option<RankOne>) -> SectorOperator {
        let n = diag.len();
        SectorOperator {
            sector: SectorIndex::new(0),
            radii: (1..=n).map(|i| i as f64).collect(),
            diag,
            off,
            nonlocal: r1,
        }
    }

    #[test]
    fn sturm_counts_for_known_matrix() {
        // Tridiagonal [2, −1] has eigenvalues 2 − 2cos(jπ/(n+1)).
        let n = 20;
        let op = diag_op(vec![2.0; n], -1.0, None);
        for j in 1..=n {
            let exact = 2.0 - 2.0 * (j as f64 * PI / (n as f64 + 1.0)).cos();
            assert!((op.eigenvalue(j - 1) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_shift_of_identity() {
        // I + ρ s sᵀ has eigenvalue 1 + ρ|s|² once and 1 otherwise.
        let n = 6;
        let s = vec![1.0, 2.0, 0.0, -1.0, 0.5, 0.0];
        let rho = 0.7;
        let op = diag_op(vec![1.0; n], 0.0, Some(RankOne { weight: rho, vector: s.clone() }));
        let top = 1.0 + rho * dot(&s, &s);
        assert!((op.eigenvalue(n - 1) - top).abs() < 1e-12);
        assert!((op.eigenvalue(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tridiagonal_lu_solves() {
        let diag = vec![0.1, -3.0, 2.0, 0.001, 5.0];
        let lu = TridiagLu::factor(&diag, 1.5, 0.2);
        let b = vec![1.0, -2.0, 3.0, 0.5, 1.0];
        let x = lu.solve(&b);
        let op = diag_op(diag.iter().map(|d| d - 0.2).collect(), 1.5, None);
        let back = op.apply(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    use crate::ground_state::{build_ground_state, build_ground_state_with, KirchhoffParams, ShootingOptions};
    use nalgebra::DMatrix;

    fn coarse(b: f64, p: f64) -> KirchhoffGroundState {
        let opts = ShootingOptions { step: 0.05, ..ShootingOptions::default() };
        build_ground_state_with(KirchhoffParams::new(1.0, b, p).unwrap(), opts).unwrap()
    }

    fn dense(op: &SectorOperator) -> DMatrix<f64> {
        let n = op.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = op.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = op.off;
                m[(i + 1, i)] = op.off;
            }
        }
        if let Some(r1) = &op.nonlocal {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += r1.weight * (r1.vector[i] * r1.vector[j]);
                }
            }
        }
        m
    }

    #[test]
    fn sturm_bisection_matches_dense_eigensolve() {
        for (b, p) in [(0.0, 3.0), (1.0, 2.0), (0.5, 3.0)] {
            let gs = coarse(b, p);
            for k in 0..3 {
                let op = build_sector(&gs, k);
                let mut exact: Vec<f64> = dense(&op).symmetric_eigen().eigenvalues.iter().copied().collect();
                exact.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let ours = sector_spectrum(&op, 4);
                for (x, y) in ours.iter().zip(&exact) {
                    assert!((x - y).abs() < 1e-8 * (1.0 + y.abs()), "b={b} p={p} k={k}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn inverse_iteration_matches_dense_eigenvector() {
        let gs = coarse(1.0, 3.0);
        let op = build_sector(&gs, 0);
        let eig = dense(&op).symmetric_eigen();
        let i0 = (0..op.dim()).min_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap()).unwrap();
        let (_, v) = op.eigenpair(0);
        let e = eig.eigenvectors.column(i0);
        let cos: f64 = v.iter().zip(e.iter()).map(|(a, b)| a * b).sum::<f64>().abs();
        assert!(cos > 1.0 - 1e-10, "{cos}");
    }

    #[test]
    fn sector_matrices_are_symmetric_and_ordered() {
        let gs = coarse(1.0, 3.0);
        let k1 = build_sector(&gs, 1);
        let k2 = build_sector(&gs, 2);
        assert!(k1.nonlocal.is_none() && build_sector(&gs, 0).nonlocal.is_some());
        for ((d1, d2), r) in k1.diag.iter().zip(&k2.diag).zip(&k1.radii) {
            let expected = 4.0 * gs.c / (r * r);
            assert!(((d2 - d1) - expected).abs() <= 1e-12 * expected.max(1.0) + 1e-9 * d2.abs());
        }
        let m = dense(&build_sector(&gs, 0));
        assert_eq!(m.clone(), m.transpose());
    }

    #[test]
    fn classical_case_diagonal_shift_is_four_over_r_squared() {
        let gs = coarse(0.0, 3.0);
        let (k1, k2) = (build_sector(&gs, 1), build_sector(&gs, 2));
        for ((d1, d2), r) in k1.diag.iter().zip(&k2.diag).zip(&k1.radii) {
            assert!(((d2 - d1) - 4.0 / (r * r)).abs() < 1e-9 * d2.abs());
        }
    }

    #[test]
    fn translation_mode_is_the_k1_kernel() {
        let gs = build_ground_state(KirchhoffParams::new(1.0, 0.0, 3.0).unwrap()).unwrap();
        let op = build_sector(&gs, 1);
        assert!(op.eigenvalue(0).abs() < 1e-3);
        assert!(kernel_cosine(&gs) > 0.999);
        assert!(op.eigenvalue(0).abs() < near_zero_threshold(&gs));
        assert!(build_sector(&gs, 2).eigenvalue(0) > 10.0 * op.eigenvalue(0).abs());
        assert!(build_sector(&gs, 3).eigenvalue(0) > build_sector(&gs, 2).eigenvalue(0));
    }

    #[test]
    fn translation_mode_residual_is_second_order() {
        // The max norm is dominated by the node next to the origin, so the
        // convergence check uses the L² norm of A₁U' in the w variables.
        let res = |h: f64| {
            let opts = ShootingOptions { step: h, ..ShootingOptions::default() };
            let gs = build_ground_state_with(KirchhoffParams::new(1.0, 1.0, 2.0).unwrap(), opts).unwrap();
            let op = build_sector(&gs, 1);
            let w: Vec<f64> = op.radii.iter().zip(&gs.du.values()[1..]).map(|(r, d)| r * d).collect();
            let out = op.apply(&w);
            (dot(&out, &out) * gs.grid().step()).sqrt()
        };
        let ratio = res(0.02) / res(0.01);
        assert!(ratio > 3.5, "{ratio}");
    }

    #[test]
    fn local_k0_operator_maps_s_to_minus_two_u() {
        let gs = build_ground_state(KirchhoffParams::new(1.0, 0.0, 3.0).unwrap()).unwrap();
        let report = verify_au_identities(&gs);
        assert!(report.identities[1].relative < 1e-2);
        let fine = build_ground_state_with(
            KirchhoffParams::new(1.0, 0.0, 3.0).unwrap(),
            ShootingOptions { step: 0.005, ..ShootingOptions::default() },
        )
        .unwrap();
        let refined = verify_au_identities(&fine);
        for (a, b) in report.identities.iter().zip(&refined.identities) {
            assert!(a.relative / b.relative > 3.5, "{}: {} -> {}", a.name, a.relative, b.relative);
        }
    }

    #[test]
    fn zero_input_anti_test() {
        let gs = build_ground_state(KirchhoffParams::new(1.0, 0.0, 3.0).unwrap()).unwrap();
        let zero = RadialFunction::zeros(gs.grid().clone());
        let target = gs.u.clone().with_tail(None).map(|_, v| -2.0 * v.powi(3));
        let res = identity_residual(&gs, "zero", &zero, &target);
        assert!((res.relative - 1.0).abs() < 1e-12);
        assert!((res.absolute - l2(&target)).abs() < 1e-12 * res.absolute);
    }

    #[test]
    fn pairing_matches_closed_form() {
        for (b, p) in [(0.0, 3.0), (1.0, 3.0), (0.3, 2.0)] {
            let gs = build_ground_state(KirchhoffParams::new(1.0, b, p).unwrap()).unwrap();
            let value = gradient_pairing(&gs);
            assert!((value - (gs.c - 1.0) / (2.0 * gs.c)).abs() < 1e-5);
            assert!(value < 0.5);
        }
    }

    #[test]
    fn radial_sector_is_nondegenerate_and_stable() {
        for b in [0.0, 1.0] {
            let params = KirchhoffParams::new(1.0, b, 3.0).unwrap();
            let s1 = radial_nondegeneracy(&build_ground_state(params).unwrap());
            let fine = ShootingOptions { step: 0.005, ..ShootingOptions::default() };
            let s2 = radial_nondegeneracy(&build_ground_state_with(params, fine).unwrap());
            assert!(s1 > 0.0 && (s1 - s2).abs() / s2 < 0.2);
        }
    }

    #[test]
    fn odd_mode_is_not_a_radial_kernel() {
        // U' placed in the radial sector is not annihilated: the missing
        // 2c/r² term leaves a residual of order one. Certification must
        // therefore come from the k = 1 sector, not from k = 0.
        let gs = build_ground_state(KirchhoffParams::new(1.0, 0.0, 3.0).unwrap()).unwrap();
        let k0 = build_sector(&gs, 0).local_part();
        let k1 = build_sector(&gs, 1);
        let w: Vec<f64> = k0.radii.iter().zip(&gs.du.values()[1..]).map(|(r, d)| r * d).collect();
        let norm = |v: Vec<f64>| dot(&v, &v).sqrt();
        assert!(norm(k0.apply(&w)) > 100.0 * norm(k1.apply(&w)));
    }
}
