//! Staggered difference operators and their compositions.
//!
//! `A_α : H → H_α` is the forward difference onto the flux midpoints and
//! `A*_α : H_α → H` its adjoint with respect to the weighted inner products.
//! From them come `D_α = A*_α k A_α`, the factorized regularizer `Q` and the
//! perturbed operator `C`; the latter two are applied or inverted through
//! tridiagonal line solves only.

use crate::error::{HhcError, Result};
use crate::grid::{Direction, FluxField, ScalarField, StaggeredGrid};
use crate::linsolve::{solve_flux_lines, solve_lines, FaceLineSystem, NodeLineSystem};
use crate::scalar::Real;

/// Largest system the dense assembly helpers accept.
pub const DENSE_LIMIT: usize = 100;

/// Forward difference `(A_α u)(x) = (u(x + h_α/2) − u(x − h_α/2)) / h_α` on `ω_α`.
pub fn apply_a<T: Real>(grid: &StaggeredGrid<T>, dir: Direction, u: &ScalarField<T>) -> Result<FluxField<T>> {
    grid.check_scalar(u)?;
    let inv_h = grid.h(dir).recip();
    let (fm1, fm2) = grid.flux_shape(dir);
    let mut values = Vec::with_capacity(fm1 * fm2);
    match dir {
        Direction::X1 => {
            for j in 0..fm1 {
                for b in 0..fm2 {
                    let i2 = b + 1;
                    values.push((u.at(j + 1, i2) - u.at(j, i2)) * inv_h);
                }
            }
        }
        Direction::X2 => {
            for a in 0..fm1 {
                let i1 = a + 1;
                for j in 0..fm2 {
                    values.push((u.at(i1, j + 1) - u.at(i1, j)) * inv_h);
                }
            }
        }
    }
    grid.flux_from_values(dir, values)
}

/// Adjoint `(A*_α q)(x) = −(q(x + h_α/2) − q(x − h_α/2)) / h_α` on `ω`.
pub fn apply_a_star<T: Real>(grid: &StaggeredGrid<T>, q: &FluxField<T>) -> Result<ScalarField<T>> {
    let dir = q.direction();
    grid.check_flux(q, dir)?;
    let inv_h = grid.h(dir).recip();
    let (m1, m2) = grid.node_shape();
    let (_, fm2) = grid.flux_shape(dir);
    let qv = q.as_slice();
    let mut values = Vec::with_capacity(m1 * m2);
    for a in 0..m1 {
        for b in 0..m2 {
            let (right, left) = match dir {
                // flux-1 storage: j * (N2-1) + (i2-1); node i1 = a+1 has faces j = a, a+1.
                Direction::X1 => (qv[(a + 1) * fm2 + b], qv[a * fm2 + b]),
                // flux-2 storage: (i1-1) * N2 + j; node i2 = b+1 has faces j = b, b+1.
                Direction::X2 => (qv[a * fm2 + b + 1], qv[a * fm2 + b]),
            };
            values.push(-(right - left) * inv_h);
        }
    }
    grid.scalar_from_values(values)
}

/// `A*_α A_α u`, the one-dimensional operator with unit conductivity.
pub fn apply_a_star_a<T: Real>(grid: &StaggeredGrid<T>, dir: Direction, u: &ScalarField<T>) -> Result<ScalarField<T>> {
    apply_a_star(grid, &apply_a(grid, dir, u)?)
}

/// `Σ_α A*_α A_α u`.
pub fn apply_unit_laplacian<T: Real>(grid: &StaggeredGrid<T>, u: &ScalarField<T>) -> Result<ScalarField<T>> {
    Ok(apply_a_star_a(grid, Direction::X1, u)?.add(&apply_a_star_a(grid, Direction::X2, u)?))
}

/// Heat capacity, face conductivities and relaxation time on a given grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<T> {
    c: ScalarField<T>,
    k1: FluxField<T>,
    k2: FluxField<T>,
    nu: T,
    c0: T,
    k0: T,
    k1_max: T,
    parabolic_limit: bool,
    sqrt_c: ScalarField<T>,
    inv_sqrt_c: ScalarField<T>,
    inv_c: ScalarField<T>,
    inv_k1: FluxField<T>,
    inv_k2: FluxField<T>,
}

impl<T: Real> Coefficients<T> {
    /// Builds coefficients with bounds taken as the extreme sampled values.
    pub fn new(grid: &StaggeredGrid<T>, c: ScalarField<T>, k1: FluxField<T>, k2: FluxField<T>, nu: T) -> Result<Self> {
        let c0 = c.as_slice().iter().fold(T::infinity(), |m, v| m.min(*v));
        let kmin = |k: &FluxField<T>| k.as_slice().iter().fold(T::infinity(), |m, v| m.min(*v));
        let kmax = |k: &FluxField<T>| k.as_slice().iter().fold(T::neg_infinity(), |m, v| m.max(*v));
        let k0 = kmin(&k1).min(kmin(&k2));
        let k1_max = kmax(&k1).max(kmax(&k2));
        Self::with_bounds(grid, c, k1, k2, nu, c0, k0, k1_max)
    }

    /// Builds coefficients with explicit bounds `c ≥ c0`, `k0 ≤ k ≤ k1_max`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_bounds(
        grid: &StaggeredGrid<T>,
        c: ScalarField<T>,
        k1: FluxField<T>,
        k2: FluxField<T>,
        nu: T,
        c0: T,
        k0: T,
        k1_max: T,
    ) -> Result<Self> {
        grid.check_scalar(&c)?;
        grid.check_flux(&k1, Direction::X1)?;
        grid.check_flux(&k2, Direction::X2)?;
        if !(c0 > T::zero()) || c.as_slice().iter().any(|v| !(*v >= c0)) {
            return Err(HhcError::InvalidCoefficients(format!("heat capacity must satisfy c >= c0 > 0 (c0 = {c0})")));
        }
        let in_bounds = |k: &FluxField<T>| k.as_slice().iter().all(|v| *v >= k0 && *v <= k1_max);
        if !(k0 > T::zero()) || !(k1_max >= k0) || !in_bounds(&k1) || !in_bounds(&k2) {
            return Err(HhcError::InvalidCoefficients(format!(
                "conductivity must satisfy 0 < k0 <= k <= k1 (k0 = {k0}, k1 = {k1_max})"
            )));
        }
        if !(nu > T::zero()) || !nu.is_finite() {
            return Err(HhcError::InvalidCoefficients(format!(
                "relaxation time must be positive, got {nu} (use the parabolic-limit constructor for nu = 0)"
            )));
        }
        Ok(Self::assemble(c, k1, k2, nu, c0, k0, k1_max, false))
    }

    /// Coefficients with `ν = 0`. Only schemes without `ν c0 σ` stability conditions accept them.
    pub fn parabolic_limit(
        grid: &StaggeredGrid<T>,
        c: ScalarField<T>,
        k1: FluxField<T>,
        k2: FluxField<T>,
    ) -> Result<Self> {
        let mut coeff = Self::new(grid, c.clone(), k1.clone(), k2.clone(), T::one())?;
        coeff.nu = T::zero();
        coeff.parabolic_limit = true;
        Ok(coeff)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        c: ScalarField<T>,
        k1: FluxField<T>,
        k2: FluxField<T>,
        nu: T,
        c0: T,
        k0: T,
        k1_max: T,
        parabolic_limit: bool,
    ) -> Self {
        Self {
            sqrt_c: c.map(|v| v.sqrt()),
            inv_sqrt_c: c.map(|v| v.sqrt().recip()),
            inv_c: c.map(|v| v.recip()),
            inv_k1: k1.map(|v| v.recip()),
            inv_k2: k2.map(|v| v.recip()),
            c,
            k1,
            k2,
            nu,
            c0,
            k0,
            k1_max,
            parabolic_limit,
        }
    }

    /// Samples `c(x)` at the nodes and `k(x)` at the face midpoints.
    pub fn from_fns(grid: &StaggeredGrid<T>, c: impl Fn(T, T) -> T, k: impl Fn(T, T) -> T, nu: T) -> Result<Self> {
        let cf = grid.sample_scalar(&c)?;
        let k1 = grid.sample_flux(Direction::X1, &k)?;
        let k2 = grid.sample_flux(Direction::X2, &k)?;
        Self::new(grid, cf, k1, k2, nu)
    }

    pub fn constant(grid: &StaggeredGrid<T>, c: T, k: T, nu: T) -> Result<Self> {
        Self::new(
            grid,
            grid.constant_scalar(c),
            grid.constant_flux(Direction::X1, k),
            grid.constant_flux(Direction::X2, k),
            nu,
        )
    }

    pub fn c(&self) -> &ScalarField<T> {
        &self.c
    }

    pub fn k(&self, dir: Direction) -> &FluxField<T> {
        match dir {
            Direction::X1 => &self.k1,
            Direction::X2 => &self.k2,
        }
    }

    pub fn inv_k(&self, dir: Direction) -> &FluxField<T> {
        match dir {
            Direction::X1 => &self.inv_k1,
            Direction::X2 => &self.inv_k2,
        }
    }

    pub fn sqrt_c(&self) -> &ScalarField<T> {
        &self.sqrt_c
    }

    pub fn inv_sqrt_c(&self) -> &ScalarField<T> {
        &self.inv_sqrt_c
    }

    pub fn inv_c(&self) -> &ScalarField<T> {
        &self.inv_c
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn c0(&self) -> T {
        self.c0
    }

    pub fn k0(&self) -> T {
        self.k0
    }

    pub fn k1_max(&self) -> T {
        self.k1_max
    }

    pub fn is_parabolic_limit(&self) -> bool {
        self.parabolic_limit
    }

    /// Copy with a different relaxation time.
    pub fn with_nu(&self, nu: T) -> Result<Self> {
        if !(nu > T::zero()) {
            return Err(HhcError::InvalidCoefficients(format!("relaxation time must be positive, got {nu}")));
        }
        let mut out = self.clone();
        out.nu = nu;
        out.parabolic_limit = false;
        Ok(out)
    }
}

/// `D_α u = A*_α (k ⊙ A_α u)`.
pub fn apply_d_alpha<T: Real>(
    grid: &StaggeredGrid<T>,
    dir: Direction,
    u: &ScalarField<T>,
    coeff: &Coefficients<T>,
) -> Result<ScalarField<T>> {
    let flux = apply_a(grid, dir, u)?.mul(coeff.k(dir));
    apply_a_star(grid, &flux)
}

/// `D u = D_1 u + D_2 u`.
pub fn apply_d<T: Real>(
    grid: &StaggeredGrid<T>,
    u: &ScalarField<T>,
    coeff: &Coefficients<T>,
) -> Result<ScalarField<T>> {
    Ok(apply_d_alpha(grid, Direction::X1, u, coeff)?.add(&apply_d_alpha(grid, Direction::X2, u, coeff)?))
}

/// Extreme eigenvalues `δ_α`, `Δ_α` of `A*_α A_α` on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds<T> {
    pub delta: [T; 2],
    pub cap_delta: [T; 2],
}

impl<T: Real> SpectralBounds<T> {
    pub fn lower(&self, dir: Direction) -> T {
        self.delta[dir.index() - 1]
    }

    pub fn upper(&self, dir: Direction) -> T {
        self.cap_delta[dir.index() - 1]
    }

    /// `Δ_1 + Δ_2`.
    pub fn upper_sum(&self) -> T {
        self.cap_delta[0] + self.cap_delta[1]
    }
}

/// `δ_α = (4/h²) sin²(πh/2l)`, `Δ_α = (4/h²) cos²(πh/2l)`.
pub fn spectral_bounds<T: Real>(grid: &StaggeredGrid<T>) -> SpectralBounds<T> {
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    let one_dir = |dir: Direction| {
        let h = grid.h(dir);
        let arg = T::PI() * h / (two * grid.l(dir));
        let s = four / (h * h);
        (s * arg.sin().powi(2), s * arg.cos().powi(2))
    };
    let (d1, u1) = one_dir(Direction::X1);
    let (d2, u2) = one_dir(Direction::X2);
    SpectralBounds { delta: [d1, d2], cap_delta: [u1, u2] }
}

/// Applies `Q = (E + σ/2 τ² A*_2A_2)(E + σ τ² A*_1A_1)(E + σ/2 τ² A*_2A_2)`.
pub fn apply_q<T: Real>(grid: &StaggeredGrid<T>, u: &ScalarField<T>, sigma: T, tau: T) -> Result<ScalarField<T>> {
    check_sigma_tau(sigma, tau)?;
    let s = sigma * tau * tau;
    let half = s * T::lit(0.5);
    let factor = |dir: Direction, b: T, y: &ScalarField<T>| -> Result<ScalarField<T>> {
        Ok(y.lin_comb(T::one(), &apply_a_star_a(grid, dir, y)?, b))
    };
    let y = factor(Direction::X2, half, u)?;
    let y = factor(Direction::X1, s, &y)?;
    factor(Direction::X2, half, &y)
}

/// Inverts [`apply_q`] by three sweeps of line solves.
pub fn solve_q<T: Real>(grid: &StaggeredGrid<T>, rhs: &ScalarField<T>, sigma: T, tau: T) -> Result<ScalarField<T>> {
    check_sigma_tau(sigma, tau)?;
    let s = sigma * tau * tau;
    let half = s * T::lit(0.5);
    let y = solve_lines(grid, &NodeLineSystem::new(Direction::X2, T::one(), half), rhs)?;
    let y = solve_lines(grid, &NodeLineSystem::new(Direction::X1, T::one(), s), &y)?;
    solve_lines(grid, &NodeLineSystem::new(Direction::X2, T::one(), half), &y)
}

/// `C_α u = A*_α (k⁻¹E + στ² A_α A*_α)⁻¹ A_α u`.
pub fn apply_c_alpha<T: Real>(
    grid: &StaggeredGrid<T>,
    dir: Direction,
    u: &ScalarField<T>,
    coeff: &Coefficients<T>,
    sigma: T,
    tau: T,
) -> Result<ScalarField<T>> {
    apply_a_star(grid, &perturbed_flux(grid, dir, u, coeff, sigma, tau)?)
}

/// `(k⁻¹E + στ² A_α A*_α)⁻¹ A_α u`, the flux that `C_α` takes the divergence of.
pub fn perturbed_flux<T: Real>(
    grid: &StaggeredGrid<T>,
    dir: Direction,
    u: &ScalarField<T>,
    coeff: &Coefficients<T>,
    sigma: T,
    tau: T,
) -> Result<FluxField<T>> {
    check_sigma_tau(sigma, tau)?;
    let au = apply_a(grid, dir, u)?;
    let sys = FaceLineSystem::new(dir, T::one(), sigma * tau * tau).with_mass(coeff.inv_k(dir));
    solve_flux_lines(grid, &sys, &au)
}

/// `C u = C_1 u + C_2 u`.
pub fn apply_c<T: Real>(
    grid: &StaggeredGrid<T>,
    u: &ScalarField<T>,
    coeff: &Coefficients<T>,
    sigma: T,
    tau: T,
) -> Result<ScalarField<T>> {
    Ok(apply_c_alpha(grid, Direction::X1, u, coeff, sigma, tau)?.add(&apply_c_alpha(
        grid,
        Direction::X2,
        u,
        coeff,
        sigma,
        tau,
    )?))
}

fn check_sigma_tau<T: Real>(sigma: T, tau: T) -> Result<()> {
    if !(sigma >= T::zero()) || !(tau > T::zero()) {
        return Err(HhcError::InvalidParameter(format!(
            "need sigma >= 0 and tau > 0 (got sigma = {sigma}, tau = {tau})"
        )));
    }
    Ok(())
}

/// Row-major dense matrix produced by probing an operator with unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols.min(self.rows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Assembles a linear `H → H` operator column by column.
pub fn assemble_dense<T, F>(grid: &StaggeredGrid<T>, mut op: F) -> Result<DenseMatrix<T>>
where
    T: Real,
    F: FnMut(&ScalarField<T>) -> Result<ScalarField<T>>,
{
    let n = grid.node_count();
    if n > DENSE_LIMIT {
        return Err(HhcError::TooLarge { limit: DENSE_LIMIT, requested: n });
    }
    let mut data = vec![T::zero(); n * n];
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        let col = op(&grid.scalar_from_values(e)?)?;
        for (i, v) in col.as_slice().iter().enumerate() {
            data[i * n + j] = *v;
        }
    }
    Ok(DenseMatrix { rows: n, cols: n, data })
}

/// Assembles a linear `H_α → H_α` operator column by column.
pub fn assemble_dense_flux<T, F>(grid: &StaggeredGrid<T>, dir: Direction, mut op: F) -> Result<DenseMatrix<T>>
where
    T: Real,
    F: FnMut(&FluxField<T>) -> Result<FluxField<T>>,
{
    let n = grid.flux_count(dir);
    if n > DENSE_LIMIT {
        return Err(HhcError::TooLarge { limit: DENSE_LIMIT, requested: n });
    }
    let mut data = vec![T::zero(); n * n];
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        let col = op(&grid.flux_from_values(dir, e)?)?;
        for (i, v) in col.as_slice().iter().enumerate() {
            data[i * n + j] = *v;
        }
    }
    Ok(DenseMatrix { rows: n, cols: n, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(l1: f64, l2: f64, n1: usize, n2: usize) -> StaggeredGrid<f64> {
        StaggeredGrid::new(GridSpec::new(l1, l2, n1, n2)).unwrap()
    }

    fn random_scalar(g: &StaggeredGrid<f64>, rng: &mut ChaCha8Rng) -> ScalarField<f64> {
        g.scalar_from_values((0..g.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn to_nalgebra(m: &DenseMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(m.rows, m.cols, &m.data)
    }

    fn eig_range(m: &DenseMatrix<f64>) -> (f64, f64) {
        let sym = to_nalgebra(m);
        let sym = (&sym + sym.transpose()) * 0.5;
        let e = SymmetricEigen::new(sym).eigenvalues;
        (e.min(), e.max())
    }

    #[test]
    fn zero_in_zero_out() {
        let g = grid(1.0, 1.0, 4, 4);
        let coeff = Coefficients::constant(&g, 1.0, 1.0, 1.0).unwrap();
        let z = g.zero_scalar();
        for dir in Direction::ALL {
            assert_eq!(apply_a(&g, dir, &z).unwrap(), g.zero_flux(dir));
            assert_eq!(apply_a_star(&g, &g.zero_flux(dir)).unwrap(), z);
        }
        assert_eq!(apply_d(&g, &z, &coeff).unwrap(), z);
        assert_eq!(apply_c(&g, &z, &coeff, 0.5, 0.1).unwrap(), z);
    }

    #[test]
    fn forward_difference_matches_hand_values() {
        let g = grid(1.0, 1.0, 4, 4);
        let u = g.sample_scalar(|x1, _| x1 * (1.0 - x1)).unwrap();
        let q = apply_a(&g, Direction::X1, &u).unwrap();
        // Nodal values along x1: 0, 3/16, 1/4, 3/16, 0 with h = 1/4.
        let nodal = [0.0, 0.1875, 0.25, 0.1875, 0.0];
        for (idx, j, _) in g.flux_indices(Direction::X1) {
            let expected = (nodal[j + 1] - nodal[j]) / 0.25;
            assert!((q.as_slice()[idx] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn adjoint_of_constant_flux_vanishes() {
        let g = grid(1.0, 2.0, 5, 3);
        for dir in Direction::ALL {
            let q = g.constant_flux(dir, 3.5);
            assert!(apply_a_star(&g, &q).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn direction_mismatch_is_rejected() {
        let g = grid(1.0, 1.0, 4, 5);
        let coeff = Coefficients::constant(&g, 1.0, 1.0, 1.0).unwrap();
        let other = grid(1.0, 1.0, 5, 5);
        assert!(apply_d(&g, &other.zero_scalar(), &coeff).is_err());
        assert!(apply_a(&g, Direction::X1, &other.zero_scalar()).is_err());
    }

    #[test]
    fn summation_by_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (n1, n2) in [(3, 3), (4, 5), (8, 8)] {
            let g = grid(1.0, 0.8, n1, n2);
            for dir in Direction::ALL {
                for _ in 0..20 {
                    let y = random_scalar(&g, &mut rng);
                    let w = g
                        .flux_from_values(dir, (0..g.flux_count(dir)).map(|_| rng.random_range(-1.0..1.0)).collect())
                        .unwrap();
                    let lhs = g.inner_h_alpha(&apply_a(&g, dir, &y).unwrap(), &w).unwrap();
                    let rhs = g.inner_h(&y, &apply_a_star(&g, &w).unwrap()).unwrap();
                    let scale = g.norm_h(&y).unwrap() * g.norm_h_alpha(&w).unwrap();
                    assert!((lhs - rhs).abs() <= 1e-13 * scale);
                }
            }
        }
    }

    #[test]
    fn d_on_discrete_eigenfunction() {
        let g = grid(1.0, 1.0, 4, 4);
        let coeff = Coefficients::constant(&g, 1.0, 1.0, 1.0).unwrap();
        let u = g.sample_scalar(|x1, x2| (PI * x1).sin() * (PI * x2).sin()).unwrap();
        let du = apply_d(&g, &u, &coeff).unwrap();
        // δ_α = 64 sin²(π/8) = 9.37258..., λ = 2δ.
        let lambda = 2.0 * 64.0 * (PI / 8.0).sin().powi(2);
        assert!((lambda - 18.7452).abs() < 5e-5);
        assert!(du.sub(&u.scaled(lambda)).max_abs() < 1e-12);
    }

    #[test]
    fn d_equals_its_composition_and_hand_stencil() {
        let g = grid(1.0, 1.5, 5, 4);
        let coeff = Coefficients::from_fns(&g, |_, _| 1.0, |x1, x2| 1.0 + 0.5 * x1 + 0.2 * x2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_scalar(&g, &mut rng);
        let d1 = apply_d_alpha(&g, Direction::X1, &u, &coeff).unwrap();
        let h1 = g.h(Direction::X1);
        let k = |x1: f64, x2: f64| 1.0 + 0.5 * x1 + 0.2 * x2;
        for (idx, i1, i2) in g.node_indices() {
            let (x1, x2) = g.node_coords(i1, i2);
            let expected = -(k(x1 + 0.5 * h1, x2) * (u.at(i1 + 1, i2) - u.at(i1, i2)) / h1
                - k(x1 - 0.5 * h1, x2) * (u.at(i1, i2) - u.at(i1 - 1, i2)) / h1)
                / h1;
            assert!((d1.as_slice()[idx] - expected).abs() < 1e-12 * (1.0 + expected.abs()));
        }
        let via_sum = d1.add(&apply_d_alpha(&g, Direction::X2, &u, &coeff).unwrap());
        assert_eq!(via_sum, apply_d(&g, &u, &coeff).unwrap());
    }

    #[test]
    fn spectral_bound_values() {
        let g = grid(1.0, 1.0, 4, 4);
        let b = spectral_bounds(&g);
        assert!((b.delta[0] - 9.3726).abs() < 5e-5);
        assert!((b.cap_delta[0] - 54.6274).abs() < 5e-5);
        for dir in Direction::ALL {
            let h = g.h(dir);
            assert!((b.lower(dir) + b.upper(dir) - 4.0 / (h * h)).abs() < 1e-12);
        }
    }

    #[test]
    fn d_alpha_is_symmetric_with_bounded_spectrum() {
        let g = grid(1.0, 1.2, 6, 5);
        let coeff = Coefficients::from_fns(&g, |_, _| 1.0, |x1, x2| 1.0 + 0.5 * x1 * x2, 1.0).unwrap();
        let b = spectral_bounds(&g);
        for dir in Direction::ALL {
            let d = assemble_dense(&g, |y| apply_d_alpha(&g, dir, y, &coeff)).unwrap();
            assert!(d.asymmetry() < 1e-12);
            let (lo, hi) = eig_range(&d);
            assert!(lo >= coeff.k0() * b.lower(dir) - 1e-12);
            assert!(hi <= coeff.k1_max() * b.upper(dir) + 1e-12);
        }
    }

    #[test]
    fn rayleigh_quotient_of_d1_within_bounds() {
        let g = grid(1.0, 1.0, 4, 4);
        let coeff = Coefficients::constant(&g, 1.0, 1.0, 1.0).unwrap();
        let b = spectral_bounds(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let u = random_scalar(&g, &mut rng);
            let du = apply_d_alpha(&g, Direction::X1, &u, &coeff).unwrap();
            let rq = g.inner_h(&du, &u).unwrap() / g.inner_h(&u, &u).unwrap();
            assert!(rq >= b.delta[0] - 1e-12 && rq <= b.cap_delta[0] + 1e-12);
        }
    }

    #[test]
    fn d_approximates_the_differential_operator_to_second_order() {
        // D u ≈ -∂/∂x1 (k ∂u/∂x1) - ∂/∂x2 (k ∂u/∂x2) for u = sin(πx1)sin(πx2), k = 1 + x1/2.
        let exact = |x1: f64, x2: f64| {
            let k = 1.0 + 0.5 * x1;
            2.0 * PI * PI * k * (PI * x1).sin() * (PI * x2).sin() - 0.5 * PI * (PI * x1).cos() * (PI * x2).sin()
        };
        let mut errors = Vec::new();
        for n in [8, 16, 32, 64] {
            let g = grid(1.0, 1.0, n, n);
            let coeff = Coefficients::from_fns(&g, |_, _| 1.0, |x1, _| 1.0 + 0.5 * x1, 1.0).unwrap();
            let u = g.sample_scalar(|x1, x2| (PI * x1).sin() * (PI * x2).sin()).unwrap();
            let du = apply_d(&g, &u, &coeff).unwrap();
            let reference = g.sample_scalar(exact).unwrap();
            errors.push(du.sub(&reference).max_abs());
        }
        for w in errors.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{errors:?}");
        }
    }

    #[test]
    fn q_identity_and_round_trip() {
        let g = grid(1.0, 1.0, 6, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let u = random_scalar(&g, &mut rng);
        assert_eq!(apply_q(&g, &u, 0.0, 0.1).unwrap(), u);
        assert_eq!(solve_q(&g, &u, 0.0, 0.1).unwrap(), u);
        let qu = apply_q(&g, &u, 0.8, 0.3).unwrap();
        let back = solve_q(&g, &qu, 0.8, 0.3).unwrap();
        assert!(back.sub(&u).max_abs() <= 1e-12 * u.max_abs());
    }

    #[test]
    fn q_is_symmetric_and_dominates_regularized_identity() {
        let g = grid(1.0, 1.0, 4, 4);
        let (sigma, tau) = (0.7, 0.2);
        let q = assemble_dense(&g, |y| apply_q(&g, y, sigma, tau)).unwrap();
        assert!(q.asymmetry() < 1e-10);
        let s = sigma * tau * tau;
        let reg = assemble_dense(&g, |y| Ok(y.lin_comb(1.0, &apply_unit_laplacian(&g, y)?, s))).unwrap();
        let diff = DenseMatrix {
            rows: q.rows,
            cols: q.cols,
            data: q.data.iter().zip(&reg.data).map(|(a, b)| a - b).collect(),
        };
        let (lo, _) = eig_range(&diff);
        assert!(lo >= -1e-12, "{lo}");
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let u = random_scalar(&g, &mut rng);
        let v = random_scalar(&g, &mut rng);
        let a = g.inner_h(&apply_q(&g, &u, sigma, tau).unwrap(), &v).unwrap();
        let b = g.inner_h(&u, &apply_q(&g, &v, sigma, tau).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn c_tends_to_d_as_regularization_vanishes() {
        let g = grid(1.0, 1.0, 4, 4);
        let coeff = Coefficients::from_fns(&g, |_, _| 1.0, |x1, _| 1.0 + 0.5 * x1, 1.0).unwrap();
        let c = assemble_dense(&g, |y| apply_c(&g, y, &coeff, 1.0, 1e-5)).unwrap();
        let d = assemble_dense(&g, |y| apply_d(&g, y, &coeff)).unwrap();
        let norm_d = d.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = c.data.iter().zip(&d.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-6 * norm_d, "{diff}");
    }

    #[test]
    fn c_alpha_is_bounded_by_inverse_regularization() {
        let g = grid(1.0, 1.0, 4, 4);
        let coeff = Coefficients::constant(&g, 1.0, 1.0, 1.0).unwrap();
        for (sigma, tau) in [(0.5, 0.1), (1.0, 0.5), (2.0, 0.05)] {
            for dir in Direction::ALL {
                let c = assemble_dense(&g, |y| apply_c_alpha(&g, dir, y, &coeff, sigma, tau)).unwrap();
                assert!(c.asymmetry() < 1e-10);
                let (lo, hi) = eig_range(&c);
                assert!(lo > -1e-12);
                assert!(hi < 1.0 / (sigma * tau * tau), "{hi}");
            }
        }
    }

    #[test]
    fn dense_assembly_is_limited() {
        let g = grid(1.0, 1.0, 12, 12);
        assert!(matches!(assemble_dense(&g, |y| Ok(y.clone())), Err(HhcError::TooLarge { .. })));
    }

    #[test]
    fn coefficient_bounds_are_validated() {
        let g = grid(1.0, 1.0, 4, 4);
        assert!(Coefficients::constant(&g, 0.0, 1.0, 1.0).is_err());
        assert!(Coefficients::constant(&g, 1.0, -1.0, 1.0).is_err());
        assert!(Coefficients::constant(&g, 1.0, 1.0, 0.0).is_err());
        let c = g.constant_scalar(2.0);
        let k1 = g.constant_flux(Direction::X1, 1.0);
        let k2 = g.constant_flux(Direction::X2, 1.0);
        assert!(Coefficients::with_bounds(&g, c.clone(), k1.clone(), k2.clone(), 1.0, 3.0, 1.0, 1.0).is_err());
        let p = Coefficients::parabolic_limit(&g, c, k1, k2).unwrap();
        assert!(p.is_parabolic_limit());
        assert_eq!(p.nu(), 0.0);
    }
}
