//! Time-stepping schemes.
//!
//! Three families share one interface ([`Integrator`]):
//!
//! * three-level schemes for the damped wave form
//!   `ν c u_tt + c u_t + D u = f + ν f_t`, all written as
//!   `K (ν Δ²u/τ² + Δ⁰u/(2τ)) + L (σ u⁺ + (1−2σ) u + σ u⁻) = φ`
//!   with `K` one of `c`, `c½ Q c½`, `c½ (E + στ²Λ) c½` and `L` one of `D`, `C`;
//! * staggered-in-time temperature/flux schemes, whose temperature sequence
//!   satisfies one of the three-level schemes above;
//! * schemes for the vector `(q1, q2, u)`: the weighted scheme solved through
//!   a reduced temperature problem, and the component-wise splitting.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{HhcError, Result};
use crate::grid::{Direction, FluxField, ScalarField, StaggeredGrid};
use crate::linsolve::{solve_lines, solve_spd, NodeLineSystem, SpdSettings};
use crate::operators::{
    apply_a, apply_a_star, apply_c, apply_d, apply_q, apply_unit_laplacian, perturbed_flux, solve_q, spectral_bounds,
    Coefficients,
};
use crate::scalar::Real;

/// Every scheme the crate implements, with its stable identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Three-level scheme with weights on the full operator `D`.
    ThreeLevelWeighted,
    /// Explicit three-level scheme, conditionally stable.
    ThreeLevelExplicit,
    /// Explicit scheme regularized by the factorized operator `Q` (line solves).
    LodQ,
    /// Explicit scheme with `D` replaced by the line-solved operator `C`.
    LodC,
    /// Three-level form of the regularized staggered scheme.
    ThreeLevelRegularized,
    /// Weighted scheme for the temperature/flux system.
    SystemWeighted,
    StaggeredExplicit,
    StaggeredWeightedFlux,
    StaggeredRegularized,
    StaggeredAdditiveQ,
    StaggeredFluxPerturbed,
    SplitComponentwiseP2,
    SplitComponentwiseP3,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 13] = [
        SchemeKind::ThreeLevelWeighted,
        SchemeKind::ThreeLevelExplicit,
        SchemeKind::LodQ,
        SchemeKind::LodC,
        SchemeKind::ThreeLevelRegularized,
        SchemeKind::SystemWeighted,
        SchemeKind::StaggeredExplicit,
        SchemeKind::StaggeredWeightedFlux,
        SchemeKind::StaggeredRegularized,
        SchemeKind::StaggeredAdditiveQ,
        SchemeKind::StaggeredFluxPerturbed,
        SchemeKind::SplitComponentwiseP2,
        SchemeKind::SplitComponentwiseP3,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SchemeKind::ThreeLevelWeighted => "threelevel-weighted",
            SchemeKind::ThreeLevelExplicit => "threelevel-explicit",
            SchemeKind::LodQ => "lod-q",
            SchemeKind::LodC => "lod-c",
            SchemeKind::ThreeLevelRegularized => "threelevel-regularized",
            SchemeKind::SystemWeighted => "system-weighted",
            SchemeKind::StaggeredExplicit => "staggered-explicit",
            SchemeKind::StaggeredWeightedFlux => "staggered-weightedflux",
            SchemeKind::StaggeredRegularized => "staggered-regularized",
            SchemeKind::StaggeredAdditiveQ => "staggered-additive-q",
            SchemeKind::StaggeredFluxPerturbed => "staggered-flux-perturbed",
            SchemeKind::SplitComponentwiseP2 => "split-componentwise-p2",
            SchemeKind::SplitComponentwiseP3 => "split-componentwise-p3",
        }
    }

    pub fn family(self) -> SchemeFamily {
        match self {
            SchemeKind::ThreeLevelWeighted
            | SchemeKind::ThreeLevelExplicit
            | SchemeKind::LodQ
            | SchemeKind::LodC
            | SchemeKind::ThreeLevelRegularized => SchemeFamily::ThreeLevel,
            SchemeKind::SystemWeighted => SchemeFamily::System,
            SchemeKind::StaggeredExplicit
            | SchemeKind::StaggeredWeightedFlux
            | SchemeKind::StaggeredRegularized
            | SchemeKind::StaggeredAdditiveQ
            | SchemeKind::StaggeredFluxPerturbed => SchemeFamily::Staggered,
            SchemeKind::SplitComponentwiseP2 | SchemeKind::SplitComponentwiseP3 => SchemeFamily::Componentwise,
        }
    }

    /// Number of operators in the splitting of the vector operator, for the component-wise kinds.
    pub fn decomposition(self) -> Option<usize> {
        match self {
            SchemeKind::SplitComponentwiseP2 => Some(2),
            SchemeKind::SplitComponentwiseP3 => Some(3),
            _ => None,
        }
    }

    /// Kinds whose stability conditions involve `ν c0 σ` or whose update divides by `ν`.
    pub fn requires_relaxation(self) -> bool {
        !matches!(self, SchemeKind::ThreeLevelWeighted | SchemeKind::SystemWeighted | SchemeKind::StaggeredWeightedFlux)
    }

    /// Explicit kinds bounded by the CFL step.
    pub fn is_explicit(self) -> bool {
        matches!(self, SchemeKind::ThreeLevelExplicit | SchemeKind::StaggeredExplicit)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SchemeKind {
    type Err = HhcError;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL.iter().copied().find(|k| k.id() == s).ok_or_else(|| HhcError::Unknown(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeFamily {
    ThreeLevel,
    System,
    Staggered,
    Componentwise,
}

/// Accuracy of the starting values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartOrder {
    First,
    #[default]
    Second,
}

/// Operator inside the reduced temperature problem of the weighted system scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReducedOperator {
    /// `σ²τ² Σ A*_α k A_α`: the exact elimination of the flux unknowns.
    #[default]
    Conductivity,
    /// `σ²τ² Σ A*_α A_α`: unit conductivity inside the sum.
    Unit,
}

/// Operator `Λ` in the regularizer `E + στ²Λ` of the regularized staggered scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularizer {
    /// `Λ = Σ A*_α A_α`.
    #[default]
    Unit,
    /// `Λ = D`.
    Conductivity,
}

/// How the source of the component-wise splitting is distributed over its substeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceSplit {
    /// `f / (2p)` in every substep; keeps the composition second order.
    #[default]
    Even,
    /// All of `f` in the first substep.
    First,
}

/// Parameters of one scheme run.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig<T> {
    pub kind: SchemeKind,
    pub sigma: T,
    pub tau: T,
    pub start: StartOrder,
    pub reduced_operator: ReducedOperator,
    pub regularizer: Regularizer,
    pub source_split: SourceSplit,
    pub solver: SpdSettings<T>,
    pub override_stability: bool,
}

impl<T: Real> SchemeConfig<T> {
    pub fn new(kind: SchemeKind, sigma: T, tau: T) -> Self {
        Self {
            kind,
            sigma,
            tau,
            start: StartOrder::default(),
            reduced_operator: ReducedOperator::default(),
            regularizer: Regularizer::default(),
            source_split: SourceSplit::default(),
            solver: SpdSettings::default(),
            override_stability: false,
        }
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.solver.tol = tol;
        self
    }

    pub fn with_start(mut self, start: StartOrder) -> Self {
        self.start = start;
        self
    }

    pub fn with_override(mut self, on: bool) -> Self {
        self.override_stability = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma >= T::zero()) || !self.sigma.is_finite() {
            return Err(HhcError::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(HhcError::InvalidParameter(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

type Field3<T> = Arc<dyn Fn(T, T, T) -> T + Send + Sync>;

#[derive(Clone)]
enum SourceRepr<T> {
    Zero,
    Analytic { f: Field3<T>, df_dt: Field3<T> },
    Affine { base: ScalarField<T>, rate: ScalarField<T> },
}

/// Volumetric heat source `f(x, t)` together with `∂f/∂t`.
#[derive(Clone)]
pub struct Source<T> {
    repr: SourceRepr<T>,
}

impl<T: Real> Source<T> {
    pub fn zero() -> Self {
        Self { repr: SourceRepr::Zero }
    }

    /// Continuous source given by `f(x1, x2, t)` and its time derivative.
    pub fn analytic(
        f: impl Fn(T, T, T) -> T + Send + Sync + 'static,
        df_dt: impl Fn(T, T, T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self { repr: SourceRepr::Analytic { f: Arc::new(f), df_dt: Arc::new(df_dt) } }
    }

    /// Grid source `base + t · rate`.
    pub fn affine(base: ScalarField<T>, rate: ScalarField<T>) -> Self {
        Self { repr: SourceRepr::Affine { base, rate } }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, SourceRepr::Zero)
    }

    pub fn at(&self, grid: &StaggeredGrid<T>, t: T) -> Result<ScalarField<T>> {
        match &self.repr {
            SourceRepr::Zero => Ok(grid.zero_scalar()),
            SourceRepr::Analytic { f, .. } => grid.sample_scalar(|x1, x2| f(x1, x2, t)),
            SourceRepr::Affine { base, rate } => {
                grid.check_scalar(base)?;
                Ok(base.lin_comb(T::one(), rate, t))
            }
        }
    }

    pub fn rate_at(&self, grid: &StaggeredGrid<T>, t: T) -> Result<ScalarField<T>> {
        match &self.repr {
            SourceRepr::Zero => Ok(grid.zero_scalar()),
            SourceRepr::Analytic { df_dt, .. } => grid.sample_scalar(|x1, x2| df_dt(x1, x2, t)),
            SourceRepr::Affine { rate, .. } => {
                grid.check_scalar(rate)?;
                Ok(rate.clone())
            }
        }
    }
}

impl<T> fmt::Debug for Source<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr {
            SourceRepr::Zero => "zero",
            SourceRepr::Analytic { .. } => "analytic",
            SourceRepr::Affine { .. } => "affine",
        };
        write!(f, "Source({kind})")
    }
}

/// Exact temperature (and optionally heat flux) of a manufactured problem.
#[derive(Clone)]
pub struct ExactSolution<T> {
    u: Field3<T>,
    q: Option<[Field3<T>; 2]>,
}

impl<T: Real> ExactSolution<T> {
    pub fn new(u: impl Fn(T, T, T) -> T + Send + Sync + 'static) -> Self {
        Self { u: Arc::new(u), q: None }
    }

    pub fn with_flux(
        mut self,
        q1: impl Fn(T, T, T) -> T + Send + Sync + 'static,
        q2: impl Fn(T, T, T) -> T + Send + Sync + 'static,
    ) -> Self {
        self.q = Some([Arc::new(q1), Arc::new(q2)]);
        self
    }

    pub fn temperature(&self, grid: &StaggeredGrid<T>, t: T) -> Result<ScalarField<T>> {
        grid.sample_scalar(|x1, x2| (self.u)(x1, x2, t))
    }

    pub fn flux(&self, grid: &StaggeredGrid<T>, dir: Direction, t: T) -> Option<Result<FluxField<T>>> {
        self.q.as_ref().map(|q| {
            let f = &q[dir.index() - 1];
            grid.sample_flux(dir, |x1, x2| f(x1, x2, t))
        })
    }
}

impl<T> fmt::Debug for ExactSolution<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExactSolution(flux: {})", self.q.is_some())
    }
}

/// A fully discretized initial-boundary value problem.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    pub grid: StaggeredGrid<T>,
    pub coefficients: Coefficients<T>,
    /// Initial temperature.
    pub v0: ScalarField<T>,
    /// Initial temperature rate, used by the three-level formulation.
    pub v1: Option<ScalarField<T>>,
    /// Initial heat flux, used by the system formulations.
    pub g0: Option<[FluxField<T>; 2]>,
    pub source: Source<T>,
    pub final_time: T,
    pub exact: Option<ExactSolution<T>>,
}

impl<T: Real> Problem<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.final_time > T::zero()) || !self.final_time.is_finite() {
            return Err(HhcError::InvalidParameter(format!("final time must be positive, got {}", self.final_time)));
        }
        self.grid.check_scalar(&self.v0)?;
        self.grid.check_scalar(self.coefficients.c())?;
        if let Some(v1) = &self.v1 {
            self.grid.check_scalar(v1)?;
        }
        if let Some([g1, g2]) = &self.g0 {
            self.grid.check_flux(g1, Direction::X1)?;
            self.grid.check_flux(g2, Direction::X2)?;
        }
        if self.v1.is_none() && self.g0.is_none() {
            return Err(HhcError::MissingData(
                "either the initial temperature rate v1 or the initial flux g0 is required".into(),
            ));
        }
        Ok(())
    }

    pub fn f(&self, t: T) -> Result<ScalarField<T>> {
        self.source.at(&self.grid, t)
    }

    /// Initial temperature rate; derived from the flux balance when only `g0` is given.
    pub fn initial_rate(&self) -> Result<ScalarField<T>> {
        if let Some(v1) = &self.v1 {
            return Ok(v1.clone());
        }
        let [g1, g2] = self.g0.as_ref().ok_or_else(|| HhcError::MissingData("neither v1 nor g0 provided".into()))?;
        let div = apply_a_star(&self.grid, g1)?.add(&apply_a_star(&self.grid, g2)?);
        Ok(self.f(T::zero())?.add(&div).mul(self.coefficients.inv_c()))
    }

    /// Initial heat flux; taken in equilibrium with `v0` (`q = −k A v0`) when only `v1` is given.
    pub fn initial_flux(&self) -> Result<[FluxField<T>; 2]> {
        if let Some(g0) = &self.g0 {
            return Ok(g0.clone());
        }
        if self.v1.is_none() {
            return Err(HhcError::MissingData("neither v1 nor g0 provided".into()));
        }
        let flux = |dir| -> Result<FluxField<T>> {
            Ok(apply_a(&self.grid, dir, &self.v0)?.mul(self.coefficients.k(dir)).scaled(-T::one()))
        };
        Ok([flux(Direction::X1)?, flux(Direction::X2)?])
    }
}

/// Uniform time grid with `steps · tau = final_time`, `tau` no larger than requested.
pub fn time_grid<T: Real>(final_time: T, requested_tau: T) -> Result<(usize, T)> {
    if !(requested_tau > T::zero()) || !(final_time > T::zero()) {
        return Err(HhcError::InvalidParameter(format!(
            "need tau > 0 and T > 0 (got tau = {requested_tau}, T = {final_time})"
        )));
    }
    let ratio = (final_time / requested_tau).to_f64_lossy();
    let steps = (ratio * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((steps, final_time / T::from_usize_lossy(steps)))
}

/// Two consecutive temperature levels `u^{n-1}`, `u^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeLevelState<T> {
    pub u_prev: ScalarField<T>,
    pub u_curr: ScalarField<T>,
    pub n: usize,
    pub t: T,
}

/// Temperature `u^n` (with `u^{n-1}`) and fluxes `q^{n-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredState<T> {
    pub u_prev: ScalarField<T>,
    pub u: ScalarField<T>,
    pub q: [FluxField<T>; 2],
    pub n: usize,
    pub t: T,
}

/// The vector `(q1, q2, u)` at level `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorState<T> {
    pub q: [FluxField<T>; 2],
    pub u: ScalarField<T>,
    pub n: usize,
    pub t: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeState<T> {
    ThreeLevel(ThreeLevelState<T>),
    Staggered(StaggeredState<T>),
    Vector(VectorState<T>),
}

impl<T: Real> SchemeState<T> {
    pub fn temperature(&self) -> &ScalarField<T> {
        match self {
            SchemeState::ThreeLevel(s) => &s.u_curr,
            SchemeState::Staggered(s) => &s.u,
            SchemeState::Vector(s) => &s.u,
        }
    }

    pub fn previous_temperature(&self) -> Option<&ScalarField<T>> {
        match self {
            SchemeState::ThreeLevel(s) => Some(&s.u_prev),
            SchemeState::Staggered(s) => Some(&s.u_prev),
            SchemeState::Vector(_) => None,
        }
    }

    pub fn flux(&self) -> Option<&[FluxField<T>; 2]> {
        match self {
            SchemeState::ThreeLevel(_) => None,
            SchemeState::Staggered(s) => Some(&s.q),
            SchemeState::Vector(s) => Some(&s.q),
        }
    }

    pub fn level(&self) -> usize {
        match self {
            SchemeState::ThreeLevel(s) => s.n,
            SchemeState::Staggered(s) => s.n,
            SchemeState::Vector(s) => s.n,
        }
    }

    pub fn time(&self) -> T {
        match self {
            SchemeState::ThreeLevel(s) => s.t,
            SchemeState::Staggered(s) => s.t,
            SchemeState::Vector(s) => s.t,
        }
    }
}

/// A new state plus the iterations spent in iterative solves to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Advanced<S> {
    pub state: S,
    pub solver_iterations: usize,
}

/// Operator multiplying the time differences of a three-level scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeOperator {
    /// `c`.
    Capacity,
    /// `c½ Q c½` with the factorized `Q`.
    Factorized,
    /// `c½ (E + στ²Λ) c½`.
    Regularized,
}

/// Spatial operator of a three-level scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialOperator {
    D,
    C,
}

/// Discrete right-hand side `φ^n` of a three-level scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    /// `f^n + ν (f^{n+1} − f^{n−1}) / (2τ)`.
    Nodal,
    /// `(f^{n+1/2} + f^{n−1/2}) / 2 + ν (f^{n+1/2} − f^{n−1/2}) / τ`.
    Staggered,
}

/// Structure `K (ν Δ²u/τ² + Δ⁰u/(2τ)) + L (σ_w u⁺ + (1−2σ_w) u + σ_w u⁻) = φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThreeLevelForm {
    pub time_op: TimeOperator,
    pub spatial_op: SpatialOperator,
    /// `σ_w = σ` when set, `σ_w = 0` otherwise.
    pub weighted: bool,
    pub load: LoadKind,
}

/// The three-level scheme a kind advances, or that its temperature sequence satisfies.
pub fn three_level_form(kind: SchemeKind) -> Option<ThreeLevelForm> {
    use LoadKind::*;
    use SpatialOperator::*;
    use TimeOperator::*;
    let form = |time_op, spatial_op, weighted, load| Some(ThreeLevelForm { time_op, spatial_op, weighted, load });
    match kind {
        SchemeKind::ThreeLevelWeighted => form(Capacity, D, true, Nodal),
        SchemeKind::ThreeLevelExplicit => form(Capacity, D, false, Nodal),
        SchemeKind::LodQ => form(Factorized, D, false, Staggered),
        SchemeKind::LodC => form(Capacity, C, false, Staggered),
        SchemeKind::ThreeLevelRegularized => form(Regularized, D, false, Staggered),
        SchemeKind::StaggeredExplicit => form(Capacity, D, false, Staggered),
        SchemeKind::StaggeredWeightedFlux => form(Capacity, D, true, Staggered),
        SchemeKind::StaggeredRegularized => form(Regularized, D, false, Staggered),
        SchemeKind::StaggeredAdditiveQ => form(Factorized, D, false, Staggered),
        SchemeKind::StaggeredFluxPerturbed => form(Capacity, C, false, Staggered),
        SchemeKind::SystemWeighted | SchemeKind::SplitComponentwiseP2 | SchemeKind::SplitComponentwiseP3 => None,
    }
}

/// Operators of a three-level scheme bound to a grid, coefficients and `(σ, τ)`.
pub struct ThreeLevelOperators<'a, T> {
    pub grid: &'a StaggeredGrid<T>,
    pub coeff: &'a Coefficients<T>,
    pub sigma: T,
    pub tau: T,
    pub regularizer: Regularizer,
    pub solver: SpdSettings<T>,
}

impl<'a, T: Real> ThreeLevelOperators<'a, T> {
    pub fn new(problem: &'a Problem<T>, config: &SchemeConfig<T>) -> Self {
        Self {
            grid: &problem.grid,
            coeff: &problem.coefficients,
            sigma: config.sigma,
            tau: config.tau,
            regularizer: config.regularizer,
            solver: config.solver,
        }
    }

    /// `(E + στ²Λ) y`.
    fn regularizer_apply(&self, y: &ScalarField<T>) -> Result<ScalarField<T>> {
        let lambda = match self.regularizer {
            Regularizer::Unit => apply_unit_laplacian(self.grid, y)?,
            Regularizer::Conductivity => apply_d(self.grid, y, self.coeff)?,
        };
        Ok(y.lin_comb(T::one(), &lambda, self.sigma * self.tau * self.tau))
    }

    pub fn apply_time(&self, op: TimeOperator, u: &ScalarField<T>) -> Result<ScalarField<T>> {
        match op {
            TimeOperator::Capacity => Ok(u.mul(self.coeff.c())),
            TimeOperator::Factorized => {
                let inner = apply_q(self.grid, &u.mul(self.coeff.sqrt_c()), self.sigma, self.tau)?;
                Ok(inner.mul(self.coeff.sqrt_c()))
            }
            TimeOperator::Regularized => {
                let inner = self.regularizer_apply(&u.mul(self.coeff.sqrt_c()))?;
                Ok(inner.mul(self.coeff.sqrt_c()))
            }
        }
    }

    /// Solves `K y = rhs`; returns the iterations of any iterative solve.
    pub fn solve_time(&self, op: TimeOperator, rhs: &ScalarField<T>) -> Result<(ScalarField<T>, usize)> {
        match op {
            TimeOperator::Capacity => Ok((rhs.mul(self.coeff.inv_c()), 0)),
            TimeOperator::Factorized => {
                let inner = solve_q(self.grid, &rhs.mul(self.coeff.inv_sqrt_c()), self.sigma, self.tau)?;
                Ok((inner.mul(self.coeff.inv_sqrt_c()), 0))
            }
            TimeOperator::Regularized => {
                let scaled = rhs.mul(self.coeff.inv_sqrt_c());
                let (inner, stats) = solve_spd(|y| self.regularizer_apply(y), &scaled, None, &self.solver)?;
                Ok((inner.mul(self.coeff.inv_sqrt_c()), stats.iterations))
            }
        }
    }

    pub fn apply_spatial(&self, op: SpatialOperator, u: &ScalarField<T>) -> Result<ScalarField<T>> {
        match op {
            SpatialOperator::D => apply_d(self.grid, u, self.coeff),
            SpatialOperator::C => apply_c(self.grid, u, self.coeff, self.sigma, self.tau),
        }
    }
}

/// `φ^n` of the given kind at level `n` (time `nτ`).
pub fn load<T: Real>(problem: &Problem<T>, kind: LoadKind, n: usize, tau: T) -> Result<ScalarField<T>> {
    if problem.source.is_zero() {
        return Ok(problem.grid.zero_scalar());
    }
    let nu = problem.coefficients.nu();
    let t = T::from_usize_lossy(n) * tau;
    let half = T::lit(0.5);
    match kind {
        LoadKind::Nodal => {
            let now = problem.f(t)?;
            let next = problem.f(t + tau)?;
            let prev = problem.f(t - tau)?;
            Ok(now.add(&next.sub(&prev).scaled(nu / (T::lit(2.0) * tau))))
        }
        LoadKind::Staggered => {
            let next = problem.f(t + half * tau)?;
            let prev = problem.f(t - half * tau)?;
            Ok(next.lin_comb(half, &prev, half).add(&next.sub(&prev).scaled(nu / tau)))
        }
    }
}

/// Advances a three-level scheme by one step: returns `u^{n+1}` from `u^{n-1}`, `u^n`, `φ^n`.
pub fn advance_three_level<T: Real>(
    ops: &ThreeLevelOperators<'_, T>,
    form: &ThreeLevelForm,
    u_prev: &ScalarField<T>,
    u_curr: &ScalarField<T>,
    phi: &ScalarField<T>,
    nu: T,
) -> Result<(ScalarField<T>, usize)> {
    let tau = ops.tau;
    let a = nu / (tau * tau);
    let b = (T::lit(2.0) * tau).recip();
    let two = T::lit(2.0);
    let history = ops.apply_time(form.time_op, &u_curr.lin_comb(two * a, u_prev, -(a - b)))?;
    if !form.weighted || ops.sigma == T::zero() {
        let rhs = phi.sub(&ops.apply_spatial(form.spatial_op, u_curr)?).add(&history);
        let (y, iters) = ops.solve_time(form.time_op, &rhs)?;
        return Ok((y.scaled((a + b).recip()), iters));
    }
    let sigma = ops.sigma;
    let lu = ops.apply_spatial(form.spatial_op, u_curr)?;
    let lu_prev = ops.apply_spatial(form.spatial_op, u_prev)?;
    let rhs = phi.sub(&lu.scaled(T::one() - two * sigma)).sub(&lu_prev.scaled(sigma)).add(&history);
    let (u_next, stats) = solve_spd(
        |y| {
            let ky = ops.apply_time(form.time_op, y)?;
            Ok(ky.lin_comb(a + b, &ops.apply_spatial(form.spatial_op, y)?, sigma))
        },
        &rhs,
        Some(u_curr),
        &ops.solver,
    )?;
    Ok((u_next, stats.iterations))
}

/// Starting values `u^0 = v0`, `u^1 = u^0 + τ w0` for the three-level schemes.
///
/// The second-order start uses `w0 = v1 + (τ/2) u_tt(0)` with `u_tt(0)`
/// taken from the semi-discrete equation; the first-order start uses `w0 = v1`.
/// With `ν = 0` the rate is taken from the parabolic equation instead of `v1`.
pub fn second_order_start<T: Real>(problem: &Problem<T>, config: &SchemeConfig<T>) -> Result<ThreeLevelState<T>> {
    problem.validate()?;
    config.validate()?;
    let grid = &problem.grid;
    let coeff = &problem.coefficients;
    let tau = config.tau;
    let nu = coeff.nu();
    let half_tau = T::lit(0.5) * tau;
    let f0 = problem.f(T::zero())?;
    let dv0 = apply_d(grid, &problem.v0, coeff)?;
    let w0 = if nu > T::zero() {
        let v1 = problem.initial_rate()?;
        match config.start {
            StartOrder::First => v1,
            StartOrder::Second => {
                let ft0 = problem.source.rate_at(grid, T::zero())?;
                let num = f0.lin_comb(T::one(), &ft0, nu).sub(&v1.mul(coeff.c())).sub(&dv0);
                let utt = num.mul(coeff.inv_c()).scaled(nu.recip());
                v1.lin_comb(T::one(), &utt, half_tau)
            }
        }
    } else {
        if !coeff.is_parabolic_limit() {
            return Err(HhcError::InvalidCoefficients("nu = 0 requires the parabolic-limit flag".into()));
        }
        let ut = f0.sub(&dv0).mul(coeff.inv_c());
        match config.start {
            StartOrder::First => ut,
            StartOrder::Second => {
                let ft0 = problem.source.rate_at(grid, T::zero())?;
                let utt = ft0.sub(&apply_d(grid, &ut, coeff)?).mul(coeff.inv_c());
                ut.lin_comb(T::one(), &utt, half_tau)
            }
        }
    };
    Ok(ThreeLevelState { u_prev: problem.v0.clone(), u_curr: problem.v0.lin_comb(T::one(), &w0, tau), n: 1, t: tau })
}

/// One step of a three-level kind.
pub fn step_threelevel<T: Real>(
    state: &ThreeLevelState<T>,
    config: &SchemeConfig<T>,
    problem: &Problem<T>,
) -> Result<Advanced<ThreeLevelState<T>>> {
    let kind = config.kind;
    if kind.family() != SchemeFamily::ThreeLevel {
        return Err(HhcError::InvalidParameter(format!("{kind} is not a three-level scheme")));
    }
    let form = three_level_form(kind).expect("three-level kinds have a form");
    let ops = ThreeLevelOperators::new(problem, config);
    let phi = load(problem, form.load, state.n, config.tau)?;
    let (u_next, iters) =
        advance_three_level(&ops, &form, &state.u_prev, &state.u_curr, &phi, problem.coefficients.nu())?;
    let n = state.n + 1;
    Ok(Advanced {
        state: ThreeLevelState {
            u_prev: state.u_curr.clone(),
            u_curr: u_next,
            n,
            t: T::from_usize_lossy(n) * config.tau,
        },
        solver_iterations: iters,
    })
}

/// Largest stable step of the explicit three-level scheme, `sqrt(4ν c0 / (k1 (Δ1 + Δ2)))`.
pub fn explicit_stability_limit<T: Real>(grid: &StaggeredGrid<T>, coeff: &Coefficients<T>) -> Result<T> {
    if !(coeff.nu() > T::zero()) {
        return Err(HhcError::InvalidParameter("explicit stability limit needs nu > 0".into()));
    }
    let bounds = spectral_bounds(grid);
    Ok((T::lit(4.0) * coeff.nu() * coeff.c0() / (coeff.k1_max() * bounds.upper_sum())).sqrt())
}

fn flux_relaxation_update<T: Real>(q_prev: &FluxField<T>, drive: &FluxField<T>, nu: T, tau: T) -> FluxField<T> {
    // (q⁺ + q⁻)/2 + ν (q⁺ − q⁻)/τ + drive = 0
    let half = T::lit(0.5);
    let lhs = nu / tau + half;
    q_prev.lin_comb((nu / tau - half) / lhs, drive, -lhs.recip())
}

fn staggered_temperature_update<T: Real>(
    ops: &ThreeLevelOperators<'_, T>,
    kind: SchemeKind,
    u: &ScalarField<T>,
    q: &[FluxField<T>; 2],
    f_half: &ScalarField<T>,
) -> Result<(ScalarField<T>, usize)> {
    let grid = ops.grid;
    let rhs = apply_a_star(grid, &q[0])?.add(&apply_a_star(grid, &q[1])?).add(f_half);
    let op = match kind {
        SchemeKind::StaggeredRegularized => TimeOperator::Regularized,
        SchemeKind::StaggeredAdditiveQ => TimeOperator::Factorized,
        _ => TimeOperator::Capacity,
    };
    let (rate, iters) = ops.solve_time(op, &rhs)?;
    Ok((u.lin_comb(T::one(), &rate, ops.tau), iters))
}

/// Builds the staggered state at level 1: `u^0`, `u^1` and `q^{1/2}`.
///
/// `q^{1/2} = g0 + (τ/2) ∂q/∂t(0)` with `∂q/∂t(0) = −ν⁻¹ (g0 + k A v0)`
/// (first-order option, and the `ν = 0` limit: `q^{1/2} = g0`), then `u^1`
/// from the kind's temperature equation.
pub fn init_staggered<T: Real>(problem: &Problem<T>, config: &SchemeConfig<T>) -> Result<StaggeredState<T>> {
    problem.validate()?;
    config.validate()?;
    let kind = config.kind;
    if kind.family() != SchemeFamily::Staggered {
        return Err(HhcError::InvalidParameter(format!("{kind} is not a staggered scheme")));
    }
    let grid = &problem.grid;
    let coeff = &problem.coefficients;
    let nu = coeff.nu();
    let tau = config.tau;
    let g0 = problem.initial_flux()?;
    let q_half = match config.start {
        StartOrder::First => g0,
        // Without relaxation ∂q/∂t(0) is undefined; start from g0.
        StartOrder::Second if !(nu > T::zero()) => g0,
        StartOrder::Second => {
            let mut out = g0.clone();
            for (slot, dir) in out.iter_mut().zip(Direction::ALL) {
                let kav = apply_a(grid, dir, &problem.v0)?.mul(coeff.k(dir));
                let dq = g0[dir.index() - 1].add(&kav).scaled(-nu.recip());
                *slot = g0[dir.index() - 1].lin_comb(T::one(), &dq, T::lit(0.5) * tau);
            }
            out
        }
    };
    let ops = ThreeLevelOperators::new(problem, config);
    let f_half = problem.f(T::lit(0.5) * tau)?;
    let (u1, _) = staggered_temperature_update(&ops, kind, &problem.v0, &q_half, &f_half)?;
    Ok(StaggeredState { u_prev: problem.v0.clone(), u: u1, q: q_half, n: 1, t: tau })
}

/// One step of a staggered kind: `(u^{n-1}, u^n, q^{n-1/2}) → (u^n, u^{n+1}, q^{n+1/2})`.
pub fn step_staggered<T: Real>(
    state: &StaggeredState<T>,
    config: &SchemeConfig<T>,
    problem: &Problem<T>,
) -> Result<Advanced<StaggeredState<T>>> {
    let kind = config.kind;
    if kind.family() != SchemeFamily::Staggered {
        return Err(HhcError::InvalidParameter(format!("{kind} is not a staggered scheme")));
    }
    let grid = &problem.grid;
    let coeff = &problem.coefficients;
    let nu = coeff.nu();
    let tau = config.tau;
    let sigma = config.sigma;
    let ops = ThreeLevelOperators::new(problem, config);
    let t_half = (T::from_usize_lossy(state.n) + T::lit(0.5)) * tau;

    let (u_next, q_next, iters) = if kind == SchemeKind::StaggeredWeightedFlux {
        // The flux update couples to u^{n+1}. With γ = 1/(ν/τ + ½) the flux equation gives
        // q⁺ = γ((ν/τ − ½) q⁻ − k A (σu⁺ + (1−2σ)u + σu⁻)); substituting it into the
        // temperature equation leaves (c/τ + γσD) u⁺ = c u/τ + f + Σ A*(γ(ν/τ − ½) q⁻) − γ D((1−2σ)u + σu⁻).
        let half = T::lit(0.5);
        let gamma = (nu / tau + half).recip();
        let two = T::lit(2.0);
        let known = state.u.lin_comb(T::one() - two * sigma, &state.u_prev, sigma);
        let mut div_q = grid.zero_scalar();
        for q in &state.q {
            div_q = div_q.add(&apply_a_star(grid, q)?);
        }
        let f_half = problem.f(t_half)?;
        let rhs = state
            .u
            .mul(coeff.c())
            .scaled(tau.recip())
            .add(&f_half)
            .lin_comb(T::one(), &div_q, gamma * (nu / tau - half))
            .lin_comb(T::one(), &apply_d(grid, &known, coeff)?, -gamma);
        let (u_next, stats) = solve_spd(
            |y| Ok(y.mul(coeff.c()).lin_comb(tau.recip(), &apply_d(grid, y, coeff)?, gamma * sigma)),
            &rhs,
            Some(&state.u),
            &config.solver,
        )?;
        let combo = u_next.lin_comb(sigma, &known, T::one());
        let mut q_next = state.q.clone();
        for (slot, dir) in q_next.iter_mut().zip(Direction::ALL) {
            let drive = apply_a(grid, dir, &combo)?.mul(coeff.k(dir));
            *slot = flux_relaxation_update(&state.q[dir.index() - 1], &drive, nu, tau);
        }
        (u_next, q_next, stats.iterations)
    } else {
        let mut q_next = state.q.clone();
        for (slot, dir) in q_next.iter_mut().zip(Direction::ALL) {
            let drive = if kind == SchemeKind::StaggeredFluxPerturbed {
                perturbed_flux(grid, dir, &state.u, coeff, sigma, tau)?
            } else {
                apply_a(grid, dir, &state.u)?.mul(coeff.k(dir))
            };
            *slot = flux_relaxation_update(&state.q[dir.index() - 1], &drive, nu, tau);
        }
        let f_half = problem.f(t_half)?;
        let (u_next, iters) = staggered_temperature_update(&ops, kind, &state.u, &q_next, &f_half)?;
        (u_next, q_next, iters)
    };
    let n = state.n + 1;
    Ok(Advanced {
        state: StaggeredState { u_prev: state.u.clone(), u: u_next, q: q_next, n, t: T::from_usize_lossy(n) * tau },
        solver_iterations: iters,
    })
}

/// Initial vector state `(g0, v0)` at level 0.
pub fn init_vector<T: Real>(problem: &Problem<T>) -> Result<VectorState<T>> {
    problem.validate()?;
    Ok(VectorState { q: problem.initial_flux()?, u: problem.v0.clone(), n: 0, t: T::zero() })
}

/// One step of the weighted system scheme through its reduced temperature problem.
pub fn step_system_weighted<T: Real>(
    state: &VectorState<T>,
    config: &SchemeConfig<T>,
    problem: &Problem<T>,
) -> Result<Advanced<VectorState<T>>> {
    let grid = &problem.grid;
    let coeff = &problem.coefficients;
    let nu = coeff.nu();
    let tau = config.tau;
    let sigma = config.sigma;
    let explicit_part = (T::one() - sigma) * tau;
    let st = sigma * tau;
    let denom = nu + st;
    if !(denom > T::zero()) {
        return Err(HhcError::InvalidParameter("system scheme needs nu + sigma*tau > 0".into()));
    }

    // chi_α = ν q^n − (1−σ)τ (q^n + k A_α u^n); phi = c u^n + (1−σ)τ Σ A*_α q^n + τ f^{n+1/2}
    let mut chi = state.q.clone();
    let mut div_q = grid.zero_scalar();
    let mut div_chi = grid.zero_scalar();
    for (slot, dir) in chi.iter_mut().zip(Direction::ALL) {
        let q = &state.q[dir.index() - 1];
        let kau = apply_a(grid, dir, &state.u)?.mul(coeff.k(dir));
        *slot = q.lin_comb(nu - explicit_part, &kau, -explicit_part);
        div_q = div_q.add(&apply_a_star(grid, q)?);
        div_chi = div_chi.add(&apply_a_star(grid, slot)?);
    }
    let f_half = problem.f(state.t + T::lit(0.5) * tau)?;
    let phi = state.u.mul(coeff.c()).lin_comb(T::one(), &div_q, explicit_part).lin_comb(T::one(), &f_half, tau);
    let rhs = phi.lin_comb(denom, &div_chi, st);

    let (u_next, stats) = solve_spd(
        |y| {
            let coupling = match config.reduced_operator {
                ReducedOperator::Conductivity => apply_d(grid, y, coeff)?,
                ReducedOperator::Unit => apply_unit_laplacian(grid, y)?,
            };
            Ok(y.mul(coeff.c()).lin_comb(denom, &coupling, st * st))
        },
        &rhs,
        Some(&state.u),
        &config.solver,
    )?;

    let mut q_next = chi;
    for (slot, dir) in q_next.iter_mut().zip(Direction::ALL) {
        let kau = apply_a(grid, dir, &u_next)?.mul(coeff.k(dir));
        *slot = slot.lin_comb(denom.recip(), &kau, -st / denom);
    }
    let n = state.n + 1;
    Ok(Advanced {
        state: VectorState { q: q_next, u: u_next, n, t: T::from_usize_lossy(n) * tau },
        solver_iterations: stats.iterations,
    })
}

/// One substep operator of the component-wise splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Substep {
    /// Couples `q_α` and `u` through `A_α`, `−A*_α`, with `θ k⁻¹` on both fluxes.
    Directional { dir: Direction, damping: f64 },
    /// `k⁻¹` on both fluxes only.
    Damping,
}

/// Symmetric substep sequence `A(1) … A(p) A(p) … A(1)`.
pub fn substep_sequence(p: usize) -> Result<Vec<Substep>> {
    let forward = match p {
        3 => vec![
            Substep::Directional { dir: Direction::X1, damping: 0.0 },
            Substep::Directional { dir: Direction::X2, damping: 0.0 },
            Substep::Damping,
        ],
        2 => vec![
            Substep::Directional { dir: Direction::X1, damping: 0.5 },
            Substep::Directional { dir: Direction::X2, damping: 0.5 },
        ],
        other => {
            return Err(HhcError::InvalidParameter(format!(
                "component-wise splitting supports p = 2 or 3, got {other}"
            )))
        }
    };
    let mut seq = forward.clone();
    seq.extend(forward.into_iter().rev());
    Ok(seq)
}

/// Solves `(B + h/2 Ã) x = (B − h/2 Ã) y + [0, 0, g]` for one substep operator `Ã`.
pub fn apply_substep<T: Real>(
    problem: &Problem<T>,
    h: T,
    substep: Substep,
    q: &[FluxField<T>; 2],
    u: &ScalarField<T>,
    g: &ScalarField<T>,
) -> Result<([FluxField<T>; 2], ScalarField<T>)> {
    let grid = &problem.grid;
    let coeff = &problem.coefficients;
    let nu = coeff.nu();
    let half_h = T::lit(0.5) * h;
    match substep {
        Substep::Damping => {
            let factor = (nu - half_h) / (nu + half_h);
            let q_next = [q[0].scaled(factor), q[1].scaled(factor)];
            let u_next = u.add(&g.mul(coeff.inv_c()));
            Ok((q_next, u_next))
        }
        Substep::Directional { dir, damping } => {
            let theta = T::lit(damping);
            let s_plus = nu + theta * half_h;
            let s_minus = nu - theta * half_h;
            let a = dir.index() - 1;
            let k = coeff.k(dir);
            // Row of q_α: s⁺ k⁻¹ q_α' + h/2 A_α u' = s⁻ k⁻¹ q_α − h/2 A_α u.
            let r_flux = q[a].mul(coeff.inv_k(dir)).lin_comb(s_minus, &apply_a(grid, dir, u)?, -half_h);
            // Row of u: c u' − h/2 A*_α q_α' = c u + h/2 A*_α q_α + g.
            let r_temp = u.mul(coeff.c()).lin_comb(T::one(), &apply_a_star(grid, &q[a])?, half_h).add(g);
            // Eliminating q_α': s⁺ c u' + h²/4 A*_α k A_α u' = s⁺ r_u + h/2 A*_α (k r_q).
            let rhs = r_temp.lin_comb(s_plus, &apply_a_star(grid, &r_flux.mul(k))?, half_h);
            let sys = NodeLineSystem::new(dir, s_plus, half_h * half_h).with_mass(coeff.c()).with_conductivity(k);
            let u_next = solve_lines(grid, &sys, &rhs)?;
            let q_dir = r_flux.lin_comb(T::one(), &apply_a(grid, dir, &u_next)?, -half_h).mul(k).scaled(s_plus.recip());
            let other = 1 - a;
            let mut q_next = q.clone();
            q_next[a] = q_dir;
            q_next[other] = q[other].scaled(s_minus / s_plus);
            Ok((q_next, u_next))
        }
    }
}

/// One step of the component-wise splitting.
pub fn step_componentwise<T: Real>(
    state: &VectorState<T>,
    config: &SchemeConfig<T>,
    problem: &Problem<T>,
) -> Result<Advanced<VectorState<T>>> {
    let p = config
        .kind
        .decomposition()
        .ok_or_else(|| HhcError::InvalidParameter(format!("{} is not a component-wise scheme", config.kind)))?;
    if !(problem.coefficients.nu() > T::zero()) {
        return Err(HhcError::InvalidCoefficients("component-wise splitting needs nu > 0".into()));
    }
    let seq = substep_sequence(p)?;
    let tau = config.tau;
    let f_half = problem.f(state.t + T::lit(0.5) * tau)?;
    let zero = problem.grid.zero_scalar();
    let even = f_half.scaled(T::from_usize_lossy(seq.len()).recip());
    // Every operator appears twice per step, so each substep advances it by τ/2.
    let h = T::lit(0.5) * tau;
    let mut q = state.q.clone();
    let mut u = state.u.clone();
    for (i, sub) in seq.iter().enumerate() {
        let share = match config.source_split {
            SourceSplit::Even => &even,
            SourceSplit::First if i == 0 => &f_half,
            SourceSplit::First => &zero,
        };
        let (qn, un) = apply_substep(problem, h, *sub, &q, &u, &share.scaled(tau))?;
        q = qn;
        u = un;
    }
    let n = state.n + 1;
    Ok(Advanced { state: VectorState { q, u, n, t: T::from_usize_lossy(n) * tau }, solver_iterations: 0 })
}

/// A stability condition of the chosen kind that the parameters do not meet.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityWarning {
    pub condition: String,
    pub required: f64,
    pub actual: f64,
}

impl fmt::Display for StabilityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (required {}, got {})", self.condition, self.required, self.actual)
    }
}

/// Checks the sufficient stability conditions of `config.kind` without enforcing them.
pub fn stability_warnings<T: Real>(
    config: &SchemeConfig<T>,
    grid: &StaggeredGrid<T>,
    coeff: &Coefficients<T>,
    final_time: T,
) -> Vec<StabilityWarning> {
    let kind = config.kind;
    let sigma = config.sigma.to_f64_lossy();
    let nu_c0_sigma = (coeff.nu() * coeff.c0()).to_f64_lossy() * sigma;
    let mut out = Vec::new();
    let mut require = |condition: String, required: f64, actual: f64| {
        if actual < required {
            out.push(StabilityWarning { condition, required, actual });
        }
    };
    match kind {
        SchemeKind::ThreeLevelWeighted | SchemeKind::StaggeredWeightedFlux => {
            require(format!("{kind} is unconditionally stable for sigma >= 0.25"), 0.25, sigma)
        }
        SchemeKind::SystemWeighted => {
            require(format!("{kind} is unconditionally stable for sigma >= 0.5"), 0.5, sigma);
            let ratio = (final_time / config.tau).to_f64_lossy();
            require(format!("the {kind} energy estimate assumes 2*tau <= T"), 2.0, ratio);
        }
        SchemeKind::LodQ
        | SchemeKind::ThreeLevelRegularized
        | SchemeKind::StaggeredRegularized
        | SchemeKind::StaggeredAdditiveQ => {
            require(format!("{kind} is unconditionally stable for nu*c0*sigma >= 0.25"), 0.25, nu_c0_sigma)
        }
        SchemeKind::LodC | SchemeKind::StaggeredFluxPerturbed => {
            require(format!("{kind} is unconditionally stable for nu*c0*sigma >= 0.5"), 0.5, nu_c0_sigma)
        }
        SchemeKind::ThreeLevelExplicit | SchemeKind::StaggeredExplicit => {
            if let Ok(limit) = explicit_stability_limit(grid, coeff) {
                let limit = limit.to_f64_lossy();
                let tau = config.tau.to_f64_lossy();
                if tau > limit {
                    out.push(StabilityWarning {
                        condition: format!("{kind} is stable for tau <= tau_max = {limit:.6}"),
                        required: limit,
                        actual: tau,
                    });
                }
            }
        }
        SchemeKind::SplitComponentwiseP2 | SchemeKind::SplitComponentwiseP3 => {}
    }
    out
}

/// Runs one scheme on one problem with the time step adjusted so that `steps·τ = T`.
#[derive(Debug)]
pub struct Integrator<'a, T> {
    problem: &'a Problem<T>,
    config: SchemeConfig<T>,
    steps: usize,
    warnings: Vec<StabilityWarning>,
}

impl<'a, T: Real> Integrator<'a, T> {
    pub fn new(problem: &'a Problem<T>, config: SchemeConfig<T>) -> Result<Self> {
        problem.validate()?;
        config.validate()?;
        let (steps, tau) = time_grid(problem.final_time, config.tau)?;
        let config = SchemeConfig { tau, ..config };
        let kind = config.kind;
        if problem.coefficients.is_parabolic_limit() && kind.requires_relaxation() {
            return Err(HhcError::InvalidCoefficients(format!(
                "{kind} is not available in the parabolic limit nu = 0"
            )));
        }
        let warnings = stability_warnings(&config, &problem.grid, &problem.coefficients, problem.final_time);
        if kind.is_explicit() && !config.override_stability {
            if let Some(w) = warnings.first() {
                return Err(HhcError::Stability(w.to_string()));
            }
        }
        Ok(Self { problem, config, steps, warnings })
    }

    pub fn config(&self) -> &SchemeConfig<T> {
        &self.config
    }

    pub fn problem(&self) -> &'a Problem<T> {
        self.problem
    }

    pub fn tau(&self) -> T {
        self.config.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn warnings(&self) -> &[StabilityWarning] {
        &self.warnings
    }

    /// Initial state: level 1 for three-level and staggered kinds, level 0 otherwise.
    pub fn init(&self) -> Result<SchemeState<T>> {
        match self.config.kind.family() {
            SchemeFamily::ThreeLevel => Ok(SchemeState::ThreeLevel(second_order_start(self.problem, &self.config)?)),
            SchemeFamily::Staggered => Ok(SchemeState::Staggered(init_staggered(self.problem, &self.config)?)),
            SchemeFamily::System | SchemeFamily::Componentwise => Ok(SchemeState::Vector(init_vector(self.problem)?)),
        }
    }

    pub fn step(&self, state: &SchemeState<T>) -> Result<Advanced<SchemeState<T>>> {
        let (cfg, pb) = (&self.config, self.problem);
        let mismatch = || HhcError::InvalidParameter(format!("state does not belong to {}", cfg.kind));
        match (cfg.kind.family(), state) {
            (SchemeFamily::ThreeLevel, SchemeState::ThreeLevel(s)) => {
                let a = step_threelevel(s, cfg, pb)?;
                Ok(Advanced { state: SchemeState::ThreeLevel(a.state), solver_iterations: a.solver_iterations })
            }
            (SchemeFamily::Staggered, SchemeState::Staggered(s)) => {
                let a = step_staggered(s, cfg, pb)?;
                Ok(Advanced { state: SchemeState::Staggered(a.state), solver_iterations: a.solver_iterations })
            }
            (SchemeFamily::System, SchemeState::Vector(s)) => {
                let a = step_system_weighted(s, cfg, pb)?;
                Ok(Advanced { state: SchemeState::Vector(a.state), solver_iterations: a.solver_iterations })
            }
            (SchemeFamily::Componentwise, SchemeState::Vector(s)) => {
                let a = step_componentwise(s, cfg, pb)?;
                Ok(Advanced { state: SchemeState::Vector(a.state), solver_iterations: a.solver_iterations })
            }
            _ => Err(mismatch()),
        }
    }

    /// Integrates to the final time, calling `observe` on every state including the first.
    pub fn run<F>(&self, mut observe: F) -> Result<RunSummary<T>>
    where
        F: FnMut(&SchemeState<T>) -> Result<()>,
    {
        let mut state = self.init()?;
        observe(&state)?;
        let mut total = 0;
        while state.level() < self.steps {
            let next = self.step(&state)?;
            total += next.solver_iterations;
            state = next.state;
            observe(&state)?;
        }
        Ok(RunSummary { final_state: state, solver_iterations: total })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<T> {
    pub final_state: SchemeState<T>,
    pub solver_iterations: usize,
}
