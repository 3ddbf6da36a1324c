//! Energy functionals and per-step stability monitors, residuals of the
//! three-level identities satisfied by the staggered schemes, manufactured
//! problems and convergence studies.

use std::fmt;
use std::str::FromStr;

use crate::error::{HhcError, Result};
use crate::grid::{Direction, ScalarField, StaggeredGrid};
use crate::operators::{apply_a, Coefficients};
use crate::scalar::Real;
use crate::schemes::{
    load, three_level_form, ExactSolution, Integrator, Problem, SchemeConfig, SchemeKind, SchemeState, Source,
    ThreeLevelForm, ThreeLevelOperators, TimeOperator,
};

/// Quadratic functional whose per-step inequality certifies stability of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    /// Two-level functional of the weighted three-level scheme.
    Weighted,
    /// Functional of the explicit scheme; positive only below the CFL step.
    Explicit,
    /// Functional of the schemes regularized by `Q` or `E + στ²Λ`.
    Regularized,
    /// Functional of the schemes built on the operator `C`.
    Perturbed,
    /// `G = (c u, u) + ν Σ (k⁻¹ q_α, q_α)` for the weighted system scheme.
    System,
    /// `G` for the component-wise splitting.
    Split,
}

impl EnergyKind {
    pub fn id(self) -> &'static str {
        match self {
            EnergyKind::Weighted => "S_weighted",
            EnergyKind::Explicit => "S_explicit",
            EnergyKind::Regularized => "S_Q",
            EnergyKind::Perturbed => "S_C",
            EnergyKind::System => "G",
            EnergyKind::Split => "G_split",
        }
    }

    pub fn for_scheme(kind: SchemeKind) -> Self {
        match kind {
            SchemeKind::ThreeLevelWeighted | SchemeKind::StaggeredWeightedFlux => EnergyKind::Weighted,
            SchemeKind::ThreeLevelExplicit | SchemeKind::StaggeredExplicit => EnergyKind::Explicit,
            SchemeKind::LodQ
            | SchemeKind::ThreeLevelRegularized
            | SchemeKind::StaggeredRegularized
            | SchemeKind::StaggeredAdditiveQ => EnergyKind::Regularized,
            SchemeKind::LodC | SchemeKind::StaggeredFluxPerturbed => EnergyKind::Perturbed,
            SchemeKind::SystemWeighted => EnergyKind::System,
            SchemeKind::SplitComponentwiseP2 | SchemeKind::SplitComponentwiseP3 => EnergyKind::Split,
        }
    }

    fn is_two_level(self) -> bool {
        !matches!(self, EnergyKind::System | EnergyKind::Split)
    }
}

impl fmt::Display for EnergyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// `(K, L, σ_w)` of a two-level functional, with `K` chosen to match `scheme`.
fn energy_form(kind: EnergyKind, scheme: SchemeKind) -> Result<ThreeLevelForm> {
    use crate::schemes::{LoadKind, SpatialOperator};
    let load = three_level_form(scheme).map(|f| f.load).unwrap_or(LoadKind::Staggered);
    let form = |time_op, spatial_op, weighted| ThreeLevelForm { time_op, spatial_op, weighted, load };
    match kind {
        EnergyKind::Weighted => Ok(form(TimeOperator::Capacity, SpatialOperator::D, true)),
        EnergyKind::Explicit => Ok(form(TimeOperator::Capacity, SpatialOperator::D, false)),
        EnergyKind::Regularized => {
            let time_op = match scheme {
                SchemeKind::LodQ | SchemeKind::StaggeredAdditiveQ => TimeOperator::Factorized,
                _ => TimeOperator::Regularized,
            };
            Ok(form(time_op, SpatialOperator::D, false))
        }
        EnergyKind::Perturbed => Ok(form(TimeOperator::Capacity, SpatialOperator::C, false)),
        EnergyKind::System | EnergyKind::Split => {
            Err(HhcError::InvalidParameter(format!("{kind} is not a two-level functional")))
        }
    }
}

/// `((νK + (σ_w − ¼)τ²L) η, η) + (L ζ, ζ)` with `η = (u − u_prev)/τ`, `ζ = (u + u_prev)/2`.
pub fn two_level_energy<T: Real>(
    ops: &ThreeLevelOperators<'_, T>,
    form: &ThreeLevelForm,
    nu: T,
    u_prev: &ScalarField<T>,
    u: &ScalarField<T>,
) -> Result<T> {
    let grid = ops.grid;
    let tau = ops.tau;
    let half = T::lit(0.5);
    let eta = u.sub(u_prev).scaled(tau.recip());
    let zeta = u.lin_comb(half, u_prev, half);
    let sigma_w = if form.weighted { ops.sigma } else { T::zero() };
    let k_eta = grid.inner_h(&ops.apply_time(form.time_op, &eta)?, &eta)?;
    let l_eta = grid.inner_h(&ops.apply_spatial(form.spatial_op, &eta)?, &eta)?;
    let l_zeta = grid.inner_h(&ops.apply_spatial(form.spatial_op, &zeta)?, &zeta)?;
    Ok(nu * k_eta + (sigma_w - T::lit(0.25)) * tau * tau * l_eta + l_zeta)
}

/// `(c u, u) + ν Σ (k⁻¹ q_α, q_α)_α`.
pub fn system_energy<T: Real>(
    grid: &StaggeredGrid<T>,
    coeff: &Coefficients<T>,
    u: &ScalarField<T>,
    q: &[crate::grid::FluxField<T>; 2],
) -> Result<T> {
    let mut g = grid.inner_h(&u.mul(coeff.c()), u)?;
    for dir in Direction::ALL {
        let qa = &q[dir.index() - 1];
        g = g + coeff.nu() * grid.inner_h_alpha(&qa.mul(coeff.inv_k(dir)), qa)?;
    }
    Ok(g)
}

/// Value of the functional `kind` on `state`; `config.kind` selects the operator `K`.
pub fn energy<T: Real>(
    kind: EnergyKind,
    state: &SchemeState<T>,
    config: &SchemeConfig<T>,
    problem: &Problem<T>,
) -> Result<T> {
    let mismatch = || HhcError::InvalidParameter(format!("{kind} does not apply to this state"));
    if kind.is_two_level() {
        let u_prev = state.previous_temperature().ok_or_else(mismatch)?;
        let form = energy_form(kind, config.kind)?;
        let ops = ThreeLevelOperators::new(problem, config);
        two_level_energy(&ops, &form, problem.coefficients.nu(), u_prev, state.temperature())
    } else {
        match state {
            SchemeState::Vector(s) => system_energy(&problem.grid, &problem.coefficients, &s.u, &s.q),
            _ => Err(mismatch()),
        }
    }
}

/// One row of an energy monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRecord<T> {
    pub n: usize,
    pub t: T,
    pub kind: EnergyKind,
    pub value: T,
    /// Right-hand side of the step inequality (equal to `value` on the first record).
    pub bound: T,
    pub slack: T,
    pub violated: bool,
}

/// Default slack tolerance, relative to `max(1, |value|)`.
pub const SLACK_TOL: f64 = 1e-10;

/// Evaluates the energy of each new state and checks the step inequality of its scheme.
///
/// A record is flagged when the slack falls below `−tol·max(1, |value|)`, or
/// when a functional that must be a squared norm turns negative.
#[derive(Debug)]
pub struct EnergyMonitor<'a, T> {
    problem: &'a Problem<T>,
    config: SchemeConfig<T>,
    kind: EnergyKind,
    tolerance: T,
    previous: Option<(usize, T)>,
}

impl<'a, T: Real> EnergyMonitor<'a, T> {
    pub fn new(problem: &'a Problem<T>, config: &SchemeConfig<T>) -> Result<Self> {
        let kind = EnergyKind::for_scheme(config.kind);
        if kind == EnergyKind::System && T::lit(2.0) * config.tau > problem.final_time {
            return Err(HhcError::InvalidParameter("the system energy estimate requires 2*tau <= T".into()));
        }
        Ok(Self { problem, config: config.clone(), kind, tolerance: T::lit(SLACK_TOL), previous: None })
    }

    /// Monitor bound to the step actually used by `integrator`.
    pub fn for_integrator(integrator: &Integrator<'a, T>) -> Result<Self> {
        Self::new(integrator.problem(), integrator.config())
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn kind(&self) -> EnergyKind {
        self.kind
    }

    /// Increment allowed from level `n` to `n + 1` on top of the previous value.
    fn bound_from(&self, n: usize, previous: T) -> Result<T> {
        let pb = self.problem;
        let grid = &pb.grid;
        let coeff = &pb.coefficients;
        let tau = self.config.tau;
        let forcing = |f: &ScalarField<T>| grid.inner_h(&f.mul(coeff.inv_c()), f);
        match self.kind {
            EnergyKind::System => {
                let t_total = pb.final_time;
                let f = pb.f((T::from_usize_lossy(n) + T::lit(0.5)) * tau)?;
                let growth = (T::lit(4.0) * tau / t_total).exp();
                let weight = tau * t_total * ((T::lit(2.0) * self.config.sigma - T::one()) * tau / t_total).exp();
                Ok(growth * previous + weight * forcing(&f)?)
            }
            EnergyKind::Split => {
                let f = pb.f((T::from_usize_lossy(n) + T::lit(0.5)) * tau)?;
                let root = previous.max(T::zero()).sqrt() + tau * forcing(&f)?.sqrt();
                Ok(root * root)
            }
            _ => {
                let form = energy_form(self.kind, self.config.kind)?;
                let phi = load(pb, form.load, n, tau)?;
                Ok(previous + T::lit(0.5) * tau * forcing(&phi)?)
            }
        }
    }

    pub fn observe(&mut self, state: &SchemeState<T>) -> Result<EnergyRecord<T>> {
        let value = energy(self.kind, state, &self.config, self.problem)?;
        let n = state.level();
        let bound = match self.previous {
            Some((prev_n, prev_value)) if prev_n + 1 == n => self.bound_from(prev_n, prev_value)?,
            Some((prev_n, _)) => {
                return Err(HhcError::InvalidParameter(format!(
                    "monitor expects consecutive levels, got {prev_n} then {n}"
                )))
            }
            None => value,
        };
        let slack = bound - value;
        let scale = self.tolerance * T::one().max(value.abs());
        let violated = !slack.is_finite() || slack < -scale || value < -scale;
        self.previous = Some((n, value));
        Ok(EnergyRecord { n, t: state.time(), kind: self.kind, value, bound, slack, violated })
    }
}

/// Energy records of a consecutive sequence of states of `config.kind`.
pub fn monitor_step<T: Real>(
    history: &[SchemeState<T>],
    config: &SchemeConfig<T>,
    problem: &Problem<T>,
) -> Result<Vec<EnergyRecord<T>>> {
    let mut monitor = EnergyMonitor::new(problem, config)?;
    history.iter().map(|s| monitor.observe(s)).collect()
}

/// Largest relative residual of the three-level identity `form` along a temperature trajectory.
///
/// `trajectory[i]` is the temperature at level `first_level + i`. Each step's
/// residual is scaled by the largest of its terms, so a zero trajectory has
/// zero residual.
pub fn equivalence_residual<T: Real>(
    form: &ThreeLevelForm,
    trajectory: &[ScalarField<T>],
    first_level: usize,
    config: &SchemeConfig<T>,
    problem: &Problem<T>,
) -> Result<T> {
    if trajectory.len() < 3 {
        return Err(HhcError::MissingData(format!(
            "a three-level residual needs at least 3 levels, got {}",
            trajectory.len()
        )));
    }
    let ops = ThreeLevelOperators::new(problem, config);
    let tau = config.tau;
    let nu = problem.coefficients.nu();
    let sigma_w = if form.weighted { config.sigma } else { T::zero() };
    let two = T::lit(2.0);
    let mut worst = T::zero();
    for (i, w) in trajectory.windows(3).enumerate() {
        let (u_prev, u, u_next) = (&w[0], &w[1], &w[2]);
        let second = u_next.sub(&u.scaled(two)).add(u_prev).scaled(nu / (tau * tau));
        let first = u_next.sub(u_prev).scaled((two * tau).recip());
        let inertia = ops.apply_time(form.time_op, &second)?;
        let damping = ops.apply_time(form.time_op, &first)?;
        let avg = u_next.lin_comb(sigma_w, u, T::one() - two * sigma_w).lin_comb(T::one(), u_prev, sigma_w);
        let spatial = ops.apply_spatial(form.spatial_op, &avg)?;
        let phi = load(problem, form.load, first_level + i + 1, tau)?;
        let residual = inertia.add(&damping).add(&spatial).sub(&phi);
        let scale = [&inertia, &damping, &spatial, &phi].iter().map(|f| f.max_abs()).fold(T::zero(), |a, b| a.max(b));
        if scale > T::zero() {
            worst = worst.max(residual.max_abs() / scale);
        }
    }
    Ok(worst)
}

/// Catalog of problems with known solutions or prescribed data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManufacturedId {
    /// `u = sin(πx1/l1) sin(πx2/l2) cos(ωt)` with constant `c`, `k`.
    M1,
    /// Free decay of the first mode: `f = 0`, `v0 = sin·sin`, flux in equilibrium.
    M1Homogeneous,
    /// As M1 with `k = 1 + x1/2`.
    M2,
    /// M1 intended for sweeps over `ν`.
    M3,
    /// Highest discrete mode of the grid, `f = 0`, `v1 = 0`.
    TopMode,
}

impl ManufacturedId {
    pub const ALL: [ManufacturedId; 5] = [
        ManufacturedId::M1,
        ManufacturedId::M1Homogeneous,
        ManufacturedId::M2,
        ManufacturedId::M3,
        ManufacturedId::TopMode,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ManufacturedId::M1 => "m1",
            ManufacturedId::M1Homogeneous => "m1-homogeneous",
            ManufacturedId::M2 => "m2",
            ManufacturedId::M3 => "m3",
            ManufacturedId::TopMode => "top-mode",
        }
    }

    pub fn has_exact_solution(self) -> bool {
        matches!(self, ManufacturedId::M1 | ManufacturedId::M2 | ManufacturedId::M3)
    }
}

impl fmt::Display for ManufacturedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ManufacturedId {
    type Err = HhcError;

    fn from_str(s: &str) -> Result<Self> {
        ManufacturedId::ALL.iter().copied().find(|m| m.id() == s).ok_or_else(|| HhcError::Unknown(s.to_string()))
    }
}

/// Physical parameters of a catalog problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedParams<T> {
    pub nu: T,
    pub omega: T,
    /// Constant heat capacity `c`.
    pub capacity: T,
    /// Constant conductivity `k` (ignored by M2).
    pub conductivity: T,
    pub final_time: T,
}

impl<T: Real> Default for ManufacturedParams<T> {
    fn default() -> Self {
        Self { nu: T::one(), omega: T::PI(), capacity: T::one(), conductivity: T::one(), final_time: T::one() }
    }
}

/// Time profile `g(t) = (cos ωt + νω sin ωt) / (1 + ν²ω²)` of the flux, solving `g + ν g' = cos ωt`.
fn flux_profile<T: Real>(nu: T, omega: T, t: T) -> (T, T) {
    let d = T::one() + nu * nu * omega * omega;
    let (s, c) = (omega * t).sin_cos();
    ((c + nu * omega * s) / d, (-omega * s + nu * omega * omega * c) / d)
}

pub fn manufactured_problem<T: Real>(
    id: ManufacturedId,
    grid: &StaggeredGrid<T>,
    params: &ManufacturedParams<T>,
) -> Result<Problem<T>> {
    let ManufacturedParams { nu, omega, capacity: c, conductivity: k, final_time } = *params;
    let pi = T::PI();
    let (l1, l2) = (grid.l(Direction::X1), grid.l(Direction::X2));
    let (p1, p2) = (pi / l1, pi / l2);
    let mode = move |x1: T, x2: T| (p1 * x1).sin() * (p2 * x2).sin();
    let grad1 = move |x1: T, x2: T| p1 * (p1 * x1).cos() * (p2 * x2).sin();
    let grad2 = move |x1: T, x2: T| p2 * (p1 * x1).sin() * (p2 * x2).cos();
    let wave = p1 * p1 + p2 * p2;

    match id {
        ManufacturedId::M1 | ManufacturedId::M3 | ManufacturedId::M2 => {
            let variable = id == ManufacturedId::M2;
            let half = T::lit(0.5);
            let kfn = move |x1: T, _x2: T| if variable { T::one() + half * x1 } else { k };
            // −div(k ∇X) for the spatial mode X.
            let minus_div = move |x1: T, x2: T| {
                let base = kfn(x1, x2) * wave * mode(x1, x2);
                if variable {
                    base - half * grad1(x1, x2)
                } else {
                    base
                }
            };
            let coefficients = Coefficients::from_fns(grid, |_, _| c, kfn, nu)?;
            let f = move |x1: T, x2: T, t: T| {
                let (g, _) = flux_profile(nu, omega, t);
                -c * omega * mode(x1, x2) * (omega * t).sin() + minus_div(x1, x2) * g
            };
            let df_dt = move |x1: T, x2: T, t: T| {
                let (_, dg) = flux_profile(nu, omega, t);
                -c * omega * omega * mode(x1, x2) * (omega * t).cos() + minus_div(x1, x2) * dg
            };
            let q1 = move |x1: T, x2: T, t: T| -kfn(x1, x2) * grad1(x1, x2) * flux_profile(nu, omega, t).0;
            let q2 = move |x1: T, x2: T, t: T| -kfn(x1, x2) * grad2(x1, x2) * flux_profile(nu, omega, t).0;
            let g0 = [
                grid.sample_flux(Direction::X1, |x1, x2| q1(x1, x2, T::zero()))?,
                grid.sample_flux(Direction::X2, |x1, x2| q2(x1, x2, T::zero()))?,
            ];
            let exact = ExactSolution::new(move |x1, x2, t| mode(x1, x2) * (omega * t).cos()).with_flux(q1, q2);
            Ok(Problem {
                grid: grid.clone(),
                coefficients,
                v0: grid.sample_scalar(mode)?,
                v1: Some(grid.zero_scalar()),
                g0: Some(g0),
                source: Source::analytic(f, df_dt),
                final_time,
                exact: Some(exact),
            })
        }
        ManufacturedId::M1Homogeneous => {
            let coefficients = Coefficients::constant(grid, c, k, nu)?;
            let g0 = [
                grid.sample_flux(Direction::X1, |x1, x2| -k * grad1(x1, x2))?,
                grid.sample_flux(Direction::X2, |x1, x2| -k * grad2(x1, x2))?,
            ];
            Ok(Problem {
                grid: grid.clone(),
                coefficients,
                v0: grid.sample_scalar(mode)?,
                v1: None,
                g0: Some(g0),
                source: Source::zero(),
                final_time,
                exact: None,
            })
        }
        ManufacturedId::TopMode => {
            let coefficients = Coefficients::constant(grid, c, k, nu)?;
            let m1 = T::from_usize_lossy(grid.n(Direction::X1) - 1);
            let m2 = T::from_usize_lossy(grid.n(Direction::X2) - 1);
            let v0 = grid.sample_scalar(|x1, x2| (m1 * p1 * x1).sin() * (m2 * p2 * x2).sin())?;
            let g0 = [Direction::X1, Direction::X2]
                .map(|d| apply_a(grid, d, &v0).map(|a| a.mul(coefficients.k(d)).scaled(-T::one())));
            let [g1, g2] = g0;
            Ok(Problem {
                grid: grid.clone(),
                v1: Some(grid.zero_scalar()),
                g0: Some([g1?, g2?]),
                coefficients,
                v0,
                source: Source::zero(),
                final_time,
                exact: None,
            })
        }
    }
}

/// Max-norm and `H`-norm of `numeric − reference`.
pub fn solution_error<T: Real>(
    grid: &StaggeredGrid<T>,
    numeric: &ScalarField<T>,
    reference: &ScalarField<T>,
) -> Result<(T, T)> {
    let diff = numeric.sub(reference);
    Ok((diff.max_abs(), grid.norm_h(&diff)?))
}

/// Injection of a fine-grid field onto a coarse grid whose nodes are a subset of the fine nodes.
pub fn restrict_injection<T: Real>(
    fine_grid: &StaggeredGrid<T>,
    fine: &ScalarField<T>,
    coarse_grid: &StaggeredGrid<T>,
) -> Result<ScalarField<T>> {
    fine_grid.check_scalar(fine)?;
    let mut ratio = [0usize; 2];
    for dir in Direction::ALL {
        let (nf, nc) = (fine_grid.n(dir), coarse_grid.n(dir));
        if nf % nc != 0 || fine_grid.l(dir) != coarse_grid.l(dir) {
            return Err(HhcError::InvalidGrid(format!("cannot inject N = {nf} onto N = {nc} along {dir}")));
        }
        ratio[dir.index() - 1] = nf / nc;
    }
    let values = coarse_grid.node_indices().map(|(_, i1, i2)| fine.at(i1 * ratio[0], i2 * ratio[1])).collect();
    coarse_grid.scalar_from_values(values)
}

/// One rung of a refinement ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rung<T> {
    pub n1: usize,
    pub n2: usize,
    pub tau: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow<T> {
    pub h1: T,
    pub h2: T,
    pub tau: T,
    pub error_max: T,
    pub error_l2: T,
    pub order_max: Option<T>,
    pub order_l2: Option<T>,
}

/// Final temperature of a full run.
pub fn solve_to_final_time<T: Real>(problem: &Problem<T>, config: &SchemeConfig<T>) -> Result<ScalarField<T>> {
    let integrator = Integrator::new(problem, config.clone())?;
    let summary = integrator.run(|_| Ok(()))?;
    Ok(summary.final_state.temperature().clone())
}

/// Errors at the final time of one rung against the problem's exact solution.
pub fn rung_errors<T: Real>(problem: &Problem<T>, config: &SchemeConfig<T>) -> Result<ConvergenceRow<T>> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| HhcError::MissingData("convergence study needs an exact solution".into()))?;
    let integrator = Integrator::new(problem, config.clone())?;
    let summary = integrator.run(|_| Ok(()))?;
    let reference = exact.temperature(&problem.grid, problem.final_time)?;
    let (error_max, error_l2) = solution_error(&problem.grid, summary.final_state.temperature(), &reference)?;
    Ok(ConvergenceRow {
        h1: problem.grid.h(Direction::X1),
        h2: problem.grid.h(Direction::X2),
        tau: integrator.tau(),
        error_max,
        error_l2,
        order_max: None,
        order_l2: None,
    })
}

fn is_halving<T: Real>(coarse: T, fine: T) -> bool {
    let r = (coarse / fine).to_f64_lossy();
    (r - 1.0).abs() < 1e-9 || (r - 2.0).abs() < 1e-9
}

/// Fills in observed orders where every changed parameter halves between consecutive rows.
pub fn attach_orders<T: Real>(rows: &mut [ConvergenceRow<T>]) {
    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1], &rows[i]);
        let pairs = [(prev.h1, cur.h1), (prev.h2, cur.h2), (prev.tau, cur.tau)];
        let uniform =
            pairs.iter().all(|&(a, b)| is_halving(a, b)) && pairs.iter().any(|&(a, b)| (a / b).to_f64_lossy() > 1.5);
        let order = |a: T, b: T| (uniform && a > T::zero() && b > T::zero()).then(|| (a / b).log2());
        let (om, ol) = (order(prev.error_max, cur.error_max), order(prev.error_l2, cur.error_l2));
        rows[i].order_max = om;
        rows[i].order_l2 = ol;
    }
}

/// Runs every rung of `ladder` on the problem built for its grid and reports errors and orders.
pub fn convergence_study<T, B>(
    build: B,
    lengths: (T, T),
    config: &SchemeConfig<T>,
    ladder: &[Rung<T>],
) -> Result<Vec<ConvergenceRow<T>>>
where
    T: Real,
    B: Fn(&StaggeredGrid<T>) -> Result<Problem<T>>,
{
    let mut rows = Vec::with_capacity(ladder.len());
    for rung in ladder {
        let grid = StaggeredGrid::new(crate::grid::GridSpec::new(lengths.0, lengths.1, rung.n1, rung.n2))?;
        let problem = build(&grid)?;
        let cfg = SchemeConfig { tau: rung.tau, ..config.clone() };
        rows.push(rung_errors(&problem, &cfg)?);
    }
    attach_orders(&mut rows);
    Ok(rows)
}
