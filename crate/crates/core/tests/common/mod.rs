//! Dense reference implementations of every scheme step.
//!
//! Operators are assembled as explicit matrices from their stencil
//! definitions and each scheme is written literally as the linear system it
//! poses at the new time level, then solved by LU. Nothing here calls the
//! crate's operator or solver code.
#![allow(dead_code)]

use hhc_core::grid::{Direction, FluxField, ScalarField, StaggeredGrid};
use hhc_core::schemes::{
    Problem, ReducedOperator, Regularizer, SchemeConfig, SchemeKind, SchemeState, SourceSplit, StaggeredState,
    ThreeLevelState, VectorState,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Dense {
    pub a: [DMatrix<f64>; 2],
    pub c: DVector<f64>,
    pub k: [DVector<f64>; 2],
    pub nodes: usize,
    pub faces: [usize; 2],
}

fn diag(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(v)
}

fn inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().lu().try_inverse().expect("invertible")
}

fn solve(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    m.clone().lu().solve(b).expect("nonsingular")
}

pub fn vec_of(f: &ScalarField<f64>) -> DVector<f64> {
    DVector::from_column_slice(f.as_slice())
}

pub fn vec_of_flux(f: &FluxField<f64>) -> DVector<f64> {
    DVector::from_column_slice(f.as_slice())
}

impl Dense {
    /// `A_α` from the forward-difference stencil with zero boundary temperatures.
    pub fn new(grid: &StaggeredGrid<f64>, problem: &Problem<f64>) -> Self {
        let (m1, m2) = grid.node_shape();
        let node =
            |i1: usize, i2: usize| (i1 >= 1 && i1 <= m1 && i2 >= 1 && i2 <= m2).then(|| (i1 - 1) * m2 + (i2 - 1));
        let build = |dir: Direction| {
            let h = grid.h(dir);
            let mut a = DMatrix::zeros(grid.flux_count(dir), grid.node_count());
            for (row, i1, i2) in grid.flux_indices(dir) {
                let (plus, minus) = match dir {
                    Direction::X1 => (node(i1 + 1, i2), node(i1, i2)),
                    Direction::X2 => (node(i1, i2 + 1), node(i1, i2)),
                };
                if let Some(col) = plus {
                    a[(row, col)] += 1.0 / h;
                }
                if let Some(col) = minus {
                    a[(row, col)] -= 1.0 / h;
                }
            }
            a
        };
        let coeff = &problem.coefficients;
        Self {
            a: [build(Direction::X1), build(Direction::X2)],
            c: vec_of(coeff.c()),
            k: [vec_of_flux(coeff.k(Direction::X1)), vec_of_flux(coeff.k(Direction::X2))],
            nodes: grid.node_count(),
            faces: [grid.flux_count(Direction::X1), grid.flux_count(Direction::X2)],
        }
    }

    /// `A*_α`: with both inner products weighted by `h1 h2`, the adjoint is the transpose.
    pub fn a_star(&self, alpha: usize) -> DMatrix<f64> {
        self.a[alpha].transpose()
    }

    pub fn d(&self) -> DMatrix<f64> {
        (0..2)
            .map(|i| self.a_star(i) * diag(&self.k[i]) * &self.a[i])
            .fold(DMatrix::zeros(self.nodes, self.nodes), |s, m| s + m)
    }

    pub fn unit_laplacian(&self) -> DMatrix<f64> {
        (0..2).map(|i| self.a_star(i) * &self.a[i]).fold(DMatrix::zeros(self.nodes, self.nodes), |s, m| s + m)
    }

    pub fn q(&self, sigma: f64, tau: f64) -> DMatrix<f64> {
        let id = DMatrix::identity(self.nodes, self.nodes);
        let f2 = &id + self.a_star(1) * &self.a[1] * (0.5 * sigma * tau * tau);
        let f1 = &id + self.a_star(0) * &self.a[0] * (sigma * tau * tau);
        &f2 * f1 * &f2
    }

    /// `(k⁻¹E + στ² A_α A*_α)⁻¹`.
    pub fn flux_perturbation_inverse(&self, alpha: usize, sigma: f64, tau: f64) -> DMatrix<f64> {
        let m = diag(&self.k[alpha].map(|v| 1.0 / v)) + &self.a[alpha] * self.a_star(alpha) * (sigma * tau * tau);
        inv(&m)
    }

    pub fn c_op(&self, sigma: f64, tau: f64) -> DMatrix<f64> {
        (0..2)
            .map(|i| self.a_star(i) * self.flux_perturbation_inverse(i, sigma, tau) * &self.a[i])
            .fold(DMatrix::zeros(self.nodes, self.nodes), |s, m| s + m)
    }

    pub fn sqrt_c(&self) -> DMatrix<f64> {
        diag(&self.c.map(f64::sqrt))
    }

    pub fn regularizer(&self, which: Regularizer, sigma: f64, tau: f64) -> DMatrix<f64> {
        let lambda = match which {
            Regularizer::Unit => self.unit_laplacian(),
            Regularizer::Conductivity => self.d(),
        };
        DMatrix::identity(self.nodes, self.nodes) + lambda * (sigma * tau * tau)
    }
}

/// Random field with entries in `[-1, 1]`.
pub fn random_scalar(grid: &StaggeredGrid<f64>, rng: &mut ChaCha8Rng) -> ScalarField<f64> {
    grid.scalar_from_values((0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_flux(grid: &StaggeredGrid<f64>, dir: Direction, rng: &mut ChaCha8Rng) -> FluxField<f64> {
    grid.flux_from_values(dir, (0..grid.flux_count(dir)).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Random state of the right shape for `kind` at level `n`.
pub fn random_state(
    kind: SchemeKind,
    grid: &StaggeredGrid<f64>,
    n: usize,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> SchemeState<f64> {
    use hhc_core::schemes::SchemeFamily::*;
    let t = n as f64 * tau;
    match kind.family() {
        ThreeLevel => SchemeState::ThreeLevel(ThreeLevelState {
            u_prev: random_scalar(grid, rng),
            u_curr: random_scalar(grid, rng),
            n,
            t,
        }),
        Staggered => SchemeState::Staggered(StaggeredState {
            u_prev: random_scalar(grid, rng),
            u: random_scalar(grid, rng),
            q: [random_flux(grid, Direction::X1, rng), random_flux(grid, Direction::X2, rng)],
            n,
            t,
        }),
        System | Componentwise => SchemeState::Vector(VectorState {
            q: [random_flux(grid, Direction::X1, rng), random_flux(grid, Direction::X2, rng)],
            u: random_scalar(grid, rng),
            n,
            t,
        }),
    }
}

/// All unknowns of a state, temperature first then fluxes.
pub fn flatten(state: &SchemeState<f64>) -> DVector<f64> {
    let mut v: Vec<f64> = state.temperature().as_slice().to_vec();
    if let Some(q) = state.flux() {
        v.extend_from_slice(q[0].as_slice());
        v.extend_from_slice(q[1].as_slice());
    }
    DVector::from_vec(v)
}

fn src(problem: &Problem<f64>, t: f64) -> DVector<f64> {
    vec_of(&problem.f(t).unwrap())
}

/// The new state's unknowns (as in [`flatten`]) after one step of `config.kind`.
pub fn dense_step(state: &SchemeState<f64>, config: &SchemeConfig<f64>, problem: &Problem<f64>) -> DVector<f64> {
    let d = Dense::new(&problem.grid, problem);
    let nu = problem.coefficients.nu();
    let (sigma, tau) = (config.sigma, config.tau);
    let cm = diag(&d.c);
    let n = state.level();
    let t = n as f64 * tau;
    let nodal_phi = || src(problem, t) + (src(problem, t + tau) - src(problem, t - tau)) * (nu / (2.0 * tau));
    let staggered_phi = || {
        let (fp, fm) = (src(problem, t + 0.5 * tau), src(problem, t - 0.5 * tau));
        (&fp + &fm) * 0.5 + (fp - fm) * (nu / tau)
    };
    // ν K (u⁺ − 2u + u⁻)/τ² + K (u⁺ − u⁻)/(2τ) + L (σw u⁺ + (1−2σw) u + σw u⁻) = φ, solved for u⁺.
    let three_level =
        |k: &DMatrix<f64>, l: &DMatrix<f64>, sw: f64, up: &DVector<f64>, u: &DVector<f64>, phi: DVector<f64>| {
            let lhs = k * (nu / (tau * tau) + 0.5 / tau) + l * sw;
            let rhs = phi
                - k * ((u * -2.0 + up) * (nu / (tau * tau)) - up * (0.5 / tau))
                - l * (u * (1.0 - 2.0 * sw) + up * sw);
            solve(&lhs, &rhs)
        };
    let sc = d.sqrt_c();

    match (config.kind, state) {
        (kind, SchemeState::ThreeLevel(s)) => {
            let (up, u) = (vec_of(&s.u_prev), vec_of(&s.u_curr));
            let out = match kind {
                SchemeKind::ThreeLevelWeighted => three_level(&cm, &d.d(), sigma, &up, &u, nodal_phi()),
                SchemeKind::ThreeLevelExplicit => three_level(&cm, &d.d(), 0.0, &up, &u, nodal_phi()),
                SchemeKind::LodQ => three_level(&(&sc * d.q(sigma, tau) * &sc), &d.d(), 0.0, &up, &u, staggered_phi()),
                SchemeKind::LodC => three_level(&cm, &d.c_op(sigma, tau), 0.0, &up, &u, staggered_phi()),
                SchemeKind::ThreeLevelRegularized => three_level(
                    &(&sc * d.regularizer(config.regularizer, sigma, tau) * &sc),
                    &d.d(),
                    0.0,
                    &up,
                    &u,
                    staggered_phi(),
                ),
                other => panic!("{other} is not three-level"),
            };
            out
        }
        (kind, SchemeState::Staggered(s)) => {
            let (up, u) = (vec_of(&s.u_prev), vec_of(&s.u));
            let q = [vec_of_flux(&s.q[0]), vec_of_flux(&s.q[1])];
            let f_half = src(problem, t + 0.5 * tau);
            // (q⁺ + q⁻)/2 + ν (q⁺ − q⁻)/τ + drive = 0.
            let relax = |qm: &DVector<f64>, drive: DVector<f64>| (qm * (nu / tau - 0.5) - drive) / (nu / tau + 0.5);
            let (u_new, q_new) = if kind == SchemeKind::StaggeredWeightedFlux {
                // Coupled block system in (q1⁺, q2⁺, u⁺).
                let (f1, f2, nn) = (d.faces[0], d.faces[1], d.nodes);
                let size = f1 + f2 + nn;
                let mut m = DMatrix::zeros(size, size);
                let mut rhs = DVector::zeros(size);
                let offs = [0, f1];
                for a in 0..2 {
                    let fa = d.faces[a];
                    let ka = diag(&d.k[a]);
                    let o = offs[a];
                    for i in 0..fa {
                        m[(o + i, o + i)] = 0.5 + nu / tau;
                    }
                    m.view_mut((o, f1 + f2), (fa, nn)).copy_from(&(&ka * &d.a[a] * sigma));
                    let r = &q[a] * (nu / tau - 0.5) - &ka * &d.a[a] * (&u * (1.0 - 2.0 * sigma) + &up * sigma);
                    rhs.rows_mut(o, fa).copy_from(&r);
                    m.view_mut((f1 + f2, o), (nn, fa)).copy_from(&(-d.a_star(a)));
                }
                m.view_mut((f1 + f2, f1 + f2), (nn, nn)).copy_from(&(&cm / tau));
                rhs.rows_mut(f1 + f2, nn).copy_from(&(&cm * &u / tau + &f_half));
                let x = solve(&m, &rhs);
                (x.rows(f1 + f2, nn).into_owned(), [x.rows(0, f1).into_owned(), x.rows(f1, f2).into_owned()])
            } else {
                let q_new: Vec<DVector<f64>> = (0..2)
                    .map(|a| {
                        let drive = if kind == SchemeKind::StaggeredFluxPerturbed {
                            d.flux_perturbation_inverse(a, sigma, tau) * &d.a[a] * &u
                        } else {
                            diag(&d.k[a]) * &d.a[a] * &u
                        };
                        relax(&q[a], drive)
                    })
                    .collect();
                let div = d.a_star(0) * &q_new[0] + d.a_star(1) * &q_new[1];
                let time_op = match kind {
                    SchemeKind::StaggeredRegularized => &sc * d.regularizer(config.regularizer, sigma, tau) * &sc,
                    SchemeKind::StaggeredAdditiveQ => &sc * d.q(sigma, tau) * &sc,
                    _ => cm.clone(),
                };
                // K (u⁺ − u)/τ − Σ A*_α q_α⁺ = f^{n+1/2}.
                let u_new = &u + solve(&time_op, &(div + f_half)) * tau;
                (u_new, [q_new[0].clone(), q_new[1].clone()])
            };
            let mut v = u_new.as_slice().to_vec();
            v.extend_from_slice(q_new[0].as_slice());
            v.extend_from_slice(q_new[1].as_slice());
            DVector::from_vec(v)
        }
        (kind, SchemeState::Vector(s)) => {
            let (f1, f2, nn) = (d.faces[0], d.faces[1], d.nodes);
            let size = f1 + f2 + nn;
            let y = DVector::from_iterator(
                size,
                s.q[0].as_slice().iter().chain(s.q[1].as_slice()).chain(s.u.as_slice()).copied(),
            );
            let kinv = [diag(&d.k[0].map(|v| 1.0 / v)), diag(&d.k[1].map(|v| 1.0 / v))];
            let mut b = DMatrix::zeros(size, size);
            b.view_mut((0, 0), (f1, f1)).copy_from(&(&kinv[0] * nu));
            b.view_mut((f1, f1), (f2, f2)).copy_from(&(&kinv[1] * nu));
            b.view_mut((f1 + f2, f1 + f2), (nn, nn)).copy_from(&cm);
            let offs = [0, f1];
            let coupling = |a: usize| {
                let mut m = DMatrix::zeros(size, size);
                m.view_mut((offs[a], f1 + f2), (d.faces[a], nn)).copy_from(&d.a[a]);
                m.view_mut((f1 + f2, offs[a]), (nn, d.faces[a])).copy_from(&(-d.a_star(a)));
                m
            };
            let damping = |w: f64| {
                let mut m = DMatrix::zeros(size, size);
                m.view_mut((0, 0), (f1, f1)).copy_from(&(&kinv[0] * w));
                m.view_mut((f1, f1), (f2, f2)).copy_from(&(&kinv[1] * w));
                m
            };
            let f_half = src(problem, t + 0.5 * tau);
            let mut forcing = DVector::zeros(size);
            forcing.rows_mut(f1 + f2, nn).copy_from(&f_half);
            let x = match kind {
                SchemeKind::SystemWeighted => {
                    // B (x − y)/τ + A (σ x + (1 − σ) y) = F, with the flux rows scaled by k⁻¹.
                    let a_full = coupling(0) + coupling(1) + damping(1.0);
                    let a_used = match config.reduced_operator {
                        ReducedOperator::Conductivity => a_full,
                        ReducedOperator::Unit => panic!("the dense oracle solves the unreduced system"),
                    };
                    let lhs = &b / tau + &a_used * sigma;
                    let rhs = &b * &y / tau - &a_used * &y * (1.0 - sigma) + forcing;
                    solve(&lhs, &rhs)
                }
                SchemeKind::SplitComponentwiseP2 | SchemeKind::SplitComponentwiseP3 => {
                    let ops: Vec<DMatrix<f64>> = if kind == SchemeKind::SplitComponentwiseP3 {
                        vec![coupling(0), coupling(1), damping(1.0)]
                    } else {
                        vec![coupling(0) + damping(0.5), coupling(1) + damping(0.5)]
                    };
                    let p = ops.len();
                    let order: Vec<usize> = (0..p).chain((0..p).rev()).collect();
                    let mut x = y.clone();
                    for (i, &op) in order.iter().enumerate() {
                        let share = match config.source_split {
                            SourceSplit::Even => 1.0 / (2 * p) as f64,
                            SourceSplit::First => {
                                if i == 0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                        };
                        // B (x⁺ − x)/τ + ½ (½ A(α)) (x⁺ + x) = f_α.
                        let half = &ops[op] * 0.5;
                        let lhs = &b / tau + &half * 0.5;
                        let rhs = &b * &x / tau - &half * &x * 0.5 + &forcing * share;
                        x = solve(&lhs, &rhs);
                    }
                    x
                }
                other => panic!("{other} is not a vector scheme"),
            };
            let mut v = x.rows(f1 + f2, nn).as_slice().to_vec();
            v.extend_from_slice(x.rows(0, f1 + f2).as_slice());
            DVector::from_vec(v)
        }
    }
}

/// Relative max-norm distance.
pub fn relative_gap(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}
