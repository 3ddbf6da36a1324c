mod common;

use common::{random_scalar, random_state};
use hhc_core::diagnostics::{equivalence_residual, manufactured_problem, ManufacturedId, ManufacturedParams};
use hhc_core::grid::{GridSpec, ScalarField, StaggeredGrid};
use hhc_core::schemes::{
    three_level_form, Integrator, Problem, SchemeConfig, SchemeKind, SchemeState, Source, ThreeLevelState,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(n: usize) -> StaggeredGrid<f64> {
    StaggeredGrid::new(GridSpec::new(1.0, 1.0, n, n)).unwrap()
}

fn trajectory(problem: &Problem<f64>, cfg: SchemeConfig<f64>) -> (Vec<ScalarField<f64>>, SchemeConfig<f64>) {
    let integ = Integrator::new(problem, cfg).unwrap();
    let mut traj = vec![problem.v0.clone()];
    integ
        .run(|s| {
            traj.push(s.temperature().clone());
            Ok(())
        })
        .unwrap();
    (traj, integ.config().clone())
}

fn m1(n: usize, steps: usize, tau: f64) -> Problem<f64> {
    let params = ManufacturedParams { final_time: steps as f64 * tau, ..Default::default() };
    manufactured_problem(ManufacturedId::M1, &grid(n), &params).unwrap()
}

#[test]
fn staggered_explicit_temperatures_satisfy_the_explicit_three_level_scheme() {
    let p = m1(8, 20, 0.02);
    let (traj, cfg) = trajectory(&p, SchemeConfig::new(SchemeKind::StaggeredExplicit, 0.0, 0.02));
    let form = three_level_form(SchemeKind::StaggeredExplicit).unwrap();
    let r = equivalence_residual(&form, &traj, 0, &cfg, &p).unwrap();
    assert!(r <= 1e-11, "{r:e}");
}

#[test]
fn regularized_staggered_temperatures_satisfy_the_regularized_three_level_scheme() {
    let p = m1(8, 20, 0.05);
    let cfg = SchemeConfig::new(SchemeKind::StaggeredRegularized, 0.5, 0.05).with_tol(1e-15);
    let (traj, cfg) = trajectory(&p, cfg);
    let form = three_level_form(SchemeKind::ThreeLevelRegularized).unwrap();
    let r = equivalence_residual(&form, &traj, 0, &cfg, &p).unwrap();
    assert!(r <= 1e-11, "{r:e}");
}

#[test]
fn weighted_flux_and_additive_q_satisfy_their_three_level_forms() {
    for (kind, target) in [
        (SchemeKind::StaggeredWeightedFlux, SchemeKind::StaggeredWeightedFlux),
        (SchemeKind::StaggeredAdditiveQ, SchemeKind::LodQ),
        (SchemeKind::StaggeredFluxPerturbed, SchemeKind::LodC),
    ] {
        let p = m1(6, 20, 0.05);
        let cfg = SchemeConfig::new(kind, 0.6, 0.05).with_tol(1e-15);
        let (traj, cfg) = trajectory(&p, cfg);
        let form = three_level_form(target).unwrap();
        let r = equivalence_residual(&form, &traj, 0, &cfg, &p).unwrap();
        assert!(r <= 1e-11, "{kind}: {r:e}");
    }
}

/// Runs a three-level kind from the staggered run's first two levels.
fn matched_start_pair(staggered: SchemeKind, three_level: SchemeKind, sigma: f64) -> f64 {
    let p = m1(8, 40, 0.05);
    let (traj, cfg) = trajectory(&p, SchemeConfig::new(staggered, sigma, 0.05));
    let lod_cfg = SchemeConfig { kind: three_level, ..cfg };
    let integ = Integrator::new(&p, lod_cfg).unwrap();
    let mut state = SchemeState::ThreeLevel(ThreeLevelState {
        u_prev: traj[0].clone(),
        u_curr: traj[1].clone(),
        n: 1,
        t: integ.tau(),
    });
    let mut worst: f64 = 0.0;
    for expected in &traj[2..] {
        state = integ.step(&state).unwrap().state;
        worst = worst.max(state.temperature().sub(expected).max_abs() / expected.max_abs());
    }
    worst
}

#[test]
fn flux_perturbed_and_lod_c_coincide_under_matched_starts() {
    let gap = matched_start_pair(SchemeKind::StaggeredFluxPerturbed, SchemeKind::LodC, 0.5);
    assert!(gap <= 1e-10, "{gap:e}");
}

#[test]
fn additive_q_and_lod_q_coincide_under_matched_starts() {
    let gap = matched_start_pair(SchemeKind::StaggeredAdditiveQ, SchemeKind::LodQ, 0.25);
    assert!(gap <= 1e-10, "{gap:e}");
}

fn affine_problem(base: ScalarField<f64>, rate: ScalarField<f64>, g: &StaggeredGrid<f64>) -> Problem<f64> {
    Problem {
        grid: g.clone(),
        coefficients: hhc_core::operators::Coefficients::from_fns(g, |x1, _| 1.0 + x1, |_, x2| 1.0 + x2, 0.7).unwrap(),
        v0: g.zero_scalar(),
        v1: Some(g.zero_scalar()),
        g0: None,
        source: Source::affine(base, rate),
        final_time: 10.0,
        exact: None,
    }
}

fn combine(a: &SchemeState<f64>, x: f64, b: &SchemeState<f64>, y: f64) -> SchemeState<f64> {
    match (a, b) {
        (SchemeState::ThreeLevel(s), SchemeState::ThreeLevel(t)) => SchemeState::ThreeLevel(ThreeLevelState {
            u_prev: s.u_prev.lin_comb(x, &t.u_prev, y),
            u_curr: s.u_curr.lin_comb(x, &t.u_curr, y),
            ..s.clone()
        }),
        (SchemeState::Staggered(s), SchemeState::Staggered(t)) => {
            SchemeState::Staggered(hhc_core::schemes::StaggeredState {
                u_prev: s.u_prev.lin_comb(x, &t.u_prev, y),
                u: s.u.lin_comb(x, &t.u, y),
                q: [s.q[0].lin_comb(x, &t.q[0], y), s.q[1].lin_comb(x, &t.q[1], y)],
                ..s.clone()
            })
        }
        (SchemeState::Vector(s), SchemeState::Vector(t)) => SchemeState::Vector(hhc_core::schemes::VectorState {
            u: s.u.lin_comb(x, &t.u, y),
            q: [s.q[0].lin_comb(x, &t.q[0], y), s.q[1].lin_comb(x, &t.q[1], y)],
            ..s.clone()
        }),
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_step_is_linear_in_state_and_source(seed in 0u64..10_000, kind_idx in 0usize..13, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let kind = SchemeKind::ALL[kind_idx];
        let g = grid(5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b1, r1, b2, r2) = (random_scalar(&g, &mut rng), random_scalar(&g, &mut rng), random_scalar(&g, &mut rng), random_scalar(&g, &mut rng));
        let p1 = affine_problem(b1.clone(), r1.clone(), &g);
        let p2 = affine_problem(b2.clone(), r2.clone(), &g);
        let p12 = affine_problem(b1.lin_comb(x, &b2, y), r1.lin_comb(x, &r2, y), &g);
        let cfg = SchemeConfig::new(kind, 0.6, 0.1).with_tol(1e-15).with_override(true);
        let s1 = random_state(kind, &g, 2, 0.1, &mut rng);
        let s2 = random_state(kind, &g, 2, 0.1, &mut rng);
        let step = |p: &Problem<f64>, s: &SchemeState<f64>| Integrator::new(p, cfg.clone()).unwrap().step(s).unwrap().state;
        let lhs = step(&p12, &combine(&s1, x, &s2, y));
        let rhs = combine(&step(&p1, &s1), x, &step(&p2, &s2), y);
        let scale = rhs.temperature().max_abs().max(1.0);
        prop_assert!(lhs.temperature().sub(rhs.temperature()).max_abs() <= 1e-11 * scale);
    }
}
