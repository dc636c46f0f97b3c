use fraccalderon::dirichlet::{DirichletSystem, Potential};
use fraccalderon::fracop::assemble_quadrature;
use fraccalderon::grid::{build_grid, GridSpec, Sel, Shape};
use fraccalderon::runge::{adjoint_apply, runge_approximate, sweep, ControlProblem, RungeMap, DENSE_WINDOW_LIMIT};
use nalgebra::DVector;
use proptest::prelude::*;

// attainable level for sign(x) at alpha = 1e-10, s = 0.5, h = 0.02, W1; frozen
// from the first converged sweep (0.3905)
const SIGN_TARGET_LEVEL: f64 = 0.40;

fn sign_target(g: &fraccalderon::grid::Grid) -> DVector<f64> {
    DVector::from_iterator(g.interior().len(), g.interior().iter().map(|&k| g.active_coord(k)[0].signum()))
}

#[test]
fn residual_decreases_along_alpha_path() {
    let g = build_grid(GridSpec::desk_1d(0.02)).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let sys = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
    let target = DVector::from_element(g.interior().len(), 1.0);
    let alphas: Vec<f64> = (2..=10).map(|k| 10f64.powi(-k)).collect();
    let pts = sweep(&sys, &Sel::window("W1"), &target, &alphas).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].residual < w[0].residual, "{:?}", w);
        assert!(w[1].control_norm > w[0].control_norm);
    }
}

#[test]
fn sign_target_level_and_window_enlargement() {
    let spec = GridSpec::desk_1d(0.02).with_window("wide", Shape::Interval { a: 1.0, b: 2.0 });
    let g = build_grid(spec).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let sys = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
    let t = sign_target(&g);
    let narrow = RungeMap::new(&sys, &Sel::window("W1")).unwrap().solve(&t, 1e-10).unwrap();
    let wide = RungeMap::new(&sys, &Sel::window("wide")).unwrap().solve(&t, 1e-10).unwrap();
    assert!(narrow.relative_residual <= SIGN_TARGET_LEVEL, "{}", narrow.relative_residual);
    assert!(wide.relative_residual < narrow.relative_residual);
}

#[test]
fn matrix_free_path_matches_dense() {
    let g = build_grid(GridSpec::desk_1d(0.004)).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let sys = DirichletSystem::new(&g, &op, Potential::constant(&g, 0.5)).unwrap();
    assert!(g.exterior().len() > DENSE_WINDOW_LIMIT);
    let target = DVector::from_iterator(g.interior().len(), g.interior().iter().map(|&k| (2.0 * g.active_coord(k)[0]).cos()));
    let alpha = 1e-4;
    let p = ControlProblem {
        sys: &sys,
        window: Sel::ExteriorSupport,
        target: target.clone(),
        alpha,
    };
    let cg = runge_approximate(&p).unwrap();
    let dense = RungeMap::new(&sys, &Sel::ExteriorSupport).unwrap().solve(&target, alpha).unwrap();
    assert!((&cg.achieved - &dense.achieved).norm() <= 1e-6 * dense.achieved.norm());
    assert!((cg.relative_residual - dense.relative_residual).abs() <= 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn optimum_is_stationary(alpha_exp in 2i32..9, amp in 0.0f64..1.0, k in 1.0f64..4.0) {
        let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
        let op = assemble_quadrature(&g, 0.5).unwrap();
        let sys = DirichletSystem::new(&g, &op, Potential::constant(&g, amp)).unwrap();
        let target = DVector::from_iterator(g.interior().len(), g.interior().iter().map(|&n| (k * g.active_coord(n)[0]).sin() + 0.3));
        let alpha = 10f64.powi(-alpha_exp);
        let sol = RungeMap::new(&sys, &Sel::window("W1")).unwrap().solve(&target, alpha).unwrap();
        let grad = adjoint_apply(&sys, &(&sol.achieved - &target), &Sel::window("W1")).unwrap();
        let lhs = &grad + &sol.control * alpha;
        prop_assert!(lhs.amax() <= 1e-8 * (grad.amax() + alpha * sol.control.amax()).max(1e-14));
    }

    #[test]
    fn larger_window_never_hurts(alpha_exp in 2i32..11, b in 1.85f64..2.0) {
        let spec = GridSpec::desk_1d(0.05).with_window("big", Shape::Interval { a: 1.1, b });
        let g = build_grid(spec).unwrap();
        let op = assemble_quadrature(&g, 0.5).unwrap();
        let sys = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
        let target = DVector::from_element(g.interior().len(), 1.0);
        let alpha = 10f64.powi(-alpha_exp);
        let small = RungeMap::new(&sys, &Sel::window("W1")).unwrap().solve(&target, alpha).unwrap();
        let big = RungeMap::new(&sys, &Sel::window("big")).unwrap().solve(&target, alpha).unwrap();
        // the Tikhonov objective, not the residual alone, is monotone in the window
        let obj = |r: &fraccalderon::runge::RungeSolution| r.residual.powi(2) + alpha * g.cell_volume() * r.control.norm_squared();
        prop_assert!(obj(&big) <= obj(&small) * (1.0 + 1e-9));
    }
}
