use fraccalderon::dirichlet::{DirichletSystem, Potential, DEFAULT_EIG_TOL};
use fraccalderon::fracop::assemble_quadrature;
use fraccalderon::grid::{build_grid, GridSpec, Sel};
use fraccalderon::Error;
use nalgebra::DVector;
use proptest::prelude::*;

// continuum first eigenvalue of (-Delta)^{1/2} on (-1,1)
const LAMBDA1_HALF: f64 = 1.1577738;

#[test]
fn first_eigenvalue_converges() {
    let mut prev = 0.0;
    for h in [0.04, 0.02] {
        let g = build_grid(GridSpec::desk_1d(h)).unwrap();
        let op = assemble_quadrature(&g, 0.5).unwrap();
        let sys = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
        let l1 = sys.spectrum().unwrap().lambda1();
        assert!((l1 - LAMBDA1_HALF).abs() < (prev - LAMBDA1_HALF).abs() || prev == 0.0);
        prev = l1;
    }
    assert!((prev - LAMBDA1_HALF).abs() / LAMBDA1_HALF < 0.02, "{prev}");
}

#[test]
fn window_indicator_gives_positive_solution() {
    let g = build_grid(GridSpec::desk_1d(0.02)).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let sys = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
    let w1 = g.window("W1").unwrap();
    let f = DVector::from_iterator(
        g.exterior().len(),
        g.exterior().iter().map(|k| if w1.contains(k) { 1.0 } else { 0.0 }),
    );
    let u = g.restrict(&sys.solve_poisson(&f).unwrap(), &Sel::Interior).unwrap();
    assert!(u.iter().all(|&v| v > 0.0));
}

#[test]
fn resonant_potential_is_singular() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let l1 = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap().spectrum().unwrap().lambda1();
    let sys = DirichletSystem::new(&g, &op, Potential::constant(&g, -l1)).unwrap();
    let f = DVector::from_element(g.exterior().len(), 1.0);
    assert!(matches!(sys.solve_poisson(&f), Err(Error::Singular { .. })));
}

#[test]
fn stability_bound_holds() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let sys = DirichletSystem::new(&g, &op, Potential::gaussian(&g, 0.8, [0.1, 0.0], 0.3)).unwrap();
    let c = sys.stability_constant().unwrap();
    let n = g.interior().len();
    for k in 0..5 {
        let f = DVector::from_fn(n, |i, _| ((i * (k + 3)) as f64 * 0.37).sin());
        let u = g.restrict(&sys.solve_source(&f).unwrap(), &Sel::Interior).unwrap();
        assert!(u.norm() <= c * f.norm() * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn nonnegative_potentials_are_well_posed(vals in prop::collection::vec(0.0f64..5.0, 40)) {
        let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
        let op = assemble_quadrature(&g, 0.5).unwrap();
        let sys = DirichletSystem::new(&g, &op, Potential::new(&g, DVector::from_vec(vals)).unwrap()).unwrap();
        let c = sys.check_condition(DEFAULT_EIG_TOL).unwrap();
        prop_assert!(c.ok);
        prop_assert!(sys.spectrum().unwrap().lambda1() > 0.0);
    }

    #[test]
    fn exterior_data_is_honoured(seed in 0u64..1000, amp in -2.0f64..2.0) {
        let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
        let op = assemble_quadrature(&g, 0.25).unwrap();
        let sys = DirichletSystem::new(&g, &op, Potential::constant(&g, amp.abs())).unwrap();
        let f = DVector::from_fn(g.exterior().len(), |i, _| ((i as u64 * 31 + seed) % 17) as f64 - 8.0);
        let u = sys.solve_poisson(&f).unwrap();
        prop_assert_eq!(g.restrict(&u, &Sel::ExteriorSupport).unwrap(), f);
        // residual of the interior equation
        let r = sys.apply_full(&u).unwrap();
        let inner = g.interior().iter().map(|&k| r[k].abs()).fold(0.0, f64::max);
        prop_assert!(inner <= 1e-10 * (1.0 + op.matrix.amax() * u.values.amax()));
    }
}
