use fraccalderon::fracop::{apply_spectral, assemble_quadrature, cns, oracle_bumps, oracle_discrepancy};
use fraccalderon::grid::{build_grid, Grid, GridSpec, Sel};
use nalgebra::DVector;
use proptest::prelude::*;

// (-Delta)^{1/2} (1 - x^2)_+^{1/2} at x = 0, adaptive mpmath quadrature of the
// principal-value integral (30 digits).
const GETOOR_HALF: f64 = 1.0;

fn getoor_deviation(h: f64) -> f64 {
    let g = build_grid(GridSpec::desk_1d(h)).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let u = g.sample(|p| (1.0 - p[0] * p[0]).max(0.0).sqrt());
    let au = op.apply(&g, &u).unwrap();
    g.interior()
        .iter()
        .map(|&k| g.active()[k])
        .filter(|&i| g.coords()[i][0].abs() < 0.5)
        .map(|i| (au.values[i] - GETOOR_HALF).abs())
        .fold(0.0, f64::max)
}

#[test]
fn getoor_vector_is_flat_inside() {
    let coarse = getoor_deviation(0.04);
    let fine = getoor_deviation(0.02);
    assert!(fine < 5e-4, "{fine}");
    assert!(fine < coarse);
}

#[test]
fn constant_at_one_half() {
    assert!((cns(1, 0.5).unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-15);
}

#[test]
fn half_gaussian_routes_agree_inside() {
    let g = build_grid(GridSpec::desk_1d(0.02)).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let u = g.sample(|p| (-p[0] * p[0] / 2.0).exp());
    let a = op.apply(&g, &u).unwrap();
    let s = apply_spectral(&g, &u, 0.5, 8).unwrap();
    let inner = g.restrict(&s, &Sel::Interior).unwrap();
    let diff = g.restrict(&a, &Sel::Interior).unwrap() - &inner;
    assert!(diff.amax() / inner.amax() < 1e-3, "{}", diff.amax() / inner.amax());
}

#[test]
fn discrepancy_shrinks_under_refinement() {
    for s in [0.25, 0.5, 0.75] {
        let worst = |h: f64| {
            let g = build_grid(GridSpec::desk_1d(h)).unwrap();
            let op = assemble_quadrature(&g, s).unwrap();
            oracle_bumps(&g, 5, 11, (0.1, 0.25))
                .iter()
                .map(|u| oracle_discrepancy(&g, &op, u, 8).unwrap())
                .fold(0.0, f64::max)
        };
        assert!(worst(0.02) < worst(0.04), "s = {s}");
    }
}

fn desk(s: f64) -> (Grid, fraccalderon::fracop::FracOperator) {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let op = assemble_quadrature(&g, s).unwrap();
    (g, op)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_positive_and_symmetric(
        s in 0.1f64..0.95,
        a in prop::collection::vec(-1.0f64..1.0, 80),
        b in prop::collection::vec(-1.0f64..1.0, 80),
    ) {
        let (g, op) = desk(s);
        let u = DVector::from_vec(a);
        let v = DVector::from_vec(b);
        prop_assume!(u.norm() > 1e-3);
        let au = &op.matrix * &u;
        let av = &op.matrix * &v;
        prop_assert!(au.dot(&u) > 0.0);
        let (x, y) = (au.dot(&v), u.dot(&av));
        prop_assert!((x - y).abs() <= 1e-12 * (x.abs() + au.norm() * v.norm()));
        let _ = g;
    }

    #[test]
    fn operator_is_linear(s in 0.1f64..0.95, c in -3.0f64..3.0, shift in -0.5f64..0.5) {
        let (g, op) = desk(s);
        let u = g.sample(|p| (-(p[0] - shift).powi(2)).exp());
        let w = g.sample(|p| p[0].sin());
        let lhs = op.apply(&g, &u.axpy(c, &w)).unwrap();
        let rhs = op.apply(&g, &u).unwrap().axpy(c, &op.apply(&g, &w).unwrap());
        prop_assert!((&lhs.values - &rhs.values).amax() <= 1e-12 * (1.0 + rhs.values.amax()));
    }
}
