use fraccalderon::dirichlet::{DirichletSystem, Potential};
use fraccalderon::dnmap::{assemble_dn, dn_decomposition_check, dn_pointwise, integral_identity};
use fraccalderon::fracop::assemble_quadrature;
use fraccalderon::grid::{build_grid, GridSpec, Sel};
use nalgebra::DVector;
use proptest::prelude::*;

fn bump_on_w1(g: &fraccalderon::grid::Grid) -> DVector<f64> {
    DVector::from_iterator(
        g.exterior().len(),
        g.exterior().iter().map(|&k| {
            let x = g.active_coord(k)[0];
            if (1.2..1.8).contains(&x) {
                (-(x - 1.5).powi(2) / 0.02).exp()
            } else {
                0.0
            }
        }),
    )
}

#[test]
fn different_potentials_differ_and_satisfy_identity() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let s0 = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
    let s1 = DirichletSystem::new(&g, &op, Potential::constant(&g, 1.0)).unwrap();
    let d0 = assemble_dn(&s0, &Sel::window("W1"), &Sel::window("W2")).unwrap().matrix;
    let d1 = assemble_dn(&s1, &Sel::window("W1"), &Sel::window("W2")).unwrap().matrix;
    assert!((&d1 - &d0).norm() > 0.0);
    let f1 = bump_on_w1(&g);
    let f2 = DVector::from_fn(g.exterior().len(), |i, _| (i as f64 * 0.2).cos());
    let id = integral_identity(&s1, &s0, &f1, &f2).unwrap();
    assert!(id.residual <= 1e-10 * id.lhs.abs().max(1e-300), "{id:?}");
    let swapped = integral_identity(&s0, &s1, &f1, &f2).unwrap();
    assert!((swapped.lhs + id.lhs).abs() <= 1e-12 * id.lhs.abs());
}

#[test]
fn disjoint_readout_is_negative() {
    let g = build_grid(GridSpec::desk_1d(0.02)).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let sys = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
    let dn = dn_pointwise(&sys, &bump_on_w1(&g)).unwrap();
    let w2 = g.window("W2").unwrap();
    for (i, &k) in g.exterior().iter().enumerate() {
        if w2.contains(&k) {
            assert!(dn[i] < 0.0, "node {k}: {}", dn[i]);
        }
    }
}

#[test]
fn assembly_is_deterministic() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let op = assemble_quadrature(&g, 0.75).unwrap();
    let q = Potential::gaussian(&g, 0.5, [0.0, 0.0], 0.4);
    let a = assemble_dn(&DirichletSystem::new(&g, &op, q.clone()).unwrap(), &Sel::window("W1"), &Sel::window("W2")).unwrap();
    let b = assemble_dn(&DirichletSystem::new(&g, &op, q).unwrap(), &Sel::window("W1"), &Sel::window("W2")).unwrap();
    assert_eq!(a.matrix, b.matrix);
    assert_eq!(a.potential_fingerprint, b.potential_fingerprint);
}

#[test]
fn interior_source_is_rejected() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let op = assemble_quadrature(&g, 0.5).unwrap();
    let sys = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
    assert!(assemble_dn(&sys, &Sel::Interior, &Sel::window("W2")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn discrete_identities_hold(
        s in 0.15f64..0.9,
        amp in -0.5f64..2.0,
        centre in -0.5f64..0.5,
        a in prop::collection::vec(-1.0f64..1.0, 40),
        b in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
        let op = assemble_quadrature(&g, s).unwrap();
        let sys1 = DirichletSystem::new(&g, &op, Potential::gaussian(&g, amp, [centre, 0.0], 0.3)).unwrap();
        let sys2 = DirichletSystem::new(&g, &op, Potential::constant(&g, 0.2)).unwrap();
        let f1 = DVector::from_vec(a);
        let f2 = DVector::from_vec(b);

        let full = assemble_dn(&sys1, &Sel::ExteriorSupport, &Sel::ExteriorSupport).unwrap().matrix;
        prop_assert!((&full - full.transpose()).amax() <= 1e-10 * full.amax());

        let pw = dn_pointwise(&sys1, &f1).unwrap();
        let via = &full * &f1;
        prop_assert!((&pw - &via).amax() <= 1e-10 * via.amax());

        prop_assert!(dn_decomposition_check(&sys1, &f1).unwrap() <= 1e-10 * pw.amax());

        let id = integral_identity(&sys1, &sys2, &f1, &f2).unwrap();
        let scale = (&assemble_dn(&sys1, &Sel::ExteriorSupport, &Sel::ExteriorSupport).unwrap().matrix * &f1).norm() * f2.norm();
        prop_assert!(id.residual <= 1e-10 * scale.max(id.lhs.abs()));
    }
}
