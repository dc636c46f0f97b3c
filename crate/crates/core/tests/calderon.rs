use fraccalderon::calderon::{
    add_relative_noise, reconstruct_potential, relative_error, simulate_measurements, ReconMode, ReconOptions,
};
use fraccalderon::dirichlet::{DirichletSystem, Potential};
use fraccalderon::fracop::assemble_quadrature;
use fraccalderon::grid::{build_grid, Grid, GridSpec, Sel, Shape};
use fraccalderon::runge::RungeMap;
use fraccalderon::Error;
use nalgebra::DVector;

// frozen from the first converged runs of the desk case
const CLEAN_ERROR: f64 = 0.0550;
const PROOF_MODE_ERROR: f64 = 0.0184;

fn desk(g: &Grid) -> (fraccalderon::fracop::FracOperator, Potential) {
    (assemble_quadrature(g, 0.5).unwrap(), Potential::gaussian(g, 0.5, [0.0, 0.0], 0.4))
}

fn error_for(g: &Grid, src: &str, tgt: &str, sigma: f64, seed: u64, opts: &ReconOptions) -> f64 {
    let (op, q) = desk(g);
    let truth = q.values.clone();
    let st = DirichletSystem::new(g, &op, q).unwrap();
    let sr = DirichletSystem::new(g, &op, Potential::zero(g)).unwrap();
    let m = simulate_measurements(&st, &sr, &Sel::window(src), &Sel::window(tgt), sigma, seed).unwrap();
    let rec = reconstruct_potential(&m, &sr, opts).unwrap();
    assert!(rec.converged);
    relative_error(&rec.estimate, &truth)
}

#[test]
fn desk_case_clean_and_noisy() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let opts = ReconOptions::default();
    let clean = error_for(&g, "W1", "W2", 0.0, 0, &opts);
    assert!((clean - CLEAN_ERROR).abs() < 5e-4, "{clean}");
    assert!(clean <= 0.15);
    for seed in 0..3 {
        let noisy = error_for(&g, "W1", "W2", 1e-3, seed, &opts);
        assert!(noisy <= 2.0 * clean, "seed {seed}: {noisy}");
    }
}

#[test]
fn proof_mode_on_clean_data() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let opts = ReconOptions {
        mode: ReconMode::Proof,
        ..Default::default()
    };
    let e = error_for(&g, "W1", "W2", 0.0, 0, &opts);
    assert!((e - PROOF_MODE_ERROR).abs() < 5e-4, "{e}");
}

#[test]
fn noise_level_statistics() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let (op, q) = desk(&g);
    let st = DirichletSystem::new(&g, &op, q).unwrap();
    let sr = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
    let clean = simulate_measurements(&st, &sr, &Sel::window("W1"), &Sel::window("W2"), 0.0, 2024).unwrap();
    let noisy = simulate_measurements(&st, &sr, &Sel::window("W1"), &Sel::window("W2"), 1e-3, 2024).unwrap();
    let rel = (&noisy.data - &clean.data).norm() / clean.data.norm();
    assert!((1e-4..=1e-2).contains(&rel), "{rel}");
    assert_eq!(noisy.data, add_relative_noise(&clean.data, 1e-3, 2024));
    let again = simulate_measurements(&st, &sr, &Sel::window("W1"), &Sel::window("W2"), 1e-3, 2024).unwrap();
    assert_eq!(noisy.data, again.data);
}

#[test]
fn enlarging_target_window_helps() {
    let spec = GridSpec::desk_1d(0.05)
        .with_window("B1", Shape::Interval { a: -1.9, b: -1.1 })
        .with_window("B2", Shape::Interval { a: -2.0, b: -1.0 });
    let g = build_grid(spec).unwrap();
    let opts = ReconOptions::default();
    let e0 = error_for(&g, "W1", "W2", 0.0, 0, &opts);
    let e1 = error_for(&g, "W1", "B1", 0.0, 0, &opts);
    let e2 = error_for(&g, "W1", "B2", 0.0, 0, &opts);
    assert!(e1 <= e0 && e2 <= e1, "{e0} {e1} {e2}");
}

#[test]
fn disjoint_windows_not_worse_than_coincident() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let opts = ReconOptions::default();
    let disjoint = error_for(&g, "W1", "W2", 0.0, 0, &opts);
    let coincident = error_for(&g, "W1", "W1", 0.0, 0, &opts);
    assert!(disjoint <= coincident, "{disjoint} vs {coincident}");
}

#[test]
fn identity_functionals_within_runge_bound() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let (op, q) = desk(&g);
    let dq = q.values.clone();
    let st = DirichletSystem::new(&g, &op, q).unwrap();
    let sr = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
    let m = simulate_measurements(&st, &sr, &Sel::window("W1"), &Sel::window("W2"), 0.0, 0).unwrap();
    let h = g.cell_volume();
    let g0 = RungeMap::new(&sr, &Sel::window("W2")).unwrap().solve(&DVector::from_element(dq.len(), 1.0), 1e-8).unwrap();
    let u2 = &g0.achieved;
    let phi = sr.spectrum().unwrap().eigenvectors.clone() / h.sqrt();
    let g1 = RungeMap::new(&st, &Sel::window("W1")).unwrap();
    for k in 0..6 {
        let fk = phi.column(k).into_owned();
        let sol = g1.solve(&fk, 1e-8).unwrap();
        let mk = h * g0.control.dot(&(&m.data * &sol.control));
        let direct = h * fk.component_mul(&dq).dot(u2);
        let bound = h * dq.amax() * (&sol.achieved - &fk).norm() * u2.norm();
        assert!((mk - direct).abs() <= bound * (1.0 + 1e-9) + 1e-12, "k {k}: {} > {bound}", (mk - direct).abs());
    }
}

#[test]
fn runge_gate_reports_failure() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let (op, q) = desk(&g);
    let st = DirichletSystem::new(&g, &op, q).unwrap();
    let sr = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
    let m = simulate_measurements(&st, &sr, &Sel::window("W1"), &Sel::window("W2"), 0.0, 0).unwrap();
    let opts = ReconOptions {
        mode: ReconMode::Proof,
        runge_gate: Some(0.05),
        ..Default::default()
    };
    assert!(matches!(reconstruct_potential(&m, &sr, &opts), Err(Error::RungeFail { .. })));
}

#[test]
fn mismatched_reference_is_rejected() {
    let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
    let (op, q) = desk(&g);
    let st = DirichletSystem::new(&g, &op, q).unwrap();
    let sr = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
    let other = DirichletSystem::new(&g, &op, Potential::constant(&g, 0.1)).unwrap();
    let m = simulate_measurements(&st, &sr, &Sel::window("W1"), &Sel::window("W2"), 0.0, 0).unwrap();
    assert!(reconstruct_potential(&m, &other, &ReconOptions::default()).is_err());
}
