// Recover a Gaussian potential from DN data between two disjoint windows.
//
//     cargo run --release --example reconstruct

use fraccalderon::calderon::{reconstruct_potential, relative_error, simulate_measurements, ReconOptions};
use fraccalderon::dirichlet::{DirichletSystem, Potential};
use fraccalderon::fracop::assemble_quadrature;
use fraccalderon::grid::{build_grid, GridSpec, Sel};
use fraccalderon::Result;

pub fn run_example() -> Result<()> {
    let grid = build_grid(GridSpec::desk_1d(0.05))?;
    let op = assemble_quadrature(&grid, 0.5)?;
    let q_true = Potential::gaussian(&grid, 0.5, [0.0, 0.0], 0.4);
    let truth = q_true.values.clone();
    let sys_true = DirichletSystem::new(&grid, &op, q_true)?;
    let sys_ref = DirichletSystem::new(&grid, &op, Potential::zero(&grid))?;
    for sigma in [0.0, 1e-3] {
        let meas = simulate_measurements(&sys_true, &sys_ref, &Sel::window("W1"), &Sel::window("W2"), sigma, 7)?;
        let rec = reconstruct_potential(&meas, &sys_ref, &ReconOptions::default())?;
        println!(
            "noise {sigma:.0e}: {} iterations, converged {}, relative error {:.4}",
            rec.history.len(),
            rec.converged,
            relative_error(&rec.estimate, &truth)
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
