// Exterior controls on a one-sided window approximating u = 1 in the domain.
//
//     cargo run --release --example runge_control

use fraccalderon::dirichlet::{DirichletSystem, Potential};
use fraccalderon::fracop::assemble_quadrature;
use fraccalderon::grid::{build_grid, GridSpec, Sel, Shape};
use fraccalderon::runge::{default_alphas, sweep};
use fraccalderon::Result;
use nalgebra::DVector;

pub fn run_example() -> Result<()> {
    let spec = GridSpec::desk_1d(0.02).with_window("R", Shape::Interval { a: 1.0, b: 2.0 });
    let grid = build_grid(spec)?;
    let op = assemble_quadrature(&grid, 0.25)?;
    let sys = DirichletSystem::new(&grid, &op, Potential::zero(&grid))?;
    let target = DVector::from_element(grid.interior().len(), 1.0);
    for p in sweep(&sys, &Sel::window("R"), &target, &default_alphas())? {
        println!(
            "alpha {:8.1e}  relative residual {:.4}  ||g|| {:.3e}",
            p.alpha, p.relative_residual, p.control_norm
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
