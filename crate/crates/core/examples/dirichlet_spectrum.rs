// Exterior Dirichlet problem: first eigenvalues and one solve.
//
//     cargo run --release --example dirichlet_spectrum

use fraccalderon::dirichlet::{DirichletSystem, Potential, DEFAULT_EIG_TOL};
use fraccalderon::fracop::assemble_quadrature;
use fraccalderon::grid::{build_grid, GridSpec};
use fraccalderon::Result;
use nalgebra::DVector;

pub fn run_example() -> Result<()> {
    let grid = build_grid(GridSpec::desk_1d(0.05))?;
    let op = assemble_quadrature(&grid, 0.5)?;
    let sys = DirichletSystem::new(&grid, &op, Potential::gaussian(&grid, 0.5, [0.0, 0.0], 0.4))?;
    let sp = sys.spectrum()?;
    println!("lowest eigenvalues: {:?}", &sp.eigenvalues.as_slice()[..4]);
    let cond = sys.check_condition(DEFAULT_EIG_TOL)?;
    println!("well posed: {} (margin {:.3e})", cond.ok, cond.margin);

    let f = DVector::from_element(grid.exterior().len(), 1.0);
    let u = sys.solve_poisson(&f)?;
    let mid = grid.active()[grid.interior()[grid.interior().len() / 2]];
    println!("u_f at the centre for f = 1 on the support: {:.6}", u.values[mid]);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
