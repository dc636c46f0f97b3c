// DN map between two exterior windows and the exact discrete identities.
//
//     cargo run --release --example dn_map

use fraccalderon::dirichlet::{DirichletSystem, Potential};
use fraccalderon::dnmap::{assemble_dn, dn_decomposition_check, integral_identity};
use fraccalderon::fracop::assemble_quadrature;
use fraccalderon::grid::{build_grid, GridSpec, Sel};
use fraccalderon::Result;
use nalgebra::DVector;

pub fn run_example() -> Result<()> {
    let grid = build_grid(GridSpec::desk_1d(0.05))?;
    let op = assemble_quadrature(&grid, 0.5)?;
    let sys1 = DirichletSystem::new(&grid, &op, Potential::gaussian(&grid, 0.5, [0.0, 0.0], 0.4))?;
    let sys2 = DirichletSystem::new(&grid, &op, Potential::zero(&grid))?;

    let d = assemble_dn(&sys1, &Sel::window("W1"), &Sel::window("W2"))?;
    println!("W1 -> W2 block: {} x {}, max |entry| {:.4e}", d.matrix.nrows(), d.matrix.ncols(), d.matrix.amax());

    let ne = grid.exterior().len();
    let f1 = DVector::from_fn(ne, |i, _| (0.3 * i as f64).sin());
    let f2 = DVector::from_fn(ne, |i, _| (0.17 * i as f64).cos());
    println!("decomposition residual {:.2e}", dn_decomposition_check(&sys1, &f1)?);
    let id = integral_identity(&sys1, &sys2, &f1, &f2)?;
    println!("integral identity: {:.12e} vs {:.12e}", id.lhs, id.rhs);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
