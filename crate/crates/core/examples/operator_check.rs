// Quadrature operator against the FFT reference on random smooth bumps.
//
//     cargo run --release --example operator_check

use fraccalderon::fracop::{assemble_quadrature, oracle_bumps, oracle_discrepancy};
use fraccalderon::grid::{build_grid, GridSpec};
use fraccalderon::Result;

pub fn run_example() -> Result<()> {
    for s in [0.25, 0.5, 0.75] {
        for h in [0.04, 0.02] {
            let grid = build_grid(GridSpec::desk_1d(h))?;
            let op = assemble_quadrature(&grid, s)?;
            let mut worst: f64 = 0.0;
            for u in oracle_bumps(&grid, 10, 2024, (0.1, 0.25)) {
                worst = worst.max(oracle_discrepancy(&grid, &op, &u, 8)?);
            }
            println!("s={s:<5} h={h:<5} worst relative discrepancy {worst:.3e}");
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
