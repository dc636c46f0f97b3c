// Extension to the upper half plane and its weighted normal derivative,
// plus the conditioning of the double-vanishing problem on a window.
//
//     cargo run --release --example extension_trace

use fraccalderon::extension::{cs_extend, trace_derivative, ucp_conditioning, y_ladder};
use fraccalderon::fracop::{apply_spectral, assemble_quadrature};
use fraccalderon::grid::{build_grid, GridSpec, Shape};
use fraccalderon::Result;

pub fn run_example() -> Result<()> {
    let grid = build_grid(GridSpec::desk_1d(0.02))?;
    let u = grid.sample(|p| (-p[0] * p[0] / 0.08).exp());
    for s in [0.25, 0.5, 0.75] {
        let field = cs_extend(&grid, &u, s, &y_ladder(grid.h(), 4))?;
        let tr = trace_derivative(&grid, &field)?;
        let sp = apply_spectral(&grid, &u, s, 8)?;
        let (mut num, mut den) = (0.0, 0.0);
        for &k in grid.interior() {
            let g = grid.active()[k];
            num += (tr.values[g] - sp.values[g]).powi(2);
            den += sp.values[g].powi(2);
        }
        println!("s={s}: trace vs spectral, relative L2 on the domain {:.3e}", (num / den).sqrt());
    }

    let coarse = build_grid(GridSpec::desk_1d(0.05))?;
    let op = assemble_quadrature(&coarse, 0.5)?;
    let window = coarse.nodes_in(&Shape::Interval { a: 1.2, b: 1.4 })?;
    let window: Vec<usize> = window.iter().filter_map(|&g| coarse.active_pos(g)).collect();
    let rep = ucp_conditioning(&coarse, &op, &window, 1e-10)?;
    println!(
        "window (1.2,1.4): sigma_min {:.3e}, near-null dimension {}, high-frequency share {:.3}",
        rep.sigma_min, rep.null_dim, rep.high_frequency_fraction
    );
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
