// Clamped nonlocal diffusion, the free heat kernel and the DN loss rate.
//
//     cargo run --release --example diffusion

use fraccalderon::diffusion::{decay_series, dn_cost_check, heat_kernel_free, Mode};
use fraccalderon::dirichlet::{DirichletSystem, Potential};
use fraccalderon::fracop::assemble_quadrature;
use fraccalderon::grid::{build_grid, GridSpec, Sel};
use fraccalderon::Result;
use nalgebra::DVector;

pub fn run_example() -> Result<()> {
    let grid = build_grid(GridSpec::desk_1d(0.05))?;
    let op = assemble_quadrature(&grid, 0.5)?;
    let sys = DirichletSystem::new(&grid, &op, Potential::zero(&grid))?;
    let f = DVector::from_iterator(
        grid.exterior().len(),
        grid.exterior().iter().map(|&k| (-(grid.active_coord(k)[0] - 1.5).powi(2) / 0.1).exp()),
    );
    let start = grid.embed(&DVector::from_element(grid.interior().len(), 1.0), &Sel::Interior)?;
    let initial = start.axpy(1.0, &grid.embed(&f, &Sel::ExteriorSupport)?);
    let l1 = sys.spectrum()?.lambda1();
    let series = decay_series(&sys, &initial, Mode::Clamped, Some(&f), &[0.0, 0.1, 1.0, 10.0])?;
    for (t, d) in &series {
        println!("t={t:<5} distance to steady state {d:.4e}  bound {:.4e}", series[0].1 * (-l1 * t).exp());
    }

    let r1 = dn_cost_check(&sys, &f, None)?;
    let r2 = dn_cost_check(&sys, &f, Some(r1.dt / 2.0))?;
    println!("loss rate vs DN map: {:.3e}, halving ratio {:.3}", r1.max_rel_deviation, r1.max_rel_deviation / r2.max_rel_deviation);

    let hk = heat_kernel_free(&grid, 0.5, 0.5, 16)?;
    println!("heat kernel mass at t=0.5: {:.8}", hk.mass);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
