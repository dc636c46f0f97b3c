//! Dirichlet-to-Neumann maps between exterior windows.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dirichlet::DirichletSystem;
use crate::error::{Error, Result};
use crate::fracop::{fmt17, FracOperator};
use crate::grid::{Grid, GridFunction, Sel};

/// `Lambda_q` restricted to data on `source`, read out on `target`.
#[derive(Debug, Clone)]
pub struct DNMap {
    pub source: Sel,
    pub target: Sel,
    /// |target| x |source|
    pub matrix: DMatrix<f64>,
    pub potential_fingerprint: u64,
}

pub(crate) fn fingerprint(values: &DVector<f64>) -> u64 {
    let mut h = DefaultHasher::new();
    for v in values.iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Column `k` is `(A u_k + E_0(q r_Omega u_k))|_target` for the Poisson
/// solution `u_k` with data `e_k` on `source`.
pub fn assemble_dn(sys: &DirichletSystem, source: &Sel, target: &Sel) -> Result<DNMap> {
    let grid = sys.grid();
    let a = &sys.operator().matrix;
    let w1 = exterior_only(grid, source)?;
    let w2 = exterior_only(grid, target)?;
    let int = grid.interior();
    let rhs = -a.select_rows(int).select_columns(w1);
    let u = sys.solve_interior_many(&rhs)?;
    // the q term lives on Omega and drops out of an exterior readout
    let matrix = a.select_rows(w2).select_columns(w1) + a.select_rows(w2).select_columns(int) * u;
    Ok(DNMap {
        source: source.clone(),
        target: target.clone(),
        matrix,
        potential_fingerprint: fingerprint(&sys.potential().values),
    })
}

fn exterior_only<'g>(grid: &'g Grid, sel: &Sel) -> Result<&'g [usize]> {
    match sel {
        Sel::Interior | Sel::Far => Err(Error::Domain(format!(
            "DN data lives on exterior nodes, got {sel:?}"
        ))),
        _ => grid.select(sel),
    }
}

impl DNMap {
    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.matrix * f
    }

    /// CSV with the source coordinates in the header row and the target
    /// coordinates in the first column. 2D points are written `x:y`.
    pub fn export_csv(&self, grid: &Grid, path: &Path) -> Result<()> {
        let w1 = grid.select(&self.source)?;
        let w2 = grid.select(&self.target)?;
        let label = |k: usize| {
            let p = grid.active_coord(k);
            if grid.dim() == 1 {
                fmt17(p[0])
            } else {
                format!("{}:{}", fmt17(p[0]), fmt17(p[1]))
            }
        };
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["target\\source".to_string()];
        header.extend(w1.iter().map(|&k| label(k)));
        w.write_record(&header)?;
        for (i, &k) in w2.iter().enumerate() {
            let mut rec = vec![label(k)];
            rec.extend(self.matrix.row(i).iter().map(|&v| fmt17(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(A u_f)|_{exterior support}` for exterior data `f`.
pub fn dn_pointwise(sys: &DirichletSystem, f: &DVector<f64>) -> Result<DVector<f64>> {
    let grid = sys.grid();
    let u = sys.solve_poisson(f)?;
    let au = &sys.operator().matrix * grid.to_active(&u)?;
    Ok(DVector::from_iterator(
        grid.exterior().len(),
        grid.exterior().iter().map(|&k| au[k]),
    ))
}

/// `m(x) = sum_{y in Omega} w_xy` on the exterior support, with `w_xy = -A_xy`
/// the operator's own off-diagonal weights.
pub fn ns_weight(grid: &Grid, op: &FracOperator) -> Result<DVector<f64>> {
    op.check_grid(grid)?;
    let int = grid.interior();
    Ok(DVector::from_iterator(
        grid.exterior().len(),
        grid.exterior()
            .iter()
            .map(|&x| -int.iter().map(|&y| op.matrix[(x, y)]).sum::<f64>()),
    ))
}

/// Nonlocal Neumann operator `sum_{y in Omega} w_xy (u(x) - u(y))` at each
/// exterior-support node.
pub fn apply_ns(grid: &Grid, op: &FracOperator, u: &GridFunction) -> Result<DVector<f64>> {
    op.check_grid(grid)?;
    let v = grid.to_active(u)?;
    let int = grid.interior();
    Ok(DVector::from_iterator(
        grid.exterior().len(),
        grid.exterior().iter().map(|&x| {
            int.iter()
                .map(|&y| -op.matrix[(x, y)] * (v[x] - v[y]))
                .sum::<f64>()
        }),
    ))
}

/// Max residual of `Lambda_q f = N_s u_f - m f + (A E_0 f)|_ext`.
pub fn dn_decomposition_check(sys: &DirichletSystem, f: &DVector<f64>) -> Result<f64> {
    let grid = sys.grid();
    let op = sys.operator();
    let full = assemble_dn(sys, &Sel::ExteriorSupport, &Sel::ExteriorSupport)?;
    let lhs = full.apply(f);
    let u = sys.solve_poisson(f)?;
    let ns = apply_ns(grid, op, &u)?;
    let m = ns_weight(grid, op)?;
    let e0 = grid.embed(f, &Sel::ExteriorSupport)?;
    let ae = &op.matrix * grid.to_active(&e0)?;
    let rhs = DVector::from_iterator(
        f.len(),
        grid.exterior()
            .iter()
            .enumerate()
            .map(|(i, &k)| ns[i] - m[i] * f[i] + ae[k]),
    );
    Ok((lhs - rhs).amax())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// `h^n <(Lambda_1 - Lambda_2) f1, f2>` against `h^n sum_Omega (q1 - q2) u1 u2`.
pub fn integral_identity(
    sys1: &DirichletSystem,
    sys2: &DirichletSystem,
    f1: &DVector<f64>,
    f2: &DVector<f64>,
) -> Result<IdentityCheck> {
    let grid = sys1.grid();
    if grid.id() != sys2.grid().id() {
        return Err(Error::GridMismatch("systems live on different grids".into()));
    }
    let w = grid.cell_volume();
    let lhs = w * (dn_pointwise(sys1, f1)? - dn_pointwise(sys2, f1)?).dot(f2);
    let u1 = grid.restrict(&sys1.solve_poisson(f1)?, &Sel::Interior)?;
    let u2 = grid.restrict(&sys2.solve_poisson(f2)?, &Sel::Interior)?;
    let dq = &sys1.potential().values - &sys2.potential().values;
    let rhs = w * dq.component_mul(&u1).dot(&u2);
    Ok(IdentityCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::Potential;
    use crate::fracop::assemble_quadrature;
    use crate::grid::{build_grid, GridSpec};

    #[test]
    fn full_exterior_map_is_symmetric() {
        let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
        let op = assemble_quadrature(&g, 0.5).unwrap();
        let sys = DirichletSystem::new(&g, &op, Potential::gaussian(&g, 0.5, [0.0, 0.0], 0.4)).unwrap();
        let d = assemble_dn(&sys, &Sel::ExteriorSupport, &Sel::ExteriorSupport).unwrap();
        let asym = (&d.matrix - d.matrix.transpose()).amax();
        assert!(asym <= 1e-12 * d.matrix.norm());
    }

    #[test]
    fn constant_on_omega_has_zero_neumann() {
        let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
        let op = assemble_quadrature(&g, 0.25).unwrap();
        let u = g.sample(|_| 2.0);
        let ns = apply_ns(&g, &op, &u).unwrap();
        assert!(ns.amax() < 1e-12);
        let chi = g.chi_omega(&u).unwrap().scale(0.5);
        let ns = apply_ns(&g, &op, &chi).unwrap();
        let m = ns_weight(&g, &op).unwrap();
        assert!((ns + m).amax() < 1e-12 * ns_weight(&g, &op).unwrap().amax());
    }
}
