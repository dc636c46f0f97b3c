//! Runge approximation: exterior controls on a window whose solutions
//! approximate an interior target.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;

use crate::dirichlet::DirichletSystem;
use crate::error::{Error, Result};
use crate::fracop::fmt17;
use crate::grid::Sel;

/// Above this window size the normal equations are solved matrix-free.
pub const DENSE_WINDOW_LIMIT: usize = 400;
pub const ILL_CONDITIONED: f64 = 1e14;

pub fn default_alphas() -> Vec<f64> {
    (0..11).map(|k| 10f64.powi(-2 - k)).collect()
}

#[derive(Clone)]
pub struct ControlProblem<'s, 'a> {
    pub sys: &'s DirichletSystem<'a>,
    pub window: Sel,
    /// values on interior nodes
    pub target: DVector<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct RungeSolution {
    /// control values on the window nodes
    pub control: DVector<f64>,
    /// interior values of `P_q g`
    pub achieved: DVector<f64>,
    /// `||r_Omega P_q g - f||` with weight `h^n`
    pub residual: f64,
    pub relative_residual: f64,
    /// condition number of the regularized normal matrix (dense path only)
    pub condition: Option<f64>,
    pub ill_conditioned: bool,
}

/// The window-to-interior solution map `G = r_Omega P_q E_W` with its SVD.
pub struct RungeMap {
    window: Vec<usize>,
    matrix: DMatrix<f64>,
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    weight: f64,
}

impl RungeMap {
    pub fn new(sys: &DirichletSystem, window: &Sel) -> Result<Self> {
        let grid = sys.grid();
        let w = window_nodes(sys, window)?;
        let a = &sys.operator().matrix;
        let rhs = -a.select_rows(grid.interior()).select_columns(&w);
        let matrix = sys.solve_interior_many(&rhs)?;
        let svd = matrix.clone().svd(true, true);
        Ok(RungeMap {
            window: w,
            matrix,
            svd,
            weight: grid.cell_volume(),
        })
    }

    /// |Omega| x |W|
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.svd.singular_values
    }

    pub fn window(&self) -> &[usize] {
        &self.window
    }

    /// Tikhonov solution through SVD filter factors; `alpha = 0` is the
    /// pseudo-inverse.
    pub fn solve(&self, target: &DVector<f64>, alpha: f64) -> Result<RungeSolution> {
        if target.len() != self.matrix.nrows() {
            return Err(Error::Domain("target must live on the interior nodes".into()));
        }
        if alpha < 0.0 || !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha = {alpha} must be >= 0")));
        }
        let u = self.svd.u.as_ref().unwrap();
        let vt = self.svd.v_t.as_ref().unwrap();
        let sv = &self.svd.singular_values;
        let smax = sv.max();
        let cut = f64::EPSILON * smax * self.matrix.nrows().max(self.matrix.ncols()) as f64;
        let mut coef = u.transpose() * target;
        for i in 0..sv.len() {
            let s = sv[i];
            coef[i] = if alpha > 0.0 {
                s / (s * s + alpha) * coef[i]
            } else if s > cut {
                coef[i] / s
            } else {
                0.0
            };
        }
        let control = vt.transpose() * coef;
        let smin = if self.matrix.ncols() > self.matrix.nrows() { 0.0 } else { sv.min() };
        let condition = (smax * smax + alpha) / (smin * smin + alpha);
        Ok(self.finish(control, target, Some(condition)))
    }

    fn finish(&self, control: DVector<f64>, target: &DVector<f64>, condition: Option<f64>) -> RungeSolution {
        let achieved = &self.matrix * &control;
        let residual = (self.weight * (&achieved - target).norm_squared()).sqrt();
        let tn = (self.weight * target.norm_squared()).sqrt();
        RungeSolution {
            control,
            achieved,
            residual,
            relative_residual: if tn > 0.0 { residual / tn } else { residual },
            ill_conditioned: condition.is_some_and(|c| !(c <= ILL_CONDITIONED)),
            condition,
        }
    }
}

fn window_nodes(sys: &DirichletSystem, window: &Sel) -> Result<Vec<usize>> {
    match window {
        Sel::Interior | Sel::Far => Err(Error::Domain("controls live on exterior nodes".into())),
        w => {
            let nodes = sys.grid().select(w)?.to_vec();
            if nodes.is_empty() {
                return Err(Error::EmptyRegion(format!("{w:?}")));
            }
            Ok(nodes)
        }
    }
}

/// Minimizes `||r_Omega P_q g - f||^2 + alpha ||g||^2` (both weighted by `h^n`).
pub fn runge_approximate(p: &ControlProblem) -> Result<RungeSolution> {
    let n = window_nodes(p.sys, &p.window)?.len();
    if p.target.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("target must be finite".into()));
    }
    if n <= DENSE_WINDOW_LIMIT {
        RungeMap::new(p.sys, &p.window)?.solve(&p.target, p.alpha)
    } else {
        runge_matrix_free(p)
    }
}

/// `-(A phi)|_W` with `phi` the source solve of `v`: the adjoint of `r_Omega P_q`.
pub fn adjoint_apply(sys: &DirichletSystem, v: &DVector<f64>, window: &Sel) -> Result<DVector<f64>> {
    let w = window_nodes(sys, window)?;
    let phi = sys.solve_interior(v)?;
    let a = &sys.operator().matrix;
    let int = sys.grid().interior();
    Ok(-(a.select_rows(&w).select_columns(int) * phi))
}

fn forward_apply(sys: &DirichletSystem, w: &[usize], g: &DVector<f64>) -> Result<DVector<f64>> {
    let a = &sys.operator().matrix;
    let rhs = -(a.select_rows(sys.grid().interior()).select_columns(w) * g);
    sys.solve_interior(&rhs)
}

/// Conjugate gradients on `(G^T G + alpha) g = G^T f`.
fn runge_matrix_free(p: &ControlProblem) -> Result<RungeSolution> {
    let w = window_nodes(p.sys, &p.window)?;
    let apply = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let gx = forward_apply(p.sys, &w, x)?;
        Ok(adjoint_apply(p.sys, &gx, &p.window)? + x * p.alpha)
    };
    let b = adjoint_apply(p.sys, &p.target, &p.window)?;
    let mut x = DVector::zeros(w.len());
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rr = r.norm_squared();
    let stop = 1e-24 * rr.max(f64::MIN_POSITIVE);
    for _ in 0..5 * w.len() {
        if rr <= stop {
            break;
        }
        let ad = apply(&d)?;
        let step = rr / d.dot(&ad);
        x.axpy(step, &d, 1.0);
        r.axpy(-step, &ad, 1.0);
        let rr_new = r.norm_squared();
        d = &r + &d * (rr_new / rr);
        rr = rr_new;
    }
    let achieved = forward_apply(p.sys, &w, &x)?;
    let weight = p.sys.grid().cell_volume();
    let residual = (weight * (&achieved - &p.target).norm_squared()).sqrt();
    let tn = (weight * p.target.norm_squared()).sqrt();
    Ok(RungeSolution {
        control: x,
        achieved,
        residual,
        relative_residual: if tn > 0.0 { residual / tn } else { residual },
        condition: None,
        ill_conditioned: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub residual: f64,
    pub relative_residual: f64,
    pub control_norm: f64,
}

/// L-curve over an alpha schedule; points are computed concurrently.
pub fn sweep(sys: &DirichletSystem, window: &Sel, target: &DVector<f64>, alphas: &[f64]) -> Result<Vec<SweepPoint>> {
    let map = RungeMap::new(sys, window)?;
    let weight = sys.grid().cell_volume();
    alphas
        .par_iter()
        .map(|&alpha| {
            let sol = map.solve(target, alpha)?;
            Ok(SweepPoint {
                alpha,
                residual: sol.residual,
                relative_residual: sol.relative_residual,
                control_norm: (weight * sol.control.norm_squared()).sqrt(),
            })
        })
        .collect()
}

pub fn write_sweep_csv(points: &[SweepPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["alpha", "residual", "relative_residual", "control_norm"])?;
    for p in points {
        w.write_record([fmt17(p.alpha), fmt17(p.residual), fmt17(p.relative_residual), fmt17(p.control_norm)])?;
    }
    w.flush()?;
    Ok(())
}
