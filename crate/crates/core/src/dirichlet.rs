//! Exterior-value Dirichlet problem for `(-Delta)^s + q` on `Omega`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::fracop::FracOperator;
use crate::grid::{Grid, GridFunction};

pub const DEFAULT_EIG_TOL: f64 = 1e-8;

/// Potential on the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    grid_id: u64,
    pub values: DVector<f64>,
}

impl Potential {
    pub fn new(grid: &Grid, values: DVector<f64>) -> Result<Self> {
        if values.len() != grid.interior().len() {
            return Err(Error::Domain(format!(
                "potential has {} values, omega has {} nodes",
                values.len(),
                grid.interior().len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("potential must be finite".into()));
        }
        Ok(Potential {
            grid_id: grid.id(),
            values,
        })
    }

    pub fn from_fn<F: Fn([f64; 2]) -> f64>(grid: &Grid, f: F) -> Self {
        let values = DVector::from_iterator(
            grid.interior().len(),
            grid.interior().iter().map(|&k| f(grid.active_coord(k))),
        );
        Potential {
            grid_id: grid.id(),
            values,
        }
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// `amp * exp(-|x - center|^2 / (2 width^2))`.
    pub fn gaussian(grid: &Grid, amp: f64, center: [f64; 2], width: f64) -> Self {
        Self::from_fn(grid, |p| {
            let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
            amp * (-r2 / (2.0 * width * width)).exp()
        })
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.amax()
    }

    /// `||q_-||_inf`.
    pub fn negative_part(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(-v))
    }
}

/// Ascending eigenpairs of the interior matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    /// orthonormal columns over the interior nodes
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub ok: bool,
    /// `min_j |lambda_j|`
    pub margin: f64,
    pub threshold: f64,
}

/// `A_{Omega Omega} + diag(q)` with its coupling block and cached factorizations.
pub struct DirichletSystem<'a> {
    grid: &'a Grid,
    op: &'a FracOperator,
    potential: Potential,
    interior_matrix: DMatrix<f64>,
    coupling: DMatrix<f64>,
    tol: f64,
    spectrum: OnceLock<Spectrum>,
    lu: OnceLock<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<'a> DirichletSystem<'a> {
    pub fn new(grid: &'a Grid, op: &'a FracOperator, potential: Potential) -> Result<Self> {
        op.check_grid(grid)?;
        if potential.grid_id != grid.id() {
            return Err(Error::GridMismatch("potential defined on another grid".into()));
        }
        let int = grid.interior();
        let ext = grid.exterior();
        let mut interior_matrix = op.matrix.select_rows(int).select_columns(int);
        for i in 0..int.len() {
            interior_matrix[(i, i)] += potential.values[i];
        }
        let coupling = op.matrix.select_rows(int).select_columns(ext);
        Ok(DirichletSystem {
            grid,
            op,
            potential,
            interior_matrix,
            coupling,
            tol: DEFAULT_EIG_TOL,
            spectrum: OnceLock::new(),
            lu: OnceLock::new(),
        })
    }

    /// Eigenvalue threshold relative to `||A||` used by the solves.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn grid(&self) -> &'a Grid {
        self.grid
    }
    pub fn operator(&self) -> &'a FracOperator {
        self.op
    }
    pub fn potential(&self) -> &Potential {
        &self.potential
    }
    pub fn interior_matrix(&self) -> &DMatrix<f64> {
        &self.interior_matrix
    }
    /// `A_{Omega E}` (interior x exterior support).
    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn spectrum(&self) -> Result<&Spectrum> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let sp = dirichlet_spectrum_of(&self.interior_matrix)?;
        Ok(self.spectrum.get_or_init(|| sp))
    }

    /// Spectral norm of the interior matrix.
    pub fn norm(&self) -> Result<f64> {
        let sp = self.spectrum()?;
        Ok(sp.eigenvalues.amax())
    }

    pub fn check_condition(&self, tol: f64) -> Result<Condition> {
        let sp = self.spectrum()?;
        let margin = sp.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let threshold = tol * sp.eigenvalues.amax();
        Ok(Condition {
            ok: margin > threshold,
            margin,
            threshold,
        })
    }

    fn factor(&self) -> Result<&LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let c = self.check_condition(self.tol)?;
        if !c.ok {
            return Err(Error::Singular {
                margin: c.margin,
                threshold: c.threshold,
            });
        }
        Ok(self.lu.get_or_init(|| self.interior_matrix.clone().lu()))
    }

    /// Solves `(A_{Omega Omega} + q) x = b` on the interior.
    pub fn solve_interior(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let lu = self.factor()?;
        lu.solve(b).ok_or(Error::Singular {
            margin: 0.0,
            threshold: 0.0,
        })
    }

    /// Same as `solve_interior` for several right-hand sides.
    pub fn solve_interior_many(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let lu = self.factor()?;
        lu.solve(b).ok_or(Error::Singular {
            margin: 0.0,
            threshold: 0.0,
        })
    }

    /// Interior values of the Poisson solutions for the columns of `f`
    /// (exterior-support data).
    pub fn poisson_interior(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if f.nrows() != self.grid.exterior().len() {
            return Err(Error::Domain("exterior data has wrong length".into()));
        }
        let rhs = -(&self.coupling * f);
        self.solve_interior_many(&rhs)
    }

    /// `P_q f`: equals `f` on the exterior support, zero on FAR nodes.
    pub fn solve_poisson(&self, f: &DVector<f64>) -> Result<GridFunction> {
        let fm = DMatrix::from_column_slice(f.len(), 1, f.as_slice());
        let ui = self.poisson_interior(&fm)?;
        let mut act = DVector::zeros(self.grid.n_active());
        for (i, &k) in self.grid.interior().iter().enumerate() {
            act[k] = ui[(i, 0)];
        }
        for (i, &k) in self.grid.exterior().iter().enumerate() {
            act[k] = f[i];
        }
        Ok(self.grid.from_active(&act))
    }

    /// Solution with interior source `rhs` and zero exterior values.
    pub fn solve_source(&self, rhs: &DVector<f64>) -> Result<GridFunction> {
        if rhs.len() != self.grid.interior().len() {
            return Err(Error::Domain("source has wrong length".into()));
        }
        let x = self.solve_interior(rhs)?;
        let mut act = DVector::zeros(self.grid.n_active());
        for (i, &k) in self.grid.interior().iter().enumerate() {
            act[k] = x[i];
        }
        Ok(self.grid.from_active(&act))
    }

    /// `(A + E_0 q r_Omega)` applied to a grid function, on active nodes.
    pub fn apply_full(&self, u: &GridFunction) -> Result<DVector<f64>> {
        let v = self.grid.to_active(u)?;
        let mut out = &self.op.matrix * &v;
        for (i, &k) in self.grid.interior().iter().enumerate() {
            out[k] += self.potential.values[i] * v[k];
        }
        Ok(out)
    }

    /// Bound on the solution operator norm, `1 / margin`.
    pub fn stability_constant(&self) -> Result<f64> {
        Ok(1.0 / self.check_condition(self.tol)?.margin)
    }
}

/// Full symmetric eigendecomposition, sorted ascending.
pub fn dirichlet_spectrum(sys: &DirichletSystem) -> Result<Spectrum> {
    sys.spectrum().cloned()
}

fn dirichlet_spectrum_of(m: &DMatrix<f64>) -> Result<Spectrum> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigFail("non-finite matrix entries".into()));
    }
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(k).into_owned();
        // sign convention: largest component positive
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        eigenvectors.set_column(j, &col);
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}
