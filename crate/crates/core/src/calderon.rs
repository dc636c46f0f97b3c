//! Partial-data inverse problem: simulate DN differences on exterior windows
//! and recover the potential difference through the integral identity.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dirichlet::{DirichletSystem, Potential};
use crate::dnmap::{assemble_dn, fingerprint};
use crate::error::{Error, Result};
use crate::grid::Sel;
use crate::runge::RungeMap;

/// `(Lambda_true - Lambda_ref)` from `source` to `target`, possibly noisy.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub source: Sel,
    pub target: Sel,
    /// |target| x |source|
    pub data: DMatrix<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub reference_fingerprint: u64,
}

/// Multiplies every entry by `1 + sigma xi`, `xi` standard normal drawn from
/// ChaCha8 in row-major order.
pub fn add_relative_noise(d: &DMatrix<f64>, sigma: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = d.clone();
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            out[(i, j)] *= 1.0 + sigma * xi;
        }
    }
    out
}

pub fn simulate_measurements(
    sys_true: &DirichletSystem,
    sys_ref: &DirichletSystem,
    source: &Sel,
    target: &Sel,
    sigma: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    if sys_true.grid().id() != sys_ref.grid().id() {
        return Err(Error::GridMismatch("true and reference systems differ in grid".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("noise level {sigma} must be >= 0")));
    }
    let clean = assemble_dn(sys_true, source, target)?.matrix - assemble_dn(sys_ref, source, target)?.matrix;
    let data = if sigma > 0.0 { add_relative_noise(&clean, sigma, seed) } else { clean };
    Ok(MeasurementSet {
        source: source.clone(),
        target: target.clone(),
        data,
        sigma,
        seed,
        reference_fingerprint: fingerprint(&sys_ref.potential().values),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconMode {
    /// every window basis pair `(e_i, e_j)` as a product test function
    Pairs,
    /// Runge-built controls for targets `f_k` paired with one control for `u_2 ~ 1`
    Proof,
}

#[derive(Debug, Clone)]
pub struct ReconOptions {
    pub mode: ReconMode,
    /// Tikhonov weight of the Runge steps (proof mode)
    pub alpha: f64,
    /// interior test functions as columns; default: reference eigenbasis
    pub targets: Option<DMatrix<f64>>,
    pub max_iter: usize,
    /// discrepancy factor
    pub tau: f64,
    /// modelling floor added to sigma in the discrepancy level
    pub floor: f64,
    /// penalty weight reduction per iteration
    pub rho: f64,
    /// RUNGE_FAIL threshold on relative Runge residuals, if any
    pub runge_gate: Option<f64>,
}

impl Default for ReconOptions {
    fn default() -> Self {
        ReconOptions {
            mode: ReconMode::Pairs,
            alpha: 1e-6,
            targets: None,
            max_iter: 60,
            tau: 2.0,
            floor: 1e-4,
            rho: 10f64.powf(-0.25),
            runge_gate: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub beta: f64,
    /// `||Lambda_est - Lambda_ref - data||`
    pub residual: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// `q_true - q_ref` on interior nodes
    pub estimate: DVector<f64>,
    pub history: Vec<IterRecord>,
    pub converged: bool,
    /// relative residual of the `u_2 ~ 1` control, then one per target (proof mode)
    pub runge_residuals: Vec<f64>,
}

/// Relative `L^2(Omega)` error of an estimate.
pub fn relative_error(estimate: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    (estimate - truth).norm() / truth.norm()
}

/// First differences over the interior ordering, divided by `h`.
fn difference_penalty(n: usize, h: f64) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n.saturating_sub(1), n);
    for i in 0..n.saturating_sub(1) {
        p[(i, i)] = -1.0 / h;
        p[(i, i + 1)] = 1.0 / h;
    }
    p
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Iterated linearization of the integral identity.
///
/// Each pass rebuilds the source-window solutions with the current estimate,
/// so the identity is exact at the fixed point, solves a penalized least
/// squares problem for the difference and stops by the discrepancy principle.
pub fn reconstruct_potential(
    meas: &MeasurementSet,
    sys_ref: &DirichletSystem,
    opts: &ReconOptions,
) -> Result<Reconstruction> {
    if meas.reference_fingerprint != fingerprint(&sys_ref.potential().values) {
        return Err(Error::Domain("measurements were simulated against another reference".into()));
    }
    let grid = sys_ref.grid();
    let op = sys_ref.operator();
    let h = grid.cell_volume();
    let d = &meas.data;
    let n1 = grid.select(&meas.source)?.len();
    let n2 = grid.select(&meas.target)?.len();
    if d.shape() != (n2, n1) {
        return Err(Error::Domain("measurement matrix does not match the windows".into()));
    }
    let ni = grid.interior().len();
    let qref = sys_ref.potential().values.clone();
    let dref = assemble_dn(sys_ref, &meas.source, &meas.target)?.matrix;
    let g2 = RungeMap::new(sys_ref, &meas.target)?;
    let p = difference_penalty(ni, grid.h());
    let sp = spectral_norm(&p);
    let delta = (meas.sigma + opts.floor) * d.norm();

    let mut runge_residuals = Vec::new();
    let proof = if opts.mode == ReconMode::Proof {
        let one = DVector::from_element(ni, 1.0);
        let s0 = g2.solve(&one, opts.alpha)?;
        runge_residuals.push(s0.relative_residual);
        let targets = match &opts.targets {
            Some(t) => {
                if t.nrows() != ni {
                    return Err(Error::Domain("targets must live on the interior nodes".into()));
                }
                t.clone()
            }
            None => sys_ref.spectrum()?.eigenvectors.clone() / h.sqrt(),
        };
        Some((s0.control, s0.achieved, targets))
    } else {
        None
    };

    let mut dq = DVector::zeros(ni);
    let mut beta: f64 = 1.0;
    let mut history = Vec::new();
    let mut converged = false;
    for iter in 0..opts.max_iter {
        let cur = DirichletSystem::new(grid, op, Potential::new(grid, &qref + &dq)?)?;
        let g1 = RungeMap::new(&cur, &meas.source)?;
        let (rows, m) = match &proof {
            Some((g0, u2, targets)) => {
                let k = targets.ncols();
                let mut rows = DMatrix::zeros(k, ni);
                let mut m = DVector::zeros(k);
                let mut res = Vec::with_capacity(k);
                let dt_g0 = d.transpose() * g0;
                for j in 0..k {
                    let sol = g1.solve(&targets.column(j).into_owned(), opts.alpha)?;
                    res.push(sol.relative_residual);
                    m[j] = h * dt_g0.dot(&sol.control);
                    rows.set_row(j, &(sol.achieved.component_mul(u2) * h).transpose());
                }
                runge_residuals.truncate(1);
                runge_residuals.extend(res);
                (rows, m)
            }
            None => {
                let a1 = g1.matrix();
                let a2 = g2.matrix();
                let mut rows = DMatrix::zeros(n1 * n2, ni);
                let mut m = DVector::zeros(n1 * n2);
                for j in 0..n2 {
                    for i in 0..n1 {
                        let r = j * n1 + i;
                        m[r] = h * d[(j, i)];
                        rows.set_row(r, &(a1.column(i).component_mul(&a2.column(j)) * h).transpose());
                    }
                }
                (rows, m)
            }
        };
        if let Some(gate) = opts.runge_gate {
            if let Some((k, &r)) = runge_residuals.iter().enumerate().find(|(_, &r)| r > gate) {
                return Err(Error::RungeFail {
                    target: k,
                    residual: r,
                    gate,
                });
            }
        }
        let sr = spectral_norm(&rows).max(f64::MIN_POSITIVE);
        let nr = rows.nrows();
        let mut stack = DMatrix::zeros(nr + p.nrows(), ni);
        stack.rows_mut(0, nr).copy_from(&(&rows / sr));
        stack.rows_mut(nr, p.nrows()).copy_from(&(&p * (beta.sqrt() / sp)));
        let mut rhs = DVector::zeros(nr + p.nrows());
        rhs.rows_mut(0, nr).copy_from(&(&m / sr));
        dq = stack
            .svd(true, true)
            .solve(&rhs, 1e-15)
            .map_err(|e| Error::Domain(format!("least squares failed: {e}")))?;

        let est = DirichletSystem::new(grid, op, Potential::new(grid, &qref + &dq)?)?;
        let residual = (assemble_dn(&est, &meas.source, &meas.target)?.matrix - &dref - d).norm();
        history.push(IterRecord {
            iter,
            beta,
            residual,
            discrepancy: delta,
        });
        if residual <= opts.tau * delta {
            converged = true;
            break;
        }
        beta *= opts.rho;
    }
    Ok(Reconstruction {
        estimate: dq,
        history,
        converged,
        runge_residuals,
    })
}
