//! Nonlocal diffusion: exact eigen-expansion evolution with clamped exterior
//! values, the free heat kernel, and the short-time DN cost.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DVector;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::dirichlet::DirichletSystem;
use crate::dnmap::dn_pointwise;
use crate::error::{Error, Result};
use crate::fracop::{check_order, cns, fmt17};
use crate::grid::{Grid, GridFunction, Sel};
use crate::special::{gamma, zeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// exterior clamped to zero
    Homogeneous,
    /// exterior clamped to `f`
    Clamped,
}

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    pub state: GridFunction,
    pub mode: Mode,
}

fn homogeneous(sys: &DirichletSystem, v0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let sp = sys.spectrum()?;
    let mut c = sp.eigenvectors.transpose() * v0;
    for (j, cj) in c.iter_mut().enumerate() {
        *cj *= (-sp.eigenvalues[j] * t).exp();
    }
    Ok(&sp.eigenvectors * c)
}

/// State at time `t` from `initial`; `f` is the exterior data in clamped mode.
pub fn evolve(
    sys: &DirichletSystem,
    initial: &GridFunction,
    mode: Mode,
    f: Option<&DVector<f64>>,
    t: f64,
) -> Result<EvolutionState> {
    let grid = sys.grid();
    grid.check(initial)?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time {t} must be >= 0")));
    }
    let ext = grid.restrict(initial, &Sel::ExteriorSupport)?;
    let inner = grid.restrict(initial, &Sel::Interior)?;
    let state = match (mode, f) {
        (Mode::Homogeneous, None) => {
            if ext.iter().any(|&v| v != 0.0) {
                return Err(Error::ModeMismatch("homogeneous evolution needs zero exterior values".into()));
            }
            if t == 0.0 {
                initial.clone()
            } else {
                grid.embed(&homogeneous(sys, &inner, t)?, &Sel::Interior)?
            }
        }
        (Mode::Clamped, Some(f)) => {
            if ext != *f {
                return Err(Error::ModeMismatch("initial state does not carry the clamp values".into()));
            }
            if t == 0.0 {
                initial.clone()
            } else {
                let uf = sys.solve_poisson(f)?;
                let uf_in = grid.restrict(&uf, &Sel::Interior)?;
                let v = homogeneous(sys, &(&inner - &uf_in), t)? + uf_in;
                let mut out = uf;
                for (i, &k) in grid.interior().iter().enumerate() {
                    out.values[grid.active()[k]] = v[i];
                }
                out
            }
        }
        (Mode::Homogeneous, Some(_)) => {
            return Err(Error::ModeMismatch("homogeneous evolution takes no exterior data".into()))
        }
        (Mode::Clamped, None) => return Err(Error::ModeMismatch("clamped evolution needs exterior data".into())),
    };
    Ok(EvolutionState { t, state, mode })
}

/// `(t, ||u(t) - u_steady||)` in the weighted norm over `Omega`.
pub fn decay_series(
    sys: &DirichletSystem,
    initial: &GridFunction,
    mode: Mode,
    f: Option<&DVector<f64>>,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let grid = sys.grid();
    let steady = match f {
        Some(f) => grid.restrict(&sys.solve_poisson(f)?, &Sel::Interior)?,
        None => DVector::zeros(grid.interior().len()),
    };
    times
        .iter()
        .map(|&t| {
            let st = evolve(sys, initial, mode, f, t)?;
            let d = grid.restrict(&st.state, &Sel::Interior)? - &steady;
            Ok((t, grid.dot_on(&d, &d).sqrt()))
        })
        .collect()
}

pub fn write_decay_csv(series: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "distance"])?;
    for (t, d) in series {
        w.write_record([fmt17(*t), fmt17(*d)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct HeatKernel {
    /// `p_t` on all box nodes
    pub values: DVector<f64>,
    /// `h sum p_t` over the box
    pub box_mass: f64,
    /// box mass plus the analytic tail outside the box
    pub mass: f64,
}

/// `p_t = F^{-1} e^{-t |xi|^{2s}}` sampled on the box nodes through a padded
/// periodic transform, with the leading image sum removed.
pub fn heat_kernel_free(grid: &Grid, s: f64, t: f64, pad: usize) -> Result<HeatKernel> {
    check_order(s)?;
    if grid.dim() != 1 {
        return Err(Error::Domain("heat kernel is sampled on 1D grids".into()));
    }
    if !(t > 0.0) || pad < 4 {
        return Err(Error::Domain("need t > 0 and pad >= 4".into()));
    }
    let n = grid.per_axis();
    let big = n * pad;
    let h = grid.h();
    let r = grid.box_radius();
    let l = big as f64 * h;
    // nodes x_m = -R + h (m + 1/2) of the periodic embedding
    let x0 = -r + 0.5 * h;
    let mut buf: Vec<Complex<f64>> = (0..big)
        .map(|k| {
            let kk = if k <= big / 2 { k as f64 } else { k as f64 - big as f64 };
            let xi = 2.0 * PI * kk / l;
            Complex::from_polar((-t * xi.abs().powf(2.0 * s)).exp(), xi * x0)
        })
        .collect();
    FftPlanner::<f64>::new().plan_fft_inverse(big).process(&mut buf);
    let c = cns(1, s)?;
    let image = t * c * 2.0 * zeta(1.0 + 2.0 * s) * l.powf(-1.0 - 2.0 * s);
    let values = DVector::from_iterator(n, buf[..n].iter().map(|z| z.re / l - image));
    let box_mass = h * values.sum();
    let tail = outside_mass(s, t, r);
    Ok(HeatKernel {
        values,
        box_mass,
        mass: box_mass + tail,
    })
}

/// `int_{|x|>R} p_t` from the large-`|x|` series
/// `p_t(x) = (1/pi) sum_k (-1)^{k+1} Gamma(1+2sk) sin(pi s k) t^k / k! |x|^{-1-2sk}`,
/// summed while its terms shrink.
fn outside_mass(s: f64, t: f64, r: f64) -> f64 {
    let mut total = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..=30 {
        let kf = k as f64;
        if (PI * s * kf).sin().abs() < 1e-12 {
            continue;
        }
        let term = (-1f64).powi(k + 1) * gamma(1.0 + 2.0 * s * kf) * (PI * s * kf).sin() / gamma(kf + 1.0)
            * t.powi(k)
            * r.powf(-2.0 * s * kf)
            / (2.0 * s * kf);
        if term.abs() >= prev {
            break;
        }
        total += term;
        prev = term.abs();
    }
    2.0 / PI * total
}

#[derive(Debug, Clone)]
pub struct DnCostReport {
    pub dt: f64,
    /// `max |(f - u(dt))/dt - Lambda f| / max |Lambda f|` over the exterior support
    pub max_rel_deviation: f64,
    pub cost: DVector<f64>,
    pub dn: DVector<f64>,
}

/// Evolves `u_f` freely (no clamp) over one step `dt` with the full operator
/// on the non-FAR nodes and compares the exterior loss rate with `Lambda_q f`.
/// `dt = None` uses `1e-3 / lambda_max`.
pub fn dn_cost_check(sys: &DirichletSystem, f: &DVector<f64>, dt: Option<f64>) -> Result<DnCostReport> {
    let grid = sys.grid();
    let mut h = sys.operator().matrix.clone();
    for (i, &k) in grid.interior().iter().enumerate() {
        h[(k, k)] += sys.potential().values[i];
    }
    let eig = h.symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let dt = dt.unwrap_or(1e-3 / lmax);
    let uf = grid.to_active(&sys.solve_poisson(f)?)?;
    let mut c = eig.eigenvectors.transpose() * &uf;
    for (j, cj) in c.iter_mut().enumerate() {
        *cj *= (-eig.eigenvalues[j] * dt).exp();
    }
    let u = &eig.eigenvectors * c;
    let cost = DVector::from_iterator(
        f.len(),
        grid.exterior().iter().enumerate().map(|(i, &k)| (f[i] - u[k]) / dt),
    );
    let dn = dn_pointwise(sys, f)?;
    let scale = dn.amax();
    let dev = (&cost - &dn).amax();
    Ok(DnCostReport {
        dt,
        max_rel_deviation: if scale > 0.0 { dev / scale } else { dev },
        cost,
        dn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::Potential;
    use crate::fracop::assemble_quadrature;
    use crate::grid::{build_grid, GridSpec};

    #[test]
    fn mode_mismatches() {
        let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
        let op = assemble_quadrature(&g, 0.5).unwrap();
        let sys = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
        let f = DVector::from_element(g.exterior().len(), 1.0);
        let u0 = g.embed(&f, &Sel::ExteriorSupport).unwrap();
        assert!(matches!(evolve(&sys, &u0, Mode::Homogeneous, None, 1.0), Err(Error::ModeMismatch(_))));
        assert!(matches!(evolve(&sys, &u0, Mode::Clamped, None, 1.0), Err(Error::ModeMismatch(_))));
        let ok = evolve(&sys, &u0, Mode::Clamped, Some(&f), 0.0).unwrap();
        assert_eq!(ok.state, u0);
    }

    #[test]
    fn zero_data_has_zero_cost() {
        let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
        let op = assemble_quadrature(&g, 0.5).unwrap();
        let sys = DirichletSystem::new(&g, &op, Potential::zero(&g)).unwrap();
        let r = dn_cost_check(&sys, &DVector::zeros(g.exterior().len()), None).unwrap();
        assert_eq!(r.max_rel_deviation, 0.0);
    }
}
