//! Poisson-kernel extension to the half space, the weighted trace derivative
//! that recovers `(-Delta)^s`, and a conditioning probe for the double
//! vanishing constraint `u = (-Delta)^s u = 0` on a window.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::fracop::{check_order, fft_multiplier, fmt17, FracOperator};
use crate::grid::{Grid, GridFunction};
use crate::special::{beta, beta_reg, gamma, zeta};

/// `w(x, y)` on every box node (rows) and ladder level (columns).
#[derive(Debug, Clone)]
pub struct ExtensionField {
    grid_id: u64,
    pub s: f64,
    pub y_levels: Vec<f64>,
    /// `u` on all box nodes
    pub base: DVector<f64>,
    pub values: DMatrix<f64>,
}

impl ExtensionField {
    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    /// `(x, y, w)` triples, level `y = 0` first.
    pub fn export_csv(&self, grid: &Grid, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "w"])?;
        for i in 0..self.base.len() {
            w.write_record([fmt17(grid.coords()[i][0]), fmt17(0.0), fmt17(self.base[i])])?;
        }
        for (l, &y) in self.y_levels.iter().enumerate() {
            for i in 0..self.base.len() {
                w.write_record([fmt17(grid.coords()[i][0]), fmt17(y), fmt17(self.values[(i, l)])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `d_s = 2^{2s-1} Gamma(s) / Gamma(1-s)`.
pub fn trace_constant(s: f64) -> f64 {
    2f64.powf(2.0 * s - 1.0) * gamma(s) / gamma(1.0 - s)
}

/// Normalization of `P_y(x) = c y^{2s} (x^2 + y^2)^{-(1+2s)/2}` in 1D.
fn kernel_constant(s: f64) -> f64 {
    gamma(0.5 + s) / (PI.sqrt() * gamma(s))
}

/// 1D Poisson kernel of order `s` at height `y`.
struct Kernel {
    s: f64,
    y: f64,
    c: f64,
    half_beta: f64,
}

impl Kernel {
    fn new(s: f64, y: f64) -> Self {
        let c = kernel_constant(s);
        Kernel {
            s,
            y,
            c,
            half_beta: 0.5 * beta(s, 0.5),
        }
    }

    /// Mass beyond `t >= 0`.
    fn tail(&self, t: f64) -> f64 {
        let x = self.y * self.y / (t * t + self.y * self.y);
        self.c * self.half_beta * beta_reg(self.s, 0.5, x)
    }

    /// `dP/dt`.
    fn slope(&self, t: f64) -> f64 {
        -self.c * self.y.powf(2.0 * self.s) * (1.0 + 2.0 * self.s) * t
            * (t * t + self.y * self.y).powf(-(3.0 + 2.0 * self.s) / 2.0)
    }

    /// Weight of the cell at offset `d = k h`, `k >= 0`: exact cell integral
    /// minus the `h^2/24` endpoint-derivative term.
    fn weight(&self, k: usize, h: f64) -> f64 {
        let d = k as f64 * h;
        let cell = if k == 0 {
            1.0 - 2.0 * self.tail(0.5 * h)
        } else {
            self.tail(d - 0.5 * h) - self.tail(d + 0.5 * h)
        };
        cell - h * h / 24.0 * (self.slope(d + 0.5 * h) - self.slope(d - 0.5 * h))
    }

    /// Mass of the row at `x` falling outside `[-R, R]`.
    fn outside(&self, x: f64, r: f64, h: f64) -> f64 {
        self.tail(r + x) + self.tail(r - x) + h * h / 24.0 * (self.slope(x + r) - self.slope(x - r))
    }
}

/// Toeplitz weights `W(k h)` for `k = 0..n` and the per-node outside mass.
pub fn kernel_weights(grid: &Grid, s: f64, y: f64) -> Result<(Vec<f64>, DVector<f64>)> {
    check_order(s)?;
    if grid.dim() != 1 {
        return Err(Error::Domain("the extension is implemented in 1D".into()));
    }
    if !(y > 0.0) {
        return Err(Error::Domain(format!("level y = {y} must be positive")));
    }
    let n = grid.per_axis();
    let h = grid.h();
    let k = Kernel::new(s, y);
    let w: Vec<f64> = (0..n).map(|j| k.weight(j, h)).collect();
    let out = DVector::from_iterator(n, grid.coords().iter().map(|p| k.outside(p[0], grid.box_radius(), h)));
    Ok((w, out))
}

/// `P_y * v` for values on all box nodes.
pub fn poisson_smooth(grid: &Grid, values: &DVector<f64>, s: f64, y: f64) -> Result<DVector<f64>> {
    let (w, _) = kernel_weights(grid, s, y)?;
    let n = grid.per_axis();
    if values.len() != n {
        return Err(Error::Domain("values must cover the box".into()));
    }
    Ok(DVector::from_fn(n, |i, _| {
        (0..n).map(|j| w[i.abs_diff(j)] * values[j]).sum()
    }))
}

/// Extension `w(., y) = P_y * u` at each ladder level.
pub fn cs_extend(grid: &Grid, u: &GridFunction, s: f64, y_levels: &[f64]) -> Result<ExtensionField> {
    grid.check(u)?;
    if grid.dim() != 1 {
        return Err(Error::Domain("the extension is implemented in 1D".into()));
    }
    if y_levels.is_empty() || y_levels[0] <= 0.0 || y_levels.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Domain("y levels must be positive and strictly increasing".into()));
    }
    let n = grid.per_axis();
    let mut values = DMatrix::zeros(n, y_levels.len());
    for (l, &y) in y_levels.iter().enumerate() {
        values.set_column(l, &poisson_smooth(grid, &u.values, s, y)?);
    }
    Ok(ExtensionField {
        grid_id: grid.id(),
        s,
        y_levels: y_levels.to_vec(),
        base: u.values.clone(),
        values,
    })
}

/// `h, 2h, 4h, ...`
pub fn y_ladder(h: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| h * 2f64.powi(k as i32)).collect()
}

/// `-d_s lim y^{1-2s} dw/dy`, from `(w - u)/y^{2s}` at the smallest (up to
/// four) levels, extrapolated to `y = 0` with exponents `2-2s, 2, 4-2s`.
pub fn trace_derivative(grid: &Grid, field: &ExtensionField) -> Result<GridFunction> {
    if field.grid_id != grid.id() {
        return Err(Error::GridMismatch("extension field from another grid".into()));
    }
    let ys = &field.y_levels;
    if ys.len() < 3 {
        return Err(Error::Ladder(format!("need 3 levels, got {}", ys.len())));
    }
    let k = ys.len().min(4);
    let ratio = ys[1] / ys[0];
    if ratio <= 1.0 || (1..k).any(|i| (ys[i] / ys[i - 1] / ratio - 1.0).abs() > 1e-9) {
        return Err(Error::Ladder("smallest levels are not a geometric progression".into()));
    }
    let s = field.s;
    let ds = trace_constant(s);
    let exps = [2.0 - 2.0 * s, 2.0, 4.0 - 2.0 * s];
    let vm = DMatrix::from_fn(k, k, |i, j| if j == 0 { 1.0 } else { ys[i].powf(exps[j - 1]) });
    let lu = vm.lu();
    let n = field.base.len();
    let mut out = grid.zeros();
    let mut t = DVector::zeros(k);
    for i in 0..n {
        if grid.active_pos(i).is_none() {
            continue;
        }
        for l in 0..k {
            t[l] = -2.0 * s * ds * (field.values[(i, l)] - field.base[i]) / ys[l].powf(2.0 * s);
        }
        let c = lu.solve(&t).ok_or_else(|| Error::Ladder("degenerate ladder".into()))?;
        out.values[i] = c[0];
    }
    Ok(out)
}

/// `F^{-1}{e^{-y|xi|} F u}` on the padded periodic embedding with the leading
/// image term removed: the `s = 1/2` extension, for cross-checks.
pub fn harmonic_extension_spectral(grid: &Grid, u: &GridFunction, y: f64, pad: usize) -> Result<DVector<f64>> {
    grid.check(u)?;
    if grid.dim() != 1 || pad < 4 {
        return Err(Error::Domain("1D grid and pad >= 4 required".into()));
    }
    let out = fft_multiplier(grid, &u.values, pad, |k| (-y * k).exp());
    let l = (grid.per_axis() * pad) as f64 * grid.h();
    let mass = grid.h() * u.values.sum();
    let shift = mass * y / PI * 2.0 * zeta(2.0) / (l * l);
    Ok(out.map(|v| v - shift))
}

#[derive(Debug, Clone)]
pub struct UcpReport {
    /// smallest singular value of the (square, zero-padded) constraint matrix
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// dimension of the near-null space `sigma <= max(norm_cap sigma_max, sigma_min)`
    pub null_dim: usize,
    /// unit-norm smoothest vector of the near-null space
    pub minimizer: GridFunction,
    /// energy fraction of the minimizer above `pi / (4h)`
    pub high_frequency_fraction: f64,
}

/// Conditioning of `u|_W = 0, (A u)|_W = 0` over functions supported in the
/// support set; `window` holds active indices.
pub fn ucp_conditioning(grid: &Grid, op: &FracOperator, window: &[usize], norm_cap: f64) -> Result<UcpReport> {
    op.check_grid(grid)?;
    if window.is_empty() {
        return Err(Error::EmptyRegion("ucp window".into()));
    }
    let n = grid.n_active();
    let rows = (2 * window.len()).max(n);
    let mut c = DMatrix::zeros(rows, n);
    for (r, &k) in window.iter().enumerate() {
        c[(r, k)] = 1.0;
        c.set_row(window.len() + r, &op.matrix.row(k));
    }
    let svd = c.svd(false, true);
    let sv = &svd.singular_values;
    let vt = svd.v_t.as_ref().unwrap();
    let sigma_max = sv.max();
    let sigma_min = sv.min();
    let cap = (norm_cap * sigma_max).max(sigma_min);
    let near: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= cap).collect();
    let z = DMatrix::from_fn(n, near.len(), |r, j| vt[(near[j], r)]);
    let d = gradient(grid);
    let dz = &d * &z;
    let eig = (dz.transpose() * &dz).symmetric_eigen();
    let jmin = eig.eigenvalues.imin();
    let mut v = &z * eig.eigenvectors.column(jmin);
    v /= v.norm();
    if v[v.iamax()] < 0.0 {
        v = -v;
    }
    let minimizer = grid.from_active(&v);
    let high_frequency_fraction = high_frequency_fraction(grid, &minimizer, PI / (4.0 * grid.h()))?;
    Ok(UcpReport {
        sigma_min,
        sigma_max,
        null_dim: near.len(),
        minimizer,
        high_frequency_fraction,
    })
}

/// Lattice first differences between neighbouring active nodes, over `h`.
fn gradient(grid: &Grid) -> DMatrix<f64> {
    let n = grid.per_axis();
    let mut pairs = Vec::new();
    for (k, &g) in grid.active().iter().enumerate() {
        let mut nbrs = vec![];
        if grid.dim() == 1 {
            if g + 1 < n {
                nbrs.push(g + 1);
            }
        } else {
            if (g + 1) % n != 0 {
                nbrs.push(g + 1);
            }
            if g + n < n * n {
                nbrs.push(g + n);
            }
        }
        for nb in nbrs {
            if let Some(j) = grid.active_pos(nb) {
                pairs.push((k, j));
            }
        }
    }
    let mut d = DMatrix::zeros(pairs.len(), grid.n_active());
    for (r, (a, b)) in pairs.into_iter().enumerate() {
        d[(r, a)] = -1.0 / grid.h();
        d[(r, b)] = 1.0 / grid.h();
    }
    d
}

/// Fraction of discrete Fourier energy at `|xi| > cutoff`, from a 4x padded
/// transform of the box values.
pub fn high_frequency_fraction(grid: &Grid, u: &GridFunction, cutoff: f64) -> Result<f64> {
    grid.check(u)?;
    let n = grid.per_axis();
    let big = 4 * n;
    let h = grid.h();
    let freq = |k: usize| {
        let kk = if k <= big / 2 { k as f64 } else { k as f64 - big as f64 };
        2.0 * PI * kk / (big as f64 * h)
    };
    let fft = FftPlanner::<f64>::new().plan_fft_forward(big);
    let (mut hi, mut total) = (0.0, 0.0);
    if grid.dim() == 1 {
        let mut buf = vec![Complex::new(0.0, 0.0); big];
        for i in 0..n {
            buf[i].re = u.values[i];
        }
        fft.process(&mut buf);
        for (k, z) in buf.iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            if freq(k).abs() > cutoff {
                hi += e;
            }
        }
    } else {
        let mut rows = vec![vec![Complex::new(0.0, 0.0); big]; big];
        for i in 0..n {
            for j in 0..n {
                rows[i][j].re = u.values[i * n + j];
            }
            fft.process(&mut rows[i]);
        }
        let mut col = vec![Complex::new(0.0, 0.0); big];
        for b in 0..big {
            for a in 0..big {
                col[a] = rows[a][b];
            }
            fft.process(&mut col);
            for (a, z) in col.iter().enumerate() {
                let e = z.norm_sqr();
                total += e;
                if freq(a).hypot(freq(b)) > cutoff {
                    hi += e;
                }
            }
        }
    }
    Ok(if total > 0.0 { hi / total } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};

    #[test]
    fn rows_carry_unit_mass() {
        let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
        for s in [0.25, 0.5, 0.75] {
            for y in [0.05, 0.4, 3.0] {
                let (w, out) = kernel_weights(&g, s, y).unwrap();
                let n = g.per_axis();
                for i in 0..n {
                    let m: f64 = (0..n).map(|j| w[i.abs_diff(j)]).sum::<f64>() + out[i];
                    assert!((m - 1.0).abs() < 1e-12, "s {s} y {y} row {i}: {m}");
                }
            }
        }
    }

    #[test]
    fn short_ladder_is_rejected() {
        let g = build_grid(GridSpec::desk_1d(0.05)).unwrap();
        let u = g.sample(|p| (-p[0] * p[0]).exp());
        let f = cs_extend(&g, &u, 0.5, &[0.05, 0.1]).unwrap();
        assert!(matches!(trace_derivative(&g, &f), Err(Error::Ladder(_))));
        let f = cs_extend(&g, &u, 0.5, &[0.05, 0.1, 0.3]).unwrap();
        assert!(matches!(trace_derivative(&g, &f), Err(Error::Ladder(_))));
    }
}
