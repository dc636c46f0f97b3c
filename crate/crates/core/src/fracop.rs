//! Dense quadrature matrix for `(-Delta)^s` on functions supported in the
//! support set, and the FFT multiplier route used to validate it.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, Region, Shape};
use crate::special::{gamma, hurwitz_zeta, integrate, square_lattice_zeta, zeta};

/// `c_{n,s} = 4^s Gamma(n/2+s) / (pi^{n/2} |Gamma(-s)|)`.
pub fn cns(n: usize, s: f64) -> Result<f64> {
    check_order(s)?;
    if n != 1 && n != 2 {
        return Err(Error::Domain(format!("dimension {n} not supported")));
    }
    let nf = n as f64;
    Ok(4f64.powf(s) * gamma(nf / 2.0 + s) / (PI.powf(nf / 2.0) * gamma(-s).abs()))
}

pub(crate) fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("order s = {s} outside (0,1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    /// midpoint far field, one moment-corrected neighbour shell
    Corrected1,
    /// two corrected neighbour shells (1D, where the weights stay positive)
    Corrected2,
}

/// Symmetric matrix over the active (non-FAR) nodes realizing `(-Delta)^s`
/// for grid functions that vanish outside the support set.
#[derive(Debug, Clone)]
pub struct FracOperator {
    grid_id: u64,
    pub s: f64,
    pub matrix: DMatrix<f64>,
    pub tail: DVector<f64>,
    pub method: Method,
}

impl FracOperator {
    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn apply(&self, grid: &Grid, u: &GridFunction) -> Result<GridFunction> {
        self.check_grid(grid)?;
        let v = grid.to_active(u)?;
        Ok(grid.from_active(&(&self.matrix * v)))
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.id() != self.grid_id {
            return Err(Error::GridMismatch("operator assembled on another grid".into()));
        }
        Ok(())
    }

    /// Smallest eigenvalue of the matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn export(&self, grid: &Grid, path: &Path, format: ExportFormat) -> Result<()> {
        match format {
            ExportFormat::Csv => {
                let mut w = csv::Writer::from_path(path)?;
                let n = self.matrix.nrows();
                let mut header = vec!["node".to_string(), "x".into(), "y".into(), "tail".into()];
                header.extend((0..n).map(|j| format!("a{j}")));
                w.write_record(&header)?;
                for i in 0..n {
                    let p = grid.active_coord(i);
                    let mut rec = vec![i.to_string(), fmt17(p[0]), fmt17(p[1]), fmt17(self.tail[i])];
                    rec.extend((0..n).map(|j| fmt17(self.matrix[(i, j)])));
                    w.write_record(&rec)?;
                }
                w.flush()?;
            }
            ExportFormat::Binary => {
                // little-endian: n (u64), s (f64), tail (n f64), row-major matrix
                let n = self.matrix.nrows();
                let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                f.write_all(&(n as u64).to_le_bytes())?;
                f.write_all(&self.s.to_le_bytes())?;
                for v in self.tail.iter() {
                    f.write_all(&v.to_le_bytes())?;
                }
                for i in 0..n {
                    for j in 0..n {
                        f.write_all(&self.matrix[(i, j)].to_le_bytes())?;
                    }
                }
                f.flush()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Binary,
}

/// 17 significant digits, enough for a bit-exact round trip.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Dimensionless corrections `delta_k` (in units of `c h^{-2s}`) added to the
/// first lattice shells in 1D. They cancel the leading terms of the singular
/// Euler-Maclaurin expansion of the lattice sum.
fn shell_corrections_1d(s: f64) -> (Vec<f64>, Method) {
    let r0 = -zeta(2.0 * s - 1.0);
    let r1 = -zeta(2.0 * s - 3.0);
    // d1 + 4 d2 = r0, d1 + 16 d2 = r1
    let d2 = (r1 - r0) / 12.0;
    let d1 = r0 - 4.0 * d2;
    let w1 = 1.0 + d1;
    let w2 = 2f64.powf(-1.0 - 2.0 * s) + d2;
    if w1 > 0.0 && w2 > 0.0 {
        (vec![d1, d2], Method::Corrected2)
    } else {
        (vec![r0], Method::Corrected1)
    }
}

/// Assembles the quadrature matrix.
///
/// Off-diagonal entries are `-c h^n |x_i - x_j|^{-n-2s}` plus the nearest-shell
/// moment correction; the diagonal is the negated off-diagonal row sum plus the
/// tail, the kernel mass of all lattice nodes outside the support set (and, in
/// 2D, of the continuum outside the box).
pub fn assemble_quadrature(grid: &Grid, s: f64) -> Result<FracOperator> {
    check_order(s)?;
    match grid.dim() {
        1 => assemble_1d(grid, s),
        _ => assemble_2d(grid, s),
    }
}

fn assemble_1d(grid: &Grid, s: f64) -> Result<FracOperator> {
    let c = cns(1, s)?;
    let scale = c * grid.h().powf(-2.0 * s);
    let m = grid.n_active();
    let (delta, method) = shell_corrections_1d(s);
    let weight = |k: usize| -> f64 {
        let mut w = (k as f64).powf(-1.0 - 2.0 * s);
        if k <= delta.len() {
            w += delta[k - 1];
        }
        scale * w
    };
    // lattice mass beyond `first` steps on one side
    let side_tail = |first: usize| -> f64 {
        let mut t = scale * hurwitz_zeta(1.0 + 2.0 * s, first as f64);
        for (k, d) in delta.iter().enumerate() {
            if k + 1 >= first {
                t += scale * d;
            }
        }
        t
    };
    let weights: Vec<f64> = (0..m).map(|k| if k == 0 { 0.0 } else { weight(k) }).collect();
    let tail = DVector::from_iterator(m, (0..m).map(|i| side_tail(i + 1) + side_tail(m - i)));
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                a[(i, j)] = -weights[i.abs_diff(j)];
            }
        }
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| weights[i.abs_diff(j)]).sum();
        a[(i, i)] = off + tail[i];
    }
    Ok(FracOperator {
        grid_id: grid.id(),
        s,
        matrix: a,
        tail,
        method,
    })
}

/// Integral of `|x - y|^{-2-2s}` over the complement of `[-R,R]^2`, by rays:
/// `int_0^{2 pi} r_b(theta)^{-2s} / (2s) d theta`.
fn outside_box_2d(p: [f64; 2], r: f64, s: f64) -> Result<f64> {
    let ray = |t: f64| -> f64 {
        let (sn, cs) = t.sin_cos();
        let mut rb = f64::INFINITY;
        if cs > 1e-15 {
            rb = rb.min((r - p[0]) / cs);
        }
        if cs < -1e-15 {
            rb = rb.min((-r - p[0]) / cs);
        }
        if sn > 1e-15 {
            rb = rb.min((r - p[1]) / sn);
        }
        if sn < -1e-15 {
            rb = rb.min((-r - p[1]) / sn);
        }
        rb.powf(-2.0 * s) / (2.0 * s)
    };
    let mut cuts: Vec<f64> = [[r, r], [-r, r], [-r, -r], [r, -r]]
        .iter()
        .map(|q| (q[1] - p[1]).atan2(q[0] - p[0]).rem_euclid(2.0 * PI))
        .collect();
    cuts.push(0.0);
    cuts.push(2.0 * PI);
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            total += integrate(ray, w[0], w[1], 1e-10)?;
        }
    }
    Ok(total)
}

fn assemble_2d(grid: &Grid, s: f64) -> Result<FracOperator> {
    let c = cns(2, s)?;
    let h = grid.h();
    let scale = c * h.powf(-2.0 * s);
    let nn = -square_lattice_zeta(2.0 * s) / 4.0;
    let m = grid.n_active();
    let act: Vec<[f64; 2]> = (0..m).map(|k| grid.active_coord(k)).collect();
    let far: Vec<[f64; 2]> = grid
        .coords()
        .iter()
        .zip(grid.regions())
        .filter(|(_, r)| **r == Region::ExteriorFar)
        .map(|(p, _)| *p)
        .collect();
    let weight = |p: [f64; 2], q: [f64; 2]| -> f64 {
        let di = ((p[0] - q[0]) / h).round();
        let dj = ((p[1] - q[1]) / h).round();
        let m2 = di * di + dj * dj;
        let mut w = m2.powf(-1.0 - s);
        if m2 == 1.0 {
            w += nn;
        }
        scale * w
    };
    let r = grid.box_radius();
    let tails: Vec<Result<f64>> = act
        .par_iter()
        .map(|&p| {
            let lattice: f64 = far.iter().map(|&q| weight(p, q)).sum();
            Ok(lattice + c * outside_box_2d(p, r, s)?)
        })
        .collect();
    let tail = DVector::from_vec(tails.into_iter().collect::<Result<Vec<_>>>()?);
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| if j > i { -weight(act[i], act[j]) } else { 0.0 })
                .collect()
        })
        .collect();
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            a[(i, j)] = rows[i][j];
            a[(j, i)] = rows[i][j];
        }
    }
    for i in 0..m {
        let off: f64 = a.row(i).iter().sum();
        a[(i, i)] = -off + tail[i];
    }
    Ok(FracOperator {
        grid_id: grid.id(),
        s,
        matrix: a,
        tail,
        method: Method::Corrected1,
    })
}

/// Applies a radial Fourier multiplier `symbol(|xi|)` to values on all box
/// nodes, using a zero-padded periodic embedding of side `pad * N`.
pub fn fft_multiplier<F: Fn(f64) -> f64 + Sync>(
    grid: &Grid,
    values: &DVector<f64>,
    pad: usize,
    symbol: F,
) -> DVector<f64> {
    let n = grid.per_axis();
    let big = n * pad;
    let h = grid.h();
    let freq = |k: usize| -> f64 {
        let kk = if k <= big / 2 { k as f64 } else { k as f64 - big as f64 };
        2.0 * PI * kk / (big as f64 * h)
    };
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(big);
    let inv = planner.plan_fft_inverse(big);
    if grid.dim() == 1 {
        let mut buf = vec![Complex::new(0.0, 0.0); big];
        for i in 0..n {
            buf[i].re = values[i];
        }
        fwd.process(&mut buf);
        for (k, z) in buf.iter_mut().enumerate() {
            *z *= symbol(freq(k).abs());
        }
        inv.process(&mut buf);
        DVector::from_iterator(n, buf[..n].iter().map(|z| z.re / big as f64))
    } else {
        let mut buf = vec![Complex::new(0.0, 0.0); big * big];
        for i in 0..n {
            for j in 0..n {
                buf[i * big + j].re = values[i * n + j];
            }
        }
        // rows, then columns through a transpose
        for row in buf.chunks_mut(big) {
            fwd.process(row);
        }
        let mut t = transpose(&buf, big);
        for row in t.chunks_mut(big) {
            fwd.process(row);
        }
        for a in 0..big {
            for b in 0..big {
                let k = freq(a).hypot(freq(b));
                t[a * big + b] *= symbol(k);
            }
        }
        for row in t.chunks_mut(big) {
            inv.process(row);
        }
        let mut back = transpose(&t, big);
        for row in back.chunks_mut(big) {
            inv.process(row);
        }
        let norm = (big * big) as f64;
        DVector::from_iterator(
            n * n,
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| back[i * big + j].re / norm),
        )
    }
}

fn transpose(a: &[Complex<f64>], n: usize) -> Vec<Complex<f64>> {
    let mut t = vec![Complex::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Leading image-sum correction for a kernel tail `k |x|^{-n-2s}` on the
/// periodic embedding of side `L`, for total mass `mass`.
pub(crate) fn image_correction(dim: usize, s: f64, l: f64) -> f64 {
    if dim == 1 {
        2.0 * zeta(1.0 + 2.0 * s) * l.powf(-1.0 - 2.0 * s)
    } else {
        square_lattice_zeta(2.0 + 2.0 * s) * l.powf(-2.0 - 2.0 * s)
    }
}

/// `F^{-1}{|xi|^{2s} F u}` on the padded periodic embedding, with the leading
/// periodization (image) error removed; returned on non-FAR nodes.
pub fn apply_spectral(grid: &Grid, u: &GridFunction, s: f64, pad: usize) -> Result<GridFunction> {
    check_order(s)?;
    grid.check(u)?;
    if pad < 4 {
        return Err(Error::Domain(format!("pad factor {pad} < 4")));
    }
    let dim = grid.dim();
    let out = fft_multiplier(grid, &u.values, pad, |k| k.powf(2.0 * s));
    let c = cns(dim, s)?;
    let mass = grid.cell_volume() * u.values.sum();
    let l = (grid.per_axis() * pad) as f64 * grid.h();
    let shift = c * mass * image_correction(dim, s, l);
    let mut res = grid.zeros();
    for &g in grid.active() {
        res.values[g] = out[g] + shift;
    }
    Ok(res)
}

/// Gaussian bumps `exp(-|x-c|^2/(2 sigma^2))` with centres uniform in the
/// middle half of `Omega`'s bounding box and `sigma` uniform in `width`,
/// flushed to zero below 1e-12. Deterministic in `seed`.
pub fn oracle_bumps(grid: &Grid, count: usize, seed: u64, width: (f64, f64)) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = grid.spec().omega.bounds();
    (0..count)
        .map(|_| {
            let mut c = [0.0; 2];
            for d in 0..grid.dim() {
                let mid = 0.5 * (lo[d] + hi[d]);
                let q = 0.25 * (hi[d] - lo[d]);
                c[d] = rng.random_range(mid - q..mid + q);
            }
            let sigma = rng.random_range(width.0..width.1);
            grid.sample(|p| {
                let r2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                let v = (-r2 / (2.0 * sigma * sigma)).exp();
                if v < 1e-12 { 0.0 } else { v }
            })
        })
        .collect()
}

/// `max |A u - S u| / max |S u|` over active nodes, `S` the spectral route.
pub fn oracle_discrepancy(grid: &Grid, op: &FracOperator, u: &GridFunction, pad: usize) -> Result<f64> {
    let quad = op.apply(grid, u)?;
    let spec = apply_spectral(grid, u, op.s, pad)?;
    Ok((&quad.values - &spec.values).amax() / spec.values.amax())
}

/// Relative oscillation `(max - min) / mean` of `u / d(x)^s` on the inner 80%
/// of a 1D interval `Omega = (a, b)`, where `A_{Omega Omega} u = 1`.
///
/// `d(x) = (x - a)(b - x)/(b - a)`: smooth, positive inside and tangent to the
/// boundary distance at both ends.
pub fn boundary_profile_oscillation(grid: &Grid, op: &FracOperator) -> Result<f64> {
    op.check_grid(grid)?;
    let (a, b) = match grid.spec().omega {
        Shape::Interval { a, b } => (a, b),
        _ => return Err(Error::Domain("boundary profile diagnostic is 1D only".into())),
    };
    let idx = grid.interior();
    let sub = op.matrix.select_rows(idx).select_columns(idx);
    let chol = sub
        .cholesky()
        .ok_or_else(|| Error::Domain("interior block not positive definite".into()))?;
    let u = chol.solve(&DVector::from_element(idx.len(), 1.0));
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let ratios: Vec<f64> = idx
        .iter()
        .enumerate()
        .filter(|(_, &k)| (grid.active_coord(k)[0] - mid).abs() <= 0.8 * half)
        .map(|(i, &k)| {
            let x = grid.active_coord(k)[0];
            let d = (x - a) * (b - x) / (b - a);
            u[i] / d.powf(op.s)
        })
        .collect();
    let max = ratios.iter().copied().fold(f64::MIN, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok((max - min) / mean)
}
