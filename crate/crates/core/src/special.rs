//! Special functions used by the lattice assembly: Hurwitz/Riemann zeta,
//! Dirichlet beta, the square-lattice Epstein zeta, and an adaptive
//! Gauss-Kronrod integrator.

use crate::error::{Error, Result};

pub use statrs::function::beta::{beta, beta_reg};
pub use statrs::function::gamma::gamma;

// B_2, B_4, ..., B_24
const BERNOULLI: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// Hurwitz zeta `sum_{k>=0} (k+a)^{-s}`, analytically continued to every `s != 1`.
///
/// Euler-Maclaurin with a shifted start, so negative `s` (needed for the
/// moment corrections) is handled by the same formula.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!((s - 1.0).abs() > 1e-14, "pole at s = 1");
    hurwitz_regular(s, a) + 1.0 / (s - 1.0)
}

/// `zeta(s, a) - 1/(s-1)`, entire in `s`.
fn hurwitz_regular(s: f64, a: f64) -> f64 {
    assert!(a > 0.0, "hurwitz_zeta needs a > 0");
    // negative s: keep the head short, its sum cancels against the tail
    let n = if s < 0.0 { 6 } else { 10 + s.ceil() as usize };
    let mut head = 0.0;
    for k in 0..n {
        head += (a + k as f64).powf(-s);
    }
    let x = a + n as f64;
    // x^{1-s}/(s-1) - 1/(s-1), stable through s = 1
    let lx = x.ln();
    let pole = if (s - 1.0).abs() < 1e-300 {
        -lx
    } else {
        -((1.0 - s) * lx).exp_m1() / (1.0 - s)
    };
    let mut tail = pole + 0.5 * x.powf(-s);
    // rising factorial s(s+1)...(s+2j-2) / (2j)!
    let mut coef = s / 2.0;
    let mut xp = x.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        let term = b * coef * xp;
        tail += term;
        if term.abs() < 1e-18 * (tail.abs() + head.abs()) {
            break;
        }
        let m = (2 * j + 2) as f64;
        coef *= (s + m - 1.0) * (s + m) / ((m + 1.0) * (m + 2.0));
        xp /= x * x;
    }
    head + tail
}

/// Riemann zeta for `s != 1`.
pub fn zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

/// Dirichlet beta `sum_{k>=0} (-1)^k (2k+1)^{-t}`, continued in `t`.
pub fn dirichlet_beta(t: f64) -> f64 {
    4f64.powf(-t) * (hurwitz_regular(t, 0.25) - hurwitz_regular(t, 0.75))
}

/// Square-lattice Epstein zeta `sum' |k|^{-sigma}` over `Z^2 \ {0}`, continued in `sigma != 2`.
pub fn square_lattice_zeta(sigma: f64) -> f64 {
    4.0 * zeta(sigma / 2.0) * dirichlet_beta(sigma / 2.0)
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = r * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
///
/// Fails with `QuadratureFail` when the relative tolerance is not met
/// within the subdivision budget.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..2000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            return Ok(total);
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    Err(Error::QuadratureFail(format!(
        "no convergence on [{a}, {b}] at rel tol {rel_tol:e}"
    )))
}
