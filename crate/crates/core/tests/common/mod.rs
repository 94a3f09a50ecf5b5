//! Test-only oracles, kept independent of the library code paths they check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Truncated Taylor series of `exp(m)`.
pub fn taylor_expm(m: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..terms {
        term = &term * m / k as f64;
        sum += &term;
    }
    sum
}

/// Adaptive Simpson quadrature of a scalar function.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// Spectral radius by plain eigen decomposition.
pub fn max_abs_eig(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// First harmonic of the response of `x' = Ax + B sin(ωt)`, `y = Cx + D u`,
/// with `x ← R x` whenever the input crosses zero. RK4 on a grid that lands
/// exactly on every crossing; the Fourier integrals ride along as two extra
/// states so short output spikes after a reset are resolved by the sub-steps.
/// Periods `[skip, periods)` are analysed.
#[allow(clippy::too_many_arguments)]
pub fn reset_first_harmonic(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: f64,
    r: &DMatrix<f64>,
    omega: f64,
    periods: usize,
    skip: usize,
    samples: usize,
) -> Complex64 {
    assert!(samples.is_multiple_of(2));
    let n = a.nrows();
    let h = 2.0 * PI / omega / samples as f64;
    let rho = max_abs_eig(a);
    let sub = ((h * rho / 0.2).ceil() as usize).max(1);
    let hs = h / sub as f64;
    let b = b.column(0).into_owned();
    let f = |z: &DVector<f64>, t: f64| {
        let x = z.rows(0, n);
        let (s, co) = (omega * t).sin_cos();
        let y = (c * x)[(0, 0)] + d * s;
        let mut dz = DVector::zeros(n + 2);
        dz.rows_mut(0, n).copy_from(&(a * x + &b * s));
        dz[n] = y * s;
        dz[n + 1] = y * co;
        dz
    };
    let mut z = DVector::<f64>::zeros(n + 2);
    let mut start = (0.0, 0.0);
    for k in 0..periods * samples {
        let t = k as f64 * h;
        if k > 0 && k % (samples / 2) == 0 {
            let x = r * z.rows(0, n);
            z.rows_mut(0, n).copy_from(&x);
        }
        if k == skip * samples {
            start = (z[n], z[n + 1]);
        }
        for j in 0..sub {
            let ts = t + j as f64 * hs;
            let k1 = f(&z, ts);
            let k2 = f(&(&z + &k1 * (hs / 2.0)), ts + hs / 2.0);
            let k3 = f(&(&z + &k2 * (hs / 2.0)), ts + hs / 2.0);
            let k4 = f(&(&z + &k3 * hs), ts + hs);
            z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (hs / 6.0);
        }
    }
    let span = (periods - skip) as f64 * 2.0 * PI / omega;
    Complex64::new(2.0 * (z[n] - start.0) / span, 2.0 * (z[n + 1] - start.1) / span)
}

/// Reset integrator driven by `sin(ωt)`: `y(t) = (±1 - cos ωt)/ω` on each
/// half period.
pub fn clegg_output(omega: f64, t: f64) -> f64 {
    let k = (omega * t / PI).floor();
    let sign = if (k as i64) % 2 == 0 { 1.0 } else { -1.0 };
    (sign - (omega * t).cos()) / omega
}

pub fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Direct evaluation of `sum c_i x^(n-i)` for polynomial coefficient lists.
pub fn poly_at(c: &[f64], x: Complex64) -> Complex64 {
    c.iter().fold(Complex64::new(0.0, 0.0), |acc, k| acc * x + k)
}

pub fn phase_deg(z: Complex64) -> f64 {
    z.arg().to_degrees()
}
