//! Dense matrix kernels: exponential, eigenvalues, balancing.
//!
//! nalgebra supplies storage, products, LU and the Householder Hessenberg
//! reduction. The eigenvalue iteration and the exponential are written out
//! here so their convergence and overflow behaviour is under our control.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Induced 1-norm (max column sum).
pub fn norm1(a: &Mat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(format!("{}x{} system", a.nrows(), a.ncols())))
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    solve(a, &Mat::identity(a.nrows(), a.ncols()))
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(f64, &[f64]); 4] = [
    (1.495585217958292e-2, &PADE3),
    (2.539_398_330_063_23e-1, &PADE5),
    (9.504178996162932e-1, &PADE7),
    (2.097847961257068e0, &PADE9),
];
const THETA13: f64 = 5.371920351148152;

fn pade_low(a: &Mat, b: &[f64]) -> Result<Mat> {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let a2 = a * a;
    let mut pw = id.clone();
    let mut u = id.scale(b[1]);
    let mut v = id.scale(b[0]);
    let m = b.len() - 1;
    for k in 1..=(m / 2) {
        pw = &pw * &a2;
        u += pw.scale(b[2 * k + 1]);
        v += pw.scale(b[2 * k]);
    }
    let u = a * u;
    solve(&(&v - &u), &(&v + &u))
}

/// Matrix exponential by scaling and squaring with a Padé approximant
/// (degree chosen from the 1-norm as in Higham's 2005 algorithm).
///
/// Fails with [`Error::Singular`] when the result is not finite.
pub fn expm(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("expm of a {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let nrm = norm1(a);
    let overflow = || Error::Singular(format!("matrix exponential overflows (1-norm {nrm:e})"));
    if !nrm.is_finite() {
        return Err(overflow());
    }
    for (theta, b) in THETA {
        if nrm <= theta {
            return pade_low(a, b)
                .ok()
                .filter(|m| m.iter().all(|v| v.is_finite()))
                .ok_or_else(overflow);
        }
    }
    let s = ((nrm / THETA13).log2().ceil()).max(0.0) as i32;
    let a = a.scale(0.5f64.powi(s));
    let b = &PADE13;
    let id = Mat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (a6.scale(b[13]) + a4.scale(b[11]) + a2.scale(b[9]))
        + a6.scale(b[7])
        + a4.scale(b[5])
        + a2.scale(b[3])
        + id.scale(b[1]);
    let u = &a * u_inner;
    let v = &a6 * (a6.scale(b[12]) + a4.scale(b[10]) + a2.scale(b[8]))
        + a6.scale(b[6])
        + a4.scale(b[4])
        + a2.scale(b[2])
        + id.scale(b[0]);
    let mut r = solve(&(&v - &u), &(&v + &u)).map_err(|_| overflow())?;
    for _ in 0..s {
        r = &r * &r;
        if !r.iter().all(|v| v.is_finite()) {
            return Err(overflow());
        }
    }
    Ok(r)
}

/// `e^A` computed on the balanced matrix and scaled back. Badly scaled
/// loop matrices lose accuracy in plain scaling and squaring.
pub fn expm_balanced(a: &Mat) -> Result<Mat> {
    let (bal, d) = balance(a);
    let mut e = expm(&bal)?;
    for i in 0..e.nrows() {
        for j in 0..e.ncols() {
            e[(i, j)] *= d[i] / d[j];
        }
    }
    Ok(e)
}

/// Diagonal similarity balancing (Parlett-Reinsch, radix 2).
///
/// Returns `(D^-1 A D, d)` where `d` holds the diagonal of `D`. Scaling by
/// powers of two is exact, so eigenvalues are unchanged bit for bit in the
/// similarity itself.
pub fn balance(a: &Mat) -> (Mat, DVector<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut d = DVector::from_element(n, 1.0);
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let gi = 1.0 / f;
                d[i] *= f;
                for j in 0..n {
                    m[(i, j)] *= gi;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
    (m, d)
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift
/// QR iteration. The matrix is destroyed.
fn hqr(a: &mut Mat) -> Result<Vec<Complex64>> {
    let n = a.nrows() as isize;
    let mut wr = vec![0.0; n as usize];
    let mut wi = vec![0.0; n as usize];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += a[(i as usize, j as usize)].abs();
        }
    }
    macro_rules! at {
        ($i:expr, $j:expr) => {
            a[(($i) as usize, ($j) as usize)]
        };
    }
    let mut nn = n - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 1 {
                let mut s = at!(l - 1, l - 1).abs() + at!(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at!(l, l - 1).abs() + s == s {
                    at!(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = at!(nn, nn);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = at!(nn - 1, nn - 1);
            let mut w = at!(nn, nn - 1) * at!(nn - 1, nn);
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                let (i1, i2) = ((nn - 1) as usize, nn as usize);
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[i1] = x + z;
                    wr[i2] = if z != 0.0 { x - w / z } else { x + z };
                    wi[i1] = 0.0;
                    wi[i2] = 0.0;
                } else {
                    wr[i1] = x + p;
                    wr[i2] = x + p;
                    wi[i1] = z;
                    wi[i2] = -z;
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(Error::NoConvergence);
            }
            if its == 10 || its == 20 || its == 40 {
                t += x;
                for i in 0..=nn {
                    at!(i, i) -= x;
                }
                let s = at!(nn, nn - 1).abs() + at!(nn - 1, nn - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = at!(m, m);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / at!(m + 1, m) + at!(m, m + 1);
                q = at!(m + 1, m + 1) - z - rr - ss;
                r = at!(m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = at!(m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (at!(m - 1, m - 1).abs() + z.abs() + at!(m + 1, m + 1).abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                at!(i, i - 2) = 0.0;
                if i != m + 2 {
                    at!(i, i - 3) = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = at!(k, k - 1);
                    q = at!(k + 1, k - 1);
                    r = if k != nn - 1 { at!(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            at!(k, k - 1) = -at!(k, k - 1);
                        }
                    } else {
                        at!(k, k - 1) = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = at!(k, j) + q * at!(k + 1, j);
                        if k != nn - 1 {
                            p += r * at!(k + 2, j);
                            at!(k + 2, j) -= p * z;
                        }
                        at!(k + 1, j) -= p * y;
                        at!(k, j) -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * at!(i, k) + y * at!(i, k + 1);
                        if k != nn - 1 {
                            p += z * at!(i, k + 2);
                            at!(i, k + 2) -= p * r;
                        }
                        at!(i, k + 1) -= p * q;
                        at!(i, k) -= p;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}

/// All eigenvalues of a real square matrix: balance, reduce to Hessenberg
/// form, then run the shifted QR iteration.
pub fn eigenvalues(a: &Mat) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "eigenvalues of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular("non-finite entries".into()));
    }
    // power-of-two scaling to unit size is exact and keeps the shift
    // arithmetic away from underflow on very small matrices
    let big = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if big == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); a.nrows()]);
    }
    let k = (big.log2().round() as i32).clamp(-1000, 1000);
    let (b, _) = balance(&(a * 2f64.powi(-k)));
    let mut h = b.hessenberg().h();
    let up = 2f64.powi(k);
    Ok(hqr(&mut h)?.into_iter().map(|z| z * up).collect())
}

/// Relative distance, measured between logarithms, below which two
/// eigenvalues count as one cluster in [`spectral_radius`].
pub const LOG_CLUSTER_TOL: f64 = 1e-3;

/// Largest eigenvalue magnitude.
///
/// A repeated eigenvalue of a defective block comes back split into a
/// small cluster, which biases the largest magnitude upward. Eigenvalues
/// whose logarithms lie within [`LOG_CLUSTER_TOL`] of each other, relative
/// to their size, are merged and represented by their mean, which stays
/// accurate. Measuring in the log domain keeps distinct modes apart when a
/// short-horizon exponential crowds them near 1.
pub fn spectral_radius(a: &Mat) -> Result<f64> {
    let ev = eigenvalues(a)?;
    let n = ev.len();
    let top = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0.0);
    }
    let logs: Vec<Option<Complex64>> = ev.iter().map(|z| (z.norm() > 1e-200 * top).then(|| z.ln())).collect();
    let mut group: Vec<usize> = (0..n).collect();
    fn root(g: &mut [usize], mut i: usize) -> usize {
        while g[i] != i {
            g[i] = g[g[i]];
            i = g[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if let (Some(li), Some(lj)) = (logs[i], logs[j]) {
                if (li - lj).norm() <= LOG_CLUSTER_TOL * li.norm().max(lj.norm()) {
                    let (x, y) = (root(&mut group, i), root(&mut group, j));
                    group[x.max(y)] = x.min(y);
                }
            }
        }
    }
    let mut sums = vec![(Complex64::new(0.0, 0.0), 0usize); n];
    for (i, z) in ev.iter().enumerate() {
        let r = root(&mut group, i);
        sums[r].0 += z;
        sums[r].1 += 1;
    }
    Ok(sums
        .iter()
        .filter(|(_, k)| *k > 0)
        .map(|(s, k)| (s / *k as f64).norm())
        .fold(0.0, f64::max))
}

pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), (b.nrows(), b.ncols())).copy_from(*b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}
