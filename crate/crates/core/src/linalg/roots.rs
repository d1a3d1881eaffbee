//! Polynomial roots as eigenvalues of the (balanced) companion matrix, with a
//! few Newton steps on the original polynomial to polish each root.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

const MAX_QR_ITERATIONS: usize = 60;
const NEWTON_STEPS: usize = 8;

/// Roots of `sum_i coeffs[i] x^i`. The leading coefficient must be nonzero.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let deg = coeffs.len().saturating_sub(1);
    let lead = *coeffs.last().ok_or_else(|| invalid("empty polynomial"))?;
    if lead == 0.0 || !lead.is_finite() {
        return Err(invalid("leading coefficient must be finite and nonzero"));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(invalid("non-finite polynomial coefficient"));
    }
    if deg == 0 {
        return Ok(vec![]);
    }
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    if deg == 1 {
        return Ok(vec![Complex64::new(-monic[0], 0.0)]);
    }

    // Companion matrix in upper Hessenberg form: first row holds -c_{d-1}..-c_0.
    let mut a = vec![vec![0.0; deg]; deg];
    for j in 0..deg {
        a[0][j] = -monic[deg - 1 - j];
    }
    for i in 1..deg {
        a[i][i - 1] = 1.0;
    }
    balance(&mut a);
    let raw = hessenberg_eigenvalues(&mut a)?;
    Ok(raw.into_iter().map(|z| polish(&monic, z)).collect())
}

/// Evaluates the polynomial with real coefficients at a complex point.
pub fn eval_poly(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn polish(coeffs: &[f64], mut z: Complex64) -> Complex64 {
    let (mut pz, _) = eval_with_derivative(coeffs, z);
    for _ in 0..NEWTON_STEPS {
        let (p, dp) = eval_with_derivative(coeffs, z);
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let cand = z - p / dp;
        let pc = eval_poly(coeffs, cand);
        if !(pc.norm() < pz.norm()) {
            break;
        }
        z = cand;
        pz = pc;
    }
    z
}

/// Parlett-Reinsch balancing by powers of two; preserves eigenvalues and
/// the Hessenberg zero pattern.
fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
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
                    let ginv = 1.0 / f;
                    a[i].iter_mut().for_each(|x| *x *= ginv);
                    a.iter_mut().for_each(|row| row[i] *= f);
                }
            }
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the shifted double-step QR
/// algorithm. The matrix is destroyed.
fn hessenberg_eigenvalues(a: &mut [Vec<f64>]) -> Result<Vec<Complex64>> {
    let n = a.len() as isize;
    let mut out = vec![Complex64::new(0.0, 0.0); n as usize];
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n as usize {
        for j in i.saturating_sub(1)..n as usize {
            anorm += a[i][j].abs();
        }
    }
    let at = |a: &[Vec<f64>], i: isize, j: isize| a[i as usize][j as usize];

    let mut nn = n - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l > 0 {
                let mut s = at(a, l - 1, l - 1).abs() + at(a, l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at(a, l, l - 1).abs() <= eps * s {
                    a[l as usize][(l - 1) as usize] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = at(a, nn, nn);
            if l == nn {
                out[nn as usize] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = at(a, nn - 1, nn - 1);
            let mut w = at(a, nn, nn - 1) * at(a, nn - 1, nn);
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    out[(nn - 1) as usize] = Complex64::new(x + z, 0.0);
                    out[nn as usize] = Complex64::new(if z != 0.0 { x - w / z } else { x + z }, 0.0);
                } else {
                    out[nn as usize] = Complex64::new(x + p, -z);
                    out[(nn - 1) as usize] = Complex64::new(x + p, z);
                }
                nn -= 2;
                break;
            }
            if its == MAX_QR_ITERATIONS {
                return Err(Error::NoConvergence {
                    iterations: its,
                    detail: format!("companion QR stalled with {} roots unresolved", nn + 1),
                });
            }
            if its == 10 || its == 20 {
                t += x;
                for i in 0..=nn {
                    a[i as usize][i as usize] -= x;
                }
                let s = at(a, nn, nn - 1).abs() + at(a, nn - 1, nn - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            let (mut p, mut q, mut r);
            let mut m = nn - 2;
            loop {
                let z = at(a, m, m);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / at(a, m + 1, m) + at(a, m, m + 1);
                q = at(a, m + 1, m + 1) - z - rr - ss;
                r = at(a, m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = at(a, m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (at(a, m - 1, m - 1).abs() + z.abs() + at(a, m + 1, m + 1).abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nn - 1 {
                a[(i + 2) as usize][i as usize] = 0.0;
                if i != m {
                    a[(i + 2) as usize][(i - 1) as usize] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = at(a, k, k - 1);
                    q = at(a, k + 1, k - 1);
                    r = if k + 1 != nn { at(a, k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k as usize][(k - 1) as usize] = -at(a, k, k - 1);
                        }
                    } else {
                        a[k as usize][(k - 1) as usize] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let (ku, j) = (k as usize, j as usize);
                        let mut pp = a[ku][j] + q * a[ku + 1][j];
                        if k + 1 != nn {
                            pp += r * a[ku + 2][j];
                            a[ku + 2][j] -= pp * z;
                        }
                        a[ku + 1][j] -= pp * y;
                        a[ku][j] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let (iu, ku) = (i as usize, k as usize);
                        let mut pp = x * a[iu][ku] + y * a[iu][ku + 1];
                        if k + 1 != nn {
                            pp += z * a[iu][ku + 2];
                            a[iu][ku + 2] -= pp * r;
                        }
                        a[iu][ku + 1] -= pp * q;
                        a[iu][ku] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_real(mut v: Vec<Complex64>) -> Vec<f64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re));
        v.iter().map(|z| z.re).collect()
    }

    #[test]
    fn quadratic() {
        let r = polynomial_roots(&[0.1875, -1.0, 1.0]).unwrap();
        let re = sorted_real(r.clone());
        assert!((re[0] - 0.25).abs() < 1e-14 && (re[1] - 0.75).abs() < 1e-14);
        assert!(r.iter().all(|z| z.im.abs() < 1e-14));
    }

    #[test]
    fn complex_pair() {
        let mut r = polynomial_roots(&[1.0, 0.0, 1.0]).unwrap();
        r.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn linear_and_constant() {
        assert_eq!(polynomial_roots(&[-0.3, 1.0]).unwrap(), vec![Complex64::new(0.3, 0.0)]);
        assert!(polynomial_roots(&[2.0]).unwrap().is_empty());
        assert!(polynomial_roots(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn products_of_linear_factors() {
        for roots in [
            vec![0.1, 0.3, 0.5, 0.7, 0.9],
            vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            vec![0.05, 0.33, 0.61, 0.97],
            vec![-2.0, 0.5, 3.0, 10.0],
        ] {
            let mut coeffs = vec![1.0];
            for &r in &roots {
                let mut next = vec![0.0; coeffs.len() + 1];
                for (i, c) in coeffs.iter().enumerate() {
                    next[i] -= r * c;
                    next[i + 1] += c;
                }
                coeffs = next;
            }
            let got = sorted_real(polynomial_roots(&coeffs).unwrap());
            for (g, w) in got.iter().zip(&roots) {
                assert!((g - w).abs() < 1e-10, "{got:?} vs {roots:?}");
            }
        }
    }

    #[test]
    fn double_root_is_located() {
        // (x - 0.5)^2 (x - 0.1)
        let coeffs = [-0.025, 0.35, -1.1, 1.0];
        let got = sorted_real(polynomial_roots(&coeffs).unwrap());
        assert!((got[0] - 0.1).abs() < 1e-10);
        assert!((got[1] - 0.5).abs() < 1e-7 && (got[2] - 0.5).abs() < 1e-7);
    }
}
