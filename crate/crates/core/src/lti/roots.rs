//! Polynomial roots through balanced companion-matrix eigenvalues.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::poly;
use crate::error::{Error, Result};

/// All complex roots of an ascending-coefficient polynomial.
///
/// The argument is rescaled `s = c·t` so that the constant and leading
/// coefficients have equal magnitude, which keeps the companion matrix of the
/// wide-dynamic-range polynomials produced by chained lightly damped modes
/// well conditioned before balancing.
pub fn roots(p: &[f64]) -> Result<Vec<Complex64>> {
    if p.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("non-finite polynomial coefficient".into()));
    }
    if poly::is_zero(p) {
        return Err(Error::InvalidParameter("all-zero polynomial has no defined roots".into()));
    }
    let n = poly::degree(p);
    let p = &p[..=n];
    let zeros_at_origin = p.iter().position(|&c| c != 0.0).unwrap();
    let mut out = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    let q = &p[zeros_at_origin..];
    let m = q.len() - 1;
    if m == 0 {
        return Ok(out);
    }
    let c = (q[0].abs() / q[m].abs()).powf(1.0 / m as f64);
    let scaled = poly::rescale_argument(q, c);
    let lead = scaled[m];
    let mut comp = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..m {
        comp[(i, m - 1)] = -scaled[i] / lead;
    }
    balance(&mut comp);
    let eig = comp.complex_eigenvalues();
    out.extend(eig.iter().map(|z| Complex64::new(z.re * c, z.im * c)));
    Ok(out)
}

/// Parlett–Reinsch diagonal similarity balancing with radix-2 factors.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    const RADIX: f64 = 2.0;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
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
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        v
    }

    #[test]
    fn linear_and_quadratic() {
        let r = roots(&[1.0, 1.0]).unwrap();
        assert!((r[0] + 1.0).norm() < 1e-14);
        let r = sorted(roots(&[1.0, 0.2, 1.0]).unwrap());
        let im = (1.0f64 - 0.01).sqrt();
        assert!((r[0] - Complex64::new(-0.1, -im)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(-0.1, im)).norm() < 1e-12);
    }

    #[test]
    fn roots_at_origin_are_extracted() {
        let r = roots(&[0.0, 0.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
        assert!(r.iter().any(|z| (z + 2.0).norm() < 1e-12));
    }

    #[test]
    fn wide_dynamic_range_resonances() {
        // (s²/P² + 2ζ s/P + 1) for P = 2π·179 Hz and P = 2π·905 Hz.
        let mk = |f: f64, z: f64| {
            let p = 2.0 * std::f64::consts::PI * f;
            vec![1.0, 2.0 * z / p, 1.0 / (p * p)]
        };
        let p = poly::mul(&mk(179.0, 0.02), &mk(905.0, 0.015));
        let r = roots(&p).unwrap();
        for (f, z) in [(179.0, 0.02), (905.0, 0.015)] {
            let w = 2.0 * std::f64::consts::PI * f;
            let expect = Complex64::new(-z * w, w * (1.0 - z * z).sqrt());
            let best = r.iter().map(|x| (x - expect).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8 * w, "root near {f} Hz off by {best}");
        }
    }

    #[test]
    fn all_zero_is_invalid() {
        assert!(roots(&[0.0, 0.0]).is_err());
    }
}
