//! Real polynomials stored as ascending-power coefficient slices.

use num_complex::Complex64;

/// Evaluate `p(s)` by Horner recurrence.
pub fn eval(p: &[f64], s: Complex64) -> Complex64 {
    p.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// `Σ |c_k|·x^k` for `x >= 0`.
pub fn eval_abs(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c.abs())
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, &x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, &x) in b.iter().enumerate() {
        out[i] += x;
    }
    trim(out)
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|&x| x * k).collect()
}

/// Drop exactly-zero high-order coefficients, keeping at least one entry.
pub fn trim(mut p: Vec<f64>) -> Vec<f64> {
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
    }
    if p.is_empty() {
        p.push(0.0);
    }
    p
}

pub fn degree(p: &[f64]) -> usize {
    p.iter().rposition(|&c| c != 0.0).unwrap_or(0)
}

pub fn is_zero(p: &[f64]) -> bool {
    p.iter().all(|&c| c == 0.0)
}

/// `p(c·t)` as a polynomial in `t`.
pub fn rescale_argument(p: &[f64], c: f64) -> Vec<f64> {
    let mut f = 1.0;
    p.iter()
        .map(|&x| {
            let v = x * f;
            f *= c;
            v
        })
        .collect()
}
