//! Derivative-free bounded simplex search and a small BFGS minimizer.
//!
//! Trial points are projected onto the box after every reflection,
//! expansion and contraction, so every objective call sees a feasible point.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Stop when the spread of objective values across the simplex falls
    /// below `f_tol·(1 + |f_best|)` ...
    pub f_tol: f64,
    /// ... and the simplex diameter falls below `x_tol`.
    pub x_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            f_tol: 1e-8,
            x_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// Best objective value after each iteration; non-increasing.
    pub history: Vec<f64>,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

/// Axis-aligned starting simplex around `x0`; steps that would leave the box
/// are taken in the opposite direction.
pub fn axis_simplex(x0: &[f64], step: &[f64], lower: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] = if x0[i] + step[i] <= upper[i] {
            x0[i] + step[i]
        } else {
            x0[i] - step[i]
        };
        project(&mut v, lower, upper);
        simplex.push(v);
    }
    simplex
}

pub fn minimize<F>(
    f: F,
    x0: &[f64],
    step: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: SimplexOptions,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut start = x0.to_vec();
    project(&mut start, lower, upper);
    let simplex = axis_simplex(&start, step, lower, upper);
    minimize_from(f, simplex, lower, upper, opts)
}

pub fn minimize_from<F>(
    mut f: F,
    simplex: Vec<Vec<f64>>,
    lower: &[f64],
    upper: &[f64],
    opts: SimplexOptions,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = lower.len();
    assert_eq!(simplex.len(), n + 1, "simplex needs n+1 vertices");
    let mut evals = 0usize;
    let mut call = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut pts: Vec<(Vec<f64>, f64)> = simplex
        .into_iter()
        .map(|mut x| {
            project(&mut x, lower, upper);
            let v = call(&x, &mut evals);
            (x, v)
        })
        .collect();
    let mut history = Vec::new();
    let mut converged = false;

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    loop {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(pts[0].1);
        let f_best = pts[0].1;
        let f_worst = pts[n].1;
        let diameter = pts
            .iter()
            .skip(1)
            .map(|(x, _)| {
                x.iter()
                    .zip(&pts[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (f_worst - f_best).abs() <= opts.f_tol * (1.0 + f_best.abs()) && diameter <= opts.x_tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in pts.iter().take(n) {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&pts[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut p, lower, upper);
            p
        };

        let xr = along(alpha);
        let fr = call(&xr, &mut evals);
        if fr < pts[0].1 {
            let xe = along(gamma);
            let fe = call(&xe, &mut evals);
            pts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < pts[n - 1].1 {
            pts[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < pts[n].1 {
            let xc = along(rho * alpha);
            let fc = call(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = call(&xc, &mut evals);
            (xc, fc)
        };
        if fc < pts[n].1.min(fr) {
            pts[n] = (xc, fc);
            continue;
        }
        let best = pts[0].0.clone();
        for p in pts.iter_mut().skip(1) {
            let mut x: Vec<f64> = best
                .iter()
                .zip(&p.0)
                .map(|(b, v)| b + sigma * (v - b))
                .collect();
            project(&mut x, lower, upper);
            let v = call(&x, &mut evals);
            *p = (x, v);
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = pts.swap_remove(0);
    SimplexResult {
        x,
        f,
        evals,
        history,
        converged,
    }
}

/// Outcome of a quasi-Newton run.
#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
}

/// Unconstrained BFGS with Armijo backtracking. `fg` returns the objective
/// and writes the gradient into its second argument; returning `None`
/// aborts the run early (the incumbent is returned).
pub fn bfgs<F>(mut fg: F, x0: &[f64], max_iter: usize, g_tol: f64) -> BfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> Option<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = match fg(&x, &mut g) {
        Some(v) => v,
        None => {
            return BfgsResult {
                x,
                f: f64::NAN,
                iterations: 0,
            }
        }
    };
    let identity = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    let mut h = vec![0.0; n * n];
    identity(&mut h);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= g_tol {
            break;
        }
        let mut dir: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>())
            .collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if slope >= 0.0 {
            identity(&mut h);
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            match fg(&x_new, &mut g_new) {
                None => {
                    return BfgsResult {
                        x: x_new.clone(),
                        f: f64::NAN,
                        iterations,
                    }
                }
                Some(v) if v.is_finite() && v <= f + 1e-4 * step * slope => {
                    accepted = Some(v);
                    break;
                }
                Some(_) => step *= 0.5,
            }
        }
        let Some(f_new) = accepted else { break };
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * s.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt() {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        let progress = f - f_new;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        f = f_new;
        if progress <= 1e-15 * f.abs().max(1e-300) {
            break;
        }
    }
    BfgsResult { x, f, iterations }
}
