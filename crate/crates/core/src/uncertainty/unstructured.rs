//! Relative-error envelopes and the unstructured output-multiplicative weight.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{FrequencyGrid, RationalTF};
use crate::optim::{self, SimplexOptions};

pub const DEFAULT_FLOOR: f64 = 1e-4;
pub const DEFAULT_MARGIN: f64 = 0.05;
pub const DEFAULT_ORDER: usize = 4;

/// Penalty multiplier on log-error where the shape dips below the target.
const UNDERSHOOT_PENALTY: f64 = 10.0;

/// `|measured − modeled| / |modeled|` point by point.
pub fn relative_error(measured: &[Complex64], modeled: &[Complex64]) -> Result<Vec<f64>> {
    if measured.len() != modeled.len() {
        return Err(Error::LengthMismatch(format!(
            "{} measured vs {} modeled points",
            measured.len(),
            modeled.len()
        )));
    }
    measured
        .iter()
        .zip(modeled)
        .enumerate()
        .map(|(index, (m, g))| {
            let d = g.norm();
            if d < 1e-300 {
                Err(Error::DivisionGuard { index })
            } else {
                Ok((m - g).norm() / d)
            }
        })
        .collect()
}

/// Pointwise maximum of several error profiles on one grid.
pub fn envelope_over_set(profiles: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::EmptyInput("no error profiles".into()))?;
    let mut out = first.clone();
    for p in &profiles[1..] {
        if p.len() != out.len() {
            return Err(Error::LengthMismatch(format!(
                "profile of length {} vs {}",
                p.len(),
                out.len()
            )));
        }
        for (o, &v) in out.iter_mut().zip(p) {
            *o = o.max(v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnstructuredWeight {
    pub weight: RationalTF,
    pub floor: f64,
    /// Set when the shape fit failed and a constant overbound was used.
    pub fallback: bool,
}

impl UnstructuredWeight {
    pub fn constant(level: f64) -> Self {
        Self {
            weight: RationalTF::constant(level.max(DEFAULT_FLOOR)),
            floor: DEFAULT_FLOOR,
            fallback: false,
        }
    }

    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        self.weight.eval(omega)
    }

    pub fn magnitudes(&self, grid: &FrequencyGrid) -> Result<Vec<f64>> {
        Ok(self
            .weight
            .freq_response(grid)?
            .into_iter()
            .map(|c| c.norm())
            .collect())
    }
}

/// One `(s²/z² + 2ζ_z s/z + 1)/(s²/p² + 2ζ_p s/p + 1)` factor, parameterized
/// in logs so every value the optimizer proposes is stable and minimum-phase.
#[derive(Debug, Clone, Copy)]
struct Section {
    log_z: f64,
    log_zeta_z: f64,
    log_p: f64,
    log_zeta_p: f64,
}

impl Section {
    fn from_slice(x: &[f64]) -> Self {
        Self {
            log_z: x[0],
            log_zeta_z: x[1],
            log_p: x[2],
            log_zeta_p: x[3],
        }
    }

    fn log_mag(&self, omega: f64) -> f64 {
        let quad = |lf: f64, lz: f64| {
            let u = omega / lf.exp();
            let re = 1.0 - u * u;
            let im = 2.0 * lz.exp() * u;
            0.5 * (re * re + im * im).ln()
        };
        quad(self.log_z, self.log_zeta_z) - quad(self.log_p, self.log_zeta_p)
    }

    fn tf(&self) -> RationalTF {
        let quad = |lf: f64, lz: f64| {
            let f = lf.exp();
            vec![1.0, 2.0 * lz.exp() / f, 1.0 / (f * f)]
        };
        RationalTF::new(
            quad(self.log_z, self.log_zeta_z),
            quad(self.log_p, self.log_zeta_p),
        )
        .expect("positive coefficients")
    }
}

fn shape_log_mag(x: &[f64], omega: f64) -> f64 {
    x[0] + x[1..]
        .chunks(4)
        .map(|c| Section::from_slice(c).log_mag(omega))
        .sum::<f64>()
}

fn shape_tf(x: &[f64]) -> RationalTF {
    x[1..]
        .chunks(4)
        .fold(RationalTF::constant(x[0].exp()), |acc, c| {
            acc.series(&Section::from_slice(c).tf())
        })
}

fn fit_cost(x: &[f64], log_omega: &[f64], log_target: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&lw, &lt) in log_omega.iter().zip(log_target) {
        let e = shape_log_mag(x, lw.exp()) - lt;
        acc += if e < 0.0 { UNDERSHOOT_PENALTY * e * e } else { e * e };
    }
    acc / log_omega.len() as f64
}

/// Fit a stable minimum-phase magnitude shape of the given even order to
/// `max(envelope, floor)`, then scale it up until it covers
/// `envelope·(1 + margin)` at every grid point.
pub fn fit_unstructured_weight(
    envelope: &[f64],
    grid: &FrequencyGrid,
    order: usize,
    margin: f64,
) -> Result<UnstructuredWeight> {
    if envelope.len() != grid.len() {
        return Err(Error::LengthMismatch(format!(
            "envelope has {} points, grid {}",
            envelope.len(),
            grid.len()
        )));
    }
    if !order.is_multiple_of(2) || order > 6 {
        return Err(Error::InvalidParameter(format!(
            "unstructured weight order {order} must be one of 0, 2, 4, 6"
        )));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidParameter(format!("margin {margin} must be >= 0")));
    }
    if envelope.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidParameter("envelope must be finite and nonnegative".into()));
    }
    let floor = DEFAULT_FLOOR;
    let target: Vec<f64> = envelope.iter().map(|e| e.max(floor)).collect();
    let log_target: Vec<f64> = target.iter().map(|t| t.ln()).collect();
    let log_omega: Vec<f64> = grid.omega().iter().map(|w| w.ln()).collect();
    let sections = order / 2;

    let (x, fallback) = if sections == 0 {
        (vec![target.iter().copied().fold(0.0, f64::max).ln()], false)
    } else {
        fit_sections(&log_omega, &log_target, sections)
    };
    let shape = shape_tf(&x);
    let mags: Vec<f64> = shape.freq_response(grid)?.iter().map(|c| c.norm()).collect();
    let scale = envelope
        .iter()
        .zip(&mags)
        .map(|(e, m)| e * (1.0 + margin) / m)
        .fold(1.0, f64::max);
    if !scale.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(UnstructuredWeight {
        weight: shape.scaled(scale),
        floor,
        fallback,
    })
}

/// Returns the parameter vector and whether the constant fallback was used.
fn fit_sections(log_omega: &[f64], log_target: &[f64], sections: usize) -> (Vec<f64>, bool) {
    let n = 1 + 4 * sections;
    let (lw_min, lw_max) = (log_omega[0], log_omega[log_omega.len() - 1]);
    let lt_max = log_target.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lt_min = log_target.iter().copied().fold(f64::INFINITY, f64::min);
    let zeta_lo = (0.02f64).ln();
    let zeta_hi = (2.0f64).ln();
    let mut lower = vec![lt_min - 5.0];
    let mut upper = vec![lt_max + 5.0];
    for _ in 0..sections {
        lower.extend([lw_min - 2.0, zeta_lo, lw_min - 2.0, zeta_lo]);
        upper.extend([lw_max + 2.0, zeta_hi, lw_max + 2.0, zeta_hi]);
    }

    let flat: Vec<f64> = {
        let mut x = vec![lt_max];
        for k in 0..sections {
            let lw = lw_min + (lw_max - lw_min) * (k as f64 + 0.5) / sections as f64;
            x.extend([lw, 0.0, lw, 0.0]);
        }
        x
    };
    let peak_at = log_target
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| log_omega[i])
        .unwrap_or(lw_min);
    let bump: Vec<f64> = {
        let mut x = vec![log_target[0]];
        for k in 0..sections {
            let off = 0.15 * (k as f64 + 1.0);
            x.extend([peak_at - off, (0.5f64).ln(), peak_at + off * 0.2, (0.1f64).ln()]);
        }
        x
    };
    let constant_cost = fit_cost(&flat, log_omega, log_target);

    let cost = |x: &[f64]| fit_cost(x, log_omega, log_target);
    let opts = SimplexOptions {
        max_evals: 600 * n,
        f_tol: 1e-10,
        x_tol: 1e-6,
    };
    let step: Vec<f64> = (0..n).map(|i| if i == 0 { 0.5 } else { 0.3 }).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in [flat.clone(), bump] {
        let mut x = start;
        // A couple of restarts from the incumbent help the simplex escape
        // premature collapse on this many parameters.
        for _ in 0..3 {
            let r = optim::minimize(cost, &x, &step, &lower, &upper, opts);
            x = r.x;
            if best.as_ref().is_none_or(|(_, f)| r.f < *f) {
                best = Some((x.clone(), r.f));
            }
        }
    }
    match best {
        Some((x, f)) if f.is_finite() && f <= constant_cost => (x, false),
        _ => (flat, true),
    }
}
