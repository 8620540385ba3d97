//! Closed-loop metrics: sensitivities, loop margins and resonance damping.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{FrequencyGrid, RationalTF};

const CROSSING_REL_TOL: f64 = 1e-6;
pub const DEFAULT_SEARCH_BAND: f64 = 0.15;

fn closed_loop(
    plant: &RationalTF,
    controller: &RationalTF,
    grid: &FrequencyGrid,
    numerator: impl Fn(Complex64, Complex64) -> Complex64,
) -> Result<Vec<f64>> {
    let g = plant.freq_response(grid)?;
    let c = controller.freq_response(grid)?;
    g.iter()
        .zip(&c)
        .zip(grid.omega())
        .map(|((&g, &c), &omega)| {
            let denom = 1.0 + g * c;
            if denom.norm() == 0.0 {
                return Err(Error::ClosedLoopPoleOnAxis { omega });
            }
            Ok((numerator(g, c) / denom).norm())
        })
        .collect()
}

/// `|G/(1 + GC)|` on the grid.
pub fn process_sensitivity(plant: &RationalTF, controller: &RationalTF, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    closed_loop(plant, controller, grid, |g, _| g)
}

/// `|GC/(1 + GC)|` on the grid.
pub fn noise_sensitivity(plant: &RationalTF, controller: &RationalTF, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    closed_loop(plant, controller, grid, |g, c| g * c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// rad/s.
    pub freq: f64,
    /// Angle between `L(jω)` and the critical point `−1`, degrees in
    /// `[0, 180]`. For a lagging loop phase `φ ∈ (−180°, 0]` this is `180° + φ`.
    pub phase_margin: f64,
    /// Unwrapped loop phase at the crossing, degrees.
    pub phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub crossings: Vec<Crossing>,
    /// Every crossing has a positive margin.
    pub stable: bool,
}

impl MarginReport {
    pub fn min_margin(&self) -> Option<f64> {
        self.crossings.iter().map(|c| c.phase_margin).reduce(f64::min)
    }
}

/// Phase unwrapped along `grid` by nearest-branch continuation (radians).
pub fn unwrapped_phase(response: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(response.len());
    let mut prev: Option<f64> = None;
    for z in response {
        let raw = z.arg();
        let p = match prev {
            None => raw,
            Some(q) => raw + std::f64::consts::TAU * ((q - raw) / std::f64::consts::TAU).round(),
        };
        out.push(p);
        prev = Some(p);
    }
    out
}

/// All 0 dB crossings of `|L(jω)|` and the phase margin at each.
///
/// Brackets come from sign changes of `log|L|` on the grid; each is refined
/// by bisection in `log ω`. The reported phase continues the branch of the
/// unwrapped phase at the bracket's lower end.
pub fn phase_margins(loop_tf: &RationalTF, grid: &FrequencyGrid) -> Result<MarginReport> {
    let omega = grid.omega();
    let resp = loop_tf.freq_response(grid)?;
    let phase = unwrapped_phase(&resp);
    let logmag: Vec<f64> = resp.iter().map(|z| z.norm().ln()).collect();
    let mut crossings = Vec::new();
    for k in 0..omega.len().saturating_sub(1) {
        let (a, b) = (logmag[k], logmag[k + 1]);
        if !(a.is_finite() && b.is_finite()) || (a < 0.0) == (b < 0.0) {
            continue;
        }
        let below_lo = a < 0.0;
        let (mut lo, mut hi) = (omega[k].ln(), omega[k + 1].ln());
        while hi - lo > 0.1 * CROSSING_REL_TOL {
            let mid = 0.5 * (lo + hi);
            if (loop_tf.eval(mid.exp())?.norm().ln() < 0.0) == below_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        crossings.push(margin_at(loop_tf, (0.5 * (lo + hi)).exp(), phase[k])?);
    }
    let stable = crossings.iter().all(|c| c.phase_margin > 0.0);
    Ok(MarginReport { crossings, stable })
}

fn margin_at(loop_tf: &RationalTF, w: f64, reference_phase: f64) -> Result<Crossing> {
    let raw = loop_tf.eval(w)?.arg();
    let tau = std::f64::consts::TAU;
    let phase = raw + tau * ((reference_phase - raw) / tau).round();
    Ok(Crossing {
        freq: w,
        phase_margin: 180.0 - raw.to_degrees().abs(),
        phase_deg: phase.to_degrees(),
    })
}

/// Peak of `open` minus peak of `closed` within `mode_freq·(1 ± band)`, in dB.
pub fn gain_reduction_at_mode(
    open: &[f64],
    closed: &[f64],
    grid: &FrequencyGrid,
    mode_freq: f64,
    band: f64,
) -> Result<f64> {
    if open.len() != grid.len() || closed.len() != grid.len() {
        return Err(Error::LengthMismatch("profiles must share the grid".into()));
    }
    if !(band > 0.0 && mode_freq > 0.0) {
        return Err(Error::InvalidParameter("mode frequency and band must be positive".into()));
    }
    let (lo, hi) = (mode_freq * (1.0 - band), mode_freq * (1.0 + band));
    let mut peak_open = f64::NEG_INFINITY;
    let mut peak_closed = f64::NEG_INFINITY;
    for ((&w, &o), &c) in grid.omega().iter().zip(open).zip(closed) {
        if w >= lo && w <= hi {
            peak_open = peak_open.max(o);
            peak_closed = peak_closed.max(c);
        }
    }
    if !peak_open.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "no grid point within [{lo:.3}, {hi:.3}] rad/s"
        )));
    }
    Ok(20.0 * (peak_open / peak_closed).log10())
}

pub fn to_db(x: f64) -> f64 {
    20.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::from_rad_per_sec((0..400).map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 399.0)).collect())
            .unwrap()
    }

    #[test]
    fn sensitivity_trivia() {
        let g = grid();
        let plant = RationalTF::new(vec![1.0], vec![1.0, 0.2, 1.0]).unwrap();
        let zero = RationalTF::constant(0.0);
        let ps = process_sensitivity(&plant, &zero, &g).unwrap();
        let mag: Vec<f64> = plant.freq_response(&g).unwrap().iter().map(|z| z.norm()).collect();
        assert_eq!(ps, mag);
        assert!(noise_sensitivity(&plant, &zero, &g).unwrap().iter().all(|&v| v == 0.0));
        let one = RationalTF::one();
        assert!(process_sensitivity(&one, &one, &g).unwrap().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert!(noise_sensitivity(&one, &one, &g).unwrap().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn matches_feedback_composition() {
        let g = grid();
        let plant = RationalTF::new(vec![2.0, 0.5], vec![1.0, 0.3, 1.0, 0.1]).unwrap();
        let c = RationalTF::new(vec![0.0, 0.8], vec![1.0, 0.5, 1.0]).unwrap();
        let ps = process_sensitivity(&plant, &c, &g).unwrap();
        let fb = plant.feedback(&c).unwrap().freq_response(&g).unwrap();
        for (a, b) in ps.iter().zip(&fb) {
            assert!((a - b.norm()).abs() < 1e-12 * b.norm().max(1e-300));
        }
        let sxn = noise_sensitivity(&plant, &c, &g).unwrap();
        let cm = c.freq_response(&g).unwrap();
        for ((p, s), cz) in ps.iter().zip(&sxn).zip(&cm) {
            assert!((p * cz.norm() - s).abs() < 1e-10 * s.max(1e-12));
        }
    }

    #[test]
    fn integrator_margin() {
        let l = RationalTF::new(vec![3.0], vec![0.0, 1.0]).unwrap();
        let r = phase_margins(&l, &grid()).unwrap();
        assert_eq!(r.crossings.len(), 1);
        assert!((r.crossings[0].freq - 3.0).abs() < 3e-6);
        assert!((r.crossings[0].phase_margin - 90.0).abs() < 1e-9);
        assert!(r.stable);
    }

    #[test]
    fn double_integrator_margin() {
        let l = RationalTF::new(vec![1.0], vec![0.0, 0.0, 1.0]).unwrap();
        let r = phase_margins(&l, &grid()).unwrap();
        assert_eq!(r.crossings.len(), 1);
        assert!(r.crossings[0].phase_margin.abs() < 1e-9);
    }

    #[test]
    fn lead_loop_margin() {
        // ω⁴ = ω² + 1 at the crossing.
        let w0 = ((1.0 + 5f64.sqrt()) / 2.0).sqrt();
        let l = RationalTF::new(vec![1.0, 1.0], vec![0.0, 0.0, 1.0]).unwrap();
        let r = phase_margins(&l, &grid()).unwrap();
        assert_eq!(r.crossings.len(), 1);
        let c = r.crossings[0];
        assert!((c.freq / w0 - 1.0).abs() < 1e-6);
        assert!((c.phase_margin - w0.atan().to_degrees()).abs() < 1e-4);
        assert!((c.phase_margin - 51.8).abs() < 0.05);
        assert!((l.eval(c.freq).unwrap().norm() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn leading_phase_margin_is_distance_to_critical_point() {
        // L = -2/(s+1)·… leads by 180° at DC; at the crossing the phase is
        // 180° − atan(√3) = 120°, i.e. 60° away from −1.
        let l = RationalTF::new(vec![-2.0], vec![1.0, 1.0]).unwrap();
        let r = phase_margins(&l, &grid()).unwrap();
        assert_eq!(r.crossings.len(), 1);
        assert!((r.crossings[0].freq - 3f64.sqrt()).abs() < 1e-5);
        assert!((r.crossings[0].phase_margin - 60.0).abs() < 1e-4);
        assert!((r.crossings[0].phase_deg - 120.0).abs() < 1e-4);
    }

    #[test]
    fn no_crossing() {
        let l = RationalTF::constant(0.1);
        let r = phase_margins(&l, &grid()).unwrap();
        assert!(r.crossings.is_empty());
        assert!(r.min_margin().is_none());
    }

    #[test]
    fn gain_reduction_examples() {
        let g = grid();
        let open: Vec<f64> = g.omega().iter().map(|w| 1.0 / (1.0 + (w - 1.0).powi(2))).collect();
        assert_eq!(gain_reduction_at_mode(&open, &open, &g, 1.0, 0.15).unwrap(), 0.0);
        let closed: Vec<f64> = open.iter().map(|v| v / 10f64.sqrt()).collect();
        assert!((gain_reduction_at_mode(&open, &closed, &g, 1.0, 0.15).unwrap() - 10.0).abs() < 1e-12);
        assert!(gain_reduction_at_mode(&open, &closed, &g, 1e6, 0.15).is_err());
    }
}
