//! Fixed-structure bandpass controllers, the process-sensitivity weight and
//! peak-μ synthesis.

mod weight;

pub use weight::{build_sensitivity_weight, SensitivityWeightSpec};

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{FrequencyGrid, RationalTF};
use crate::mu::profile::STABILITY_PADE_ORDER;
use crate::mu::{MuProfile, ProfileOptions, RobustPerformanceEvaluator, WarmStart};
use crate::optim::{axis_simplex, minimize_from, SimplexOptions};
use crate::uncertainty::UncertainPlant;

/// Penalty floor for candidates that destabilize the nominal loop.
pub const INSTABILITY_PENALTY: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassParams {
    pub gain: f64,
    pub zeta_c: f64,
    /// rad/s.
    pub omega_c: f64,
    pub order: u32,
    /// rad/s.
    pub omega_d: f64,
}

impl BandpassParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gain.is_finite()
            && self.gain > 0.0
            && self.zeta_c > 0.0
            && self.zeta_c < 1.0
            && self.omega_c.is_finite()
            && self.omega_c > 0.0
            && self.omega_d.is_finite()
            && self.omega_d > 0.0
            && self.order >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bandpass parameters out of range: {self:?}")))
        }
    }

    /// `|C(jω_c)| = M / (2ζ_c ω_c)ⁿ`.
    pub fn center_gain(&self) -> f64 {
        self.gain / (2.0 * self.zeta_c * self.omega_c).powi(self.order as i32)
    }

    fn to_vec(self) -> [f64; 4] {
        [self.gain, self.zeta_c, self.omega_c, self.omega_d]
    }
}

/// `C(s) = M·(s/(s² + 2ζ_cω_c s + ω_c²))ⁿ·(s − ω_d)/(s + ω_d)`.
pub fn bandpass_tf(p: &BandpassParams) -> Result<RationalTF> {
    p.validate()?;
    let section = RationalTF::new(
        vec![0.0, 1.0],
        vec![p.omega_c * p.omega_c, 2.0 * p.zeta_c * p.omega_c, 1.0],
    )?;
    let mut c = RationalTF::new(vec![-p.omega_d, 1.0], vec![p.omega_d, 1.0])?.scaled(p.gain);
    for _ in 0..p.order {
        c = c.series(&section);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub gain: (f64, f64),
    pub zeta_c: (f64, f64),
    pub omega_c: (f64, f64),
    pub omega_d: (f64, f64),
    pub initial: BandpassParams,
}

impl ParamBounds {
    /// Bounds centred on the first resonance: `ω_c` spans ±10 % around the
    /// observed mode-1 range, the gain three decades around a starting value
    /// that puts `|C(jω_c)|` at `center_gain`.
    pub fn around_first_mode(mode1_lo: f64, mode1_hi: f64, order: u32, center_gain: f64) -> Result<Self> {
        if !(mode1_lo > 0.0 && mode1_hi >= mode1_lo && center_gain > 0.0) {
            return Err(Error::InvalidParameter("invalid first-mode range".into()));
        }
        let omega_c0 = (mode1_lo * mode1_hi).sqrt();
        let zeta0 = 0.3;
        let gain0 = center_gain * (2.0 * zeta0 * omega_c0).powi(order as i32);
        let bounds = Self {
            gain: (gain0 / 30.0, gain0 * 30.0),
            zeta_c: (0.05, 0.7),
            omega_c: (0.9 * mode1_lo, 1.1 * mode1_hi),
            omega_d: (omega_c0, 200.0 * omega_c0),
            initial: BandpassParams {
                gain: gain0,
                zeta_c: zeta0,
                omega_c: omega_c0,
                order,
                omega_d: 20.0 * omega_c0,
            },
        };
        bounds.validate()?;
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [self.gain, self.zeta_c, self.omega_c, self.omega_d];
        let init = self.initial.to_vec();
        for (i, ((lo, hi), x)) in ranges.iter().zip(init).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && *lo > 0.0) {
                return Err(Error::Config(format!("bound {i} is not an increasing positive pair")));
            }
            if !(x >= *lo && x <= *hi) {
                return Err(Error::Config(format!("initial value {x} outside bound {i} [{lo}, {hi}]")));
            }
        }
        if self.zeta_c.1 >= 1.0 {
            return Err(Error::Config("zeta_c upper bound must be below 1".into()));
        }
        self.initial.validate()
    }

    fn is_log(i: usize) -> bool {
        i != 1
    }

    fn ranges(&self) -> [(f64, f64); 4] {
        [self.gain, self.zeta_c, self.omega_c, self.omega_d]
    }

    /// Map a parameter vector into the unit box (log scale for M, ω_c, ω_d).
    fn normalize(&self, p: &BandpassParams) -> Vec<f64> {
        self.ranges()
            .iter()
            .zip(p.to_vec())
            .enumerate()
            .map(|(i, (&(lo, hi), x))| {
                if Self::is_log(i) {
                    (x / lo).ln() / (hi / lo).ln()
                } else {
                    (x - lo) / (hi - lo)
                }
            })
            .collect()
    }

    fn denormalize(&self, u: &[f64]) -> BandpassParams {
        let v: Vec<f64> = self
            .ranges()
            .iter()
            .zip(u)
            .enumerate()
            .map(|(i, (&(lo, hi), &t))| {
                let t = t.clamp(0.0, 1.0);
                if Self::is_log(i) {
                    lo * (hi / lo).powf(t)
                } else {
                    lo + t * (hi - lo)
                }
            })
            .collect();
        BandpassParams {
            gain: v[0],
            zeta_c: v[1],
            omega_c: v[2],
            order: self.initial.order,
            omega_d: v[3],
        }
    }
}

/// `[[W·G, −W·G], [G, −G]]` at one frequency.
pub fn generalized_plant(g: Complex64, w: Complex64) -> [[Complex64; 2]; 2] {
    [[w * g, -w * g], [g, -g]]
}

/// Lower LFT of a 2×2 generalized plant closed with `u = C·y`.
pub fn close_generalized(p: &[[Complex64; 2]; 2], c: Complex64) -> Result<Complex64> {
    let denom = Complex64::new(1.0, 0.0) - p[1][1] * c;
    if denom.norm() == 0.0 {
        return Err(Error::Dimension("closed loop is singular".into()));
    }
    Ok(p[0][0] + p[0][1] * c * p[1][0] / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    pub restarts: usize,
    pub max_evals_per_restart: usize,
    /// Initial simplex edge in normalized coordinates.
    pub step: f64,
    pub f_tol: f64,
    pub x_tol: f64,
    pub profile: ProfileOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_evals_per_restart: 120,
            step: 0.15,
            f_tol: 1e-4,
            x_tol: 2e-3,
            profile: ProfileOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub params: BandpassParams,
    pub mu_peak: f64,
    pub profile: MuProfile,
    pub evaluations: usize,
    pub wall_time_s: f64,
    /// Best objective reached by each restart.
    pub restart_best: Vec<f64>,
    /// Best-so-far objective after every simplex iteration, across restarts.
    pub history: Vec<f64>,
}

/// Objective of the synthesis search; exposed so that callers can score a
/// fixed controller exactly as the optimizer does.
pub struct SynthesisObjective<'a> {
    evaluator: RobustPerformanceEvaluator,
    nominal: RationalTF,
    bounds: &'a ParamBounds,
    warm: WarmStart,
}

impl<'a> SynthesisObjective<'a> {
    pub fn new(
        plant: &UncertainPlant,
        weight: &RationalTF,
        grid: &FrequencyGrid,
        bounds: &'a ParamBounds,
    ) -> Result<Self> {
        Ok(Self {
            evaluator: RobustPerformanceEvaluator::new(plant, weight, grid)?,
            nominal: plant.nominal_tf().rationalized(STABILITY_PADE_ORDER)?,
            bounds,
            warm: WarmStart::default(),
        })
    }

    /// Largest real part of the nominal closed-loop poles.
    pub fn nominal_max_real(&self, c: &RationalTF) -> Result<f64> {
        Ok(self.nominal.feedback(c)?.stability()?.max_real_part())
    }

    /// Peak μ upper bound for stabilizing controllers, otherwise
    /// `10 + max(0, max Re pole)`.
    ///
    /// Scalings are carried over between calls, so the value may differ in
    /// the last digits depending on what was evaluated before.
    pub fn value(&mut self, p: &BandpassParams) -> f64 {
        let Ok(c) = bandpass_tf(p) else {
            return f64::INFINITY;
        };
        match self.nominal_max_real(&c) {
            Ok(re) if re < 0.0 => {}
            Ok(re) => return INSTABILITY_PENALTY + re.max(0.0),
            Err(_) => return f64::INFINITY,
        }
        match self.evaluator.peak_warm(&c, &mut self.warm) {
            Ok((v, _)) => v,
            Err(_) => INSTABILITY_PENALTY,
        }
    }

    fn value_normalized(&mut self, u: &[f64]) -> f64 {
        self.value(&self.bounds.denormalize(u))
    }
}

/// Minimize the peak robust-performance μ over `(M, ζ_c, ω_c, ω_d)`.
///
/// The first restart starts from `bounds.initial`; later restarts start
/// from the incumbent with a randomly oriented simplex drawn from `seed`.
pub fn synthesize(
    plant: &UncertainPlant,
    weight: &RationalTF,
    grid: &FrequencyGrid,
    bounds: &ParamBounds,
    seed: u64,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    bounds.validate()?;
    let started = Instant::now();
    let mut objective = SynthesisObjective::new(plant, weight, grid, bounds)?;
    let lower = [0.0; 4];
    let upper = [1.0; 4];
    let simplex_opts = SimplexOptions {
        max_evals: opts.max_evals_per_restart,
        f_tol: opts.f_tol,
        x_tol: opts.x_tol,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_u = bounds.normalize(&bounds.initial);
    let mut best_f = f64::INFINITY;
    let mut evaluations = 0;
    let mut restart_best = Vec::with_capacity(opts.restarts);
    let mut history = Vec::new();

    for r in 0..opts.restarts.max(1) {
        let simplex = if r == 0 {
            axis_simplex(&best_u, &[opts.step; 4], &lower, &upper)
        } else {
            let mut pts = vec![best_u.clone()];
            for _ in 0..4 {
                pts.push(
                    best_u
                        .iter()
                        .map(|&x| (x + opts.step * rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0))
                        .collect(),
                );
            }
            pts
        };
        let res = minimize_from(|u| objective.value_normalized(u), simplex, &lower, &upper, simplex_opts);
        evaluations += res.evals;
        history.extend(res.history.iter().map(|&h| h.min(best_f)));
        restart_best.push(res.f);
        if res.f < best_f {
            best_f = res.f;
            best_u = res.x;
        }
    }

    let params = bounds.denormalize(&best_u);
    let controller = bandpass_tf(&params)?;
    if best_f >= INSTABILITY_PENALTY || objective.nominal_max_real(&controller)? >= 0.0 {
        return Err(Error::Synthesis("no nominally stabilizing controller found".into()));
    }
    let profile = objective.evaluator.profile(&controller, &opts.profile)?;
    Ok(SynthesisResult {
        params,
        mu_peak: profile.peak_upper,
        profile,
        evaluations,
        wall_time_s: started.elapsed().as_secs_f64(),
        restart_best,
        history,
    })
}
