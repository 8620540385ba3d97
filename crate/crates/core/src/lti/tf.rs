use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::FrequencyGrid;
use super::{poly, roots};
use crate::error::{Error, Result};

/// Ratio of real polynomials in `s` (ascending powers) with an optional pure
/// delay `exp(-s·delay)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTF {
    num: Vec<f64>,
    den: Vec<f64>,
    delay: f64,
}

/// Denominator roots together with the stability verdict.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub stable: bool,
    pub poles: Vec<Complex64>,
}

impl StabilityReport {
    pub fn max_real_part(&self) -> f64 {
        self.poles
            .iter()
            .map(|p| p.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl RationalTF {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        Self::with_delay(num, den, 0.0)
    }

    pub fn with_delay(num: Vec<f64>, den: Vec<f64>, delay: f64) -> Result<Self> {
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        if poly::is_zero(&den) {
            return Err(Error::InvalidParameter("denominator is identically zero".into()));
        }
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(Error::InvalidParameter(format!("delay {delay} must be >= 0")));
        }
        let num = if num.is_empty() { vec![0.0] } else { poly::trim(num) };
        Ok(Self {
            num,
            den: poly::trim(den),
            delay,
        })
    }

    pub fn constant(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
            delay: 0.0,
        }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// Pure delay `exp(-s·tau)`.
    pub fn delay_only(tau: f64) -> Result<Self> {
        Self::with_delay(vec![1.0], vec![1.0], tau)
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn dc_gain(&self) -> f64 {
        self.num[0] / self.den[0]
    }

    pub fn is_zero(&self) -> bool {
        poly::is_zero(&self.num)
    }

    /// Same rational part with the delay removed.
    pub fn without_delay(&self) -> Self {
        Self {
            delay: 0.0,
            ..self.clone()
        }
    }

    /// Response at `s = jω`; a vanishing denominator is reported, not returned as infinity.
    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        let s = Complex64::new(0.0, omega);
        let d = poly::eval(&self.den, s);
        let n = poly::eval(&self.num, s);
        // Sum of term magnitudes bounds the rounding error of the Horner sum.
        let scale = poly::eval_abs(&self.den, omega.abs());
        if d.norm() <= f64::EPSILON * scale {
            return Err(Error::PoleOnGrid { omega });
        }
        let h = n / d;
        if self.delay > 0.0 {
            Ok(h * Complex64::from_polar(1.0, -omega * self.delay))
        } else {
            Ok(h)
        }
    }

    pub fn freq_response(&self, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
        grid.omega().iter().map(|&w| self.eval(w)).collect()
    }

    /// Cascade: numerators and denominators multiply, delays add.
    pub fn series(&self, other: &RationalTF) -> RationalTF {
        RationalTF {
            num: poly::trim(poly::mul(&self.num, &other.num)),
            den: poly::trim(poly::mul(&self.den, &other.den)),
            delay: self.delay + other.delay,
        }
    }

    /// Sum of two delay-free transfer functions.
    pub fn parallel(&self, other: &RationalTF) -> Result<RationalTF> {
        if self.delay != 0.0 || other.delay != 0.0 {
            return Err(Error::UnsupportedDelay("parallel connection of delayed systems".into()));
        }
        let num = poly::add(
            &poly::mul(&self.num, &other.den),
            &poly::mul(&other.num, &self.den),
        );
        Ok(RationalTF {
            num,
            den: poly::trim(poly::mul(&self.den, &other.den)),
            delay: 0.0,
        })
    }

    pub fn scaled(&self, k: f64) -> RationalTF {
        RationalTF {
            num: poly::trim(poly::scale(&self.num, k)),
            ..self.clone()
        }
    }

    /// Reciprocal of a delay-free transfer function.
    pub fn inverse(&self) -> Result<RationalTF> {
        if self.delay != 0.0 {
            return Err(Error::UnsupportedDelay("inverse of a delayed system".into()));
        }
        if self.is_zero() {
            return Err(Error::InvalidParameter("inverse of the zero transfer function".into()));
        }
        Ok(RationalTF {
            num: self.den.clone(),
            den: self.num.clone(),
            delay: 0.0,
        })
    }

    /// Process-sensitivity closed loop `G/(1 + G·C)` without pole-zero cancellation.
    pub fn feedback(&self, controller: &RationalTF) -> Result<RationalTF> {
        if controller.delay != 0.0 {
            return Err(Error::UnsupportedDelay(
                "controller delay must be zero; keep delay with the plant".into(),
            ));
        }
        let num = poly::trim(poly::mul(&self.num, &controller.den));
        let den = poly::add(
            &poly::mul(&self.den, &controller.den),
            &poly::mul(&self.num, &controller.num),
        );
        RationalTF::with_delay(num, den, self.delay)
    }

    /// Pole locations of a delay-free system and whether they all lie in the
    /// open left half plane with margin `1e-8·max(1, max|pole|)`.
    pub fn stability(&self) -> Result<StabilityReport> {
        if self.delay != 0.0 {
            return Err(Error::UnsupportedDelay(
                "rationalize the delay with pade_delay before root-based stability".into(),
            ));
        }
        if poly::degree(&self.den) == 0 {
            return Ok(StabilityReport {
                stable: true,
                poles: vec![],
            });
        }
        let poles = roots::roots(&self.den)?;
        let rmax = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let eps = 1e-8 * rmax.max(1.0);
        let stable = poles.iter().all(|p| p.re < -eps);
        Ok(StabilityReport { stable, poles })
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.stability()?.stable)
    }

    /// Replace the exact delay by its Padé approximant of the given order.
    pub fn rationalized(&self, pade_order: usize) -> Result<RationalTF> {
        if self.delay == 0.0 {
            return Ok(self.clone());
        }
        Ok(self.without_delay().series(&pade_delay(self.delay, pade_order)?))
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Diagonal `[order/order]` Padé approximant of `exp(-s·tau)`.
pub fn pade_delay(tau: f64, order: usize) -> Result<RationalTF> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidParameter(format!(
            "Padé order {order} outside 1..=3"
        )));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("delay {tau} must be >= 0")));
    }
    if tau == 0.0 {
        return Ok(RationalTF::one());
    }
    let n = order;
    let mut num = Vec::with_capacity(n + 1);
    let mut den = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let c = factorial(2 * n - k) * factorial(n)
            / (factorial(2 * n) * factorial(k) * factorial(n - k));
        let t = c * tau.powi(k as i32);
        den.push(t);
        num.push(if k % 2 == 1 { -t } else { t });
    }
    RationalTF::new(num, den)
}
