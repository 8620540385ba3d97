//! Rational transfer functions, frequency response and stability.

mod grid;
pub mod poly;
pub mod roots;
mod tf;

pub use grid::FrequencyGrid;
pub use tf::{pade_delay, RationalTF, StabilityReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequency/damping description of one resonance, optionally paired with an
/// anti-resonance below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    /// Anti-resonance (rad/s, damping); `None` for a pure resonance.
    pub zero: Option<(f64, f64)>,
    /// Resonance frequency, rad/s.
    pub pole_freq: f64,
    pub pole_damping: f64,
}

/// Polynomial coefficients `(x2, x1)` of `x2·s² + x1·s + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCoefficients {
    pub c2: f64,
    pub c1: f64,
}

impl QuadCoefficients {
    pub fn from_freq_damping(freq: f64, damping: f64) -> Self {
        Self {
            c2: 1.0 / (freq * freq),
            c1: 2.0 * damping / freq,
        }
    }

    pub fn poly(&self) -> Vec<f64> {
        vec![1.0, self.c1, self.c2]
    }
}

impl ModePair {
    pub fn resonance(pole_freq: f64, pole_damping: f64) -> Result<Self> {
        let m = Self {
            zero: None,
            pole_freq,
            pole_damping,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn pair(zero_freq: f64, zero_damping: f64, pole_freq: f64, pole_damping: f64) -> Result<Self> {
        let m = Self {
            zero: Some((zero_freq, zero_damping)),
            pole_freq,
            pole_damping,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.pole_freq) || !ok(self.pole_damping) {
            return Err(Error::InvalidParameter(format!(
                "resonance frequency {} and damping {} must be positive",
                self.pole_freq, self.pole_damping
            )));
        }
        if let Some((z, zz)) = self.zero {
            if !ok(z) || !ok(zz) {
                return Err(Error::InvalidParameter(format!(
                    "anti-resonance frequency {z} and damping {zz} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn numerator(&self) -> Option<QuadCoefficients> {
        self.zero
            .map(|(z, zz)| QuadCoefficients::from_freq_damping(z, zz))
    }

    pub fn denominator(&self) -> QuadCoefficients {
        QuadCoefficients::from_freq_damping(self.pole_freq, self.pole_damping)
    }
}

/// `(n2 s² + n1 s + 1)/(d2 s² + d1 s + 1)`, unity DC gain.
pub fn tf_from_mode_pair(mode: &ModePair) -> Result<RationalTF> {
    mode.validate()?;
    let num = mode.numerator().map(|q| q.poly()).unwrap_or_else(|| vec![1.0]);
    RationalTF::new(num, mode.denominator().poly())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identical_zero_and_pole_cancel_coefficientwise() {
        let m = ModePair::pair(300.0, 0.02, 300.0, 0.02).unwrap();
        let g = tf_from_mode_pair(&m).unwrap();
        assert_eq!(g.num(), g.den());
    }

    #[test]
    fn coefficient_values() {
        let z = 2.0 * PI * 100.0;
        let q = QuadCoefficients::from_freq_damping(z, 0.01);
        // 1/Z² and 2ζ/Z evaluated by hand.
        assert!((q.c2 - 2.533_029_591_058_444e-6).abs() < 1e-18);
        assert!((q.c1 - 3.183_098_861_837_907e-5).abs() < 1e-18);
    }

    #[test]
    fn unity_dc_gain() {
        for m in [
            ModePair::resonance(1000.0, 0.02).unwrap(),
            ModePair::pair(800.0, 0.05, 1200.0, 0.01).unwrap(),
        ] {
            let g = tf_from_mode_pair(&m).unwrap();
            assert_eq!(g.dc_gain(), 1.0);
            assert!((g.eval(1e-9).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(ModePair::resonance(0.0, 0.1).is_err());
        assert!(ModePair::resonance(10.0, -0.1).is_err());
        assert!(ModePair::pair(-1.0, 0.1, 10.0, 0.1).is_err());
    }
}
